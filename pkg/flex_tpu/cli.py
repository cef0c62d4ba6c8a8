"""
Command line interface: `run`, `sweep` and `table` subcommands.

Each subcommand reads cfg/<subcommand>.yaml when it exists (or the file
given with --config); flags override the file. Exit status is 0 on success,
1 for invalid input, 2 when the PE grid disagrees with the cost model and
3 for I/O errors.
"""

import argparse
import os
import sys
from dataclasses import replace

from autolab_core import Logger, YamlConfig

from . import report, utils
from .errors import FlexTpuError, SimulationError, ValidationError, VerifyMismatchError
from .workload import resolve_topology_path

logger = Logger.get_logger('flex_tpu')

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY = 2
EXIT_IO = 3

COMMANDS = ('run', 'sweep', 'table')


def _clock(value):
    return value if value == report.AUTO else float(value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='flex_tpu', description='Cycle model and PE grid simulator of a systolic array '
                                     'with per-layer reconfigurable dataflow')
    subparsers = parser.add_subparsers(dest='command')
    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument('--config', type=str, default=None,
                         help='YAML config, defaults to cfg/{}.yaml'.format(command))
        sub.add_argument('--rows', type=int, default=None)
        sub.add_argument('--cols', type=int, default=None)
        sub.add_argument('--dataflow', type=str, default=None, choices=['is', 'os', 'ws', 'flex'])
        sub.add_argument('--clock-ns', type=_clock, default=None,
                         help='static clock period in ns, or auto')
        sub.add_argument('--flex-clock-ns', type=_clock, default=None,
                         help='flexible clock period in ns, or auto')
        sub.add_argument('--verify', action='store_true', default=None,
                         help='cross-check layers on the PE grid simulator')
        sub.add_argument('--out', type=str, default=None)
        sub.add_argument('--trace-cap', type=int, default=None)
        if command == 'table':
            sub.add_argument('--topology', type=str, nargs='+', default=None,
                             help='topology files or bundled model names')
            sub.add_argument('--plot-out', type=str, default=None)
        else:
            sub.add_argument('--topology', type=str, default=None,
                             help='topology file or bundled model name')
        if command == 'sweep':
            sub.add_argument('--sizes', type=str, default=None,
                             help='comma separated array sizes, e.g. 32x32,128x128')
    return parser


def parse_sizes(text):
    sizes = []
    for item in text.split(','):
        item = item.strip().lower()
        if not item:
            continue
        try:
            rows, cols = (int(v) for v in item.split('x'))
        except ValueError:
            raise ValidationError('bad array size {!r}, expected ROWSxCOLS'.format(item))
        sizes.append((rows, cols))
    return sizes


def _load_config(args):
    path = args.config
    if path is None:
        default = os.path.join('cfg', '{}.yaml'.format(args.command))
        path = default if os.path.exists(default) else None
    if path is None:
        return None
    logger.info('Loading config %s', path)
    return YamlConfig(path)


def _run_config(args, cfg):
    topology = args.topology if isinstance(args.topology, str) else None
    run_cfg = report.RunConfig.from_config(
        cfg, topology_path=topology, rows=args.rows, cols=args.cols, dataflow=args.dataflow,
        clock_ns_static=args.clock_ns, clock_ns_flex=args.flex_clock_ns, verify=args.verify,
        output_path=args.out, trace_cap=args.trace_cap)
    if run_cfg.topology_path:
        run_cfg = replace(run_cfg, topology_path=resolve_topology_path(run_cfg.topology_path))
    return run_cfg


def _prepare_outputs(cfg):
    """ Attaches the log file and saves the effective config next to the outputs. """
    if cfg is None:
        return
    log_file = utils.cfg_get(cfg, 'log_file')
    if log_file:
        utils.mkdir_for_file(log_file)
        Logger.add_log_file(logger, log_file, global_log_file=True)
    output_cfg = utils.cfg_get(cfg, 'output', {})
    output_dir = utils.cfg_get(output_cfg, 'dir', '')
    save_conf_name = utils.cfg_get(cfg, 'save_conf_name')
    if save_conf_name:
        utils.mkdir_if_missing(output_dir)
        cfg.save(os.path.join(output_dir, save_conf_name))


def _command_run(args, cfg):
    run_cfg = _run_config(args, cfg)
    if not run_cfg.topology_path:
        raise ValidationError('no topology given')
    report.run(run_cfg)


def _command_sweep(args, cfg):
    run_cfg = _run_config(args, cfg)
    if not run_cfg.topology_path:
        raise ValidationError('no topology given')
    if args.sizes is not None:
        sizes = parse_sizes(args.sizes)
    else:
        sizes = list(utils.cfg_get(cfg, 'sizes', []))
    report.sweep_array_sizes(run_cfg, sizes)


def _command_table(args, cfg):
    run_cfg = _run_config(args, cfg)
    paths = args.topology if args.topology is not None else utils.cfg_get(cfg, 'topologies', [])
    paths = [resolve_topology_path(p) for p in paths]
    reports = report.build_table(paths, run_cfg)
    table = report.emit_speedup_table(reports)
    if run_cfg.output_path:
        utils.write_text(run_cfg.output_path, table)
    else:
        sys.stdout.write(table)

    plot_path = args.plot_out
    if plot_path is None and cfg is not None:
        output_cfg = utils.cfg_get(cfg, 'output', {})
        plot_name = utils.cfg_get(output_cfg, 'plot')
        if plot_name:
            plot_path = os.path.join(utils.cfg_get(output_cfg, 'dir', ''), plot_name)
    if plot_path:
        utils.write_text(plot_path, report.emit_plot_data(reports))


_COMMANDS = {
    'run': _command_run,
    'sweep': _command_sweep,
    'table': _command_table,
}


def main(argv=None):
    """ Runs one subcommand and returns its exit status. """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_INVALID
    try:
        cfg = _load_config(args)
        _prepare_outputs(cfg)
        _COMMANDS[args.command](args, cfg)
    except (VerifyMismatchError, SimulationError) as e:
        logger.error('%s', e)
        return EXIT_VERIFY
    except FlexTpuError as e:
        logger.error('%s', e)
        return EXIT_INVALID
    except OSError as e:
        logger.error('%s', e)
        return EXIT_IO
    return EXIT_OK
