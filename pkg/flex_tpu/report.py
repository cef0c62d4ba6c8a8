"""
Runs models through the scheduler and turns cycle counts into reports:
per-layer CSVs, array-size sweeps, static-versus-flexible speedup tables
and execution-time plot data.
"""

import csv
import io
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from autolab_core import Logger
from tqdm import tqdm

from . import utils
from .constants import (CLOCK_NS_FLEX, CLOCK_NS_STATIC, COMMENT_TOKEN,
                        CRITICAL_PATH_DELAY_NS, CYCLES_FMT, DEFAULT_ARRAY_COLS, DEFAULT_ARRAY_ROWS,
                        DEFAULT_TRACE_CAP, NS_PER_MS, SPEEDUP_FMT, TIME_FMT,
                        UTILIZATION_FMT, VERIFY_SEED)
from .dataflow_map import DATAFLOWS, ArrayConfig, Dataflow, LayerCostReport
from .errors import ValidationError
from .scheduler import (StaticComparison, build_schedule, cmu_program_to_csv,
                        emit_cmu_program, plan_schedule, schedule_to_csv,
                        verify_topology)
from .workload import load_topology

logger = Logger.get_logger(__name__)

FLEX_MODE = 'FLEX'
MODES = ('IS', 'OS', 'WS', FLEX_MODE)
AUTO = 'auto'

REPORT_COLUMNS = ['layer', 'dataflow', 'cycles', 'folds', 'sram_reads_ifmap', 'sram_reads_filter',
                  'sram_writes_ofmap', 'psum_spills', 'utilization']
SPEEDUP_COLUMNS = ['model', 'flex_cycles', 'dataflow', 'static_cycles', 'speedup']
PLOT_COLUMNS = ['model', 'mode', 'execution_ms']
MEAN_LABEL = 'mean'


def clock_for_array(rows, cols):
    """ (static, flexible) critical-path delay in ns of a synthesized array.

    Sizes without a synthesis result fall back to the 32x32 delays.
    """
    return CRITICAL_PATH_DELAY_NS.get((rows, cols), (CLOCK_NS_STATIC, CLOCK_NS_FLEX))


def execution_time_ms(cycles, clock_ns):
    return cycles * clock_ns / NS_PER_MS


def _normalize_mode(mode):
    mode = str(mode).strip().upper()
    if mode not in MODES:
        raise ValidationError('unknown dataflow mode {!r}, expected one of is, os, ws, flex'.format(mode))
    return mode


def _coerce(kind, key, value):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ValidationError('config key {} must be {}, got {!r}'.format(key, kind.__name__, value))


@dataclass(frozen=True)
class RunConfig:
    """ Settings of one run.

    clock_auto selects the delays by array size from the synthesized table
    instead of clock_ns_static and clock_ns_flex.
    """
    topology_path: str = ''
    rows: int = DEFAULT_ARRAY_ROWS
    cols: int = DEFAULT_ARRAY_COLS
    dataflow: str = FLEX_MODE
    clock_ns_static: float = CLOCK_NS_STATIC
    clock_ns_flex: float = CLOCK_NS_FLEX
    clock_auto: bool = False
    verify: bool = False
    output_path: Optional[str] = None
    schedule_path: Optional[str] = None
    cmu_path: Optional[str] = None
    trace_cap: int = DEFAULT_TRACE_CAP
    seed: int = VERIFY_SEED

    def __post_init__(self):
        object.__setattr__(self, 'dataflow', _normalize_mode(self.dataflow))
        if self.clock_auto:
            static_ns, flex_ns = clock_for_array(self.rows, self.cols)
            object.__setattr__(self, 'clock_ns_static', static_ns)
            object.__setattr__(self, 'clock_ns_flex', flex_ns)
        if self.clock_ns_static <= 0 or self.clock_ns_flex <= 0:
            raise ValidationError('clock periods must be > 0, got {} and {}'.format(
                self.clock_ns_static, self.clock_ns_flex))
        if self.trace_cap is not None and self.trace_cap < 0:
            raise ValidationError('trace cap must be >= 0, got {}'.format(self.trace_cap))

    @property
    def array(self):
        return ArrayConfig(self.rows, self.cols, self.clock_ns_static)

    def with_size(self, rows, cols):
        """ Same run on another array; auto clocks follow the new size. """
        return replace(self, rows=rows, cols=cols)

    @staticmethod
    def from_config(cfg, **overrides):
        """ Builds a RunConfig from a YamlConfig (or dict) and flag overrides.

        Overrides set to None are ignored, so unset flags keep the file value.
        """
        array_cfg = utils.cfg_get(cfg, 'array', {})
        clock_cfg = utils.cfg_get(cfg, 'clock', {})
        output_cfg = utils.cfg_get(cfg, 'output', {})
        output_dir = utils.cfg_get(output_cfg, 'dir', '')

        def out_file(key):
            name = utils.cfg_get(output_cfg, key)
            return os.path.join(output_dir, name) if name else None

        if clock_cfg == AUTO:
            clock_cfg = {'static_ns': AUTO, 'flex_ns': AUTO}
        values = dict(
            topology_path=utils.cfg_get(cfg, 'topology', ''),
            rows=_coerce(int, 'array.rows', utils.cfg_get(array_cfg, 'rows', DEFAULT_ARRAY_ROWS)),
            cols=_coerce(int, 'array.cols', utils.cfg_get(array_cfg, 'cols', DEFAULT_ARRAY_COLS)),
            dataflow=utils.cfg_get(cfg, 'dataflow', FLEX_MODE),
            clock_ns_static=utils.cfg_get(clock_cfg, 'static_ns', CLOCK_NS_STATIC),
            clock_ns_flex=utils.cfg_get(clock_cfg, 'flex_ns', CLOCK_NS_FLEX),
            verify=bool(utils.cfg_get(cfg, 'verify', False)),
            output_path=out_file('report'),
            schedule_path=out_file('schedule'),
            cmu_path=out_file('cmu'),
            trace_cap=_coerce(int, 'trace_cap', utils.cfg_get(cfg, 'trace_cap', DEFAULT_TRACE_CAP)),
            seed=_coerce(int, 'seed', utils.cfg_get(cfg, 'seed', VERIFY_SEED)),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        # auto on either clock selects both delays from the array size
        if AUTO in (values['clock_ns_static'], values['clock_ns_flex']):
            values['clock_auto'] = True
            values['clock_ns_static'], values['clock_ns_flex'] = CLOCK_NS_STATIC, CLOCK_NS_FLEX
        values['clock_ns_static'] = _coerce(float, 'clock.static_ns', values['clock_ns_static'])
        values['clock_ns_flex'] = _coerce(float, 'clock.flex_ns', values['clock_ns_flex'])
        return RunConfig(**values)


@dataclass
class ModelReport:
    """ Costs of one model on one array under IS, OS, WS and flexible execution.

    mode is the dataflow the run was asked for; report_to_csv writes that mode's rows.
    Static modes run at array.clock_period, flexible execution at clock_ns_flex.
    """
    model_name: str
    array: ArrayConfig
    schedule: object
    clock_ns_flex: float = CLOCK_NS_FLEX
    mode: str = FLEX_MODE

    def layer_reports(self, mode=None):
        mode = _normalize_mode(mode or self.mode)
        if mode == FLEX_MODE:
            return [entry.reports[entry.chosen] for entry in self.schedule.entries]
        df = Dataflow.parse(mode)
        return [entry.reports[df] for entry in self.schedule.entries]

    @property
    def totals(self):
        totals = {str(df): self.schedule.static_total(df) for df in DATAFLOWS}
        totals[FLEX_MODE] = self.schedule.total_flex_cycles
        return totals

    @property
    def comparison(self):
        return StaticComparison.from_schedule(self.schedule)

    @property
    def speedups(self):
        return {str(df): value for df, value in self.comparison.speedups.items()}

    def execution_time_ms(self, mode=None):
        mode = _normalize_mode(mode or self.mode)
        clock_ns = self.clock_ns_flex if mode == FLEX_MODE else self.array.clock_period
        return execution_time_ms(self.totals[mode], clock_ns)

    def time_saved_ms(self, df):
        """ Wall-clock time flexible execution saves over static `df`. """
        return self.execution_time_ms(str(Dataflow.parse(df))) - self.execution_time_ms(FLEX_MODE)


def build_report(topology, config):
    """ Schedules a topology and cross-checks it on the PE grid when config.verify is set. """
    array = config.array
    schedule = build_schedule(topology, array)
    if config.verify:
        if config.dataflow == FLEX_MODE:
            dataflows = schedule.chosen_dataflows
        else:
            dataflows = [Dataflow.parse(config.dataflow)] * len(topology)
        verify_topology(topology, array, dataflows, trace_cap=config.trace_cap, seed=config.seed)
    return ModelReport(topology.model_name, array, schedule, config.clock_ns_flex, config.dataflow)


def run(config):
    """ Evaluates one topology and writes its report.

    Parameters
    ----------
    config : RunConfig

    Returns
    -------
    ModelReport
    """
    topology = load_topology(config.topology_path)
    logger.info('Running %s (%d layers) on a %dx%d array in %s mode', topology.model_name,
                len(topology), config.rows, config.cols, config.dataflow)
    report = build_report(topology, config)

    if config.output_path:
        utils.write_text(config.output_path, report_to_csv(report))
    if config.schedule_path:
        utils.write_text(config.schedule_path, schedule_to_csv(report.schedule))
    if config.cmu_path:
        plans = plan_schedule(topology, config.array, report.schedule)
        utils.write_text(config.cmu_path, cmu_program_to_csv(emit_cmu_program(report.schedule, plans)))

    logger.info('%s: %d cycles, %.3f ms', config.dataflow, report.totals[config.dataflow],
                report.execution_time_ms())
    return report


def _array_size(size):
    try:
        rows, cols = size
    except (TypeError, ValueError):
        raise ValidationError('array size must be a (rows, cols) pair, got {!r}'.format(size))
    return _coerce(int, 'rows', rows), _coerce(int, 'cols', cols)


def sweep_array_sizes(config, sizes):
    """ Runs one topology on several array sizes.

    Parameters
    ----------
    config : RunConfig
        output_path, when set, receives the combined CSV keyed by rows,cols
    sizes : list of (rows, cols)

    Returns
    -------
    list of ModelReport
        one per size, in order
    """
    sizes = [_array_size(size) for size in sizes]
    if not sizes:
        raise ValidationError('array size sweep needs at least one size')
    topology = load_topology(config.topology_path)
    reports = []
    for rows, cols in tqdm(sizes, desc='sweep {}'.format(topology.model_name)):
        report = build_report(topology, config.with_size(rows, cols))
        logger.info('%dx%d: flex %d cycles, speedup vs OS %.3f', rows, cols,
                    report.totals[FLEX_MODE], report.speedups['OS'])
        reports.append(report)
    if config.output_path:
        utils.write_text(config.output_path, sweep_to_csv(reports))
    return reports


def _report_rows(report):
    for row in report.layer_reports():
        yield [row.layer_name, str(row.dataflow), CYCLES_FMT.format(row.cycles), row.fold_count,
               row.sram_reads_ifmap, row.sram_reads_filter, row.sram_writes_ofmap,
               row.psum_spill_accesses, UTILIZATION_FMT.format(row.utilization)]


def report_to_csv(report):
    """ Per-layer CSV of the report's mode; FLEX rows name the chosen dataflow. """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(REPORT_COLUMNS)
    writer.writerows(_report_rows(report))
    return out.getvalue()


def sweep_to_csv(reports):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['rows', 'cols'] + REPORT_COLUMNS)
    for report in reports:
        for row in _report_rows(report):
            writer.writerow([report.array.rows, report.array.cols] + row)
    return out.getvalue()


def _data_lines(text):
    return [line for line in io.StringIO(text) if not line.startswith(COMMENT_TOKEN)]


def parse_report_csv(text):
    """ Reads a report CSV back into LayerCostReport rows. """
    rows = []
    for record in csv.DictReader(_data_lines(text)):
        rows.append(LayerCostReport(record['layer'], Dataflow.parse(record['dataflow']),
                                    int(record['cycles']), int(record['folds']),
                                    int(record['sram_reads_ifmap']), int(record['sram_reads_filter']),
                                    int(record['sram_writes_ofmap']), int(record['psum_spills']),
                                    float(record['utilization'])))
    return rows


def _comparison(report):
    return report.comparison if isinstance(report, ModelReport) else report


def _format_cycles(value):
    value = float(value)
    if value.is_integer():
        return CYCLES_FMT.format(int(value))
    return repr(value)


def emit_speedup_table(reports):
    """ Static-versus-flexible table: three rows per model and a mean row per dataflow.

    Parameters
    ----------
    reports : list of ModelReport or StaticComparison

    Returns
    -------
    str
        CSV with columns model, flex_cycles, dataflow, static_cycles, speedup
    """
    comparisons = [_comparison(r) for r in reports]
    if not comparisons:
        raise ValidationError('speedup table needs at least one model')
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(SPEEDUP_COLUMNS)
    speedups = {df: [] for df in DATAFLOWS}
    for comparison in comparisons:
        for df in DATAFLOWS:
            value = comparison.speedups[df]
            speedups[df].append(value)
            writer.writerow([comparison.model_name, _format_cycles(comparison.flex_cycles), str(df),
                             _format_cycles(comparison.static_cycles[df]), SPEEDUP_FMT.format(value)])
    for df in DATAFLOWS:
        writer.writerow([MEAN_LABEL, '', str(df), '', SPEEDUP_FMT.format(np.mean(speedups[df]))])
    return out.getvalue()


def parse_speedup_table(text):
    """ Reads a speedup table.

    Returns
    -------
    (list of StaticComparison, dict)
        the per-model comparisons and the footer means keyed by Dataflow
    """
    models = {}
    order = []
    means = {}
    for record in csv.DictReader(_data_lines(text)):
        df = Dataflow.parse(record['dataflow'])
        if record['model'] == MEAN_LABEL:
            means[df] = float(record['speedup'])
            continue
        name = record['model']
        if name not in models:
            order.append(name)
            models[name] = (float(record['flex_cycles']), {})
        models[name][1][df] = float(record['static_cycles'])
    return [StaticComparison(name, models[name][1], models[name][0]) for name in order], means


def emit_plot_data(reports):
    """ Execution time in ms of every model under IS, OS, WS and flexible execution. """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(PLOT_COLUMNS)
    for report in reports:
        for mode in MODES:
            writer.writerow([report.model_name, mode, TIME_FMT.format(report.execution_time_ms(mode))])
    return out.getvalue()


def build_table(topology_paths, config):
    """ Reports of several topologies on the same array, in the given order. """
    if not topology_paths:
        raise ValidationError('speedup table needs at least one topology')
    reports = []
    for path in tqdm(topology_paths, desc='models'):
        reports.append(build_report(load_topology(path), config))
    return reports
