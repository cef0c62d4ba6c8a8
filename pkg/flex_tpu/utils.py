"""
Filesystem helpers shared by the report writers and the command line tool.
"""

import os

from autolab_core import Logger

logger = Logger.get_logger(__name__)


def mkdir_if_missing(output_dir):
    if not output_dir:
        return
    if not os.path.exists(output_dir):
        try:
            os.makedirs(output_dir)
        except OSError:
            logger.warning('Could not create %s. Probably some other process '
                           'created the directory already.', output_dir)


def mkdir_for_file(path):
    """Creates the parent directory of an output file."""
    mkdir_if_missing(os.path.dirname(os.path.abspath(path)))


def write_text(path, text):
    """Writes a report to disk, creating its directory first."""
    mkdir_for_file(path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.info('Saved %s', path)


def cfg_get(cfg, key, default=None):
    """Looks up a key of a YamlConfig or dict section, treating null as missing."""
    if cfg is not None and key in cfg.keys() and cfg[key] is not None:
        return cfg[key]
    return default
