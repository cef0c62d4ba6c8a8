"""
Flex TPU Usage Notes:

Edit "cfg/run.yaml", "cfg/sweep.yaml" or "cfg/table.yaml" to set the parameters
of each subcommand, or override them with flags.

Run this file with the tag --config [config file name] if different config from
the default location (cfg/<subcommand>.yaml).

Here are example run commands:
python tools/flex_tpu_tool.py run --topology resnet18 --dataflow flex --out results/resnet18.csv
python tools/flex_tpu_tool.py sweep --topology resnet18 --sizes 32x32,128x128,256x256
python tools/flex_tpu_tool.py table --config cfg/table.yaml
"""

import sys

from flex_tpu.cli import main

if __name__ == "__main__":
    sys.exit(main())
