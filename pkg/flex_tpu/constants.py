"""
Shared constants for the flexible-dataflow systolic array toolkit.
"""

# Operand widths
OPERAND_BITS = 8
ACCUM_BITS = 32
# widest settings whose products and sums stay exact in int64
MAX_OPERAND_BITS = 31
MAX_ACCUM_BITS = 63

# Array geometry
DEFAULT_ARRAY_ROWS = 32
DEFAULT_ARRAY_COLS = 32

# Critical path delays (ns) of the synthesized designs: (static TPU, flexible TPU)
CRITICAL_PATH_DELAY_NS = {
    (8, 8): (5.80, 5.92),
    (16, 16): (6.44, 6.48),
    (32, 32): (6.63, 6.69),
}
CLOCK_NS_STATIC = 6.63
CLOCK_NS_FLEX = 6.69

# Unit conversion
NS_PER_MS = 1e6

# Simulation
DEFAULT_TRACE_CAP = 1000000
VERIFY_SEED = 744

# Formatting
CYCLES_FMT = '{:d}'
UTILIZATION_FMT = '{:.6f}'
SPEEDUP_FMT = '{:.3f}'
TIME_FMT = '{:.6f}'
BUBBLE_TOKEN = 'BUBBLE'
COMMENT_TOKEN = '#'

# Topology CSV
TOPOLOGY_HEADER = ['Layer name', 'IFMAP Height', 'IFMAP Width', 'Filter Height',
                   'Filter Width', 'Channels', 'Num Filter', 'Strides', 'Padding']
TOPOLOGY_MIN_COLUMNS = 8
TOPOLOGY_MAX_COLUMNS = 9
