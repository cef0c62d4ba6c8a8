from .version import __version__
from .workload import (LayerDescriptor, GemmShape, Topology, lower_to_gemm, parse_topology,
                       serialize_topology, load_topology)
from .dataflow_map import (Dataflow, ArrayConfig, FoldPlan, LayerCostReport, OperandTrace,
                           plan_folds, analytical_cycles, count_memory_accesses, generate_trace,
                           trace_event_count, trace_to_csv)
from .pe_grid_sim import FlexPEGrid, GridConfig, SimResult, reconfigure, simulate_gemm, step
from .scheduler import (FlexSchedule, CmuProgram, build_schedule, emit_cmu_program, compare_static,
                        select_dataflow, speedup)
from .report import (RunConfig, ModelReport, run, sweep_array_sizes, emit_speedup_table,
                     emit_plot_data)

__all__ = [
    'LayerDescriptor', 'GemmShape', 'Topology', 'lower_to_gemm', 'parse_topology',
    'serialize_topology', 'load_topology',
    'Dataflow', 'ArrayConfig', 'FoldPlan', 'LayerCostReport', 'OperandTrace', 'plan_folds',
    'analytical_cycles', 'count_memory_accesses', 'generate_trace', 'trace_event_count',
    'trace_to_csv',
    'FlexPEGrid', 'GridConfig', 'SimResult', 'reconfigure', 'simulate_gemm', 'step',
    'FlexSchedule', 'CmuProgram', 'build_schedule', 'emit_cmu_program', 'compare_static',
    'select_dataflow', 'speedup',
    'RunConfig', 'ModelReport', 'run', 'sweep_array_sizes', 'emit_speedup_table',
    'emit_plot_data',
]
