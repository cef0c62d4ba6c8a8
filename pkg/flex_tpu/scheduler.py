"""
Per-layer dataflow selection and the configuration program that applies it.

Every layer is costed under IS, OS and WS; the layer runs with whichever
needs the fewest cycles (ties go to OS, then WS, then IS). Switching
dataflow between layers is free.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from autolab_core import Logger
from tqdm import tqdm

from .constants import DEFAULT_TRACE_CAP, VERIFY_SEED
from .dataflow_map import (DATAFLOWS, Dataflow, FoldPlan, LayerCostReport,
                           analytical_cycles, plan_folds, trace_event_count)
from .errors import ConsistencyError, ValidationError, VerifyMismatchError
from .pe_grid_sim import PinSource, control_word, simulate_gemm
from .workload import lower_to_gemm

logger = Logger.get_logger(__name__)

TIE_BREAK_ORDER = (Dataflow.OS, Dataflow.WS, Dataflow.IS)


@dataclass(frozen=True)
class ScheduleEntry:
    layer_name: str
    chosen: Dataflow
    cycles_is: int
    cycles_os: int
    cycles_ws: int
    reports: Dict[Dataflow, LayerCostReport] = field(default_factory=dict, compare=False, repr=False)

    def cycles(self, df):
        return {Dataflow.IS: self.cycles_is, Dataflow.OS: self.cycles_os,
                Dataflow.WS: self.cycles_ws}[Dataflow.parse(df)]

    @property
    def flex_cycles(self):
        return self.cycles(self.chosen)


@dataclass(frozen=True)
class FlexSchedule:
    """ Chosen dataflow and per-dataflow cycle counts of every layer of a model. """
    model_name: str
    entries: Tuple[ScheduleEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(self.entries))

    def __len__(self):
        return len(self.entries)

    @property
    def layer_names(self):
        return [entry.layer_name for entry in self.entries]

    @property
    def chosen_dataflows(self):
        return [entry.chosen for entry in self.entries]

    @property
    def total_flex_cycles(self):
        return sum(entry.flex_cycles for entry in self.entries)

    def static_total(self, df):
        return sum(entry.cycles(df) for entry in self.entries)


def select_dataflow(cycles_by_dataflow):
    """ Dataflow with the fewest cycles, ties broken in the order OS, WS, IS.

    Parameters
    ----------
    cycles_by_dataflow : dict
        Dataflow -> cycle count for all three dataflows
    """
    return min(TIE_BREAK_ORDER, key=lambda df: cycles_by_dataflow[df])


def build_schedule(topology, array, verify=False, trace_cap=DEFAULT_TRACE_CAP, seed=VERIFY_SEED):
    """ Costs every layer of a topology under all dataflows and picks the cheapest.

    Parameters
    ----------
    topology : Topology
    array : ArrayConfig
    verify : bool
        re-run the chosen dataflow of every layer within the trace cap on the
        PE grid and check it against the analytical model
    trace_cap : int
    seed : int
        seed of the synthetic verification operands

    Returns
    -------
    FlexSchedule
    """
    entries = []
    for layer in topology.layers:
        shape = lower_to_gemm(layer)
        reports = {df: analytical_cycles(shape, array, df, layer_name=layer.name) for df in DATAFLOWS}
        chosen = select_dataflow({df: report.cycles for df, report in reports.items()})
        logger.debug('%s: IS %d OS %d WS %d -> %s', layer.name, reports[Dataflow.IS].cycles,
                     reports[Dataflow.OS].cycles, reports[Dataflow.WS].cycles, chosen)
        entries.append(ScheduleEntry(layer.name, chosen, reports[Dataflow.IS].cycles,
                                     reports[Dataflow.OS].cycles, reports[Dataflow.WS].cycles, reports))
    schedule = FlexSchedule(topology.model_name, entries)

    if verify:
        verify_topology(topology, array, schedule.chosen_dataflows, trace_cap=trace_cap, seed=seed)
    return schedule


def plan_schedule(topology, array, schedule):
    """ Fold plans of the chosen dataflows, one per layer. """
    if topology.layer_names != schedule.layer_names:
        raise ConsistencyError('schedule for {} does not cover the layers of {}'.format(
            schedule.model_name, topology.model_name))
    return [plan_folds(lower_to_gemm(layer), array, entry.chosen)
            for layer, entry in zip(topology.layers, schedule.entries)]


@dataclass(frozen=True)
class CmuRecord:
    layer_index: int
    layer_name: str
    dataflow: Dataflow
    control_bit: int
    pin_source: PinSource
    fold_plan: FoldPlan = field(repr=False)


@dataclass(frozen=True)
class CmuProgram:
    model_name: str
    records: Tuple[CmuRecord, ...]

    def __len__(self):
        return len(self.records)


def emit_cmu_program(schedule, plans):
    """ Configuration program: the mux control and pinned operand of every layer.

    Raises
    ------
    ConsistencyError
        empty schedule, or plans that do not match the schedule one to one
    """
    if not schedule.entries:
        raise ConsistencyError('schedule for {} is empty'.format(schedule.model_name))
    plans = list(plans)
    if len(plans) != len(schedule.entries):
        raise ConsistencyError('{} fold plans for {} scheduled layers'.format(
            len(plans), len(schedule.entries)))
    records = []
    for index, (entry, plan) in enumerate(zip(schedule.entries, plans)):
        if plan.dataflow is not entry.chosen:
            raise ConsistencyError('layer {} is scheduled {} but planned {}'.format(
                entry.layer_name, entry.chosen, plan.dataflow))
        control_bit, pin_source = control_word(entry.chosen)
        records.append(CmuRecord(index, entry.layer_name, entry.chosen, control_bit, pin_source, plan))
    return CmuProgram(schedule.model_name, tuple(records))


def speedup(static_cycles, flex_cycles):
    """ Static over flexible cycles. """
    if flex_cycles <= 0:
        raise ValidationError('flex cycles must be > 0, got {}'.format(flex_cycles))
    return float(static_cycles) / float(flex_cycles)


@dataclass(frozen=True)
class StaticComparison:
    """ Static totals per dataflow against the flexible total of one model. """
    model_name: str
    static_cycles: Dict[Dataflow, float]
    flex_cycles: float

    @property
    def speedups(self):
        return {df: speedup(self.static_cycles[df], self.flex_cycles) for df in DATAFLOWS}

    @classmethod
    def from_schedule(cls, schedule):
        return cls(schedule.model_name, {df: schedule.static_total(df) for df in DATAFLOWS},
                   schedule.total_flex_cycles)


def compare_static(topology, array):
    """ Static and flexible totals of a topology with per-dataflow speedups. """
    return StaticComparison.from_schedule(build_schedule(topology, array))


def synthetic_operands(shape, array, seed=VERIFY_SEED):
    """ Seeded random operands spanning the full signed operand range. """
    rs = np.random.RandomState(seed)
    low, high = -(1 << (array.operand_bits - 1)), 1 << (array.operand_bits - 1)
    a = rs.randint(low, high, size=(shape.t_rows, shape.k_inner)).astype(np.int64)
    b = rs.randint(low, high, size=(shape.k_inner, shape.m_cols)).astype(np.int64)
    return a, b


def verify_layer(shape, array, df, trace_cap=DEFAULT_TRACE_CAP, seed=VERIFY_SEED, layer_name=''):
    """ Runs one layer on the PE grid and checks result and cycles against the model.

    Returns
    -------
    SimResult or None
        None when the trace would exceed trace_cap and the check was skipped

    Raises
    ------
    VerifyMismatchError
    """
    df = Dataflow.parse(df)
    events = trace_event_count(shape, array, df)
    if trace_cap is not None and events > trace_cap:
        logger.info('Skipping verification of %s (%s): %d trace events exceed the cap of %d',
                    layer_name, df, events, trace_cap)
        return None
    a, b = synthetic_operands(shape, array, seed)
    result = simulate_gemm(a, b, array, df, trace_cap=trace_cap)
    expected = analytical_cycles(shape, array, df).cycles
    if result.total_cycles != expected:
        raise VerifyMismatchError(layer_name, df, 'grid took {} cycles, model predicts {}'.format(
            result.total_cycles, expected))
    if not np.array_equal(result.ofmap, a.dot(b)):
        raise VerifyMismatchError(layer_name, df, 'grid output differs from the reference product')
    logger.debug('Verified %s (%s) in %d cycles', layer_name, df, result.total_cycles)
    return result


def verify_topology(topology, array, dataflows, trace_cap=DEFAULT_TRACE_CAP, seed=VERIFY_SEED):
    """ Runs verify_layer on every layer, each under its own dataflow.

    Returns
    -------
    list
        SimResult per layer, None where the trace cap skipped the check
    """
    if len(dataflows) != len(topology):
        raise ConsistencyError('{} dataflows for {} layers'.format(len(dataflows), len(topology)))
    return [verify_layer(lower_to_gemm(layer), array, df, trace_cap=trace_cap, seed=seed, layer_name=layer.name)
            for layer, df in tqdm(list(zip(topology.layers, dataflows)),
                                  desc='verify {}'.format(topology.model_name))]


def schedule_to_csv(schedule):
    """ One row per layer: chosen dataflow and the cycles of each dataflow. """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['layer', 'chosen', 'cycles_is', 'cycles_os', 'cycles_ws', 'flex_cycles'])
    for entry in schedule.entries:
        writer.writerow([entry.layer_name, str(entry.chosen), entry.cycles_is, entry.cycles_os,
                         entry.cycles_ws, entry.flex_cycles])
    return out.getvalue()


def cmu_program_to_csv(program):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['layer_index', 'layer_name', 'dataflow', 'control_bit', 'pin_source'])
    for record in program.records:
        writer.writerow([record.layer_index, record.layer_name, str(record.dataflow),
                         record.control_bit, record.pin_source.value])
    return out.getvalue()
