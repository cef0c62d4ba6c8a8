"""
Dataflow mappings of a GEMM onto a fixed-size systolic array.

For O = A . B with A (t x k) the lowered IFMap and B (k x m) the filters:

    OS  outputs pinned: array rows hold t, columns hold m, k is streamed
    WS  weights pinned: array rows hold k, columns hold m, t is streamed
    IS  IFMap pinned:   array rows hold k, columns hold t, m is streamed

IS is laid out as the mirror image of WS so the two "0"-control modes differ
only in which operand the extra PE register holds.

Timing of one fold using r' rows and c' columns of the array:
    stream_len + 2r' + c' - 2 cycles
which is the skewed fill (r'-1)+(c'-1), stream_len MAC cycles at the last
PE, and r' cycles of either output drain (OS) or stationary preload (WS/IS).
Folds run back to back without overlap, row fold major.
"""

import csv
import io
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from autolab_core import Logger

from .constants import (ACCUM_BITS, BUBBLE_TOKEN, CLOCK_NS_STATIC,
                        DEFAULT_ARRAY_COLS, DEFAULT_ARRAY_ROWS, DEFAULT_TRACE_CAP,
                        MAX_ACCUM_BITS, MAX_OPERAND_BITS, OPERAND_BITS)
from .errors import TraceSizeError, ValidationError

logger = Logger.get_logger(__name__)


class Dataflow(Enum):
    """ Which operand stays pinned in the PEs. """
    IS = 'is'
    OS = 'os'
    WS = 'ws'

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError('unknown dataflow {!r}, expected one of is, os, ws'.format(value))


DATAFLOWS = (Dataflow.IS, Dataflow.OS, Dataflow.WS)


@dataclass(frozen=True)
class ArrayConfig:
    """ Systolic array geometry and arithmetic widths.

    Attributes
    ----------
    rows, cols : int
        PE count in each dimension
    clock_period : float
        nanoseconds per cycle
    operand_bits : int
        signed input and weight width
    accum_bits : int
        signed accumulator width
    """
    rows: int = DEFAULT_ARRAY_ROWS
    cols: int = DEFAULT_ARRAY_COLS
    clock_period: float = CLOCK_NS_STATIC
    operand_bits: int = OPERAND_BITS
    accum_bits: int = ACCUM_BITS

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError('array must be at least 1x1, got {}x{}'.format(self.rows, self.cols))
        if self.clock_period <= 0:
            raise ValidationError('clock period must be > 0, got {}'.format(self.clock_period))
        if not (1 <= self.operand_bits <= MAX_OPERAND_BITS and 1 <= self.accum_bits <= MAX_ACCUM_BITS):
            raise ValidationError('operand width must be in [1, {}] and accumulator width in [1, {}], '
                                  'got {} and {}'.format(MAX_OPERAND_BITS, MAX_ACCUM_BITS,
                                                         self.operand_bits, self.accum_bits))

    @property
    def size(self):
        return self.rows, self.cols

    @property
    def num_pes(self):
        return self.rows * self.cols


Fold = namedtuple('Fold', ['index', 'row_fold', 'col_fold', 'row_offset', 'col_offset',
                           'used_rows', 'used_cols', 'stream_len'])


@dataclass(frozen=True)
class FoldPlan:
    """ Tiling of the stationary matrix over the array.

    fold_dims holds one (used_rows, used_cols, stream_len) triple per fold in
    execution order: all column folds of a row fold before the next row fold.
    """
    dataflow: Dataflow
    row_folds: int
    col_folds: int
    fold_dims: Tuple[Tuple[int, int, int], ...]
    array_rows: int
    array_cols: int

    @property
    def fold_count(self):
        return len(self.fold_dims)

    def folds(self):
        """ Yields a Fold record, with GEMM offsets, for each fold. """
        for index, (used_rows, used_cols, stream_len) in enumerate(self.fold_dims):
            row_fold, col_fold = divmod(index, self.col_folds)
            yield Fold(index, row_fold, col_fold, row_fold * self.array_rows,
                       col_fold * self.array_cols, used_rows, used_cols, stream_len)


def _extents(shape, df):
    """ (extent along array rows, extent along array cols, stream length). """
    if df is Dataflow.OS:
        return shape.t_rows, shape.m_cols, shape.k_inner
    if df is Dataflow.WS:
        return shape.k_inner, shape.m_cols, shape.t_rows
    return shape.k_inner, shape.t_rows, shape.m_cols


def _ceil_div(a, b):
    return -(-a // b)


def fold_cycles(used_rows, used_cols, stream_len):
    """ Cycles of one fold: fill, stream, and drain or preload. """
    return stream_len + 2 * used_rows + used_cols - 2


def plan_folds(shape, array, df):
    """ Tiles the stationary matrix of `shape` over `array` for dataflow `df`.

    Parameters
    ----------
    shape : GemmShape
    array : ArrayConfig
    df : Dataflow

    Returns
    -------
    FoldPlan
    """
    df = Dataflow.parse(df)
    row_extent, col_extent, stream_len = _extents(shape, df)
    row_folds = _ceil_div(row_extent, array.rows)
    col_folds = _ceil_div(col_extent, array.cols)
    fold_dims = []
    for a in range(row_folds):
        used_rows = min(array.rows, row_extent - a * array.rows)
        for b in range(col_folds):
            used_cols = min(array.cols, col_extent - b * array.cols)
            fold_dims.append((used_rows, used_cols, stream_len))
    return FoldPlan(df, row_folds, col_folds, tuple(fold_dims), array.rows, array.cols)


MemoryAccesses = namedtuple('MemoryAccesses', ['sram_reads_ifmap', 'sram_reads_filter',
                                               'sram_writes_ofmap', 'psum_spill_accesses'])


def count_memory_accesses(shape, plan):
    """ SRAM traffic of a fold plan.

    The stationary operand is read once per element resident in a fold, the
    streamed operands once per (fold, element) pair, and the OFMap is written
    once per element. When the inner dimension spans several row folds (WS
    and IS) every pass beyond the first spills and reloads the partial sums.

    Returns
    -------
    MemoryAccesses
        (sram_reads_ifmap, sram_reads_filter, sram_writes_ofmap, psum_spill_accesses)
    """
    t, k, m = shape.t_rows, shape.k_inner, shape.m_cols
    ofmap_writes = t * m
    if plan.dataflow is Dataflow.OS:
        return MemoryAccesses(plan.col_folds * t * k, plan.row_folds * k * m, ofmap_writes, 0)
    spills = 2 * t * m * (plan.row_folds - 1)
    if plan.dataflow is Dataflow.WS:
        return MemoryAccesses(plan.col_folds * t * k, k * m, ofmap_writes, spills)
    return MemoryAccesses(t * k, plan.col_folds * k * m, ofmap_writes, spills)


@dataclass(frozen=True)
class LayerCostReport:
    """ Cycle count, fold count, memory traffic, and utilization of one layer under one dataflow. """
    layer_name: str
    dataflow: Dataflow
    cycles: int
    fold_count: int
    sram_reads_ifmap: int
    sram_reads_filter: int
    sram_writes_ofmap: int
    psum_spill_accesses: int
    utilization: float


def analytical_cycles(shape, array, df, layer_name=''):
    """ Closed-form cost of a GEMM under one dataflow.

    Summing stream_len + 2r' + c' - 2 over all folds collapses to
        row_folds*col_folds*(stream_len - 2) + 2*col_folds*row_extent + row_folds*col_extent
    because the used rows of the row folds add up to the row extent, and
    likewise for columns.

    Returns
    -------
    LayerCostReport
    """
    df = Dataflow.parse(df)
    row_extent, col_extent, stream_len = _extents(shape, df)
    row_folds = _ceil_div(row_extent, array.rows)
    col_folds = _ceil_div(col_extent, array.cols)
    cycles = (row_folds * col_folds * (stream_len - 2)
              + 2 * col_folds * row_extent + row_folds * col_extent)

    plan = FoldPlan(df, row_folds, col_folds, (), array.rows, array.cols)
    accesses = count_memory_accesses(shape, plan)
    utilization = float(shape.macs) / (array.num_pes * cycles)
    return LayerCostReport(layer_name, df, int(cycles), row_folds * col_folds,
                           utilization=utilization, **accesses._asdict())


class Port(Enum):
    WEST = 'west'
    NORTH = 'north'
    SOUTH = 'south'
    PRELOAD = 'pe'


class OperandId(namedtuple('OperandId', ['matrix', 'row', 'col'])):
    """ Logical matrix coordinate: A (IFMap), B (filter) or O (OFMap). """
    __slots__ = ()

    def __str__(self):
        return '{}({},{})'.format(self.matrix, self.row, self.col)


class TraceEvent(namedtuple('TraceEvent', ['port', 'lane', 'operand'])):
    """ One operand crossing the array boundary.

    lane is the edge row (WEST), edge column (NORTH, SOUTH), or the
    (row, col) register-file port of a PE (PRELOAD).
    """
    __slots__ = ()

    @property
    def port_name(self):
        if self.port is Port.PRELOAD:
            return '{}[{}][{}]'.format(self.port.value, self.lane[0], self.lane[1])
        return '{}[{}]'.format(self.port.value, self.lane)


CycleRecord = namedtuple('CycleRecord', ['cycle', 'events'])
FoldSpan = namedtuple('FoldSpan', ['fold', 'start', 'length'])


@dataclass
class OperandTrace:
    """ Per-cycle edge-injection schedule produced by the dataflow generator.

    records has one CycleRecord per cycle; cycles with no events are bubbles.
    folds gives the cycle span of every fold.
    """
    shape: object
    array: ArrayConfig
    dataflow: Dataflow
    records: list
    folds: list

    @property
    def num_cycles(self):
        return len(self.records)

    @property
    def num_events(self):
        return sum(len(r.events) for r in self.records)

    def events(self):
        for record in self.records:
            for event in record.events:
                yield record.cycle, event


def trace_event_count(shape, array, df):
    """ Exact number of events generate_trace would emit. """
    df = Dataflow.parse(df)
    row_extent, col_extent, stream_len = _extents(shape, df)
    row_folds = _ceil_div(row_extent, array.rows)
    col_folds = _ceil_div(col_extent, array.cols)
    return row_extent * col_extent + stream_len * (row_extent * col_folds + col_extent * row_folds)


def _os_fold_events(fold, emit):
    r, c, k = fold.used_rows, fold.used_cols, fold.stream_len
    t0, m0 = fold.row_offset, fold.col_offset
    for i in range(r):
        for s in range(k):
            emit(s + i, TraceEvent(Port.WEST, i, OperandId('A', t0 + i, s)))
    for j in range(c):
        for s in range(k):
            emit(s + j, TraceEvent(Port.NORTH, j, OperandId('B', s, m0 + j)))
    # outputs shift south one row per cycle, bottom row first
    drain_start = k + r + c - 2
    for d in range(r):
        for j in range(c):
            emit(drain_start + d, TraceEvent(Port.SOUTH, j, OperandId('O', t0 + r - 1 - d, m0 + j)))


def _ws_fold_events(fold, emit):
    r, c, t = fold.used_rows, fold.used_cols, fold.stream_len
    k0, m0 = fold.row_offset, fold.col_offset
    for i in range(r):
        for j in range(c):
            emit(i, TraceEvent(Port.PRELOAD, (i, j), OperandId('B', k0 + i, m0 + j)))
    for i in range(r):
        for s in range(t):
            emit(r + s + i, TraceEvent(Port.WEST, i, OperandId('A', s, k0 + i)))
    for j in range(c):
        for s in range(t):
            emit(2 * r - 1 + s + j, TraceEvent(Port.SOUTH, j, OperandId('O', s, m0 + j)))


def _is_fold_events(fold, emit):
    r, c, m = fold.used_rows, fold.used_cols, fold.stream_len
    k0, t0 = fold.row_offset, fold.col_offset
    for i in range(r):
        for j in range(c):
            emit(i, TraceEvent(Port.PRELOAD, (i, j), OperandId('A', t0 + j, k0 + i)))
    for i in range(r):
        for s in range(m):
            emit(r + s + i, TraceEvent(Port.WEST, i, OperandId('B', k0 + i, s)))
    for j in range(c):
        for s in range(m):
            emit(2 * r - 1 + s + j, TraceEvent(Port.SOUTH, j, OperandId('O', t0 + j, s)))


_FOLD_EVENTS = {
    Dataflow.OS: _os_fold_events,
    Dataflow.WS: _ws_fold_events,
    Dataflow.IS: _is_fold_events,
}


def generate_trace(shape, array, df, trace_cap=DEFAULT_TRACE_CAP):
    """ Builds the per-cycle operand schedule for a GEMM.

    Streaming operand row i is delayed i cycles on the west edge and column
    j is delayed j cycles on the north edge. WS and IS folds write their
    stationary tile one array row per cycle before streaming starts.

    Parameters
    ----------
    shape : GemmShape
    array : ArrayConfig
    df : Dataflow
    trace_cap : int
        maximum number of events; None disables the guard

    Returns
    -------
    OperandTrace

    Raises
    ------
    TraceSizeError
        if the trace would hold more than trace_cap events
    """
    df = Dataflow.parse(df)
    events = trace_event_count(shape, array, df)
    if trace_cap is not None and events > trace_cap:
        raise TraceSizeError(events, trace_cap)

    plan = plan_folds(shape, array, df)
    buckets = []
    spans = []
    start = 0
    for fold in plan.folds():
        length = fold_cycles(fold.used_rows, fold.used_cols, fold.stream_len)
        fold_buckets = [[] for _ in range(length)]
        _FOLD_EVENTS[df](fold, lambda cycle, event: fold_buckets[cycle].append(event))
        buckets.extend(fold_buckets)
        spans.append(FoldSpan(fold, start, length))
        start += length

    records = [CycleRecord(cycle, tuple(bucket)) for cycle, bucket in enumerate(buckets)]
    return OperandTrace(shape, array, df, records, spans)


def trace_to_csv(trace, stream=None):
    """ Writes a trace as cycle,port,operand rows; idle cycles become BUBBLE rows.

    Returns the CSV text when no stream is given.
    """
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['cycle', 'port', 'operand'])
    for record in trace.records:
        if not record.events:
            writer.writerow([record.cycle, '', BUBBLE_TOKEN])
        for event in record.events:
            writer.writerow([record.cycle, event.port_name, str(event.operand)])
    if stream is None:
        return out.getvalue()

