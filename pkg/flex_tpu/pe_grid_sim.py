"""
Cycle-level behavioral model of a grid of reconfigurable PEs.

Every PE holds a MAC unit, an accumulator, an extra stationary register and
two muxes driven by one control bit broadcast to the whole grid:

    control 1 (OS)  operands flow east and south, the accumulator stays put
                    until the drain phase shifts results out of the bottom row
    control 0 (WS)  the stationary register holds a weight, partial sums flow south
    control 0 (IS)  the stationary register holds an IFMap element, partial sums flow south

The grid is advanced by `step`, which reads the previous latches and writes
new ones, so evaluation order across PEs does not matter. `simulate_gemm`
replays an operand trace from `dataflow_map.generate_trace` and enforces it.
"""

import csv
from collections import namedtuple
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from autolab_core import Logger

from .constants import DEFAULT_TRACE_CAP
from .dataflow_map import ArrayConfig, Dataflow, Port, generate_trace
from .errors import (AccumulatorOverflowError, OperandRangeError,
                     SimulationError, ValidationError)
from .workload import GemmShape

logger = Logger.get_logger(__name__)


class PinSource(Enum):
    """ Operand held in the stationary register. """
    IFMAP = 'ifmap'
    WEIGHT = 'weight'
    NONE = 'none'


_CONTROL = {
    Dataflow.IS: (0, PinSource.IFMAP),
    Dataflow.OS: (1, PinSource.NONE),
    Dataflow.WS: (0, PinSource.WEIGHT),
}


def control_word(mode):
    """ (mux control bit, pin source) for a dataflow. """
    return _CONTROL[Dataflow.parse(mode)]


@dataclass(frozen=True)
class GridConfig:
    array: ArrayConfig
    mode: Dataflow
    control_bit: int
    pin_source: PinSource


def reconfigure(mode, array=None):
    """ Control configuration broadcast to every PE for `mode`.

    Parameters
    ----------
    mode : Dataflow or str
    array : ArrayConfig
        defaults to a 32x32 INT8 array

    Returns
    -------
    GridConfig
    """
    mode = Dataflow.parse(mode)
    control_bit, pin_source = _CONTROL[mode]
    return GridConfig(array if array is not None else ArrayConfig(), mode, control_bit, pin_source)


@dataclass(frozen=True)
class FlexPEState:
    """ Observable registers of one PE. Empty latches read as None. """
    stationary_reg: int
    mux_a_sel: int
    mux_b_sel: int
    accumulator: int
    in_west: Optional[int]
    in_north: Optional[int]
    out_east: Optional[int]
    out_south: Optional[int]


Injection = namedtuple('Injection', ['west', 'north', 'preload', 'drain'])
Injection.__new__.__defaults__ = (None, None, None, False)


def _grid(rows, cols, dtype=np.int64):
    return np.zeros((rows, cols), dtype=dtype)


@dataclass
class GridState:
    """ Latches of the whole grid after a cycle.

    The active region is the top-left used_rows x used_cols block; results
    leave through the south edge of its last row. out_values/out_valid hold
    what that row emitted during the cycle that produced this state.
    """
    cycle: int
    active_rows: int
    active_cols: int
    stationary: np.ndarray
    acc: np.ndarray
    macs: np.ndarray
    east: np.ndarray
    east_valid: np.ndarray
    south: np.ndarray
    south_valid: np.ndarray
    west_in: np.ndarray
    west_valid: np.ndarray
    north_in: np.ndarray
    north_valid: np.ndarray
    out_values: np.ndarray
    out_valid: np.ndarray
    out_macs: np.ndarray

    @property
    def shape(self):
        return self.acc.shape


def idle_state(rows, cols, active_rows=None, active_cols=None, cycle=0):
    """ A grid with every latch empty and every accumulator cleared. """
    active_rows = rows if active_rows is None else active_rows
    active_cols = cols if active_cols is None else active_cols
    return GridState(cycle, active_rows, active_cols,
                     stationary=_grid(rows, cols), acc=_grid(rows, cols), macs=_grid(rows, cols),
                     east=_grid(rows, cols), east_valid=_grid(rows, cols, bool),
                     south=_grid(rows, cols), south_valid=_grid(rows, cols, bool),
                     west_in=_grid(rows, cols), west_valid=_grid(rows, cols, bool),
                     north_in=_grid(rows, cols), north_valid=_grid(rows, cols, bool),
                     out_values=np.zeros(cols, dtype=np.int64),
                     out_valid=np.zeros(cols, dtype=bool),
                     out_macs=np.zeros(cols, dtype=np.int64))


def _check_overflow(values, mask, bits, cycle):
    limit = 1 << (bits - 1)
    over = mask & ((values >= limit) | (values < -limit))
    if over.any():
        row, col = np.argwhere(over)[0]
        raise AccumulatorOverflowError(int(row), int(col), cycle, int(values[row, col]), bits)


def step(state, injection, config):
    """ Advances the grid by one cycle.

    Parameters
    ----------
    state : GridState
        latches after the previous cycle; not modified
    injection : Injection
        west/north edge values keyed by lane, register-file writes keyed by
        (row, col), and the OS drain strobe
    config : GridConfig

    Returns
    -------
    GridState
    """
    rows, cols = state.shape
    r, c = state.active_rows, state.active_cols
    region = np.zeros((rows, cols), dtype=bool)
    region[:r, :c] = True

    west_in = np.zeros((rows, cols), dtype=np.int64)
    west_v = np.zeros((rows, cols), dtype=bool)
    west_in[:, 1:] = state.east[:, :-1]
    west_v[:, 1:] = state.east_valid[:, :-1]
    north_in = np.zeros((rows, cols), dtype=np.int64)
    north_v = np.zeros((rows, cols), dtype=bool)
    north_in[1:, :] = state.south[:-1, :]
    north_v[1:, :] = state.south_valid[:-1, :]
    for lane, value in (injection.west or {}).items():
        west_in[lane, 0] = value
        west_v[lane, 0] = True
    for lane, value in (injection.north or {}).items():
        north_in[0, lane] = value
        north_v[0, lane] = True
    west_v &= region
    north_v &= region

    stationary = state.stationary
    if injection.preload:
        if config.mode is Dataflow.OS:
            raise SimulationError('cycle {}: register-file write in OS mode'.format(state.cycle))
        stationary = stationary.copy()
        for (row, col), value in injection.preload.items():
            stationary[row, col] = value

    out_values = np.zeros(cols, dtype=np.int64)
    out_valid = np.zeros(cols, dtype=bool)
    out_macs = np.zeros(cols, dtype=np.int64)
    bits = config.array.accum_bits

    if config.mode is Dataflow.OS:
        if (west_v != north_v).any():
            row, col = np.argwhere(west_v != north_v)[0]
            raise SimulationError('cycle {}: unpaired operand at PE({}, {})'.format(
                state.cycle, row, col))
        acc = state.acc + np.where(west_v, west_in * north_in, 0)
        macs = state.macs + west_v
        _check_overflow(acc, region, bits, state.cycle)
        if injection.drain:
            out_values[:c] = acc[r - 1, :c]
            out_macs[:c] = macs[r - 1, :c]
            out_valid[:c] = True
            acc[1:r, :c] = acc[0:r - 1, :c].copy()
            macs[1:r, :c] = macs[0:r - 1, :c].copy()
            acc[0, :c] = 0
            macs[0, :c] = 0
        south, south_valid = north_in, north_v
    else:
        # partial sums: rows below the first only accept operands together with a psum
        misaligned = west_v != north_v
        misaligned[0, :] = north_v[0, :] & ~west_v[0, :]
        if misaligned.any():
            row, col = np.argwhere(misaligned)[0]
            raise SimulationError('cycle {}: operand and partial sum misaligned at PE({}, {})'.format(
                state.cycle, row, col))
        psum = np.where(north_v, north_in, 0) + west_in * stationary
        _check_overflow(psum, west_v, bits, state.cycle)
        acc = np.where(west_v, psum, state.acc)
        macs = state.macs + west_v
        south, south_valid = np.where(west_v, psum, 0), west_v
        out_values[:c] = south[r - 1, :c]
        out_valid[:c] = west_v[r - 1, :c]
        out_macs[:c] = macs[r - 1, :c]

    return GridState(state.cycle + 1, r, c, stationary, acc, macs,
                     east=west_in, east_valid=west_v, south=south, south_valid=south_valid,
                     west_in=west_in, west_valid=west_v, north_in=north_in, north_valid=north_v,
                     out_values=out_values, out_valid=out_valid, out_macs=out_macs)


class FlexPEGrid(object):
    """ A mutable PE grid owned by one simulation at a time. """

    def __init__(self, array, mode=Dataflow.OS):
        self._logger = Logger.get_logger(self.__class__.__name__)
        self.array = array
        self.config = reconfigure(mode, array)
        self.state = idle_state(array.rows, array.cols)
        self.stream_len = None

    @property
    def mode(self):
        return self.config.mode

    def reconfigure(self, mode):
        """ Switches the broadcast control signal. Only legal between folds. """
        if not self.is_quiescent():
            raise SimulationError('cannot reconfigure at cycle {} with a fold in flight'.format(
                self.state.cycle))
        self.config = reconfigure(mode, self.array)
        self.state = idle_state(self.array.rows, self.array.cols, cycle=self.state.cycle)
        self._logger.debug('Grid reconfigured to %s', self.config.mode)
        return self.config

    def begin_fold(self, used_rows, used_cols, stream_len, start_cycle=None):
        if not (1 <= used_rows <= self.array.rows and 1 <= used_cols <= self.array.cols):
            raise ValidationError('fold {}x{} does not fit a {}x{} array'.format(
                used_rows, used_cols, self.array.rows, self.array.cols))
        cycle = self.state.cycle if start_cycle is None else start_cycle
        self.state = idle_state(self.array.rows, self.array.cols, used_rows, used_cols, cycle)
        self.stream_len = stream_len

    def step(self, injection):
        """ Advances one cycle and returns the values emitted, keyed by south lane. """
        cycle = self.state.cycle
        self.state = step(self.state, injection, self.config)
        lanes = np.flatnonzero(self.state.out_valid)
        if self.config.mode is Dataflow.OS and lanes.size:
            short = self.state.out_macs[lanes] != self.stream_len
            if short.any():
                lane = int(lanes[np.argmax(short)])
                raise SimulationError('cycle {}: drained output on lane {} after {} of {} MACs'.format(
                    cycle, lane, self.state.out_macs[lane], self.stream_len))
        return {int(lane): int(self.state.out_values[lane]) for lane in lanes}

    def pe_state(self, row, col):
        s = self.state

        def latch(values, valid):
            return int(values[row, col]) if valid[row, col] else None

        return FlexPEState(int(s.stationary[row, col]), self.config.control_bit, self.config.control_bit,
                           int(s.acc[row, col]), latch(s.west_in, s.west_valid),
                           latch(s.north_in, s.north_valid), latch(s.east, s.east_valid),
                           latch(s.south, s.south_valid))

    def is_quiescent(self):
        """ True when nothing is in flight towards a PE of the active region
        and, in OS mode, every accumulator has been drained. """
        s = self.state
        r, c = s.active_rows, s.active_cols
        if s.east_valid[:r, :c - 1].any() or s.south_valid[:r - 1, :c].any():
            return False
        if self.config.mode is Dataflow.OS and s.macs[:r, :c].any():
            return False
        return True


@dataclass
class SimResult:
    ofmap: np.ndarray
    total_cycles: int
    per_fold_cycles: List[int] = field(default_factory=list)
    dataflow: Optional[Dataflow] = None


def _as_operand(matrix, name, bits):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ValidationError('{} must be a non-empty 2-D matrix, got shape {}'.format(name, matrix.shape))
    if not np.issubdtype(matrix.dtype, np.integer):
        raise ValidationError('{} must hold integers, got {}'.format(name, matrix.dtype))
    matrix = matrix.astype(np.int64)
    low, high = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    outside = (matrix < low) | (matrix > high)
    if outside.any():
        row, col = np.argwhere(outside)[0]
        raise OperandRangeError('{}[{}, {}] = {} is outside the signed {}-bit range'.format(
            name, row, col, matrix[row, col], bits))
    return matrix


def _injection_for(record, a, b):
    operands = {'A': a, 'B': b}
    west, north, preload, writes = {}, {}, {}, {}
    for event in record.events:
        operand = event.operand
        if event.port is Port.SOUTH:
            writes[event.lane] = operand
            continue
        value = int(operands[operand.matrix][operand.row, operand.col])
        if event.port is Port.WEST:
            west[event.lane] = value
        elif event.port is Port.NORTH:
            north[event.lane] = value
        else:
            preload[event.lane] = value
    return Injection(west, north, preload, bool(writes)), writes


def simulate_gemm(a, b, array, df, trace_cap=DEFAULT_TRACE_CAP, dump=None, grid=None):
    """ Computes a . b on the PE grid by replaying the dataflow's operand trace.

    Parameters
    ----------
    a : t x k integer matrix
    b : k x m integer matrix
    array : ArrayConfig
    df : Dataflow
    trace_cap : int
        event cap passed to generate_trace
    dump : file-like
        receives cycle,row,col,accumulator rows for the active region
    grid : FlexPEGrid
        grid to reuse; it is reconfigured to `df` first

    Returns
    -------
    SimResult

    Raises
    ------
    OperandRangeError
        an entry does not fit operand_bits
    AccumulatorOverflowError
        a partial or final sum does not fit accum_bits
    SimulationError
        the grid emitted results that do not match the schedule
    """
    df = Dataflow.parse(df)
    a = _as_operand(a, 'A', array.operand_bits)
    b = _as_operand(b, 'B', array.operand_bits)
    if a.shape[1] != b.shape[0]:
        raise ValidationError('inner dimensions differ: A is {}x{}, B is {}x{}'.format(
            a.shape[0], a.shape[1], b.shape[0], b.shape[1]))
    shape = GemmShape(a.shape[0], a.shape[1], b.shape[1])
    trace = generate_trace(shape, array, df, trace_cap=trace_cap)

    if grid is None:
        grid = FlexPEGrid(array, df)
    elif grid.mode is not df:
        grid.reconfigure(df)
    writer = None
    if dump is not None:
        writer = csv.writer(dump, lineterminator='\n')
        writer.writerow(['cycle', 'row', 'col', 'accumulator'])

    limit = 1 << (array.accum_bits - 1)
    ofmap = np.zeros((shape.t_rows, shape.m_cols), dtype=np.int64)
    per_fold_cycles = []
    for span in trace.folds:
        fold = span.fold
        grid.begin_fold(fold.used_rows, fold.used_cols, fold.stream_len, start_cycle=span.start)
        records = trace.records[span.start:span.start + span.length]
        for record in records:
            injection, writes = _injection_for(record, a, b)
            if record is records[0] and not injection.west and not injection.preload:
                raise SimulationError('fold {} starts at cycle {} without injecting an operand'.format(
                    fold.index, record.cycle))
            emitted = grid.step(injection)
            if record is records[-1] and not emitted:
                raise SimulationError('fold {} ends at cycle {} without emitting a result'.format(
                    fold.index, record.cycle))
            if set(emitted) != set(writes):
                raise SimulationError('cycle {}: grid emitted on lanes {} but the schedule writes lanes {}'.format(
                    record.cycle, sorted(emitted), sorted(writes)))
            for lane, operand in writes.items():
                total = ofmap[operand.row, operand.col] + emitted[lane]
                if not -limit <= total < limit:
                    raise AccumulatorOverflowError(fold.used_rows - 1, lane, record.cycle,
                                                   int(total), array.accum_bits)
                ofmap[operand.row, operand.col] = total
            if writer is not None:
                acc = grid.state.acc
                for row in range(fold.used_rows):
                    for col in range(fold.used_cols):
                        writer.writerow([record.cycle, row, col, int(acc[row, col])])
        if not grid.is_quiescent():
            raise SimulationError('fold {} ended at cycle {} with operands in flight'.format(
                fold.index, span.start + span.length))
        per_fold_cycles.append(grid.state.cycle - span.start)

    result = SimResult(ofmap, int(sum(per_fold_cycles)), per_fold_cycles, df)
    logger.debug('Simulated %dx%dx%d GEMM with %s on %dx%d in %d cycles', shape.t_rows,
                 shape.k_inner, shape.m_cols, df, array.rows, array.cols, result.total_cycles)
    return result
