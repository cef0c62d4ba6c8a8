"""
Exception hierarchy. Every error raised on purpose by the toolkit derives
from FlexTpuError so the command line can map it to an exit status.
"""


class FlexTpuError(Exception):
    """ Base class for toolkit errors """
    pass


class ValidationError(FlexTpuError, ValueError):
    """ Invalid input value. `layer` names the offending layer when known. """
    def __init__(self, message, layer=None):
        if layer is not None:
            message = 'layer {}: {}'.format(layer, message)
        super(ValidationError, self).__init__(message)
        self.layer = layer


class TopologyParseError(ValidationError):
    """ Malformed topology CSV row. """
    def __init__(self, message, line):
        super(TopologyParseError, self).__init__('line {}: {}'.format(line, message))
        self.line = line


class EmptyTopologyError(ValidationError):
    pass


class OperandRangeError(ValidationError):
    """ Matrix entry not representable in the configured operand width. """
    pass


class TraceSizeError(FlexTpuError):
    """ Operand trace would exceed the configured event cap. """
    def __init__(self, events, cap):
        super(TraceSizeError, self).__init__(
            'trace of {} events exceeds the cap of {}'.format(events, cap))
        self.events = events
        self.cap = cap


class SimulationError(FlexTpuError):
    """ Grid dynamics disagree with the injection schedule. """
    pass


class AccumulatorOverflowError(SimulationError, ArithmeticError):
    def __init__(self, row, col, cycle, value, bits):
        super(AccumulatorOverflowError, self).__init__(
            'accumulator overflow at PE({}, {}) in cycle {}: {} does not fit in '
            '{} signed bits'.format(row, col, cycle, value, bits))
        self.row = row
        self.col = col
        self.cycle = cycle
        self.value = value


class ConsistencyError(FlexTpuError):
    """ Two inputs that must describe the same layers do not. """
    pass


class VerifyMismatchError(FlexTpuError):
    """ Grid simulation disagrees with the analytical model for a layer. """
    def __init__(self, layer, dataflow, message):
        super(VerifyMismatchError, self).__init__(
            'verify failed for layer {} ({}): {}'.format(layer, dataflow, message))
        self.layer = layer
        self.dataflow = dataflow
