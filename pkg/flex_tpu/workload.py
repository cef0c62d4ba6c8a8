"""
DNN workloads: ScaleSim-compatible topology CSV files and their lowering to
GEMM operand dimensions (im2col).

A topology file has a header row and one row per MAC-bearing layer:
    Name, IFMapH, IFMapW, FilterH, FilterW, Channels, NumFilters, Stride[, Padding]
Lines starting with '#' are comments and trailing commas are tolerated.
"""

import csv
import io
import os
from dataclasses import dataclass
from typing import Tuple

from autolab_core import Logger

from .constants import (COMMENT_TOKEN, TOPOLOGY_HEADER, TOPOLOGY_MAX_COLUMNS,
                        TOPOLOGY_MIN_COLUMNS)
from .errors import EmptyTopologyError, TopologyParseError, ValidationError

logger = Logger.get_logger(__name__)


@dataclass(frozen=True)
class LayerDescriptor:
    """ Geometry of one convolution or fully connected layer.

    Attributes
    ----------
    name : str
        layer label, unique within a topology
    ifmap_h, ifmap_w : int
        input feature map size in pixels
    filter_h, filter_w : int
        filter size in pixels
    channels : int
        input channels
    num_filters : int
        output channels
    stride : int
        uniform stride in both dimensions
    padding : int
        uniform zero padding in both dimensions
    """
    name: str
    ifmap_h: int
    ifmap_w: int
    filter_h: int
    filter_w: int
    channels: int
    num_filters: int
    stride: int
    padding: int = 0

    def __post_init__(self):
        for field_name in ('ifmap_h', 'ifmap_w', 'filter_h', 'filter_w',
                           'channels', 'num_filters', 'stride'):
            if getattr(self, field_name) < 1:
                raise ValidationError('{} must be >= 1, got {}'.format(
                    field_name, getattr(self, field_name)), layer=self.name)
        if self.padding < 0:
            raise ValidationError('padding must be >= 0, got {}'.format(self.padding),
                                  layer=self.name)
        if self.ifmap_h + 2 * self.padding < self.filter_h:
            raise ValidationError('filter height {} exceeds padded ifmap height {}'.format(
                self.filter_h, self.ifmap_h + 2 * self.padding), layer=self.name)
        if self.ifmap_w + 2 * self.padding < self.filter_w:
            raise ValidationError('filter width {} exceeds padded ifmap width {}'.format(
                self.filter_w, self.ifmap_w + 2 * self.padding), layer=self.name)

    @property
    def output_size(self):
        """ (E_h, E_w) with floor division for non-exact strides. """
        out_h = (self.ifmap_h + 2 * self.padding - self.filter_h) // self.stride + 1
        out_w = (self.ifmap_w + 2 * self.padding - self.filter_w) // self.stride + 1
        return out_h, out_w

    @property
    def fields(self):
        return (self.name, self.ifmap_h, self.ifmap_w, self.filter_h, self.filter_w,
                self.channels, self.num_filters, self.stride, self.padding)


@dataclass(frozen=True)
class GemmShape:
    """ Operand matrix dimensions after im2col lowering.

    The layer computes O(t_rows x m_cols) = A(t_rows x k_inner) . B(k_inner x m_cols)
    with A the lowered IFMap and B the filter matrix.
    """
    t_rows: int
    k_inner: int
    m_cols: int

    def __post_init__(self):
        for field_name in ('t_rows', 'k_inner', 'm_cols'):
            if getattr(self, field_name) < 1:
                raise ValidationError('{} must be >= 1, got {}'.format(
                    field_name, getattr(self, field_name)))

    @property
    def macs(self):
        return self.t_rows * self.k_inner * self.m_cols

    def transposed(self):
        """ Shape of the transposed product B^T . A^T. """
        return GemmShape(self.m_cols, self.k_inner, self.t_rows)


@dataclass(frozen=True)
class Topology:
    """ An ordered list of layers making up one model. """
    model_name: str
    layers: Tuple[LayerDescriptor, ...]

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        if not self.layers:
            raise EmptyTopologyError('topology {} has no layers'.format(self.model_name))
        seen = set()
        for layer in self.layers:
            if layer.name in seen:
                raise ValidationError('duplicate layer name', layer=layer.name)
            seen.add(layer.name)

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    @property
    def layer_names(self):
        return [layer.name for layer in self.layers]

    def gemm_shapes(self):
        return [lower_to_gemm(layer) for layer in self.layers]

    @property
    def total_macs(self):
        return sum(shape.macs for shape in self.gemm_shapes())


def lower_to_gemm(layer):
    """ Lowers a layer to its GEMM operand dimensions.

    Parameters
    ----------
    layer : LayerDescriptor

    Returns
    -------
    GemmShape
        t_rows = E_h * E_w output pixels, k_inner = filter volume,
        m_cols = number of filters. A fully connected layer written as a
        1x1 convolution on a 1x1 IFMap lowers to t_rows = 1.
    """
    out_h, out_w = layer.output_size
    return GemmShape(t_rows=out_h * out_w,
                     k_inner=layer.filter_h * layer.filter_w * layer.channels,
                     m_cols=layer.num_filters)


def _split_row(line):
    cells = next(csv.reader([line]))
    cells = [c.strip() for c in cells]
    while cells and cells[-1] == '':
        cells.pop()
    return cells


def parse_topology(source, model_name=None):
    """ Parses a topology CSV.

    Parameters
    ----------
    source : str or file-like
        CSV text or a character stream
    model_name : str
        name of the model; defaults to the stream's file stem, or 'model'

    Returns
    -------
    Topology
        layers in file order

    Raises
    ------
    TopologyParseError
        wrong column count or non-integer field, naming the line number
    EmptyTopologyError
        no header or no layer rows
    ValidationError
        a layer violates the geometry invariants
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    if model_name is None:
        stream_name = getattr(source, 'name', None)
        if isinstance(stream_name, str):
            model_name = os.path.splitext(os.path.basename(stream_name))[0]
        else:
            model_name = 'model'

    header = None
    layers = []
    for line_no, line in enumerate(source, start=1):
        line = line.lstrip('\ufeff').strip()
        if not line or line.startswith(COMMENT_TOKEN):
            continue
        cells = _split_row(line)
        if header is None:
            if len(cells) not in (TOPOLOGY_MIN_COLUMNS, TOPOLOGY_MAX_COLUMNS):
                raise TopologyParseError('header has {} columns, expected {} or {}'.format(
                    len(cells), TOPOLOGY_MIN_COLUMNS, TOPOLOGY_MAX_COLUMNS), line_no)
            header = cells
            continue
        if len(cells) != len(header):
            raise TopologyParseError('expected {} columns, got {}'.format(
                len(header), len(cells)), line_no)
        try:
            values = [int(c) for c in cells[1:]]
        except ValueError:
            raise TopologyParseError('non-integer field in row {!r}'.format(line), line_no)
        if len(values) == TOPOLOGY_MIN_COLUMNS - 1:
            values.append(0)
        layers.append(LayerDescriptor(cells[0], *values))

    if not layers:
        raise EmptyTopologyError('topology {} has no layers'.format(model_name))
    logger.debug('Parsed %d layers for %s', len(layers), model_name)
    return Topology(model_name, layers)


def serialize_topology(topology):
    """ Writes a topology in the 9-column CSV form. """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(TOPOLOGY_HEADER)
    for layer in topology.layers:
        writer.writerow(layer.fields)
    return out.getvalue()


def load_topology(path):
    """ Reads a UTF-8 topology file; the model is named after the file stem.

    Raises
    ------
    TopologyParseError
        the file is not valid UTF-8, naming the first undecodable line
    """
    model_name = os.path.splitext(os.path.basename(path))[0]
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8-sig')
    except UnicodeDecodeError as e:
        raise TopologyParseError('not UTF-8 text ({})'.format(e.reason), raw[:e.start].count(b'\n') + 1)
    return parse_topology(text, model_name=model_name)


TOPOLOGY_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data', 'topologies')


def bundled_topologies():
    """ Names of the topologies shipped with the package. """
    return sorted(os.path.splitext(f)[0] for f in os.listdir(TOPOLOGY_DIR) if f.endswith('.csv'))


def resolve_topology_path(name_or_path):
    """ Returns the path itself if it exists, else the bundled topology of that name. """
    if os.path.exists(name_or_path):
        return name_or_path
    bundled = os.path.join(TOPOLOGY_DIR, '{}.csv'.format(name_or_path))
    if os.path.exists(bundled):
        return bundled
    return name_or_path
