import io

import pytest

from flex_tpu.errors import EmptyTopologyError, TopologyParseError, ValidationError
from flex_tpu.workload import (GemmShape, LayerDescriptor, Topology, bundled_topologies,
                               load_topology, lower_to_gemm, parse_topology,
                               resolve_topology_path, serialize_topology)

HEADER8 = 'Layer name,IFMAP Height,IFMAP Width,Filter Height,Filter Width,Channels,Num Filter,Strides,\n'
HEADER9 = 'Layer name,IFMAP Height,IFMAP Width,Filter Height,Filter Width,Channels,Num Filter,Strides,Padding\n'


def test_lower_alexnet_conv1():
    layer = LayerDescriptor('conv1', 227, 227, 11, 11, 3, 96, 4)
    assert lower_to_gemm(layer) == GemmShape(3025, 363, 96)


def test_lower_fully_connected():
    layer = LayerDescriptor('fc', 1, 1, 1, 1, 512, 1000, 1)
    assert lower_to_gemm(layer) == GemmShape(1, 512, 1000)


def test_lower_floors_inexact_stride():
    layer = LayerDescriptor('odd', 8, 8, 3, 3, 1, 1, 2)
    assert layer.output_size == (3, 3)
    assert lower_to_gemm(layer).t_rows == 9


def test_lower_with_padding():
    layer = LayerDescriptor('conv1', 224, 224, 7, 7, 3, 64, 2, 3)
    assert lower_to_gemm(layer) == GemmShape(12544, 147, 64)


@pytest.mark.parametrize('fields', [
    (0, 4, 1, 1, 1, 1, 1, 0),
    (4, 4, 1, 1, 0, 1, 1, 0),
    (4, 4, 1, 1, 1, 1, 0, 0),
    (4, 4, 1, 1, 1, 1, 1, -1),
    (2, 2, 3, 3, 1, 1, 1, 0),
])
def test_layer_rejects_bad_geometry(fields):
    with pytest.raises(ValidationError) as e:
        LayerDescriptor('bad', *fields)
    assert 'bad' in str(e.value)


def test_gemm_shape_rejects_zero():
    with pytest.raises(ValidationError):
        GemmShape(0, 1, 1)


def test_parse_eight_column_scalesim_file():
    text = HEADER8 + 'Conv1,224,224,11,11,3,96,4,\nConv2,55,55,5,5,96,256,1,\n'
    topology = parse_topology(text, model_name='alexnet')
    assert topology.model_name == 'alexnet'
    assert topology.layer_names == ['Conv1', 'Conv2']
    assert topology.layers[0].padding == 0
    assert topology.layers[1].num_filters == 256


def test_parse_skips_comments_and_blank_lines():
    text = '# a model\n\n' + HEADER9 + '# first\nc1,4,4,1,1,2,3,1,0\n\n'
    topology = parse_topology(text)
    assert len(topology) == 1
    assert topology.layers[0] == LayerDescriptor('c1', 4, 4, 1, 1, 2, 3, 1, 0)


def test_parse_tolerates_byte_order_mark():
    topology = parse_topology('\ufeff' + HEADER9 + 'c1,4,4,1,1,2,3,1,0\n')
    assert topology.layer_names == ['c1']


def test_parse_rejects_wrong_column_count():
    text = HEADER9 + 'c1,4,4,1,1,2,3,1,0\nc2,4,4,1,1,2,3\n'
    with pytest.raises(TopologyParseError) as e:
        parse_topology(text)
    assert e.value.line == 3


def test_parse_rejects_non_integer_field():
    with pytest.raises(TopologyParseError) as e:
        parse_topology(HEADER9 + 'c1,4,four,1,1,2,3,1,0\n')
    assert e.value.line == 2


def test_parse_header_only_is_empty():
    with pytest.raises(EmptyTopologyError):
        parse_topology(HEADER9)


def test_parse_rejects_duplicate_names():
    with pytest.raises(ValidationError):
        parse_topology(HEADER9 + 'c1,4,4,1,1,2,3,1,0\nc1,4,4,1,1,2,3,1,0\n')


def test_parse_stream_takes_model_name_from_file(tmp_path):
    path = tmp_path / 'tiny.csv'
    path.write_text(HEADER9 + 'c1,4,4,1,1,2,3,1,0\n')
    with open(str(path)) as f:
        assert parse_topology(f).model_name == 'tiny'


def test_serialize_then_parse_preserves_layers(resnet18):
    again = parse_topology(serialize_topology(resnet18), model_name=resnet18.model_name)
    assert again == resnet18


def test_load_bundled_resnet18(resnet18):
    assert resnet18.model_name == 'resnet18'
    assert len(resnet18) == 21
    shapes = resnet18.gemm_shapes()
    assert shapes[0] == GemmShape(12544, 147, 64)
    assert shapes[-1] == GemmShape(1, 512, 1000)


def test_bundled_topologies_all_parse():
    names = bundled_topologies()
    assert names == ['alexnet', 'faster_rcnn', 'googlenet', 'mobilenet', 'resnet18', 'vgg13', 'yolo_tiny']
    for name in names:
        topology = load_topology(resolve_topology_path(name))
        assert topology.total_macs > 0


def test_topology_must_not_be_empty():
    with pytest.raises(EmptyTopologyError):
        Topology('empty', [])


def test_total_macs():
    topology = parse_topology(HEADER9 + 'c1,4,4,1,1,2,3,1,0\n')
    assert topology.total_macs == 16 * 2 * 3


def test_parse_accepts_stream():
    topology = parse_topology(io.StringIO(HEADER9 + 'c1,4,4,1,1,2,3,1,0\n'), model_name='s')
    assert topology.model_name == 's'


@pytest.mark.parametrize('filter_size', [1, 3, 5, 7])
@pytest.mark.parametrize('height, width', [(7, 7), (14, 28), (56, 56), (224, 224)])
def test_same_padding_keeps_every_pixel(height, width, filter_size):
    layer = LayerDescriptor('same', height, width, filter_size, filter_size, 8, 16, 1, filter_size // 2)
    assert layer.output_size == (height, width)
    assert lower_to_gemm(layer) == GemmShape(height * width, filter_size * filter_size * 8, 16)


def test_load_rejects_non_utf8_file(tmp_path):
    path = tmp_path / 'latin.csv'
    path.write_bytes(HEADER9.encode() + b'c1,4,4,1,1,2,3,1,0\n' + b'\xff\xfe,4,4,1,1,2,3,1,0\n')
    with pytest.raises(TopologyParseError) as e:
        load_topology(str(path))
    assert e.value.line == 3
