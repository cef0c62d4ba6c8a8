import os

import pytest

from flex_tpu.dataflow_map import ArrayConfig
from flex_tpu.workload import TOPOLOGY_DIR, load_topology

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


def data_path(name):
    return os.path.join(DATA_DIR, name)


@pytest.fixture
def array_2x2():
    return ArrayConfig(2, 2)


@pytest.fixture
def array_32():
    return ArrayConfig(32, 32)


@pytest.fixture
def resnet18():
    return load_topology(os.path.join(TOPOLOGY_DIR, 'resnet18.csv'))


@pytest.fixture
def resnet18_stages():
    return load_topology(data_path('resnet18_stages.csv'))


@pytest.fixture
def resnet18_stages_path():
    return data_path('resnet18_stages.csv')
