import numpy as np
import pytest

from flex_tpu.dataflow_map import DATAFLOWS, ArrayConfig, Dataflow, plan_folds
from flex_tpu.errors import ConsistencyError, ValidationError, VerifyMismatchError
from flex_tpu.pe_grid_sim import PinSource, SimResult
from flex_tpu.scheduler import (FlexSchedule, StaticComparison, build_schedule,
                                cmu_program_to_csv, compare_static, emit_cmu_program,
                                plan_schedule, schedule_to_csv, select_dataflow, speedup,
                                synthetic_operands, verify_layer, verify_topology)
from flex_tpu.workload import GemmShape, LayerDescriptor, Topology


def gemm_layer(name, t, k, m):
    """ A 1xk-channel pointwise layer lowering to exactly (t, k, m). """
    return LayerDescriptor(name, 1, t, 1, 1, k, m, 1)


@pytest.fixture
def small_topology():
    return Topology('small', [gemm_layer('a', 6, 3, 2), gemm_layer('b', 2, 9, 2),
                              gemm_layer('c', 3, 4, 7)])


@pytest.mark.parametrize('cycles, expected', [
    ({Dataflow.IS: 6, Dataflow.OS: 6, Dataflow.WS: 6}, Dataflow.OS),
    ({Dataflow.IS: 3, Dataflow.OS: 5, Dataflow.WS: 3}, Dataflow.WS),
    ({Dataflow.IS: 2, Dataflow.OS: 5, Dataflow.WS: 3}, Dataflow.IS),
    ({Dataflow.IS: 8, Dataflow.OS: 6, Dataflow.WS: 8}, Dataflow.OS),
])
def test_select_dataflow(cycles, expected):
    assert select_dataflow(cycles) is expected


def test_all_equal_layer_picks_os(array_2x2):
    schedule = build_schedule(Topology('m', [gemm_layer('l', 2, 2, 2)]), array_2x2)
    entry = schedule.entries[0]
    assert (entry.cycles_is, entry.cycles_os, entry.cycles_ws) == (6, 6, 6)
    assert entry.chosen is Dataflow.OS
    assert schedule.total_flex_cycles == 6


def test_deep_layer_picks_os(array_2x2):
    schedule = build_schedule(Topology('m', [gemm_layer('l', 2, 8, 2)]), array_2x2)
    assert schedule.entries[0].chosen is Dataflow.OS
    assert schedule.total_flex_cycles == 12


def test_schedule_totals(small_topology):
    schedule = build_schedule(small_topology, ArrayConfig(2, 2))
    assert schedule.layer_names == ['a', 'b', 'c']
    assert schedule.total_flex_cycles == sum(
        min(e.cycles_is, e.cycles_os, e.cycles_ws) for e in schedule.entries)
    assert schedule.total_flex_cycles <= min(schedule.static_total(df) for df in DATAFLOWS)
    for entry in schedule.entries:
        assert set(entry.reports) == set(DATAFLOWS)
        assert entry.reports[entry.chosen].cycles == entry.flex_cycles


def test_emit_cmu_program(resnet18, array_32):
    schedule = build_schedule(resnet18, array_32)
    program = emit_cmu_program(schedule, plan_schedule(resnet18, array_32, schedule))
    assert len(program) == len(resnet18)
    first, last = program.records[0], program.records[-1]
    assert (first.layer_index, first.dataflow, first.control_bit, first.pin_source) == \
        (0, Dataflow.WS, 0, PinSource.WEIGHT)
    assert (last.layer_name, last.dataflow, last.control_bit, last.pin_source) == \
        ('fc', Dataflow.IS, 0, PinSource.IFMAP)
    os_records = [r for r in program.records if r.dataflow is Dataflow.OS]
    assert os_records and all(r.control_bit == 1 and r.pin_source is PinSource.NONE for r in os_records)


def test_emit_cmu_program_rejects_empty_schedule():
    with pytest.raises(ConsistencyError):
        emit_cmu_program(FlexSchedule('empty', []), [])


def test_emit_cmu_program_rejects_mismatched_plans(small_topology, array_2x2):
    schedule = build_schedule(small_topology, array_2x2)
    plans = plan_schedule(small_topology, array_2x2, schedule)
    with pytest.raises(ConsistencyError):
        emit_cmu_program(schedule, plans[:-1])
    wrong = [plan_folds(GemmShape(6, 3, 2), array_2x2, df) for df in DATAFLOWS
             if df is not schedule.entries[0].chosen][:1] + plans[1:]
    with pytest.raises(ConsistencyError):
        emit_cmu_program(schedule, wrong)


def test_plan_schedule_rejects_other_topology(small_topology, resnet18, array_2x2):
    schedule = build_schedule(small_topology, array_2x2)
    with pytest.raises(ConsistencyError):
        plan_schedule(resnet18, array_2x2, schedule)


def test_speedup_published_pairs():
    assert speedup(1.176e6, 8.598e5) == pytest.approx(1.368, abs=1e-3)
    assert speedup(8.852e5, 8.598e5) == pytest.approx(1.030, abs=1e-3)
    with pytest.raises(ValidationError):
        speedup(10, 0)


def test_static_comparison_speedups():
    comparison = StaticComparison('AlexNet', {Dataflow.IS: 1.176e6, Dataflow.OS: 8.852e5,
                                              Dataflow.WS: 1.188e6}, 8.598e5)
    speedups = comparison.speedups
    assert speedups[Dataflow.IS] == pytest.approx(1.368, abs=1e-3)
    assert speedups[Dataflow.WS] == pytest.approx(1.382, abs=1e-3)


def test_single_layer_speedup_against_winner_is_one(array_32):
    topology = Topology('one', [gemm_layer('l', 50, 40, 30)])
    comparison = compare_static(topology, array_32)
    chosen = build_schedule(topology, array_32).entries[0].chosen
    assert comparison.speedups[chosen] == 1.0
    assert all(value >= 1.0 for value in comparison.speedups.values())


def test_synthetic_operands_are_seeded_int8():
    shape = GemmShape(4, 5, 6)
    a, b = synthetic_operands(shape, ArrayConfig(2, 2), seed=1)
    again, _ = synthetic_operands(shape, ArrayConfig(2, 2), seed=1)
    np.testing.assert_array_equal(a, again)
    assert a.shape == (4, 5) and b.shape == (5, 6)
    assert a.min() >= -128 and a.max() <= 127


@pytest.mark.parametrize('df', DATAFLOWS)
def test_verify_layer(df):
    result = verify_layer(GemmShape(5, 6, 4), ArrayConfig(3, 3), df, layer_name='l')
    assert isinstance(result, SimResult)


def test_verify_layer_skips_over_cap():
    assert verify_layer(GemmShape(50, 50, 50), ArrayConfig(2, 2), Dataflow.OS, trace_cap=10) is None


def test_verify_layer_reports_cycle_mismatch(monkeypatch):
    def slow_simulation(a, b, array, df, trace_cap=None):
        return SimResult(a.dot(b), 10 ** 6, [10 ** 6], df)

    monkeypatch.setattr('flex_tpu.scheduler.simulate_gemm', slow_simulation)
    with pytest.raises(VerifyMismatchError) as e:
        verify_layer(GemmShape(2, 2, 2), ArrayConfig(2, 2), Dataflow.WS, layer_name='conv9')
    assert (e.value.layer, e.value.dataflow) == ('conv9', Dataflow.WS)


def test_verify_layer_reports_wrong_output(monkeypatch):
    def wrong_simulation(a, b, array, df, trace_cap=None):
        return SimResult(a.dot(b) + 1, 6, [6], df)

    monkeypatch.setattr('flex_tpu.scheduler.simulate_gemm', wrong_simulation)
    with pytest.raises(VerifyMismatchError):
        verify_layer(GemmShape(2, 2, 2), ArrayConfig(2, 2), Dataflow.OS)


def test_build_schedule_with_verify(small_topology, array_2x2):
    verified = build_schedule(small_topology, array_2x2, verify=True)
    assert verified == build_schedule(small_topology, array_2x2)


def test_schedule_to_csv(array_2x2):
    schedule = build_schedule(Topology('m', [gemm_layer('l', 2, 8, 2)]), array_2x2)
    assert schedule_to_csv(schedule).splitlines() == [
        'layer,chosen,cycles_is,cycles_os,cycles_ws,flex_cycles',
        'l,OS,24,12,24,12',
    ]


def test_cmu_program_to_csv(array_2x2):
    topology = Topology('m', [gemm_layer('l', 2, 8, 2)])
    schedule = build_schedule(topology, array_2x2)
    program = emit_cmu_program(schedule, plan_schedule(topology, array_2x2, schedule))
    assert cmu_program_to_csv(program).splitlines() == [
        'layer_index,layer_name,dataflow,control_bit,pin_source',
        '0,l,OS,1,none',
    ]


def test_verify_topology_follows_given_dataflows(small_topology, array_2x2):
    dataflows = [Dataflow.IS, Dataflow.WS, Dataflow.OS]
    results = verify_topology(small_topology, array_2x2, dataflows)
    assert [r.dataflow for r in results] == dataflows


def test_verify_topology_needs_one_dataflow_per_layer(small_topology, array_2x2):
    with pytest.raises(ConsistencyError):
        verify_topology(small_topology, array_2x2, [Dataflow.OS])
