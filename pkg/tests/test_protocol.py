import dataclasses
import math

import numpy as np
import pytest

import oracles
from solipsim.errors import BlankRegisterError, ProtocolError
from solipsim.hilbert import (
    ProjectiveMeasurement,
    RegisterLayout,
    born,
    computational_measurement,
    condition,
)
from solipsim.protocol import (
    RNG_ALGORITHM,
    MeasureRecord,
    Prepare,
    Protocol,
    ProtocolSampler,
    RoundTrace,
    Send,
    apply_step,
    continue_unitary,
    memory_measurement,
    protocol_from_json,
    run_rounds,
    run_sampled,
    run_unitary,
    sample_many,
)
from solipsim.scenarios import build_fr


def coin_measurement(labels=("zero", "one")):
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    return ProjectiveMeasurement(("C",), ((labels[0], p0), (labels[1], p1)))


def coin_protocol(announced=True, halting=True):
    # biased coin: P(one) = 0.64
    layout = RegisterLayout((("C", 2), ("DX", 2), ("MX", 2)))
    steps = (
        Prepare("C", (0.6, 0.8), "t:0"),
        MeasureRecord(
            "X", coin_measurement(), "DX", "MX",
            "announced" if announced else "coherent", "t:1",
        ),
    )
    halt = (lambda o: o.get("X") == "one") if halting else None
    return Protocol(layout, steps, halt if announced else None, name="coin")


def test_rng_algorithm_constant():
    assert RNG_ALGORITHM == "philox4x64"


def test_measure_record_rejects_bad_coherence():
    with pytest.raises(ProtocolError, match="coherent\\|announced"):
        MeasureRecord("X", coin_measurement(), "DX", "MX", "sometimes")


def test_protocol_validation_errors():
    layout = RegisterLayout((("C", 2), ("DX", 2), ("MX", 2)))
    with pytest.raises(ProtocolError, match="unknown register"):
        Protocol(layout, (Prepare("Q", (1.0, 0.0)),))
    with pytest.raises(ProtocolError, match="amplitude length"):
        Protocol(layout, (Prepare("C", (1.0, 0.0, 0.0)),))
    with pytest.raises(ProtocolError, match="device and memory must differ"):
        Protocol(layout, (MeasureRecord("X", coin_measurement(), "DX", "DX"),))
    with pytest.raises(ProtocolError, match="may not also be a target"):
        Protocol(layout, (MeasureRecord("X", coin_measurement(), "C", "MX"),))
    with pytest.raises(ProtocolError, match="halting condition requires"):
        Protocol(layout, (Prepare("C", (0.6, 0.8)),), halting=lambda o: True)


def test_prepare_requires_normalized_amplitudes():
    proto = Protocol(
        RegisterLayout((("C", 2),)), (Prepare("C", (0.6, 0.7)),)
    )
    with pytest.raises(ProtocolError, match="not normalized"):
        run_unitary(proto)


def test_blank_register_enforcement():
    layout = RegisterLayout((("C", 2), ("DX", 2), ("MX", 2)))
    double_prep = Protocol(layout, (Prepare("C", (0.6, 0.8)), Prepare("C", (1.0, 0.0))))
    with pytest.raises(BlankRegisterError, match="outside its blank state"):
        run_unitary(double_prep)
    # second measurement writes into occupied device/memory registers
    reuse = Protocol(
        layout,
        (
            Prepare("C", (0.6, 0.8)),
            MeasureRecord("X", coin_measurement(), "DX", "MX"),
            MeasureRecord("Y", coin_measurement(("a", "b")), "DX", "MX"),
        ),
    )
    with pytest.raises(BlankRegisterError, match="already written"):
        run_unitary(reuse)


def test_send_leaves_state_untouched():
    proto = coin_protocol()
    state = run_unitary(proto)
    moved = apply_step(state, Send("C", "X", "Y"))
    assert moved is state


def test_run_unitary_records_outcome_in_device_and_memory():
    state = run_unitary(coin_protocol())
    amps = state.amplitudes  # order C, DX, MX
    np.testing.assert_allclose(amps[0b000], 0.6, atol=1e-15)
    np.testing.assert_allclose(amps[0b111], 0.8, atol=1e-15)
    assert np.count_nonzero(np.abs(amps) > 1e-15) == 2


def test_run_unitary_prefix_bounds():
    proto = coin_protocol()
    with pytest.raises(ProtocolError, match="out of range"):
        run_unitary(proto, 3)
    state5 = run_unitary(build_fr().protocol, 5)
    np.testing.assert_allclose(state5.amplitudes, oracles.fr_phi(), atol=1e-12)


def test_run_unitary_matches_independent_amplitude_tables():
    proto = build_fr().protocol
    for prefix, table in [
        (1, oracles.fr_init()),
        (3, oracles.fr_psi()),
        (5, oracles.fr_phi()),
        (6, oracles.fr_xi()),
        (7, oracles.fr_zeta()),
    ]:
        np.testing.assert_allclose(
            run_unitary(proto, prefix).amplitudes, table, atol=1e-12
        )


def test_continue_unitary_composes_with_prefix():
    proto = build_fr().protocol
    mid = run_unitary(proto, 5)
    full = continue_unitary(proto, mid, 5, 7)
    np.testing.assert_allclose(full.amplitudes, run_unitary(proto).amplitudes, atol=1e-15)
    with pytest.raises(ProtocolError, match="out of bounds"):
        continue_unitary(proto, mid, 5, 99)


def test_announced_flag_does_not_change_the_global_state():
    bundle = build_fr()
    silent_steps = tuple(
        dataclasses.replace(s, coherence="coherent") if isinstance(s, MeasureRecord) else s
        for s in bundle.protocol.steps
    )
    silent = Protocol(bundle.protocol.layout, silent_steps)
    np.testing.assert_allclose(
        run_unitary(silent).amplitudes, run_unitary(bundle.protocol).amplitudes, atol=0
    )


def test_memory_measurement_labels_and_fillers():
    layout = RegisterLayout((("C", 2), ("DX", 3), ("MX", 3)))
    step = MeasureRecord("X", coin_measurement(), "DX", "MX")
    proto = Protocol(layout, (Prepare("C", (0.6, 0.8)), step))
    meas = memory_measurement(proto, step)
    assert meas.target == ("MX",)
    assert meas.labels == ("zero", "one", "_unused2")


def test_sampler_distribution_matches_unitary_born_rule():
    proto = coin_protocol()
    step, dist = ProtocolSampler(proto).outcome_distribution(())
    assert step.agent == "X"
    np.testing.assert_allclose([dist["zero"], dist["one"]], [0.36, 0.64], atol=1e-12)


def test_sampler_branches_match_exact_conditioning():
    bundle = build_fr()
    proto = bundle.protocol
    sampler = ProtocolSampler(proto)
    wbar_step = proto.steps[5]
    w_step = proto.steps[6]

    state6 = run_unitary(proto, 6)
    _, root_dist = sampler.outcome_distribution(())
    exact_root = born(state6, memory_measurement(proto, wbar_step))
    for label in ("okbar", "failbar"):
        np.testing.assert_allclose(root_dist[label], exact_root[label], atol=1e-12)

    _, okbar_dist = sampler.outcome_distribution(("okbar",))
    _, conditioned = condition(state6, memory_measurement(proto, wbar_step), "okbar")
    after_w = continue_unitary(proto, conditioned, 6, 7)
    exact_w = born(after_w, memory_measurement(proto, w_step))
    for label in ("ok", "fail"):
        np.testing.assert_allclose(okbar_dist[label], exact_w[label], atol=1e-12)
    # past the last announced step there is nothing left to draw
    assert sampler.outcome_distribution(("okbar", "ok")) == (None, {})


def test_run_sampled_is_deterministic_per_seed():
    proto = coin_protocol()
    assert run_sampled(proto, 7) == run_sampled(proto, 7)
    traces = {run_sampled(proto, seed).announced for seed in range(40)}
    assert traces == {(("X", "zero"),), (("X", "one"),)}


def test_sample_many_split_batch_invariance():
    proto = build_fr().protocol
    sampler = ProtocolSampler(proto)
    whole = sample_many(proto, 2026, 10, sampler=sampler)
    split = sample_many(proto, 2026, 4, sampler=sampler) + sample_many(
        proto, 2026, 6, start=4, sampler=sampler
    )
    assert whole == split
    with pytest.raises(ValueError, match="nonnegative"):
        sample_many(proto, 2026, -1)


def test_sampled_frequency_agrees_with_unitary_probability():
    proto = coin_protocol()
    shots = 20000
    traces = sample_many(proto, 2026, shots)
    ones = sum(1 for t in traces if t.outcome("X") == "one")
    assert abs(ones / shots - 0.64) <= oracles.binomial_3sigma(0.64, shots)


def test_round_trace_accessors():
    trace = RoundTrace((("Wbar", "okbar"), ("W", "fail")), 3)
    assert trace.as_dict() == {"Wbar": "okbar", "W": "fail"}
    assert trace.outcome("W") == "fail"
    assert trace.round_index == 3
    with pytest.raises(ProtocolError, match="no announced outcome"):
        trace.outcome("F")


def test_run_rounds_halts_immediately_when_condition_always_fires():
    layout = RegisterLayout((("C", 2), ("DX", 2), ("MX", 2)))
    proto = Protocol(
        layout,
        (Prepare("C", (0.6, 0.8)), MeasureRecord("X", coin_measurement(), "DX", "MX", "announced")),
        halting=lambda o: True,
    )
    result = run_rounds(proto, 5, 50)
    assert result.halted and result.rounds_run == 1


def test_run_rounds_requires_halting_and_positive_cap():
    no_halt = coin_protocol(halting=False)
    with pytest.raises(ProtocolError, match="no halting condition"):
        run_rounds(no_halt, 1, 10)
    with pytest.raises(ValueError, match="max_rounds"):
        run_rounds(coin_protocol(), 1, 0)


def test_run_rounds_single_round_halting_rate():
    proto = coin_protocol()  # halts on "one", p = 0.64
    n = 2000
    halted = sum(1 for seed in range(n) if run_rounds(proto, seed, 1).halted)
    assert abs(halted / n - 0.64) <= oracles.binomial_3sigma(0.64, n)


def test_run_rounds_mean_matches_geometric_law():
    # halting probability 1/12 per round; mean rounds to halt is 12
    proto = build_fr().protocol
    n = 200
    results = [run_rounds(proto, seed, 1000) for seed in range(n)]
    assert all(r.halted for r in results)
    for r in results:
        assert r.final_trace.as_dict() == {"Wbar": "okbar", "W": "ok"}
    mean = sum(r.rounds_run for r in results) / n
    assert abs(mean - oracles.GEOM_MEAN_ROUNDS) <= 3.0 * math.sqrt(
        oracles.GEOM_VARIANCE / n
    )


COIN_DOC = {
    "name": "coin",
    "layout": [["C", 2], ["DX", 2], ["MX", 2]],
    "steps": [
        {"kind": "prepare", "register": "C", "amplitudes": [0.6, 0.8], "time_tag": "t:0"},
        {
            "kind": "measure_record",
            "agent": "X",
            "targets": ["C"],
            "basis": "computational",
            "labels": ["zero", "one"],
            "device": "DX",
            "memory": "MX",
            "coherence": "announced",
            "time_tag": "t:1",
        },
    ],
    "halting": {"all_of": {"X": "one"}},
}


def test_protocol_from_json_round_trip():
    proto = protocol_from_json(COIN_DOC)
    assert proto.name == "coin"
    assert proto.layout.names == ("C", "DX", "MX")
    assert proto.announced_steps() == (1,)
    assert proto.halting({"X": "one"}) and not proto.halting({"X": "zero"})
    direct = coin_protocol()
    for seed in range(10):
        assert run_sampled(proto, seed) == run_sampled(direct, seed)


def test_protocol_from_json_vector_outcomes_and_complex_entries():
    s = 1.0 / math.sqrt(2.0)
    doc = {
        "name": "plus-minus",
        "layout": [["C", 2], ["DX", 2], ["MX", 2]],
        "steps": [
            {"kind": "prepare", "register": "C", "amplitudes": [[s, 0.0], [0.0, s]]},
            {
                "kind": "measure_record",
                "agent": "X",
                "targets": ["C"],
                "outcomes": [{"label": "plus", "vector": [s, s]}],
                "complement_label": "minus",
                "device": "DX",
                "memory": "MX",
                "coherence": "announced",
            },
            {"kind": "send", "register": "MX", "from": "X", "to": "Y"},
        ],
    }
    proto = protocol_from_json(doc)
    _, dist = ProtocolSampler(proto).outcome_distribution(())
    # |<+| (|0> + i|1>)/sqrt(2)|^2 = 1/2
    np.testing.assert_allclose([dist["plus"], dist["minus"]], [0.5, 0.5], atol=1e-12)
    assert isinstance(proto.steps[2], Send)


def test_protocol_from_json_rejects_malformed_documents():
    with pytest.raises(ProtocolError, match="malformed"):
        protocol_from_json({"layout": [["C", 2]]})
    bad_kind = {
        "layout": [["C", 2]],
        "steps": [{"kind": "teleport", "register": "C"}],
    }
    with pytest.raises(ProtocolError, match="unknown step kind"):
        protocol_from_json(bad_kind)
    bad_labels = dict(COIN_DOC)
    bad_labels["steps"] = [
        COIN_DOC["steps"][0],
        {**COIN_DOC["steps"][1], "labels": ["zero"]},
    ]
    with pytest.raises(ProtocolError, match="one label per index"):
        protocol_from_json(bad_labels)
