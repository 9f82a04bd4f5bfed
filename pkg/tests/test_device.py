import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockforge.device import Device, ensemble, load_device, run, run_state, validate_device
from fockforge.errors import CapacityError, ElementError, ValidationError
from fockforge.measurement import translate
from fockforge.state import State, decode_qubits, encode_qubits

CZ_QMAP = [[0, 2], [1, 3]]
CNOT_QMAP = [[1, 3], [2, 4]]


def nsx_gate():
    g = Device(3)
    g.open_channel(0)
    g.add_photons(1, 1)
    g.add_photons(0, 2)
    g.phase_shifter(0, 180).beamsplitter(1, 2, 22.5)
    g.beamsplitter(0, 1, 65.5302).beamsplitter(1, 2, -22.5)
    g.detector(1, 1).detector(2, 0)
    return g


def cz_device():
    d = Device(8)
    d.add_photons(1, 0).add_photons(1, 2)
    d.beamsplitter(0, 2, 45)
    d.add_gate([0, 4, 5], nsx_gate())
    d.add_gate([2, 6, 7], nsx_gate())
    d.beamsplitter(0, 2, -45)
    for c in range(4):
        d.detector(c)
    return d


def cnot_device(values):
    a = math.degrees(math.acos(1 / math.sqrt(3)))
    d = Device(6).qubits(values, CNOT_QMAP)
    d.beamsplitter(3, 4, -45).beamsplitter(0, 1, a).beamsplitter(2, 3, a)
    d.beamsplitter(4, 5, a).beamsplitter(3, 4, -45)
    d.phase_shifter(1, 180).phase_shifter(3, 180)
    d.detector(0, 0)
    for c in (1, 2, 3, 4):
        d.detector(c)
    d.detector(5, 0)
    return d


def test_two_photons_share_one_packet():
    d = Device(2).add_photons(1, 0).add_photons(1, 1)
    assert len(d.circuit().packets) == 1
    assert d.input().isclose(State.basis([1, 1]))


def test_zero_photons_still_register_packet():
    d = Device(2, npackets=2).add_photons(1, 0).add_photons(0, 1, t=3.0)
    assert len(d.circuit().packets) == 2
    ket = [0] * d.nmodes
    ket[d.circuit().modes.index(0, 0, 0)] = 1
    assert d.input().isclose(State.basis(ket))


def test_two_groups_of_five():
    d = Device(2, npackets=2).add_photons(5, 0).add_photons(5, 1, t=2.0)
    c = d.circuit()
    assert len(c.packets) == 2
    (ket, amp), = d.input().items()
    assert ket[c.modes.index(0, 0, 0)] == 5
    assert ket[c.modes.index(1, 0, 1)] == 5
    assert amp == 1


def test_packet_capacity():
    d = Device(2).add_photons(1, 0)
    with pytest.raises(CapacityError):
        d.add_photons(1, 1, t=1.0)


def test_photon_validation():
    with pytest.raises(ValueError):
        Device(2).add_photons(-1, 0)
    with pytest.raises(ElementError):
        Device(2).add_photons(1, 2)
    with pytest.raises(ElementError):
        Device(2).add_photons(1, 0, pol=1)


def test_qd_needs_polarization():
    with pytest.raises(ElementError):
        Device(2).add_qd(0, 1)


def test_perfect_qd_gives_bell_pair():
    d = Device(2, polarized=True, npackets=2)
    # a vanishing mean delay pins the emission time to zero
    d.add_qd(0, 1, k=1.0, S=0.0, t2=1.0, tau_delta=1e-12)
    c = d.circuit()
    inp = d.input(np.random.default_rng(0))
    assert len(inp) == 2
    hh = [0] * c.nmodes
    vv = [0] * c.nmodes
    hh[c.modes.index(0, 0, 0)] = hh[c.modes.index(1, 0, 1)] = 1
    vv[c.modes.index(0, 1, 0)] = vv[c.modes.index(1, 1, 1)] = 1
    s = 1 / math.sqrt(2)
    assert inp.amplitude(hh) == pytest.approx(s)
    assert inp.amplitude(vv) == pytest.approx(s)


def test_qubits_pattern():
    assert Device(4).qubits([1, 0], CZ_QMAP).input().isclose(State.basis([1, 0, 0, 1]))
    assert Device(6).qubits([1, 0], CNOT_QMAP).input().isclose(State.basis([0, 1, 0, 0, 1, 0]))
    with pytest.raises(ValueError):
        Device(4).qubits([2, 0], CZ_QMAP)
    with pytest.raises(ValueError):
        Device(4).qubits([1], CZ_QMAP)


def test_detector_condition_zero():
    d = Device(2).add_photons(1, 0).beamsplitter(0, 1, 45).detector(1, 0)
    raw, _ = run_state(d)
    out = d.apply_condition(raw)
    assert out.norm2() == pytest.approx(0.5)
    assert list(out.kets()) == [(1,)]


def test_ignore_sums_channel_out():
    d = Device(2).add_photons(1, 0).add_photons(1, 1).beamsplitter(0, 1, 45)
    d.ignore(1).detector(0)
    b = run(d)
    assert len(b.labels) == 1
    assert b[(0,)] == pytest.approx(0.5)
    assert b[(2,)] == pytest.approx(0.5)
    assert b[(1,)] == pytest.approx(0.0, abs=1e-15)


def test_duplicate_detector_rejected():
    d = Device(2).detector(0)
    with pytest.raises(ElementError):
        d.detector(0)
    with pytest.raises(ElementError):
        d.ignore(0)


def test_negative_noise_rejected():
    with pytest.raises(ElementError):
        Device(2).noise(-1.0)


def test_separator_is_a_no_op():
    a = Device(2).add_photons(1, 0).beamsplitter(0, 1, 30).beamsplitter(0, 1, 20)
    b = Device(2).add_photons(1, 0).beamsplitter(0, 1, 30).separator().beamsplitter(0, 1, 20)
    assert np.array_equal(a.circuit().U, b.circuit().U)


def test_json_round_trip(tmp_path):
    d = Device(3, npackets=2)
    d.add_photons(1, 0).add_photons(2, 1, t=0.5, w=2.0)
    d.beamsplitter(0, 1, 30, 10).loss(2, 0.2).phase_shifter(1, 45)
    d.detector(0, 1, eff=0.9).ignore(2).noise(0.01)
    back = Device.from_json(d.to_json())
    assert np.allclose(back.circuit().U, d.circuit().U)
    assert back.input().isclose(d.input())
    assert back.to_dict() == d.to_dict()
    path = tmp_path / "dev.json"
    path.write_text(d.to_json())
    assert load_device(path).to_dict() == d.to_dict()


def test_example_devices_load():
    for name in ("nsx", "hom", "cnot10", "swap"):
        load_device(f"devices/{name}.json").circuit()


@pytest.mark.parametrize("bad, where", [
    ({}, "channels"),
    ({"channels": 0}, "channels"),
    ({"channels": 2, "bogus": 1}, "unknown keys"),
    ({"channels": 2, "photons": [{"ch": 5}]}, "photons[0].ch"),
    ({"channels": 2, "elements": [{"kind": "beamsplitter", "ch": [0, 3]}]}, "elements[0].ch"),
    ({"channels": 2, "elements": [{"ch": [0, 1]}]}, "elements[0]"),
    ({"channels": 2, "detectors": [{"ch": 0}, {"ch": 0}]}, "detectors[1].ch"),
    ({"channels": 2, "detectors": [{"ch": 0, "cond": -1}]}, "detectors[0].cond"),
    ({"channels": 2, "qd": [{"ch_xx": 0}]}, "qd[0]"),
    ({"channels": 2, "noise": -1}, "noise"),
])
def test_validation_names_offending_entry(bad, where):
    with pytest.raises(ValidationError) as exc:
        validate_device(bad)
    assert where in str(exc.value)


def test_invalid_json_reports_position():
    with pytest.raises(ValidationError) as exc:
        Device.from_json('{"channels": 2,,}')
    assert "line 1" in str(exc.value)


@settings(max_examples=25, deadline=None)
@given(st.permutations(range(4)), st.floats(0, 90), st.floats(0, 360))
def test_commuting_declarations_are_order_insensitive(order, theta, phi):
    steps = [
        lambda d: d.add_photons(1, 0),
        lambda d: d.add_photons(1, 3),
        lambda d: d.beamsplitter(1, 2, theta),
        lambda d: d.phase_shifter(2, phi),
    ]
    ref = Device(4)
    for s in steps:
        s(ref)
    d = Device(4)
    # the two elements act on overlapping channels; keep their relative order
    order = list(order)
    if order.index(3) < order.index(2):
        i, j = order.index(2), order.index(3)
        order[i], order[j] = order[j], order[i]
    for k in order:
        steps[k](d)
    assert np.allclose(d.circuit().U, ref.circuit().U, atol=1e-14)
    assert d.input().isclose(ref.input())


def test_every_packet_gets_one_emitter_column():
    d = Device(2, npackets=3).add_photons(1, 0).add_photons(1, 1, t=0.4).add_photons(1, 0, t=1.1)
    c = d.circuit()
    E = c.emitter
    n = len(c.packets)
    for ch in range(2):
        idx = [c.modes.index(ch, 0, k) for k in range(n)]
        block = E[np.ix_(idx, idx)]
        # column k only mixes in orthonormal packets 0..k
        assert np.allclose(np.tril(block, -1), 0)
        assert np.allclose(np.linalg.norm(block, axis=0), 1.0)


def test_cz_amplitude_and_success():
    d = cz_device()
    raw, _ = run_state(d)
    out = encode_qubits(d.apply_condition(raw), CZ_QMAP)
    assert out.amplitude([1, 1]) == pytest.approx(-0.25, abs=1e-7)
    assert len(out) == 1


def test_cz_on_superposition():
    d = cz_device()
    q = State(2)
    for ket in ([0, 0], [0, 1], [1, 0], [1, 1]):
        q.add_term(0.5, ket)
    inp = decode_qubits(q, CZ_QMAP, [1, 0, 1, 0], d.circuit())
    raw, _ = run_state(d, input_state=inp)
    out = encode_qubits(d.apply_condition(raw), CZ_QMAP)
    assert out.norm2() == pytest.approx(1 / 16, abs=1e-7)
    norm = out.normalize()
    for ket, sign in (([0, 0], 1), ([0, 1], 1), ([1, 0], 1), ([1, 1], -1)):
        assert norm.amplitude(ket) == pytest.approx(0.5 * sign, abs=1e-6)


@pytest.mark.parametrize("values, target", [
    ([0, 0], (0, 0)), ([0, 1], (0, 1)), ([1, 0], (1, 1)), ([1, 1], (1, 0)),
])
def test_cnot_truth_table(values, target):
    bins = translate(run(cnot_device(values)), CNOT_QMAP)
    assert bins[target] == pytest.approx(1 / 9, abs=1e-9)
    assert bins.total == pytest.approx(1 / 9, abs=1e-9)


def test_hom_two_groups_of_five_coincident():
    # indistinguishable groups: the |5,5> interference pattern
    d = Device(2).add_photons(5, 0).add_photons(5, 1).beamsplitter(0, 1, 45)
    d.detector(0).detector(1)
    b = run(d)
    N = 5
    for k in range(0, 2 * N + 1):
        if k % 2:
            assert b[(k, 2 * N - k)] == pytest.approx(0.0, abs=1e-12)
        else:
            j = k // 2
            p = (math.factorial(2 * j) * math.factorial(2 * N - 2 * j)
                 / (4 ** N * math.factorial(j) ** 2 * math.factorial(N - j) ** 2))
            assert b[(k, 2 * N - k)] == pytest.approx(p, abs=1e-12)


def test_hom_two_groups_of_five_separated():
    # distinguishable groups: independent binomial splits
    d = Device(2, npackets=2).add_photons(5, 0).add_photons(5, 1, t=50.0)
    d.beamsplitter(0, 1, 45).detector(0).detector(1)
    b = run(d)
    for k in range(11):
        assert b[(k, 10 - k)] == pytest.approx(math.comb(10, k) / 2 ** 10, abs=1e-12)


def test_ensemble_single_run_is_pure():
    d = Device(2).add_photons(1, 0).beamsplitter(0, 1, 30)
    dm = ensemble(d, 1, seed=0)
    rho = dm.matrix()
    assert dm.runs == 1
    assert np.linalg.matrix_rank(rho, tol=1e-10) == 1
    assert np.allclose(np.diag(rho).real, [0.75, 0.25])


def swap_device():
    d = Device(3, polarized=True, npackets=4, shape="exponential")
    for ch, t1, t2 in ((1, 0.0, 46.71), (2, 16.0, 46.5)):
        d.add_qd(0, ch, t1=t1, f1=1e4, w1=1, t2=t2, f2=1e4, w2=1, S=1, k=0.8, tss=1, thv=1)
    d.beamsplitter(1, 2, 45)
    d.detector(0, kind="full").detector(1, 1).detector(2, 1)
    return d


def test_ensemble_is_deterministic_and_thread_independent():
    a = ensemble(swap_device(), 40, seed=11)
    b = ensemble(swap_device(), 40, seed=11)
    c = ensemble(swap_device(), 40, seed=11, workers=3)
    assert np.array_equal(a.raw, b.raw)
    assert np.allclose(a.matrix(), c.matrix(), atol=1e-12)
    assert a.runs == c.runs == 40


def test_ensemble_rejects_zero_runs():
    with pytest.raises(ValueError):
        ensemble(Device(1).add_photons(1, 0), 0)


def test_json_device_matches_builder():
    assert np.allclose(load_device("devices/cnot10.json").circuit().U,
                       cnot_device([1, 0]).circuit().U, atol=1e-12)
    text = json.loads(open("devices/nsx.json").read())
    validate_device(text)
