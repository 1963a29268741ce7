import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localft.circuit import GateKind
from localft.ec import (LOGICAL_PLUS, LOGICAL_ZERO, Protocol, ProtocolError, SyndromeHistory, TransportPlan,
                        VerificationPolicy, build_ec_round, extraction_round, majority, prepare_ancilla,
                        syndrome_decision, verification_clean, verify_ancilla)
from localft.harness import ExperimentConfig, make_transport, run_cycle
from localft.pauli_frame import CountingFaults, EnumeratedFaults, FrameSim, NoFaults, NoiseModel
from localft.steane import LOGICAL_ZERO_WORDS, bits, logical_failure_batch

NOISE = NoiseModel.uniform(1e-3)
EVEN = np.array([bits(w) for w in LOGICAL_ZERO_WORDS])


def exhaustive_single_faults(body):
    """Run ``body(sim)`` once to count locations, then once per single fault."""
    counter = CountingFaults()
    sim = FrameSim(1, counter)
    body(sim)
    ids, codes = counter.enumeration()
    sim = FrameSim(len(ids), EnumeratedFaults(ids, codes))
    return sim, body(sim), len(counter.locations)


# --- classical decisions -----------------------------------------------------

def test_syndrome_decision_examples():
    assert syndrome_decision([3, 3, None]) == 3
    assert syndrome_decision([None, None, 5]) is None
    assert syndrome_decision([1, 2, 4]) is None  # no majority: no correction
    assert syndrome_decision([6]) == 6
    with pytest.raises(ValueError):
        syndrome_decision([])


@given(st.lists(st.one_of(st.none(), st.integers(0, 6)), min_size=1, max_size=7))
@settings(max_examples=200, deadline=None)
def test_syndrome_decision_is_strict_majority(rounds):
    got = syndrome_decision(rounds)
    counts = {v: rounds.count(v) for v in set(rounds)}
    winners = [v for v, c in counts.items() if 2 * c > len(rounds)]
    assert got == (winners[0] if winners else None)


def test_majority_vectorised():
    r = [np.array([1, -1, 2]), np.array([1, 3, -1]), np.array([0, 3, 4])]
    assert majority(r).tolist() == [1, 3, -1]


def test_syndrome_history_batch_decision():
    h = SyndromeHistory()
    for bit in ([2, -1], [2, 5], [-1, 5]):
        h.add([np.array([bit])], [np.array([[-1, -1]])])
    b, p = syndrome_decision(h)
    assert b[0].tolist() == [[2, 5]] and p[0].tolist() == [[-1, -1]]


def test_verification_policy_validation():
    VerificationPolicy(2, 1)
    VerificationPolicy(3, 2)
    with pytest.raises(ValueError):
        VerificationPolicy(1, 1)
    with pytest.raises(ValueError):
        VerificationPolicy(2, 1, "majority")


def test_verification_clean_examples():
    flips = np.zeros((7, 4), bool)
    flips[:, 1] = bits(LOGICAL_ZERO_WORDS[3])  # stabiliser pattern: still clean
    flips[4, 2] = True  # single flip: reject
    flips[:, 3] = True  # logical flip: reject
    assert verification_clean(flips, 1).tolist() == [True, True, False, False]
    assert verification_clean(np.array([[False, True]]), 0).tolist() == [True, False]


# --- compile-only fragments ---------------------------------------------------

def test_extraction_round_wiring():
    s = extraction_round(range(7), range(7, 14), range(14, 21))
    assert s.depth == 3
    first, second, third = s.steps
    assert all(e.kind is GateKind.CNOT and e.operands[0] >= 7 for e in first)  # |0> ancilla controls
    cn = [e for e in second if e.kind is GateKind.CNOT]
    assert all(e.operands[0] < 7 and e.operands[1] >= 14 for e in cn)  # data controls |+> ancilla
    assert sum(e.kind is GateKind.HADAMARD for e in second) == 7
    assert all(e.kind is GateKind.MEAS_Z for e in third)


def test_build_ec_round_requires_ancillas():
    with pytest.raises(ProtocolError):
        build_ec_round(1, range(7), [], repeats=3)
    pairs = [(range(7 + 14 * r, 14 + 14 * r), range(14 + 14 * r, 21 + 14 * r)) for r in range(3)]
    assert build_ec_round(1, range(7), pairs).depth == 9


def test_prepare_ancilla_fragment():
    s = prepare_ancilla(LOGICAL_PLUS, 1, range(7), [range(7, 14)])
    assert s.count(GateKind.MEAS_Z) == 7
    assert s.steps[-1][0].kind is GateKind.HADAMARD
    with pytest.raises(ProtocolError):
        prepare_ancilla(LOGICAL_ZERO, 1, range(7), [])
    assert prepare_ancilla(LOGICAL_ZERO, 0, [3]).count() == 1
    assert verify_ancilla(range(7), [range(7, 14)]).depth == 2


# --- protocol, noiseless ------------------------------------------------------

@pytest.mark.parametrize("level", [1, 2])
def test_ec_round_corrects_any_single_qubit_error_noiselessly(level):
    n = 7**level
    cols = 3 * n
    sim = FrameSim(cols, NoFaults())
    data = sim.alloc(n).reshape(1, n)
    for q in range(n):
        sim.x[data[0, q], q] = True
        sim.z[data[0, q], n + q] = True
        sim.x[data[0, q], 2 * n + q] = sim.z[data[0, q], 2 * n + q] = True
    Protocol(sim, NOISE).ec_round(data, level)
    assert not sim.x[data].any() and not sim.z[data].any()


def test_ec_round_corrects_one_flip_per_sub_block_level2():
    rng = np.random.default_rng(0)
    sim = FrameSim(200, NoFaults())
    data = sim.alloc(49).reshape(1, 49)
    for col in range(200):
        for b in range(7):
            q = b * 7 + rng.integers(7)
            sim.x[data[0, q], col] = True
            q = b * 7 + rng.integers(7)
            sim.z[data[0, q], col] = True
    Protocol(sim, NOISE).ec_round(data, 2)
    assert not sim.x[data].any() and not sim.z[data].any()


def test_prepared_ancillas_clean_without_faults():
    sim = FrameSim(4, NoFaults())
    blocks = Protocol(sim, NOISE).prepare_zero(3, 2)
    assert blocks.shape == (3, 49)
    assert not sim.x[blocks].any() and not sim.z[blocks].any()


def test_missing_retry_budget_raises():
    class AlwaysBad(NoFaults):
        def draw(self, cls_name, n_loc, batch):
            if cls_name != "meas":
                return super().draw(cls_name, n_loc, batch)
            return (np.zeros(batch, np.int64), np.arange(batch), np.ones(batch, np.int64))

    sim = FrameSim(2, AlwaysBad())
    with pytest.raises(ProtocolError):
        Protocol(sim, NOISE, max_retries=3).prepare_zero(1, 1)


# --- single-fault exhaustives ---------------------------------------------------

def _distance_to(words: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Per-column Hamming distance from ``e`` (7, batch) to the nearest row of ``words``."""
    return np.min([(e ^ w[:, None]).sum(axis=0) for w in words.astype(bool)], axis=0)


def test_single_encoder_fault_leaves_at_most_weight_one_on_accepted_ancilla():
    def body(sim):
        return Protocol(sim, NOISE).prepare_zero(1, 1)[0]

    sim, rows, n_loc = exhaustive_single_faults(body)
    assert n_loc > 30
    # X errors matter up to even codewords (stabilisers); Z errors up to any codeword
    assert (_distance_to(EVEN, sim.x[rows]) <= 1).all()


def test_unverified_encoder_can_leave_weight_two():
    # the same enumeration without comparison shows why verification is needed
    def body(sim):
        return Protocol(sim, NOISE, policy=VerificationPolicy(1, 0)).prepare_zero(1, 1)[0]

    sim, rows, _ = exhaustive_single_faults(body)
    assert (_distance_to(EVEN, sim.x[rows]) >= 2).any()


def test_level1_ec_round_single_fault_never_fails():
    def body(sim):
        data = sim.alloc(7).reshape(1, 7)
        Protocol(sim, NOISE).ec_round(data, 1)
        return data[0]

    sim, data, n_loc = exhaustive_single_faults(body)
    assert n_loc > 500
    assert not logical_failure_batch(sim.x[data], sim.z[data], 1).any()


@pytest.mark.parametrize("mode", ["baseline", "3d", "2d", "1d"])
def test_level1_cycle_single_fault_never_fails(mode):
    cfg = ExperimentConfig(modes=(mode,), levels=(1,))
    transport, _ = make_transport(cfg, mode, 1)
    counter = CountingFaults()
    run_cycle(1, NOISE, counter, 1, transport)
    ids, codes = counter.enumeration()
    fail = run_cycle(1, NOISE, EnumeratedFaults(ids, codes), len(ids), transport)
    assert len(ids) > 1000
    assert not fail.any()


def test_weight_two_input_error_fails():
    # a weight-2 input error defeats one round, so failures are detectable
    sim = FrameSim(1, NoFaults())
    data = sim.alloc(7)
    sim.x[data[:2], 0] = True
    Protocol(sim, NOISE).ec_round(data.reshape(1, 7), 1)
    assert logical_failure_batch(sim.x[data], sim.z[data], 1)[0]


def test_transport_plan_defaults():
    t = TransportPlan()
    assert t.approach(1).shape[1] == 0
    pre, post = t.interaction(2)
    assert pre.shape[1] == 0 and post.shape[1] == 0
