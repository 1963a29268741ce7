"""Syndrome-extraction gadget, ancilla factory and the batched protocol runner.

Wiring of one extraction round on a data block ``D``:

* step 1: transversal CNOT from a verified ``|0>`` ancilla (control) onto ``D``;
* step 2: transversal CNOT from ``D`` onto a verified ``|+>`` ancilla, while the
  ``|0>`` ancilla receives a transversal Hadamard;
* step 3: transversal MeasZ of both ancillas.

The ``|+>`` ancilla's record carries the data's bit flips, the ``|0>`` ancilla's
record (after the Hadamard) its phase flips.  ``|+>`` ancillas are verified
``|0>`` ancillas followed by a transversal Hadamard, so a single verification
circuit covers both kinds.

:class:`Protocol` runs these gadgets on a :class:`~localft.pauli_frame.FrameSim`
for many blocks and trials at once; transport between sites is described by a
:class:`TransportPlan` (see :mod:`localft.routing` for the lattice versions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import GateEvent, GateKind, Schedule, ScheduleError
from .pauli_frame import FrameSim, NoiseModel
from .steane import N, correction_from_records, decode_batch, encoder_plan, encoder_schedule, transversal_events

LOGICAL_ZERO = "logical_zero"
LOGICAL_PLUS = "logical_plus"


class ProtocolError(RuntimeError):
    """Structural problem while building or running a gadget."""


# ---------------------------------------------------------------------------
# Classical decision rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationPolicy:
    num_candidates: int = 2
    rounds: int = 1
    accept_rule: str = "all-comparisons-clean"

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.rounds >= 1 and self.num_candidates < 2:
            raise ValueError("verification needs at least two candidates")
        if self.rounds >= 1 and self.num_candidates != self.rounds + 1:
            raise ValueError("each comparison round consumes one partner candidate")
        if self.accept_rule != "all-comparisons-clean":
            raise ValueError(f"unknown accept rule {self.accept_rule!r}")


@dataclass
class SyndromeHistory:
    """Per-round flip-position records for bit and phase extraction.

    Each round holds ``(bit, phase)``, both lists indexed by decoding level
    (entry ``j-1`` is the level-j record, ``-1`` meaning no flip).
    """

    rounds: list = field(default_factory=list)

    def add(self, bit: Sequence[np.ndarray], phase: Sequence[np.ndarray]) -> None:
        if self.rounds:
            ref = self.rounds[0][0]
            if len(ref) != len(bit) or any(a.shape != b.shape for a, b in zip(ref, bit)):
                raise ValueError("syndrome rounds must share one shape")
        self.rounds.append((list(bit), list(phase)))

    def __len__(self) -> int:
        return len(self.rounds)


def majority(records: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise strict-majority value over rounds; ``-1`` when none has one."""
    stack = np.stack([np.asarray(r) for r in records])
    m = stack.shape[0]
    out = np.full(stack.shape[1:], -1, dtype=stack.dtype)
    for v in np.unique(stack):
        if v < 0:
            continue
        hit = (stack == v).sum(axis=0) * 2 > m
        out[hit] = v
    return out


def syndrome_decision(history) -> object:
    """Majority decision over repeated syndrome rounds.

    Accepts a :class:`SyndromeHistory` (returns ``(bit_records, phase_records)``)
    or a plain list of per-round positions where ``None`` means no flip
    (returns the decided position or ``None``).
    """
    if isinstance(history, SyndromeHistory):
        if len(history) == 0:
            raise ValueError("need at least one round")
        levels = len(history.rounds[0][0])
        bit = [majority([r[0][j] for r in history.rounds]) for j in range(levels)]
        phase = [majority([r[1][j] for r in history.rounds]) for j in range(levels)]
        return bit, phase
    rounds = list(history)
    if not rounds:
        raise ValueError("need at least one round")
    arr = np.array([-1 if r is None else int(r) for r in rounds])
    v = int(majority(list(arr[:, None]))[0])
    return None if v < 0 else v


def verification_clean(flips: np.ndarray, level: int) -> np.ndarray:
    """Accept mask for comparison measurements ``(7**level, batch)``.

    Clean means the top-level record shows no flip and the decoded logical
    bit is 0; lower-level single flips inside sub-blocks are independent and
    left for later error correction.
    """
    if level == 0:
        return ~flips[0]
    records, logical = decode_batch(flips, level)
    return (records[-1][0] < 0) & ~logical


# ---------------------------------------------------------------------------
# Compile-only schedule fragments (sites/rows given explicitly)
# ---------------------------------------------------------------------------

def _encode_events(kind: str, level: int, qubits: Sequence[int]) -> Schedule:
    q = list(qubits)
    if len(q) != N**level:
        raise ScheduleError(f"level-{level} ancilla needs {N**level} qubits")
    if level == 0:
        return Schedule.layer([GateEvent(GateKind.PREP_X if kind == LOGICAL_PLUS else GateKind.PREP_Z, (q[0],))])
    if level == 1:
        sched = encoder_schedule(q)
    else:
        span = N ** (level - 1)
        piv, layers = encoder_plan()
        subs = [q[i * span:(i + 1) * span] for i in range(N)]
        sched = Schedule(())
        for i in range(N):
            sched = sched.merge(_encode_events(LOGICAL_ZERO, level - 1, subs[i]))
        sched = sched + Schedule.layer([e for i in piv for e in transversal_events(GateKind.HADAMARD, subs[i])])
        for layer in layers:
            sched = sched + Schedule.layer([e for c, t in layer for e in transversal_events(GateKind.CNOT, subs[c], subs[t])])
    if kind == LOGICAL_PLUS:
        sched = sched + Schedule.layer(transversal_events(GateKind.HADAMARD, q))
    return sched


def verify_ancilla(candidate: Sequence[int], partners: Sequence[Sequence[int]]) -> Schedule:
    """Comparison circuit: CNOT candidate -> each partner, then MeasZ of the partner."""
    sched = Schedule(())
    for p in partners:
        sched = sched + Schedule.layer(transversal_events(GateKind.CNOT, candidate, p))
        sched = sched + Schedule.layer(transversal_events(GateKind.MEAS_Z, p))
    return sched


def prepare_ancilla(kind: str, level: int, qubits: Sequence[int],
                    partners: Sequence[Sequence[int]] = (),
                    policy: VerificationPolicy = VerificationPolicy()) -> Schedule:
    """Encoder for ``kind`` at ``level`` on ``qubits``, plus verification.

    Partners are encoded as ``|0>`` in parallel with the candidate; the
    comparison runs before the final Hadamard of a ``|+>`` ancilla.
    """
    if kind not in (LOGICAL_ZERO, LOGICAL_PLUS):
        raise ValueError(f"unknown ancilla kind {kind!r}")
    if level == 0:
        return _encode_events(kind, 0, qubits)
    if policy.rounds and len(partners) != policy.rounds:
        raise ProtocolError(f"policy needs {policy.rounds} partner block(s), got {len(partners)}")
    sched = _encode_events(LOGICAL_ZERO, level, qubits)
    for p in partners:
        sched = sched.merge(_encode_events(LOGICAL_ZERO, level, p))
    sched = sched + verify_ancilla(qubits, partners)
    if kind == LOGICAL_PLUS:
        sched = sched + Schedule.layer(transversal_events(GateKind.HADAMARD, qubits))
    return sched


def extraction_round(data: Sequence[int], zero: Sequence[int], plus: Sequence[int]) -> Schedule:
    """The three timesteps of one bit+phase syndrome extraction."""
    return Schedule((
        tuple(transversal_events(GateKind.CNOT, zero, data)),
        tuple(transversal_events(GateKind.CNOT, data, plus) + transversal_events(GateKind.HADAMARD, zero)),
        tuple(transversal_events(GateKind.MEAS_Z, zero) + transversal_events(GateKind.MEAS_Z, plus)),
    ))


def build_ec_round(level: int, data: Sequence[int], ancillas: Sequence[tuple[Sequence[int], Sequence[int]]],
                   repeats: int = 3) -> Schedule:
    """Extraction rounds for ``repeats`` repetitions; ``ancillas[r] = (zero, plus)``.

    Ancillas must already be prepared; the classically controlled correction
    is applied outside the quantum schedule.
    """
    if len(data) != N**level:
        raise ScheduleError(f"data block has {len(data)} qubits, expected {N**level}")
    if len(ancillas) < repeats:
        raise ProtocolError(f"{repeats} repeats need {repeats} ancilla pairs, got {len(ancillas)}")
    sched = Schedule(())
    for r in range(repeats):
        zero, plus = ancillas[r]
        if len(zero) != len(data) or len(plus) != len(data):
            raise ProtocolError("ancilla block size does not match the data block")
        sched = sched + extraction_round(data, zero, plus)
    return sched


# ---------------------------------------------------------------------------
# Transport description
# ---------------------------------------------------------------------------

def _empty_motion() -> np.ndarray:
    return np.zeros((1, 0), bool)


class TransportPlan:
    """Motion patterns used by :class:`Protocol`; the default moves nothing.

    A motion pattern is a boolean array ``(rows, steps)``: entry ``[q, t]`` is
    true when tracked qubit ``q`` takes part in a swap at step ``t``.  A single
    row is broadcast to every tracked qubit.
    """

    name = "baseline"
    stride: Optional[int] = None
    interaction_stops = False

    def approach(self, level: int) -> np.ndarray:
        """Ancilla motion for error correction of a level-``level`` data block."""
        return _empty_motion()

    def support(self, level: int) -> np.ndarray:
        """Ancilla motion for level-``level`` correction during an en-route stop."""
        return self.approach(level)

    def interaction(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Data motion ``(before, after)`` the transversal CNOT of two level-``level`` blocks.

        Rows ``0 .. 7**level - 1`` belong to the first block and the rest to
        the second.
        """
        return _empty_motion(), _empty_motion()

    def interaction_interval(self, level: int) -> int:
        """Ancilla travel distance multiplier while blocks are interleaved."""
        return 1


# ---------------------------------------------------------------------------
# Batched protocol runner
# ---------------------------------------------------------------------------

class Protocol:
    """Executes verified ancilla preparation and EC rounds on a frame simulator.

    Blocks are row arrays of shape ``(n_blocks, 7**level)``; every method acts
    on all blocks and all trial columns in parallel.
    """

    def __init__(self, sim: FrameSim, noise: NoiseModel, transport: Optional[TransportPlan] = None,
                 repeats: int = 3, policy: VerificationPolicy = VerificationPolicy(),
                 max_retries: int = 200):
        if repeats < 1:
            raise ValueError("repeats must be >= 1")
        self.sim = sim
        self.noise = noise
        self.transport = transport or TransportPlan()
        self.repeats = repeats
        self.policy = policy
        self.max_retries = max_retries

    def _child(self, sim: FrameSim) -> "Protocol":
        return Protocol(sim, self.noise, self.transport, self.repeats, self.policy, self.max_retries)

    # -- ancilla factory -------------------------------------------------

    def prepare_zero(self, n: int, level: int, waiting: np.ndarray = np.zeros(0, np.int64),
                     _depth: int = 0) -> np.ndarray:
        """``n`` verified level-``level`` ``|0>`` blocks, accepted in every column.

        Rejected (block, column) pairs are re-prepared in a separate simulator
        over just those columns; the retry duration is charged as idle noise
        to ``waiting`` rows in the affected columns.
        """
        sim = self.sim
        if level == 0:
            rows = sim.alloc(n)
            sim.run(Schedule.layer(GateEvent(GateKind.PREP_Z, (int(r),)) for r in rows))
            return rows.reshape(n, 1)
        pol = self.policy
        c = pol.rounds + 1 if pol.rounds else 1
        t0 = sim.steps_run
        blocks = self._encode_zero(n * c, level)
        main, partners = blocks[:n], blocks[n:]
        ok = np.ones((n, sim.batch), bool)
        for r in range(pol.rounds):
            part = partners[r * n:(r + 1) * n]
            cn = [GateEvent(GateKind.CNOT, (int(a), int(b))) for a, b in zip(main.ravel(), part.ravel())]
            sim.run(Schedule.layer(cn), idle_rows=np.concatenate([main.ravel(), part.ravel()]))
            meas = [GateEvent(GateKind.MEAS_Z, (int(b),)) for b in part.ravel()]
            flips = sim.run(Schedule.layer(meas), idle_rows=main.ravel())
            flips = flips.reshape(n, N**level, sim.batch)
            for i in range(n):
                ok[i] &= verification_clean(flips[i], level)
        if len(partners):
            sim.free(partners.ravel())
        bad_blk, bad_col = np.nonzero(~ok)
        if len(bad_blk):
            if _depth >= self.max_retries:
                raise ProtocolError("ancilla verification keeps failing; noise too strong for the retry budget")
            elapsed = sim.steps_run - t0
            sub = FrameSim(len(bad_blk), sim.faults.retry(), capacity=max(64, 2 * c * N**level))
            child = self._child(sub)
            rows_sub = child.prepare_zero(1, level, _depth=_depth + 1)[0]
            tgt = main[bad_blk].T  # (size, R)
            sim.x[tgt, bad_col[None, :]] = sub.x[rows_sub]
            sim.z[tgt, bad_col[None, :]] = sub.z[rows_sub]
            if len(waiting):
                cols = np.unique(bad_col)
                sim.lumped_idle(waiting, cols, elapsed, self.noise.p_idle)
        return main

    def prepare_plus(self, n: int, level: int, waiting: np.ndarray = np.zeros(0, np.int64)) -> np.ndarray:
        blocks = self.prepare_zero(n, level, waiting)
        self._transversal_1q(GateKind.HADAMARD, blocks.ravel())
        return blocks

    def _transversal_1q(self, kind: GateKind, rows: np.ndarray, idle: Optional[np.ndarray] = None) -> None:
        self.sim.run(Schedule.layer(GateEvent(kind, (int(r),)) for r in rows), idle_rows=idle)

    def _encode_zero(self, n: int, level: int) -> np.ndarray:
        sim = self.sim
        piv, layers = encoder_plan()
        if level == 1:
            rows = sim.alloc(n * N).reshape(n, N)
            steps = [tuple(GateEvent(GateKind.PREP_X if i in piv else GateKind.PREP_Z, (int(rows[b, i]),))
                           for b in range(n) for i in range(N))]
            for layer in layers:
                steps.append(tuple(GateEvent(GateKind.CNOT, (int(rows[b, c]), int(rows[b, t])))
                                   for b in range(n) for c, t in layer))
            sim.run(Schedule(tuple(steps)), idle_rows=rows.ravel())
            return rows
        span = N ** (level - 1)
        subs = self.prepare_zero(n * N, level - 1).reshape(n, N, span)
        live = subs.ravel()
        self._transversal_1q(GateKind.HADAMARD, subs[:, list(piv)].ravel(), idle=live)
        for layer in layers:
            ev = [GateEvent(GateKind.CNOT, (int(a), int(b)))
                  for c, t in layer for a, b in zip(subs[:, c].ravel(), subs[:, t].ravel())]
            sim.run(Schedule.layer(ev), idle_rows=live)
        # one round of lower-level correction on every sub-block before comparison
        self.ec_round(subs.reshape(n * N, span), level - 1, motion=self.transport.support(level - 1))
        return subs.reshape(n, N * span)

    # -- motion ----------------------------------------------------------

    def move(self, rows: np.ndarray, pattern: np.ndarray, waiting: np.ndarray,
             stops: Sequence[tuple[np.ndarray, int]] = (), stop_levels: Sequence[int] = ()) -> np.ndarray:
        """Carry tracked rows through a swap pattern; returns their new row ids.

        Each tracked qubit owns a scratch row standing in for the vacant or
        auxiliary sites it swaps with.  ``stops`` lists ``(blocks, level)``
        groups that receive error correction at every level in
        ``stop_levels`` after each ``stride`` steps containing motion.
        """
        pattern = np.asarray(pattern, bool)
        flat = rows.ravel().copy()
        if pattern.shape[1] == 0:
            return rows
        if pattern.shape[0] == 1:
            pattern = np.broadcast_to(pattern, (len(flat), pattern.shape[1]))
        elif pattern.shape[0] != len(flat):
            raise ProtocolError(f"motion pattern has {pattern.shape[0]} rows for {len(flat)} qubits")
        sim = self.sim
        scratch = sim.alloc(len(flat))
        stride = self.transport.stride
        since = 0
        waiting = np.asarray(waiting, np.int64)
        for t in range(pattern.shape[1]):
            act = np.flatnonzero(pattern[:, t])
            if len(act):
                ev = [GateEvent(GateKind.SWAP, (int(flat[i]), int(scratch[i]))) for i in act]
                sim.run(Schedule.layer(ev), idle_rows=np.concatenate([flat, waiting]))
                flat[act], scratch[act] = scratch[act], flat[act].copy()
                since += 1
            else:
                sim.run(Schedule(((),)), idle_rows=np.concatenate([flat, waiting]))
            last = t == pattern.shape[1] - 1
            if stride and stop_levels and since >= stride and not last:
                since = 0
                cur = flat.reshape(rows.shape)
                self._stop(cur, stops, stop_levels, waiting)
        sim.free(scratch)
        return flat.reshape(rows.shape)

    def _stop(self, moving: np.ndarray, others: Sequence[tuple[np.ndarray, int]],
              levels: Sequence[int], waiting: np.ndarray) -> None:
        groups = [moving] + [b for b, _ in others]
        for lvl in sorted(levels):
            size = N**lvl
            blocks = np.concatenate([g.reshape(-1, size) for g in groups])
            self.ec_round(blocks, lvl, motion=self.transport.support(lvl))

    # -- error correction ------------------------------------------------

    def ec_round(self, data: np.ndarray, level: int, motion: Optional[np.ndarray] = None,
                 waiting: np.ndarray = np.zeros(0, np.int64)) -> SyndromeHistory:
        """Full correction of every block in ``data`` (``(n, 7**level)`` rows)."""
        if level == 0:
            return SyndromeHistory()
        sim = self.sim
        data = np.asarray(data).reshape(-1, N**level)
        n, size = data.shape
        if motion is None:
            motion = self.transport.approach(level)
        history = SyndromeHistory()
        stop_levels = list(range(1, level))
        for _ in range(self.repeats):
            anc = self.prepare_zero(2 * n, level, waiting=np.concatenate([data.ravel(), waiting]))
            zero, plus = anc[:n], anc[n:]
            self._transversal_1q(GateKind.HADAMARD, plus.ravel())
            both = np.concatenate([zero, plus])
            both = self.move(both, motion, waiting=np.concatenate([data.ravel(), waiting]),
                             stops=[(data, level)], stop_levels=stop_levels)
            zero, plus = both[:n], both[n:]
            live = np.concatenate([data.ravel(), waiting])
            steps = []
            for b in range(n):
                steps.append(extraction_round(data[b], zero[b], plus[b]))
            sched = steps[0]
            for s in steps[1:]:
                sched = sched.merge(s)
            flips = sim.run(sched, idle_rows=np.concatenate([live, zero.ravel(), plus.ravel()]))
            # measurement order per block: zero block then plus block
            flips = flips.reshape(n, 2, size, sim.batch)
            phase_rec, _ = decode_batch(flips[:, 0].transpose(1, 0, 2).reshape(size, n * sim.batch), level)
            bit_rec, _ = decode_batch(flips[:, 1].transpose(1, 0, 2).reshape(size, n * sim.batch), level)
            history.add(bit_rec, phase_rec)
            sim.free(both.ravel())
        bit, phase = syndrome_decision(history)
        cx = correction_from_records(bit, level).reshape(size, n, sim.batch)
        cz = correction_from_records(phase, level).reshape(size, n, sim.batch)
        sim.x[data.T] ^= cx
        sim.z[data.T] ^= cz
        return history
