"""Pauli-frame propagation and stochastic fault injection.

Two execution paths share the same conjugation rules:

* :func:`run_circuit` walks a :class:`~localft.circuit.Schedule` event by event
  for a single trial, calling :func:`propagate` and :func:`inject_fault`.
* :class:`FrameSim` runs many trials at once on ``(rows, batch)`` boolean
  arrays; it is what the protocol layer and the Monte Carlo harness drive.

Pauli codes: one-qubit ``0=I, 1=X, 2=Y, 3=Z``; a two-qubit code ``c`` in
``1..15`` puts ``c // 4`` on the first operand and ``c % 4`` on the second.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .circuit import GateEvent, GateKind, Schedule, ScheduleError

PAULI_LABELS = "IXYZ"
# x and z bit of each one-qubit Pauli code
_X_OF = np.array([False, True, True, False])
_Z_OF = np.array([False, False, True, True])

FAULT_CLASSES = ("1q", "2q", "prep", "meas", "idle")
CODES_PER_CLASS = {"1q": 3, "2q": 15, "prep": 1, "meas": 1, "idle": 3}


def fault_class(kind: GateKind) -> str:
    if kind in (GateKind.HADAMARD, GateKind.PHASE):
        return "1q"
    if kind in (GateKind.CNOT, GateKind.SWAP):
        return "2q"
    if kind.is_prep:
        return "prep"
    if kind.is_meas:
        return "meas"
    return "idle"


class PauliMask:
    """X/Z error pattern on ``n`` qubits; global phase is not tracked."""

    __slots__ = ("x", "z")

    def __init__(self, x, z=None):
        x = np.array(x, dtype=bool).reshape(-1)
        z = np.zeros_like(x) if z is None else np.array(z, dtype=bool).reshape(-1)
        if x.shape != z.shape:
            raise ValueError("x and z bit-vectors must have equal length")
        self.x = x
        self.z = z

    @classmethod
    def zeros(cls, n: int) -> "PauliMask":
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def from_string(cls, s: str) -> "PauliMask":
        """``"IXYZ"`` -> mask on 4 qubits."""
        idx = np.array([PAULI_LABELS.index(c) for c in s.upper()], dtype=int)
        return cls(_X_OF[idx], _Z_OF[idx])

    @classmethod
    def single(cls, n: int, qubit: int, pauli: str) -> "PauliMask":
        m = cls.zeros(n)
        code = PAULI_LABELS.index(pauli.upper())
        m.x[qubit] = _X_OF[code]
        m.z[qubit] = _Z_OF[code]
        return m

    @property
    def n(self) -> int:
        return len(self.x)

    def __len__(self) -> int:
        return self.n

    def copy(self) -> "PauliMask":
        return PauliMask(self.x.copy(), self.z.copy())

    def __xor__(self, other: "PauliMask") -> "PauliMask":
        if other.n != self.n:
            raise ValueError("mask length mismatch")
        return PauliMask(self.x ^ other.x, self.z ^ other.z)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliMask):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.z.tobytes()))

    def is_identity(self) -> bool:
        return not (self.x.any() or self.z.any())

    def weight(self, qubits: Optional[Sequence[int]] = None) -> int:
        support = self.x | self.z
        if qubits is not None:
            support = support[np.asarray(qubits, dtype=int)]
        return int(support.sum())

    def restrict(self, qubits: Sequence[int]) -> "PauliMask":
        q = np.asarray(qubits, dtype=int)
        return PauliMask(self.x[q], self.z[q])

    def label(self) -> str:
        codes = np.where(self.x & self.z, 2, np.where(self.x, 1, np.where(self.z, 3, 0)))
        return "".join(PAULI_LABELS[c] for c in codes)

    __str__ = label

    def __repr__(self) -> str:
        return f"PauliMask({self.label()!r})"


def apply_gate(kind: GateKind, operands: np.ndarray, x: np.ndarray, z: np.ndarray) -> None:
    """Conjugate the frame ``(x, z)`` in place by one or more gates of ``kind``.

    ``operands`` has shape ``(k,)`` for one-qubit gates or ``(k, 2)`` for
    two-qubit gates; the ``k`` gates must act on disjoint qubits.  ``x`` and
    ``z`` may be 1-D (single trial) or 2-D ``(rows, batch)``.
    """
    if kind is GateKind.CNOT:
        c, t = operands[:, 0], operands[:, 1]
        x[t] ^= x[c]
        z[c] ^= z[t]
    elif kind is GateKind.SWAP:
        a, b = operands[:, 0], operands[:, 1]
        xa, za = x[a].copy(), z[a].copy()
        x[a], z[a] = x[b], z[b]
        x[b], z[b] = xa, za
    elif kind is GateKind.HADAMARD:
        xq = x[operands].copy()
        x[operands] = z[operands]
        z[operands] = xq
    elif kind is GateKind.PHASE:
        z[operands] ^= x[operands]
    elif kind.is_prep:
        x[operands] = False
        z[operands] = False
    # measurements and idles leave the frame unchanged


def propagate(gate: GateEvent, error: PauliMask) -> PauliMask:
    """Return the error pattern after conjugation by ``gate``."""
    if max(gate.operands) >= error.n:
        raise ScheduleError(f"operand out of range for {error.n}-qubit mask: {gate.token()}")
    out = error.copy()
    ops = np.array([gate.operands] if gate.kind.arity == 2 else list(gate.operands), dtype=int)
    apply_gate(gate.kind, ops, out.x, out.z)
    return out


@dataclass(frozen=True)
class NoiseModel:
    p_gate1: float = 0.0
    p_gate2: float = 0.0
    p_prep: float = 0.0
    p_meas: float = 0.0
    p_idle: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_gate1", "p_gate2", "p_prep", "p_meas", "p_idle"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def uniform(cls, p: float, idle_ratio: float = 0.1, prep_ratio: float = 1.0,
                meas_ratio: float = 1.0) -> "NoiseModel":
        return cls(p, p, min(1.0, p * prep_ratio), min(1.0, p * meas_ratio), min(1.0, p * idle_ratio))

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    def prob(self, cls_name: str) -> float:
        return {
            "1q": self.p_gate1,
            "2q": self.p_gate2,
            "prep": self.p_prep,
            "meas": self.p_meas,
            "idle": self.p_idle,
        }[cls_name]

    def is_noiseless(self) -> bool:
        return all(self.prob(c) == 0 for c in FAULT_CLASSES)


@dataclass(frozen=True)
class FaultRecord:
    """A fault at ``(time, index)``; ``code`` is a Pauli code, or 1 for a prep/measurement flip."""

    time: int
    index: int
    event: GateEvent
    code: int

    @property
    def pauli(self) -> str:
        cls_name = fault_class(self.event.kind)
        if cls_name == "2q":
            return PAULI_LABELS[self.code // 4] + PAULI_LABELS[self.code % 4]
        if cls_name in ("1q", "idle"):
            return PAULI_LABELS[self.code]
        return "flip"


def inject_fault(location: tuple[int, int, GateEvent], noise: NoiseModel,
                 rng: np.random.Generator) -> Optional[FaultRecord]:
    """Draw the fault (if any) at one circuit location."""
    time, index, event = location
    cls_name = fault_class(event.kind)
    p = noise.prob(cls_name)
    if p <= 0.0 or rng.random() >= p:
        return None
    ncodes = CODES_PER_CLASS[cls_name]
    code = 1 if ncodes == 1 else int(rng.integers(1, ncodes + 1))
    return FaultRecord(time, index, event, code)


def apply_fault(record: FaultRecord, error: PauliMask) -> PauliMask:
    """Apply a Pauli fault to ``error``; measurement flips leave the mask alone."""
    out = error.copy()
    kind = record.event.kind
    ops = record.event.operands
    cls_name = fault_class(kind)
    if cls_name == "2q":
        for q, c in zip(ops, (record.code // 4, record.code % 4)):
            out.x[q] ^= _X_OF[c]
            out.z[q] ^= _Z_OF[c]
    elif cls_name in ("1q", "idle"):
        out.x[ops[0]] ^= _X_OF[record.code]
        out.z[ops[0]] ^= _Z_OF[record.code]
    elif kind is GateKind.PREP_Z:
        out.x[ops[0]] ^= True
    elif kind is GateKind.PREP_X:
        out.z[ops[0]] ^= True
    return out


def run_circuit(schedule: Schedule, noise: NoiseModel, rng: np.random.Generator,
                initial: Optional[PauliMask] = None, n: Optional[int] = None,
                forced: Sequence[FaultRecord] = ()):
    """Single-trial reference executor.

    Returns ``(final_mask, meas_flips, faults)`` where ``meas_flips`` maps each
    measurement event to its flip bit.  ``forced`` faults are applied in
    addition to (after) any sampled ones at the same location.
    """
    if n is None:
        n = initial.n if initial is not None else schedule.max_operand() + 1
    mask = PauliMask.zeros(n) if initial is None else initial.copy()
    if schedule.max_operand() >= mask.n:
        raise ScheduleError("schedule addresses qubits beyond the mask")
    forced_at: dict[tuple[int, int], list[FaultRecord]] = {}
    for f in forced:
        forced_at.setdefault((f.time, f.index), []).append(f)
    flips: dict[GateEvent, int] = {}
    faults: list[FaultRecord] = []
    for t, step in enumerate(schedule.steps):
        busy = set()
        for i, event in enumerate(step):
            busy.update(event.operands)
            mask = propagate(event, mask)
            if event.kind.is_meas:
                bit = mask.x[event.operands[0]] if event.kind is GateKind.MEAS_Z else mask.z[event.operands[0]]
                flips[event] = int(bit)
            recs = [inject_fault((t, i, event), noise, rng)] + forced_at.get((t, i), [])
            for rec in recs:
                if rec is None:
                    continue
                faults.append(rec)
                if event.kind.is_meas:
                    flips[event] ^= 1
                else:
                    mask = apply_fault(rec, mask)
        for j, q in enumerate(q for q in range(mask.n) if q not in busy):
            idle = GateEvent(GateKind.IDLE, (q,), t)
            recs = [inject_fault((t, len(step) + j, idle), noise, rng)]
            recs += forced_at.get((t, len(step) + j), [])
            for rec in recs:
                if rec is not None:
                    faults.append(rec)
                    mask = apply_fault(rec, mask)
    return mask, flips, faults


# ---------------------------------------------------------------------------
# Batched execution
# ---------------------------------------------------------------------------

def bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(n)`` of independent Bernoulli(p) successes."""
    if n <= 0 or p <= 0.0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n, dtype=np.int64)
    if p > 0.05:
        return np.flatnonzero(rng.random(n) < p)
    out = []
    pos = -1
    while True:
        m = max(16, int((n - pos) * p * 1.2) + 16)
        gaps = rng.geometric(p, size=m)
        idx = pos + np.cumsum(gaps)
        keep = idx[idx < n]
        out.append(keep)
        if len(keep) < m:
            break
        pos = int(idx[-1])
    return np.concatenate(out)


class FaultSource:
    """Supplies faults to :class:`FrameSim`, one draw per (step, fault class)."""

    def draw(self, cls_name: str, n_loc: int, batch: int):
        """Return ``(loc_index, columns, codes)`` arrays for ``n_loc`` locations."""
        raise NotImplementedError

    def draw_lumped(self, p_step: float, steps: int, n_loc: int, batch: int):
        """Faults from ``steps`` consecutive idle steps, collapsed to one location each."""
        return _EMPTY

    def retry(self) -> "FaultSource":
        """Source to use for re-running a rejected sub-circuit on a subset of columns."""
        return self


_EMPTY = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))


class NoFaults(FaultSource):
    def draw(self, cls_name, n_loc, batch):
        return _EMPTY


class RandomFaults(FaultSource):
    """Independent stochastic faults per :class:`NoiseModel`."""

    def __init__(self, noise: NoiseModel, rng: np.random.Generator):
        self.noise = noise
        self.rng = rng

    def _sample(self, p: float, ncodes: int, n_loc: int, batch: int):
        flat = bernoulli_positions(self.rng, n_loc * batch, p)
        if len(flat) == 0:
            return _EMPTY
        loc, col = np.divmod(flat, batch)
        codes = np.ones(len(flat), np.int64) if ncodes == 1 else self.rng.integers(1, ncodes + 1, size=len(flat))
        return loc, col, codes

    def draw(self, cls_name, n_loc, batch):
        return self._sample(self.noise.prob(cls_name), CODES_PER_CLASS[cls_name], n_loc, batch)

    def draw_lumped(self, p_step, steps, n_loc, batch):
        if steps <= 0 or p_step <= 0:
            return _EMPTY
        # composition of `steps` uniform-Pauli channels of strength p_step
        lam = max(0.0, 1.0 - 4.0 * p_step / 3.0)
        p_eff = 0.75 * (1.0 - lam**steps)
        return self._sample(p_eff, 3, n_loc, batch)


class CountingFaults(FaultSource):
    """Injects nothing; records the fault class of every location in order."""

    def __init__(self, classes: Sequence[str] = FAULT_CLASSES):
        self.classes = set(classes)
        self.locations: list[str] = []

    def draw(self, cls_name, n_loc, batch):
        if cls_name in self.classes:
            self.locations.extend([cls_name] * n_loc)
        return _EMPTY

    def retry(self):
        return NoFaults()

    def enumeration(self):
        """All single faults: ``(location_ids, codes)`` with one entry per column."""
        ids, codes = [], []
        for i, c in enumerate(self.locations):
            k = CODES_PER_CLASS[c]
            ids.extend([i] * k)
            codes.extend(range(1, k + 1))
        return np.array(ids, np.int64), np.array(codes, np.int64)


class EnumeratedFaults(FaultSource):
    """Column ``j`` receives exactly the fault ``(loc_ids[j], codes[j])``.

    Location ids are counted in the same order as :class:`CountingFaults`
    over the same class set, so a counting pass followed by an enumerated
    pass visits every single-fault configuration once.
    """

    def __init__(self, loc_ids: np.ndarray, codes: np.ndarray, classes: Sequence[str] = FAULT_CLASSES):
        order = np.argsort(loc_ids, kind="stable")
        self.loc_ids = np.asarray(loc_ids)[order]
        self.cols = order
        self.codes = np.asarray(codes)[order]
        self.classes = set(classes)
        self.counter = 0

    def draw(self, cls_name, n_loc, batch):
        if cls_name not in self.classes:
            return _EMPTY
        lo, hi = self.counter, self.counter + n_loc
        self.counter = hi
        a, b = np.searchsorted(self.loc_ids, [lo, hi])
        if a == b:
            return _EMPTY
        return self.loc_ids[a:b] - lo, self.cols[a:b], self.codes[a:b]

    def retry(self):
        return NoFaults()


class FrameSim:
    """Batched Pauli frame over ``batch`` independent trials.

    Rows are allocated on demand with :meth:`alloc`; ``x[r, j]`` is the
    bit-flip component of row ``r`` in trial ``j``.
    """

    def __init__(self, batch: int, faults: Optional[FaultSource] = None, capacity: int = 64):
        self.batch = int(batch)
        self.faults = faults if faults is not None else NoFaults()
        self.x = np.zeros((capacity, self.batch), bool)
        self.z = np.zeros((capacity, self.batch), bool)
        self._free: list[int] = list(range(capacity - 1, -1, -1))
        self.steps_run = 0

    @property
    def capacity(self) -> int:
        return self.x.shape[0]

    def alloc(self, k: int) -> np.ndarray:
        while len(self._free) < k:
            old = self.capacity
            self.x = np.vstack([self.x, np.zeros_like(self.x)])
            self.z = np.vstack([self.z, np.zeros_like(self.z)])
            self._free = list(range(2 * old - 1, old - 1, -1)) + self._free
        rows = np.array([self._free.pop() for _ in range(k)], dtype=np.int64)
        self.x[rows] = False
        self.z[rows] = False
        return rows

    def free(self, rows) -> None:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        self.x[rows] = False
        self.z[rows] = False
        self._free.extend(int(r) for r in rows[::-1])

    def run(self, schedule: Schedule, idle_rows=None) -> np.ndarray:
        """Execute ``schedule``; returns measurement flips ``(n_meas, batch)`` in event order.

        ``idle_rows`` lists the information-bearing rows that collect idle
        noise on every step in which no event touches them.
        """
        out: list[np.ndarray] = []
        idle_rows = None if idle_rows is None else np.unique(np.asarray(idle_rows, dtype=np.int64))
        for step in schedule.steps:
            self._step(step, idle_rows, out)
        if not out:
            return np.zeros((0, self.batch), bool)
        return np.vstack(out)

    def _step(self, step: Sequence[GateEvent], idle_rows, out: list) -> None:
        self.steps_run += 1
        groups: dict[GateKind, list] = {}
        for e in step:
            groups.setdefault(e.kind, []).append(e.operands if e.kind.arity == 2 else e.operands[0])
        arrays = {k: np.array(v, dtype=np.int64) for k, v in groups.items()}
        for kind, ops in arrays.items():
            apply_gate(kind, ops, self.x, self.z)

        # measurement readout, in event order
        meas_rows, meas_z = [], []
        for e in step:
            if e.kind.is_meas:
                meas_rows.append(e.operands[0])
                meas_z.append(e.kind is GateKind.MEAS_Z)
        if meas_rows:
            mr = np.array(meas_rows, dtype=np.int64)
            mz = np.array(meas_z, dtype=bool)
            res = np.where(mz[:, None], self.x[mr], self.z[mr])
        else:
            res = None

        # faults, one class at a time in fixed order
        loc_rows: dict[str, list] = {c: [] for c in FAULT_CLASSES}
        prep_is_z: list[bool] = []
        for e in step:
            c = fault_class(e.kind)
            if c == "meas":
                continue
            loc_rows[c].append(e.operands)
            if c == "prep":
                prep_is_z.append(e.kind is GateKind.PREP_Z)
        if idle_rows is not None and len(idle_rows):
            busy = np.fromiter((q for e in step for q in e.operands), dtype=np.int64)
            idle = idle_rows[~np.isin(idle_rows, busy)] if len(busy) else idle_rows
            loc_rows["idle"].extend((int(q),) for q in idle)
        for c in FAULT_CLASSES:
            if c == "meas":
                n_loc = len(meas_rows)
            else:
                n_loc = len(loc_rows[c])
            if n_loc == 0:
                continue
            loc, col, code = self.faults.draw(c, n_loc, self.batch)
            if len(loc) == 0:
                continue
            if c == "meas":
                res[loc, col] ^= True
                continue
            rows = np.array(loc_rows[c], dtype=np.int64)
            if c == "2q":
                a = rows[loc, 0]
                b = rows[loc, 1]
                ca, cb = code // 4, code % 4
                self.x[a, col] ^= _X_OF[ca]
                self.z[a, col] ^= _Z_OF[ca]
                self.x[b, col] ^= _X_OF[cb]
                self.z[b, col] ^= _Z_OF[cb]
            elif c == "prep":
                r = rows[loc, 0]
                isz = np.array(prep_is_z, bool)[loc]
                self.x[r[isz], col[isz]] ^= True
                self.z[r[~isz], col[~isz]] ^= True
            else:
                r = rows[loc, 0]
                self.x[r, col] ^= _X_OF[code]
                self.z[r, col] ^= _Z_OF[code]
        if res is not None:
            out.append(res)

    def lumped_idle(self, rows, cols, steps: int, p_idle: float) -> None:
        """Charge ``steps`` idle timesteps to ``rows`` in trial columns ``cols`` only."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) == 0 or len(cols) == 0 or steps <= 0:
            return
        loc, sub, code = self.faults.draw_lumped(p_idle, steps, len(rows), len(cols))
        if len(loc):
            r, c = rows[loc], cols[sub]
            self.x[r, c] ^= _X_OF[code]
            self.z[r, c] ^= _Z_OF[code]

    def import_rows(self, other: "FrameSim", rows_other, rows_self, cols=None) -> None:
        """Copy frame rows from another simulator (optionally into a column subset)."""
        ro = np.asarray(rows_other, dtype=np.int64)
        rs = np.asarray(rows_self, dtype=np.int64)
        if cols is None:
            self.x[rs] = other.x[ro]
            self.z[rs] = other.z[ro]
        else:
            cols = np.asarray(cols, dtype=np.int64)
            self.x[np.ix_(rs, cols)] = other.x[ro]
            self.z[np.ix_(rs, cols)] = other.z[ro]

    def mask(self, rows, col: int = 0) -> PauliMask:
        rows = np.asarray(rows, dtype=np.int64)
        return PauliMask(self.x[rows, col], self.z[rows, col])

    def set_mask(self, rows, mask: PauliMask, cols=None) -> None:
        rows = np.asarray(rows, dtype=np.int64)
        if cols is None:
            self.x[rows] = mask.x[:, None]
            self.z[rows] = mask.z[:, None]
        else:
            cols = np.asarray(cols, dtype=np.int64)
            self.x[np.ix_(rows, cols)] = mask.x[:, None]
            self.z[np.ix_(rows, cols)] = mask.z[:, None]
