"""The seven-qubit code, its concatenation, and classical Hamming decoding.

The parity-check matrix is derived from the sixteen codewords of the encoded
``|0>`` and ``|1>`` states rather than copied from a textbook convention, so
bit positions match the codeword listing below.  Physical index of a qubit in
a level-``L`` block is ``sum(path[j] * 7**(L-1-j))``: the first path entry
selects the top-level sub-block, so level-1 blocks are contiguous runs of 7.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import GateEvent, GateKind, Schedule, ScheduleError
from .pauli_frame import PauliMask

N = 7

LOGICAL_ZERO_WORDS = (
    "0000000", "1111000", "1100110", "1010101",
    "0011110", "0101101", "0110011", "1001011",
)
LOGICAL_ONE_WORDS = (
    "1111111", "0000111", "0011001", "0101010",
    "1100001", "1010010", "1001100", "0110100",
)
CODEWORDS = LOGICAL_ZERO_WORDS + LOGICAL_ONE_WORDS


class CodeStructureError(ValueError):
    """The supplied codeword list does not define a [7,4] Hamming code."""


def bits(word: str) -> np.ndarray:
    return np.array([c == "1" for c in word], dtype=bool)


def word(b) -> str:
    return "".join("1" if v else "0" for v in np.asarray(b, dtype=bool))


def gf2_rref(mat) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(2); zero rows are dropped."""
    m = np.array(mat, dtype=bool).copy()
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(m[r:, c])
        if len(hits) == 0:
            continue
        p = r + hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    return m[:r], pivots


def gf2_rank(mat) -> int:
    return len(gf2_rref(mat)[1])


def gf2_nullspace(mat) -> np.ndarray:
    """Basis (rows) of ``{v : mat @ v = 0}`` over GF(2), in canonical RREF."""
    m = np.array(mat, dtype=bool)
    n = m.shape[1]
    r, piv = gf2_rref(m)
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = np.zeros(n, bool)
        v[f] = True
        for i, p in enumerate(piv):
            v[p] = r[i, f]
        basis.append(v)
    if not basis:
        return np.zeros((0, n), bool)
    return gf2_rref(np.array(basis))[0]


@dataclass(frozen=True)
class CodeParams:
    parity_checks: np.ndarray          # 3 x 7 over GF(2)
    logical_parity_vector: np.ndarray  # all-ones
    n: int = N

    def syndrome(self, b) -> int:
        s = (self.parity_checks.astype(np.uint8) @ np.asarray(b, np.uint8)) & 1
        return int(s[0] | (s[1] << 1) | (s[2] << 2))


def derive_parity_checks(codewords: Sequence[str] = CODEWORDS) -> CodeParams:
    """Parity checks whose kernel is exactly the span of ``codewords``."""
    words = np.array([bits(w) for w in codewords])
    if words.ndim != 2 or words.shape[1] != N:
        raise CodeStructureError("codewords must be 7-bit strings")
    k = gf2_rank(words)
    if k != 4:
        raise CodeStructureError(f"codewords span dimension {k}, expected 4")
    h = gf2_nullspace(words)
    return CodeParams(parity_checks=h, logical_parity_vector=np.ones(N, bool))


CODE = derive_parity_checks()
H = CODE.parity_checks
_H8 = H.astype(np.uint8)
# syndrome value -> flip position (-1 for the zero syndrome)
SYNDROME_TABLE = np.full(8, -1, dtype=np.int8)
for _q in range(N):
    _s = int(H[0, _q]) | (int(H[1, _q]) << 1) | (int(H[2, _q]) << 2)
    SYNDROME_TABLE[_s] = _q
if (SYNDROME_TABLE[1:] < 0).any():
    raise CodeStructureError("single-bit syndromes are not distinct")


def hamming_decode(b) -> tuple[np.ndarray, int | None]:
    """Correct at most one bit flip; returns ``(codeword, flipped_position)``."""
    b = np.array(b, dtype=bool).reshape(N)
    pos = int(SYNDROME_TABLE[CODE.syndrome(b)])
    if pos < 0:
        return b, None
    b[pos] ^= True
    return b, pos


def logical_parity(b) -> int:
    """Logical value of a measured block: parity of the Hamming-corrected word."""
    return int(hamming_decode(b)[0].sum() & 1)


def concat_decode(b, level: int) -> int:
    """Hard-decision recursive decoding of a level-``level`` measurement record."""
    b = np.asarray(b, dtype=bool).reshape(-1)
    if len(b) != N**level:
        raise ValueError(f"expected {N**level} bits for level {level}, got {len(b)}")
    if level == 0:
        return int(b[0])
    sub = [concat_decode(b[i * N ** (level - 1):(i + 1) * N ** (level - 1)], level - 1) for i in range(N)]
    return logical_parity(sub)


# ---------------------------------------------------------------------------
# Vectorised decoding over trial batches
# ---------------------------------------------------------------------------

def decode_batch(b: np.ndarray, level: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Decode ``(7**level, batch)`` measurement flips level by level.

    Returns ``(records, logical)``: ``records[j-1]`` is an int8 array of shape
    ``(7**(level-j), batch)`` holding the flip position found in each level-j
    block (-1 for none), and ``logical`` the decoded top-level bit.
    """
    cur = np.asarray(b, dtype=bool)
    if cur.shape[0] != N**level:
        raise ValueError(f"expected {N**level} rows for level {level}, got {cur.shape[0]}")
    records = []
    for _ in range(level):
        nb = cur.shape[0] // N
        blk = cur.reshape(nb, N, -1).astype(np.uint8)
        syn = np.einsum("rq,nqb->nrb", _H8, blk) & 1
        sval = syn[:, 0] | (syn[:, 1] << 1) | (syn[:, 2] << 2)
        pos = SYNDROME_TABLE[sval]
        records.append(pos)
        cur = ((blk.sum(axis=1) + (pos >= 0)) & 1).astype(bool)
    return records, cur[0]


def correction_from_records(records: Sequence[np.ndarray], level: int) -> np.ndarray:
    """Physical flip pattern ``(7**level, batch)`` implementing decoded records.

    A level-1 record flips one qubit; a level-j record (j >= 2) flips every
    qubit of the indicated level-(j-1) sub-block, which is a logical X there.
    """
    batch = records[0].shape[1] if records else 1
    out = np.zeros((N**level, batch), bool)
    for j, pos in enumerate(records, start=1):
        span = N ** (j - 1)
        nb = pos.shape[0]
        for b in range(nb):
            row = pos[b]
            for p in range(N):
                hit = row == p
                if hit.any():
                    start = b * N * span + p * span
                    out[start:start + span, hit] ^= True
    return out


def logical_flip_batch(b: np.ndarray, level: int) -> np.ndarray:
    return decode_batch(b, level)[1]


def residual_logical_class(error: PauliMask, level: int) -> str:
    """``"I"``, ``"X"``, ``"Z"`` or ``"Y"`` after ideal decoding of the residual."""
    if error.n != N**level:
        raise ValueError(f"mask has {error.n} qubits, expected {N**level}")
    xf = concat_decode(error.x, level)
    zf = concat_decode(error.z, level)
    return "IXZY"[xf + 2 * zf]


def logical_failure_batch(x: np.ndarray, z: np.ndarray, level: int) -> np.ndarray:
    """Per-trial boolean: residual logical class is not I."""
    return decode_batch(x, level)[1] | decode_batch(z, level)[1]


# ---------------------------------------------------------------------------
# Block indexing and transversal circuits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcatBlock:
    level: int

    @property
    def size(self) -> int:
        return N**self.level

    def index(self, path: Sequence[int]) -> int:
        if len(path) != self.level or any(not 0 <= p < N for p in path):
            raise ValueError(f"bad path {path} for level {self.level}")
        i = 0
        for p in path:
            i = i * N + p
        return i

    def path(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} out of range")
        out = []
        for _ in range(self.level):
            index, p = divmod(index, N)
            out.append(p)
        return tuple(reversed(out))

    def sub_blocks(self, level: int) -> np.ndarray:
        """Indices grouped into level-``level`` sub-blocks, shape ``(7**(L-level), 7**level)``."""
        return np.arange(self.size).reshape(-1, N**level)


_TRANSVERSAL = {
    GateKind.HADAMARD, GateKind.PHASE, GateKind.CNOT, GateKind.SWAP,
    GateKind.MEAS_Z, GateKind.MEAS_X, GateKind.PREP_Z, GateKind.PREP_X, GateKind.IDLE,
}


def transversal_events(gate: GateKind | str, *blocks: Sequence[int]) -> list[GateEvent]:
    gate = GateKind(gate)
    if gate not in _TRANSVERSAL:
        raise ScheduleError(f"{gate} has no transversal form")
    if len(blocks) != gate.arity:
        raise ScheduleError(f"{gate.value} needs {gate.arity} block(s)")
    sizes = {len(b) for b in blocks}
    if len(sizes) != 1:
        raise ScheduleError(f"mismatched block sizes {sorted(sizes)}")
    return [GateEvent(gate, tuple(int(b[r]) for b in blocks)) for r in range(len(blocks[0]))]


def transversal_circuit(gate: GateKind | str, level: int, *blocks: Sequence[int]) -> Schedule:
    """One timestep pairing the r-th qubit of every operand block."""
    for b in blocks:
        if len(b) != N**level:
            raise ScheduleError(f"block of size {len(b)} is not a level-{level} block")
    return Schedule.layer(transversal_events(gate, *blocks))


# ---------------------------------------------------------------------------
# Encoder for logical |0>
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def encoder_plan() -> tuple[tuple[int, ...], tuple[tuple[tuple[int, int], ...], ...]]:
    """``(pivots, cnot_layers)`` for preparing encoded ``|0>``.

    Pivot positions start in ``|+>``, the rest in ``|0>``; each check row then
    copies its pivot onto its other support positions, giving the uniform
    superposition over the row space of the parity checks (the even codewords).
    CNOTs are packed greedily into layers with disjoint operands.
    """
    rref, piv = gf2_rref(H)
    pending = [(piv[r], int(q)) for r in range(len(piv)) for q in np.flatnonzero(rref[r]) if q != piv[r]]
    layers = []
    while pending:
        used: set[int] = set()
        layer, rest = [], []
        for c, t in pending:
            if c in used or t in used:
                rest.append((c, t))
            else:
                layer.append((c, t))
                used.update((c, t))
        layers.append(tuple(layer))
        pending = rest
    return tuple(piv), tuple(layers)


def encoder_schedule(qubits: Sequence[int]) -> Schedule:
    """Physical level-1 ``|0>`` encoder on seven rows/sites."""
    if len(qubits) != N:
        raise ScheduleError("encoder needs 7 qubits")
    piv, layers = encoder_plan()
    first = [GateEvent(GateKind.PREP_X if i in piv else GateKind.PREP_Z, (qubits[i],)) for i in range(N)]
    steps = [tuple(first)]
    for layer in layers:
        steps.append(tuple(GateEvent(GateKind.CNOT, (qubits[c], qubits[t])) for c, t in layer))
    return Schedule(tuple(steps))
