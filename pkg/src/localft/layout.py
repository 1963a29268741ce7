"""Qubit placements for 3D plane stacks, 2D interleaved lines and 1D footprints.

Every layout is described by a *track*: the ordered sequence of computational
slots along the interaction axis.  Each slot holds data (level ``-1``) or an
ancilla of some level, and records the slot of its *partner* (the qubit it
serves; ``-1`` for data).  The lattice embedding then depends on dimension:

* 3D: the track runs along ``y`` (one full line of ``7**L`` sites per slot),
  data qubit ``r`` sits at ``x = 2r``; logical qubit ``q`` owns plane ``z = q``.
* 2D: the track runs along ``x`` of row ``y = 2q``.
* 1D: footprints of consecutive logical qubits abut along ``x``.

Computational sites have even coordinates in the lattice plane; the sites in
between are auxiliary (``o``), and in nearest-neighbour mode the sites with
all-odd in-plane coordinates are cul-de-sacs (``c``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

DATA = -1
AUX_CHAR = "o"
CUL_CHAR = "c"
DATA_CHAR = "d"


def level_char(level: int) -> str:
    if level == DATA:
        return DATA_CHAR
    return str(level) if level < 10 else chr(ord("A") + level - 10)


class LayoutError(ValueError):
    """Invalid layout request or structure."""


@dataclass(frozen=True)
class Site:
    coord: tuple[int, ...]
    role: str                     # "data", "aux", "culdesac" or "ancilla"
    level: Optional[int] = None   # ancilla level
    purpose: Optional[str] = None

    @property
    def char(self) -> str:
        if self.role == "data":
            return DATA_CHAR
        if self.role == "aux":
            return AUX_CHAR
        if self.role == "culdesac":
            return CUL_CHAR
        return level_char(self.level)


# ---------------------------------------------------------------------------
# Track construction
# ---------------------------------------------------------------------------

def _concat(parts: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    levels, partners, off = [], [], 0
    for lv, pa in parts:
        levels.append(lv)
        partners.append(np.where(pa >= 0, pa + off, -1))
        off += len(lv)
    return np.concatenate(levels), np.concatenate(partners)


def _serve(unit: tuple[np.ndarray, np.ndarray], clients: np.ndarray, client_level: int,
           anc: tuple[np.ndarray, np.ndarray], anc_level: int, copies: int):
    """Append ``copies`` ancilla units after ``unit``; their top cells serve ``clients`` in order."""
    lv, pa = unit
    parts = [(lv, pa)]
    for _ in range(copies):
        alv, apa = anc
        apa = apa.copy()
        top = np.flatnonzero((alv == anc_level) & (apa < 0))
        if len(top) != len(clients):
            raise LayoutError("ancilla block size does not match its clients")
        parts.append((alv, apa))
    out_lv, out_pa = _concat(parts)
    off = len(lv)
    for _ in range(copies):
        alv = anc[0]
        top = np.flatnonzero((alv == anc_level) & (anc[1] < 0))
        out_pa[off + top] = clients
        off += len(alv)
    return out_lv, out_pa


@lru_cache(maxsize=None)
def _line_unit(role: int, j: int, n_o: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Interleaved line unit for 2D/1D.

    ``role`` is ``DATA`` or an ancilla level.  ``Unit(r, 0)`` is the qubit
    followed by its level-0 helpers; ``Unit(r, j)`` is seven ``Unit(r, j-1)``
    followed by the level-j ancilla blocks that serve those seven (for data:
    ``N_o`` of them, for an ancilla of level ``a > j``: ``N_t`` of them).
    """
    if role == 0:
        return np.array([0], np.int8), np.array([-1], np.int64)
    helpers = n_o if role == DATA else n_t
    if j == 0:
        lv = np.array([role] + [0] * helpers, np.int8)
        pa = np.array([-1] + [0] * helpers, np.int64)
        return lv, pa
    sub = _line_unit(role, j - 1, n_o, n_t)
    seven = _concat([sub] * 7)
    clients = np.flatnonzero((seven[0] == role) & (seven[1] < 0))
    if role != DATA and j >= role:
        return seven
    anc = _line_unit(j, j, n_o, n_t)
    return _serve(seven, clients, role, anc, j, helpers)


def _support_3d(k: int, n_t: int) -> list[int]:
    """Line levels of a level-k ancilla line followed by its recursive support."""
    out = [k] + [0] * n_t
    for j in range(1, k):
        for _ in range(n_t):
            out += _support_3d(j, n_t)
    return out


def _track_3d(L: int, n_o: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    levels = [DATA] + [0] * n_o
    for k in range(1, L + 1):
        for _ in range(n_o):
            levels += _support_3d(k, n_t)
    lv = np.array(levels, np.int8)
    pa = np.full(len(lv), -1, np.int64)
    # partner: top-level blocks serve the data line; support lines serve the
    # nearest preceding line of higher level
    stack: list[int] = []
    for i in range(1, len(lv)):
        l = int(lv[i])
        while stack and lv[stack[-1]] <= l:
            stack.pop()
        pa[i] = stack[-1] if stack else 0
        if l > 0:
            stack.append(i)
    return lv, pa


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    dim: int
    L: int
    K: int
    N_o: int
    N_t: int
    mode: str                       # "nn" (cul-de-sac) or "nnn"
    track_level: np.ndarray = field(repr=False)
    track_partner: np.ndarray = field(repr=False)
    N: int = 0
    culdesacs: bool = True

    # -- geometry --------------------------------------------------------

    @property
    def slots(self) -> int:
        return len(self.track_level)

    @property
    def data_slots(self) -> np.ndarray:
        return np.flatnonzero(self.track_level == DATA)

    @property
    def extents(self) -> tuple[int, ...]:
        S = self.slots
        if self.dim == 3:
            return (2 * 7**self.L, 2 * S, self.K)
        if self.dim == 2:
            return (2 * S, 2 * self.K)
        return (2 * S * self.K,)

    def _track_pos(self, coord: tuple[int, ...]) -> tuple[int, int, int]:
        """``(in-plane a, in-plane b, slot)``; a runs along the track."""
        if self.dim == 3:
            x, y, _ = coord
            return y, x, y // 2
        if self.dim == 2:
            x, y = coord
            return x, y, x // 2
        (x,) = coord
        return x, 0, (x // 2) % self.slots

    def site(self, coord) -> Site:
        coord = tuple(int(c) for c in coord)
        if len(coord) != self.dim or any(not 0 <= c < e for c, e in zip(coord, self.extents)):
            raise LayoutError(f"coordinate {coord} outside extents {self.extents}")
        a, b, slot = self._track_pos(coord)
        if a % 2 == 0 and b % 2 == 0:
            lv = int(self.track_level[slot])
            if lv == DATA:
                return Site(coord, "data")
            return Site(coord, "ancilla", lv, "support" if self._is_support(slot) else "ec")
        if a % 2 == 1 and b % 2 == 1 and self.mode == "nn" and self.culdesacs:
            return Site(coord, "culdesac")
        return Site(coord, "aux")

    def _is_support(self, slot: int) -> bool:
        p = int(self.track_partner[slot])
        return p >= 0 and self.track_level[p] != DATA

    def sites(self) -> Iterator[Site]:
        for coord in np.ndindex(*self.extents):
            yield self.site(coord)

    def block_index(self, q: int, path: tuple[int, ...] = ()) -> list[tuple[int, ...]]:
        """Coordinates of the data sub-block of logical qubit ``q`` selected by ``path``."""
        if not 0 <= q < self.K:
            raise LayoutError(f"logical qubit {q} out of range")
        span = 7 ** (self.L - len(path))
        start = 0
        for p in path:
            start = start * 7 + p
        start *= span
        ds = self.data_slots
        out = []
        for r in range(start, start + span):
            if self.dim == 3:
                out.append((2 * r, 0, q))
            elif self.dim == 2:
                out.append((2 * int(ds[r]), 2 * q))
            else:
                out.append((2 * (q * self.slots + int(ds[r])),))
        return out

    # -- distances ---------------------------------------------------------

    def slot_distances(self) -> np.ndarray:
        idx = np.arange(self.slots)
        return np.where(self.track_partner >= 0, np.abs(idx - self.track_partner), 0)

    def travel_slots(self, k: int) -> int:
        """Largest slot distance from a level-``k`` ancilla to the data qubit it serves."""
        if not 0 <= k <= max(self.L, 0):
            raise LayoutError(f"level {k} outside 0..{self.L}")
        pa = self.track_partner
        sel = (self.track_level == k) & (pa >= 0)
        sel &= self.track_level[np.where(pa >= 0, pa, 0)] == DATA
        d = self.slot_distances()[sel]
        return int(d.max()) if len(d) else 0

    def support_slots(self, l: int) -> int:
        """Largest slot distance from an ancilla of level above ``l`` to the nearest level-``l`` ancilla."""
        lv = self.track_level
        clients = np.flatnonzero(lv > l)
        helpers = np.flatnonzero(lv == l)
        if len(clients) == 0 or len(helpers) == 0:
            return 0
        j = np.searchsorted(helpers, clients)
        left = helpers[np.clip(j - 1, 0, len(helpers) - 1)]
        right = helpers[np.clip(j, 0, len(helpers) - 1)]
        return int(np.minimum(np.abs(clients - left), np.abs(clients - right)).max())

    def footprint(self) -> int:
        """Lattice sites per logical qubit."""
        return int(np.prod(self.extents)) // self.K

    @property
    def T(self) -> float:
        """Per-level growth of the slot count along one footprint."""
        if self.L == 0:
            return float(self.slots)
        return (self.slots / len(_track(self.dim, 0, self.N_o, self.N_t)[0])) ** (1.0 / self.L)

    # -- export ------------------------------------------------------------

    def grid(self, max_sites: int = 2_000_000) -> np.ndarray:
        size = int(np.prod(self.extents))
        if size > max_sites:
            raise LayoutError(f"layout has {size} sites; raise max_sites to materialise it")
        chars = np.array([level_char(int(v)) for v in self.track_level])
        ext = self.extents
        if self.dim == 3:
            X, Y, Z = ext
            g = np.full((Z, Y, X), AUX_CHAR)
            g[:, 0::2, 0::2] = chars[:, None]
            if self.mode == "nn" and self.culdesacs:
                g[:, 1::2, 1::2] = CUL_CHAR
            return g
        if self.dim == 2:
            X, Y = ext
            g = np.full((Y, X), AUX_CHAR)
            g[0::2, 0::2] = chars[None, :]
            if self.mode == "nn" and self.culdesacs:
                g[1::2, 1::2] = CUL_CHAR
            return g
        g = np.full(ext, AUX_CHAR)
        g[0::2] = np.tile(chars, self.K)
        return g

    def to_text(self, max_sites: int = 2_000_000) -> str:
        g = self.grid(max_sites)
        if self.dim == 1:
            return "".join(g) + "\n"
        if self.dim == 2:
            return "\n".join("".join(row) for row in g[::-1]) + "\n"
        planes = ["\n".join("".join(row) for row in plane[::-1]) for plane in g]
        return "\n\n".join(planes) + "\n"

    def summary(self) -> dict:
        return {
            "dim": self.dim, "L": self.L, "K": self.K, "N_o": self.N_o, "N_t": self.N_t,
            "mode": self.mode, "extents": list(self.extents), "slots": self.slots,
            "footprint": self.footprint(), "N": self.N, "T": round(self.T, 6),
            "travel": [travel_bound(self, k) for k in range(self.L + 1)],
        }

    def to_json(self) -> str:
        doc = self.summary()
        doc["track"] = "".join(level_char(int(v)) for v in self.track_level)
        doc["partner"] = [int(v) for v in self.track_partner]
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _track(dim: int, L: int, n_o: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    if dim == 3:
        return _track_3d(L, n_o, n_t)
    lv, pa = _line_unit(DATA, L, n_o, n_t)
    return lv.copy(), pa.copy()


def travel_bound(layout: Layout, k: int) -> int:
    """Largest lattice distance from a level-``k`` ancilla to its partner."""
    return 2 * layout.travel_slots(k)


def derive_N(layout: Layout) -> int:
    """Per-level growth base of the ancilla travel distance.

    The smallest integer exceeding ``N_o`` and ``N_t`` with
    ``travel_bound(k) <= N * travel_bound(k-1)`` for every level, so that
    ``travel_bound(k) <= travel_bound(0) * N**k``.
    """
    n = max(layout.N_o, layout.N_t) + 1
    prev = travel_bound(layout, 0)
    for k in range(1, layout.L + 1):
        t = travel_bound(layout, k)
        if prev:
            n = max(n, math.ceil(t / prev - 1e-9))
        prev = t
    return n


def build_layout(dim: int, L: int, K: int = 1, N_o: int = 4, N_t: int = 8, mode: Optional[str] = None) -> Layout:
    if dim not in (1, 2, 3):
        raise LayoutError(f"dim must be 1, 2 or 3, got {dim}")
    if L < 0 or K < 1 or N_o < 1 or N_t < 1:
        raise LayoutError("need L >= 0, K >= 1, N_o >= 1, N_t >= 1")
    mode = mode or ("nnn" if dim == 1 else "nn")
    if mode not in ("nn", "nnn"):
        raise LayoutError(f"unknown locality mode {mode!r}")
    if dim == 1 and mode != "nnn":
        raise LayoutError("1D layouts need next-to-nearest-neighbour gates")
    lv, pa = _track(dim, L, N_o, N_t)
    lay = Layout(dim, L, K, N_o, N_t, mode, lv, pa)
    return replace(lay, N=derive_N(lay))


def asymptotic_growth(dim: int, N_o: int, N_t: int, depth: int = 40) -> float:
    """Limit of footprint(L+1)/footprint(L), evaluated from the size recursion."""
    if dim == 3:
        lines = [1 + N_o * sum((N_t + 1) ** l for l in range(L + 1)) for L in (depth - 1, depth)]
        return 7.0 * lines[1] / lines[0]

    @lru_cache(maxsize=None)
    def size(role, j):
        if role == 0:
            return 1
        helpers = N_o if role == DATA else N_t
        if j == 0:
            return 1 + helpers
        base = 7 * size(role, j - 1)
        if role != DATA and j >= role:
            return base
        return base + helpers * size(j, j)

    return size(DATA, depth) / size(DATA, depth - 1)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(layout: Layout) -> ValidationReport:
    rep = ValidationReport()
    lv, pa = layout.track_level, layout.track_partner
    if len(lv) != len(pa):
        rep.violations.append("track level/partner length mismatch")
        return rep
    if int((lv == DATA).sum()) != (7**layout.L if layout.dim != 3 else 1):
        rep.violations.append("wrong number of data slots on the track")
    dist = layout.slot_distances()
    for i in np.flatnonzero(pa >= 0):
        p = int(pa[i])
        if p == i or not 0 <= p < len(lv):
            rep.violations.append(f"slot {i}: invalid partner {p}")
            continue
        if lv[p] != DATA:
            continue
        k = int(lv[i])
        bound = 2 * layout.N_o * layout.N**k
        if 2 * int(dist[i]) > bound:
            rep.violations.append(
                f"level-{k} ancilla at track slot {i} is {2 * int(dist[i])} sites from its data "
                f"partner at slot {p} (bound {bound})")
    for l in range(0, layout.L):
        gap = 2 * layout.support_slots(l)
        bound = 2 * layout.N ** max(l, 1)
        if gap > bound:
            rep.violations.append(f"level-{l} support ancillas lie {gap} sites from a client (bound {bound})")
    if layout.mode == "nn" and layout.dim >= 2 and not layout.culdesacs:
        rep.violations.append("nearest-neighbour routing needs cul-de-sac sites, none present")
    if layout.dim == 1 and layout.mode != "nnn":
        rep.violations.append("1D layout without next-to-nearest-neighbour connectivity")
    return rep
