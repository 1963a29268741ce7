"""Local swap schedules and the motion patterns they induce.

Schedules here address lattice *sites* (integers).  Small geometric helpers
(:class:`Grid`, :func:`line_sites`) supply coordinates so locality can be
checked, and :func:`occupancy` replays swaps on labelled contents as an oracle.

:class:`LatticeTransport` turns a :class:`~localft.layout.Layout` plus a
locality mode into the per-qubit swap patterns consumed by
:class:`~localft.ec.Protocol`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .circuit import GateEvent, GateKind, Schedule, ScheduleError
from .ec import TransportPlan
from .layout import DATA, Layout, build_layout


class RoutingError(ScheduleError):
    """A requested move is impossible with the available sites."""


# ---------------------------------------------------------------------------
# Geometry helpers and oracles
# ---------------------------------------------------------------------------

COMPUTATIONAL = "x"
AUX = "o"
CUL = "c"


@dataclass
class Grid:
    """Finite lattice with a role per site; sites are numbered row-major."""

    shape: tuple[int, ...]
    roles: dict[tuple[int, ...], str] = field(default_factory=dict)

    def index(self, coord: Sequence[int]) -> int:
        coord = tuple(coord)
        if len(coord) != len(self.shape) or any(not 0 <= c < s for c, s in zip(coord, self.shape)):
            raise RoutingError(f"coordinate {coord} outside grid {self.shape}")
        return int(np.ravel_multi_index(coord, self.shape))

    def coord(self, index: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(index, self.shape))

    def role(self, coord: Sequence[int]) -> str:
        return self.roles.get(tuple(coord), AUX)

    def coords(self) -> dict[int, tuple[int, ...]]:
        return {i: self.coord(i) for i in range(int(np.prod(self.shape)))}


def column_grid(length: int, width: int = 2) -> Grid:
    """Cul-de-sac lattice (computational sites at even/even) with ``length`` slots along y."""
    g = Grid((width, 2 * length))
    for x in range(width):
        for y in range(2 * length):
            if x % 2 == 0 and y % 2 == 0:
                g.roles[(x, y)] = COMPUTATIONAL
            elif x % 2 == 1 and y % 2 == 1:
                g.roles[(x, y)] = CUL
    return g


def line_sites(n_slots: int) -> dict[int, tuple[int]]:
    """1D line with an auxiliary site after every computational slot; slot ``k`` is site ``2k``."""
    return {i: (i,) for i in range(2 * n_slots)}


def lattice_distance(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(abs(int(x) - int(y)) for x, y in zip(a, b))


def check_schedule(schedule: Schedule, coords: Mapping[int, Sequence[int]], radius: int) -> list[str]:
    """Locality violations of every two-qubit event (disjointness is enforced by Schedule)."""
    bad = []
    for t, step in enumerate(schedule.steps):
        for e in step:
            if e.kind.arity == 2:
                a, b = e.operands
                if a not in coords or b not in coords:
                    bad.append(f"t={t}: {e.token()} addresses unknown sites")
                elif lattice_distance(coords[a], coords[b]) > radius:
                    bad.append(f"t={t}: {e.token()} spans {lattice_distance(coords[a], coords[b])} > {radius}")
    return bad


def occupancy(schedule: Schedule, contents: Mapping[int, object]) -> dict[int, object]:
    """Apply the swaps of ``schedule`` to labelled site contents."""
    occ = dict(contents)
    for step in schedule.steps:
        for e in step:
            if e.kind is GateKind.SWAP:
                a, b = e.operands
                occ[a], occ[b] = occ.get(b), occ.get(a)
    return {k: v for k, v in occ.items() if v is not None}


# ---------------------------------------------------------------------------
# Primitive networks
# ---------------------------------------------------------------------------

def _swap(a: int, b: int) -> GateEvent:
    return GateEvent(GateKind.SWAP, (a, b))


def rotation_schedule(path: Sequence[int], coords: Optional[Mapping[int, Sequence[int]]] = None,
                      radius: int = 1) -> Schedule:
    """Move the qubit at ``path[0]`` to ``path[-1]``; everything between shifts back one site."""
    path = [int(p) for p in path]
    if len(set(path)) != len(path):
        raise RoutingError("rotation path visits a site twice")
    if coords is not None:
        for a, b in zip(path, path[1:]):
            if lattice_distance(coords[a], coords[b]) > radius:
                raise RoutingError(f"sites {a} and {b} are not adjacent")
    return Schedule.sequential(_swap(a, b) for a, b in zip(path, path[1:]))


def interaction_schedule(q1: int, q2: int, gate: GateKind | str = GateKind.CNOT,
                         layout: Optional[Layout] = None) -> Schedule:
    """Bring the qubit at site ``q1`` next to ``q2`` on a line, apply ``gate``, move it back.

    For separation ``d + 1`` the qubit travels along ``d`` sites, costing
    ``d - 1`` swaps each way; the gate acts across the final gap of two sites.
    """
    gate = GateKind(gate)
    if layout is not None and layout.dim != 1:
        raise RoutingError("interaction_schedule works on 1D lines")
    if q1 == q2:
        raise RoutingError("qubits must differ")
    step = 1 if q2 > q1 else -1
    sep = abs(q2 - q1)
    if sep < 2:
        raise RoutingError("line interaction needs separation >= 2")
    path = list(range(q1, q2 - step, step))  # d = sep - 1 sites
    there = rotation_schedule(path)
    meet = path[-1]
    ops = (meet, q2) if gate.arity == 2 else (q2,)
    back = rotation_schedule(path[::-1])
    return there + Schedule.layer([GateEvent(gate, ops)]) + back


def ft_swap(a: int, aux: int, b: int, roles: Optional[Mapping[int, str]] = None) -> Schedule:
    """Exchange two computational qubits through an auxiliary site (three swaps)."""
    if roles is not None and roles.get(aux) != AUX:
        raise RoutingError(f"site {aux} is not auxiliary; its contents would be destroyed")
    if len({a, aux, b}) != 3:
        raise RoutingError("ft_swap needs three distinct sites")
    return Schedule.sequential([_swap(a, aux), _swap(a, b), _swap(aux, b)])


def cul_de_sac_move(grid: Grid, qubit: Sequence[int], displacement: int,
                    occupied: Optional[Iterable[Sequence[int]]] = None) -> Schedule:
    """Advance the computational qubit at ``qubit`` by ``displacement`` slots along y.

    Blocking qubits step into the auxiliary row behind them and then into the
    neighbouring cul-de-sac; the mover walks through; the parked qubits return
    one slot further back.  Every swap pairs a computational qubit with an
    auxiliary or cul-de-sac site.
    """
    if displacement == 0:
        return Schedule(())
    x, y0 = (int(v) for v in qubit)
    sgn = 1 if displacement > 0 else -1
    d = abs(displacement)
    if grid.role((x, y0)) != COMPUTATIONAL:
        raise RoutingError(f"{(x, y0)} is not a computational site")
    occupied = {tuple(map(int, o)) for o in (occupied or ())}
    blockers = [(x, y0 + sgn * 2 * j) for j in range(1, d + 1)]
    parks = []
    for bx, by in blockers:
        if grid.role((bx, by)) != COMPUTATIONAL:
            raise RoutingError(f"target slot {(bx, by)} does not exist")
        aux = (bx, by - sgn)
        cul = (bx + 1, by - sgn)
        if grid.role(cul) != CUL or not 0 <= cul[0] < grid.shape[0]:
            raise RoutingError(f"no cul-de-sac next to {(bx, by)}")
        if cul in occupied:
            raise RoutingError(f"cul-de-sac {cul} is occupied")
        parks.append((aux, cul))
    idx = grid.index
    steps = [
        tuple(_swap(idx(b), idx(a)) for b, (a, _) in zip(blockers, parks)),
        tuple(_swap(idx(a), idx(c)) for a, c in parks),
    ]
    walk = [(x, y0 + sgn * s) for s in range(0, 2 * d + 1)]
    steps += [(_swap(idx(p), idx(q)),) for p, q in zip(walk, walk[1:])]
    steps.append(tuple(_swap(idx(c), idx(a)) for a, c in parks))
    steps.append(tuple(_swap(idx(a), idx((a[0], a[1] - sgn))) for a, _ in parks))
    return Schedule(tuple(steps))


# ---------------------------------------------------------------------------
# 1D block interleaving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interleave:
    interleave: Schedule
    deinterleave: Schedule
    slots: int  # per footprint

    @property
    def layers(self) -> int:
        return max(self.slots - 1, 0)


def _interleave_pairs(S: int):
    """Slot pairs exchanged in each layer of the odd-even merge of two length-S runs."""
    for j in range(1, S):
        yield [(S - j + 2 * i, S - j + 2 * i + 1) for i in range(j)]


def interleave_blocks_1d(footprint_a: Sequence[int] | int, footprint_b: Sequence[int] | int,
                         start: int = 0) -> Interleave:
    """Merge two abutting footprints slot-by-slot (A0, B0, A1, B1, ...).

    Footprints are given as their slot contents (or just their length).  Slot
    ``k`` sits at site ``2 (start + k)`` with an auxiliary site after it; every
    exchange of neighbouring slots is an :func:`ft_swap`.
    """
    sa = footprint_a if isinstance(footprint_a, int) else len(footprint_a)
    sb = footprint_b if isinstance(footprint_b, int) else len(footprint_b)
    if sa != sb:
        raise RoutingError(f"footprints differ in size ({sa} vs {sb})")
    if not isinstance(footprint_a, int) and list(footprint_a) != list(footprint_b):
        raise RoutingError("footprints differ in structure")
    S = sa
    steps: list[tuple[GateEvent, ...]] = []
    for pairs in _interleave_pairs(S):
        triples = [ft_swap(2 * (start + p), 2 * (start + p) + 1, 2 * (start + q)) for p, q in pairs]
        for k in range(3):
            steps.append(tuple(t.steps[k][0] for t in triples))
    forward = Schedule(tuple(steps))
    backward = Schedule(tuple(reversed(forward.steps)))
    # each ft_swap is an involution on the computational pair, but its middle
    # swap order matters for the auxiliary; reversing the step order replays
    # the same exchanges backwards
    return Interleave(forward, backward, S)


def interleave_motion(S: int, tracked_a: Sequence[int], tracked_b: Sequence[int]) -> np.ndarray:
    """Swap participation ``(len(a)+len(b), 3*(S-1))`` of tracked slots during the merge.

    In each ft_swap the left-hand qubit takes part in swaps 1 and 3, the
    right-hand qubit only in swap 2.
    """
    pos = np.concatenate([np.asarray(tracked_a, np.int64), S + np.asarray(tracked_b, np.int64)])
    out = np.zeros((len(pos), 3 * max(S - 1, 0)), bool)
    for j in range(1, S):
        lo, hi = S - j, S + j - 1
        inside = (pos >= lo) & (pos <= hi)
        left = inside & ((pos - lo) % 2 == 0)
        right = inside & ~left
        t = 3 * (j - 1)
        out[left, t] = True
        out[left, t + 2] = True
        out[right, t + 1] = True
        pos = np.where(left, pos + 1, np.where(right, pos - 1, pos))
    return out


# ---------------------------------------------------------------------------
# En-route error-correction stops and compaction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StopPlan:
    schedule: Schedule
    stops: tuple[int, ...]  # step index (in the output) at which each stop begins


def insert_ec_stops(schedule: Schedule, stride: int, level_bound: int,
                    tracked: Iterable[int], ec_fragment: Callable[[int, int], Schedule],
                    support_in_range: Optional[Callable[[int], bool]] = None) -> StopPlan:
    """Splice correction fragments after every ``stride`` steps that move a tracked qubit.

    ``ec_fragment(level, stop_index)`` supplies the fragment for each level
    below ``level_bound``; a terminal stop follows the last moving step.  The
    tracked set follows its qubits through the swaps.
    """
    if stride < 1:
        raise RoutingError("stride must be >= 1")
    where = {int(q) for q in tracked}
    out: list[tuple[GateEvent, ...]] = []
    stops: list[int] = []
    since = 0
    moved_any = False

    def splice() -> None:
        idx = len(stops)
        if support_in_range is not None and not support_in_range(idx):
            raise RoutingError(f"no support ancillas within range at stop {idx}")
        stops.append(len(out))
        for lvl in range(level_bound):
            out.extend(ec_fragment(lvl, idx).steps)

    for step in schedule.steps:
        out.append(step)
        moved = False
        for e in step:
            if e.kind is GateKind.SWAP:
                a, b = e.operands
                ina, inb = a in where, b in where
                if ina != inb:
                    where.symmetric_difference_update({a, b})
                if ina or inb:
                    moved = True
        if moved:
            since += 1
            moved_any = True
            if since == stride:
                splice()
                since = 0
    if moved_any and since > 0:
        splice()
    return StopPlan(Schedule(tuple(out)), tuple(stops))


def parallelize(schedule: Schedule) -> Schedule:
    """Greedy earliest-fit compaction preserving per-qubit event order."""
    ready: dict[int, int] = {}
    placed: list[list[GateEvent]] = []
    for e in schedule.events():
        t = max((ready.get(q, 0) for q in e.operands), default=0)
        while len(placed) <= t:
            placed.append([])
        placed[t].append(e)
        for q in e.operands:
            ready[q] = t + 1
    return Schedule(tuple(tuple(s) for s in placed))


# ---------------------------------------------------------------------------
# Motion patterns for the Monte Carlo runner
# ---------------------------------------------------------------------------

def nn_approach(d: int) -> np.ndarray:
    """Swap pattern of a qubit crossing ``d`` slots to sit next to its partner.

    The mover passes ``d - 1`` occupied slots by a cul-de-sac manoeuvre (it
    idles while the blockers park and return, and walks ``2 (d - 1)`` sites in
    between) and finishes with one hop into the auxiliary site beside the
    partner.
    """
    if d <= 0:
        return np.zeros((1, 0), bool)
    if d == 1:
        return np.ones((1, 1), bool)
    walk = 2 * (d - 1)
    out = np.zeros((1, walk + 5), bool)
    out[0, 2:2 + walk] = True
    out[0, -1] = True
    return out


def nnn_approach(d: int) -> np.ndarray:
    """Pattern of ``d - 1`` ft_swap hops; the gate then acts at next-nearest distance."""
    if d <= 1:
        return np.zeros((1, 0), bool)
    return np.tile(np.array([[True, False, True]]), (1, d - 1))


MODES = ("baseline", "3d", "2d", "1d")


class LatticeTransport(TransportPlan):
    """Transport patterns derived from a layout.

    ``3d`` and ``2d`` use cul-de-sac nearest-neighbour moves; ``1d`` uses
    ft_swap hops and interleaves the two data footprints for the CNOT.
    """

    def __init__(self, layout: Layout, stride: Optional[int] = None):
        self.layout = layout
        self.name = {3: "3d", 2: "2d", 1: "1d"}[layout.dim]
        self.stride = stride
        self._hop = nn_approach if layout.mode == "nn" else nnn_approach

    def approach(self, level: int) -> np.ndarray:
        if level < 1:
            return np.zeros((1, 0), bool)
        return self._hop(self.layout.travel_slots(level - 1))

    def support(self, level: int) -> np.ndarray:
        if level < 1:
            return np.zeros((1, 0), bool)
        d = min(self.layout.travel_slots(level - 1), max(1, self.layout.support_slots(level - 1)))
        return self._hop(d)

    def interaction(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        n = 7**level
        if self.layout.dim == 3:
            return np.zeros((1, 0), bool), np.zeros((1, 0), bool)
        if self.layout.dim == 2:
            # first block hops into the auxiliary row and back
            hop = np.zeros((2 * n, 1), bool)
            hop[:n] = True
            return hop, hop.copy()
        lay = self.layout if self.layout.L == level else _footprint(self.layout, level)
        S = lay.slots
        ds = lay.data_slots
        fwd = interleave_motion(S, ds, ds)
        return fwd, fwd[:, ::-1].copy()


def _footprint(layout: Layout, level: int) -> Layout:
    return build_layout(layout.dim, level, layout.K, layout.N_o, layout.N_t, layout.mode)


def transport_for(mode: str, layout: Optional[Layout], stride: Optional[int] = None) -> TransportPlan:
    if mode == "baseline":
        plan = TransportPlan()
        plan.stride = stride
        return plan
    if layout is None:
        raise RoutingError(f"mode {mode!r} needs a layout")
    return LatticeTransport(layout, stride)


def default_stride(idle_ratio: float) -> int:
    """Largest segment length whose accumulated idle error stays below one gate error."""
    if idle_ratio <= 0:
        return 1_000_000
    return max(1, math.ceil(1.0 / idle_ratio) - 1)


# ---------------------------------------------------------------------------
# Depth accounting from the same templates
# ---------------------------------------------------------------------------

EXTRACTION_STEPS = 3


def hop_pattern(layout: Layout, d: int) -> np.ndarray:
    return nn_approach(d) if layout.mode == "nn" else nnn_approach(d)


def ec_round_depth(layout: Optional[Layout], ancilla_level: int, repeats: int = 3) -> int:
    """Depth of one correction round whose ancillas come from ``ancilla_level``.

    Ancilla preparation is pipelined and not counted; each repeat is the
    approach of both ancillas (in parallel) plus the extraction steps.
    """
    if ancilla_level < 0:
        return 0
    travel = 0 if layout is None else hop_pattern(layout, layout.travel_slots(ancilla_level)).shape[1]
    return repeats * (travel + EXTRACTION_STEPS)


def interaction_depth(layout: Optional[Layout], level: int, stride: Optional[int] = None,
                      repeats: int = 3, stop_level: Optional[int] = None) -> int:
    """Depth of bringing two level-``level`` blocks together, the CNOT, and separating them.

    In 1D each footprint merge and split stops every ``stride`` steps for a
    correction round that uses ancillas of ``stop_level`` (default
    ``level``); without a stride there are no stops.
    """
    if layout is None or layout.dim == 3:
        return 1
    if layout.dim == 2:
        return 3
    S = layout.slots if layout.L == level else _footprint(layout, level).slots
    moving = 2 * 3 * max(S - 1, 0)
    stops = moving // stride if stride else 0
    lvl = level if stop_level is None else stop_level
    return moving + 1 + stops * ec_round_depth(layout, lvl, repeats)


def cycle_depth(layout: Optional[Layout], level: int, stride: Optional[int] = None, repeats: int = 3) -> int:
    """Depth of the logical test cycle: interaction plus one correction round."""
    ec = ec_round_depth(layout, level - 1, repeats) if level >= 1 else 0
    return interaction_depth(layout, level, stride, repeats, stop_level=level - 1) + ec
