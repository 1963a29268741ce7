"""Gate events and timestep schedules.

A :class:`Schedule` is an ordered list of timesteps; each timestep is a tuple of
:class:`GateEvent` objects acting on disjoint qubits.  Operands are plain
integer indices, interpreted either as lattice sites (routing) or as rows of a
Pauli-frame simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence


class GateKind(str, Enum):
    PREP_Z = "PrepZ"
    PREP_X = "PrepX"
    HADAMARD = "Hadamard"
    PHASE = "Phase"
    CNOT = "CNOT"
    SWAP = "Swap"
    MEAS_Z = "MeasZ"
    MEAS_X = "MeasX"
    IDLE = "Idle"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.SWAP) else 1

    @property
    def is_prep(self) -> bool:
        return self in (GateKind.PREP_Z, GateKind.PREP_X)

    @property
    def is_meas(self) -> bool:
        return self in (GateKind.MEAS_Z, GateKind.MEAS_X)


class ScheduleError(ValueError):
    """Raised for illegal gate events or schedules."""


@dataclass(frozen=True)
class GateEvent:
    kind: GateKind
    operands: tuple[int, ...]
    time: int = 0

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        ops = tuple(int(q) for q in self.operands)
        object.__setattr__(self, "operands", ops)
        if len(ops) != kind.arity:
            raise ScheduleError(f"{kind.value} takes {kind.arity} operand(s), got {ops}")
        if kind.arity == 2 and ops[0] == ops[1]:
            raise ScheduleError(f"{kind.value} operands must be distinct, got {ops}")
        if any(q < 0 for q in ops):
            raise ScheduleError(f"negative operand in {ops}")
        if self.time < 0:
            raise ScheduleError(f"negative time {self.time}")

    def at(self, time: int) -> "GateEvent":
        return GateEvent(self.kind, self.operands, time)

    def token(self) -> str:
        return f"{self.kind.value}({','.join(str(q) for q in self.operands)})"


def ev(kind: GateKind | str, *operands: int, time: int = 0) -> GateEvent:
    """Shorthand constructor: ``ev("CNOT", 0, 1)``."""
    return GateEvent(GateKind(kind), tuple(operands), time)


@dataclass(frozen=True)
class Schedule:
    """Timestep-ordered gate events.

    Event ``time`` fields are normalised to the index of the step that holds
    them, so ``steps[t]`` contains exactly the events with ``time == t``.
    """

    steps: tuple[tuple[GateEvent, ...], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        norm = tuple(
            tuple(e if e.time == t else e.at(t) for e in step)
            for t, step in enumerate(self.steps)
        )
        object.__setattr__(self, "steps", norm)
        for t, step in enumerate(norm):
            seen: set[int] = set()
            for e in step:
                for q in e.operands:
                    if q in seen:
                        raise ScheduleError(f"qubit {q} used twice in timestep {t}")
                    seen.add(q)

    @classmethod
    def from_events(cls, events: Iterable[GateEvent]) -> "Schedule":
        """Group events by their ``time`` field."""
        events = list(events)
        if not events:
            return cls(())
        depth = max(e.time for e in events) + 1
        buckets: list[list[GateEvent]] = [[] for _ in range(depth)]
        for e in events:
            buckets[e.time].append(e)
        return cls(tuple(tuple(b) for b in buckets))

    @classmethod
    def sequential(cls, events: Iterable[GateEvent]) -> "Schedule":
        """One event per timestep, in the given order."""
        return cls(tuple((e,) for e in events))

    @classmethod
    def layer(cls, events: Iterable[GateEvent]) -> "Schedule":
        """All events in a single timestep."""
        events = tuple(events)
        return cls((events,) if events else ())

    @property
    def depth(self) -> int:
        return len(self.steps)

    def __len__(self) -> int:
        return self.depth

    def __iter__(self) -> Iterator[tuple[GateEvent, ...]]:
        return iter(self.steps)

    def __add__(self, other: "Schedule") -> "Schedule":
        return Schedule(self.steps + other.steps)

    def events(self) -> list[GateEvent]:
        return [e for step in self.steps for e in step]

    def count(self, kind: GateKind | str | None = None) -> int:
        if kind is None:
            return sum(len(s) for s in self.steps)
        kind = GateKind(kind)
        return sum(1 for e in self.events() if e.kind is kind)

    def qubits(self) -> set[int]:
        return {q for e in self.events() for q in e.operands}

    def max_operand(self) -> int:
        return max((q for e in self.events() for q in e.operands), default=-1)

    def merge(self, other: "Schedule") -> "Schedule":
        """Run two schedules side by side (their qubits must be disjoint)."""
        n = max(self.depth, other.depth)
        a = self.steps + ((),) * (n - self.depth)
        b = other.steps + ((),) * (n - other.depth)
        return Schedule(tuple(x + y for x, y in zip(a, b)))

    def relabel(self, mapping: Sequence[int] | dict[int, int]) -> "Schedule":
        return Schedule(
            tuple(
                tuple(GateEvent(e.kind, tuple(mapping[q] for q in e.operands), e.time) for e in step)
                for step in self.steps
            )
        )

    def to_text(self) -> str:
        """One line per timestep, events as ``KIND(site,...)`` tokens."""
        if not self.steps:
            return ""
        return "\n".join(" ".join(e.token() for e in step) for step in self.steps) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Schedule":
        steps = []
        for line in text.splitlines():
            events = []
            for tok in line.split():
                name, _, rest = tok.partition("(")
                ops = [int(v) for v in rest.rstrip(")").split(",") if v]
                events.append(GateEvent(GateKind(name), tuple(ops)))
            steps.append(tuple(events))
        return cls(tuple(steps))


EMPTY = Schedule(())
