"""Experiment orchestration: configs, the logical test cycle, sweeps and result files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np
import yaml

from .circuit import GateEvent, GateKind, Schedule
from .ec import Protocol, TransportPlan, VerificationPolicy
from .layout import build_layout
from .pauli_frame import FaultSource, FrameSim, NoiseModel, RandomFaults
from .routing import MODES, cycle_depth, default_stride, transport_for
from .steane import logical_failure_batch
from .threshold import (FitError, LevelRateSample, fit_effective_C, fit_recursion, overhead, threshold,
                        wilson)

MODE_DIM = {"baseline": 0, "3d": 3, "2d": 2, "1d": 1}
CSV_HEADER = ("mode", "dim", "level", "p", "rate", "ci_lo", "ci_hi", "trials", "depth")
MAX_DEFAULT_LEVEL = 2


class ConfigError(ValueError):
    pass


class CapacityError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    modes: tuple[str, ...] = ("baseline",)
    levels: tuple[int, ...] = (0, 1)
    p: tuple[float, ...] = (1e-3,)
    trials: int = 10_000
    batch: int = 10_000
    seed: int = 0
    N_o: int = 2
    N_t: int = 1
    repeats: int = 3
    stride: Optional[int] = None
    idle_ratio: float = 0.1
    prep_ratio: float = 1.0
    meas_ratio: float = 1.0
    verification_rounds: int = 1
    allow_large: bool = False
    output: str = "results"

    def __post_init__(self) -> None:
        for name in ("modes", "levels", "p"):
            v = getattr(self, name)
            if isinstance(v, (str, int, float)):
                v = (v,)
            object.__setattr__(self, name, tuple(v))
        if not self.p:
            raise ConfigError("noise sweep 'p' is empty")
        if not self.modes:
            raise ConfigError("no modes given")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown mode(s) {bad}; choose from {list(MODES)}")
        if not self.levels or any(l < 0 for l in self.levels):
            raise ConfigError("levels must be a nonempty list of non-negative integers")
        if any(not 0.0 <= p <= 1.0 for p in self.p):
            raise ConfigError("every p must lie in [0, 1]")
        if self.trials < 1 or self.batch < 1:
            raise ConfigError("trials and batch must be >= 1")
        if min(self.idle_ratio, self.prep_ratio, self.meas_ratio) < 0:
            raise ConfigError("noise ratios must be >= 0")
        if self.N_o < 1 or self.N_t < 1 or self.repeats < 1:
            raise ConfigError("N_o, N_t and repeats must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if max(self.levels) > MAX_DEFAULT_LEVEL and not self.allow_large:
            raise CapacityError(f"level {max(self.levels)} exceeds the default capacity of level "
                                f"{MAX_DEFAULT_LEVEL}; set allow_large to run it")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})

    def noise(self, p: float) -> NoiseModel:
        return NoiseModel.uniform(p, self.idle_ratio, self.prep_ratio, self.meas_ratio)

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else default_stride(self.idle_ratio)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("modes", "levels", "p"):
            d[k] = list(d[k])
        return d


# ---------------------------------------------------------------------------
# The logical test cycle
# ---------------------------------------------------------------------------

def make_transport(config: ExperimentConfig, mode: str, level: int) -> tuple[TransportPlan, object]:
    if mode == "baseline":
        return transport_for(mode, None, config.effective_stride), None
    lay = build_layout(MODE_DIM[mode], level, 2, config.N_o, config.N_t)
    return transport_for(mode, lay, config.effective_stride), lay


def run_cycle(level: int, noise: NoiseModel, faults: FaultSource, batch: int,
              transport: Optional[TransportPlan] = None, repeats: int = 3,
              policy: VerificationPolicy = VerificationPolicy()) -> np.ndarray:
    """Per-trial logical failure of one transversal CNOT + correction round on two blocks."""
    sim = FrameSim(batch, faults, capacity=max(64, 64 * 7**level))
    transport = transport or TransportPlan()
    pr = Protocol(sim, noise, transport, repeats, policy)
    n = 7**level
    data = sim.alloc(2 * n).reshape(2, n)
    pre, post = transport.interaction(level)
    stop_levels = list(range(1, level))
    data = pr.move(data, pre, waiting=np.zeros(0, np.int64), stop_levels=stop_levels)
    sim.run(Schedule.layer(GateEvent(GateKind.CNOT, (int(a), int(b))) for a, b in zip(data[0], data[1])))
    data = pr.move(data, post, waiting=np.zeros(0, np.int64), stop_levels=stop_levels)
    pr.ec_round(data, level)
    fail = np.zeros(batch, bool)
    for blk in data:
        fail |= logical_failure_batch(sim.x[blk], sim.z[blk], level)
    return fail


def point_key(mode: str, level: int, p: float) -> int:
    return zlib.crc32(f"{mode}|{level}|{p!r}".encode())


@dataclass
class RatePoint:
    sample: LevelRateSample
    failures: int
    depth: int

    def row(self) -> list:
        s = self.sample
        return [s.mode, s.dim, s.level, repr(s.p), repr(s.rate), repr(s.ci_lo), repr(s.ci_hi), s.trials, self.depth]


def estimate_level_rate(config: ExperimentConfig, level: int, p: float, mode: Optional[str] = None) -> RatePoint:
    """Monte Carlo logical failure rate of the level-``level`` cycle at physical rate ``p``.

    Trials run in batches; batch ``b`` draws from a generator seeded by
    ``(seed, point key, b)``, so results do not depend on sweep order.
    """
    mode = mode or config.modes[0]
    if level > MAX_DEFAULT_LEVEL and not config.allow_large:
        raise CapacityError(f"level {level} exceeds the default capacity")
    transport, lay = make_transport(config, mode, level)
    noise = config.noise(p)
    policy = VerificationPolicy(config.verification_rounds + 1, config.verification_rounds)
    key = point_key(mode, level, p)
    done = fails = 0
    b = 0
    while done < config.trials:
        n = min(config.batch, config.trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, key, b]))
        fails += int(run_cycle(level, noise, RandomFaults(noise, rng), n, transport, config.repeats, policy).sum())
        done += n
        b += 1
    lo, hi = wilson(fails, done)
    depth = cycle_depth(lay, level, config.effective_stride, config.repeats)
    sample = LevelRateSample(level, p, fails / done, lo, hi, done, mode, MODE_DIM[mode])
    return RatePoint(sample, fails, depth)


# ---------------------------------------------------------------------------
# Pseudo-threshold
# ---------------------------------------------------------------------------

@dataclass
class Crossing:
    p_star: Optional[float]
    ci: tuple[Optional[float], Optional[float]]
    bracketed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"p_star": self.p_star, "ci": list(self.ci), "bracketed": self.bracketed, "note": self.note}


def _crossing(ps: np.ndarray, lhs: np.ndarray, rhs: np.ndarray) -> Optional[float]:
    """First ``p`` where ``log lhs - log rhs`` changes sign, interpolated in log-log."""
    with np.errstate(divide="ignore"):
        g = np.log(np.maximum(lhs, 1e-300)) - np.log(np.maximum(rhs, 1e-300))
    for i in range(len(ps) - 1):
        if g[i] < 0 <= g[i + 1]:
            lp0, lp1 = math.log(ps[i]), math.log(ps[i + 1])
            t = -g[i] / (g[i + 1] - g[i])
            return math.exp(lp0 + t * (lp1 - lp0))
    return None


def pseudo_threshold(points: Sequence[RatePoint], level: int = 1, reference: Optional[Sequence[RatePoint]] = None,
                     n_boot: int = 400, seed: int = 0) -> Crossing:
    """Rate where the level-``level`` curve crosses ``p`` (or the ``reference`` curve).

    Confidence interval from a parametric bootstrap of the binomial counts.
    """
    pts = sorted((pt for pt in points if pt.sample.level == level), key=lambda r: r.sample.p)
    if len(pts) < 2:
        return Crossing(None, (None, None), False, "need at least two sweep points")
    ps = np.array([pt.sample.p for pt in pts])
    k = np.array([pt.failures for pt in pts])
    n = np.array([pt.sample.trials for pt in pts])
    if reference is None:
        ref_k, ref_n = None, None
        ref = ps
    else:
        by_p = {pt.sample.p: pt for pt in reference}
        if any(p not in by_p for p in ps):
            return Crossing(None, (None, None), False, "reference curve lacks matching p values")
        ref_k = np.array([by_p[p].failures for p in ps])
        ref_n = np.array([by_p[p].sample.trials for p in ps])
        ref = ref_k / ref_n
    est = _crossing(ps, k / n, ref)
    if est is None:
        side = "below" if np.all(k / n < ref) else "above" if np.all(k / n >= ref) else "around"
        return Crossing(None, (None, None), False, f"no crossing: sweep lies entirely {side} the crossing")
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        kb = rng.binomial(n, k / n)
        rb = ref if ref_k is None else rng.binomial(ref_n, ref_k / ref_n) / ref_n
        c = _crossing(ps, kb / n, rb)
        if c is not None:
            boots.append(c)
    if boots:
        lo, hi = float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5))
    else:
        lo = hi = None
    return Crossing(est, (lo, hi), True)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def points_to_csv(points: Sequence[RatePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for pt in points:
        w.writerow(pt.row())
    return buf.getvalue()


def read_points(path: str) -> list[RatePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        trials = int(r["trials"])
        rate = float(r["rate"])
        s = LevelRateSample(int(r["level"]), float(r["p"]), rate, float(r["ci_lo"]), float(r["ci_hi"]),
                            trials, r["mode"], int(r["dim"]))
        out.append(RatePoint(s, int(round(rate * trials)), int(r["depth"])))
    return out


def summarize(points: Sequence[RatePoint], config: Optional[ExperimentConfig] = None) -> dict:
    modes = sorted({pt.sample.mode for pt in points}, key=lambda m: MODES.index(m) if m in MODES else 99)
    out: dict = {"modes": {}}
    if config is not None:
        out["config"] = config.to_dict()
    for mode in modes:
        pts = [pt for pt in points if pt.sample.mode == mode]
        samples = [pt.sample for pt in pts]
        entry: dict = {}
        try:
            fit = fit_recursion(samples)
            entry["fit"] = {"C": fit.params.C, "r": fit.params.r, "exponent": fit.exponent,
                            "threshold": fit.threshold, "pairs": fit.n_pairs}
        except FitError as exc:
            entry["fit"] = {"error": str(exc)}
        try:
            C = fit_effective_C(samples, 1)
            entry["level1_C"] = C
            entry["level1_threshold"] = 1.0 / C
        except FitError as exc:
            entry["level1_C"] = None
            entry["level1_threshold"] = None
            entry["level1_note"] = str(exc)
        entry["pseudo_threshold"] = pseudo_threshold(pts, 1).to_dict()
        levels = sorted({s.level for s in samples})
        if len(levels) >= 2 and 1 in levels and 2 in levels:
            ref = [pt for pt in pts if pt.sample.level == 1]
            entry["pseudo_threshold_2_vs_1"] = pseudo_threshold(pts, 2, reference=ref).to_dict()
        entry["depth"] = {str(l): max(pt.depth for pt in pts if pt.sample.level == l) for l in levels}
        if config is not None and mode != "baseline":
            lay = build_layout(MODE_DIM[mode], max(levels), 2, config.N_o, config.N_t)
            entry["layout"] = {"N": lay.N, "T": lay.T, "slots": lay.slots}
            entry["overhead"] = [asdict(overhead(L, lay.N, 2 * config.repeats * (config.verification_rounds + 1),
                                                 lay.T, MODE_DIM[mode])) | {"L": L} for L in range(0, 6)]
        out["modes"][mode] = entry
    return out


def run_experiment(config: ExperimentConfig, output: Optional[str] = None) -> dict:
    """Run every (mode, level, p) point and write ``rates.csv`` and ``summary.json``."""
    out_dir = output or config.output
    points = []
    for mode in config.modes:
        for level in config.levels:
            for p in config.p:
                points.append(estimate_level_rate(config, level, p, mode))
    summary = summarize(points, config)
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "rates.csv")
        with open(csv_path, "w") as fh:
            fh.write(points_to_csv(points))
        json_path = os.path.join(out_dir, "summary.json")
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir!r}: {exc}") from exc
    return {"points": points, "summary": summary, "csv": csv_path, "json": json_path}
