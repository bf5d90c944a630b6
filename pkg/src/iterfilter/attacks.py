"""Injected adversarial raters and the robustness measurements around them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel
from .engine import solve
from .model import SolveConfig, SparseRatings, from_arrays

ATTACK_KINDS = ("random_rater", "spammer")
MATCH_BASE = "match-base-distribution"
# The five MovieLens star levels on the normalized scale.
RATING_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class AttackScenario:
    """Population of injected raters.

    ``items_per_attacker`` is a fixed count or ``"match-base-distribution"``,
    in which case each attacker's count is drawn from the honest raters'
    counts. ``preferred_items`` (spammers only) fixes each spammer's target,
    cycling through the list; otherwise targets are uniform at random.
    """

    kind: str = "random_rater"
    count: int = 237
    items_per_attacker: object = MATCH_BASE
    seed: int = 0
    preferred_items: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if int(self.count) < 1:
            raise ValueError(f"attacker count must be at least 1, got {self.count}")
        if self.items_per_attacker != MATCH_BASE and int(self.items_per_attacker) < 1:
            raise ValueError("items_per_attacker must be at least 1")
        if self.preferred_items is not None:
            if self.kind != "spammer":
                raise ValueError("preferred_items only applies to spammers")
            object.__setattr__(self, "preferred_items", tuple(int(j) for j in self.preferred_items))

    def validate(self, base: SparseRatings) -> None:
        if self.items_per_attacker != MATCH_BASE and int(self.items_per_attacker) > base.n_items:
            raise ValueError(f"items_per_attacker={self.items_per_attacker} exceeds the "
                             f"{base.n_items} available items")
        if self.preferred_items and max(self.preferred_items) >= base.n_items:
            raise ValueError("preferred item index out of range")


def write_scenario(scenario: AttackScenario, path) -> None:
    """Flat ``key = value`` file."""
    pref = "random" if scenario.preferred_items is None else ",".join(map(str, scenario.preferred_items))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"kind = {scenario.kind}\n")
        fh.write(f"count = {scenario.count}\n")
        fh.write(f"items_per_attacker = {scenario.items_per_attacker}\n")
        fh.write(f"seed = {scenario.seed}\n")
        fh.write(f"preferred = {pref}\n")


def read_scenario(path) -> AttackScenario:
    kv = {}
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{no}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            kv[k] = v
    unknown = set(kv) - {"kind", "count", "items_per_attacker", "seed", "preferred"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    ipa = kv.get("items_per_attacker", MATCH_BASE)
    pref = kv.get("preferred", "random")
    return AttackScenario(
        kind=kv.get("kind", "random_rater"),
        count=int(kv.get("count", 237)),
        items_per_attacker=ipa if ipa == MATCH_BASE else int(ipa),
        seed=int(kv.get("seed", 0)),
        preferred_items=None if pref == "random" else tuple(int(x) for x in pref.split(",")),
    )


def generate_attackers(base: SparseRatings, scenario: AttackScenario) -> SparseRatings:
    """Attacker ratings over ``base``'s items, rater indices offset past ``base``.

    The result has ``base.n_raters + scenario.count`` rater slots; only the
    trailing ``count`` are populated.
    """
    scenario.validate(base)
    rng = np.random.default_rng(scenario.seed)
    n = base.n_items
    honest_m = base.m[base.rater_present]
    rows, cols, vals = [], [], []
    for a in range(scenario.count):
        if scenario.items_per_attacker == MATCH_BASE:
            k = int(min(rng.choice(honest_m), n))
        else:
            k = int(scenario.items_per_attacker)
        items = np.sort(rng.choice(n, size=k, replace=False))
        if scenario.kind == "random_rater":
            v = rng.choice(RATING_LEVELS, size=k)
        else:
            if scenario.preferred_items:
                target = scenario.preferred_items[a % len(scenario.preferred_items)]
                if target not in items:
                    items[rng.integers(k)] = target
                    items = np.sort(items)
            else:
                target = int(items[rng.integers(k)])
            v = np.where(items == target, 1.0, 0.0)
        rows.append(np.full(k, base.n_raters + a))
        cols.append(items)
        vals.append(v)
    ids = None
    if base.rater_ids is not None:
        ids = base.rater_ids + tuple(f"attacker_{a}" for a in range(scenario.count))
    return from_arrays(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                       base.n_raters + scenario.count, n, base.scale, ids, base.item_ids)


def merge(base: SparseRatings, attackers: SparseRatings):
    """Union of honest and attacker ratings.

    Returns ``(merged, is_attacker)`` where ``is_attacker`` labels every rater
    slot of ``merged``.
    """
    if attackers.n_items != base.n_items:
        raise ValueError("attackers must rate the base item universe")
    if attackers.nnz and attackers.rater.min() < base.n_raters:
        raise ValueError(f"attacker rater index {int(attackers.rater.min())} collides with "
                         f"the {base.n_raters} base raters")
    n = max(base.n_raters, attackers.n_raters)
    merged = from_arrays(np.concatenate([base.rater, attackers.rater]),
                         np.concatenate([base.item, attackers.item]),
                         np.concatenate([base.value, attackers.value]),
                         n, base.n_items, base.scale,
                         attackers.rater_ids if n > base.n_raters else base.rater_ids, base.item_ids)
    is_attacker = np.zeros(n, dtype=bool)
    is_attacker[base.n_raters:] = True
    return merged, is_attacker


def average_baseline(ratings: SparseRatings) -> np.ndarray:
    """Plain per-item mean of the evaluations (``nan`` for unrated items)."""
    total = np.bincount(ratings.item, weights=ratings.value, minlength=ratings.n_items)
    with np.errstate(invalid="ignore", divide="ignore"):
        return total / ratings.item_counts


@dataclass(frozen=True)
class PerturbationMetrics:
    l1_diff: float
    l1_diff_raw: float
    l1_diff_average_baseline: Optional[float] = None
    l1_diff_average_baseline_raw: Optional[float] = None

    @property
    def ratio(self) -> float:
        """Filtered over average perturbation; ``nan`` if the baseline did not move."""
        b = self.l1_diff_average_baseline
        if b is None or b <= 0:
            return float("nan")
        return self.l1_diff / b


def perturbation(r_before, r_after, scale=(0.0, 1.0)) -> tuple:
    """1-norm change ``(normalized, raw)`` of a reputation vector.

    Items unrated in either vector are skipped.
    """
    a = np.asarray(r_before, dtype=np.float64)
    b = np.asarray(r_after, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    l1 = float(np.nansum(np.abs(a - b)))
    return l1, l1 * (scale[1] - scale[0])


@dataclass(frozen=True, eq=False)
class SeparationSnapshot:
    label: str
    iteration: int
    t: np.ndarray
    bin_edges: np.ndarray
    honest_density: np.ndarray
    attacker_density: Optional[np.ndarray]
    mean_honest: float
    sd_honest: float
    mean_attacker: Optional[float]
    sd_attacker: Optional[float]
    separation: Optional[float]


@dataclass(frozen=True, eq=False)
class TrustSeparation:
    snapshots: tuple
    report: object = field(repr=False, default=None)

    def __getitem__(self, label) -> SeparationSnapshot:
        for s in self.snapshots:
            if s.label == label:
                return s
        raise KeyError(label)


def _snapshot(label, k, t, is_attacker, bins):
    present = ~np.isnan(t)
    hi = float(np.nanmax(t)) if present.any() else 1.0
    edges = np.linspace(0.0, hi if hi > 0 else 1.0, bins + 1)
    h = t[present & ~is_attacker]
    a = t[present & is_attacker]
    hd = np.histogram(h, edges, density=True)[0] if h.size else np.zeros(bins)
    if a.size == 0:
        return SeparationSnapshot(label, k, t, edges, hd, None, float(h.mean()), float(h.std(ddof=1)) if h.size > 1 else 0.0,
                                  None, None, None)
    ad = np.histogram(a, edges, density=True)[0]
    sh = float(h.std(ddof=1)) if h.size > 1 else 0.0
    sa = float(a.std(ddof=1)) if a.size > 1 else 0.0
    dof = h.size + a.size - 2
    pooled = np.sqrt(((h.size - 1) * sh ** 2 + (a.size - 1) * sa ** 2) / dof) if dof > 0 else 0.0
    sep = (h.mean() - a.mean()) / pooled if pooled > 0 else float("nan")
    return SeparationSnapshot(label, k, t, edges, hd, ad, float(h.mean()), sh, float(a.mean()), sa, float(sep))


def trust_separation_trace(merged: SparseRatings, is_attacker, config: SolveConfig = SolveConfig(),
                           bins: int = 50) -> TrustSeparation:
    """Trust densities of honest raters and attackers after one pass, two
    passes and at convergence, with the standardized mean gap
    ``(mean_honest - mean_attacker) / pooled_sd`` for each."""
    is_attacker = np.asarray(is_attacker, dtype=bool)
    if is_attacker.shape != (merged.n_raters,):
        raise ValueError("labels must cover every rater")
    snaps = []

    def grab(k, r, d, trust):
        if k in (1, 2):
            snaps.append(_snapshot(f"iter{k}", k, kernel.trust_vector(d), is_attacker, bins))

    report = solve(merged, config, callback=grab)
    snaps.append(_snapshot("converged", report.iterations_used, report.t, is_attacker, bins))
    return TrustSeparation(tuple(snaps), report)


@dataclass(frozen=True, eq=False)
class AttackResult:
    scenario: AttackScenario
    metrics: PerturbationMetrics
    base_report: object
    merged_report: object
    r_average_before: np.ndarray
    r_average_after: np.ndarray
    separation: Optional[TrustSeparation] = None
    is_attacker: Optional[np.ndarray] = None


def run_attack(base: SparseRatings, scenario: AttackScenario, config: SolveConfig = SolveConfig(),
               base_report=None, with_separation: bool = True, bins: int = 50) -> AttackResult:
    """generate -> merge -> solve on both -> compare against the plain average."""
    if base_report is None:
        base_report = solve(base, config)
    attackers = generate_attackers(base, scenario)
    merged, labels = merge(base, attackers)
    if with_separation:
        sep = trust_separation_trace(merged, labels, config, bins)
        merged_report = sep.report
    else:
        sep = None
        merged_report = solve(merged, config)
    avg0 = average_baseline(base)
    avg1 = average_baseline(merged)
    f, f_raw = perturbation(base_report.r, merged_report.r, base.scale)
    a, a_raw = perturbation(avg0, avg1, base.scale)
    return AttackResult(scenario, PerturbationMetrics(f, f_raw, a, a_raw), base_report, merged_report,
                        avg0, avg1, sep, labels)


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_perturbation_csv(metrics: PerturbationMetrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "l1_normalized", "l1_raw", "ratio"])
        w.writerow(["filtered", _fmt(metrics.l1_diff), _fmt(metrics.l1_diff_raw), _fmt(metrics.ratio)])
        w.writerow(["average", _fmt(metrics.l1_diff_average_baseline),
                    _fmt(metrics.l1_diff_average_baseline_raw), _fmt(1.0)])


def write_separation_csv(sep: TrustSeparation, path) -> None:
    """One row per (snapshot, group, bin)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snapshot", "group", "bin_lo", "bin_hi", "density", "mean", "sd", "separation"])
        for s in sep.snapshots:
            groups = [("honest", s.honest_density, s.mean_honest, s.sd_honest)]
            if s.attacker_density is not None:
                groups.append(("attacker", s.attacker_density, s.mean_attacker, s.sd_attacker))
            for name, dens, mean, sd in groups:
                for lo, hi, v in zip(s.bin_edges[:-1], s.bin_edges[1:], dens):
                    w.writerow([s.label, name, _fmt(lo), _fmt(hi), _fmt(v), _fmt(mean), _fmt(sd),
                                _fmt(s.separation)])
