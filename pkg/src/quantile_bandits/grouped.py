"""Two-step and multi-step identification over groups with infinitely many arms.

The two-step sampler requests a fixed number of arms per group (enough for
each group's sample quantile to sandwich the reservoir quantile band with high
probability) and hands the resulting finite groups to the elimination loop.
The multi-step variant repeats this with a schedule of shrinking tolerances,
permanently dropping groups the subroutine eliminated and discarding all
previously requested arms between epochs.

This module also houses the oracle-side analysis helpers: the hidden-index
partition of a sampled group, reservoir-level lower bounds on the realized
gaps, and the pull-count bound evaluators built from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elimination import FiniteGroup, multiset_quantile, run_elimination
from .instances import BanditInstance, Reservoir, RewardEnv, relaxed_success_set

_INT_TOL = 1e-9


@dataclass(frozen=True)
class RunParams:
    """Tolerances for one identification run.

    ``eps`` relaxes the quantile level, ``gap`` the quantile value, ``delta``
    is the failure budget.  Requires delta < eps < min(alpha, 1 - alpha) and
    gap > 0.
    """

    alpha: float
    eps: float
    gap: float
    delta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.delta < self.eps < min(self.alpha, 1.0 - self.alpha):
            raise ValueError(
                f"need delta < eps < min(alpha, 1-alpha); got delta={self.delta}, eps={self.eps}, alpha={self.alpha}")
        if self.gap <= 0.0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def required_arm_count(eps: float, delta: float, num_groups: int) -> int:
    """Arms to request per group: ceil(log(2 * num_groups / delta) / (2 eps^2))."""
    if eps <= 0.0 or not 0.0 < delta < 1.0 or num_groups < 1:
        raise ValueError("need eps > 0, delta in (0, 1), num_groups >= 1")
    return math.ceil(math.log(2.0 * num_groups / delta) / (2.0 * eps * eps))


def quantile_sandwiched(spec: Reservoir, sampled_means, alpha: float, eps: float) -> bool:
    """Whether the sample (1-alpha)-quantile lies inside the reservoir's
    quantile band at levels (1 - alpha -/+ eps)."""
    q = multiset_quantile(sampled_means, alpha)
    return spec.quantile(1.0 - alpha - eps) <= q <= spec.quantile(1.0 - alpha + eps)


@dataclass(frozen=True)
class Partition:
    """Hidden-index partition of sampled arms into quantile-level buckets.

    Bucket 0 is [0, b_1); buckets 1..m-1 are [b_i, b_{i+1}); bucket m is
    [b_m, 1].  Every interval has width at most eps and the level 1 - alpha
    sits on a boundary, so bucket membership pins an arm's position relative
    to the group quantile up to eps.
    """

    bucket_count: int
    boundaries: np.ndarray
    buckets: dict[str, list[np.ndarray]]

    def bucket_sizes(self, group_id: str) -> np.ndarray:
        return np.array([b.size for b in self.buckets[group_id]], dtype=np.int64)

    def max_bucket_size(self) -> int:
        return max(int(self.bucket_sizes(g).max()) for g in self.buckets)


def _bucket_geometry(eps: float, alpha: float) -> tuple[int, np.ndarray, int]:
    """Bucket count m, boundaries b_1..b_m, and the quantile-level index
    floor((1 - alpha) / eps) shared by the partition and the gap bounds."""
    level_steps = math.floor((1.0 - alpha) / eps + _INT_TOL)
    m = math.ceil(alpha / eps + level_steps - _INT_TOL)
    b = (1.0 - alpha) - level_steps * eps + np.arange(m) * eps
    return m, np.clip(b, 0.0, 1.0), level_steps


def build_partition(eps: float, alpha: float, indices_by_group: dict[str, np.ndarray]) -> Partition:
    """Assign sampled arms to buckets by their hidden indices.

    Parameters
    ----------
    indices_by_group : dict
        Group id -> array of hidden indices (positions in [0, 1]) of the
        sampled arms; the returned buckets hold positional indices into each
        group's array.
    """
    if not 0.0 < eps < min(alpha, 1.0 - alpha):
        raise ValueError(f"eps must lie in (0, min(alpha, 1-alpha)), got {eps}")
    m, bounds, _ = _bucket_geometry(eps, alpha)
    edges = np.concatenate(([0.0], bounds, [1.0 + 1e-15]))  # upper edge closed at 1
    buckets: dict[str, list[np.ndarray]] = {}
    for gid, js in indices_by_group.items():
        js = np.asarray(js, dtype=float)
        which = np.clip(np.searchsorted(edges, js, side="right") - 1, 0, m)
        buckets[gid] = [np.flatnonzero(which == i) for i in range(m + 1)]
    return Partition(m, bounds, buckets)


@dataclass(frozen=True)
class ReservoirGapBounds:
    """Reservoir-level lower bounds on the gaps realized by sampled groups.

    Whenever every group's sample quantile is sandwiched, the realized group
    gap dominates ``group_bound``, the realized uniqueness gap dominates
    ``uniqueness_bound``, and every arm whose hidden index falls in bucket i
    has arm gap at least ``bucket_bounds[gid][i]``.  ``combined`` folds in the
    run's quantile slack, mirroring the per-arm overall gap.
    """

    bucket_count: int
    boundaries: np.ndarray
    best_group_relaxed: str
    group_bound: dict[str, float]
    uniqueness_bound: float
    bucket_bounds: dict[str, np.ndarray]
    combined: dict[str, np.ndarray]


def reservoir_gap_bounds(instance: BanditInstance, params: RunParams) -> ReservoirGapBounds:
    """Evaluate the gap lower bounds exactly from the reservoir quantiles."""
    a, eps = params.alpha, params.eps
    m, bounds, level_steps = _bucket_geometry(eps, a)
    low = {gid: res.quantile(1.0 - a - eps) for gid, res in instance.groups}
    high = {gid: res.quantile(1.0 - a + eps) for gid, res in instance.groups}
    best_low = max(low.values())
    best_high = max(high.values())
    relaxed_best = min(gid for gid in instance.group_ids if high[gid] == best_high)
    others_high = [high[gid] for gid in instance.group_ids if gid != relaxed_best]
    uniq = best_low - max(others_high) if others_high else math.inf
    group_bound = {gid: best_low - high[gid] for gid in instance.group_ids}

    bucket_bounds: dict[str, np.ndarray] = {}
    combined: dict[str, np.ndarray] = {}
    for gid, res in instance.groups:
        vals = np.zeros(m + 1)
        for i in range(m + 1):
            if i < level_steps - 1:
                vals[i] = low[gid] - res.quantile(float(bounds[i]))  # b_{i+1} has index i
            elif i > level_steps + 1:
                vals[i] = res.quantile(float(bounds[i - 1])) - high[gid]
        bucket_bounds[gid] = vals
        combined[gid] = np.maximum(params.gap, np.maximum(group_bound[gid], np.maximum(uniq, vals)))
    return ReservoirGapBounds(m, bounds, relaxed_best, group_bound, uniq, bucket_bounds, combined)


def pull_bound_grouped(instance: BanditInstance, params: RunParams, c: float = 1.0) -> float:
    """Instance-dependent pull bound: sum over groups and buckets 1..m of
    (c / gap^2) * log((G*N/delta) * log(max(1/gap^2, e))) * 3*eps*N."""
    gapb = reservoir_gap_bounds(instance, params)
    num_groups = len(instance.groups)
    n_per = required_arm_count(params.eps, params.delta, num_groups)
    total = 0.0
    for gid in instance.group_ids:
        g = gapb.combined[gid][1:]  # buckets 1..m
        inner = np.log(np.maximum(1.0 / g**2, math.e))
        total += float(np.sum((c / g**2) * np.log((num_groups * n_per / params.delta) * inner)))
    return total * 3.0 * params.eps * n_per


def pull_bound_worst_case(params: RunParams, num_groups: int, d: float = 1.0) -> float:
    """Weakened worst-case bound d * G / (eps^2 gap^2) * polylog terms."""
    lg = math.log(num_groups / params.delta)
    loglog = max(math.log(max(math.log(1.0 / params.gap), 1.0)), 0.0) if params.gap < 1.0 else 0.0
    return d * (num_groups / (params.eps**2 * params.gap**2)) * (lg * lg + lg * loglog)


@dataclass
class TrialResult:
    """Outcome and telemetry of one identification trial."""

    instance_id: str
    alpha: float
    eps: float
    gap: float
    delta: float
    chosen_group: str
    success: bool
    total_pulls: int
    rounds: int
    event_a: bool
    max_bucket_size: int
    epoch_pulls: tuple[int, ...]
    event_b: bool | None = None
    equal_pull_ok: bool = True
    shortcut_consistent: bool = True
    bounds_valid: bool | None = None
    stop_pull_violations: int | None = None
    best_group_retained: bool | None = None
    epochs_run: int = 1
    samples: dict[str, tuple[np.ndarray, np.ndarray]] | None = None
    round_log: list | None = None
    pull_log: list | None = None

    def csv_row(self) -> str:
        epochs = ";".join(str(p) for p in self.epoch_pulls)
        return (f"{self.instance_id},{self.alpha:.10g},{self.eps:.10g},{self.gap:.10g},"
                f"{self.delta:.10g},{self.chosen_group},{int(self.success)},"
                f"{self.total_pulls},{epochs}")

    CSV_HEADER = "instance_id,alpha,eps,gap,delta,chosen_group,success,total_pulls,epoch_pulls"


def _sample_finite_groups(instance: BanditInstance, group_ids: list[str], count: int,
                          rng: np.random.Generator):
    """Request ``count`` fresh arms from each listed group.

    Returns finite groups with arm ids 0..n-1 in group order, the flat array
    of true means, and per-group hidden-index/mean arrays for the oracles.
    """
    groups: list[FiniteGroup] = []
    means: list[np.ndarray] = []
    samples: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    start = 0
    for gid in group_ids:
        res = instance.reservoir(gid)
        js = rng.random(count)
        mu = res.quantile_many(js)
        groups.append(FiniteGroup(gid, tuple(range(start, start + count))))
        means.append(mu)
        samples[gid] = (js, mu)
        start += count
    return groups, np.concatenate(means), samples


def _epoch_oracles(instance: BanditInstance, samples, alpha: float, eps: float):
    """Event-A flag and max bucket size for one epoch's samples."""
    sandwiched = all(
        quantile_sandwiched(instance.reservoir(gid), mu, alpha, eps)
        for gid, (_, mu) in samples.items()
    )
    part = build_partition(eps, alpha, {gid: js for gid, (js, _) in samples.items()})
    return sandwiched, part.max_bucket_size()


def _finite_success(groups, true_means, alpha: float, slack: float, chosen: str) -> bool:
    """Whether the chosen finite group's quantile is within ``slack`` of best."""
    quants = {g.group_id: multiset_quantile(true_means[list(g.arm_ids)], alpha) for g in groups}
    return quants[chosen] >= max(quants.values()) - slack


def run_two_step(instance: BanditInstance, params: RunParams, rng: np.random.Generator,
                 noiseless: bool = False, oracle_checks: bool = False,
                 log_rounds: bool = False, log_pulls: bool = False,
                 keep_samples: bool = False) -> TrialResult:
    """Request arms once, run the elimination subroutine, map back to the group.

    The success flag is scored against the exact reservoir oracle at the run's
    own (eps, gap); oracle checks additionally score the finite-sample event
    and the elimination-internals invariants.
    """
    result = run_multistep(instance, [params.eps], [params.gap], params.delta, rng,
                           alpha=params.alpha, noiseless=noiseless,
                           oracle_checks=oracle_checks, log_rounds=log_rounds,
                           log_pulls=log_pulls, keep_samples=keep_samples)
    return result


def run_multistep(instance: BanditInstance, eps_schedule, gap_schedule, delta: float,
                  rng: np.random.Generator, alpha: float | None = None,
                  noiseless: bool = False, oracle_checks: bool = False,
                  log_rounds: bool = False, log_pulls: bool = False,
                  keep_samples: bool = False) -> TrialResult:
    """Run the epoch schedule of shrinking tolerances.

    Each epoch requests fresh arms for the surviving groups, runs the
    elimination subroutine at that epoch's quantile slack, and permanently
    drops the groups it eliminated.  A schedule of length one is exactly the
    two-step algorithm.
    """
    a = instance.alpha if alpha is None else alpha
    eps_schedule = [float(e) for e in eps_schedule]
    gap_schedule = [float(g) for g in gap_schedule]
    if len(eps_schedule) != len(gap_schedule) or not eps_schedule:
        raise ValueError("eps and gap schedules must be equally long and nonempty")
    for k, (e, g) in enumerate(zip(eps_schedule, gap_schedule)):
        if not delta < e < min(a, 1.0 - a):
            raise ValueError(f"schedule[{k}]: need delta < eps < min(alpha, 1-alpha), got eps={e}")
        if g <= 0.0:
            raise ValueError(f"schedule[{k}]: gap must be positive, got {g}")

    num_groups = len(instance.groups)
    surviving = list(instance.group_ids)
    epoch_pulls: list[int] = []
    rounds = 0
    event_a = True
    event_b: bool | None = True if oracle_checks else None
    max_bucket = 0
    chosen = surviving[0]
    equal_pull_ok = True
    shortcut_ok = True
    bounds_valid: bool | None = True if oracle_checks else None
    stop_viol: int | None = 0 if oracle_checks else None
    retained: bool | None = True if oracle_checks else None
    kept_samples: dict[str, tuple[np.ndarray, np.ndarray]] | None = None
    round_log = [] if log_rounds else None
    pull_log = [] if log_pulls else None
    epochs_run = 0

    for k, (eps_k, gap_k) in enumerate(zip(eps_schedule, gap_schedule)):
        n_per = required_arm_count(eps_k, delta, num_groups)
        groups, means, samples = _sample_finite_groups(instance, surviving, n_per, rng)
        sandwiched, bucket = _epoch_oracles(instance, samples, a, eps_k)
        event_a = event_a and sandwiched
        max_bucket = max(max_bucket, bucket)
        if keep_samples:
            kept_samples = samples
        env = RewardEnv(means, instance.family, rng, noiseless=noiseless)
        res = run_elimination(groups, a, gap_k, delta, env, rng=rng,
                              true_means=means if oracle_checks else None,
                              log_rounds=log_rounds, log_pulls=log_pulls)
        epochs_run += 1
        epoch_pulls.append(res.total_pulls)
        rounds += res.rounds
        chosen = res.chosen
        equal_pull_ok = equal_pull_ok and res.equal_pull_ok
        shortcut_ok = shortcut_ok and res.shortcut_consistent
        if oracle_checks:
            bounds_valid = bounds_valid and bool(res.bounds_valid)
            stop_viol += int(res.stop_pull_violations)
            retained = retained and bool(res.best_group_retained)
            event_b = event_b and _finite_success(groups, means, a, gap_k, res.chosen)
        if log_rounds:
            round_log.append(res.round_log)
        if log_pulls:
            pull_log.append(res.pull_log)
        surviving = [gid for gid in surviving if gid in res.final_candidates]
        if len(surviving) == 1:
            break

    success = chosen in relaxed_success_set(instance, eps_schedule[-1], gap_schedule[-1], alpha=a)
    return TrialResult(
        instance_id=instance.name, alpha=a, eps=eps_schedule[-1], gap=gap_schedule[-1],
        delta=delta, chosen_group=chosen, success=success,
        total_pulls=sum(epoch_pulls), rounds=rounds, event_a=event_a,
        max_bucket_size=max_bucket, epoch_pulls=tuple(epoch_pulls), event_b=event_b,
        equal_pull_ok=equal_pull_ok, shortcut_consistent=shortcut_ok,
        bounds_valid=bounds_valid, stop_pull_violations=stop_viol,
        best_group_retained=retained, epochs_run=epochs_run, samples=kept_samples,
        round_log=round_log, pull_log=pull_log,
    )


def epochs_until_elimination(instance: BanditInstance, eps_schedule, gap_schedule,
                             delta: float, alpha: float | None = None) -> dict[str, int]:
    """Earliest epoch whose reservoir-level group gap bound exceeds that
    epoch's quantile slack (the full schedule length when none does)."""
    a = instance.alpha if alpha is None else alpha
    total = len(list(eps_schedule))
    out: dict[str, int] = {}
    for gid in instance.group_ids:
        out[gid] = total
        for k, (e, g) in enumerate(zip(eps_schedule, gap_schedule), start=1):
            params = RunParams(a, float(e), float(g), delta)
            if reservoir_gap_bounds(instance, params).group_bound[gid] > float(g):
                out[gid] = k
                break
    return out


def pull_bound_multistep(instance: BanditInstance, eps_schedule, gap_schedule,
                         delta: float, c: float = 1.0, alpha: float | None = None) -> float:
    """Schedule-aware pull bound: each group pays the per-epoch grouped bound
    only up to the epoch where its reservoir gap bound exceeds the slack."""
    a = instance.alpha if alpha is None else alpha
    kmax = epochs_until_elimination(instance, eps_schedule, gap_schedule, delta, alpha=a)
    num_groups = len(instance.groups)
    total = 0.0
    for k, (e, g) in enumerate(zip(eps_schedule, gap_schedule), start=1):
        params = RunParams(a, float(e), float(g), delta)
        gapb = reservoir_gap_bounds(instance, params)
        n_k = required_arm_count(float(e), delta, num_groups)
        for gid in instance.group_ids:
            if k > kmax[gid]:
                continue
            gaps = gapb.combined[gid][1:]
            inner = np.log(np.maximum(1.0 / gaps**2, math.e))
            total += float(np.sum((c / gaps**2) * np.log((num_groups * n_k / delta) * inner))) \
                * 3.0 * float(e) * n_k
    return total
