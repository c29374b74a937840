"""Bandit instances: reward families, reservoir distributions, and exact oracles.

A bandit instance is a finite collection of disjoint groups, each holding an
effectively infinite pool of arms.  Requesting an arm from a group draws a
hidden index j uniformly from [0, 1]; the arm's mean reward is the reservoir
quantile at j.  Algorithms observe only rewards; the hidden index and the true
mean stay on the oracle side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MASS_TOL = 1e-12

_FAMILIES = ("bernoulli", "gaussian")


@dataclass(frozen=True)
class RewardFamily:
    """Reward distribution family, uniquely parameterized by its mean.

    ``bernoulli`` rewards are in {0, 1}; ``gaussian`` rewards are normal with
    fixed variance ``sigma2`` (at most 1, so the sub-Gaussian confidence
    machinery applies unchanged).
    """

    kind: str
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown reward family {self.kind!r}; expected one of {_FAMILIES}")
        if self.kind == "gaussian" and not (0.0 < self.sigma2 <= 1.0):
            raise ValueError(f"gaussian sigma2 must lie in (0, 1], got {self.sigma2}")


class Reservoir:
    """Distribution over arm means within one group, queryable by CDF and quantile."""

    def cdf(self, tau: float) -> float:
        raise NotImplementedError

    def quantile(self, p: float) -> float:
        """Return inf{mu : F(mu) >= p} for p in [0, 1]."""
        raise NotImplementedError

    def quantile_many(self, ps: np.ndarray) -> np.ndarray:
        return np.array([self.quantile(float(p)) for p in np.asarray(ps).ravel()])

    @property
    def max_mean(self) -> float:
        return self.quantile(1.0)


@dataclass(frozen=True)
class DiscreteReservoir(Reservoir):
    """Finite-atom reservoir: ordered support means with point masses.

    Parameters
    ----------
    means : tuple of float
        Strictly increasing atom locations in [0, 1].
    masses : tuple of float
        Atom probabilities in (0, 1], summing to 1 within ``MASS_TOL``.
    """

    means: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.means) == 0 or len(self.means) != len(self.masses):
            raise ValueError("reservoir needs equally many means and masses, at least one atom")
        mu = np.asarray(self.means, dtype=float)
        w = np.asarray(self.masses, dtype=float)
        if np.any(mu < 0.0) or np.any(mu > 1.0):
            raise ValueError("reservoir means must lie in [0, 1]")
        if np.any(np.diff(mu) <= 0.0):
            raise ValueError("reservoir means must be strictly increasing")
        if np.any(w <= 0.0) or np.any(w > 1.0):
            raise ValueError("reservoir masses must lie in (0, 1]")
        if abs(float(w.sum()) - 1.0) > MASS_TOL:
            raise ValueError(f"reservoir masses must sum to 1 within {MASS_TOL}, got {w.sum()!r}")
        cum = np.cumsum(w)
        cum[-1] = 1.0  # snap accumulated rounding so quantile(1.0) is safe
        object.__setattr__(self, "_means_arr", mu)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "DiscreteReservoir":
        return cls(tuple(m for m, _ in atoms), tuple(w for _, w in atoms))

    @classmethod
    def point_mass(cls, mean: float) -> "DiscreteReservoir":
        return cls((float(mean),), (1.0,))

    def cdf(self, tau: float) -> float:
        if tau < self._means_arr[0]:
            return 0.0
        return float(self._cum[np.searchsorted(self._means_arr, tau, side="right") - 1])

    def quantile(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"quantile level must lie in [0, 1], got {p}")
        idx = int(np.searchsorted(self._cum, p, side="left"))
        return float(self._means_arr[min(idx, len(self._means_arr) - 1)])

    def quantile_many(self, ps: np.ndarray) -> np.ndarray:
        ps = np.asarray(ps, dtype=float)
        if np.any(ps < 0.0) or np.any(ps > 1.0):
            raise ValueError("quantile levels must lie in [0, 1]")
        idx = np.minimum(np.searchsorted(self._cum, ps, side="left"), len(self._means_arr) - 1)
        return self._means_arr[idx]

    def atoms(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.means, self.masses))


@dataclass(frozen=True)
class PiecewiseLinearReservoir(Reservoir):
    """Continuous reservoir with a piecewise-linear CDF on a bounded support.

    ``xs`` are strictly increasing breakpoints in [0, 1]; ``ps`` are the CDF
    values at those breakpoints (nondecreasing, ending at 1).  Below ``xs[0]``
    the CDF is 0; an initial atom can be encoded by ``ps[0] > 0``.
    """

    xs: tuple[float, ...]
    ps: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.xs) < 2 or len(self.xs) != len(self.ps):
            raise ValueError("piecewise-linear CDF needs >= 2 matching breakpoints")
        x = np.asarray(self.xs, dtype=float)
        p = np.asarray(self.ps, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("support breakpoints must lie in [0, 1]")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("support breakpoints must be strictly increasing")
        if np.any(np.diff(p) < 0.0) or np.any(p < 0.0):
            raise ValueError("CDF values must be nondecreasing and nonnegative")
        if abs(float(p[-1]) - 1.0) > MASS_TOL:
            raise ValueError("CDF must reach 1 at the last breakpoint")
        p = p.copy()
        p[-1] = 1.0
        object.__setattr__(self, "_xs", x)
        object.__setattr__(self, "_ps", p)

    def cdf(self, tau: float) -> float:
        if tau < self._xs[0]:
            return 0.0
        return float(np.interp(tau, self._xs, self._ps))

    def quantile(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"quantile level must lie in [0, 1], got {p}")
        i = int(np.searchsorted(self._ps, p, side="left"))
        i = min(i, len(self._ps) - 1)
        if i == 0 or self._ps[i] <= self._ps[i - 1]:
            return float(self._xs[i])
        lo_p, hi_p = self._ps[i - 1], self._ps[i]
        if p <= lo_p:  # level sits inside a flat stretch; inf is the left edge
            return float(self._xs[i])
        frac = (p - lo_p) / (hi_p - lo_p)
        return float(self._xs[i - 1] + frac * (self._xs[i] - self._xs[i - 1]))


@dataclass(frozen=True)
class BanditInstance:
    """A named collection of disjoint groups with one reservoir each."""

    groups: tuple[tuple[str, Reservoir], ...]
    family: RewardFamily
    alpha: float
    name: str = "instance"

    def __post_init__(self) -> None:
        if len(self.groups) == 0:
            raise ValueError("instance needs at least one group")
        ids = [gid for gid, _ in self.groups]
        if len(set(ids)) != len(ids):
            raise ValueError("group ids must be unique")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(gid for gid, _ in self.groups)

    def reservoir(self, group_id: str) -> Reservoir:
        for gid, res in self.groups:
            if gid == group_id:
                return res
        raise KeyError(group_id)


@dataclass(frozen=True)
class ArmIdentity:
    """Oracle-side record of a requested arm.

    The hidden index and the true mean must never reach algorithm code; they
    exist so oracles can score a run exactly.
    """

    group_id: str
    hidden_index: float
    true_mean: float


def reservoir_quantile(spec: Reservoir, p: float) -> float:
    """Quantile inf{mu : F(mu) >= p} of a reservoir at level p in [0, 1]."""
    return spec.quantile(p)


def sample_arm(spec: Reservoir, rng: np.random.Generator, group_id: str = "") -> ArmIdentity:
    """Draw one arm: hidden index j ~ Uniform[0, 1], mean = quantile at j."""
    j = float(rng.random())
    return ArmIdentity(group_id, j, spec.quantile(j))


def sample_arms(spec: Reservoir, count: int, rng: np.random.Generator, group_id: str = "") -> list[ArmIdentity]:
    """Draw ``count`` arms with a single uniform block for determinism."""
    js = rng.random(count)
    means = spec.quantile_many(js)
    return [ArmIdentity(group_id, float(j), float(m)) for j, m in zip(js, means)]


def sample_reward(family: RewardFamily, mean: float, rng: np.random.Generator, noiseless: bool = False) -> float:
    """One reward draw with the given mean; noiseless mode returns the mean."""
    if not 0.0 <= mean <= 1.0:
        raise ValueError(f"mean must lie in [0, 1], got {mean}")
    if noiseless:
        return float(mean)
    if family.kind == "bernoulli":
        return float(rng.random() < mean)
    return float(rng.normal(mean, math.sqrt(family.sigma2)))


class RewardEnv:
    """Vectorized pull interface over a fixed set of arms.

    Algorithms only ever call :meth:`pull`; the true means are kept private so
    elimination code cannot accidentally peek at them.
    """

    def __init__(self, means: np.ndarray, family: RewardFamily, rng: np.random.Generator,
                 noiseless: bool = False) -> None:
        means = np.asarray(means, dtype=float)
        if means.ndim != 1 or means.size == 0:
            raise ValueError("means must be a nonempty 1-D array")
        if np.any(means < 0.0) or np.any(means > 1.0):
            raise ValueError("arm means must lie in [0, 1]")
        self._means = means
        self._family = family
        self._rng = rng
        self._noiseless = noiseless
        self._sigma = math.sqrt(family.sigma2) if family.kind == "gaussian" else 0.0

    @property
    def num_arms(self) -> int:
        return self._means.size

    def pull(self, arm_indices: np.ndarray) -> np.ndarray:
        """Pull each listed arm once and return the rewards in order."""
        mu = self._means[arm_indices]
        if self._noiseless:
            return mu.copy()
        if self._family.kind == "bernoulli":
            return (self._rng.random(mu.size) < mu).astype(float)
        return self._rng.normal(mu, self._sigma)


def relaxed_success_set(instance: BanditInstance, eps: float, gap: float,
                        alpha: float | None = None) -> set[str]:
    """Ground-truth oracle for the doubly relaxed identification goal.

    A group G succeeds when its quantile at level (1 - alpha + eps) is within
    ``gap`` of the best quantile at level (1 - alpha - eps) across groups.
    """
    a = instance.alpha if alpha is None else alpha
    if not 0.0 < eps < min(a, 1.0 - a):
        raise ValueError(f"eps must lie in (0, min(alpha, 1-alpha)), got {eps}")
    if gap <= 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    lower = {gid: res.quantile(1.0 - a - eps) for gid, res in instance.groups}
    upper = {gid: res.quantile(1.0 - a + eps) for gid, res in instance.groups}
    best_low = max(lower.values())
    return {gid for gid in instance.group_ids if upper[gid] >= best_low - gap}


def instance_from_dict(data: dict, path: str = "instance") -> BanditInstance:
    """Build an instance from a plain-dict config; errors carry field paths."""
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected an object")
    fam = data.get("family", {"kind": "bernoulli"})
    if not isinstance(fam, dict) or "kind" not in fam:
        raise ValueError(f"{path}.family: expected an object with a 'kind'")
    try:
        family = RewardFamily(kind=fam["kind"], sigma2=float(fam.get("sigma2", 1.0)))
    except ValueError as exc:
        raise ValueError(f"{path}.family: {exc}") from None
    if "alpha" not in data:
        raise ValueError(f"{path}.alpha: required")
    raw_groups = data.get("groups")
    if not isinstance(raw_groups, list) or not raw_groups:
        raise ValueError(f"{path}.groups: expected a nonempty list")
    groups: list[tuple[str, Reservoir]] = []
    for i, g in enumerate(raw_groups):
        gpath = f"{path}.groups[{i}]"
        if not isinstance(g, dict) or "id" not in g:
            raise ValueError(f"{gpath}: expected an object with an 'id'")
        try:
            if "atoms" in g:
                res: Reservoir = DiscreteReservoir.from_atoms([(float(m), float(w)) for m, w in g["atoms"]])
            elif "cdf" in g:
                res = PiecewiseLinearReservoir(tuple(map(float, g["cdf"]["x"])), tuple(map(float, g["cdf"]["p"])))
            else:
                raise ValueError("needs 'atoms' or 'cdf'")
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{gpath}: {exc}") from None
        groups.append((str(g["id"]), res))
    try:
        return BanditInstance(tuple(groups), family, float(data["alpha"]), str(data.get("name", "instance")))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def instance_to_dict(instance: BanditInstance) -> dict:
    groups = []
    for gid, res in instance.groups:
        if isinstance(res, DiscreteReservoir):
            groups.append({"id": gid, "atoms": [[m, w] for m, w in res.atoms()]})
        elif isinstance(res, PiecewiseLinearReservoir):
            groups.append({"id": gid, "cdf": {"x": list(res.xs), "p": list(res.ps)}})
        else:
            raise TypeError(f"cannot serialize reservoir type {type(res).__name__}")
    fam: dict = {"kind": instance.family.kind}
    if instance.family.kind == "gaussian":
        fam["sigma2"] = instance.family.sigma2
    return {"name": instance.name, "alpha": instance.alpha, "family": fam, "groups": groups}
