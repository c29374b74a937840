"""Reservoirs, sampling, reward families, and the success-set oracle."""

import math

import numpy as np
import pytest

from quantile_bandits import (
    BanditInstance,
    DiscreteReservoir,
    PiecewiseLinearReservoir,
    RewardFamily,
    instance_from_dict,
    instance_to_dict,
    relaxed_success_set,
    reservoir_quantile,
    sample_arm,
    sample_arms,
    sample_reward,
)


def brute_force_quantile(atoms, p):
    """Independent oracle: scan CDF steps, return the first mean with F >= p."""
    total = 0.0
    for mean, mass in atoms:
        total += mass
        if total >= p - 1e-15:
            return mean
    return atoms[-1][0]


QUARTER = ((0.2, 0.25), (0.4, 0.25), (0.6, 0.25), (0.8, 0.25))
QUARTER_LOW = ((0.1, 0.25), (0.3, 0.25), (0.5, 0.25), (0.7, 0.25))


class TestReservoirQuantile:
    def test_point_mass(self):
        spec = DiscreteReservoir.point_mass(0.5)
        assert reservoir_quantile(spec, 0.3) == 0.5

    def test_four_atoms_median(self):
        spec = DiscreteReservoir.from_atoms(QUARTER)
        assert reservoir_quantile(spec, 0.5) == 0.4
        assert reservoir_quantile(spec, 0.5) == brute_force_quantile(QUARTER, 0.5)

    def test_four_atoms_upper(self):
        spec = DiscreteReservoir.from_atoms(QUARTER_LOW)
        assert reservoir_quantile(spec, 0.75) == 0.5
        assert reservoir_quantile(spec, 0.75) == brute_force_quantile(QUARTER_LOW, 0.75)

    def test_matches_brute_force_on_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            k = int(rng.integers(1, 6))
            means = np.sort(rng.choice(np.linspace(0.05, 0.95, 19), size=k, replace=False))
            w = rng.random(k) + 0.1
            w /= w.sum()
            atoms = tuple(zip(means.tolist(), w.tolist()))
            spec = DiscreteReservoir.from_atoms(atoms)
            for p in rng.random(20):
                assert spec.quantile(p) == brute_force_quantile(atoms, p)

    def test_nondecreasing_and_cdf_inverse(self):
        spec = DiscreteReservoir.from_atoms(QUARTER)
        ps = np.linspace(0.0, 1.0, 101)
        qs = spec.quantile_many(ps)
        assert np.all(np.diff(qs) >= 0)
        assert spec.quantile(1.0) == 0.8  # maximal support mean
        for p in ps:
            assert spec.cdf(spec.quantile(p)) >= p - 1e-12

    def test_invalid_masses_rejected(self):
        with pytest.raises(ValueError):
            DiscreteReservoir((0.2, 0.4), (0.5, 0.6))
        with pytest.raises(ValueError):
            DiscreteReservoir((0.4, 0.2), (0.5, 0.5))
        with pytest.raises(ValueError):
            DiscreteReservoir((0.2, 1.2), (0.5, 0.5))

    def test_level_out_of_range(self):
        spec = DiscreteReservoir.point_mass(0.5)
        with pytest.raises(ValueError):
            spec.quantile(1.5)


class TestPiecewiseLinear:
    def test_uniform_cdf(self):
        spec = PiecewiseLinearReservoir((0.0, 1.0), (0.0, 1.0))
        assert spec.quantile(0.25) == pytest.approx(0.25)
        assert spec.cdf(0.7) == pytest.approx(0.7)

    def test_flat_stretch_takes_left_edge(self):
        # F climbs to 0.5 on [0, 0.2], flat to 0.6, climbs to 1 on [0.6, 1]
        spec = PiecewiseLinearReservoir((0.0, 0.2, 0.6, 1.0), (0.0, 0.5, 0.5, 1.0))
        assert spec.quantile(0.5) == pytest.approx(0.2)
        assert spec.quantile(0.75) == pytest.approx(0.8)

    def test_monotone_cdf_required(self):
        with pytest.raises(ValueError):
            PiecewiseLinearReservoir((0.0, 0.5, 1.0), (0.0, 0.8, 0.6))


class TestSampleArm:
    def test_point_mass_mean(self):
        spec = DiscreteReservoir.point_mass(0.5)
        arm = sample_arm(spec, np.random.default_rng(0), group_id="g")
        assert arm.true_mean == 0.5
        assert arm.group_id == "g"

    def test_two_atom_frequency(self):
        spec = DiscreteReservoir.from_atoms(((0.3, 0.5), (0.7, 0.5)))
        arms = sample_arms(spec, 100_000, np.random.default_rng(11))
        frac_high = np.mean([a.true_mean == 0.7 for a in arms])
        assert abs(frac_high - 0.5) < 0.01

    def test_index_zero_takes_lowest_atom(self):
        spec = DiscreteReservoir.from_atoms(QUARTER)
        assert spec.quantile(0.0) == 0.2

    def test_histogram_matches_masses(self):
        atoms = ((0.1, 0.2), (0.5, 0.5), (0.9, 0.3))
        spec = DiscreteReservoir.from_atoms(atoms)
        arms = sample_arms(spec, 100_000, np.random.default_rng(3))
        means = np.array([a.true_mean for a in arms])
        for mean, mass in atoms:
            freq = np.mean(means == mean)
            tol = 3.0 * math.sqrt(mass * (1 - mass) / 100_000)
            assert abs(freq - mass) < tol

    def test_hidden_index_consistent(self):
        spec = DiscreteReservoir.from_atoms(QUARTER)
        for arm in sample_arms(spec, 100, np.random.default_rng(5)):
            assert arm.true_mean == spec.quantile(arm.hidden_index)


class TestSampleReward:
    def test_bernoulli_sure_thing(self):
        fam = RewardFamily("bernoulli")
        rng = np.random.default_rng(0)
        assert all(sample_reward(fam, 1.0, rng) == 1.0 for _ in range(20))

    def test_bernoulli_mean(self):
        fam = RewardFamily("bernoulli")
        rng = np.random.default_rng(1)
        draws = [sample_reward(fam, 0.6, rng) for _ in range(100_000)]
        assert abs(np.mean(draws) - 0.6) < 0.01

    def test_noiseless_returns_mean(self):
        fam = RewardFamily("bernoulli")
        assert sample_reward(fam, 0.42, np.random.default_rng(0), noiseless=True) == 0.42

    def test_gaussian_mean_and_var(self):
        fam = RewardFamily("gaussian", sigma2=0.25)
        rng = np.random.default_rng(2)
        draws = np.array([sample_reward(fam, 0.5, rng) for _ in range(20_000)])
        assert abs(draws.mean() - 0.5) < 0.02
        assert abs(draws.var() - 0.25) < 0.02

    def test_mean_out_of_range(self):
        with pytest.raises(ValueError):
            sample_reward(RewardFamily("bernoulli"), 1.2, np.random.default_rng(0))

    def test_bad_family(self):
        with pytest.raises(ValueError):
            RewardFamily("poisson")
        with pytest.raises(ValueError):
            RewardFamily("gaussian", sigma2=1.5)


def make_instance(groups, alpha=0.5, name="test"):
    return BanditInstance(tuple(groups), RewardFamily("bernoulli"), alpha, name)


class TestRelaxedSuccessSet:
    def test_identical_groups_all_succeed(self):
        res = DiscreteReservoir.from_atoms(QUARTER)
        inst = make_instance([("a", res), ("b", res), ("c", res)])
        assert relaxed_success_set(inst, 0.1, 0.05) == {"a", "b", "c"}

    def test_hard_pair_separates_at_quarter_scale(self):
        # point mass 1/2 vs the low-good-fraction two-atom mixture built at
        # eps = gap = 0.2; at tolerances 0.05 only the point mass passes
        g2 = DiscreteReservoir.from_atoms(((0.4, 0.6), (0.6, 0.4)))
        inst = make_instance([("group1", DiscreteReservoir.point_mass(0.5)), ("group2", g2)])
        assert relaxed_success_set(inst, 0.05, 0.05) == {"group1"}

    def test_huge_gap_admits_everyone(self):
        inst = make_instance([
            ("a", DiscreteReservoir.point_mass(0.1)),
            ("b", DiscreteReservoir.point_mass(0.9)),
        ])
        assert relaxed_success_set(inst, 0.1, 1.0) == {"a", "b"}

    def test_monotone_in_tolerances(self):
        rng = np.random.default_rng(13)
        grid = np.linspace(0.05, 0.95, 19)
        for _ in range(30):
            groups = []
            for g in range(int(rng.integers(2, 5))):
                k = int(rng.integers(1, 4))
                means = np.sort(rng.choice(grid, size=k, replace=False))
                w = rng.random(k) + 0.1
                w /= w.sum()
                groups.append((f"g{g}", DiscreteReservoir(tuple(means), tuple(w))))
            inst = make_instance(groups)
            base = relaxed_success_set(inst, 0.1, 0.05)
            assert base <= relaxed_success_set(inst, 0.2, 0.05)
            assert base <= relaxed_success_set(inst, 0.1, 0.2)

    def test_eps_out_of_range(self):
        inst = make_instance([("a", DiscreteReservoir.point_mass(0.5))])
        with pytest.raises(ValueError):
            relaxed_success_set(inst, 0.6, 0.1)


class TestConfigRoundTrip:
    def test_dict_round_trip(self):
        inst = make_instance([
            ("a", DiscreteReservoir.from_atoms(QUARTER)),
            ("b", PiecewiseLinearReservoir((0.0, 1.0), (0.0, 1.0))),
        ], alpha=0.3, name="round")
        back = instance_from_dict(instance_to_dict(inst))
        assert back.name == "round"
        assert back.alpha == 0.3
        assert back.reservoir("a").quantile(0.5) == 0.4
        assert back.reservoir("b").quantile(0.5) == pytest.approx(0.5)

    def test_error_paths_name_fields(self):
        with pytest.raises(ValueError, match="groups"):
            instance_from_dict({"alpha": 0.5, "family": {"kind": "bernoulli"}})
        with pytest.raises(ValueError, match=r"groups\[0\]"):
            instance_from_dict({"alpha": 0.5, "family": {"kind": "bernoulli"},
                                "groups": [{"id": "a", "atoms": [[0.5, 0.7]]}]})

    def test_instances_pickle_for_worker_pools(self):
        import pickle
        inst = make_instance([
            ("a", DiscreteReservoir.from_atoms(QUARTER)),
            ("b", PiecewiseLinearReservoir((0.0, 1.0), (0.0, 1.0))),
        ])
        back = pickle.loads(pickle.dumps(inst))
        assert back.reservoir("a").quantile(0.5) == 0.4
        assert back.reservoir("b").quantile(0.25) == pytest.approx(0.25)
