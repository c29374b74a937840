"""Two-step/multi-step runners, partitions, reservoir gap bounds, and bounds."""

import math

import numpy as np
import pytest

from quantile_bandits import (
    BanditInstance,
    DiscreteReservoir,
    RewardFamily,
    RunParams,
    build_partition,
    epochs_until_elimination,
    gap_profile,
    make_worst_case_instances,
    pull_bound_grouped,
    pull_bound_multistep,
    pull_bound_worst_case,
    quantile_sandwiched,
    required_arm_count,
    relaxed_success_set,
    reservoir_gap_bounds,
    run_multistep,
    run_two_step,
    sample_arms,
)
from quantile_bandits.hardness import HardInstanceParams

FAM = RewardFamily("bernoulli")


def make_instance(groups, alpha=0.5, name="test"):
    return BanditInstance(tuple(groups), FAM, alpha, name)


GOOD_PAIR = make_worst_case_instances(HardInstanceParams(0.2, 0.2))[1]


class TestRequiredArmCount:
    def test_frozen_values(self):
        assert required_arm_count(0.1, 0.05, 2) == 220    # ceil(50 ln 80)
        assert required_arm_count(0.25, 0.1, 4) == 36     # ceil(8 ln 80)
        assert required_arm_count(0.05, 0.05, 2) == 877   # ceil(200 ln 80)

    def test_quarter_eps_quadruples_count(self):
        # exact ratio is 877/220 = 3.9864; ceiling effects keep it near 4
        ratio = required_arm_count(0.05, 0.05, 2) / required_arm_count(0.1, 0.05, 2)
        assert ratio == pytest.approx(877 / 220)
        assert 3.9 < ratio < 4.1

    def test_validation(self):
        with pytest.raises(ValueError):
            required_arm_count(0.0, 0.1, 2)


class TestRunParams:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            RunParams(0.5, 0.2, 0.1, 0.3)   # delta > eps
        with pytest.raises(ValueError):
            RunParams(0.5, 0.6, 0.1, 0.05)  # eps > min(alpha, 1-alpha)
        with pytest.raises(ValueError):
            RunParams(0.5, 0.2, 0.0, 0.05)  # gap must be positive
        RunParams(0.5, 0.2, 0.1, 0.05)


class TestQuantileSandwiched:
    def test_exact_atoms_of_point_mass(self):
        spec = DiscreteReservoir.point_mass(0.5)
        assert quantile_sandwiched(spec, [0.5, 0.5, 0.5], 0.5, 0.1)

    def test_sample_below_band_fails(self):
        spec = DiscreteReservoir.from_atoms(((0.3, 0.5), (0.7, 0.5)))
        # band at alpha=1/2, eps=0.1 is [0.3, 0.7]; all-low samples give 0.3 -> ok,
        # but a sample from a different group sitting below 0.3 fails
        assert not quantile_sandwiched(spec, [0.1, 0.1, 0.1], 0.5, 0.1)

    def test_two_atom_sandwich_frequency(self):
        spec = DiscreteReservoir.from_atoms(((0.3, 0.5), (0.7, 0.5)))
        n = required_arm_count(0.1, 0.05, 1)
        rng = np.random.default_rng(42)
        hits = 0
        for _ in range(1000):
            means = spec.quantile_many(rng.random(n))
            hits += quantile_sandwiched(spec, means, 0.5, 0.1)
        assert hits / 1000 >= 0.95


class TestBuildPartition:
    def test_half_eighth_geometry(self):
        part = build_partition(0.125, 0.5, {"g": np.array([0.0, 0.5, 0.99])})
        assert part.bucket_count == 8
        assert np.allclose(part.boundaries, np.arange(8) / 8)
        assert part.buckets["g"][0].size == 0  # b_1 = 0 leaves bucket 0 empty

    def test_point_three_geometry(self):
        part = build_partition(0.1, 0.3, {"g": np.array([0.05])})
        assert part.bucket_count == 10
        assert part.boundaries[0] == pytest.approx(0.0, abs=1e-12)

    def test_uneven_geometry(self):
        part = build_partition(0.15, 0.5, {"g": np.array([0.02])})
        assert part.bucket_count == 7
        assert part.boundaries[0] == pytest.approx(0.05)
        assert part.buckets["g"][0].size == 1  # 0.02 < b_1

    def test_buckets_cover_and_are_disjoint(self):
        rng = np.random.default_rng(3)
        js = rng.random(500)
        part = build_partition(0.13, 0.37, {"g": js})
        sizes = part.bucket_sizes("g")
        assert sizes.sum() == 500
        all_idx = np.concatenate(part.buckets["g"])
        assert np.array_equal(np.sort(all_idx), np.arange(500))
        # every bucket interval has width at most eps
        edges = np.concatenate(([0.0], part.boundaries, [1.0]))
        assert np.all(np.diff(edges) <= 0.13 + 1e-12)

    def test_bucket_count_near_inverse_eps(self):
        for eps, alpha in ((0.125, 0.5), (0.1, 0.3), (0.15, 0.5), (0.07, 0.25)):
            part = build_partition(eps, alpha, {"g": np.array([0.5])})
            assert part.bucket_count in (math.floor(1 / eps), math.ceil(1 / eps))
            assert part.bucket_count >= 3


class TestReservoirGapBounds:
    def test_identical_groups_bound_nonpositive(self):
        res = DiscreteReservoir.from_atoms(((0.2, 0.5), (0.8, 0.5)))
        inst = make_instance([("a", res), ("b", res)])
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        gb = reservoir_gap_bounds(inst, params)
        for gid in ("a", "b"):
            assert gb.group_bound[gid] <= 0.0
            assert np.all(gb.combined[gid] >= 0.05)
            # with nonpositive group bounds the combination is slack vs bucket
            assert np.allclose(gb.combined[gid],
                               np.maximum(0.05, gb.bucket_bounds[gid]))

    def test_hard_pair_suboptimal_group_bound(self):
        # instance built at tolerance 0.2, analyzed at 0.05: the point-mass
        # group's quantile band sits 0.1 below the mixture's upper quantile
        params = RunParams(0.5, 0.05, 0.05, 0.01)
        gb = reservoir_gap_bounds(GOOD_PAIR, params)
        assert gb.best_group_relaxed == "g2"
        assert gb.group_bound["g1"] == pytest.approx(0.1)
        assert gb.group_bound["g2"] == pytest.approx(0.0)  # its own low is the max

    def test_middle_buckets_have_zero_arm_bound(self):
        inst = make_instance([("a", DiscreteReservoir.from_atoms(((0.2, 0.25), (0.4, 0.25), (0.6, 0.25), (0.8, 0.25))))])
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        gb = reservoir_gap_bounds(inst, params)
        level = math.floor((1 - 0.5) / 0.1)
        for i in range(gb.bucket_count + 1):
            if level - 1 <= i <= level + 1:
                assert gb.bucket_bounds["a"][i] == 0.0
            else:
                assert gb.bucket_bounds["a"][i] >= 0.0

    def test_dominates_realized_gaps_under_sandwich(self):
        # whenever every sample quantile is sandwiched, the reservoir-level
        # bounds sit below the realized finite-arm gaps
        inst = make_instance([
            ("a", DiscreteReservoir.from_atoms(((0.2, 0.25), (0.4, 0.25), (0.6, 0.25), (0.8, 0.25)))),
            ("b", DiscreteReservoir.from_atoms(((0.1, 0.25), (0.3, 0.25), (0.5, 0.25), (0.7, 0.25)))),
            ("c", DiscreteReservoir.point_mass(0.35)),
        ])
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        gb = reservoir_gap_bounds(inst, params)
        part_geom_eps, alpha = params.eps, params.alpha
        n = required_arm_count(params.eps, params.delta, 3)
        rng = np.random.default_rng(11)
        checked = 0
        from quantile_bandits import FiniteGroup
        for _ in range(60):
            samples = {gid: sample_arms(inst.reservoir(gid), n, rng, gid) for gid in inst.group_ids}
            if not all(quantile_sandwiched(inst.reservoir(g), [a.true_mean for a in arms], alpha, part_geom_eps)
                       for g, arms in samples.items()):
                continue
            checked += 1
            groups, means, start = [], [], 0
            for gid in inst.group_ids:
                groups.append(FiniteGroup(gid, tuple(range(start, start + n))))
                means.extend(a.true_mean for a in samples[gid])
                start += n
            prof = gap_profile(groups, np.array(means), alpha, params.gap)
            part = build_partition(part_geom_eps, alpha,
                                   {gid: np.array([a.hidden_index for a in samples[gid]])
                                    for gid in inst.group_ids})
            for gid in inst.group_ids:
                assert prof.group_gaps[gid] >= gb.group_bound[gid] - 1e-12
                offset = inst.group_ids.index(gid) * n
                for i, bucket in enumerate(part.buckets[gid]):
                    for pos in bucket:
                        assert prof.arm_gaps[offset + pos] >= gb.bucket_bounds[gid][i] - 1e-12
            assert prof.uniqueness_gap >= gb.uniqueness_bound - 1e-12
        assert checked >= 40, "sandwich event should hold on most resamples"


class TestPullBounds:
    def test_grouped_bound_matches_hand_sum(self):
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        gb = reservoir_gap_bounds(GOOD_PAIR, params)
        n = required_arm_count(params.eps, params.delta, 2)
        expected = 0.0
        for gid in GOOD_PAIR.group_ids:
            for g in gb.combined[gid][1:]:
                inner = math.log(max(1.0 / g**2, math.e))
                expected += (1.0 / g**2) * math.log((2 * n / params.delta) * inner)
        expected *= 3 * params.eps * n
        assert pull_bound_grouped(GOOD_PAIR, params, c=1.0) == pytest.approx(expected, rel=1e-12)

    def test_slack_dominated_bound_quarters_when_slack_doubles(self):
        # identical groups: every combined gap equals the slack floor
        res = DiscreteReservoir.point_mass(0.5)
        inst = make_instance([("a", res), ("b", res)])
        b1 = pull_bound_grouped(inst, RunParams(0.5, 0.1, 0.05, 0.05))
        b2 = pull_bound_grouped(inst, RunParams(0.5, 0.1, 0.10, 0.05))
        assert 3.0 < b1 / b2 < 5.0

    def test_worst_case_scaling(self):
        p1 = RunParams(0.5, 0.1, 0.05, 0.05)
        p2 = RunParams(0.5, 0.1, 0.10, 0.05)
        w1 = pull_bound_worst_case(p1, 2)
        w2 = pull_bound_worst_case(p2, 2)
        assert w1 / w2 == pytest.approx(4.0, rel=0.15)  # 1/gap^2 with loglog drift
        assert pull_bound_worst_case(p1, 4) > pull_bound_worst_case(p1, 2)

    def test_grouped_vs_worst_case_same_order_when_slack_dominates(self):
        res = DiscreteReservoir.point_mass(0.5)
        inst = make_instance([("a", res), ("b", res)])
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        grouped = pull_bound_grouped(inst, params, c=1.0)
        worst = pull_bound_worst_case(params, 2, d=1.0)
        assert 0.1 < grouped / worst < 10.0


class TestTwoStep:
    def test_single_group_returns_immediately(self):
        inst = make_instance([("only", DiscreteReservoir.point_mass(0.6))])
        params = RunParams(0.5, 0.1, 0.05, 0.05)
        tr = run_two_step(inst, params, np.random.default_rng(0))
        assert tr.chosen_group == "only"
        assert tr.total_pulls == 0
        assert tr.success

    def test_noiseless_always_succeeds(self):
        inst = make_instance([
            ("hi", DiscreteReservoir.point_mass(0.7)),
            ("lo", DiscreteReservoir.point_mass(0.3)),
        ])
        params = RunParams(0.5, 0.2, 0.1, 0.1)
        for seed in range(5):
            tr = run_two_step(inst, params, np.random.default_rng(seed), noiseless=True)
            assert tr.chosen_group == "hi"
            assert tr.success

    def test_oracle_telemetry_populated(self):
        params = RunParams(0.5, 0.2, 0.2, 0.1)
        tr = run_two_step(GOOD_PAIR, params, np.random.default_rng(4), oracle_checks=True)
        assert tr.event_b is not None
        assert tr.bounds_valid is not None
        assert tr.stop_pull_violations == 0
        assert tr.max_bucket_size > 0
        assert tr.epoch_pulls == (tr.total_pulls,)

    def test_csv_row_shape(self):
        params = RunParams(0.5, 0.2, 0.2, 0.1)
        tr = run_two_step(GOOD_PAIR, params, np.random.default_rng(4))
        row = tr.csv_row()
        assert row.startswith("hard2,0.5,0.2,0.2,0.1,")
        assert len(row.split(",")) == len(tr.CSV_HEADER.split(","))


class TestMultistep:
    def test_single_epoch_schedule_equals_two_step(self):
        params = RunParams(0.5, 0.2, 0.2, 0.1)
        a = run_two_step(GOOD_PAIR, params, np.random.default_rng(9), log_pulls=True)
        b = run_multistep(GOOD_PAIR, [0.2], [0.2], 0.1, np.random.default_rng(9), log_pulls=True)
        assert a.chosen_group == b.chosen_group
        assert a.total_pulls == b.total_pulls
        assert a.pull_log == b.pull_log

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            run_multistep(GOOD_PAIR, [0.2, 0.1], [0.2], 0.1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            run_multistep(GOOD_PAIR, [0.2, 0.05], [0.2, 0.05], 0.1, np.random.default_rng(0))

    def test_far_suboptimal_group_dropped_in_first_epoch(self):
        inst = make_instance([
            ("best", DiscreteReservoir.point_mass(0.7)),
            ("near", DiscreteReservoir.point_mass(0.55)),
            ("far", DiscreteReservoir.point_mass(0.2)),
        ])
        tr = run_multistep(inst, [0.2, 0.1], [0.2, 0.1], 0.05,
                           np.random.default_rng(1), noiseless=True)
        assert tr.chosen_group == "best"
        assert tr.epochs_run == 2
        assert len(tr.epoch_pulls) == 2
        # epoch 2 runs without the far group: at eps=0.1 it requests arms for
        # two groups only, visible as a pull count below 3 groups' worth
        assert tr.success

    def test_epochs_until_elimination(self):
        inst = make_instance([
            ("best", DiscreteReservoir.point_mass(0.7)),
            ("near", DiscreteReservoir.point_mass(0.55)),
            ("far", DiscreteReservoir.point_mass(0.2)),
        ])
        kmax = epochs_until_elimination(inst, [0.2, 0.1, 0.05], [0.2, 0.1, 0.05], 0.01)
        # far group's reservoir bound 0.5 exceeds every slack from epoch 1
        assert kmax["far"] == 1
        # the near group's bound 0.15 first beats slack at 0.1
        assert kmax["near"] == 2
        assert kmax["best"] == 3

    @pytest.mark.slow
    def test_success_frequency_meets_schedule_budget(self):
        # error budget grows to 3*K*delta across K epochs; with K=2 and
        # delta=0.05 the guarantee is 0.7, checked with 3-sigma slack
        inst = make_instance([
            ("hi", DiscreteReservoir.point_mass(0.7)),
            ("lo", DiscreteReservoir.point_mass(0.3)),
        ])
        trials, delta, epochs = 100, 0.05, 2
        wins = 0
        for i in range(trials):
            rng = np.random.default_rng(60_000 + i)
            tr = run_multistep(inst, [0.2, 0.15], [0.2, 0.15], delta, rng)
            wins += tr.success
        rate = wins / trials
        floor = 1.0 - 3.0 * epochs * delta
        assert rate >= floor - 3.0 * math.sqrt(floor * (1 - floor) / trials)

    def test_multistep_bound_positive_and_below_naive(self):
        inst = make_instance([
            ("best", DiscreteReservoir.point_mass(0.7)),
            ("near", DiscreteReservoir.point_mass(0.55)),
            ("far", DiscreteReservoir.point_mass(0.2)),
        ])
        sched_e, sched_g = [0.2, 0.1, 0.05], [0.2, 0.1, 0.05]
        with_cutoff = pull_bound_multistep(inst, sched_e, sched_g, 0.01)
        assert with_cutoff > 0
        # paying every epoch for every group can only be larger
        total_all = 0.0
        for e, g in zip(sched_e, sched_g):
            total_all += pull_bound_grouped(inst, RunParams(0.5, e, g, 0.01))
        assert with_cutoff <= total_all + 1e-9


class TestSuccessScaleIntegration:
    def test_hard_instances_have_unique_strict_winner(self):
        params = HardInstanceParams(0.2, 0.2, num_groups=3)
        eps_s, gap_s = 0.05, 0.05
        for j, inst in enumerate(make_worst_case_instances(params), start=1):
            strict = relaxed_success_set(inst, eps_s, gap_s)
            assert strict == {f"g{j}"}
