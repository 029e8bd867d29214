import math

import numpy as np
import pytest

from condsum.distributions import Pmf, RngStream
from condsum.models import (
    bose_einstein_model,
    branching_model,
    branching_total_progeny_check,
    build_model,
    from_tables,
    hashing_model,
    mu_from_tree_parameter,
    occupancy_model,
    random_forest_model,
    transform_y,
)


class TestHashingFactory:
    def test_load_factor_and_summand_count(self):
        spec, cond = hashing_model(n=8, m=10)
        assert spec.params["mu"] == pytest.approx(0.8)
        assert cond.N == 2 and cond.m == 10
        assert spec.moments.mean_x == pytest.approx(5.0, abs=1e-10)
        assert spec.moments.mean_x == pytest.approx(cond.m / cond.N, abs=1e-10)

    def test_closed_form_moments(self):
        spec, _ = hashing_model(n=4, m=8)  # mu = 0.5
        assert spec.moments.mean_x == pytest.approx(2.0, abs=1e-9)
        assert spec.moments.sigma_x**2 == pytest.approx(4.0, abs=1e-9)

    def test_mu_N_form(self):
        spec, cond = hashing_model(mu=0.5, N=10)
        assert cond.m - (cond.m - cond.N) == cond.N
        assert spec.params["mu"] == pytest.approx(0.5)

    def test_sampler_covers_large_blocks(self):
        spec, _ = hashing_model(n=4, m=8)
        gen = RngStream(1).generator()
        draws = spec.sample_y(20, gen, 200)  # beyond the enumeration cap
        assert draws.min() >= 0
        assert draws.max() <= 19 * 18 // 2

    def test_capped_joint_records_truncation(self):
        spec, _ = hashing_model(n=4, m=8)
        assert spec.joint_truncation > 1e-4  # visible load at mu = 0.5
        assert spec.joint_p.sum() == pytest.approx(1.0, abs=1e-12)


class TestOccupancyFactory:
    def test_rate_alignment(self):
        spec, cond = occupancy_model(100, 100)
        assert spec.params["lambda"] == pytest.approx(1.0)
        assert spec.moments.mean_x == pytest.approx(1.0, abs=1e-10)
        assert spec.moments.mean_x == pytest.approx(cond.m / cond.N, abs=1e-10)

    def test_indicator_moments_match_summation_oracle(self):
        spec, _ = occupancy_model(50, 50)
        p0 = math.exp(-1.0)
        assert spec.moments.mean_y == pytest.approx(p0, abs=1e-12)
        assert spec.moments.sigma_y**2 == pytest.approx(p0 * (1 - p0), abs=1e-12)
        assert spec.moments.cov_xy == pytest.approx(-p0, abs=1e-12)


class TestBoseEinsteinFactory:
    def test_exact_alignment_with_default_parameter(self):
        spec, cond = bose_einstein_model(60, 20)
        assert cond.m == 60
        assert spec.moments.mean_x == pytest.approx(3.0, abs=1e-10)

    def test_alignment_is_mean_times_count(self):
        for n, N in [(10, 5), (100, 25), (7, 7)]:
            spec, cond = bose_einstein_model(n, N)
            assert cond.N * spec.moments.mean_x == pytest.approx(cond.m, abs=1e-8)


class TestBranchingFactory:
    def test_conditioning_scheme(self):
        spec, cond = branching_model(12)
        assert cond.N == 12 and cond.m == 11
        assert spec.moments.mean_x == pytest.approx(1.0, abs=1e-10)

    def test_rejects_off_mean_offspring(self):
        bad = Pmf(support=np.array([0, 2]), probs=np.array([0.4, 0.6]))
        with pytest.raises(ValueError):
            branching_model(5, offspring=bad)

    def test_custom_offspring_accepted(self):
        half = Pmf(support=np.array([0, 2]), probs=np.array([0.5, 0.5]))
        spec, _ = branching_model(5, offspring=half, indicator=2)
        assert spec.moments.mean_y == pytest.approx(0.5, abs=1e-12)


class TestForestFactory:
    def test_tree_parameter_inversion(self):
        mu = mu_from_tree_parameter(0.25)
        assert mu == pytest.approx(0.35740, abs=1e-4)
        assert mu * math.exp(-mu) == pytest.approx(0.25, abs=1e-10)

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            mu_from_tree_parameter(math.exp(-1.0))
        with pytest.raises(ValueError):
            mu_from_tree_parameter(0.4)

    def test_vertex_root_alignment(self):
        spec, cond = random_forest_model(m=30, N=10)
        assert spec.params["mu"] == pytest.approx(2 / 3)
        assert spec.moments.mean_x == pytest.approx(3.0, abs=1e-9)
        assert spec.moments.mean_x == pytest.approx(cond.m / cond.N, abs=1e-9)


class TestBuildModel:
    @pytest.mark.parametrize(
        "config",
        [
            {"kind": "hashing", "params": {"n": 4, "m": 8}},
            {"kind": "occupancy", "params": {"m": 20, "N": 20}},
            {"kind": "bose_einstein", "params": {"n": 12, "N": 4}},
            {"kind": "branching", "params": {"n": 6}},
            {"kind": "random_forest", "params": {"m": 24, "N": 8}},
        ],
        ids=lambda c: c["kind"],
    )
    def test_dict_dispatch(self, config):
        spec, cond = build_model(config)
        assert cond.N >= 1
        assert spec.joint_p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_model({"kind": "zeta"})


class TestTransform:
    def test_affine_shift_moves_mean_only(self):
        spec, _ = occupancy_model(10, 10)
        shifted = transform_y(spec, lambda x, y: y - 0.25, "-shift")
        assert shifted.moments.mean_y == pytest.approx(
            spec.moments.mean_y - 0.25, abs=1e-12
        )
        assert shifted.moments.sigma_y == pytest.approx(spec.moments.sigma_y, abs=1e-12)

    def test_merges_colliding_atoms(self):
        x_law = Pmf(support=np.array([0, 1]), probs=np.array([0.5, 0.5]))

        def two_atoms(x):
            return Pmf(support=np.array([-1, 1]), probs=np.array([0.5, 0.5]))

        spec = from_tables("toy", x_law, two_atoms)
        squared = transform_y(spec, lambda x, y: y * y, "^2")
        assert squared.y_given_x(0).support.tolist() == [1.0]


class TestProgenyDiagnostic:
    def test_single_individual(self):
        from condsum.distributions import poisson_pmf_table

        law = poisson_pmf_table(1.0, tol=1e-14)
        report = branching_total_progeny_check(law, 1, RngStream(13), samples=40_000)
        p = math.exp(-1.0)
        se = math.sqrt(p * (1 - p) / 40_000)
        assert abs(report["p_event"] - p) < 4 * se
        assert abs(report["p_progeny"] - p) < 4 * se

    def test_pair_enumeration(self):
        from condsum.distributions import poisson_pmf_table

        law = poisson_pmf_table(1.0, tol=1e-14)
        report = branching_total_progeny_check(law, 2, RngStream(17), samples=60_000)
        # progeny 2 needs the root to have one child that has none: e^{-2}
        p = math.exp(-2.0)
        se = math.sqrt(p * (1 - p) / 60_000)
        assert abs(report["p_event"] - p) < 4 * se
        assert abs(report["p_progeny"] - p) < 4 * se

    def test_progeny_three_matches_total_population_law(self):
        from condsum.distributions import poisson_pmf_table

        law = poisson_pmf_table(1.0, tol=1e-14)
        report = branching_total_progeny_check(law, 3, RngStream(19), samples=80_000)
        # population-total law at the critical unit-rate offspring:
        # P(total = n) = e^{-n} n^{n-1} / n!
        p = math.exp(-3.0) * 3**2 / math.factorial(3)
        assert p == pytest.approx(0.0746806, abs=5e-7)
        se = math.sqrt(p * (1 - p) / 80_000)
        assert abs(report["p_event"] - p) < 4 * se
        assert abs(report["p_progeny"] - p) < 4 * se
        assert report["gap"] < 5 * se
