import math

import numpy as np
import pytest
from scipy.stats import chisquare

from condsum.distributions import (
    Pmf,
    RngStream,
    borel_pmf,
    borel_pmf_table,
    borel_sample,
    borel_tail_bound,
    displacement_sample,
    geometric_pmf,
    geometric_pmf_table,
    poisson_pmf,
    poisson_pmf_table,
    standard_pmf,
)
from condsum.exact import exact_displacement_pmf


class TestBorelPmf:
    def test_first_atom_is_exp_minus_mu(self):
        assert borel_pmf(0.5, 1) == pytest.approx(math.exp(-0.5), rel=1e-14)

    def test_second_atom_direct_substitution(self):
        assert borel_pmf(0.5, 2) == pytest.approx(math.exp(-1.0) / 2.0, rel=1e-14)

    def test_log_space_matches_direct_evaluation(self):
        for l in range(1, 21):
            direct = math.exp(-0.5 * l) * (0.5 * l) ** (l - 1) / math.factorial(l)
            assert borel_pmf(0.5, l) == pytest.approx(direct, rel=1e-12)

    def test_mean_via_truncated_summation(self):
        # mean of the Borel law is 1/(1 - mu)
        table = borel_pmf_table(0.5, tol=1e-12)
        assert table.mean() == pytest.approx(2.0, abs=1e-9)

    def test_parameter_range(self):
        with pytest.raises(ValueError):
            borel_pmf(0.0, 1)
        with pytest.raises(ValueError):
            borel_pmf(1.0, 1)
        with pytest.raises(ValueError):
            borel_pmf(0.5, 0)

    def test_tail_bound_dominates_summed_tail(self):
        table = borel_pmf_table(0.3, tol=1e-14)
        for l in (2, 5, 20, 40):
            tail = table.tail_ge(l)
            assert tail <= borel_tail_bound(0.3, l)


class TestStandardPmf:
    def test_poisson_at_zero(self):
        assert poisson_pmf(1.0, 0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_geometric_at_zero(self):
        assert geometric_pmf(0.5, 0) == 0.5

    def test_poisson_partial_sum_is_one(self):
        total = math.fsum(poisson_pmf(1.0, np.arange(41)).tolist())
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_dispatch(self):
        assert standard_pmf("poisson", 1.0, 0) == poisson_pmf(1.0, 0)
        assert standard_pmf("geometric", 0.25, 3) == geometric_pmf(0.25, 3)
        with pytest.raises(ValueError):
            standard_pmf("cauchy", 1.0, 0)

    def test_parameter_errors(self):
        with pytest.raises(ValueError):
            poisson_pmf(0.0, 1)
        with pytest.raises(ValueError):
            geometric_pmf(1.0, 1)


@pytest.mark.parametrize(
    "table",
    [
        borel_pmf_table(0.5),
        borel_pmf_table(0.9, tol=1e-13),
        poisson_pmf_table(1.0),
        poisson_pmf_table(4.5, tol=1e-14),
        geometric_pmf_table(0.3),
    ],
    ids=["borel-0.5", "borel-0.9", "poisson-1", "poisson-4.5", "geometric-0.3"],
)
def test_tables_carry_their_truncation(table):
    assert table.is_full(atol=1e-12)


class TestBorelSampler:
    def test_mean_and_variance_within_three_se(self):
        draws = borel_sample(0.5, RngStream(101), size=1_000_000)
        table = borel_pmf_table(0.5, tol=1e-13)
        mean, var = 2.0, 4.0  # 1/(1-mu), mu (1-mu)^-3
        fourth = float(np.dot((table.support - mean) ** 4, table.probs))
        se_mean = math.sqrt(var / len(draws))
        se_var = math.sqrt((fourth - var**2) / len(draws))
        assert abs(draws.mean() - mean) < 3 * se_mean
        assert abs(draws.var(ddof=1) - var) < 3 * se_var

    def test_support_starts_at_one(self):
        draws = borel_sample(0.77, RngStream(5), size=10_000)
        assert draws.min() >= 1


class TestDisplacementSampler:
    def test_degenerate_blocks(self):
        gen = RngStream(3).generator()
        assert displacement_sample(1, gen) == 0
        assert all(displacement_sample(2, gen, size=50) == 0)

    def test_three_urns_matches_enumeration(self):
        draws = displacement_sample(3, RngStream(11), size=100_000)
        p1 = (draws == 1).mean()
        se = math.sqrt((1 / 3) * (2 / 3) / len(draws))
        assert abs(p1 - 1 / 3) < 4 * se
        assert set(np.unique(draws)) <= {0, 1}

    @pytest.mark.parametrize("l", [3, 4, 5, 6])
    def test_chi_square_against_exact_law(self, l):
        law = exact_displacement_pmf(l, l - 1)
        draws = displacement_sample(l, RngStream(500 + l), size=100_000)
        observed = np.bincount(draws, minlength=int(law.support[-1]) + 1)
        observed = observed[law.support]
        stat, pvalue = chisquare(observed, law.probs * len(draws))
        assert pvalue > 1e-3


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(99, 3).generator().random(8)
        b = RngStream(99, 3).generator().random(8)
        assert (a == b).all()

    def test_streams_differ(self):
        a = RngStream(99, 0).generator().random(8)
        b = RngStream(99, 1).generator().random(8)
        assert not (a == b).all()


class TestPmfContainer:
    def test_validation(self):
        with pytest.raises(ValueError):
            Pmf(support=np.array([1, 1]), probs=np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            Pmf(support=np.array([1, 2]), probs=np.array([-0.1, 1.1]))

    def test_csv_round_trip(self, tmp_path):
        table = borel_pmf_table(0.5)
        path = tmp_path / "borel.csv"
        table.to_csv(path)
        text = path.read_text()
        assert text.startswith("value,prob\n")
        assert "# truncation_mass=" in text
        back = Pmf.from_csv(path)
        assert (back.support == table.support).all()
        assert back.probs == pytest.approx(table.probs.tolist(), rel=1e-15)
        assert back.truncation_mass == table.truncation_mass

    def test_lookup_and_tail(self):
        table = Pmf(support=np.array([0, 2, 5]), probs=np.array([0.2, 0.3, 0.5]))
        assert table.at(2) == 0.3
        assert table.at(1) == 0.0
        assert table.tail_ge(2) == pytest.approx(0.8)
