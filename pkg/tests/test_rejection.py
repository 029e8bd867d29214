import json
import math

import numpy as np
import pytest

from condsum.distributions import RngStream
from condsum.exact import ConditioningSpec, exact_conditional_law
from condsum.models import hashing_model, occupancy_model
from condsum.rejection import acceptance_audit, rejection_sample
from condsum.statutil import dkw_epsilon


class TestSampler:
    def test_forced_event_yields_constant(self):
        spec, _ = occupancy_model(2, 2)
        batch = rejection_sample(spec, ConditioningSpec(N=2, m=0), 2_000, RngStream(5))
        assert set(batch.values.tolist()) == {2}

    def test_unbiased_against_exact_law_dkw(self):
        spec, cond = hashing_model(n=2, m=4)
        law = exact_conditional_law(spec, cond)
        batch = rejection_sample(spec, cond, 100_000, RngStream(23))
        eps = dkw_epsilon(batch.accepted, delta=0.001)
        assert eps == pytest.approx(0.0062, abs=2e-3)
        exact_cdf = np.cumsum(law.probs)
        for v, target in zip(law.support.tolist(), exact_cdf.tolist()):
            empirical = (batch.values <= v).mean()
            assert abs(empirical - target) <= eps

    def test_conditional_mean_at_scale(self):
        spec, cond = occupancy_model(100, 100)
        law = exact_conditional_law(spec, cond)
        batch = rejection_sample(spec, cond, 10_000, RngStream(31))
        se = law.std() / math.sqrt(batch.accepted)
        assert abs(batch.values.mean() - law.mean()) < 3 * se

    def test_budget_exhaustion_is_flagged(self):
        spec, cond = occupancy_model(12, 4)  # acceptance well below one
        batch = rejection_sample(spec, cond, 10_000, RngStream(7), budget=512)
        assert not batch.complete
        assert batch.attempts == 512

    def test_deterministic_replay(self):
        spec, cond = occupancy_model(2, 2)
        a = rejection_sample(spec, cond, 5_000, RngStream(42))
        b = rejection_sample(spec, cond, 5_000, RngStream(42))
        assert (a.values == b.values).all()
        assert a.attempts == b.attempts

    def test_thread_count_does_not_change_output(self):
        spec, cond = occupancy_model(2, 2)
        a = rejection_sample(spec, cond, 30_000, RngStream(42))
        b = rejection_sample(spec, cond, 30_000, RngStream(42), threads=8)
        assert (a.values == b.values).all()
        assert a.attempts == b.attempts

    def test_max_y_recording(self):
        spec, cond = hashing_model(n=3, m=6)
        batch = rejection_sample(spec, cond, 2_000, RngStream(3), record_max=True)
        assert batch.max_y is not None
        assert len(batch.max_y) == batch.accepted
        assert (batch.max_y <= batch.values).all()

    def test_csv_and_meta_exports(self):
        spec, cond = occupancy_model(2, 2)
        batch = rejection_sample(spec, cond, 100, RngStream(9))
        text = batch.to_csv_text()
        assert text.splitlines()[0] == "value"
        meta = batch.meta()
        assert meta["accepted"] == batch.accepted
        json.dumps(meta)  # meta must be JSON-serialisable


class TestAudit:
    def test_forced_event_probability(self):
        spec, _ = occupancy_model(2, 2)
        cond = ConditioningSpec(N=2, m=0)
        batch = rejection_sample(spec, cond, 3_000, RngStream(11))
        audit = acceptance_audit(batch, spec, cond)
        assert audit.p_exact == pytest.approx(math.exp(-2.0), abs=1e-12)
        lo, hi = audit.rate_ci
        assert lo <= math.exp(-2.0) <= hi

    def test_single_summand_rate_is_atom_mass(self):
        spec, _ = occupancy_model(3, 3)
        cond = ConditioningSpec(N=1, m=2)
        batch = rejection_sample(spec, cond, 3_000, RngStream(13))
        audit = acceptance_audit(batch, spec, cond)
        assert audit.p_exact == pytest.approx(spec.x_law.at(2), rel=1e-15)
        lo, hi = audit.rate_ci
        assert lo <= audit.p_exact <= hi

    def test_gaussian_local_level_at_scale(self):
        spec, cond = occupancy_model(200, 200)
        batch = rejection_sample(spec, cond, 8_000, RngStream(17))
        audit = acceptance_audit(batch, spec, cond)
        assert 0.9 <= audit.rate_x_sigma_sqrt2piN <= 1.1
        assert audit.exact_x_sigma_sqrt2piN == pytest.approx(1.0, abs=5e-3)
        # the local-limit floor level sits below the measured one
        assert audit.rate_x_2pi_sigma_sqrtN == pytest.approx(
            audit.rate_x_sigma_sqrt2piN * math.sqrt(2 * math.pi), rel=1e-12
        )
