import pytest

from condsum.exact import exact_conditional_law
from condsum.models import occupancy_model


@pytest.fixture(scope="session")
def occupancy_ladder():
    """Exact conditional laws for the balanced occupancy scheme, by N."""
    out = {}
    for N in (100, 400, 1600):
        spec, cond = occupancy_model(N, N)
        law = exact_conditional_law(spec, cond)
        out[N] = (spec, cond, law)
    return out
