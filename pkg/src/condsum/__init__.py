"""condsum: conditioned sums of lattice variables, end to end.

Deterministic linear-probing simulation, exact displacement and conditional
laws, characteristic-function inversion with local-limit checks, the
normal-approximation constant pipeline, and heavy-tail bracket diagnostics.
"""

from .distributions import Pmf, RngStream
from .exact import ConditioningSpec
from .models import ModelSpec, build_model
from .probing import HashSequence, block_decomposition, insert_trace, total_displacement

__all__ = [
    "Pmf",
    "RngStream",
    "ConditioningSpec",
    "ModelSpec",
    "build_model",
    "HashSequence",
    "insert_trace",
    "total_displacement",
    "block_decomposition",
]

__version__ = "0.1.0"
