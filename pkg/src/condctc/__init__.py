"""Self-conditioned CTC inference toolkit.

CTC probability computations, text-domain search, Viterbi forced alignment,
an n-gram language model for shallow fusion, and a toy trainable encoder
with intermediate conditioning, all verified against brute-force oracles.
"""

from condctc.core import (
    PosteriorLattice,
    Vocabulary,
    collapse,
    edit_distance,
    error_rate,
)
from condctc.errors import (
    DataError,
    InfeasibleTargetError,
    NumericError,
    SearchSpaceError,
)

__all__ = [
    "PosteriorLattice",
    "Vocabulary",
    "collapse",
    "edit_distance",
    "error_rate",
    "DataError",
    "InfeasibleTargetError",
    "NumericError",
    "SearchSpaceError",
]

__version__ = "0.1.0"
