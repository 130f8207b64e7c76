"""Privacy-preserving few-shot matching over hashed random coordinate
projections, with exact analytic performance bounds, a Monte-Carlo validation
lab, and a zero-knowledge enrollment/login service.

Quick tour:

    >>> from fractions import Fraction
    >>> import rcph
    >>> rec = rcph.DistanceRecord((7, 35, 50, 28, 34, 45, 28, 31, 49, 37), 0)
    >>> params = rcph.RcphParams(p=Fraction(1, 2), m=10_000, n=1024, k=10)
    >>> b = rcph.performance_bounds(rec, params)
    >>> round(b.accuracy_lower, 4), round(b.expected_iterations_upper, 2)
    (1.0, 130.67)

The matching engine (`rcph.engine`), simulation lab (`rcph.simlab`) and auth
service (`rcph.auth`) are imported lazily on attribute access so that pure
bound analysis never loads the jit compiler or networking stack.
"""

from importlib import import_module

from .bounds import (
    EventProbabilities,
    PerformanceBounds,
    aggregate,
    best_p,
    event_probs,
    hyper_ratio,
    hyper_ratio_exact,
    performance_bounds,
    read_distance_csv,
    write_distance_csv,
)
from .core import (
    DEFAULT_N,
    DiscreteEmbedding,
    DistanceRecord,
    FormatError,
    MatchOutcome,
    RcphParams,
    distance_record,
    hamming_distance,
    pack_bits,
    read_embeddings,
    unpack_bits,
    write_embeddings,
)
from .hashing import HashFamilyKey, chain_hash, draw_combination, family_hash, one_way_hash, project

__version__ = "0.1.0"

_LAZY_MODULES = ("engine", "simlab", "auth", "cli")


def __getattr__(name):
    if name in _LAZY_MODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module 'rcph' has no attribute {name!r}")


def fixture_path() -> str:
    """Path of the packaged 10-way distance-matrix fixture (CSV)."""
    from importlib.resources import files

    return str(files("rcph").joinpath("data/distances_10way.csv"))
