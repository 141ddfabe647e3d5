"""scikit-learn style wrappers around the decomposition pipeline and the exact oracle."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .coloring import ListAssignment
from .digraph import Digraph
from .oracle import SearchBudget, exact_la
from .pipeline import PipelineConfig, decompose


def check_digraph(X) -> Digraph:
    """Accept a Digraph, or an (n, arcs) pair, or a plain arc list."""
    if isinstance(X, Digraph):
        return X
    if isinstance(X, tuple) and len(X) == 2 and isinstance(X[0], int):
        return Digraph(X[0], X[1])
    try:
        arcs = [(int(u), int(v)) for u, v in X]
    except (TypeError, ValueError):
        raise TypeError(f"expected a Digraph or a list of arcs, got {type(X).__name__}") from None
    n = 1 + max((max(a) for a in arcs), default=-1)
    return Digraph(n, arcs)


class LinearForestDecomposer(BaseEstimator):
    """Split the arcs of a digraph into directed linear forests.

    Each color of ``coloring_`` is one forest.  ``fit`` runs the randomized
    pipeline (reserve colors, nibble rounds, resampling finish).
    """

    def __init__(self, list_size=256, profile="desk", reserve_profile="desk", reserve_p=0.25,
                 stop="uncolored:0.02", max_iter=500, seed=0):
        self.list_size = list_size
        self.profile = profile
        self.reserve_profile = reserve_profile
        self.reserve_p = reserve_p
        self.stop = stop
        self.max_iter = max_iter
        self.seed = seed

    def _config(self) -> PipelineConfig:
        return PipelineConfig(list_size=self.list_size, profile=self.profile,
                              reserve_profile=self.reserve_profile, reserve_p=self.reserve_p,
                              stop=self.stop, max_iter=self.max_iter)

    def fit(self, X, y=None, lists: ListAssignment | None = None):
        D = check_digraph(X)
        result = decompose(D, lists, self.seed, self._config())
        self.digraph_ = D
        self.coloring_ = dict(result.coloring.color_of)
        self.stats_ = result.stats
        self.n_colors_ = result.n_colors
        return self

    def transform(self, X=None):
        """The arc -> color map found by ``fit`` (X, if given, must be the fitted digraph)."""
        check_is_fitted(self, "coloring_")
        if X is not None and check_digraph(X) != self.digraph_:
            raise ValueError("transform only applies to the digraph passed to fit")
        return dict(self.coloring_)

    def fit_transform(self, X, y=None, **kw):
        return self.fit(X, y, **kw).transform()


class ExactArboricity(BaseEstimator):
    """Exact directed linear arboricity by backtracking; small digraphs only."""

    def __init__(self, node_limit=10**7, time_limit=600.0):
        self.node_limit = node_limit
        self.time_limit = time_limit

    def fit(self, X, y=None):
        D = check_digraph(X)
        res = exact_la(D, SearchBudget(self.node_limit, self.time_limit))
        self.la_ = res.value
        self.lower_, self.upper_ = res.lower, res.upper
        self.witness_ = res.witness
        self.nodes_ = res.nodes
        return self

    def transform(self, X=None):
        check_is_fitted(self, "witness_")
        return dict(self.witness_)
