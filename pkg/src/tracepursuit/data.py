"""Dataset representation, response slicing, and slice-conditional moments.

All moment estimators use the n-divisor convention and a single global
centering of the predictors; a working set selects sub-blocks of the
centered columns rather than re-centering.  Covariances and slice second
moments are accumulated per column pair with 1-D dot products, never with
blocked matrix products, so the moments of a working set are bit-identical
to the corresponding sub-blocks computed for any superset.

Everything here is a pure function of its inputs; the returned objects are
treated as immutable and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSlicingError,
    IllPosedMomentsError,
    WorkingSetIndexError,
)

# Working sets are tuples of 1-based predictor indices, strictly increasing.
IndexSet = tuple[int, ...]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """A predictor matrix (n x p, raw units) with a scalar response."""

    x: np.ndarray
    y: np.ndarray
    n: int
    p: int
    column_names: tuple[str, ...] | None = None

    @classmethod
    def from_arrays(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        column_names: Sequence[str] | None = None,
    ) -> "Dataset":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]  # single predictor
        x = _readonly(x)
        y = _readonly(np.asarray(y).ravel())
        n, p = x.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape != (n,):
            raise ValueError(f"y has length {y.shape[0]}, expected {n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        names = tuple(column_names) if column_names is not None else None
        if names is not None and len(names) != p:
            raise ValueError("column_names length must equal p")
        return cls(x=x, y=y, n=n, p=p, column_names=names)

    def column_means(self) -> np.ndarray:
        """Per-column means, each computed as a 1-D reduction of that column."""
        cached = getattr(self, "_col_means", None)
        if cached is None:
            cached = np.array([self.x[:, a].mean() for a in range(self.p)])
            cached.setflags(write=False)
            object.__setattr__(self, "_col_means", cached)
        return cached

    def centered_column(self, a: int) -> np.ndarray:
        """Centered copy of 0-based column ``a``."""
        return np.ascontiguousarray(self.x[:, a]) - self.column_means()[a]


@dataclass(frozen=True)
class SliceAssignment:
    """A partition of the sample into H response slices.

    ``membership`` holds slice labels in 1..h_count; ``proportions[h-1]`` is
    the exact slice-h count divided by n.  ``rows`` caches the row indices of
    each slice (in original sample order).
    """

    h_count: int
    membership: np.ndarray
    proportions: np.ndarray
    rows: tuple[np.ndarray, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.rows:
            rows = tuple(
                np.flatnonzero(self.membership == h)
                for h in range(1, self.h_count + 1)
            )
            object.__setattr__(self, "rows", rows)

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.size for r in self.rows])


def slice_response(y: np.ndarray, h_count: int, discrete: bool = False) -> SliceAssignment:
    """Partition the response sample into nonempty slices.

    Continuous responses get equal-frequency slices by rank (ties broken by
    original sample index, slice sizes differing by at most one).  Discrete
    responses get one slice per distinct value, smallest value first, and the
    slice count is reset to the number of distinct values.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    if h_count < 2:
        raise ValueError(f"h_count must be >= 2, got {h_count}")
    if n < h_count:
        raise DegenerateSlicingError(
            f"cannot form {h_count} nonempty slices from {n} samples"
        )

    if discrete:
        values = np.unique(y)
        if values.size > h_count:
            raise DegenerateSlicingError(
                f"discrete response has {values.size} distinct values, "
                f"more than h_count={h_count}"
            )
        if values.size < 2:
            raise DegenerateSlicingError("discrete response is constant")
        membership = np.searchsorted(values, y) + 1
        h = int(values.size)
    else:
        if np.unique(y).size < h_count:
            raise DegenerateSlicingError(
                f"response has fewer than {h_count} distinct values; "
                "equal-frequency slicing would be degenerate"
            )
        order = np.argsort(y, kind="stable")
        membership = np.empty(n, dtype=np.int64)
        base, extra = divmod(n, h_count)
        pos = 0
        for h_label in range(1, h_count + 1):
            size = base + (1 if h_label <= extra else 0)
            membership[order[pos : pos + size]] = h_label
            pos += size
        h = h_count

    counts = np.bincount(membership, minlength=h + 1)[1:]
    proportions = _readonly(counts / n)
    return SliceAssignment(h_count=h, membership=membership, proportions=proportions)


@dataclass
class MomentStats:
    """Slice-conditional moments of the centered predictors on a working set.

    Fields follow the n-divisor convention throughout: ``sigma_f`` is the
    sample covariance of the centered working-set columns, ``u[h-1]`` the
    slice-h mean and ``v[h-1]`` the slice-h second-moment matrix of the same
    centered columns.  ``xc`` holds the centered column block itself (n x |F|)
    so downstream residual computations do not re-center.

    Instances are immutable after construction apart from internal caches.
    """

    f: IndexSet
    sigma_f: np.ndarray
    u: np.ndarray  # (H, |F|) slice means
    grand_mean: np.ndarray  # length p
    xc: np.ndarray  # (n, |F|) centered working-set columns
    n: int
    h_count: int
    proportions: np.ndarray
    slice_rows: tuple[np.ndarray, ...]
    zero_variance: IndexSet = ()
    _v: np.ndarray | None = field(default=None, repr=False, compare=False)
    _sigma_cache: object = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.f)

    @property
    def v(self) -> np.ndarray:
        """Slice second moments (H, |F|, |F|), computed lazily per column pair."""
        if self._v is None:
            k = self.size
            v = np.empty((self.h_count, k, k))
            for h, rows in enumerate(self.slice_rows):
                block = [np.ascontiguousarray(self.xc[rows, a]) for a in range(k)]
                cnt = rows.size
                for a in range(k):
                    for b in range(a + 1):
                        val = float(np.dot(block[a], block[b])) / cnt
                        v[h, a, b] = val
                        v[h, b, a] = val
            self._v = v
        return self._v


def validate_working_set(f: Iterable[int], p: int) -> IndexSet:
    """Canonicalize a working set to a sorted tuple of distinct 1-based indices."""
    fs = tuple(int(j) for j in f)
    if len(set(fs)) != len(fs):
        raise WorkingSetIndexError(f"working set has repeated indices: {fs}")
    for j in fs:
        if not 1 <= j <= p:
            raise WorkingSetIndexError(f"index {j} outside 1..{p}")
    return tuple(sorted(fs))


def compute_moments(d: Dataset, s: SliceAssignment, f: Iterable[int]) -> MomentStats:
    """Estimate working-set moments shared by every kernel and test.

    The empty working set is allowed and yields 0-dimensional moment blocks,
    which the kernel traces and residual computations treat as the
    no-conditioning case.
    """
    fs = validate_working_set(f, d.p)
    k = len(fs)
    if k >= d.n:
        raise IllPosedMomentsError(
            f"working set of size {k} with only n={d.n} samples"
        )

    mean = d.column_means()
    cols = [d.centered_column(j - 1) for j in fs]
    xc = np.column_stack(cols) if k else np.empty((d.n, 0))

    sigma = np.empty((k, k))
    for a in range(k):
        for b in range(a + 1):
            val = float(np.dot(cols[a], cols[b])) / d.n
            sigma[a, b] = val
            sigma[b, a] = val

    u = np.empty((s.h_count, k))
    for h, rows in enumerate(s.rows):
        cnt = rows.size
        for a in range(k):
            u[h, a] = cols[a][rows].sum() / cnt

    zero_var = tuple(j for a, j in enumerate(fs) if sigma[a, a] == 0.0)

    return MomentStats(
        f=fs,
        sigma_f=sigma,
        u=u,
        grand_mean=mean,
        xc=xc,
        n=d.n,
        h_count=s.h_count,
        proportions=np.asarray(s.proportions),
        slice_rows=s.rows,
        zero_variance=zero_var,
    )
