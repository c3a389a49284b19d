"""Finite metric spaces: validated axioms, balls, nets, coarse-map certificates.

Distances live in a dense float64 matrix. Graph-derived metrics are exact
integers stored as floats. Point ids are opaque hashables (ints, strings,
tuples); every operation that returns points follows the stored point order,
so results are deterministic. Objects are immutable after construction and
all operations are pure.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedGraphError,
    MetricAxiomError,
    ValidationError,
)

_TRI_TOL = 1e-12
_EXHAUSTIVE_TRIANGLE_LIMIT = 300
_SAMPLED_TRIPLES = 200_000


def _validate_metric_axioms(ids, D):
    n = len(ids)
    diag = np.diagonal(D)
    bad = np.flatnonzero(diag != 0.0)
    if bad.size:
        i = int(bad[0])
        raise MetricAxiomError(
            "d(x,x) must be 0, got %r at point %r" % (diag[i], ids[i]), (ids[i],)
        )
    asym = np.argwhere(D != D.T)
    if asym.size:
        i, j = (int(v) for v in asym[0])
        raise MetricAxiomError(
            "asymmetry: d(%r,%r)=%r but d(%r,%r)=%r"
            % (ids[i], ids[j], D[i, j], ids[j], ids[i], D[j, i]),
            (ids[i], ids[j]),
        )
    off = D + np.eye(n)
    nonpos = np.argwhere(off <= 0.0)
    if nonpos.size:
        i, j = (int(v) for v in nonpos[0])
        raise MetricAxiomError(
            "distinct points need positive distance: d(%r,%r)=%r"
            % (ids[i], ids[j], D[i, j]),
            (ids[i], ids[j]),
        )
    if not np.all(np.isfinite(D)):
        raise MetricAxiomError("distances must be finite")
    if n <= _EXHAUSTIVE_TRIANGLE_LIMIT:
        for k in range(n):
            viol = D > D[:, [k]] + D[[k], :] + _TRI_TOL
            if viol.any():
                i, j = (int(v) for v in np.argwhere(viol)[0])
                raise MetricAxiomError(
                    "triangle inequality fails: d(%r,%r)=%r > d(%r,%r)+d(%r,%r)=%r"
                    % (ids[i], ids[j], D[i, j], ids[i], ids[k], ids[k], ids[j],
                       D[i, k] + D[k, j]),
                    (ids[i], ids[k], ids[j]),
                )
    else:
        # too large for the cubic check; sample triples deterministically
        rng = np.random.default_rng(0)
        tri = rng.integers(0, n, size=(_SAMPLED_TRIPLES, 3))
        i, k, j = tri[:, 0], tri[:, 1], tri[:, 2]
        viol = np.flatnonzero(D[i, j] > D[i, k] + D[k, j] + _TRI_TOL)
        if viol.size:
            a, b, c = (int(v) for v in tri[viol[0]])
            raise MetricAxiomError(
                "triangle inequality fails on sampled triple (%r,%r,%r)"
                % (ids[a], ids[b], ids[c]),
                (ids[a], ids[b], ids[c]),
            )


class FiniteMetricSpace:
    """Finite point set with a validated metric.

    ``structure`` is an optional hint tuple set by the convenience builders
    (for example ``("cycle", 12)``); it never affects metric semantics, only
    search heuristics and report notes.
    """

    def __init__(self, point_ids, dist_matrix, structure=None, validate=True):
        ids = tuple(point_ids)
        if not ids:
            raise ValidationError("a metric space needs at least one point")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate point ids")
        D = np.array(dist_matrix, dtype=np.float64)
        if D.shape != (len(ids), len(ids)):
            raise ValidationError(
                "distance matrix shape %r does not match %d points" % (D.shape, len(ids))
            )
        if validate:
            _validate_metric_axioms(ids, D)
        D.setflags(write=False)
        self.point_ids = ids
        self.D = D
        self.structure = structure
        self._ix = {p: i for i, p in enumerate(ids)}
        self._realized = None

    def __len__(self):
        return len(self.point_ids)

    def __contains__(self, point):
        return point in self._ix

    def index(self, point):
        try:
            return self._ix[point]
        except KeyError:
            raise ValidationError("unknown point id %r" % (point,)) from None

    def indices(self, points):
        return [self.index(p) for p in points]

    def d(self, x, y) -> float:
        return float(self.D[self.index(x), self.index(y)])

    @property
    def diameter(self) -> float:
        return float(self.D.max())

    @property
    def uniform_discreteness(self) -> float:
        """Smallest distance between distinct points; +inf for one point."""
        if len(self) == 1:
            return math.inf
        n = len(self)
        return float((self.D + np.eye(n) * self.D.max() + np.eye(n)).min())

    def realized_distances(self):
        """Sorted list of all realized distance values, always including 0."""
        if self._realized is None:
            self._realized = sorted(set(float(v) for v in np.unique(self.D)))
        return list(self._realized)

    def bounded_geometry(self, radius) -> int:
        """N_R = max over x of |B(x, R)|."""
        return int((self.D <= float(radius)).sum(axis=1).max())

    def bounded_geometry_profile(self, radii=None):
        if radii is None:
            radii = self.realized_distances()
        return {float(r): self.bounded_geometry(r) for r in radii}

    def ball(self, center, radius) -> frozenset:
        """Closed ball: all y with d(center, y) <= radius."""
        if radius < 0:
            raise ValidationError("ball radius must be >= 0")
        row = self.D[self.index(center)]
        return frozenset(self.point_ids[i] for i in np.flatnonzero(row <= float(radius)))

    def sorted_ids(self, points):
        """The given points listed in stored order."""
        return sorted(points, key=self.index)

    def dist_to_set(self, x, members) -> float:
        idx = self.indices(members)
        if not idx:
            raise ValidationError("dist_to_set needs a nonempty point set")
        return float(self.D[self.index(x), idx].min())

    def nearest_point(self, x, members):
        """Closest member to x; ties break to the earliest stored point."""
        members = self.sorted_ids(members)
        if not members:
            raise ValidationError("nearest_point needs a nonempty point set")
        row = self.D[self.index(x)]
        best = members[0]
        best_d = row[self.index(best)]
        for p in members[1:]:
            dp = row[self.index(p)]
            if dp < best_d:
                best, best_d = p, dp
        return best

    def restrict(self, members) -> "FiniteMetricSpace":
        """Subspace with the restricted metric, in stored point order."""
        keep = [p for p in self.point_ids if p in frozenset(members)]
        if len(keep) != len(frozenset(members)):
            raise ValidationError("restrict: some members are not points of the space")
        idx = self.indices(keep)
        sub = self.D[np.ix_(idx, idx)]
        return FiniteMetricSpace(keep, sub, structure=("subspace", self.structure),
                                 validate=False)


class SubspaceRef:
    """A nonempty subset of a parent space, viewable as a space of its own."""

    def __init__(self, parent: FiniteMetricSpace, member_ids):
        members = frozenset(member_ids)
        if not members:
            raise ValidationError("a subspace needs at least one point")
        for p in members:
            if p not in parent:
                raise ValidationError("subspace member %r is not a point of the parent" % (p,))
        self.parent = parent
        self.member_ids = members

    def as_space(self) -> FiniteMetricSpace:
        return self.parent.restrict(self.member_ids)


class StepModulus:
    """Non-decreasing step function on a sampled radius grid.

    Between samples the value of the next sample applies (conservative);
    past the last sample, which the builders always place at the source
    diameter, the last value applies.
    """

    def __init__(self, samples):
        pts = sorted((float(r), float(v)) for r, v in samples)
        if not pts:
            raise ValidationError("a step modulus needs at least one sample")
        radii = [r for r, _ in pts]
        values = [v for _, v in pts]
        if len(set(radii)) != len(radii):
            raise ValidationError("duplicate radii in modulus samples")
        for a, b in zip(values, values[1:]):
            if b < a - 1e-12:
                raise ValidationError("modulus values must be non-decreasing")
        self.radii = tuple(radii)
        self.values = tuple(values)

    def __call__(self, r) -> float:
        i = bisect_left(self.radii, float(r) - 1e-12)
        if i >= len(self.radii):
            i = len(self.radii) - 1
        return self.values[i]

    def samples(self):
        return tuple(zip(self.radii, self.values))


@dataclass(frozen=True)
class CoarseMapCert:
    """A map between finite spaces together with its exact expansion modulus.

    For every pair with d(x, x') <= r the images satisfy
    d(f x, f x') <= modulus(r); each sampled value is attained by some pair
    (or repeats the previous sample), so the modulus is tight.
    """

    source: FiniteMetricSpace
    target: FiniteMetricSpace
    assignment: dict
    modulus: StepModulus
    properness_note: str

    def __call__(self, x):
        return self.assignment[x]


def build_space(points, table_or_edges, structure=None) -> FiniteMetricSpace:
    """Build from either a full distance table or a graph edge list."""
    points = list(points)
    rows = list(table_or_edges)
    n = len(points)
    looks_like_matrix = (
        len(rows) == n
        and all(isinstance(r, (list, tuple, np.ndarray)) and len(r) == n for r in rows)
        and all(_is_number(rows[i][i]) and float(rows[i][i]) == 0.0 for i in range(n))
    )
    if looks_like_matrix:
        return space_from_matrix(points, rows, structure=structure)
    return space_from_graph(points, rows, structure=structure)


def _is_number(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def space_from_matrix(points, matrix, structure=None) -> FiniteMetricSpace:
    return FiniteMetricSpace(points, matrix, structure=structure)


def space_from_graph(points, edges, structure=None) -> FiniteMetricSpace:
    """Shortest-path metric of an undirected unit-length graph. Exact integers."""
    ids = list(points)
    ix = {p: i for i, p in enumerate(ids)}
    n = len(ids)
    adj = [[] for _ in range(n)]
    for e in edges:
        a, b = e
        if a not in ix or b not in ix:
            raise ValidationError("edge %r refers to unknown point ids" % (e,))
        ia, ib = ix[a], ix[b]
        if ia == ib:
            continue
        adj[ia].append(ib)
        adj[ib].append(ia)
    D = np.full((n, n), -1.0)
    for s in range(n):
        D[s, s] = 0.0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if D[s, v] < 0:
                    D[s, v] = D[s, u] + 1.0
                    q.append(v)
    if (D < 0).any():
        s, t = (int(v) for v in np.argwhere(D < 0)[0])
        raise DisconnectedGraphError(
            "graph metric undefined: no path between %r and %r" % (ids[s], ids[t])
        )
    return FiniteMetricSpace(ids, D, structure=structure, validate=False)


def z_interval(lo, hi) -> FiniteMetricSpace:
    """Integer interval [lo, hi] with |i - j|."""
    if hi < lo:
        raise ValidationError("empty interval")
    ids = list(range(int(lo), int(hi) + 1))
    vals = np.array(ids, dtype=float)
    D = np.abs(vals[:, None] - vals[None, :])
    return FiniteMetricSpace(ids, D, structure=("z_interval", int(lo), int(hi)),
                             validate=False)


def cycle(n) -> FiniteMetricSpace:
    """Cycle graph metric on 0..n-1."""
    n = int(n)
    if n < 1:
        raise ValidationError("cycle needs at least one point")
    ids = list(range(n))
    vals = np.arange(n, dtype=float)
    diff = np.abs(vals[:, None] - vals[None, :])
    D = np.minimum(diff, n - diff)
    return FiniteMetricSpace(ids, D, structure=("cycle", n), validate=False)


def _coord_metric(coords, norm):
    arr = np.array(coords, dtype=float)
    diff = np.abs(arr[:, None, :] - arr[None, :, :])
    if norm == "l1":
        return diff.sum(axis=2)
    if norm == "linf":
        return diff.max(axis=2)
    raise ValidationError("unsupported norm %r (use 'l1' or 'linf')" % (norm,))


def grid(dims, norm="l1") -> FiniteMetricSpace:
    """Product grid with the chosen word-like norm; ids are coordinate tuples."""
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise ValidationError("grid dims must be positive")
    ids = [tuple(c) for c in itertools.product(*(range(d) for d in dims))]
    D = _coord_metric(ids, norm)
    return FiniteMetricSpace(ids, D, structure=("grid", tuple(dims), norm),
                             validate=False)


def z2_ball(radius, norm="l1") -> FiniteMetricSpace:
    """Ball of the given radius around the origin of Z^2; ids are (a, b)."""
    r = int(radius)
    if r < 0:
        raise ValidationError("radius must be >= 0")
    if norm == "l1":
        ids = [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1)
               if abs(a) + abs(b) <= r]
    elif norm == "linf":
        ids = [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1)]
    else:
        raise ValidationError("unsupported norm %r" % (norm,))
    D = _coord_metric(ids, norm)
    return FiniteMetricSpace(ids, D, structure=("z2_ball", r, norm), validate=False)


def is_c_net(space: FiniteMetricSpace, members, c) -> bool:
    """True when every point of the space lies within c of the given set."""
    idx = space.indices(members)
    if not idx:
        raise ValidationError("a net must be nonempty")
    return bool(space.D[:, idx].min(axis=1).max() <= float(c))


def check_coarse_map(source: FiniteMetricSpace, target: FiniteMetricSpace,
                     assignment, sampled_radii=None) -> CoarseMapCert:
    """Certify a total map with its exact expansion modulus on a radius grid.

    The sampled grid is augmented with the source diameter so the modulus is
    total on every realized radius. Properness is automatic on finite spaces
    and recorded as a note.
    """
    assignment = dict(assignment)
    missing = [p for p in source.point_ids if p not in assignment]
    if missing:
        raise ValidationError("assignment is not total, missing %r" % (missing[0],))
    img_idx = np.array([target.index(assignment[p]) for p in source.point_ids])
    if sampled_radii is None:
        sampled_radii = source.realized_distances()
    samples = sorted(set(float(r) for r in sampled_radii) | {source.diameter})
    if samples and samples[0] < 0:
        raise ValidationError("sampled radii must be >= 0")
    n = len(source)
    iu = np.triu_indices(n)
    ds = source.D[iu]
    di = target.D[np.ix_(img_idx, img_idx)][iu]
    order = np.argsort(ds, kind="stable")
    ds_sorted = ds[order]
    prefix = np.maximum.accumulate(di[order])
    values = []
    for r in samples:
        pos = int(np.searchsorted(ds_sorted, r + 1e-12, side="right")) - 1
        values.append(float(prefix[pos]) if pos >= 0 else 0.0)
    modulus = StepModulus(zip(samples, values))
    return CoarseMapCert(source, target, assignment, modulus,
                         properness_note="properness automatic: finite source")
