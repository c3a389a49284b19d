"""Partitions of unity subordinated to covers, with variation measurements."""

from __future__ import annotations

import math

import numpy as np

from .cover import Cover, lebesgue_report, multiplicity
from .errors import BoundViolationError, PreconditionError, ValidationError
from .space import CoarseMapCert

_SUM_TOL = 1e-9


class PartitionOfUnity:
    """Nonnegative functions, one per cover piece, summing to 1 at every point.

    Values are stored sparsely: piece i keeps a dict of the points where it
    is strictly positive, and positivity is only allowed inside piece i
    (subordination).
    """

    def __init__(self, space, cover: Cover, values):
        values = tuple(dict(v) for v in values)
        if cover.space is not space:
            raise ValidationError("partition space must be the cover's space")
        if len(values) != len(cover.pieces):
            raise ValidationError("need one value map per cover piece")
        sums = {p: 0.0 for p in space.point_ids}
        for i, (piece, vals) in enumerate(zip(cover.pieces, values)):
            for x, v in vals.items():
                if x not in space:
                    raise ValidationError("piece %d carries unknown point %r" % (i, x))
                if x not in piece:
                    raise ValidationError(
                        "subordination fails: piece %d positive at %r outside the piece"
                        % (i, x)
                    )
                if not (0.0 < v <= 1.0 + _SUM_TOL):
                    raise ValidationError(
                        "value %r for piece %d at %r is outside (0, 1]" % (v, i, x)
                    )
                sums[x] += v
        for x, s in sums.items():
            if abs(s - 1.0) > _SUM_TOL:
                raise ValidationError("values at %r sum to %r, not 1" % (x, s))
        self.space = space
        self.cover = cover
        self.values = values
        self._masses = None

    def value(self, i, x) -> float:
        return self.values[i].get(x, 0.0)

    def masses(self):
        """Per point, the dict piece index -> positive value."""
        if self._masses is None:
            masses = {p: {} for p in self.space.point_ids}
            for i, vals in enumerate(self.values):
                for x, v in vals.items():
                    masses[x][i] = v
            self._masses = masses
        return self._masses


def bell_partition(cover: Cover, require_lebesgue=True) -> PartitionOfUnity:
    """Proximity-weighted partition of unity subordinated to the cover.

    phi_i(x) is the distance from x to the complement of piece i, normalized
    over all pieces; a piece equal to the whole space contributes the
    sentinel diameter+1. For a cover with multiplicity k and Lebesgue number
    L > 0 the total variation is Lipschitz with constant (2k+2)(2k+3)/L,
    which callers verify via partition_variation. Covers with Lebesgue
    number 0 make that bound vacuous and are rejected unless
    require_lebesgue=False.
    """
    space = cover.space
    L, _ = lebesgue_report(cover)
    if require_lebesgue and L <= 0.0:
        raise PreconditionError(
            "cover has Lebesgue number 0; the variation bound is vacuous"
        )
    n = len(space)
    all_points = set(space.point_ids)
    sentinel = space.diameter + 1.0
    rows = []
    for p in cover.pieces:
        comp = space.sorted_ids(all_points - p)
        if comp:
            rows.append(space.D[:, space.indices(comp)].min(axis=1))
        else:
            rows.append(np.full(n, sentinel))
    mat = np.array(rows)
    denom = mat.sum(axis=0)
    floor = L if require_lebesgue else 0.0
    if denom.min() < max(floor, 0.0) - 1e-12 or denom.min() <= 0.0:
        raise BoundViolationError("normalizer fell below the Lebesgue number")
    mat = mat / denom
    values = []
    for i in range(len(cover.pieces)):
        row = mat[i]
        values.append({space.point_ids[j]: float(row[j])
                       for j in np.flatnonzero(row > 0.0)})
    return PartitionOfUnity(space, cover, values)


def bell_lipschitz_constant(cover: Cover) -> float:
    """(2k+2)(2k+3)/L from the cover's realized multiplicity and Lebesgue number."""
    k = multiplicity(cover)
    L = lebesgue_report(cover)[0]
    if L <= 0.0:
        raise PreconditionError("Lebesgue number 0 gives no finite constant")
    return (2.0 * k + 2.0) * (2.0 * k + 3.0) / L


def pullback_partition(cert: CoarseMapCert, partition: PartitionOfUnity):
    """Pull a partition on the target back along a certified map.

    Returns (partition on the source over the preimage cover, index map);
    pieces with empty preimage are dropped and the index map records which
    original piece each kept piece came from.
    """
    if partition.space is not cert.target:
        raise ValidationError("partition must live on the map's target")
    source = cert.source
    kept = []
    pieces = []
    values = []
    for i, piece in enumerate(partition.cover.pieces):
        pre = frozenset(x for x in source.point_ids if cert.assignment[x] in piece)
        if not pre:
            continue
        kept.append(i)
        pieces.append(pre)
        vals = {}
        for x in source.point_ids:
            v = partition.value(i, cert.assignment[x])
            if v > 0.0:
                vals[x] = v
        values.append(vals)
    cover = Cover(source, pieces)
    return PartitionOfUnity(source, cover, values), tuple(kept)


def _pair_variation(masses, x, y) -> float:
    mx = masses[x]
    my = masses[y]
    s = 0.0
    for i, v in mx.items():
        s += abs(v - my.get(i, 0.0))
    for i, v in my.items():
        if i not in mx:
            s += v
    return s


def partition_variation_profile(partition: PartitionOfUnity, radii):
    """For each R, the max of sum_i |phi_i(x) - phi_i(y)| over pairs with d <= R."""
    space = partition.space
    masses = partition.masses()
    ids = space.point_ids
    pairs = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            pairs.append((float(space.D[a, b]), a, b))
    pairs.sort(key=lambda t: t[0])
    dists = [p[0] for p in pairs]
    best = 0.0
    best_pair = None
    prefix = []
    for d, a, b in pairs:
        v = _pair_variation(masses, ids[a], ids[b])
        if v > best:
            best = v
            best_pair = (ids[a], ids[b])
        prefix.append((best, best_pair))
    out = []
    from bisect import bisect_right
    for r in sorted(float(r) for r in radii):
        if r < 0:
            raise ValidationError("radii must be >= 0")
        pos = bisect_right(dists, r + 1e-12) - 1
        if pos < 0:
            out.append((r, 0.0, None))
        else:
            out.append((r, prefix[pos][0], prefix[pos][1]))
    return out


def partition_variation_with_pair(partition: PartitionOfUnity, R):
    entry = partition_variation_profile(partition, [R])[0]
    return entry[1], entry[2]


def partition_variation(partition: PartitionOfUnity, R) -> float:
    return partition_variation_with_pair(partition, R)[0]
