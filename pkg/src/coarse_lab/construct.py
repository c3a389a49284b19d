"""Witness constructions: subspace restriction, net extension, gluing along a
partition of unity, pullback along a certified map, and the separated-cover
pipeline.

Every construction returns the built witness together with InequalityRecords
for the bounds it is supposed to satisfy. Bounds that are provable for the
implemented formulas are asserted (a violation raises BoundViolationError,
meaning a bug, not a falsified instance); the one empirical tail check is
recorded but never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cover import Cover, check_kl_separated, enlarge, lebesgue_number, multiplicity
from .errors import BoundViolationError, PreconditionError, ValidationError
from .partition import (PartitionOfUnity, bell_partition, partition_variation_profile,
                        pullback_partition)
from .report import check_le
from .space import CoarseMapCert, FiniteMetricSpace, is_c_net
from .witness import (DecayProfile, Witness, WitnessFamily, collapse, dirac_witness,
                      sparse_diff_norm, sparse_diff_norm_sq, tail_profile,
                      uniform_ball_witness, variation_profile)

_ID_TOL = 1e-9


def _require(records, kind=BoundViolationError):
    for rec in records:
        if not rec.passed:
            raise kind("%s failed: %r > %r at %r" % (rec.name, rec.lhs, rec.rhs, rec.witness))


def _sample_grid(space: FiniteMetricSpace, cap=24):
    """Deterministic subsample of the realized distances, ends included."""
    grid = space.realized_distances()
    if len(grid) <= cap:
        return grid
    keep = np.unique(np.linspace(0, len(grid) - 1, cap).astype(int))
    return [grid[i] for i in keep]


# ---------------------------------------------------------------- subspace

@dataclass(frozen=True)
class SubspaceWitnessResult:
    subspace: FiniteMetricSpace
    tagged: Witness       # xi over (ambient source, retraction image) entries
    collapsed: Witness    # eta, grouped by retraction image
    retraction: dict      # ambient point -> nearest subspace point
    checks: tuple         # exact identities, asserted
    tail_checks: tuple    # empirical S/3 control, recorded only


def subspace_construction(witness: Witness, members, tail_radii=None) -> SubspaceWitnessResult:
    """Restrict a bare witness on X to a subspace Y via nearest-point retraction.

    xi_y carries beta_y's coefficient at ambient point s on the entry
    (tag=s, point=p(s)); eta collapses by the retraction image. Norms and
    pair distances of xi match beta exactly because entries stay keyed by s.
    """
    if witness.tagged:
        raise ValidationError("subspace construction starts from a bare witness")
    ambient = witness.space
    members = ambient.sorted_ids(frozenset(members))
    if not members:
        raise ValidationError("subspace must be nonempty")
    sub = ambient.restrict(members)
    retraction = {s: ambient.nearest_point(s, members) for s in ambient.point_ids}
    vectors = {}
    for y in members:
        vectors[y] = {(s, retraction[s]): c
                      for (_, s), c in witness.vectors[y].items()}
    tagged = Witness(sub, vectors)
    eta = collapse(tagged)

    norm_dev = 0.0
    match_dev = 0.0
    contraction = 0.0
    for a in range(len(members)):
        y = members[a]
        norm_dev = max(norm_dev, abs(math.sqrt(
            sum(c * c for c in tagged.vectors[y].values())) - 1.0))
        for b in range(a + 1, len(members)):
            yp = members[b]
            dxi = sparse_diff_norm(tagged.vectors[y], tagged.vectors[yp])
            dbeta = sparse_diff_norm(witness.vectors[y], witness.vectors[yp])
            deta = sparse_diff_norm(eta.vectors[y], eta.vectors[yp])
            match_dev = max(match_dev, abs(dxi - dbeta))
            contraction = max(contraction, deta - dxi)
    checks = (
        check_le("subspace_xi_unit_norm_dev", norm_dev, 0.0, tol=_ID_TOL),
        check_le("subspace_xi_matches_beta_dev", match_dev, 0.0, tol=_ID_TOL),
        check_le("subspace_eta_nonexpansive_excess", contraction, 0.0, tol=1e-12),
    )
    _require(checks)

    if tail_radii is None:
        tail_radii = _sample_grid(sub)
    tail_radii = sorted(float(s) for s in tail_radii)
    eta_tail = tail_profile(eta, tail_radii)
    beta_tail_all = tail_profile(witness, sorted({float(math.floor(s / 3.0)) for s in tail_radii}
                                                 | {float(s) for s in tail_radii}))
    tail_checks = []
    for s, lhs in eta_tail:
        rhs = beta_tail_all.value_at(math.floor(s / 3.0)) + beta_tail_all.value_at(s)
        tail_checks.append(check_le("subspace_tail_S=%g" % s, lhs, rhs, tol=1e-12,
                                    note="empirical check, not an assumed theorem"))
    return SubspaceWitnessResult(sub, tagged, eta, retraction, checks, tuple(tail_checks))


def subspace_witness(witnesses, subspaces, tail_radii=None):
    """Family form: one subspace restriction per member."""
    members = witnesses.members if isinstance(witnesses, WitnessFamily) else tuple(witnesses)
    subspaces = tuple(subspaces)
    if len(members) != len(subspaces):
        raise ValidationError("need one subspace per family member")
    results = tuple(subspace_construction(w, ys, tail_radii)
                    for w, ys in zip(members, subspaces))
    return WitnessFamily(tuple(r.collapsed for r in results)), results


# --------------------------------------------------------------------- net

@dataclass(frozen=True)
class NetWitnessResult:
    witness: Witness
    c: float
    assignment: dict      # ambient point -> chosen net point
    checks: tuple         # variation/tail transfer bounds, asserted


def net_construction(ambient: FiniteMetricSpace, net_members, witness: Witness,
                     c=None, radii=None, tail_radii=None) -> NetWitnessResult:
    """Extend a witness on a c-net to the ambient space by xi_x = beta_{q(x)}."""
    net_members = ambient.sorted_ids(frozenset(net_members))
    if witness.tagged:
        raise ValidationError("net construction starts from a bare witness")
    if set(witness.space.point_ids) != set(net_members):
        raise ValidationError("witness must live on the net")
    idx = ambient.indices(net_members)
    covering = float(ambient.D[:, idx].min(axis=1).max())
    if c is None:
        c = covering
    c = float(c)
    if not is_c_net(ambient, net_members, c):
        raise PreconditionError(
            "net condition fails: covering radius %r exceeds c=%r" % (covering, c))
    q = {x: ambient.nearest_point(x, net_members) for x in ambient.point_ids}
    vectors = {x: dict(witness.vectors[q[x]]) for x in ambient.point_ids}
    out = Witness(ambient, vectors)

    if radii is None:
        radii = _sample_grid(ambient)
    radii = sorted(float(r) for r in radii)
    out_var = variation_profile(out, radii)
    base_var = variation_profile(witness, [r + 2.0 * c for r in radii])
    checks = [check_le("net_variation_R=%g" % r, lv, bv[1], tol=1e-12)
              for (r, lv), bv in zip(out_var, base_var)]

    if tail_radii is None:
        tail_radii = _sample_grid(ambient)
    tail_radii = sorted(float(s) for s in tail_radii if s > c)
    if tail_radii:
        out_tail = tail_profile(out, tail_radii)
        base_tail = tail_profile(witness, [s - c for s in tail_radii])
        for (s, lv), (_, bv) in zip(out_tail, base_tail):
            checks.append(check_le("net_tail_S=%g" % s, lv, bv, tol=1e-12))
    _require(checks)
    return NetWitnessResult(out, c, q, tuple(checks))


def net_witness(ambients, nets, witnesses, c, radii=None, tail_radii=None):
    """Family form of the net extension, one ambient/net/witness triple each."""
    members = witnesses.members if isinstance(witnesses, WitnessFamily) else tuple(witnesses)
    ambients = tuple(ambients)
    nets = tuple(nets)
    if not (len(ambients) == len(nets) == len(members)):
        raise ValidationError("family lengths disagree")
    results = tuple(net_construction(a, n, w, c, radii, tail_radii)
                    for a, n, w in zip(ambients, nets, members))
    return WitnessFamily(tuple(r.witness for r in results)), results


# -------------------------------------------------------------------- glue

@dataclass(frozen=True)
class GlueInput:
    """A partition of unity plus one piece witness per cover piece.

    Piece witness i must live on exactly U_i with the restricted metric;
    this keeps the variation check's two-sided/one-sided case split honest.
    """

    partition: PartitionOfUnity
    pieces: tuple

    def __post_init__(self):
        cover = self.partition.cover
        if len(self.pieces) != len(cover.pieces):
            raise ValidationError("need one piece witness per cover piece")
        space = self.partition.space
        for i, (piece, w) in enumerate(zip(cover.pieces, self.pieces)):
            if not isinstance(w, Witness):
                raise ValidationError("piece %d is not a witness" % i)
            have = set(w.space.point_ids)
            if have != set(piece):
                missing = space.sorted_ids(set(piece) - have) or \
                    space.sorted_ids(have - set(piece))
                raise ValidationError(
                    "piece %d witness does not cover point %r of the piece"
                    % (i, missing[0]))
            want = space.restrict(piece)
            if not np.allclose(w.space.D, want.D, atol=1e-12, rtol=0.0):
                raise ValidationError(
                    "piece %d witness metric is not the restricted metric" % i)


def make_glue_input(partition: PartitionOfUnity, piece_witnesses) -> GlueInput:
    if isinstance(piece_witnesses, dict):
        seq = [piece_witnesses[i] for i in range(len(partition.cover.pieces))]
    else:
        seq = list(piece_witnesses)
    return GlueInput(partition, tuple(seq))


@dataclass(frozen=True)
class GlueResult:
    witness: Witness
    partition: PartitionOfUnity
    checks: tuple
    glued_tail: DecayProfile
    equi_tail: DecayProfile


def glue_with_report(glue_input: GlueInput, tail_radii=None) -> GlueResult:
    """Glue piece witnesses: xi_x((i, tag), u) = sqrt(phi_i(x)) * beta^i_x(tag, u).

    Asserts the combination bound
        ||xi_x - xi_y||^2 <= 2 sum_i |phi_i(x) - phi_i(y)| + 2 max_i ||beta^i_x - beta^i_y||^2
    (max over pieces containing both points) and tail domination by the piece
    family's equi-tail on a sampled grid.
    """
    partition = glue_input.partition
    space = partition.space
    cover = partition.cover
    masses = partition.masses()
    vectors = {}
    for x in space.point_ids:
        vec = {}
        for i, phi in masses[x].items():
            root = math.sqrt(phi)
            for (tag, u), cc in glue_input.pieces[i].vectors[x].items():
                vec[((i, tag), u)] = root * cc
        vectors[x] = vec
    glued = Witness(space, vectors)

    ids = space.point_ids
    piece_sets = cover.pieces
    worst = None
    for a in range(len(ids)):
        x = ids[a]
        for b in range(a + 1, len(ids)):
            y = ids[b]
            lhs = sparse_diff_norm_sq(glued.vectors[x], glued.vectors[y])
            mx, my = masses[x], masses[y]
            s = sum(abs(v - my.get(i, 0.0)) for i, v in mx.items())
            s += sum(v for i, v in my.items() if i not in mx)
            common = 0.0
            for i, piece in enumerate(piece_sets):
                if x in piece and y in piece:
                    common = max(common, sparse_diff_norm_sq(
                        glue_input.pieces[i].vectors[x], glue_input.pieces[i].vectors[y]))
            rhs = 2.0 * s + 2.0 * common
            if worst is None or lhs - rhs > worst[0]:
                worst = (lhs - rhs, lhs, rhs, (x, y))
    if worst is None:
        variation_rec = check_le("glue_variation_bound", 0.0, 0.0, tol=_ID_TOL,
                                 note="single-point space, no pairs")
    else:
        variation_rec = check_le("glue_variation_bound", worst[1], worst[2], tol=_ID_TOL,
                                 witness=worst[3])

    if tail_radii is None:
        tail_radii = _sample_grid(space)
    tail_radii = sorted(float(s) for s in tail_radii) or [0.0]
    glued_tail = tail_profile(glued, tail_radii)
    acc = [0.0] * len(tail_radii)
    for w in glue_input.pieces:
        for j, (_, v) in enumerate(tail_profile(w, tail_radii)):
            acc[j] = max(acc[j], v)
    equi_tail = DecayProfile(tuple(zip(tail_radii, acc)))
    worst_tail = None
    for (s, lv), (_, ev) in zip(glued_tail, equi_tail):
        if worst_tail is None or lv - ev > worst_tail[0]:
            worst_tail = (lv - ev, lv, ev, s)
    tail_rec = check_le("glue_tail_domination", worst_tail[1], worst_tail[2], tol=_ID_TOL,
                        witness=worst_tail[3])
    checks = (variation_rec, tail_rec)
    _require(checks)
    return GlueResult(glued, partition, checks, glued_tail, equi_tail)


def glue(glue_input: GlueInput) -> Witness:
    return glue_with_report(glue_input).witness


def dirac_piece_family(cover: Cover):
    return {i: dirac_witness(cover.space.restrict(p)) for i, p in enumerate(cover.pieces)}


def uniform_ball_piece_family(cover: Cover, radius):
    return {i: uniform_ball_witness(cover.space.restrict(p), radius)
            for i, p in enumerate(cover.pieces)}


# ---------------------------------------------------------------- fibering

@dataclass(frozen=True)
class FiberingResult:
    witness: Witness
    pullback: PartitionOfUnity
    kept_pieces: tuple    # original piece index per kept preimage piece
    checks: tuple
    glue: GlueResult


def fibering_pipeline(cert: CoarseMapCert, partition: PartitionOfUnity,
                      piece_witnesses=None, radii=None, tail_radii=None) -> FiberingResult:
    """Pull a target partition back along a certified map, then glue.

    The pullback's variation at R is bounded by the target partition's
    variation at modulus(R); asserted on the sampled radii.
    """
    pulled, kept = pullback_partition(cert, partition)
    if piece_witnesses is None:
        piece_witnesses = dirac_piece_family(pulled.cover)
    gi = make_glue_input(pulled, piece_witnesses)
    glued = glue_with_report(gi, tail_radii=tail_radii)

    if radii is None:
        radii = _sample_grid(cert.source)
    radii = sorted(float(r) for r in radii)
    src_var = partition_variation_profile(pulled, radii)
    tgt_var = partition_variation_profile(partition, [cert.modulus(r) for r in radii])
    chain = tuple(
        check_le("fibering_variation_R=%g" % r, lv, tv[1], tol=1e-12, witness=pair)
        for (r, lv, pair), tv in zip(src_var, tgt_var))
    _require(chain)
    return FiberingResult(glued.witness, pulled, kept, chain + glued.checks, glued)


# --------------------------------------------------------------- separated

@dataclass(frozen=True)
class SeparatedResult:
    witness: Witness
    partition: PartitionOfUnity
    enlarged: Cover
    k: int
    L: float
    checks: tuple        # required: the end inequality variation(R) <= epsilon
    info: tuple          # the paper-side constant bookkeeping, informational
    glue: GlueResult


def separated_cover_pipeline(space: FiniteMetricSpace, cover: Cover, L, sigma, R,
                             epsilon, piece_witnesses=None, tail_radii=None) -> SeparatedResult:
    """Separated-cover route: enlarge a (k,2L)-separated cover, Bell, glue.

    k is the coloring's family count minus one. Preconditions (separation and
    k^2+1 <= L*sigma) raise; the end inequality (partition variation at R is
    at most epsilon) is recorded and, when it fails, falsifies the run
    without raising.
    """
    if cover.coloring is None:
        raise PreconditionError("separated pipeline needs a colored cover")
    k = len(set(cover.coloring)) - 1
    L = float(L)
    sigma = float(sigma)
    R = float(R)
    epsilon = float(epsilon)
    if L <= 0 or sigma <= 0:
        raise PreconditionError("need L > 0 and sigma > 0")
    if not check_kl_separated(cover, k, 2.0 * L):
        raise PreconditionError("cover is not (%d, %g)-separated" % (k, 2.0 * L))
    if k * k + 1 > L * sigma + 1e-12:
        raise PreconditionError(
            "hypothesis fails: k^2+1 = %g > L*sigma = %g" % (k * k + 1, L * sigma))

    enlarged = enlarge(cover, L)
    if multiplicity(enlarged) > k + 1:
        raise BoundViolationError("enlarged cover multiplicity exceeded k+1")
    partition = bell_partition(enlarged)
    if piece_witnesses is None:
        piece_witnesses = dirac_piece_family(enlarged)
    glued = glue_with_report(make_glue_input(partition, piece_witnesses),
                             tail_radii=tail_radii)

    var, pair = partition_variation_profile(partition, [R])[0][1:]
    end_rec = check_le("separated_variation_at_R", var, epsilon, witness=pair)
    info = (
        check_le("info_sigma_below_1_over_20R", sigma, 1.0 / (20.0 * R) if R > 0 else math.inf,
                 note="informational"),
        check_le("info_k2p1_ge_2(2k+2)(2k+3)Rsigma",
                 2.0 * (2 * k + 2) * (2 * k + 3) * R * sigma, k * k + 1.0,
                 note="informational"),
        check_le("info_k2p1_le_2Lsigmaeps", k * k + 1.0, 2.0 * L * sigma * epsilon,
                 note="informational"),
    )
    return SeparatedResult(glued.witness, partition, enlarged, k, L,
                           (end_rec,) + glued.checks, info, glued)
