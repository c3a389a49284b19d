"""Group models with word metrics, certified coarse quasi-actions,
quasi-stabilizers, and the orbit pipeline that turns a cover of the acted-on
space into a glued witness on the group.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .construct import glue_with_report, make_glue_input, subspace_construction
from .cover import Cover, enlarge, lebesgue_number, multiplicity
from .errors import (BoundViolationError, DisconnectedGraphError, PreconditionError,
                     ValidationError)
from .partition import PartitionOfUnity, bell_partition, partition_variation_with_pair
from .report import check_le
from .space import FiniteMetricSpace, StepModulus, check_coarse_map
from .witness import Witness, dirac_witness, transport, variation_profile


class GroupModel:
    """A finite group, or the ball of radius N in a finitely generated group.

    ``mult`` is a partial multiplication table: defined exactly when the
    product of two stored elements is itself stored. ``inverse`` is total on
    stored elements for every builder in this module.
    """

    def __init__(self, elements, generators, mult, identity, inverse,
                 truncation_radius=None, name="group"):
        elements = tuple(elements)
        if len(set(elements)) != len(elements):
            raise ValidationError("duplicate group elements")
        stored = set(elements)
        if identity not in stored:
            raise ValidationError("identity is not a stored element")
        generators = tuple(g for g in generators)
        for s in generators:
            if s not in stored:
                raise ValidationError("generator %r is not stored" % (s,))
            if s == identity:
                raise ValidationError("the identity is not allowed as a generator")
        inverse = dict(inverse)
        for s in generators:
            if inverse.get(s) not in set(generators):
                raise ValidationError("generating set is not symmetric at %r" % (s,))
        mult = dict(mult)
        for (a, b), c in mult.items():
            if a not in stored or b not in stored or c not in stored:
                raise ValidationError("multiplication entry (%r, %r) leaves the model" % (a, b))
        self.elements = elements
        self.generators = generators
        self.mult = mult
        self.identity = identity
        self.inverse = inverse
        self.truncation_radius = truncation_radius
        self.name = name
        self._word_space = None

    @property
    def is_finite_group(self) -> bool:
        return self.truncation_radius is None

    def __len__(self):
        return len(self.elements)


def cyclic_group(n) -> GroupModel:
    n = int(n)
    if n < 1:
        raise ValidationError("cyclic group order must be >= 1")
    elements = tuple(range(n))
    mult = {(a, b): (a + b) % n for a in elements for b in elements}
    inverse = {a: (-a) % n for a in elements}
    gens = tuple(sorted({1 % n, (n - 1) % n} - {0}))
    return GroupModel(elements, gens, mult, 0, inverse, name="Z_%d" % n)


def product_of_cyclic(factors) -> GroupModel:
    factors = tuple(int(m) for m in factors)
    if not factors or any(m < 1 for m in factors):
        raise ValidationError("factors must be positive")
    import itertools
    elements = tuple(itertools.product(*[range(m) for m in factors]))
    mult = {(a, b): tuple((x + y) % m for x, y, m in zip(a, b, factors))
            for a in elements for b in elements}
    inverse = {a: tuple((-x) % m for x, m in zip(a, factors)) for a in elements}
    identity = tuple(0 for _ in factors)
    gens = set()
    for i, m in enumerate(factors):
        if m == 1:
            continue
        e = tuple(1 if j == i else 0 for j in range(len(factors)))
        gens.add(e)
        gens.add(tuple((m - 1) if j == i else 0 for j in range(len(factors))))
    return GroupModel(elements, tuple(sorted(gens)), mult, identity, inverse,
                      name="Z_" + "x".join(str(m) for m in factors))


def z_ball(radius) -> GroupModel:
    N = int(radius)
    if N < 1:
        raise ValidationError("truncation radius must be >= 1")
    elements = tuple(range(-N, N + 1))
    mult = {(a, b): a + b for a in elements for b in elements if abs(a + b) <= N}
    inverse = {a: -a for a in elements}
    return GroupModel(elements, (-1, 1), mult, 0, inverse,
                      truncation_radius=N, name="Z|%d" % N)


def _reduce_word(word: str) -> str:
    out = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def free_group_ball(rank, radius) -> GroupModel:
    N = int(radius)
    rank = int(rank)
    if not (1 <= rank <= 6):
        raise ValidationError("free rank must be between 1 and 6")
    if N < 1:
        raise ValidationError("truncation radius must be >= 1")
    letters = "abcdef"[:rank]
    gens = tuple(letters) + tuple(c.upper() for c in letters)
    frontier = [""]
    elements = [""]
    for _ in range(N):
        nxt = []
        for w in frontier:
            for s in gens:
                r = _reduce_word(w + s)
                if len(r) == len(w) + 1:
                    nxt.append(r)
        frontier = nxt
        elements.extend(nxt)
    stored = set(elements)
    mult = {}
    for a in elements:
        for b in elements:
            r = _reduce_word(a + b)
            if r in stored:
                mult[(a, b)] = r
    inverse = {a: a[::-1].swapcase() for a in elements}
    return GroupModel(tuple(elements), gens, mult, "", inverse,
                      truncation_radius=N, name="F_%d|%d" % (rank, N))


_LEFT_INVARIANCE_LIMIT = 200


def word_metric_space(model: GroupModel) -> FiniteMetricSpace:
    """BFS metric of the Cayley graph on the stored elements.

    On a truncated ball, paths are forced to stay inside the ball, so the
    values are upper bounds for the true word metric; the structure tag
    records the truncation radius. Finite groups get an exhaustive
    left-invariance assertion (up to 200 elements).
    """
    if model._word_space is not None:
        return model._word_space
    n = len(model.elements)
    ix = {g: i for i, g in enumerate(model.elements)}
    adj = [[] for _ in range(n)]
    for g in model.elements:
        for s in model.generators:
            h = model.mult.get((g, s))
            if h is not None:
                adj[ix[g]].append(ix[h])
    D = np.full((n, n), -1, dtype=np.int64)
    for start in range(n):
        D[start, start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if D[start, v] < 0:
                    D[start, v] = D[start, u] + 1
                    queue.append(v)
    if (D < 0).any():
        a, b = (int(v) for v in np.argwhere(D < 0)[0])
        raise DisconnectedGraphError(
            "generators do not connect %r to %r within the stored elements"
            % (model.elements[a], model.elements[b]))
    space = FiniteMetricSpace(model.elements, D.astype(np.float64),
                              structure=("group", model.name, model.truncation_radius),
                              validate=False)
    if model.is_finite_group and n <= _LEFT_INVARIANCE_LIMIT:
        for g in model.elements:
            perm = [ix[model.mult[(g, h)]] for h in model.elements]
            if not np.array_equal(space.D[np.ix_(perm, perm)], space.D):
                raise ValidationError(
                    "word metric is not left-invariant at %r" % (g,))
    model._word_space = space
    return space


@dataclass(frozen=True)
class CoarseQuasiAction:
    """Per-element self-maps with exhaustively certified constants.

    ell is exact on the space's realized distance grid; A and B are tight
    maxima with recorded attaining witnesses.
    """

    group: GroupModel
    space: FiniteMetricSpace
    maps: dict
    ell: StepModulus
    A: float
    B: float
    A_witness: object
    B_witness: object
    checks: tuple
    word_space: FiniteMetricSpace = field(repr=False)


def certify_quasi_action(group: GroupModel, space: FiniteMetricSpace, maps,
                         sampled_radii=None, ell_ceiling=None,
                         A_ceiling=None, B_ceiling=None) -> CoarseQuasiAction:
    """Compute tight ell/A/B for a total family of self-maps.

    Finite data always certifies with some constants; optional ceilings turn
    a too-large constant into a PreconditionError with its witness.
    """
    maps = {g: dict(m) for g, m in dict(maps).items()}
    for g in group.elements:
        if g not in maps:
            raise ValidationError("no map for group element %r" % (g,))
        m = maps[g]
        for x in space.point_ids:
            if x not in m:
                raise ValidationError("map of %r is not total, missing %r" % (g, x))
            if m[x] not in space:
                raise ValidationError("map of %r sends %r outside the space" % (g, x))
    idx = {g: np.array([space.index(maps[g][x]) for x in space.point_ids])
           for g in group.elements}

    image_dist = np.zeros_like(space.D)
    for g in group.elements:
        gi = idx[g]
        np.maximum(image_dist, space.D[np.ix_(gi, gi)], out=image_dist)
    if sampled_radii is None:
        sampled_radii = space.realized_distances()
    samples = sorted(set(float(r) for r in sampled_radii) | {space.diameter})
    iu = np.triu_indices(len(space))
    ds = space.D[iu]
    di = image_dist[iu]
    order = np.argsort(ds, kind="stable")
    prefix = np.maximum.accumulate(di[order])
    ds_sorted = ds[order]
    values = []
    for r in samples:
        pos = int(np.searchsorted(ds_sorted, r + 1e-12, side="right")) - 1
        values.append(float(prefix[pos]) if pos >= 0 else 0.0)
    ell = StepModulus(zip(samples, values))

    id_idx = idx[group.identity]
    base = np.arange(len(space))
    a_vals = space.D[base, id_idx]
    A = float(a_vals.max())
    A_witness = space.point_ids[int(a_vals.argmax())]

    B = 0.0
    B_witness = None
    for (g, h), gh in group.mult.items():
        comp = idx[g][idx[h]]
        vals = space.D[comp, idx[gh]]
        m = float(vals.max())
        if m > B:
            B = m
            B_witness = (g, h, space.point_ids[int(vals.argmax())])

    inv_worst = 0.0
    inv_at = None
    for g in group.elements:
        gi = group.inverse.get(g)
        if gi is None or (g, gi) not in group.mult:
            continue
        comp = idx[g][idx[gi]]
        vals = space.D[comp, base]
        m = float(vals.max())
        if m > inv_worst:
            inv_worst = m
            inv_at = (g, space.point_ids[int(vals.argmax())])
    checks = (check_le("quasi_action_inverse_defect", inv_worst, A + B,
                       tol=1e-12, witness=inv_at),)
    if not checks[0].passed:
        raise BoundViolationError("inverse defect exceeded A+B at %r" % (inv_at,))

    if A_ceiling is not None and A > float(A_ceiling) + 1e-12:
        raise PreconditionError("A=%g exceeds ceiling %g at %r" % (A, A_ceiling, A_witness))
    if B_ceiling is not None and B > float(B_ceiling) + 1e-12:
        raise PreconditionError("B=%g exceeds ceiling %g at %r" % (B, B_ceiling, B_witness))
    if ell_ceiling is not None:
        for r, v in ell.samples():
            if v > float(ell_ceiling(r)) + 1e-12:
                raise PreconditionError(
                    "ell(%g)=%g exceeds ceiling %g" % (r, v, float(ell_ceiling(r))))
    return CoarseQuasiAction(group, space, maps, ell, A, B, A_witness, B_witness,
                             checks, word_metric_space(group))


@dataclass(frozen=True)
class QuasiStabilizer:
    base_point: object
    threshold: float
    members: tuple        # in word-space stored order
    space: FiniteMetricSpace


def quasi_stabilizer(action: CoarseQuasiAction, x0, T) -> QuasiStabilizer:
    if x0 not in action.space:
        raise ValidationError("base point %r not in the space" % (x0,))
    if T < 0:
        raise ValidationError("threshold must be >= 0")
    members = tuple(g for g in action.group.elements
                    if action.space.d(action.maps[g][x0], x0) <= float(T) + 1e-9)
    if not members:
        raise PreconditionError("quasi-stabilizer at T=%g is empty" % float(T))
    return QuasiStabilizer(x0, float(T), members,
                           action.word_space.restrict(members))


def left_translation(group: GroupModel, g, members):
    """h -> g*h on the given elements; fails if a product leaves the model."""
    out = {}
    for h in members:
        gh = group.mult.get((g, h))
        if gh is None:
            raise PreconditionError(
                "translate %r * %r leaves the stored elements (truncation)" % (g, h))
        out[h] = gh
    return out


@dataclass(frozen=True)
class OrbitMapResult:
    cert: object          # CoarseMapCert word space -> space
    lam: float
    edge_bound: float
    checks: tuple


def orbit_map(action: CoarseQuasiAction, x0) -> OrbitMapResult:
    """pi(g) = f_g(x0), certified with its exact modulus and the edge bound.

    Adjacent group elements (g, gs) land within ell(lam) + B of each other;
    lam is the largest generator displacement of the base point.
    """
    if x0 not in action.space:
        raise ValidationError("base point %r not in the space" % (x0,))
    assignment = {g: action.maps[g][x0] for g in action.group.elements}
    cert = check_coarse_map(action.word_space, action.space, assignment)
    lam = max(action.space.d(action.maps[s][x0], x0) for s in action.group.generators) \
        if action.group.generators else 0.0
    edge_bound = action.ell(lam) + action.B
    worst = 0.0
    worst_at = None
    gens = set(action.group.generators)
    for (g, s), gs in action.group.mult.items():
        if s not in gens:
            continue
        v = action.space.d(assignment[g], assignment[gs])
        if v > worst:
            worst = v
            worst_at = (g, s)
    rec = check_le("orbit_edge_bound", worst, edge_bound, tol=1e-12, witness=worst_at)
    if not rec.passed:
        raise BoundViolationError("orbit edge bound failed at %r" % (worst_at,))
    return OrbitMapResult(cert, float(lam), float(edge_bound), (rec,))


def dirac_stabilizer_provider(stab_space: FiniteMetricSpace) -> Witness:
    return dirac_witness(stab_space)


@dataclass(frozen=True)
class GroupPipelineResult:
    witness: Witness
    partition: PartitionOfUnity
    group_cover: Cover
    kept_pieces: tuple
    reps: tuple           # g_i per kept piece
    T: float
    threshold: float
    stabilizer: QuasiStabilizer
    epsilon: float
    lam: float
    k: int
    L: float
    checks: tuple
    info: tuple
    truncation_flags: tuple
    subspace_results: tuple
    glue: object
    orbit: OrbitMapResult


def group_pipeline(action: CoarseQuasiAction, x0, cover: Cover, R,
                   epsilon=None, provider=None, tail_radii=None) -> GroupPipelineResult:
    """Orbit route: Bell on the cover, pull to the group, glue translated
    stabilizer witnesses over the enlarged-piece preimages.

    Preconditions raise (Lebesgue admissibility, enlarged multiplicity, the
    stabilizer containment needed to define the piece witnesses); the final
    epsilon-chain on the group partition is recorded and can falsify the run
    without raising.
    """
    G = action.group
    gsp = action.word_space
    X = action.space
    if cover.space is not X:
        raise ValidationError("cover must live on the acted-on space")
    R = float(R)
    if R < 0:
        raise ValidationError("R must be >= 0")
    orbit = orbit_map(action, x0)
    pi = orbit.cert.assignment

    k = multiplicity(cover) - 1
    L = lebesgue_number(cover)
    if L <= 0:
        raise PreconditionError("Lebesgue number 0 < required positive")
    needed = 2.0 * action.ell(orbit.lam) * R * (2 * k + 2) * (2 * k + 3)
    if epsilon is None:
        epsilon = needed / L if L > 0 else math.inf
    epsilon = float(epsilon)
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0")
    required_L = needed / epsilon
    if L + 1e-12 < required_L:
        raise PreconditionError(
            "Lebesgue number %g < required %g" % (L, required_L))
    admissible = check_le("lebesgue_admissible", required_L, L, tol=1e-12)

    enlarged = enlarge(cover, L)
    if multiplicity(enlarged) > k + 1:
        raise PreconditionError(
            "enlarged cover multiplicity %d exceeds k+1=%d"
            % (multiplicity(enlarged), k + 1))
    bell = bell_partition(cover)

    kept = []
    preimages = []
    for i, piece in enumerate(enlarged.pieces):
        pre = tuple(g for g in gsp.point_ids if pi[g] in piece)
        if pre:
            kept.append(i)
            preimages.append(frozenset(pre))
    group_cover = Cover(gsp, preimages)
    values = []
    for i in kept:
        vals = {}
        for g in gsp.point_ids:
            v = bell.value(i, pi[g])
            if v > 0.0:
                vals[g] = v
        values.append(vals)
    psi = PartitionOfUnity(gsp, group_cover, values)

    reps = []
    radii_T = []
    for pos, i in enumerate(kept):
        vids = X.indices(X.sorted_ids(enlarged.pieces[i]))
        best_g, best_r = None, math.inf
        for g in G.elements:
            xg = X.index(action.maps[g][x0])
            r = float(X.D[xg, vids].max())
            if r < best_r:
                best_g, best_r = g, r
        reps.append(best_g)
        radii_T.append(best_r)
    T = max(radii_T)
    threshold = action.A + 2.0 * action.B + action.ell(T)
    stab = quasi_stabilizer(action, x0, threshold)
    stab_set = set(stab.members)

    flags = []
    if G.truncation_radius is not None:
        flags.append("group model truncated at radius %d; word distances are "
                     "upper bounds" % G.truncation_radius)

    incl_worst = (-math.inf, None)
    for pos, i in enumerate(kept):
        inv = G.inverse.get(reps[pos])
        if inv is None:
            raise PreconditionError("no stored inverse for representative %r" % (reps[pos],))
        for g in preimages[pos]:
            h = G.mult.get((inv, g))
            if h is None:
                raise PreconditionError(
                    "translate %r * %r leaves the stored elements (truncation)"
                    % (inv, g))
            disp = X.d(action.maps[h][x0], x0)
            if disp > incl_worst[0]:
                incl_worst = (disp, (i, g))
            if h not in stab_set:
                raise PreconditionError(
                    "piece %d: %r translates to %r outside the %g-quasi-stabilizer"
                    % (i, g, h, threshold))
    inclusion = check_le("stabilizer_inclusion", max(incl_worst[0], 0.0), threshold,
                         tol=1e-9, witness=incl_worst[1])

    if provider is None:
        provider = dirac_stabilizer_provider
    base_witness = provider(stab.space)
    if not isinstance(base_witness, Witness) or \
            set(base_witness.space.point_ids) != stab_set:
        raise ValidationError("provider witness is not on the quasi-stabilizer")

    piece_witnesses = {}
    sub_results = []
    for pos, i in enumerate(kept):
        mapping = left_translation(G, reps[pos], stab.members)
        translated = gsp.restrict(tuple(mapping.values()))
        moved = transport(base_witness, mapping, translated)
        res = subspace_construction(moved, preimages[pos])
        sub_results.append(res)
        piece_witnesses[pos] = res.collapsed
    glue_res = glue_with_report(make_glue_input(psi, piece_witnesses),
                                tail_radii=tail_radii)

    var, pair = partition_variation_with_pair(psi, R)
    chain = check_le("group_epsilon_chain", var, epsilon, witness=pair)
    piece_var = 0.0
    for res in sub_results:
        piece_var = max(piece_var, variation_profile(res.collapsed, [R])[0][1])
    info = (check_le("info_piece_variation_le_eps_over_4", piece_var, epsilon / 4.0,
                     note="informational"),)

    checks = (admissible, inclusion, chain) + orbit.checks + glue_res.checks
    for res in sub_results:
        checks = checks + res.checks
    return GroupPipelineResult(
        glue_res.witness, psi, group_cover, tuple(kept), tuple(reps), float(T),
        float(threshold), stab, epsilon, orbit.lam, k, L, checks, info,
        tuple(flags), tuple(sub_results), glue_res, orbit)
