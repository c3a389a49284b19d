"""Group models, word metrics, quasi-action certification, and the orbit
pipeline, with exhaustively verifiable constants on small examples."""

import math

import pytest

from coarse_lab import (
    BoundViolationError,
    Cover,
    PreconditionError,
    ValidationError,
    certify_quasi_action,
    cycle,
    cyclic_group,
    free_group_ball,
    group_pipeline,
    GroupModel,
    left_translation,
    orbit_map,
    product_of_cyclic,
    quasi_stabilizer,
    uniform_ball_witness,
    word_metric_space,
    z_ball,
    z_interval,
)


def rotation_maps(n_group, n_cycle):
    """g acts on the n_cycle-cycle by rotation through g mod n_cycle."""
    return {g: {x: (x + g) % n_cycle for x in range(n_cycle)}
            for g in range(n_group)}


def perturbed_maps(n_group, n_cycle, ga, xa, mod, shift):
    out = {}
    for g in range(n_group):
        out[g] = {x: (x + g + ((ga * g + xa * x) % mod) - shift) % n_cycle
                  for x in range(n_cycle)}
    return out


class TestGroupModels:
    def test_cyclic_group_basics(self):
        g = cyclic_group(6)
        assert len(g) == 6
        assert g.identity == 0
        assert g.generators == (1, 5)
        assert g.is_finite_group

    def test_generators_must_be_symmetric(self):
        with pytest.raises(ValidationError):
            GroupModel([0, 1, 2], (1,), {(a, b): (a + b) % 3
                                         for a in range(3) for b in range(3)},
                       0, {0: 0, 1: 2, 2: 1})

    def test_identity_not_a_generator(self):
        with pytest.raises(ValidationError):
            GroupModel([0, 1], (0, 1), {}, 0, {0: 0, 1: 1})

    def test_z_ball_is_truncated(self):
        g = z_ball(5)
        assert not g.is_finite_group
        assert g.truncation_radius == 5
        assert (3, 4) not in g.mult
        assert g.mult[(2, 3)] == 5

    def test_free_group_ball_size(self):
        g = free_group_ball(2, 2)
        assert len(g) == 17  # 1 + 4 + 12

    def test_product_of_cyclic(self):
        g = product_of_cyclic([2, 2])
        assert len(g) == 4
        assert g.mult[((1, 0), (1, 1))] == (0, 1)


class TestWordMetric:
    def test_cyclic_distances(self):
        sp = word_metric_space(cyclic_group(6))
        assert sp.d(0, 3) == 3.0
        assert sp.d(0, 5) == 1.0

    def test_klein_four_diameter(self):
        sp = word_metric_space(product_of_cyclic([2, 2]))
        assert sp.diameter == 2.0

    def test_left_invariance(self):
        g = cyclic_group(7)
        sp = word_metric_space(g)
        for a in g.elements:
            for x in g.elements:
                for y in g.elements:
                    assert sp.d(g.mult[(a, x)], g.mult[(a, y)]) == sp.d(x, y)

    def test_free_ball_word_lengths(self):
        g = free_group_ball(2, 2)
        sp = word_metric_space(g)
        assert sp.d("", "a") == 1.0
        assert sp.d("", "ab") == 2.0
        assert sp.d("a", "b") == 2.0


class TestCertify:
    def test_isometric_rotation(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4), rotation_maps(12, 4))
        assert act.A == 0.0
        assert act.B == 0.0
        for r in (0.0, 1.0, 2.0):
            assert act.ell(r) == r

    def test_trivial_action(self):
        g = cyclic_group(4)
        sp = z_interval(0, 3)
        maps = {a: {x: x for x in sp.point_ids} for a in g.elements}
        act = certify_quasi_action(g, sp, maps)
        assert act.A == 0.0 and act.B == 0.0

    def test_perturbed_constants(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12),
                                   perturbed_maps(60, 12, 5, 1, 3, 1))
        assert act.A == 1.0
        assert act.B <= 3.0
        assert act.ell(1.0) <= 3.0
        # witnesses attain the constants
        assert act.space.d(act.maps[act.group.identity][act.A_witness],
                           act.A_witness) == act.A
        g, h, x = act.B_witness
        gh = act.group.mult[(g, h)]
        assert act.space.d(act.maps[g][act.maps[h][x]], act.maps[gh][x]) == act.B

    def test_inverse_defect_within_a_plus_b(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12),
                                   perturbed_maps(60, 12, 5, 1, 3, 1))
        rec, = act.checks
        assert rec.passed
        assert rec.rhs == act.A + act.B

    def test_ceilings_raise(self):
        with pytest.raises(PreconditionError):
            certify_quasi_action(cyclic_group(60), cycle(12),
                                 perturbed_maps(60, 12, 5, 1, 3, 1), A_ceiling=0.0)
        with pytest.raises(PreconditionError):
            certify_quasi_action(cyclic_group(60), cycle(12),
                                 perturbed_maps(60, 12, 5, 1, 3, 1),
                                 ell_ceiling=lambda r: r)

    def test_partial_maps_rejected(self):
        g = cyclic_group(3)
        sp = cycle(3)
        maps = rotation_maps(3, 3)
        del maps[2][0]
        with pytest.raises(ValidationError):
            certify_quasi_action(g, sp, maps)


class TestQuasiStabilizer:
    def clamped_z_action(self, N, lo, hi):
        sp = z_interval(lo, hi)
        g = z_ball(N)
        maps = {a: {x: min(max(x + a, lo), hi) for x in sp.point_ids}
                for a in g.elements}
        return certify_quasi_action(g, sp, maps)

    def test_clamped_translation_stabilizer(self):
        act = self.clamped_z_action(10, -30, 30)
        stab = quasi_stabilizer(act, 0, 3)
        assert set(stab.members) == set(range(-3, 4))

    def test_rotation_kernel(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4), rotation_maps(12, 4))
        assert set(quasi_stabilizer(act, 0, 0).members) == {0, 4, 8}

    def test_perturbed_contains_kernel(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4),
                                   perturbed_maps(12, 4, 5, 1, 3, 1))
        members = set(quasi_stabilizer(act, 0, 1).members)
        assert {0, 4, 8} <= members

    def test_monotone_in_threshold(self):
        act = self.clamped_z_action(8, -20, 20)
        small = set(quasi_stabilizer(act, 0, 2).members)
        large = set(quasi_stabilizer(act, 0, 5).members)
        assert small <= large

    def test_empty_stabilizer_raises(self):
        sp = z_interval(0, 5)
        g = cyclic_group(2)
        maps = {0: {x: x for x in sp.point_ids},
                1: {x: 5 - x for x in sp.point_ids}}
        act = certify_quasi_action(g, sp, maps)
        # identity always fixes, so emptiness only happens at invalid T < 0
        with pytest.raises(ValidationError):
            quasi_stabilizer(act, 0, -1)


class TestOrbitMap:
    def test_isometric_orbit(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12), rotation_maps(60, 12))
        res = orbit_map(act, 0)
        assert res.lam == 1.0
        assert res.edge_bound == 1.0
        assert res.checks[0].passed
        assert res.cert.assignment[25] == 1

    def test_edge_bound_formula(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12),
                                   perturbed_maps(60, 12, 5, 1, 3, 1))
        res = orbit_map(act, 0)
        assert res.edge_bound == act.ell(res.lam) + act.B
        assert res.checks[0].lhs <= res.edge_bound + 1e-12


class TestLeftTranslation:
    def test_within_model(self):
        g = cyclic_group(5)
        assert left_translation(g, 2, [0, 1, 4]) == {0: 2, 1: 3, 4: 1}

    def test_truncation_escape(self):
        g = z_ball(5)
        with pytest.raises(PreconditionError):
            left_translation(g, 3, [4])


def three_arc_cover(space, n, width, step):
    return Cover(space, tuple(frozenset((a + j) % n for j in range(width))
                              for a in range(0, n, step)))


class TestGroupPipeline:
    def test_single_piece_cover_is_degenerate_but_passes(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4), rotation_maps(12, 4))
        cover = Cover(act.space, (frozenset(act.space.point_ids),))
        res = group_pipeline(act, 0, cover, R=1.0)
        assert res.k == 0
        assert len(res.kept_pieces) == 1
        assert all(c.passed for c in res.checks)

    def test_isometric_sixty_on_twelve(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12), rotation_maps(60, 12))
        cover = three_arc_cover(act.space, 12, 6, 4)
        res = group_pipeline(act, 0, cover, R=1.0)
        assert res.k == 1 and res.L == 1.0
        assert res.epsilon == 40.0
        assert res.reps == (2, 6, 10)
        assert res.T == 4.0 and res.threshold == 4.0
        assert len(res.stabilizer.members) == 45
        chain = next(c for c in res.checks if c.name == "group_epsilon_chain")
        assert chain.passed
        assert chain.lhs == pytest.approx(2.0 / 3.0)
        assert all(c.passed for c in res.checks)
        # group partition sums to one over every element
        masses = res.partition.masses()
        for g in res.partition.space.point_ids:
            assert sum(masses[g].values()) == pytest.approx(1.0)

    def test_perturbed_sixty_on_twelve(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12),
                                   perturbed_maps(60, 12, 5, 1, 3, 1))
        cover = three_arc_cover(act.space, 12, 6, 4)
        res = group_pipeline(act, 0, cover, R=1.0)
        assert res.epsilon == 160.0
        assert res.T == 5.0
        assert res.threshold == 12.0
        assert len(res.stabilizer.members) == 60
        assert all(c.passed for c in res.checks)

    def test_epsilon_below_admissible_raises(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12), rotation_maps(60, 12))
        cover = three_arc_cover(act.space, 12, 6, 4)
        with pytest.raises(PreconditionError):
            group_pipeline(act, 0, cover, R=1.0, epsilon=20.0)

    def test_zero_lebesgue_cover_raises(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4), rotation_maps(12, 4))
        cover = Cover(act.space, (frozenset({0, 1}), frozenset({1, 2, 3})))
        with pytest.raises(PreconditionError):
            group_pipeline(act, 0, cover, R=1.0)

    def test_uniform_ball_provider(self):
        act = certify_quasi_action(cyclic_group(60), cycle(12), rotation_maps(60, 12))
        cover = three_arc_cover(act.space, 12, 6, 4)
        res = group_pipeline(act, 0, cover, R=1.0,
                             provider=lambda sp: uniform_ball_witness(sp, 1))
        assert all(c.passed for c in res.checks)

    def test_cover_must_live_on_space(self):
        act = certify_quasi_action(cyclic_group(12), cycle(4), rotation_maps(12, 4))
        other = cycle(4)
        with pytest.raises(ValidationError):
            group_pipeline(act, 0, Cover(other, (frozenset(other.point_ids),)), R=1.0)
