"""Partitions of unity: the distance-ratio construction and its Lipschitz
bound, pullbacks along certified maps, and the variation functional."""

import pytest

from coarse_lab import (
    Cover,
    PartitionOfUnity,
    PreconditionError,
    ValidationError,
    bell_lipschitz_constant,
    bell_partition,
    check_coarse_map,
    cycle,
    multiplicity,
    partition_variation,
    partition_variation_with_pair,
    pullback_partition,
    space_from_graph,
    z2_ball,
    z_interval,
)
from oracles import dense_partition_variation


def path_graph(n):
    return space_from_graph(list(range(n)), [(i, i + 1) for i in range(n - 1)])


def p5_cover():
    s = path_graph(5)
    return s, Cover(s, [[0, 1, 2], [2, 3, 4]])


class TestPartitionValidation:
    def test_sums_must_be_one(self):
        s = path_graph(3)
        cov = Cover(s, [[0, 1, 2]])
        with pytest.raises(ValidationError):
            PartitionOfUnity(s, cov, [{0: 0.5, 1: 1.0, 2: 1.0}])

    def test_subordination_enforced(self):
        s = path_graph(3)
        cov = Cover(s, [[0, 1], [1, 2]])
        with pytest.raises(ValidationError) as err:
            PartitionOfUnity(s, cov, [{0: 1.0, 2: 1.0}, {1: 1.0}])
        assert "subordination" in str(err.value)

    def test_space_identity_required(self):
        s = path_graph(3)
        other = path_graph(3)
        cov = Cover(s, [[0, 1, 2]])
        with pytest.raises(ValidationError):
            PartitionOfUnity(other, cov, [{0: 1.0, 1: 1.0, 2: 1.0}])


class TestBellPartition:
    def test_single_piece_is_constant_one(self):
        s = path_graph(4)
        part = bell_partition(Cover(s, [list(s.point_ids)]))
        assert all(part.value(0, x) == 1.0 for x in s.point_ids)
        assert partition_variation(part, 10.0) == 0.0

    def test_zero_lebesgue_rejected_by_default(self):
        s, cov = p5_cover()
        with pytest.raises(PreconditionError):
            bell_partition(cov)

    def test_distance_ratio_values(self):
        # phi_0(x) = d(x, {3,4}) / (d(x, {3,4}) + d(x, {0,1}))
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        assert part.value(0, 0) == 1.0
        assert part.value(0, 2) == 0.5
        assert part.value(0, 4) == 0.0

    def test_lipschitz_constant_arithmetic(self):
        # multiplicity 1, Lebesgue 100 -> 4 * 5 / 100
        s = z_interval(0, 100)
        cov = Cover(s, [list(s.point_ids)])
        assert bell_lipschitz_constant(cov) == pytest.approx(0.2)

    def test_lipschitz_bound_holds_on_generated_covers(self):
        instances = []
        s1 = z_interval(0, 29)
        instances.append(Cover(s1, [list(range(0, 18)), list(range(12, 30))]))
        s2 = cycle(12)
        instances.append(Cover(s2, [[0, 1, 2, 3, 4, 5], [4, 5, 6, 7, 8, 9],
                                    [8, 9, 10, 11, 0, 1]]))
        s3 = z_interval(0, 40)
        instances.append(Cover(s3, [list(range(0, 15)), list(range(5, 30)),
                                    list(range(20, 41))]))
        for cov in instances:
            part = bell_partition(cov)
            C = bell_lipschitz_constant(cov)
            space = cov.space
            for x in space.point_ids:
                for y in space.point_ids:
                    if x == y:
                        continue
                    s = sum(abs(part.value(i, x) - part.value(i, y))
                            for i in range(len(cov.pieces)))
                    assert s <= C * space.d(x, y) + 1e-9


class TestVariation:
    def test_adjacent_pair_value(self):
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        value, pair = partition_variation_with_pair(part, 1)
        assert value == pytest.approx(1.0)
        assert set(pair) in ({1, 2}, {2, 3})

    def test_below_discreteness_scale_is_zero(self):
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        assert partition_variation(part, 0.5) == 0.0

    def test_matches_dense_oracle(self):
        s = z_interval(0, 20)
        cov = Cover(s, [list(range(0, 12)), list(range(6, 21))])
        part = bell_partition(cov)
        for R in (0.0, 1.0, 3.0, 7.0, 20.0):
            assert partition_variation(part, R) == pytest.approx(
                dense_partition_variation(part, R), abs=1e-12)


class TestPullback:
    def test_identity_map_keeps_values(self):
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        cert = check_coarse_map(s, s, {p: p for p in s.point_ids})
        pulled, kept = pullback_partition(cert, part)
        assert kept == (0, 1)
        for i in range(2):
            for x in s.point_ids:
                assert pulled.value(i, x) == part.value(i, x)

    def test_constant_map_freezes_target_values(self):
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        src = cycle(6)
        cert = check_coarse_map(src, s, {p: 1 for p in src.point_ids})
        pulled, kept = pullback_partition(cert, part)
        # only the piece containing the image point survives
        assert kept == (0,)
        assert all(pulled.value(0, x) == 1.0 for x in src.point_ids)

    def test_projection_chain_inequality(self):
        src = z2_ball(4)
        tgt = z_interval(-4, 4)
        cov = Cover(tgt, [list(range(-4, 1)), list(range(-1, 5))])
        part = bell_partition(cov)
        cert = check_coarse_map(src, tgt, {p: p[0] for p in src.point_ids})
        pulled, _ = pullback_partition(cert, part)
        for R in (1.0, 2.0, 3.0):
            assert partition_variation(pulled, R) <= \
                partition_variation(part, cert.modulus(R)) + 1e-12

    def test_pullback_sums_to_one(self):
        src = z2_ball(3)
        tgt = z_interval(-3, 3)
        cov = Cover(tgt, [list(range(-3, 2)), list(range(-1, 4))])
        part = bell_partition(cov)
        cert = check_coarse_map(src, tgt, {p: p[0] for p in src.point_ids})
        pulled, _ = pullback_partition(cert, part)
        for x in src.point_ids:
            total = sum(pulled.value(i, x) for i in range(len(pulled.cover.pieces)))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_wrong_space_rejected(self):
        s, cov = p5_cover()
        part = bell_partition(cov, require_lebesgue=False)
        other = path_graph(5)
        cert = check_coarse_map(other, other, {p: p for p in other.point_ids})
        with pytest.raises(ValidationError):
            pullback_partition(cert, part)


def test_multiplicity_of_generated_bell_cover_matches_constant():
    s = cycle(12)
    cov = Cover(s, [[0, 1, 2, 3, 4, 5], [4, 5, 6, 7, 8, 9], [8, 9, 10, 11, 0, 1]])
    k = multiplicity(cov)
    assert bell_lipschitz_constant(cov) == pytest.approx(
        (2 * k + 2) * (2 * k + 3) / 1.0)
