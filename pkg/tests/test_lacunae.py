import math

import numpy as np
import pytest

from sobolev_jets.core.geometry import build_dyadic_nets
from sobolev_jets.core.lacunae import (
    LacunaConstants,
    classify_lacunae,
    contacting_pairs,
    diameter_pair,
    lacuna_projector,
    lacuna_statistics,
    lacuna_violations,
    project_lacunae,
)
from sobolev_jets.core.whitney import whitney_decompose


def _projected(points, depth_cap=None):
    points = np.asarray(points, dtype=float)
    cover = whitney_decompose(points, depth_cap=depth_cap)
    consts = LacunaConstants()
    lacunae = project_lacunae(classify_lacunae(cover), build_dyadic_nets(points), consts, cover)
    return cover, consts, lacunae, contacting_pairs(lacunae, cover)


class TestConstants:
    def test_derived_from_tau(self):
        consts = LacunaConstants(tau=4.0)
        assert consts.sigma == 132.0
        assert consts.k == math.floor(math.log2(360.0 * 132.0)) + 2
        assert consts.gamma == pytest.approx(1.8e6)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            LacunaConstants(tau=0.0)


class TestSingleton:
    def test_one_unbounded_lacuna(self):
        cover, consts, lacunae, contacts = _projected([[0.3]])
        assert len(lacunae) == 1
        L = lacunae[0]
        assert L.is_true and L.unbounded
        assert L.V == (0,)
        assert (L.center, L.rule) == (0, "singleton")
        assert len(L.cube_ids) == len(cover)
        assert contacts == []

    def test_projector_rule(self):
        cover, consts, lacunae, _ = _projected([[0.3]])
        nets = build_dyadic_nets([[0.3]])
        assert lacuna_projector(lacunae[0], nets, consts, cover) == (0, "singleton")


class TestTwoPoints:
    @pytest.fixture(scope="class")
    def built(self):
        return _projected([[0.0], [1.0]])

    def test_kinds(self, built):
        cover, _, lacunae, _ = built
        true_sets = {L.V for L in lacunae if L.is_true}
        assert {(0,), (1,), (0, 1)} <= true_sets
        unbounded = [L for L in lacunae if L.unbounded]
        assert len(unbounded) == 1 and unbounded[0].V == (0, 1)

    def test_every_cube_in_one_lacuna(self, built):
        cover, _, lacunae, _ = built
        ids = sorted(i for L in lacunae for i in L.cube_ids)
        assert ids == list(range(len(cover)))

    def test_singleton_lacunae_keep_their_point(self, built):
        _, _, lacunae, _ = built
        for L in lacunae:
            if len(L.V) == 1:
                assert L.center == L.V[0]
                assert L.rule == "singleton"

    def test_contacts_are_ordered_and_distinct(self, built):
        _, _, _, contacts = built
        assert contacts
        for c in contacts:
            assert c.L < c.L_prime

    def test_no_violations(self, built):
        cover, consts, lacunae, contacts = built
        found = lacuna_violations(lacunae, contacts, cover, consts)
        assert all(not v for v in found.values()), found

    def test_statistics(self, built):
        cover, _, lacunae, contacts = built
        stats = lacuna_statistics(lacunae, contacts, cover)
        assert stats["lacunae"] == len(lacunae)
        assert stats["true"] + stats["elementary"] == len(lacunae)
        assert stats["count_ratio"] == len(lacunae) / 2
        assert "singleton" in stats["rules"]


class TestPlanarInstances:
    @pytest.mark.parametrize(
        "points",
        [
            [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8], [-0.7, 0.4], [0.5, -0.9]],
            [[0.0, 0.0], [0.05, 0.0], [1.0, 1.0], [1.0, 0.9], [-1.0, 0.5]],
        ],
    )
    def test_no_violations_in_two_dimensions(self, points):
        cover, consts, lacunae, contacts = _projected(points)
        found = lacuna_violations(lacunae, contacts, cover, consts)
        assert all(not v for v in found.values()), found
        assert sum(L.unbounded for L in lacunae) == 1


def test_diameter_pair_is_lexicographic():
    # lexicographic order visits (0, 1) before (1, 0)
    points = np.asarray([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert diameter_pair(points, [0, 1, 2, 3]) == (0, 2)
