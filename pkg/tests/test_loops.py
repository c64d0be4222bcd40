import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopgas import loops as lps
from loopgas.bridge import BridgePath, sample_bridge
from loopgas.model import (Box, ExternalConfiguration, ModelParams,
                           PairPotential, zero_potential)

BETA = 1.0


def still_loop(anchor, k, S, type_index=0):
    """Loop whose path never moves: every sample equals the anchor."""
    anchor = np.asarray(anchor, dtype=float)
    samples = np.tile(anchor, (k * S + 1, 1))
    return lps.Loop(type_index, BridgePath(samples, k, S, BETA))


def square_well(height=1.0, range_=1.0, hard_core=0.0):
    return PairPotential(profile="square_well", hard_core=hard_core,
                         range_=range_, height=height)


def one_type(pot, z=0.5, d=2):
    return ModelParams(d, 1, BETA, (z,), [[pot]])


def free_one_type(z=0.5, d=2):
    return one_type(zero_potential(), z, d)


BOX = Box((0.0, 0.0), 8.0)


def config(loop_list, S=4):
    return lps.LoopConfig(BOX, S, loop_list, None)


class TestMultiplicityCounts:
    def test_total_multiplicity(self):
        objs = [still_loop((0.0, 0.0), 2, 4), still_loop((1.0, 1.0), 3, 4)]
        assert lps.total_multiplicity(objs, 0) == 5

    def test_empty(self):
        assert lps.total_multiplicity([], 0) == 0
        assert lps.log_multiplicity_product([], 0) == 0.0

    def test_open_path_counts(self):
        p = sample_bridge(np.zeros(2), np.ones(2), 4, 4, BETA,
                          np.random.default_rng(0))
        assert lps.total_multiplicity([lps.OpenPath(0, p)], 0) == 4

    def test_log_multiplicity_product(self):
        objs = [still_loop((0.0, 0.0), 2, 4), still_loop((1.0, 1.0), 3, 4)]
        assert abs(lps.log_multiplicity_product(objs, 0) - math.log(6.0)) < 1e-14

    def test_single_loop_k5(self):
        objs = [still_loop((0.0, 0.0), 5, 2)]
        assert lps.total_multiplicity(objs, 0) == 5
        assert abs(lps.log_multiplicity_product(objs, 0) - math.log(5.0)) < 1e-14


class TestBoxIndicators:
    def test_all_k1_trivially_avoid(self):
        box0 = Box((0.0, 0.0), 0.5)
        objs = [still_loop((0.0, 0.0), 1, 4)]  # anchored inside box0
        assert lps.avoids_box_at_step_times(objs, box0)

    def test_k2_midpoint_inside_fails(self):
        box0 = Box((0.0, 0.0), 0.5)
        lp = still_loop((0.0, 0.0), 2, 4)
        assert not lps.avoids_box_at_step_times([lp], box0)

    def test_k3_interior_outside_passes(self):
        box0 = Box((0.0, 0.0), 0.5)
        samples = np.tile(np.array([3.0, 3.0]), (3 * 2 + 1, 1))
        samples[0] = samples[-1] = np.array([0.0, 0.0])  # anchor inside box0
        p = lps.OpenPath(0, BridgePath(samples, 3, 2, BETA))
        assert lps.avoids_box_at_step_times([p], box0)

    def test_confined(self):
        box0 = Box((0.0, 0.0), 0.5)
        assert lps.confined_to_box([still_loop((0.2, 0.2), 2, 4)], box0)
        assert not lps.confined_to_box([still_loop((0.7, 0.0), 1, 4)], box0)
        assert lps.confined_to_box([], box0)


class TestInteractionEnergy:
    def test_free_gas_zero(self):
        objs = [still_loop((0.0, 0.0), 2, 4), still_loop((0.3, 0.0), 1, 4)]
        assert lps.interaction_energy(objs, free_one_type()) == 0.0

    def test_two_still_loops_in_range_give_beta(self):
        # square well of unit height: one leg pair in range at every slice
        m = one_type(square_well(1.0, 1.0))
        objs = [still_loop((0.0, 0.0), 1, 8), still_loop((0.5, 0.0), 1, 8)]
        h = lps.interaction_energy(objs, m)
        assert abs(h - BETA) < 1e-12

    def test_hard_core_violation_infinite(self):
        m = one_type(square_well(0.0, 0.4, hard_core=0.4))
        objs = [still_loop((0.0, 0.0), 1, 1), still_loop((0.2, 0.0), 1, 1)]
        assert lps.interaction_energy(objs, m) == math.inf

    def test_chain_rule(self):
        # conditional energy includes the target's internal energy, so the
        # joint energy telescopes either way round
        m = one_type(square_well(0.7, 1.2))
        a = [still_loop((0.0, 0.0), 2, 4)]
        b = [still_loop((0.5, 0.0), 1, 4), still_loop((-0.4, 0.3), 1, 4)]
        h_all = lps.interaction_energy(a + b, m)
        h_a = lps.interaction_energy(a, m)
        h_b = lps.interaction_energy(b, m)
        assert abs(h_all - (h_a + lps.interaction_energy(b, m, conditioning=a))) < 1e-10
        assert abs(h_all - (h_b + lps.interaction_energy(a, m, conditioning=b))) < 1e-10

    def test_cross_term_symmetry(self):
        m = one_type(square_well(0.7, 1.2))
        a = [still_loop((0.0, 0.0), 2, 4)]
        b = [still_loop((0.5, 0.0), 1, 4)]
        cross_ab = lps.interaction_energy(a, m, conditioning=b) \
            - lps.interaction_energy(a, m)
        cross_ba = lps.interaction_energy(b, m, conditioning=a) \
            - lps.interaction_energy(b, m)
        assert abs(cross_ab - cross_ba) < 1e-12
        # two leg pairs in range at weight 0.7 each
        assert abs(cross_ab - 2 * 0.7 * BETA) < 1e-12

    def test_monotone_in_separation(self):
        m = one_type(square_well(1.0, 1.0))
        base = [still_loop((0.0, 0.0), 1, 4)]
        near = lps.interaction_energy(base, m,
                                      conditioning=[still_loop((0.3, 0.0), 1, 4)])
        far = lps.interaction_energy(base, m,
                                     conditioning=[still_loop((2.0, 0.0), 1, 4)])
        assert near > far == 0.0

    def test_external_points(self):
        m = one_type(square_well(1.0, 1.0))
        box = Box((0.0, 0.0), 1.0)
        ext = ExternalConfiguration(box, [np.array([[1.5, 0.0]])], max_range=1.0)
        target = [still_loop((0.9, 0.0), 1, 8)]
        h = lps.interaction_energy(target, m, external=ext)
        assert abs(h - BETA) < 1e-12  # distance 0.6 inside the well everywhere

    def test_same_object_legs_interact(self):
        # two legs of one loop sitting on top of each other: k=2 still loop
        m = one_type(square_well(1.0, 1.0))
        h = lps.interaction_energy([still_loop((0.0, 0.0), 2, 8)], m)
        assert abs(h - BETA) < 1e-12

    def test_mixed_grid_rejected(self):
        m = one_type(square_well(1.0, 1.0))
        a = [still_loop((0.0, 0.0), 1, 4)]
        b = [still_loop((0.5, 0.0), 1, 8)]
        with pytest.raises(ValueError):
            lps.interaction_energy(a, m, conditioning=b)


class TestLogWeight:
    def test_empty_configuration(self):
        assert lps.log_weight(config([]), free_one_type()) == 0.0

    def test_single_k2_free(self):
        cfg = config([still_loop((0.0, 0.0), 2, 4)])
        got = lps.log_weight(cfg, free_one_type(0.5))
        assert abs(got - (2.0 * math.log(0.5) - math.log(2.0))) < 1e-12
        assert abs(got - (-2.0794)) < 1e-4

    def test_hard_core_overlap_minus_inf(self):
        m = one_type(square_well(0.0, 0.4, hard_core=0.4))
        cfg = config([still_loop((0.0, 0.0), 1, 4),
                      still_loop((0.1, 0.0), 1, 4)])
        assert lps.log_weight(cfg, m) == -math.inf

    def test_exclusion_box_zeroes_weight(self):
        box0 = Box((0.0, 0.0), 0.5)
        cfg = config([still_loop((0.0, 0.0), 2, 4)])
        assert lps.log_weight(cfg, free_one_type(), exclusion_box=box0) == -math.inf

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 3),
                              st.floats(-3.0, 3.0),
                              st.floats(-3.0, 3.0)),
                    min_size=0, max_size=3),
           st.integers(0, 2 ** 31 - 1))
    def test_weight_bound_property(self, layout, seed):
        # log weight <= sum_j K_j log z_j <= 0 for any configuration
        g = np.random.default_rng(seed)
        m = one_type(square_well(0.8, 1.0), z=0.6)
        loop_list = []
        for k, ax, ay in layout:
            anchor = np.array([ax, ay])
            loop_list.append(lps.Loop(0, sample_bridge(anchor, anchor, k, 4,
                                                       BETA, g)))
        cfg = config(loop_list)
        logw = lps.log_weight(cfg, m)
        K = lps.total_multiplicity(loop_list, 0)
        assert logw <= K * math.log(0.6) + 1e-9
        assert K * math.log(0.6) <= 0.0


class TestSerialization:
    def test_round_trip_bit_exact(self):
        g = np.random.default_rng(11)
        loop_list = [lps.Loop(0, sample_bridge(np.array([0.3, -0.2]),
                                               np.array([0.3, -0.2]), 2, 4,
                                               BETA, g))]
        cfg = lps.LoopConfig(BOX, 4, loop_list, None)
        text = lps.dumps_config(cfg)
        back = lps.loads_config(text)
        assert back.slices_per_beta == cfg.slices_per_beta
        assert back.box.center == cfg.box.center
        assert back.box.half_side == cfg.box.half_side
        assert len(back.loops) == 1
        assert back.loops[0].type_index == 0
        assert back.loops[0].k == 2
        assert np.array_equal(back.loops[0].samples, loop_list[0].samples)

    def test_round_trip_with_external(self):
        ext = ExternalConfiguration(BOX, [np.array([[8.5, 0.0]])], max_range=1.0)
        cfg = lps.LoopConfig(BOX, 4, [], ext)
        back = lps.loads_config(lps.dumps_config(cfg), max_range=1.0)
        assert np.array_equal(back.external.points[0], ext.points[0])

    def test_reject_garbage(self):
        with pytest.raises(ValueError):
            lps.loads_config("not a config")
