"""Fusion framework: fold semantics, the fused-step rule, union algebra."""

import numpy as np
import pytest

from apgm import (
    DatumMismatchError,
    EdgeMismatchError,
    Frame,
    FusionPolicy,
    GridConfig,
    GridMap,
    combine_dst,
    discount_grid,
    fuse_cells,
    fuse_grids,
    fuse_layers,
    fuse_patches,
    make_bba,
    temporal_update,
    vacuous,
)
from apgm.evidence import ConflictCounter
from apgm.grid import OCCUPANCY_FRAME, Layer, Patch
from apgm.requirements import RequirementProfile, TypeRequirement


def occ(o, f=0.0):
    return make_bba(OCCUPANCY_FRAME, [o, f])


def random_layer(rng, type_name, frame, step):
    layer = Layer(type_name, frame, step)
    k = len(frame)
    rows = rng.dirichlet(np.ones(k + 1), size=layer.cells)[:, :k]
    layer.masses[:] = rows.reshape(layer.masses.shape).astype(np.float32)
    return layer


# -- cells ---------------------------------------------------------------------


def test_fuse_cells_vacuous_neutral():
    b = occ(0.4, 0.3)
    fused = fuse_cells([vacuous(OCCUPANCY_FRAME), b])
    np.testing.assert_allclose(fused.masses, b.masses, atol=1e-12)


def test_fuse_cells_conflict_pair():
    frame = Frame(("A", "B"))
    fused = fuse_cells(
        [make_bba(frame, [0.9, 0.0]), make_bba(frame, [0.0, 0.9])]
    )
    np.testing.assert_allclose(
        fused.masses, [9.0 / 19.0, 9.0 / 19.0], atol=1e-9
    )
    assert fused.omega == pytest.approx(1.0 / 19.0, abs=1e-9)


def test_fuse_cells_total_conflict_fallback():
    counter = ConflictCounter()
    fused = fuse_cells([occ(1.0), occ(0.0, 1.0)], counter=counter)
    assert fused.omega == 1.0
    assert counter.cells == 1


# -- layers --------------------------------------------------------------------


def test_fused_step_capped_by_available():
    rng = np.random.default_rng(0)
    layers = [
        random_layer(rng, "occupancy", OCCUPANCY_FRAME, 5),
        random_layer(rng, "occupancy", OCCUPANCY_FRAME, 6),
    ]
    assert fuse_layers(layers, r_req=7).step == 6


def test_fused_step_capped_by_requirement():
    rng = np.random.default_rng(1)
    assert fuse_layers(
        [random_layer(rng, "occupancy", OCCUPANCY_FRAME, 7)], r_req=6
    ).step == 6


def test_single_layer_at_required_step_unchanged():
    rng = np.random.default_rng(2)
    layer = random_layer(rng, "occupancy", OCCUPANCY_FRAME, 6)
    fused = fuse_layers([layer], r_req=6)
    assert fused is not layer
    np.testing.assert_array_equal(fused.masses, layer.masses)


def test_fuse_layers_matches_scalar_combines():
    rng = np.random.default_rng(3)
    a = random_layer(rng, "occupancy", OCCUPANCY_FRAME, 3)
    b = random_layer(rng, "occupancy", OCCUPANCY_FRAME, 3)
    fused = fuse_layers([a, b], r_req=3)
    for idx in ((0, 0), (3, 5), (7, 7)):
        sa = make_bba(OCCUPANCY_FRAME, a.masses[idx].astype(np.float64))
        sb = make_bba(OCCUPANCY_FRAME, b.masses[idx].astype(np.float64))
        want, _ = combine_dst(sa, sb)
        np.testing.assert_allclose(fused.masses[idx], want.masses, atol=1e-6)


# -- patches -------------------------------------------------------------------


def test_patch_union_of_types():
    rng = np.random.default_rng(4)
    config = GridConfig()
    pa = Patch((0, 0), {"occupancy": random_layer(rng, "occupancy", OCCUPANCY_FRAME, 6)})
    pb = Patch(
        (0, 0),
        {"semantic": random_layer(rng, "semantic", config.types["semantic"], 6)},
    )
    fused = fuse_patches([pa, pb], FusionPolicy({"occupancy": 6, "semantic": 6}))
    assert set(fused.layers) == {"occupancy", "semantic"}


def test_patch_empty():
    fused = fuse_patches([Patch((2, 3))], FusionPolicy())
    assert fused.index == (2, 3)
    assert fused.layers == {}


def test_patch_mixed_steps_upsampled():
    rng = np.random.default_rng(5)
    pa = Patch((0, 0), {"occupancy": random_layer(rng, "occupancy", OCCUPANCY_FRAME, 7)})
    pb = Patch((0, 0), {"occupancy": random_layer(rng, "occupancy", OCCUPANCY_FRAME, 6)})
    fused = fuse_patches([pa, pb], FusionPolicy({"occupancy": 7}))
    assert fused.layers["occupancy"].step == 7


def test_patch_index_mismatch():
    with pytest.raises(ValueError):
        fuse_patches([Patch((0, 0)), Patch((1, 0))], FusionPolicy())


# -- grids ---------------------------------------------------------------------


def small_grid(rng, config, entries):
    g = GridMap(config)
    for index, tname, step in entries:
        g.set_layer(index, random_layer(rng, tname, config.types[tname], step))
    return g


def test_grid_union_semantics():
    rng = np.random.default_rng(6)
    config = GridConfig()
    policy = FusionPolicy({"occupancy": 3, "semantic": 3})
    for _ in range(100):
        grids = []
        for _ in range(int(rng.integers(1, 4))):
            entries = []
            for _ in range(int(rng.integers(0, 5))):
                index = (int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
                tname = "occupancy" if rng.random() < 0.6 else "semantic"
                entries.append((index, tname, int(rng.integers(1, 4))))
            # one layer per (index, type): keep last
            unique = {(i, t): (i, t, s) for i, t, s in entries}
            grids.append(small_grid(rng, config, list(unique.values())))
        fused = fuse_grids(grids, policy)
        # set-algebra oracle
        want_indices = set().union(*[set(g.patches) for g in grids])
        assert set(fused.patches) == want_indices
        for index in want_indices:
            want_types = set().union(
                *[set(g.patches[index].layers) for g in grids if index in g.patches]
            )
            assert set(fused.patches[index].layers) == want_types
            for tname in want_types:
                steps = [
                    g.patches[index].layers[tname].step
                    for g in grids
                    if index in g.patches and tname in g.patches[index].layers
                ]
                want_step = min(policy.r_req[tname], max(steps))
                assert fused.patches[index].layers[tname].step == want_step


def test_grid_disjoint_union_copies_values():
    rng = np.random.default_rng(7)
    config = GridConfig()
    a = small_grid(rng, config, [((0, 0), "occupancy", 4)])
    b = small_grid(rng, config, [((5, 5), "occupancy", 4)])
    fused = fuse_grids([a, b], FusionPolicy({"occupancy": 4}))
    np.testing.assert_array_equal(
        fused.patches[(0, 0)].layers["occupancy"].masses,
        a.patches[(0, 0)].layers["occupancy"].masses,
    )
    np.testing.assert_array_equal(
        fused.patches[(5, 5)].layers["occupancy"].masses,
        b.patches[(5, 5)].layers["occupancy"].masses,
    )


def test_grid_overlap_is_cellwise_combination():
    rng = np.random.default_rng(8)
    config = GridConfig()
    a = small_grid(rng, config, [((0, 0), "occupancy", 3), ((1, 0), "occupancy", 3)])
    b = small_grid(rng, config, [((1, 0), "occupancy", 3), ((2, 0), "occupancy", 3)])
    fused = fuse_grids([a, b], FusionPolicy({"occupancy": 3}))
    assert fused.cell_count() >= max(a.cell_count(), b.cell_count())
    assert fused.cell_count() <= a.cell_count() + b.cell_count()
    la = a.patches[(1, 0)].layers["occupancy"]
    lb = b.patches[(1, 0)].layers["occupancy"]
    lf = fused.patches[(1, 0)].layers["occupancy"]
    for idx in ((0, 0), (2, 7), (7, 1)):
        want, _ = combine_dst(
            make_bba(OCCUPANCY_FRAME, la.masses[idx].astype(np.float64)),
            make_bba(OCCUPANCY_FRAME, lb.masses[idx].astype(np.float64)),
        )
        np.testing.assert_allclose(lf.masses[idx], want.masses, atol=1e-6)


def test_grid_order_invariance():
    rng = np.random.default_rng(9)
    config = GridConfig()
    grids = [
        small_grid(rng, config, [((0, 0), "occupancy", 3), ((1, 1), "occupancy", 2)]),
        small_grid(rng, config, [((0, 0), "occupancy", 3)]),
        small_grid(rng, config, [((0, 0), "occupancy", 2), ((1, 1), "occupancy", 2)]),
    ]
    policy = FusionPolicy({"occupancy": 3})
    forward = fuse_grids(grids, policy)
    backward = fuse_grids(list(reversed(grids)), policy)
    assert set(forward.patches) == set(backward.patches)
    for index in forward.patches:
        lf = forward.patches[index].layers["occupancy"]
        lb = backward.patches[index].layers["occupancy"]
        np.testing.assert_allclose(lf.masses, lb.masses, atol=1e-9)


def test_grid_inputs_not_mutated():
    rng = np.random.default_rng(10)
    config = GridConfig()
    a = small_grid(rng, config, [((0, 0), "occupancy", 3)])
    b = small_grid(rng, config, [((0, 0), "occupancy", 3)])
    snap_a = a.patches[(0, 0)].layers["occupancy"].masses.copy()
    fuse_grids([a, b], FusionPolicy({"occupancy": 3}))
    np.testing.assert_array_equal(
        a.patches[(0, 0)].layers["occupancy"].masses, snap_a
    )


def test_grid_datum_mismatch():
    a = GridMap(GridConfig(datum=(0.0, 0.0)))
    b = GridMap(GridConfig(datum=(1.0, 0.0)))
    with pytest.raises(DatumMismatchError):
        fuse_grids([a, b], FusionPolicy())


def test_grid_edge_mismatch():
    a = GridMap(GridConfig(edge_length=12.8))
    b = GridMap(GridConfig(edge_length=6.4))
    with pytest.raises(EdgeMismatchError):
        fuse_grids([a, b], FusionPolicy())


# -- temporal accumulation -------------------------------------------------------


def test_temporal_alpha_zero_equals_current():
    rng = np.random.default_rng(11)
    config = GridConfig()
    previous = small_grid(rng, config, [((4, 4), "occupancy", 3)])
    current = small_grid(rng, config, [((0, 0), "occupancy", 3)])
    policy = FusionPolicy({"occupancy": 3}, alpha_age=0.0)
    out = temporal_update(previous, current, policy)
    assert set(out.patches) == {(0, 0)}
    np.testing.assert_allclose(
        out.patches[(0, 0)].layers["occupancy"].masses,
        current.patches[(0, 0)].layers["occupancy"].masses,
        atol=1e-7,
    )


def test_temporal_alpha_one_keeps_previous():
    rng = np.random.default_rng(12)
    config = GridConfig()
    previous = small_grid(rng, config, [((0, 0), "occupancy", 3)])
    current = GridMap(config)
    policy = FusionPolicy({"occupancy": 3}, alpha_age=1.0)
    out = temporal_update(previous, current, policy)
    np.testing.assert_allclose(
        out.patches[(0, 0)].layers["occupancy"].masses,
        previous.patches[(0, 0)].layers["occupancy"].masses,
        atol=1e-7,
    )


def test_temporal_decay_over_empty_cycles():
    config = GridConfig()
    grid = GridMap(config)
    layer = grid.get_or_create_layer((0, 0), "occupancy", 3)
    layer.masses[2, 2, 0] = 0.9
    policy = FusionPolicy({"occupancy": 3}, alpha_age=0.95)
    for _ in range(10):
        grid = temporal_update(grid, GridMap(config), policy)
    got = grid.patches[(0, 0)].layers["occupancy"].masses[2, 2, 0]
    assert got == pytest.approx(0.9 * 0.95**10, abs=1e-5)


def test_temporal_horizon_culling():
    rng = np.random.default_rng(13)
    config = GridConfig()
    previous = small_grid(
        rng, config, [((0, 0), "occupancy", 3), ((40, 40), "occupancy", 3)]
    )
    profile = RequirementProfile(
        {"occupancy": TypeRequirement(True, 20.0, 1.6)}, vehicle_pose=(0.0, 0.0, 0.0)
    )
    policy = FusionPolicy({"occupancy": 3}, alpha_age=1.0)
    out = temporal_update(previous, GridMap(config), policy, profile)
    assert set(out.patches) == {(0, 0)}


def test_discount_grid_scales_masses():
    rng = np.random.default_rng(14)
    config = GridConfig()
    g = small_grid(rng, config, [((0, 0), "occupancy", 3)])
    before = g.patches[(0, 0)].layers["occupancy"].masses.copy()
    out = discount_grid(g, 0.5)
    np.testing.assert_allclose(
        out.patches[(0, 0)].layers["occupancy"].masses,
        before * np.float32(0.5),
        atol=1e-7,
    )
    np.testing.assert_array_equal(
        g.patches[(0, 0)].layers["occupancy"].masses, before
    )
