import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magvox import fixtures
from magvox.ingest import GeomRecord, MagRecord
from magvox.kinematics import MachineConfig
from magvox.voxel_model import (
    Contact,
    Design,
    DuplicateIdError,
    Magnetization,
    MissingCounterpartError,
    Vec3,
    Voxel,
    box_intersection_volume,
    classify_adjacency,
    merge_datasets,
    split_design,
    validate_design,
)

from .conftest import geom_records, mag_records


def cube(vid, x, y, z, a=0.05, m=(0.0, 0.0, 1.0)):
    return Voxel(vid, Vec3(x, y, z), Vec3(a, a, a), Magnetization.from_components(*m))


def test_vec3_rejects_nan():
    with pytest.raises(ValueError):
        Vec3(0.0, math.nan, 0.0)


def test_volume_in_cubic_meters():
    v = cube(1, 0, 0, 0)
    assert v.volume == pytest.approx(0.05**3 * 1e-9, rel=1e-12)


def test_merge_single_record():
    d = merge_datasets([MagRecord(1, 0, 0, 1)], [GeomRecord(1, 0.05, 0.05, 0.05, 0, 0, 0)])
    assert len(d) == 1
    v = d.voxels[0]
    assert v.magnetization.direction == Vec3(0, 0, 1)
    assert v.position == Vec3(0, 0, 0)
    assert v.dims == Vec3(0.05, 0.05, 0.05)


def test_merge_missing_counterparts_named():
    with pytest.raises(MissingCounterpartError) as exc:
        merge_datasets(
            [MagRecord(1, 0, 0, 1), MagRecord(2, 0, 0, 1)],
            [GeomRecord(1, 1, 1, 1, 0, 0, 0), GeomRecord(3, 1, 1, 1, 0, 0, 0)],
        )
    assert exc.value.ids == [2, 3]
    assert "2" in str(exc.value) and "3" in str(exc.value)


def test_merge_duplicate_ids():
    with pytest.raises(DuplicateIdError):
        merge_datasets([MagRecord(1, 0, 0, 1), MagRecord(1, 1, 0, 0)], [GeomRecord(1, 1, 1, 1, 0, 0, 0)])


def test_merge_normalizes_and_keeps_magnitude():
    d = merge_datasets([MagRecord(1, 3e5, 0, 4e5)], [GeomRecord(1, 1, 1, 1, 0, 0, 0)])
    m = d.voxels[0].magnetization
    assert m.magnitude == pytest.approx(5e5)
    assert m.direction.x == pytest.approx(0.6) and m.direction.z == pytest.approx(0.8)


def test_corner_convention_shifts_to_center():
    d = merge_datasets([MagRecord(1, 0, 0, 1)], [GeomRecord(1, 0.05, 0.1, 0.2, 0, 0, 0)], position_convention="corner")
    assert d.voxels[0].position == Vec3(0.025, 0.05, 0.1)


def test_worm_fixture_shape():
    d = fixtures.worm()
    assert len(d) == 4
    assert all(v.dims == Vec3(0.05, 0.05, 0.05) for v in d)


@settings(max_examples=50)
@given(mag_records(), st.randoms(use_true_random=False))
def test_merge_is_order_insensitive(mags, rnd):
    geoms = [GeomRecord(m.id, 1.0, 1.0, 1.0, float(m.id), 0.0, 0.0) for m in mags]
    ref = merge_datasets(mags, geoms)
    m2, g2 = list(mags), list(geoms)
    rnd.shuffle(m2)
    rnd.shuffle(g2)
    assert merge_datasets(m2, g2) == ref


@settings(max_examples=50)
@given(st.data())
def test_merge_split_round_trip(data):
    mags = data.draw(mag_records())
    geoms = data.draw(geom_records(ids=[m.id for m in mags]))
    m_out, g_out = split_design(merge_datasets(mags, geoms))
    assert sorted(g_out, key=lambda r: r.id) == sorted(geoms, key=lambda r: r.id)
    ref = {m.id: m for m in mags}
    for r in m_out:
        src = ref[r.id]
        # direction + magnitude storage costs at most a few ulps
        for a, b in ((r.mx, src.mx), (r.my, src.my), (r.mz, src.mz)):
            assert a == pytest.approx(b, rel=1e-14, abs=1e-300)


# -- adjacency ---------------------------------------------------------------------


def test_face_contact():
    d = Design((cube(1, 0, 0, 0), cube(2, 0.05, 0, 0)))
    assert classify_adjacency(d).contact(1, 2) is Contact.FACE


def test_edge_and_corner_and_none():
    d = Design((cube(1, 0, 0, 0), cube(2, 0.05, 0.05, 0), cube(3, 0.05, 0.05, 0.05), cube(4, 1, 1, 1)))
    adj = classify_adjacency(d)
    assert adj.contact(1, 2) is Contact.EDGE
    assert adj.contact(1, 3) is Contact.CORNER
    assert adj.contact(1, 4) is Contact.NONE


def test_tolerance_absorbs_tiny_gap():
    d = Design((cube(1, 0, 0, 0), cube(2, 0.05 + 5e-7, 0, 0)))
    assert classify_adjacency(d, tol=1e-6).contact(1, 2) is Contact.FACE
    assert classify_adjacency(d, tol=1e-8).contact(1, 2) is Contact.NONE


def test_zipper_corner_layout():
    adj = classify_adjacency(fixtures.zipper())
    for k in range(1, 6):
        assert adj.contact(k, k + 1) is Contact.CORNER
    assert not adj.of_class(Contact.FACE)
    assert not adj.overlap_volumes


def test_zipper_overlap_volume():
    delta = 0.005
    adj = classify_adjacency(fixtures.zipper(overlap=delta))
    for k in range(1, 6):
        assert adj.contact(k, k + 1) is Contact.OVERLAP
        assert adj.overlap_volume(k, k + 1) == pytest.approx(delta**3, rel=1e-9)


def _mc_volume(lo_a, hi_a, lo_b, hi_b, rng, n):
    pts = rng.uniform(lo_a, hi_a, size=(n, 3))
    inside = np.all((pts >= lo_b) & (pts <= hi_b), axis=1)
    return inside.mean() * np.prod(hi_a - lo_a), inside.mean()


def test_overlap_volume_matches_sampling_on_random_pairs():
    rng = np.random.default_rng(7)
    n = 40_000
    checked = 0
    while checked < 120:
        lo_a = rng.uniform(0, 1, 3)
        hi_a = lo_a + rng.uniform(0.2, 1.0, 3)
        lo_b = lo_a + rng.uniform(-0.5, 0.8, 3)
        hi_b = lo_b + rng.uniform(0.2, 1.0, 3)
        exact = box_intersection_volume(lo_a, hi_a, lo_b, hi_b)
        est, p = _mc_volume(lo_a, hi_a, lo_b, hi_b, rng, n)
        sigma = math.sqrt(max(p * (1 - p), 1 / n) / n) * np.prod(hi_a - lo_a)
        assert abs(est - exact) <= 5 * sigma + 1e-12
        checked += 1


@settings(max_examples=60)
@given(
    st.lists(st.tuples(*[st.integers(-4, 4)] * 3), min_size=2, max_size=6, unique=True),
    st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 3),
)
def test_adjacency_symmetric_and_translation_invariant(cells, shift):
    # grid-aligned half-pitch offsets keep the classes exact under translation
    a = 0.05
    vox = tuple(cube(i + 1, c[0] * a / 2, c[1] * a / 2, c[2] * a / 2) for i, c in enumerate(cells))
    d = Design(vox)
    base = classify_adjacency(d, tol=1e-9)
    moved = classify_adjacency(d.translated(Vec3(*shift)), tol=1e-9)
    assert [c for *_, c in base.pairs] == [c for *_, c in moved.pairs]
    for i, j, c in base.pairs:
        assert base.contact(j, i) is c


# -- validation --------------------------------------------------------------------


def test_valid_single_voxel_has_empty_report():
    assert len(validate_design(fixtures.worm(n=1))) == 0


def test_non_positive_dimension_error():
    d = Design((Voxel(1, Vec3(0, 0, 0), Vec3(0, 0.05, 0.05), Magnetization(Vec3(0, 0, 1))),))
    report = validate_design(d)
    assert not report.ok
    assert report.with_code("non-positive-dimension")
    assert "non-positive dimension" in report.errors[0].message


def test_duplicate_and_non_unit_and_zero_magnetization():
    d = Design(
        (
            Voxel(1, Vec3(0, 0, 0), Vec3(1, 1, 1), Magnetization(Vec3(0, 0, 2))),
            Voxel(1, Vec3(5, 0, 0), Vec3(1, 1, 1), Magnetization(Vec3(0, 0, 0), 0.0)),
        )
    )
    codes = {i.code for i in validate_design(d).errors}
    assert {"duplicate-id", "non-unit-direction", "zero-magnetization"} <= codes


def test_passive_voxel_allowed():
    d = Design((Voxel(1, Vec3(0, 0, 0), Vec3(1, 1, 1), Magnetization(Vec3(0, 0, 0), 0.0, passive=True)),))
    assert validate_design(d).ok


def test_travel_limit_error_with_config():
    d = Design((cube(1, 60.0, 0, 0),))
    assert validate_design(d).ok
    report = validate_design(d, MachineConfig())
    assert report.with_code("outside-travel")
    assert report.errors[0].voxel_ids == (1,)


def test_zipper_corner_warnings():
    report = validate_design(fixtures.zipper())
    assert report.ok
    corner = report.with_code("corner-only-connectivity")
    assert sorted(i.voxel_ids for i in corner) == [(k, k + 1) for k in range(1, 6)]
    assert all(i.severity.value == "warning" for i in corner)


def test_face_connected_design_has_no_connectivity_warnings():
    assert not validate_design(fixtures.worm()).warnings
    assert not validate_design(fixtures.gripper()).warnings


def test_disconnected_warning():
    d = Design((cube(1, 0, 0, 0), cube(2, 1, 0, 0)))
    assert validate_design(d).with_code("disconnected")
