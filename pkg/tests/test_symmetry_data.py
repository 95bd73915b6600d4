import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from visnet.errors import ParameterError, UndefinedScoreError
from visnet.frontend import opponent_channels
from visnet.symmetry_data import (
    DATASETS,
    LEVEL_TARGETS,
    MANIFEST,
    SymmetrySpec,
    apply_transform,
    build_dataset,
    dataset_spec,
    gen_human_like,
    gen_parted,
    gen_rgb_symmetric,
    gen_sierpinski,
    gen_square,
    level_indices,
    load_symmetry_dir,
    sierpinski_mask,
    symmetry_score,
)

rng_of = np.random.default_rng


# ------------------------------------------------------------------ scoring


def test_symmetric_square_scores_one():
    img = np.zeros((10, 10))
    img[2:8, 2:8] = 1.0
    assert symmetry_score(img) == 1.0
    assert symmetry_score(img, axis="horizontal") == 1.0


def test_left_half_object_scores_zero():
    img = np.zeros((10, 10))
    img[3:7, 0:4] = 1.0
    assert symmetry_score(img) == 0.0


def test_hand_counted_score():
    img = np.zeros((4, 4))
    img[0, :] = 1.0  # symmetric row: 4 matched
    img[1, 0] = 1.0  # unmatched pixel and its mirror hole: 2 mismatches
    assert symmetry_score(img) == pytest.approx(1 - 2 / 6)


def test_gray_threshold_and_rgb_luminance():
    img = np.zeros((4, 4))
    img[:, 0] = 0.6
    img[:, 3] = 0.55  # differ by 0.05 < 0.1
    assert symmetry_score(img) == 1.0
    img[:, 3] = 0.4
    assert symmetry_score(img) == 0.0
    rgb = np.zeros((4, 4, 3))
    rgb[:, 0] = (1.0, 0.0, 0.0)
    rgb[:, 3] = (0.0, 0.0, 1.0)  # different colours, equal luminance
    assert symmetry_score(rgb) == 1.0


def test_blank_image_is_undefined():
    with pytest.raises(UndefinedScoreError):
        symmetry_score(np.zeros((5, 5)))
    with pytest.raises(ParameterError):
        symmetry_score(np.ones((4, 4)), axis="diagonal")


def test_mask_mismatch_counts():
    img = np.full((2, 4), 0.5)
    mask = np.array([[1, 1, 1, 1], [1, 0, 0, 0]], dtype=bool)
    # row 1: pixel 0 in the mask, its mirror (col 3) is not
    assert symmetry_score(img, mask=mask) == pytest.approx(1 - 2 / 6)


@given(arrays(np.float64, (6, 7), elements=st.sampled_from([0.0, 1.0])))
def test_score_invariant_under_mirroring(img):
    if not img.any():
        return
    s = symmetry_score(img)
    assert 0.0 <= s <= 1.0
    assert symmetry_score(img[:, ::-1]) == s


# --------------------------------------------------------------- generators

GENERATORS = {
    "square": lambda lvl, r: gen_square(lvl, 32, r),
    "triangle": lambda lvl, r: gen_sierpinski(2, lvl, 32, r),
    "parted": lambda lvl, r: gen_parted(lvl, 2, 32, r),
    "someparted": lambda lvl, r: gen_parted(lvl, 2, 32, r, someparted=True),
    "human": lambda lvl, r: gen_human_like(lvl, 32, r),
    "rgb": lambda lvl, r: gen_rgb_symmetric(lvl, 32, r),
}


@pytest.mark.parametrize("family", GENERATORS)
@pytest.mark.parametrize("level", range(5))
def test_generators_hit_their_targets(family, level):
    for seed in range(15):
        item = GENERATORS[family](level, rng_of(seed))
        assert item.label == level
        assert abs(item.measured_symmetry - LEVEL_TARGETS[level]) <= 0.05
        assert symmetry_score(item.pixels, mask=item.mask) == item.measured_symmetry


@pytest.mark.parametrize("family", GENERATORS)
def test_generators_are_deterministic(family):
    a = GENERATORS[family](3, rng_of(7))
    b = GENERATORS[family](3, rng_of(7))
    assert np.array_equal(a.pixels, b.pixels)


def test_level_zero_square_is_untouched():
    item = gen_square(0, 32, rng_of(0))
    s = item.info["side"]
    assert item.measured_symmetry == 1.0
    assert item.pixels.sum() == s * s


def test_bad_level_rejected():
    with pytest.raises(ParameterError):
        gen_square(5, 32, rng_of(0))
    with pytest.raises(ParameterError):
        level_indices(3)


def test_solid_triangle_is_symmetric():
    m = sierpinski_mask(64, 0)
    assert symmetry_score(m.astype(float)) >= 0.98


def test_sierpinski_area_ratio():
    base = sierpinski_mask(256, 0).sum()
    for d in (1, 2, 3):
        ratio = sierpinski_mask(256, d).sum() / base
        assert abs(ratio / 0.75**d - 1) < 0.05


def test_depth_one_has_central_hole():
    m = sierpinski_mask(65, 1)
    ys, xs = np.nonzero(sierpinski_mask(65, 0))
    cy, cx = int(round(ys.mean())), int(round(xs.mean()))
    assert not m[cy, cx]


@pytest.mark.parametrize("level", range(5))
def test_parted_conserves_mass(level):
    for seed in range(5):
        item = gen_parted(level, 2, 32, rng_of(seed))
        assert item.pixels.sum() == item.info["side"] ** 2


def test_parted_level_zero_is_symmetric():
    for seed in range(5):
        assert gen_parted(0, 3, 32, rng_of(seed)).measured_symmetry >= 0.95


def test_human_level_zero_symmetric_and_rotation_keeps_score():
    for seed in range(5):
        item = gen_human_like(0, 32, rng_of(seed))
        assert item.measured_symmetry >= 0.95
        rotated = apply_transform(item.pixels, 180.0)
        assert abs(symmetry_score(rotated) - item.measured_symmetry) <= 0.05


def test_achromatic_rgb_has_no_colour_opponency():
    item = gen_rgb_symmetric(2, 32, rng_of(1), achromatic=True)
    o = opponent_channels(item.pixels)
    assert np.abs(o.RG).max() < 1e-12 and np.abs(o.BG).max() < 1e-12


def test_rgb_level_means_are_monotone():
    means = [
        np.mean([gen_rgb_symmetric(lvl, 32, rng_of(s)).measured_symmetry for s in range(100)])
        for lvl in range(5)
    ]
    assert np.all(np.diff(means) < 0)


# --------------------------------------------------------------- transforms


def test_identity_transform():
    img = rng_of(0).random((16, 16))
    assert np.array_equal(apply_transform(img, 0.0, 0.0), img)


def test_transform_range_checks():
    img = np.zeros((8, 8))
    with pytest.raises(ParameterError):
        apply_transform(img, 360.0)
    with pytest.raises(ParameterError):
        apply_transform(img, 0.0, 0.25)


def test_half_turn_twice_is_identity():
    img = gen_human_like(0, 32, rng_of(3)).pixels
    twice = apply_transform(apply_transform(img, -180.0), -180.0)
    assert np.abs(twice - img).mean() < 0.02


def test_opposite_translations_cancel_away_from_border():
    img = np.zeros((20, 20))
    img[8:12, 8:12] = 1.0
    back = apply_transform(apply_transform(img, 0.0, 0.2), 0.0, -0.2)
    assert np.array_equal(back, img)
    moved = apply_transform(img, 0.0, (0.2, 0.0))
    assert np.array_equal(moved[:, 4:], img[:, :-4])


@given(st.floats(-180, 180), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_transform_keeps_shape_and_range(rot, tx, ty):
    img = rng_of(1).random((12, 12, 3))
    out = apply_transform(img, rot, (tx, ty))
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= img.max()


# ----------------------------------------------------------------- datasets


def test_named_datasets_present():
    assert len(DATASETS) == 10
    assert dataset_spec("TWOCLASSES-SQUARE").levels == 2
    rt = dataset_spec("ROTATED-TRANSLATED-TRIANGLE")
    assert rt.rotation_range == (-180.0, 180.0) and rt.translation_range == (-0.2, 0.2)
    with pytest.raises(ParameterError):
        dataset_spec("NOPE")


@pytest.mark.parametrize(
    "bad", [dict(levels=3), dict(rotation_range=(-190.0, 0.0)), dict(translation_range=(0.0, 0.3))]
)
def test_spec_validation(bad):
    with pytest.raises(ParameterError):
        SymmetrySpec(family="square", **bad).validate()


def test_class_balance_and_split():
    ds = build_dataset(SymmetrySpec(family="square", levels=5, count=100, seed=3))
    assert np.bincount(ds.labels).tolist() == [20] * 5
    assert len(ds.indices("train")) == 80 and len(ds.indices("test")) == 20
    ds = build_dataset(SymmetrySpec(family="square", levels=5, count=12, seed=3))
    assert np.bincount(ds.labels).tolist() == [3, 3, 2, 2, 2]  # remainder round-robin


def test_two_level_sets_use_extreme_targets():
    ds = build_dataset(SymmetrySpec(family="square", levels=2, count=40, seed=1))
    assert set(ds.labels.tolist()) == {0, 1}
    for lab, target in ((0, 1.0), (1, 0.2)):
        assert np.all(np.abs(ds.measured[ds.labels == lab] - target) <= 0.05)


def test_written_dataset_round_trips_and_is_deterministic(tmp_path):
    spec = SymmetrySpec(family="rgb-image", levels=5, count=15, seed=2, name="RGB-IMAGE")
    a = build_dataset(spec, tmp_path / "a")
    build_dataset(spec, tmp_path / "b")
    assert (tmp_path / "a" / MANIFEST).read_bytes() == (tmp_path / "b" / MANIFEST).read_bytes()
    assert (tmp_path / "a" / "00000.ppm").exists()
    back = load_symmetry_dir(tmp_path / "a")
    np.testing.assert_array_equal(back.images, a.images)
    np.testing.assert_array_equal(back.labels, a.labels)
    np.testing.assert_array_equal(back.split, a.split)
    np.testing.assert_allclose(back.measured, a.measured, atol=5e-7)
    assert back.name == "RGB-IMAGE" and back.is_rgb


def test_transformed_dataset_differs_from_canonical():
    base = dict(family="human-like", levels=5, count=10, seed=4)
    plain = build_dataset(SymmetrySpec(**base))
    moved = build_dataset(SymmetrySpec(**base, rotation_range=(-180.0, 180.0), translation_range=(-0.2, 0.2)))
    np.testing.assert_array_equal(plain.measured, moved.measured)
    assert not np.array_equal(plain.images, moved.images)
