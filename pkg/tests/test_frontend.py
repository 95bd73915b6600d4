import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import convolve2d

from oracles import direct_convolve_same
from visnet.errors import ParameterError
from visnet.frontend import (
    DOG_RGB_GABOR,
    DogParams,
    FrontendConfig,
    GaborParams,
    OpponentChannels,
    _gabor_responses,
    dog_filter,
    dog_kernel,
    dog_rgb_frontend,
    dog_stage,
    gabor_frontend,
    make_gabor_bank,
    opponent_channels,
)

BANK = make_gabor_bank()
unit_images = arrays(np.float64, (12, 12), elements=st.floats(0, 1))


def test_default_bank_has_32_kernels():
    assert len(BANK) == 32
    assert all(k.shape == (15, 15) for k in BANK)


def test_kernels_are_zero_mean_unit_norm():
    for k in BANK:
        assert abs(k.sum()) < 1e-9
        assert np.linalg.norm(k) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "field, params",
    [
        ("frequencies", GaborParams(frequencies=(0.2, -0.1))),
        ("kernel_size", GaborParams(kernel_size=14)),
        ("kernel_size", GaborParams(kernel_size=1)),
        ("gamma", GaborParams(gamma=0.0)),
    ],
)
def test_invalid_gabor_params_name_the_field(field, params):
    with pytest.raises(ParameterError) as err:
        make_gabor_bank(params)
    assert err.value.field == field


def test_bank_size_is_product_of_parameter_counts():
    p = GaborParams(frequencies=(0.1, 0.3, 0.5), orientations=(0.0, 1.0), phases=(0.0, 0.5, 1.0, 2.0))
    assert len(make_gabor_bank(p)) == 3 * 2 * 4 == p.n_channels


def test_matched_grating_beats_orthogonal():
    f = 0.2
    params = GaborParams(frequencies=(f,), orientations=(0.0,), phases=(0.0,))
    k = make_gabor_bank(params)[0]
    x = np.arange(48)
    matched = np.tile(0.5 + 0.5 * np.cos(2 * np.pi * f * x), (48, 1))  # varies along x
    orthogonal = matched.T
    r_match = np.abs(direct_convolve_same(matched, k))[12:36, 12:36].max()
    r_orth = np.abs(direct_convolve_same(orthogonal, k))[12:36, 12:36].max()
    assert r_match > r_orth


def test_fft_responses_match_direct_convolution():
    rng = np.random.default_rng(3)
    img = rng.random((20, 20))
    bank = BANK[::7]
    fast = _gabor_responses(img, bank)
    for k, resp in zip(bank, fast):
        np.testing.assert_allclose(resp, np.abs(convolve2d(img, k, mode="same")), atol=1e-12)
    np.testing.assert_allclose(fast[0], np.abs(direct_convolve_same(img, bank[0])), atol=1e-12)


def test_zero_image_gives_zero_stack():
    stack = gabor_frontend(np.zeros((32, 32)), BANK, 80)
    assert stack.data.shape == (80, 80, 32)
    assert not stack.data.any()


def test_empty_or_out_of_range_image_rejected():
    with pytest.raises(ParameterError):
        gabor_frontend(np.zeros((0, 0)), BANK, 80)
    with pytest.raises(ParameterError):
        gabor_frontend(np.full((8, 8), 1.5), BANK, 80)
    with pytest.raises(ParameterError):
        gabor_frontend(np.zeros((32, 32)), BANK, 16)


@settings(max_examples=30, deadline=None)
@given(unit_images)
def test_responses_are_non_negative(img):
    assert gabor_frontend(img, BANK, 20).data.min() >= 0.0


@settings(max_examples=30, deadline=None)
@given(unit_images, st.floats(0, 4))
def test_rectified_response_is_positively_homogeneous(img, s):
    np.testing.assert_allclose(_gabor_responses(s * img, BANK), s * _gabor_responses(img, BANK), atol=1e-9)


def test_mirror_symmetric_input_swaps_mirrored_orientations():
    rng = np.random.default_rng(0)
    half = rng.random((32, 16))
    img = np.hstack([half, half[:, ::-1]])
    stack = gabor_frontend(img, BANK, 80).data
    thetas = GaborParams().orientations
    n_o, n_p = len(thetas), 2
    for fi in range(4):
        for oi, th in enumerate(thetas):
            partner = thetas.index(min(thetas, key=lambda t: abs((np.pi - th) % np.pi - t)))
            for pi in range(n_p):
                a = stack[:, :, (fi * n_o + oi) * n_p + pi]
                b = stack[:, :, (fi * n_o + partner) * n_p + pi]
                np.testing.assert_allclose(a[:, ::-1], b, atol=1e-3)


# ---------------------------------------------------------------- opponent


def test_opponent_examples():
    rgb = np.array([[[0.3, 0.3, 0.3], [1, 0, 0], [0, 0, 1]]], dtype=float)
    o = opponent_channels(rgb)
    np.testing.assert_allclose(o.L[0], [0.3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(o.RG[0], [0, 1, 0])
    np.testing.assert_allclose(o.BG[0], [0, 0, 1])


def test_opponent_rejects_wrong_plane_count():
    with pytest.raises(ParameterError):
        opponent_channels(np.zeros((4, 4, 2)))
    with pytest.raises(ParameterError):
        opponent_channels(np.zeros((4, 4)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1)))
def test_opponent_round_trip(rgb):
    o = opponent_channels(rgb)
    assert o.L.shape == o.RG.shape == o.BG.shape == rgb.shape[:2]
    assert np.abs(o.to_rgb() - rgb).max() < 1e-9
    back = OpponentChannels(*o.as_array()).to_rgb()
    assert np.abs(back - rgb).max() < 1e-9


# --------------------------------------------------------------------- DoG


def test_dog_constant_input_interior():
    out = dog_filter(np.full((16, 16), 0.7), DogParams())
    np.testing.assert_allclose(out[2:-2, 2:-2], 0.4 * 0.7, atol=1e-6)


def test_dog_identical_kernels_cancel():
    p = DogParams(sigma1=1.0, sigma2=1.0, k=1.0, allow_equal=True)
    rng = np.random.default_rng(1)
    assert np.abs(dog_filter(rng.random((10, 10)), p)).max() < 1e-15


def test_dog_equal_sigmas_need_explicit_request():
    with pytest.raises(ParameterError):
        dog_kernel(DogParams(sigma1=1.0, sigma2=1.0))
    with pytest.raises(ParameterError):
        dog_kernel(DogParams(k=1.5))


def _impulse_response(params, size=15):
    img = np.zeros((size, size))
    img[size // 2, size // 2] = 1.0
    return dog_filter(img, params)


def test_dog_impulse_default_params():
    out = _impulse_response(DogParams())
    c = out.shape[0] // 2
    assert out[c, c] > 0
    assert out.sum() == pytest.approx(0.4, abs=1e-6)
    # the oracle is the kernel itself, evaluated directly
    np.testing.assert_allclose(out[c - 1 : c + 2, c - 1 : c + 2], dog_kernel(DogParams()), atol=1e-12)


def test_dog_impulse_strong_surround_has_negative_ring():
    p = DogParams(sigma1=0.8, sigma2=2.5, k=0.9, kernel_size=9)
    out = _impulse_response(p)
    c = out.shape[0] // 2
    assert out[c, c] > 0
    assert out.sum() - out[c, c] < 0
    assert out.sum() == pytest.approx(0.1, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (9, 9), elements=st.floats(-1, 1)), st.floats(-3, 3))
def test_dog_is_linear_and_mirror_equivariant(img, s):
    p = DogParams()
    np.testing.assert_allclose(dog_filter(s * img, p), s * dog_filter(img, p), atol=1e-9)
    np.testing.assert_allclose(dog_filter(img[:, ::-1], p), dog_filter(img, p)[:, ::-1], atol=1e-12)


def test_dog_kernel_larger_than_image_rejected():
    with pytest.raises(ParameterError):
        dog_filter(np.zeros((3, 3)), DogParams(kernel_size=5))


# ---------------------------------------------------------------- DoG-RGB


def test_dog_rgb_stack_is_three_times_gray():
    rgb = np.random.default_rng(2).random((16, 16, 3))
    stack = dog_rgb_frontend(rgb, DogParams(), BANK, 40)
    assert stack.data.shape == (40, 40, 96)
    assert stack.provenance == DOG_RGB_GABOR
    assert stack.data.shape[2] == 3 * len(BANK)


def test_gray_content_gives_zero_colour_substacks():
    g = np.random.default_rng(3).random((16, 16))
    stack = dog_rgb_frontend(np.stack([g, g, g], axis=-1), DogParams(), BANK, 40).data
    assert not stack[:, :, 32:].any()
    assert stack[:, :, :32].any()


def test_green_blue_swap_flips_the_bg_stage():
    img = np.zeros((4, 4, 3))
    img[:, :2, 1] = 1.0  # green on the left
    img[:, 2:, 2] = 1.0  # blue on the right
    swapped = img[:, :, [0, 2, 1]]
    a, b = dog_stage(img), dog_stage(swapped)
    np.testing.assert_allclose(a[0], b[0], atol=1e-15)  # L unchanged
    np.testing.assert_allclose(a[2], -b[2], atol=1e-12)  # BG changes sign
    # brute force: BG before DoG is +1 on blue, -1 on green, exactly negated by the swap
    o1, o2 = opponent_channels(img), opponent_channels(swapped)
    np.testing.assert_array_equal(o1.BG, -o2.BG)
    sa, sb = dog_rgb_frontend(img, None, BANK, 8).data, dog_rgb_frontend(swapped, None, BANK, 8).data
    np.testing.assert_allclose(sa[:, :, 64:], sb[:, :, 64:], atol=1e-12)  # |.| removes the sign
    np.testing.assert_allclose(sa[:, :, :32], sb[:, :, :32], atol=1e-12)
    assert not np.allclose(sa[:, :, 32:64], sb[:, :, 32:64])


def test_frontend_config_encodes_by_kind():
    gray = FrontendConfig(out_size=40)
    rgb = np.random.default_rng(0).random((32, 32, 3))
    assert gray.encode(rgb).data.shape == (40, 40, 32)
    assert gray.encode(rgb[..., 0]).data.shape == (40, 40, 32)
    col = FrontendConfig(kind=DOG_RGB_GABOR, out_size=40)
    assert col.n_channels == 96
    assert col.encode(rgb).data.shape == (40, 40, 96)
    with pytest.raises(ParameterError):
        col.encode(rgb[..., 0])
