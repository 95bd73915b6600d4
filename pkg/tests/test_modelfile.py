import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visnet.errors import FormatError
from visnet.frontend import FrontendConfig
from visnet.learning import LearningParams, present
from visnet.modelfile import MAGIC, decode_model, encode_model, load_model, save_model
from visnet.network import VARIANTS, InhibitionParams, forward_network, init_network


def small(variant="simplified", seed=0):
    kind = "dog-rgb-gabor" if variant == "li-dog-rgb" else "gray-gabor"
    return init_network(
        variant,
        frontend=FrontendConfig(kind=kind, out_size=8),
        grid=8,
        patches=(2, 3),
        seed=seed,
        rbf_sigma=0.7,
        inhibition=InhibitionParams(2, 0.3),
    )


@pytest.mark.parametrize("variant", VARIANTS)
def test_round_trip(variant):
    net = small(variant)
    if variant == "md":
        present(net, np.random.default_rng(0).random((8, 8, 32)), LearningParams(), np.random.default_rng(0))
    back = decode_model(encode_model(net))
    assert back.variant == variant
    assert back.frontend.kind == net.frontend.kind
    assert back.inhibition == net.inhibition
    for a, b in zip(net.layers, back.layers):
        assert a.geometry == b.geometry
        np.testing.assert_allclose(b.weights, a.weights, atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(b.weights, axis=1), 1.0, atol=1e-12)
        if variant == "rbf":
            assert b.rbf_sigma == pytest.approx(0.7)
        if variant == "md":
            assert b.md_stats.count == a.md_stats.count
            np.testing.assert_allclose(b.md_stats.mean, a.md_stats.mean, atol=1e-6)
    c = 96 if variant == "li-dog-rgb" else 32
    x = np.random.default_rng(1).random((8, 8, c))
    for a, b in zip(forward_network(net, x), forward_network(back, x)):
        np.testing.assert_allclose(a, b, atol=1e-4)


def test_header_bytes():
    data = encode_model(small("rbf"))
    assert data[:4] == MAGIC
    version, tag, n_layers = struct.unpack("<IBB", data[4:10])
    assert (version, VARIANTS[tag], n_layers) == (1, "rbf", 2)
    assert struct.unpack("<III", data[10:22]) == (8, 2, 32)


def test_encoding_is_deterministic():
    assert encode_model(small(seed=3)) == encode_model(small(seed=3))


@pytest.mark.parametrize(
    "patch, why",
    [
        (lambda d: b"XXXX" + d[4:], "magic"),
        (lambda d: d[:4] + struct.pack("<I", 2) + d[8:], "version"),
        (lambda d: d[:8] + bytes([9]) + d[9:], "variant"),
        (lambda d: d + b"\x00", "trailing"),
    ],
)
def test_corrupt_headers_rejected(patch, why):
    with pytest.raises(FormatError, match="byte"):
        decode_model(patch(encode_model(small())))


@settings(max_examples=60)
@given(st.data())
def test_any_truncation_is_a_format_error(data):
    full = encode_model(small())
    cut = data.draw(st.integers(0, len(full) - 1))
    with pytest.raises(FormatError):
        decode_model(full[:cut])


def test_save_is_atomic_and_load_missing(tmp_path):
    net = small()
    path = tmp_path / "sub" / "m.vnsn"
    save_model(net, path)
    assert path.exists()
    assert [p.name for p in path.parent.iterdir()] == ["m.vnsn"]
    assert load_model(path).variant == "simplified"
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "nope.vnsn")
