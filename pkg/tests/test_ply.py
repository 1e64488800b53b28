import numpy as np
import pytest

import splatsim as S
from splatsim.ply import PlyParseError, _canonical_properties
from conftest import random_asset


def test_sigmoid_activation():
    asset = random_asset(np.random.default_rng(0), 1)
    asset = asset.replace(opacities=np.array([0.5]))
    data = S.save_ply(asset)
    loaded = S.load_ply(data)
    assert loaded.opacities[0] == pytest.approx(0.5, abs=1e-7)
    # logit 0 is stored for alpha = 0.5
    assert b"opacity" in data


def test_logit_zero_written_for_half_opacity():
    asset = random_asset(np.random.default_rng(0), 1).replace(opacities=np.array([0.5]))
    data = S.save_ply(asset)
    props = _canonical_properties(asset.sh_degree)
    body = data[data.find(b"end_header\n") + len(b"end_header\n"):]
    row = np.frombuffer(body, dtype="<f4")
    assert row[props.index("opacity")] == 0.0


@pytest.mark.parametrize("degree,n_rest", [(0, 0), (1, 9), (2, 24), (3, 45)])
def test_degree_inferred_from_f_rest_count(rng, degree, n_rest):
    asset = random_asset(rng, 5, sh_degree=degree)
    data = S.save_ply(asset)
    assert data.count(b"f_rest_") == n_rest
    assert S.load_ply(data).sh_degree == degree


def test_load_save_roundtrip_values(rng):
    asset = random_asset(rng, 100, sh_degree=3)
    loaded = S.load_ply(S.save_ply(asset))
    assert loaded.allclose(asset, atol=1e-6)


def test_save_load_save_roundtrips_bytes(rng):
    # byte-comparison oracle: canonical bytes are a fixed point of save-after-load
    data = S.save_ply(random_asset(rng, 64, sh_degree=2))
    assert S.save_ply(S.load_ply(data)) == data


def test_missing_property_rejected(rng):
    data = S.save_ply(random_asset(rng, 2))
    broken = data.replace(b"property float opacity\n", b"")
    with pytest.raises(PlyParseError, match="opacity"):
        S.load_ply(broken)


def test_truncated_body_rejected(rng):
    data = S.save_ply(random_asset(rng, 4))
    with pytest.raises(PlyParseError, match="count mismatch"):
        S.load_ply(data[:-8])


def test_nonfinite_rejected(rng):
    data = bytearray(S.save_ply(random_asset(rng, 2)))
    offset = bytes(data).find(b"end_header\n") + len(b"end_header\n")
    data[offset:offset + 4] = np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(PlyParseError, match="non-finite"):
        S.load_ply(bytes(data))


def test_bad_f_rest_count_rejected(rng):
    data = S.save_ply(random_asset(rng, 1, sh_degree=1))
    # drop one f_rest property from the header and its column from the body
    head_end = data.find(b"end_header\n") + len(b"end_header\n")
    header = data[:head_end].replace(b"property float f_rest_8\n", b"")
    row = np.frombuffer(data[head_end:], dtype="<f4")
    props = _canonical_properties(1)
    row = np.delete(row, props.index("f_rest_8"))
    with pytest.raises(PlyParseError, match="f_rest"):
        S.load_ply(header + row.astype("<f4").tobytes())


def test_extreme_opacity_clamped_with_warning(rng):
    asset = random_asset(rng, 1).replace(opacities=np.array([1.0 - 1e-9]))
    with pytest.warns(UserWarning, match="clamped"):
        data = S.save_ply(asset)
    assert np.isfinite(S.load_ply(data).opacities).all()


def test_non_ply_rejected():
    with pytest.raises(PlyParseError):
        S.load_ply(b"definitely not a ply file")
