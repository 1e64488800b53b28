import numpy as np
import pytest

from splatsim.sh import SH_C0, SH_C1, eval_sh


def test_degree0_zero_coeffs_gives_gray():
    assert np.allclose(eval_sh(np.zeros((1, 3)), [0.0, 0.0, 1.0]), [0.5, 0.5, 0.5])


def test_degree0_is_isotropic(rng):
    dc = rng.normal(0, 0.3, (1, 3))
    expected = np.clip(SH_C0 * dc[0] + 0.5, 0, 1)
    for d in ([1, 0, 0], [0, 1, 0], [0, 0, -1], [0.6, 0.0, 0.8]):
        assert np.allclose(eval_sh(dc, d), expected)


def test_degree1_odd_parity(rng):
    # small coefficients so the clamp never engages
    sh = rng.normal(0, 0.05, (4, 3))
    for _ in range(20):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        diff = eval_sh(sh, d) - eval_sh(sh, -d)
        x, y, z = d
        band1 = SH_C1 * (-y * sh[1] + z * sh[2] - x * sh[3])
        assert np.allclose(diff, 2.0 * band1, atol=1e-12)


def test_output_clamped(rng):
    sh = rng.normal(0, 10.0, (16, 3))
    c = eval_sh(sh, [0.0, 0.0, 1.0])
    assert np.all(c >= 0.0) and np.all(c <= 1.0)


def test_rejects_zero_direction():
    with pytest.raises(ValueError):
        eval_sh(np.zeros((1, 3)), [0.0, 0.0, 0.0])


def test_rejects_bad_coefficient_count():
    with pytest.raises(ValueError):
        eval_sh(np.zeros((5, 3)), [0.0, 0.0, 1.0])


def test_unnormalized_direction_is_normalized():
    sh = np.random.default_rng(3).normal(0, 0.05, (4, 3))
    a = eval_sh(sh, [0.0, 0.0, 2.0])
    b = eval_sh(sh, [0.0, 0.0, 1.0])
    assert np.allclose(a, b)
