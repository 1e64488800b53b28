import math

import numpy as np
import pytest

from splatsim import l1, psnr


def test_identical_images():
    img = np.random.default_rng(0).uniform(0, 1, (16, 16, 3))
    assert l1(img, img) == 0.0
    assert math.isinf(psnr(img, img))


def test_uniform_offset():
    ref = np.full((8, 8, 3), 0.4)
    tst = ref + 0.1
    assert l1(ref, tst) == pytest.approx(0.1, abs=1e-12)
    assert psnr(ref, tst) == pytest.approx(20.0, abs=1e-9)


def test_symmetry(rng):
    a = rng.uniform(0, 1, (12, 10, 3))
    b = rng.uniform(0, 1, (12, 10, 3))
    assert l1(a, b) == l1(b, a)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_decreases_with_noise(rng):
    ref = rng.uniform(0.3, 0.7, (32, 32, 3))
    values = []
    for amp in (0.01, 0.02, 0.05, 0.1, 0.2):
        noise = rng.uniform(-amp, amp, ref.shape)
        values.append(psnr(ref, np.clip(ref + noise, 0, 1)))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_psnr_matches_direct_mse(rng):
    a = rng.uniform(0, 1, (20, 20, 3))
    b = rng.uniform(0, 1, (20, 20, 3))
    mse = np.mean((a - b) ** 2)
    assert psnr(a, b) == pytest.approx(-10.0 * np.log10(mse), abs=1e-12)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        l1(np.zeros((4, 4)), np.zeros((5, 4)))
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4, 3)), np.zeros((4, 4)))
