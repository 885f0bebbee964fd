import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fitzaudit.image import EmptyImage, ImageBuffer
from fitzaudit.ita import (
    EmptySequence,
    compute_ita,
    ita_from_means,
    ita_to_fitzpatrick,
    trimmed_stats,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_trimmed_stats_examples():
    assert trimmed_stats([5, 5, 5, 5]) == (5.0, 4)
    assert trimmed_stats([0, 0, 0, 0, 100]) == (0.0, 4)
    with pytest.raises(EmptySequence):
        trimmed_stats([])


def test_trimmed_stats_random_against_brute_force():
    vals = np.random.default_rng(11).normal(30, 12, 1000)
    mean, kept = trimmed_stats(vals)
    ref_mean, ref_kept = oracles.trimmed(list(vals))
    assert kept == ref_kept
    assert mean == pytest.approx(ref_mean, abs=1e-9)


@given(st.lists(finite, min_size=1, max_size=200))
def test_trimmed_stats_never_empty(vals):
    mean, kept = trimmed_stats(vals)
    assert 1 <= kept <= len(vals)
    assert min(vals) - 1e-6 <= mean <= max(vals) + 1e-6


@given(st.lists(finite, min_size=1, max_size=200), st.randoms())
def test_sorted_sum_is_order_invariant(vals, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    assert trimmed_stats(vals, sort=True) == trimmed_stats(shuffled, sort=True)


def test_ita_from_means():
    assert ita_from_means(70, 20)[0] == pytest.approx(45.0, abs=1e-12)
    assert ita_from_means(100, 0) == (90.0, True)
    assert ita_from_means(10, 0) == (-90.0, True)
    assert ita_from_means(50, 0) == (0.0, True)
    ita, singular = ita_from_means(70, -20)
    assert not singular and ita == pytest.approx(-45.0)


def test_uniform_white_is_near_ninety():
    res = compute_ita(ImageBuffer.uniform((255, 255, 255), 4, 4))
    assert res.l_mean == 100.0
    assert abs(res.b_mean) < 0.01
    assert abs(res.ita_degrees) > 89.0


def test_uniform_image_equals_single_pixel():
    px = (200, 150, 120)
    single = compute_ita(ImageBuffer.uniform(px, 1, 1))
    many = compute_ita(ImageBuffer.uniform(px, 7, 5))
    assert many.ita_degrees == pytest.approx(single.ita_degrees, abs=1e-9)
    assert many.pixels_considered == 35 and many.pixels_retained == 35
    ref, _ = oracles.ita([px + (255,)])
    assert single.ita_degrees == pytest.approx(ref, abs=1e-9)


def test_masked_fallback_on_skinless_image():
    res = compute_ita(ImageBuffer.uniform((0, 255, 0), 3, 3), "masked")
    assert res.fallback and res.pixels_considered == 9
    assert not compute_ita(ImageBuffer.uniform((200, 150, 120), 3, 3), "masked").fallback


def test_masked_uses_only_skin_pixels():
    px = np.zeros((2, 2, 4), np.uint8)
    px[0, 0] = (200, 150, 120, 255)
    px[0, 1] = (200, 150, 120, 255)
    px[1, 0] = (10, 200, 30, 255)
    px[1, 1] = (20, 20, 240, 255)
    res = compute_ita(ImageBuffer(px), "masked")
    assert res.pixels_considered == 2 and not res.fallback
    only_skin = compute_ita(ImageBuffer.uniform((200, 150, 120), 2, 1))
    assert res.ita_degrees == pytest.approx(only_skin.ita_degrees, abs=1e-12)


def _random_image(rng, n=16):
    px = rng.integers(0, 256, size=(n, n, 4), dtype=np.uint8)
    skin_rows = rng.random(n) < 0.5
    px[skin_rows, :, :3] = rng.integers([130, 70, 50], [256, 190, 150], size=(skin_rows.sum(), n, 3))
    return px


@pytest.mark.parametrize("mode", ["full", "masked"])
def test_random_images_against_brute_force(mode):
    rng = np.random.default_rng(5)
    for _ in range(20):
        px = _random_image(rng)
        res = compute_ita(ImageBuffer(px), mode)
        ref, fallback = oracles.ita([tuple(map(int, p)) for p in px.reshape(-1, 4)], mode == "masked")
        assert res.ita_degrees == pytest.approx(ref, abs=1e-9)
        assert res.fallback == fallback


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_permutation_invariance_sorted(seed):
    rng = np.random.default_rng(seed)
    px = _random_image(rng, 8)
    perm = rng.permutation(64)
    shuffled = px.reshape(-1, 4)[perm].reshape(8, 8, 4)
    for mode in ("full", "masked"):
        a = compute_ita(ImageBuffer(px), mode, sort=True)
        assert compute_ita(ImageBuffer(shuffled), mode, sort=True) == a
        assert compute_ita(ImageBuffer(px[:, ::-1].copy()), mode, sort=True) == a
        assert compute_ita(ImageBuffer(px[::-1].copy()), mode, sort=True) == a


def test_joint_trim_differs_but_is_valid():
    rng = np.random.default_rng(2)
    px = _random_image(rng, 32)
    ind = compute_ita(ImageBuffer(px), "full", trim="independent")
    joint = compute_ita(ImageBuffer(px), "full", trim="joint")
    assert joint.pixels_retained <= ind.pixels_retained
    assert -90 <= joint.ita_degrees <= 90


def test_empty_image_rejected():
    with pytest.raises(EmptyImage):
        compute_ita(ImageBuffer(np.zeros((0, 0, 4), np.uint8)))


@pytest.mark.parametrize(
    "ita,scheme,expected",
    [
        (45, "kinyanjui", 2), (45, "empirical", 1),
        (55, "kinyanjui", 2), (55.0001, "kinyanjui", 1),
        (0, "empirical", 5), (-30, "empirical", 6),
        (41, "kinyanjui", 3), (28, "kinyanjui", 4), (19, "kinyanjui", 5), (10, "kinyanjui", 6),
        (40, "empirical", 2), (23, "empirical", 3), (12, "empirical", 4), (-25, "empirical", 6),
        (90, "empirical", 1), (-90, "kinyanjui", 6),
    ],
)
def test_fitzpatrick_mapping(ita, scheme, expected):
    assert ita_to_fitzpatrick(ita, scheme) == expected
    assert oracles.fitz(ita, scheme) == expected


@given(finite, finite, st.sampled_from(["kinyanjui", "empirical"]))
def test_mapping_monotone(a, b, scheme):
    hi, lo = max(a, b), min(a, b)
    assert ita_to_fitzpatrick(hi, scheme) <= ita_to_fitzpatrick(lo, scheme)


def test_mapping_rejects_bad_input():
    with pytest.raises(ValueError):
        ita_to_fitzpatrick(math.nan)
    with pytest.raises(ValueError):
        ita_to_fitzpatrick(10, "other")
