import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cenntrack.core import CellGrid, SolverConfig
from cenntrack.templates import (DoGKernel, apply_dog, diffuse, diffusion, dilate, dump_table,
                                 is_binary, library, load_table, logic_and_image,
                                 propagation_ns, recall_image, shadow, shadow_image, subtract,
                                 threshold, threshold_image)

import oracles


def random_binary(rng, shape, p=0.5):
    return np.where(rng.random(shape) < p, 1.0, -1.0)


@pytest.fixture(scope="module")
def all_4x4():
    bits = (np.arange(2 ** 16)[:, None] >> np.arange(16)) & 1
    return np.where(bits, 1.0, -1.0).reshape(-1, 4, 4)


@pytest.mark.parametrize("angle", [None, 0.0, 45.0, 90.0, 135.0])
def test_diffusion_weights_normalised(angle):
    t = diffusion(angle)
    assert t.feedback[1, 1] == 0 and t.feedback.sum() == 1.0
    np.testing.assert_array_equal(t.feedback, t.feedback[::-1, ::-1])
    assert np.all(t.control == 0) and t.offset == 0


def test_directional_diffusion_prefers_its_axis():
    t = diffusion(0.0)
    assert t.feedback[1, 0] > t.feedback[0, 1]
    t = diffusion(90.0)
    assert t.feedback[0, 1] > t.feedback[1, 0]


def test_subtract_is_clamped_difference(rng):
    a = rng.uniform(-1, 1, (16, 16))
    b = rng.uniform(-1, 1, (16, 16))
    np.testing.assert_allclose(subtract(a, b), np.clip(a - b, -1, 1), atol=1e-15)
    with pytest.raises(ValueError):
        subtract(a, b[:8])


def test_subtract_needs_whole_steps(rng):
    with pytest.raises(ValueError):
        subtract(np.zeros((3, 3)), np.zeros((3, 3)), SolverConfig(dt_ns=0.3, tau_ns=1.0))


def test_threshold_exhaustive(all_4x4):
    np.testing.assert_array_equal(threshold_image(all_4x4, 0.0), oracles.threshold(all_4x4, 0.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.95, 0.95), st.integers(0, 2 ** 32 - 1))
def test_threshold_continuous(level, seed):
    img = np.random.default_rng(seed).uniform(-1, 1, (10, 10))
    # keep values clear of the level so the finite run time is enough
    img[np.abs(img - level) < 1e-3] = level + 1e-3
    np.testing.assert_array_equal(threshold_image(img, level), oracles.threshold(img, level))


def test_threshold_tie_goes_to_background():
    img = np.full((3, 3), 0.25)
    assert np.all(threshold_image(img, 0.25) == -1)


def test_logic_and_truth_table():
    a = np.array([[1.0, 1.0, -1.0, -1.0]])
    b = np.array([[1.0, -1.0, 1.0, -1.0]])
    np.testing.assert_array_equal(logic_and_image(a, b), [[1, -1, -1, -1]])
    with pytest.raises(ValueError):
        logic_and_image(a, np.zeros_like(a))


def test_shadow_single_pixel():
    img = -np.ones((5, 6))
    img[2, 3] = 1
    left = shadow_image(img, "left")
    assert np.array_equal(left[2], [1, 1, 1, 1, -1, -1]) and (left[[0, 1, 3, 4]] == -1).all()
    down = shadow_image(img, "down")
    assert np.array_equal(down[:, 3], [-1, -1, 1, 1, 1]) and (np.delete(down, 3, 1) == -1).all()
    with pytest.raises(ValueError):
        shadow("up")


def test_dilation_of_rectangle():
    img = -np.ones((100, 100))
    img[40:60, 40:60] = 1
    out = dilate(img, 3)
    want = -np.ones((100, 100))
    want[37:63, 37:63] = 1
    np.testing.assert_array_equal(out, want)


def test_recall_keeps_only_marked_components():
    ref = -np.ones((8, 12))
    ref[1:4, 1:4] = 1
    ref[5:7, 7:11] = 1
    markers = -np.ones_like(ref)
    markers[2, 2] = 1
    markers[0, 11] = 1  # outside the reference: ignored
    out = recall_image(markers, ref)
    want = -np.ones_like(ref)
    want[1:4, 1:4] = 1
    np.testing.assert_array_equal(out, want)


def test_recall_follows_a_winding_path():
    ref = -np.ones((9, 9))
    ref[0, :] = ref[:, 8] = ref[8, :] = ref[2:, 0] = ref[2, :7] = 1
    markers = -np.ones_like(ref)
    markers[2, 6] = 1
    np.testing.assert_array_equal(recall_image(markers, ref), ref)


@pytest.mark.parametrize("seed", range(5))
def test_binary_ops_match_oracles_random(seed):
    rng = np.random.default_rng(seed)
    a = random_binary(rng, (4, 20, 17), 0.3)
    b = random_binary(rng, (4, 20, 17), 0.5)
    np.testing.assert_array_equal(logic_and_image(a, b), oracles.logic_and(a, b))
    np.testing.assert_array_equal(dilate(a, 2), oracles.dilation(a, 2))
    np.testing.assert_array_equal(shadow_image(a, "left"), oracles.shadow_left(a))
    np.testing.assert_array_equal(shadow_image(a, "down"), oracles.shadow_down(a))
    m = random_binary(rng, a.shape, 0.05)
    np.testing.assert_array_equal(recall_image(m, b), oracles.reconstruction(m, b))


def test_reconstruction_oracles_agree(rng):
    for _ in range(20):
        ref = random_binary(rng, (10, 10), 0.55)
        m = random_binary(rng, (10, 10), 0.1)
        np.testing.assert_array_equal(oracles.flood_fill_components(m, ref),
                                      oracles.reconstruction(m[None], ref[None])[0])


def test_propagation_time_grows_with_extent():
    assert propagation_ns(100) > propagation_ns(10) > 0


def test_dog_kernel_validation():
    with pytest.raises(ValueError):
        DoGKernel(5, 20)
    with pytest.raises(ValueError):
        DoGKernel(20, 20)
    k = DoGKernel(10, 35, 45.0, 45.0)
    assert DoGKernel.from_dict(k.to_dict()) == k


def test_dog_of_uniform_frame_is_zero():
    g = CellGrid(np.full((12, 12), 0.4))
    # only rounding of the weighted sums remains
    assert np.abs(apply_dog(g, DoGKernel(10, 50, 45.0, 45.0)).state).max() < 1e-14


def test_dog_sign_flips_with_step_order(rng):
    img = rng.uniform(-0.4, 0.4, (16, 16))
    a = apply_dog(CellGrid(img), DoGKernel(10, 35)).state
    b = apply_dog(CellGrid(img), DoGKernel(35, 10)).state
    np.testing.assert_allclose(a, -b, atol=1e-15)


def test_diffuse_composes():
    img = np.zeros((9, 9))
    img[4, 4] = 1
    once = diffuse(img, 45.0, 20.0)
    twice = diffuse(diffuse(img, 45.0, 8.0), 45.0, 12.0)
    assert np.array_equal(once, twice)


def test_table_round_trip():
    lib = library()
    back = load_table(dump_table(lib))
    assert back == lib
    with pytest.raises(ValueError):
        load_table("BROKEN 1 2 3\n")


def test_is_binary():
    assert is_binary(np.array([1.0, -1.0]))
    assert not is_binary(np.array([1.0, 0.0]))
    assert threshold(0.0).duration_ns > 0
