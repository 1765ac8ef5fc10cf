import numpy as np
import pytest

from tgi3d import (
    NoiseSpec,
    ReferenceSet,
    Scene,
    build_integral_table,
    dsnr_to_sigma,
    generate_reference,
    integration_times,
    make_bar_scene_1d,
    make_phantom_scene,
    simulate_capture,
    simulate_single_shot_2d,
)
from tgi3d.errors import InvalidDimensionError, InvalidInputError, TimingViolationError
from tgi3d.scene import max_mean_energy
from tgi3d.signal import constant_generator


@pytest.fixture(scope="module")
def phantom():
    return make_phantom_scene(120, 120, 100, 1200)


def test_phantom_paper_geometry(phantom):
    assert phantom.shape == (120, 120)
    times = integration_times(phantom)
    assert times.max() == 900 <= 1200
    peaks = {lab: phantom.height_map[phantom.labels == lab].max() for lab in range(1, 5)}
    assert peaks == {1: 200, 2: 400, 3: 600, 4: 800}


def test_phantom_heights_by_shape(phantom):
    values = set(np.unique(phantom.height_map[phantom.support]).tolist())
    assert {200, 400, 600, 800} <= values
    for lab, h in [(2, 400), (3, 600), (4, 800)]:
        assert set(np.unique(phantom.height_map[phantom.labels == lab])) == {h}
    cone = phantom.height_map[phantom.labels == 1]
    assert cone.min() >= 1 and cone.max() == 200 and len(np.unique(cone)) > 50
    assert np.all(phantom.height_map[~phantom.support] == 0)


def test_phantom_reflectivity_and_footprints(phantom):
    assert set(np.unique(phantom.reflectivity)) == {0.0, 1.0}
    quadrant = 60 * 60
    for lab in range(1, 5):
        frac = (phantom.labels == lab).sum() / quadrant
        assert 0.35 <= frac <= 0.45


def test_phantom_timing_violation():
    with pytest.raises(TimingViolationError):
        make_phantom_scene(120, 120, 500, 1200)


def test_phantom_too_small():
    with pytest.raises(InvalidDimensionError):
        make_phantom_scene(8, 120, 100, 1200)


def test_bar_paper_scale():
    bar = make_bar_scene_1d(100, 800, 100, 1200)
    assert bar.shape == (1, 100)
    assert bar.height_map.min() == 0 and bar.height_map.max() == 800
    assert np.all(np.diff(bar.height_map[0]) >= 0)


def test_bar_degenerate():
    bar = make_bar_scene_1d(1, 0, 100, 1200)
    assert integration_times(bar).tolist() == [[100]]


@pytest.mark.parametrize("steps", [1, 2, 5, 17])
def test_staircase_distinct_levels(steps):
    bar = make_bar_scene_1d(100, 800, 100, 1200, steps=steps)
    assert len(np.unique(integration_times(bar))) == steps


def test_bar_timing_violation():
    with pytest.raises(TimingViolationError):
        make_bar_scene_1d(10, 800, 500, 1200)


def test_integration_times_arithmetic(phantom):
    scene = Scene(np.array([[800, 0, 5]]), np.array([[1.0, 1.0, 0.0]]), 100, 1200)
    assert integration_times(scene).tolist() == [[900, 100, 0]]
    times = integration_times(phantom)
    plateau = {lab: np.unique(times[phantom.labels == lab]) for lab in (2, 3, 4)}
    assert [v.tolist() for v in plateau.values()] == [[500], [700], [900]]
    assert times[phantom.labels == 1].max() == 300
    assert 900 - 300 == 800 - 200


def test_scene_validation():
    with pytest.raises(InvalidInputError):
        Scene(np.array([[-1]]), np.array([[1.0]]), 1, 10)
    with pytest.raises(InvalidInputError):
        Scene(np.array([[1]]), np.array([[1.5]]), 1, 10)
    with pytest.raises(TimingViolationError):
        Scene(np.array([[10]]), np.array([[1.0]]), 1, 10)


def test_dsnr_to_sigma_unit():
    assert dsnr_to_sigma(0, 1.0, "variance") == 1.0
    assert dsnr_to_sigma(10, 1.0, "std") == pytest.approx(0.1)
    assert dsnr_to_sigma(20, 100.0, "std") == pytest.approx(1.0)


def test_dsnr_to_sigma_rejects_nonpositive_energy():
    with pytest.raises(InvalidInputError):
        dsnr_to_sigma(10, 0.0)


def test_dsnr_from_generated_reference():
    table = build_integral_table(generate_reference(6000, 1200, seed=1))
    bar = make_bar_scene_1d(100, 800, 100, 1200)
    E = max_mean_energy(bar, table)
    assert E == pytest.approx(table.integrals[:, 899].mean(), rel=1e-12)
    assert E == pytest.approx(450, rel=0.01)
    sigma = NoiseSpec(dsnr_db=10).resolve_sigma(bar, table)
    assert sigma == pytest.approx(np.sqrt(E / 10), rel=1e-12)
    assert sigma == pytest.approx(6.708, rel=0.01)


def test_noise_spec_validation():
    with pytest.raises(InvalidInputError):
        NoiseSpec(sigma=-1.0)
    with pytest.raises(InvalidInputError):
        NoiseSpec(convention="amplitude")


def test_constant_pulse_capture():
    ref = generate_reference(20, 16, seed=1, generator=constant_generator(1.0))
    table = build_integral_table(ref)
    scene = Scene(np.array([[0]]), np.array([[1.0]]), 10, 16)
    cube = simulate_capture(scene, table)
    assert np.all(cube.frames == 10.0)


def test_noise_free_matches_windowed_sum(rng):
    ref = generate_reference(30, 50, seed=4)
    table = build_integral_table(ref)
    heights = rng.integers(0, 30, size=(4, 5))
    refl = rng.uniform(0.1, 1.0, size=(4, 5))
    refl[0, 0] = 0.0
    scene = Scene(heights, refl, 5, 50)
    cube = simulate_capture(scene, table)
    for i in range(30):
        for y in range(4):
            for x in range(5):
                if refl[y, x] == 0:
                    assert cube.frames[i, y, x] == 0
                    continue
                T = 5 + heights[y, x]
                expected = refl[y, x] * sum(ref.samples[i, t] for t in range(T))
                assert cube.frames[i, y, x] == pytest.approx(expected, rel=1e-12)
                assert cube.frames[i, y, x] == refl[y, x] * table.integrals[i, T - 1]


def test_linearity_in_reflectivity(small_table):
    base = Scene(np.array([[3, 9], [0, 20]]), np.full((2, 2), 0.4), 2, 60)
    scaled = Scene(base.height_map, base.reflectivity * 2.5, 2, 60)
    a = simulate_capture(base, small_table).frames
    b = simulate_capture(scaled, small_table).frames
    np.testing.assert_allclose(b, 2.5 * a, rtol=1e-15)


def test_noise_determinism_across_workers(small_table):
    scene = make_bar_scene_1d(37, 40, 5, 60)
    noise = NoiseSpec(dsnr_db=5, seed=77)
    a = simulate_capture(scene, small_table, noise, workers=1)
    b = simulate_capture(scene, small_table, noise, workers=3)
    assert np.array_equal(a.frames, b.frames)
    c = simulate_capture(scene, small_table, NoiseSpec(dsnr_db=5, seed=78))
    assert not np.array_equal(a.frames, c.frames)


def test_background_noise_statistics():
    K = 4000
    table = build_integral_table(generate_reference(K, 20, seed=3))
    refl = np.zeros((3, 3))
    refl[1, 1] = 1.0
    scene = Scene(np.zeros((3, 3), dtype=int), refl, 10, 20)
    sigma = 2.0
    cube = simulate_capture(scene, table, NoiseSpec(sigma=sigma, seed=5))
    for y, x in [(0, 0), (2, 1), (0, 2)]:
        series = cube.frames[:, y, x]
        assert abs(series.mean()) <= 3 * sigma / np.sqrt(K)
        se_var = sigma**2 * np.sqrt(2 / (K - 1))
        assert abs(series.var(ddof=1) - sigma**2) <= 3 * se_var


def test_capture_timing_violation(small_table):
    scene = make_bar_scene_1d(5, 50, 20, 80)
    with pytest.raises(TimingViolationError):
        simulate_capture(scene, small_table)


def test_single_shot_noise_free_support(small_table):
    scene = make_phantom_scene(32, 32, 5, 60, scale=0.05)
    image = simulate_single_shot_2d(scene, small_table)
    assert np.all(image[scene.support] > 0)
    assert np.all(image[~scene.support] == 0)


def test_single_shot_shares_frame_noise(small_table):
    scene = make_bar_scene_1d(12, 40, 5, 60)
    noise = NoiseSpec(dsnr_db=3, seed=9)
    cube = simulate_capture(scene, small_table, noise)
    image = simulate_single_shot_2d(scene, small_table, noise)
    clean_frame = simulate_capture(scene, small_table).frames[0]
    clean_image = simulate_single_shot_2d(scene, small_table)
    np.testing.assert_allclose(image - clean_image, cube.frames[0] - clean_frame, atol=1e-12)


def test_single_shot_is_full_exposure(small_table):
    scene = Scene(np.array([[0, 10]]), np.array([[1.0, 0.5]]), 5, 60)
    image = simulate_single_shot_2d(scene, small_table, pulse=3)
    assert image.tolist() == [[small_table.integrals[3, 59], 0.5 * small_table.integrals[3, 59]]]


def test_single_shot_phantom_mask_at_15db():
    from tgi3d import mask_from_2d

    scene = make_phantom_scene()
    table = build_integral_table(generate_reference(50, 1200, seed=2))
    image = simulate_single_shot_2d(scene, table, NoiseSpec(dsnr_db=15, seed=3))
    agreement = (mask_from_2d(image) == scene.support).mean()
    assert agreement >= 0.95
