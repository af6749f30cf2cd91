import numpy as np
import pytest
from scipy import ndimage

from utils.error_middleware import DimensionError, ParameterError
from utils.superpixel import (_seed_grid, enforce_connectivity, gradient_map, image_gradient,
                              rgb_to_lab, segment_image, slic_distance, slic_segment,
                              tensor_to_lab)
from utils.validators import SlicParams


def cluster_spread(label_map):
    """Variância espacial média dos clusters"""
    rows, cols = np.indices(label_map.shape)
    labels = label_map.labels.ravel()
    sizes = np.bincount(labels).astype(float)
    spread = 0.0
    for coord in (rows.ravel().astype(float), cols.ravel().astype(float)):
        mean = np.bincount(labels, weights=coord) / sizes
        spread += np.bincount(labels, weights=(coord - mean[labels]) ** 2) / sizes
    return float(spread.mean())


@pytest.mark.unit
class TestColor:
    """Conversão sRGB -> CIELAB"""

    def test_white(self):
        lab = rgb_to_lab(np.ones((1, 1, 3)))
        np.testing.assert_allclose(lab[0, 0], [100.0, 0.0, 0.0], atol=1e-2)

    def test_black(self):
        np.testing.assert_allclose(rgb_to_lab(np.zeros((1, 1, 3)))[0, 0], [0.0, 0.0, 0.0], atol=1e-6)

    def test_red(self):
        red = np.array([[[1.0, 0.0, 0.0]]])
        np.testing.assert_allclose(rgb_to_lab(red)[0, 0], [53.24, 80.09, 67.20], atol=0.05)

    def test_wrong_channel_count(self):
        with pytest.raises(DimensionError):
            rgb_to_lab(np.zeros((2, 2, 4)))

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            rgb_to_lab(np.full((2, 2, 3), 1.5))

    def test_grayscale_is_replicated(self, rng):
        gray = rng.uniform(size=(4, 5, 1))
        np.testing.assert_allclose(tensor_to_lab(gray), rgb_to_lab(np.repeat(gray, 3, axis=2)))


@pytest.mark.unit
class TestDistanceAndGradient:
    """Distância SLIC e mapa de gradiente"""

    def test_distance_is_zero_on_itself(self):
        p = [50.0, 10.0, -5.0, 3.0, 4.0]
        assert slic_distance(p, p, 10.0, 5.0) == 0.0

    def test_color_only_distance(self):
        assert slic_distance([0, 0, 0, 0, 0], [3, 4, 0, 0, 0], 10.0, 5.0) == pytest.approx(5.0)

    def test_spatial_term(self):
        assert slic_distance([0, 0, 0, 0, 0], [0, 0, 0, 3, 4], 10.0, 20.0) == pytest.approx(2.5)

    def test_non_positive_step(self):
        with pytest.raises(ParameterError):
            slic_distance([0] * 5, [0] * 5, 10.0, 0.0)

    def test_constant_image_has_zero_gradient(self):
        lab = np.full((6, 6, 3), 42.0)
        assert np.all(gradient_map(lab) == 0.0)

    def test_impulse_peaks_at_neighbors(self):
        lab = np.zeros((5, 5, 3))
        lab[2, 2, 0] = 10.0
        grad = gradient_map(lab)
        assert grad[2, 2] == 0.0
        for pos in [(1, 2), (3, 2), (2, 1), (2, 3)]:
            assert grad[pos] == pytest.approx(100.0)
        assert grad.max() == pytest.approx(100.0)

    def test_ramp_center(self):
        rows, cols = np.mgrid[0:3, 0:3]
        lab = np.zeros((3, 3, 3))
        lab[:, :, 0] = 10.0 * cols + 5.0 * rows
        assert image_gradient(lab, (1, 1)) == pytest.approx(500.0)

    def test_position_outside_image(self):
        with pytest.raises(ParameterError):
            image_gradient(np.zeros((3, 3, 3)), (3, 0))


@pytest.mark.unit
class TestSlic:
    """Segmentação SLIC em imagens sintéticas"""

    def test_uniform_image_splits_into_grid(self):
        lab = np.full((64, 64, 3), 50.0)
        result = slic_segment(lab, SlicParams(n_segments=4))
        assert result.n_clusters == 4
        sizes = result.sizes()
        assert np.all(np.abs(sizes - 1024) <= 102)

    def test_one_cluster_per_pixel(self, rng):
        lab = tensor_to_lab(rng.uniform(size=(6, 5, 3)))
        result = slic_segment(lab, SlicParams(n_segments=30))
        assert result.n_clusters == 30
        assert np.all(result.sizes() == 1)

    def test_two_tone_split(self):
        image = np.zeros((32, 32, 3))
        image[:, 16:, :] = 1.0
        result = segment_image(image, n_segments=2, compactness=1.0)
        cols = np.indices((32, 32))[1]
        np.testing.assert_array_equal(result.labels, (cols >= 16).astype(int))

    def test_too_many_segments(self):
        with pytest.raises(ParameterError):
            slic_segment(np.zeros((4, 4, 3)), SlicParams(n_segments=17))

    def test_centers_table(self):
        result = slic_segment(np.full((32, 32, 3), 20.0), SlicParams(n_segments=4))
        assert result.centers.shape == (4, 5)
        np.testing.assert_allclose(result.centers[:, 0], 20.0)

    def test_residual_trace(self, astronaut):
        params = SlicParams(n_segments=100, max_iters=5)
        result = slic_segment(tensor_to_lab(astronaut), params)
        assert 1 <= len(result.residuals) <= params.max_iters
        if len(result.residuals) < params.max_iters:
            assert result.residuals[-1] < params.residual_threshold

    @pytest.mark.parametrize("k, shape", [(5, (64, 64)), (7, (64, 64)), (13, (20, 50)),
                                          (29, (7, 9)), (101, (40, 30)), (63, (7, 9))])
    def test_seed_grid_places_exactly_k_seeds(self, k, shape):
        H, W = shape
        cy, cx, _, _ = _seed_grid(k, H, W)
        assert cy.size == cx.size == k
        assert len(set(zip(cy.tolist(), cx.tolist()))) == k
        assert cy.min() >= 0 and cy.max() < H
        assert cx.min() >= 0 and cx.max() < W

    @pytest.mark.parametrize("k", [5, 7, 11, 13, 29, 101])
    def test_prime_counts_on_uniform_image(self, k):
        result = slic_segment(np.full((64, 64, 3), 50.0), SlicParams(n_segments=k))
        assert abs(result.n_clusters - k) / k <= 0.1

    def test_constant_image_without_connectivity_keeps_every_seed(self):
        result = slic_segment(np.full((64, 64, 3), 50.0),
                              SlicParams(n_segments=7, enforce_connectivity=False))
        assert result.n_clusters == 7

    def test_connectivity_helper_splits_disconnected_label(self):
        labels = np.zeros((4, 8), dtype=int)
        labels[:, 3:5] = 1
        out = enforce_connectivity(labels, S=1.0)
        assert out.max() + 1 == 3
        assert out[0, 0] == 0 and out[0, 3] == 1 and out[0, 7] == 2

    def test_connectivity_merges_single_pixel_fragment(self):
        labels = np.zeros((6, 6), dtype=int)
        labels[:, 3:] = 1
        labels[0, 5] = 0
        out = enforce_connectivity(labels, S=4.0)
        assert out.max() + 1 == 2
        assert out[0, 5] == out[5, 5]


@pytest.mark.integration
class TestSlicOnNaturalImages:
    """Propriedades do SLIC nas imagens naturais de teste"""

    @pytest.mark.parametrize("k", [100, 400])
    def test_cluster_count_close_to_requested(self, astronaut, k):
        result = segment_image(astronaut, n_segments=k)
        assert abs(result.n_clusters - k) / k <= 0.1

    def test_labels_partition_the_image(self, natural_images):
        result = segment_image(natural_images["coffee"], n_segments=200)
        sizes = result.sizes()
        assert sizes.sum() == 128 * 128
        assert np.all(sizes >= 1)
        assert result.labels.min() == 0

    def test_every_cluster_is_connected(self, natural_images):
        result = segment_image(natural_images["chelsea"], n_segments=150)
        for k in range(result.n_clusters):
            _, n_parts = ndimage.label(result.labels == k)
            assert n_parts == 1

    def test_deterministic(self, astronaut):
        a = segment_image(astronaut, n_segments=120)
        b = segment_image(astronaut, n_segments=120)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_compactness_reduces_spread(self, astronaut):
        loose = segment_image(astronaut, n_segments=150, compactness=1.0)
        tight = segment_image(astronaut, n_segments=150, compactness=20.0)
        assert cluster_spread(tight) <= cluster_spread(loose)

    @pytest.mark.parametrize("k", [101, 211])
    def test_prime_counts_close_to_requested(self, astronaut, k):
        result = segment_image(astronaut, n_segments=k)
        assert abs(result.n_clusters - k) / k <= 0.1

    @pytest.mark.parametrize("name, k", [("astronaut", 50), ("coffee", 300), ("chelsea", 150)])
    def test_pixels_stay_in_their_center_window(self, natural_images, name, k):
        result = segment_image(natural_images[name], n_segments=k, enforce=False)
        rows, cols = np.indices(result.shape)
        dx = np.abs(cols.reshape(-1, 1) - result.centers[np.newaxis, :, 3])
        dy = np.abs(rows.reshape(-1, 1) - result.centers[np.newaxis, :, 4])
        chebyshev = np.maximum(dx, dy)
        own = chebyshev[np.arange(chebyshev.shape[0]), result.labels.ravel()]
        covered = (chebyshev <= result.step).any(axis=1)
        assert np.all(own[covered] <= result.step)
        np.testing.assert_allclose(own[~covered], chebyshev[~covered].min(axis=1))


def smooth_random_image(seed, size=48):
    """Ruído uniforme suavizado e reescalado para [0, 1]"""
    gen = np.random.default_rng(seed)
    image = ndimage.gaussian_filter(gen.uniform(size=(size, size, 3)), sigma=(4, 4, 0))
    image -= image.min()
    return image / image.max()


@pytest.mark.integration
class TestSlicResidual:
    """Descida do resíduo L1 dos centros"""

    def test_residual_is_non_increasing_at_the_end(self):
        trials = 40
        settled = 0
        for seed in range(trials):
            result = segment_image(smooth_random_image(seed), n_segments=30, max_iters=20)
            tail = np.asarray(result.residuals[-3:])
            settled += bool(np.all(np.diff(tail) <= 0))
        assert settled >= 0.95 * trials
