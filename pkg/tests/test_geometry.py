import numpy as np
import pytest

from eigencontour import geometry
from eigencontour.geometry import (
    StarContour,
    compute_center,
    extract_star_contour,
    load_mask,
    mask_from_bytes,
    mask_iou,
    mask_to_bytes,
    polygon_to_mask,
    rasterize_contour,
    save_mask,
)

from oracles import rasterize_reference, star_contour_reference


def random_polygon(rng, width, height, n_vertices):
    """Star-shaped random polygon: sorted angles, random radii."""
    cx = rng.uniform(0.2, 0.8) * width
    cy = rng.uniform(0.2, 0.8) * height
    angles = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
    radii = rng.uniform(0.1, 0.5) * min(width, height) * rng.uniform(0.3, 1.0, n_vertices)
    return np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)


class TestPolygonToMask:
    def test_axis_aligned_square(self):
        mask = polygon_to_mask([(0, 0), (4, 0), (4, 4), (0, 4)], 8, 8)
        assert mask.sum() == 16
        assert mask[:4, :4].all()
        assert mask[4:, :].sum() == 0 and mask[:, 4:].sum() == 0

    def test_subpixel_triangle_is_empty(self):
        mask = polygon_to_mask([(0, 0), (1, 0), (0, 1)], 4, 4)
        assert mask.sum() == 0

    def test_random_heptagon_matches_oracle(self):
        rng = np.random.default_rng(11)
        poly = random_polygon(rng, 32, 32, 7)
        assert np.array_equal(polygon_to_mask(poly, 32, 32),
                              rasterize_reference(poly, 32, 32))

    def test_randomized_polygons_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            w = int(rng.integers(4, 65))
            h = int(rng.integers(4, 65))
            poly = random_polygon(rng, w, h, int(rng.integers(3, 12)))
            assert np.array_equal(polygon_to_mask(poly, w, h),
                                  rasterize_reference(poly, w, h))

    def test_self_intersecting_matches_oracle(self):
        # Bowtie: nonzero winding fills both lobes.
        poly = np.array([(1.0, 1.0), (9.0, 9.0), (9.0, 1.0), (1.0, 9.0)])
        mask = polygon_to_mask(poly, 12, 12)
        assert np.array_equal(mask, rasterize_reference(poly, 12, 12))
        assert mask.sum() > 0

    def test_clipping(self):
        mask = polygon_to_mask([(-10, -10), (6, -10), (6, 2), (-10, 2)], 4, 4)
        assert np.array_equal(mask, rasterize_reference(
            np.array([(-10, -10), (6, -10), (6, 2), (-10, 2)], float), 4, 4))
        assert mask[:2, :].all() and mask[2:, :].sum() == 0

    def test_degenerate_polygon_warns_and_is_empty(self):
        with pytest.warns(UserWarning):
            mask = polygon_to_mask([(1, 1), (2, 2), (3, 3)], 8, 8)
        assert mask.sum() == 0

    def test_rejects_bad_polygons(self):
        with pytest.raises(ValueError):
            polygon_to_mask([(0, 0), (1, 1)], 4, 4)
        with pytest.raises(ValueError):
            polygon_to_mask([(0, 0), (np.inf, 1), (1, 0)], 4, 4)


class TestComputeCenter:
    def test_full_square(self):
        assert compute_center(np.ones((5, 5), np.uint8)) == (2.5, 2.5)

    def test_single_pixel(self):
        mask = np.zeros((4, 6), np.uint8)
        mask[1, 3] = 1
        assert compute_center(mask) == (3.5, 1.5)

    def test_l_shape_matches_direct_sum(self):
        mask = np.zeros((6, 6), np.uint8)
        pixels = [(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2)]
        for y, x in pixels:
            mask[y, x] = 1
        ex = sum(x + 0.5 for _, x in pixels) / len(pixels)
        ey = sum(y + 0.5 for y, _ in pixels) / len(pixels)
        assert compute_center(mask) == (ex, ey)

    def test_empty_mask_raises(self):
        with pytest.raises(ValueError, match="empty instance"):
            compute_center(np.zeros((3, 3), np.uint8))


class TestExtractStarContour:
    def test_square_symmetry(self):
        # Every quadrant bin is dominated by a corner pixel of the block.
        contour = extract_star_contour(np.ones((5, 5), np.uint8), (2.5, 2.5), 4)
        assert np.allclose(contour.radii, 2 * np.sqrt(2))

    def test_single_pixel_all_radii_vanish(self):
        mask = np.zeros((5, 5), np.uint8)
        mask[2, 2] = 1
        contour = extract_star_contour(mask, (2.5, 2.5), 8)
        assert np.all(contour.radii <= geometry.RADIUS_EPS)

    def test_disk_matches_binning_oracle(self):
        yy, xx = np.mgrid[0:9, 0:9]
        mask = ((xx - 4) ** 2 + (yy - 4) ** 2 <= 16).astype(np.uint8)
        center = compute_center(mask)
        contour = extract_star_contour(mask, center, 36)
        assert np.allclose(contour.radii,
                           star_contour_reference(mask, center, 36), atol=0)

    def test_random_masks_match_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mask = (rng.random((16, 16)) < 0.4).astype(np.uint8)
            if not mask.any():
                continue
            center = compute_center(mask)
            n = int(rng.integers(3, 24))
            assert np.allclose(extract_star_contour(mask, center, n).radii,
                               star_contour_reference(mask, center, n), atol=0)

    def test_errors(self):
        with pytest.raises(ValueError, match="empty instance"):
            extract_star_contour(np.zeros((3, 3), np.uint8), (1, 1), 8)
        with pytest.raises(ValueError):
            extract_star_contour(np.ones((3, 3), np.uint8), (np.nan, 1), 8)
        with pytest.raises(ValueError):
            extract_star_contour(np.ones((3, 3), np.uint8), (1, 1), 2)


class TestRasterizeContour:
    def test_zero_radii_empty(self):
        contour = StarContour((16.0, 16.0), np.zeros(8))
        with pytest.warns(UserWarning):
            assert rasterize_contour(contour, 32, 32).sum() == 0

    def test_36gon_matches_polygon_oracle(self):
        contour = StarContour((16.0, 16.0), np.full(36, 10.0))
        theta = 2 * np.pi * np.arange(36) / 36
        poly = np.stack([16 + 10 * np.cos(theta), 16 + 10 * np.sin(theta)], axis=1)
        assert np.array_equal(rasterize_contour(contour, 32, 32),
                              rasterize_reference(poly, 32, 32))

    def test_square_roundtrip_iou(self):
        mask = np.zeros((64, 64), np.uint8)
        mask[16:48, 16:48] = 1
        contour = extract_star_contour(mask, compute_center(mask), 360)
        recon = rasterize_contour(contour, 64, 64)
        assert mask_iou(mask, recon) >= 0.95

    def test_convex_shapes_roundtrip_iou(self):
        # Star-convex sampling is near-lossless on convex shapes at fine n.
        yy, xx = np.mgrid[0:48, 0:48]
        ellipse = ((xx - 24) ** 2 / 400 + (yy - 22) ** 2 / 144 <= 1).astype(np.uint8)
        rect = np.zeros((48, 48), np.uint8)
        rect[10:30, 6:42] = 1
        for mask in (ellipse, rect):
            contour = extract_star_contour(mask, compute_center(mask), 90)
            assert mask_iou(mask, rasterize_contour(contour, 48, 48)) >= 0.9

    def test_rotation_of_radii_matches_rotated_shape(self):
        # Rolling the radii k slots is the same shape rotated k sample
        # steps; on a disk both are the identity.
        disk = StarContour((24.0, 24.0), np.full(72, 15.0))
        base = rasterize_contour(disk, 48, 48)
        rolled = StarContour((24.0, 24.0), np.roll(disk.radii, 5))
        assert np.array_equal(base, rasterize_contour(rolled, 48, 48))

        theta = 2 * np.pi * np.arange(72) / 72
        radii = 12 + 3 * np.cos(3 * theta) + 2 * np.sin(theta)
        k = 7
        rolled = rasterize_contour(StarContour((24.0, 24.0), np.roll(radii, k)), 48, 48)
        rot = theta + 2 * np.pi * k / 72
        poly = np.stack([24 + np.roll(radii, k) * np.cos(theta),
                         24 + np.roll(radii, k) * np.sin(theta)], axis=1)
        # same vertex set as rotating the original polygon by k steps
        orig_pts = np.stack([24 + radii * np.cos(rot - 2 * np.pi * k / 72),
                             24 + radii * np.sin(rot - 2 * np.pi * k / 72)], axis=1)
        assert np.allclose(np.roll(orig_pts, k, axis=0), poly)
        assert rolled.sum() > 0


class TestMaskIoU:
    def test_identity(self):
        mask = (np.random.default_rng(0).random((8, 8)) < 0.5).astype(np.uint8)
        mask[0, 0] = 1
        assert mask_iou(mask, mask) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), np.uint8)
        b = np.zeros((4, 4), np.uint8)
        a[0, 0] = 1
        b[3, 3] = 1
        assert mask_iou(a, b) == 0.0

    def test_shifted_block(self):
        a = np.zeros((8, 8), np.uint8)
        b = np.zeros((8, 8), np.uint8)
        a[0:4, 0:4] = 1
        b[0:4, 2:6] = 1
        assert mask_iou(a, b) == pytest.approx(1 / 3, abs=0)

    def test_both_empty(self):
        assert mask_iou(np.zeros((3, 3)), np.zeros((3, 3))) == 0.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = (rng.random((10, 10)) < 0.5).astype(np.uint8)
            b = (rng.random((10, 10)) < 0.5).astype(np.uint8)
            ab = mask_iou(a, b)
            assert ab == mask_iou(b, a)
            assert 0.0 <= ab <= 1.0
            if a.any() and np.array_equal(a, b):
                assert ab == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mask_iou(np.zeros((3, 3)), np.zeros((3, 4)))

    def test_one_iff_identical(self):
        a = np.zeros((6, 6), np.uint8)
        a[2:4, 2:4] = 1
        b = a.copy()
        b[0, 0] = 1
        assert mask_iou(a, b) < 1.0


class TestMaskSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        for shape in [(1, 1), (3, 5), (17, 9), (64, 64)]:
            mask = (rng.random(shape) < 0.5).astype(np.uint8)
            assert np.array_equal(mask_from_bytes(mask_to_bytes(mask)), mask)
        mask = (rng.random((13, 7)) < 0.5).astype(np.uint8)
        save_mask(mask, tmp_path / "m.ecmk")
        assert np.array_equal(load_mask(tmp_path / "m.ecmk"), mask)

    def test_header_layout(self):
        buf = mask_to_bytes(np.ones((2, 3), np.uint8))
        assert buf[:4] == b"ECMK"
        assert int.from_bytes(buf[4:8], "little") == 3
        assert int.from_bytes(buf[8:12], "little") == 2
        assert len(buf) == 12 + 1

    def test_bad_magic(self):
        with pytest.raises(ValueError, match="not a mask record"):
            mask_from_bytes(b"XXXX" + b"\x00" * 16)

    def test_truncated_and_trailing(self):
        buf = mask_to_bytes(np.ones((4, 4), np.uint8))
        with pytest.raises(ValueError, match="truncated"):
            mask_from_bytes(buf[:-1])
        with pytest.raises(ValueError, match="trailing"):
            mask_from_bytes(buf + b"\x00")
