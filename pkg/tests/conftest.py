import numpy as np
import pytest

from eigencontour import SyntheticShapeSpec, generate_synthetic_corpus


@pytest.fixture(scope="session")
def harmonic_corpus():
    """Small wiggly-shape corpus shared across test modules."""
    spec = SyntheticShapeSpec(seed=7, harmonic_count=4, base_radius=20.0,
                              amplitude=0.3, image_size=64)
    contours, masks = generate_synthetic_corpus(spec, 60, n=120)
    return contours, masks


@pytest.fixture(scope="session")
def disk_corpus():
    """Disks of varying radius (analytic constant-radii contours)."""
    from eigencontour import StarContour, rasterize_contour

    rng = np.random.default_rng(3)
    contours = []
    masks = []
    for _ in range(20):
        r = rng.uniform(8.0, 22.0)
        c = StarContour((32.0, 32.0), np.full(120, r))
        contours.append(c)
        masks.append(rasterize_contour(c, 64, 64))
    return contours, masks
