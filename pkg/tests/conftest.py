import numpy as np
import pytest

from sphere_sw.nodes import QuadratureNodes


@pytest.fixture(autouse=True)
def _no_disk_cache(monkeypatch):
    monkeypatch.delenv("SPHERE_SW_CACHE_DIR", raising=False)


@pytest.fixture
def product_rule():
    """Gauss-Legendre in z times the trapezoid in azimuth on S^2.

    Exact for polynomials of degree < min(2 nz, nphi).
    """

    def build(nz: int = 8, nphi: int = 16) -> QuadratureNodes:
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1.0 - zz**2)
        x = np.column_stack([(r * np.cos(pp)).ravel(), (r * np.sin(pp)).ravel(), zz.ravel()])
        w = np.repeat(wz / 2.0, nphi) / nphi
        return QuadratureNodes(nodes=x, weights=w, method="product")

    return build
