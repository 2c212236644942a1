import numpy as np
import pytest

from skelmotion import kernels


def has_native():
    try:
        kernels.get_backend("native")
        return True
    except ImportError:
        return False


needs_native = pytest.mark.skipif(not has_native(), reason="native kernels not built")


def test_backend_reports_something():
    assert kernels.BACKEND in ("native", "numpy")


class TestFallbackCorrectness:
    """Fallback vs. brute force; the parity test below extends to native."""

    def test_linear_smooth_matches_lstsq(self):
        rng = np.random.default_rng(0)
        n = 40
        x = np.sort(rng.uniform(0, 10, n))
        y = rng.normal(size=n)
        fb = kernels.get_backend("numpy")
        fitted, cv = fb.linear_smooth(x, y, np.full(n, 7, dtype=np.int64))
        for i in range(n):
            lo = max(0, i - 3)
            hi = min(n - 1, i + 3)
            coef = np.polyfit(x[lo:hi + 1], y[lo:hi + 1], 1)
            assert fitted[i] == pytest.approx(np.polyval(coef, x[i]), abs=1e-9)

    def test_linear_smooth_cv_is_leave_one_out(self):
        rng = np.random.default_rng(1)
        n = 30
        x = np.sort(rng.uniform(0, 10, n))
        y = rng.normal(size=n)
        fb = kernels.get_backend("numpy")
        _, cv = fb.linear_smooth(x, y, np.full(n, 9, dtype=np.int64))
        for i in range(5, 25):   # interior points with full windows
            lo, hi = i - 4, i + 4
            sel = [j for j in range(lo, hi + 1) if j != i]
            coef = np.polyfit(x[sel], y[sel], 1)
            assert cv[i] == pytest.approx(np.polyval(coef, x[i]), abs=1e-9)

    def test_barycentric_matches_direct_lagrange(self):
        rng = np.random.default_rng(2)
        nodes = np.array([0.0, 1.0, 2.5, 4.0])
        values = rng.normal(size=(4, 3))
        grid = np.linspace(-0.5, 4.5, 33)
        out = kernels.barycentric_eval(nodes, values, grid)
        for gi, t in enumerate(grid):
            direct = np.zeros(3)
            for j in range(4):
                basis = 1.0
                for k in range(4):
                    if k != j:
                        basis *= (t - nodes[k]) / (nodes[j] - nodes[k])
                direct += basis * values[j]
            assert np.allclose(out[gi], direct, atol=1e-9)

    def test_barycentric_exact_at_nodes(self):
        rng = np.random.default_rng(3)
        nodes = np.arange(6.0)
        values = rng.normal(size=(6, 5))
        out = kernels.barycentric_eval(nodes, values, nodes)
        assert np.array_equal(out, values)


@needs_native
class TestBackendParity:
    def test_hamilton_bit_identical(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(1000, 4))
        b = rng.normal(size=(1000, 4))
        nat = kernels.get_backend("native")
        fb = kernels.get_backend("numpy")
        assert np.array_equal(np.asarray(nat.hamilton(a, b)), fb.hamilton(a, b))

    def test_angular_distance_close(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(1000, 4))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = rng.normal(size=(1000, 4))
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        nat = np.asarray(kernels.get_backend("native").quat_angular_distance(a, b))
        fb = kernels.get_backend("numpy").quat_angular_distance(a, b)
        assert np.allclose(nat, fb, atol=1e-12)

    def test_linear_smooth_bit_identical(self):
        rng = np.random.default_rng(6)
        n = 500
        x = np.sort(rng.uniform(0, 50, n))
        y = np.sin(x) + rng.normal(0, 0.1, n)
        w = rng.integers(3, 60, n).astype(np.int64)
        f_nat, c_nat = kernels.get_backend("native").linear_smooth(x, y, w)
        f_fb, c_fb = kernels.get_backend("numpy").linear_smooth(x, y, w)
        assert np.array_equal(np.asarray(f_nat), f_fb)
        assert np.array_equal(np.asarray(c_nat), c_fb)

    def test_barycentric_close(self):
        rng = np.random.default_rng(7)
        nodes = np.sort(rng.uniform(0, 10, 6))
        values = rng.normal(size=(6, 12))
        grid = np.concatenate([np.linspace(0, 10, 101), nodes])
        nat = np.asarray(kernels.get_backend("native").barycentric_eval(nodes, values, grid))
        fb = kernels.get_backend("numpy").barycentric_eval(nodes, values, grid)
        assert np.allclose(nat, fb, rtol=1e-9, atol=1e-9)
