import numpy as np
import pytest

from ucplab import field as fd


def grid(n=64, half=1.0, center=0j):
    return fd.GridSpec(center, half, n)


def smooth_complex(spec, seed=0):
    rng = np.random.default_rng(seed)
    X, Y = spec.meshes()
    out = np.zeros_like(X, dtype=complex)
    for _ in range(4):
        kx, ky = rng.integers(-2, 3, size=2)
        a = rng.normal() + 1j * rng.normal()
        out += a * np.exp(1j * (kx * X + ky * Y))
    return fd.ComplexField(spec, out)


class TestGridSpec:
    def test_cell_centers(self):
        spec = grid(n=8, half=1.0)
        assert spec.h == pytest.approx(0.25)
        assert spec.xs()[0] == pytest.approx(-1.0 + 0.125)
        assert spec.xs()[-1] == pytest.approx(1.0 - 0.125)

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError, match="coarse"):
            fd.GridSpec(0j, 1.0, 4)

    def test_rejects_bad_half_side(self):
        with pytest.raises(ValueError):
            fd.GridSpec(0j, -1.0, 16)


class TestFieldConstruction:
    def test_rejects_non_finite(self):
        spec = grid(n=8)
        vals = np.zeros((8, 8))
        vals[3, 3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            fd.RealField(spec, vals)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            fd.RealField(grid(n=8), np.zeros((8, 9)))

    def test_values_read_only(self):
        f = fd.field_from_function(grid(n=8), lambda x, y: x)
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_ops_require_same_grid(self):
        a = fd.field_from_function(grid(n=8), lambda x, y: x)
        b = fd.field_from_function(grid(n=16), lambda x, y: y)
        with pytest.raises(ValueError, match="different grids"):
            _ = a + b


class TestDerivatives:
    def test_dbar_exact_on_affine(self):
        spec = grid()
        f = fd.field_from_function(spec, lambda x, y: (2.0 + 1j) * (x + 1j * y) + 3.0)
        # f is holomorphic affine, so dbar f = 0 identically.
        assert fd.sup_norm(fd.dbar(f)) < 1e-13

    def test_dbar_of_conjugate_affine(self):
        spec = grid()
        f = fd.field_from_function(spec, lambda x, y: x - 1j * y)
        err = np.abs(fd.dbar(f).values - 1.0)
        assert err.max() < 1e-13

    def test_dz_conjugation_identity(self):
        spec = grid()
        f = smooth_complex(spec)
        lhs = fd.dz(f).values
        rhs = np.conj(fd.dbar(f.conj()).values)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_laplacian_exact_on_quadratics(self):
        spec = grid(n=32)
        f = fd.field_from_function(spec, lambda x, y: x**2 - y**2 + 0.5 * x * y + x)
        assert fd.sup_norm(fd.laplacian(f)) < 1e-11

    def test_laplacian_is_four_dz_dbar(self):
        # 4 d dbar equals the Laplacian up to O(h^2); check the refinement rate.
        errs = []
        for n in (32, 64, 128):
            spec = grid(n=n)
            f = smooth_complex(spec, seed=3)
            wide = 4.0 * fd.dz(fd.dbar(f)).values
            compact = fd.laplacian(f).values
            inner = fd.interior_mask(spec, margin=2)
            errs.append(np.max(np.abs(wide - compact)[inner]))
        order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert min(order) > 1.8

    def test_dbar_refinement_order_on_exp(self):
        errs = []
        for n in (64, 128, 256):
            spec = grid(n=n)
            f = fd.field_from_function(
                spec, lambda x, y: np.exp(x + 1j * y) * np.cos(x)
            )
            exact = fd.field_from_function(
                spec,
                lambda x, y: 0.5
                * (
                    np.exp(x + 1j * y) * np.cos(x)
                    - np.exp(x + 1j * y) * np.sin(x)
                    + 1j * 1j * np.exp(x + 1j * y) * np.cos(x)
                ),
            )
            errs.append(fd.sup_norm(fd.dbar(f) - exact))
        assert np.log2(errs[0] / errs[1]) > 1.8
        assert np.log2(errs[1] / errs[2]) > 1.8


class TestNormsAndRegions:
    def test_sup_norm_linear_on_ball(self):
        spec = grid(n=256, half=1.5)
        f = fd.field_from_function(spec, lambda x, y: x)
        s = fd.sup_norm(f, fd.Ball(0j, 1.0))
        assert abs(s - 1.0) <= 2 * spec.h

    def test_l2_sq_constant(self):
        spec = grid(n=128, half=1.0)
        f = fd.field_from_function(spec, lambda x, y: 3.0 + 0 * x)
        r = 0.7
        got = fd.l2_sq(f, fd.Ball(0j, r))
        assert got == pytest.approx(9.0 * np.pi * r**2, rel=3 * spec.h)

    def test_l2_additive_on_disjoint_cubes(self):
        spec = grid(n=64, half=1.0)
        f = smooth_complex(spec).abs()
        left = fd.Cube(-0.5 + 0j, 0.25)
        right = fd.Cube(0.5 + 0j, 0.25)
        both = fd.l2_sq(f, left) + fd.l2_sq(f, right)
        mask = left.mask(spec) | right.mask(spec)
        direct = spec.h**2 * np.sum(f.values[mask] ** 2)
        assert both == pytest.approx(direct, abs=1e-15)

    def test_empty_region_raises(self):
        spec = grid(n=16, half=1.0)
        f = fd.field_from_function(spec, lambda x, y: x)
        with pytest.raises(ValueError, match="empty region"):
            fd.sup_norm(f, fd.Ball(10 + 0j, 0.01))


class TestSampling:
    def test_bilinear_matches_affine(self):
        spec = grid(n=32)
        f = fd.field_from_function(spec, lambda x, y: 2 * x - 3 * y + 1)
        rng = np.random.default_rng(7)
        pts = (rng.uniform(-0.9, 0.9, 50) + 1j * rng.uniform(-0.9, 0.9, 50))
        got = fd.bilinear_sample(f, pts)
        want = 2 * pts.real - 3 * pts.imag + 1
        assert np.max(np.abs(got - want)) < 1e-12

    def test_bilinear_rejects_outside_hull(self):
        spec = grid(n=16)
        f = fd.field_from_function(spec, lambda x, y: x)
        with pytest.raises(ValueError, match="hull"):
            fd.bilinear_sample(f, np.array([1.0 + 0j]))

    def test_extract_square_preserves_values(self):
        spec = grid(n=64, half=2.0)
        f = fd.field_from_function(spec, lambda x, y: x * y)
        sub = fd.extract_square(f, 1.03)
        assert sub.spec.half_side <= 1.03
        X, Y = sub.spec.meshes()
        assert np.max(np.abs(sub.values - X * Y)) == 0.0


class TestFieldFiles:
    def test_roundtrip_real(self, tmp_path):
        spec = grid(n=16, half=0.5, center=0.25 - 0.5j)
        f = fd.field_from_function(spec, lambda x, y: np.sin(x) + y)
        p = tmp_path / "f.ucpf"
        fd.write_field(p, f)
        g = fd.read_field(p)
        assert isinstance(g, fd.RealField)
        assert g.spec.same_geometry(spec)
        assert np.array_equal(g.values, f.values)

    def test_roundtrip_complex(self, tmp_path):
        spec = grid(n=16)
        f = smooth_complex(spec)
        p = tmp_path / "f.ucpf"
        fd.write_field(p, f)
        g = fd.read_field(p)
        assert isinstance(g, fd.ComplexField)
        assert np.array_equal(g.values, f.values)

    def test_header_layout(self, tmp_path):
        spec = grid(n=8, half=1.0, center=0j)
        f = fd.field_from_function(spec, lambda x, y: 0 * x)
        p = tmp_path / "f.ucpf"
        fd.write_field(p, f)
        raw = p.read_bytes()
        assert raw[:4] == b"UCPF"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:16], "little") == 8
        assert len(raw) == fd._HEADER.size + 8 * 64

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "junk.ucpf"
        p.write_bytes(b"NOPE" + bytes(100))
        with pytest.raises(ValueError, match="magic"):
            fd.read_field(p)

    def test_rejects_truncated_payload(self, tmp_path):
        spec = grid(n=8)
        f = fd.field_from_function(spec, lambda x, y: x)
        p = tmp_path / "f.ucpf"
        fd.write_field(p, f)
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(ValueError, match="payload"):
            fd.read_field(p)
