//! Finite-difference operators on nodal fields.
//!
//! First derivatives use the three-point one-sided stencil on the
//! boundary and central differences inside, so every operator here is
//! second-order accurate up to the domain edge. The scalar Laplacian
//! widens to the five-point-per-axis fourth-order stencil where it
//! fits; direct inversion of `rho omega^2 u / Delta u` style quotients
//! is sensitive enough to numerical dispersion to need the extra
//! accuracy in the interior.
//!
//! Exactness checks worth remembering when editing stencils:
//! affine fields have exact gradients, rigid motions `(c, -c)` and
//! `(y, -x)` have vanishing symmetric gradient, and `div(curl w) = 0`
//! holds identically in exact arithmetic.

use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::Grid;
use num_complex::Complex64;

/// x-derivative of one flat component.
fn ddx(grid: &Grid, v: &[Complex64]) -> Vec<Complex64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h2 = 2.0 * grid.hx();
    let mut out = vec![Complex64::default(); v.len()];
    for j in 0..ny {
        let row = j * nx;
        out[row] = (-3.0 * v[row] + 4.0 * v[row + 1] - v[row + 2]) / h2;
        for i in 1..nx - 1 {
            out[row + i] = (v[row + i + 1] - v[row + i - 1]) / h2;
        }
        out[row + nx - 1] =
            (3.0 * v[row + nx - 1] - 4.0 * v[row + nx - 2] + v[row + nx - 3]) / h2;
    }
    out
}

/// y-derivative of one flat component.
fn ddy(grid: &Grid, v: &[Complex64]) -> Vec<Complex64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h2 = 2.0 * grid.hy();
    let mut out = vec![Complex64::default(); v.len()];
    for i in 0..nx {
        out[i] = (-3.0 * v[i] + 4.0 * v[nx + i] - v[2 * nx + i]) / h2;
        let top = (ny - 1) * nx + i;
        out[top] = (3.0 * v[top] - 4.0 * v[top - nx] + v[top - 2 * nx]) / h2;
    }
    for j in 1..ny - 1 {
        for i in 0..nx {
            let k = j * nx + i;
            out[k] = (v[k + nx] - v[k - nx]) / h2;
        }
    }
    out
}

/// Second derivative along one axis, addressed through `stride`.
/// Fourth-order central where five points fit, second-order otherwise.
fn d2_line(v: &[Complex64], out: &mut [Complex64], start: usize, stride: usize, n: usize, h: f64) {
    let hh = h * h;
    let at = |k: usize| v[start + k * stride];
    for k in 0..n {
        let d2 = if n >= 4 && k == 0 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / hh
        } else if n >= 4 && k == n - 1 {
            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / hh
        } else if k >= 2 && k + 2 < n {
            (-at(k - 2) + 16.0 * at(k - 1) - 30.0 * at(k) + 16.0 * at(k + 1) - at(k + 2))
                / (12.0 * hh)
        } else {
            let c = k.clamp(1, n - 2);
            (at(c - 1) - 2.0 * at(c) + at(c + 1)) / hh
        };
        out[start + k * stride] += d2;
    }
}

pub fn gradient(s: &ScalarField) -> VectorField {
    let g = s.grid;
    let gx = ScalarField::from_values(g, ddx(&g, s.values())).expect("finite");
    let gy = ScalarField::from_values(g, ddy(&g, s.values())).expect("finite");
    VectorField::from_components(gx, gy).expect("same grid")
}

pub fn divergence(u: &VectorField) -> ScalarField {
    let g = u.grid;
    let dx = ddx(&g, u.comp(0));
    let dy = ddy(&g, u.comp(1));
    let values = dx.into_iter().zip(dy).map(|(a, b)| a + b).collect();
    ScalarField::from_values(g, values).expect("finite")
}

/// Symmetric gradient (strain): `e_xx = du1/dx`, `e_yy = du2/dy`,
/// `e_xy = (du1/dy + du2/dx) / 2`.
pub fn sym_gradient(u: &VectorField) -> TensorField {
    let g = u.grid;
    let mut t = TensorField::zeros(g);
    t.xx = ddx(&g, u.comp(0));
    t.yy = ddy(&g, u.comp(1));
    let u1y = ddy(&g, u.comp(0));
    let u2x = ddx(&g, u.comp(1));
    t.xy = u1y.into_iter().zip(u2x).map(|(a, b)| 0.5 * (a + b)).collect();
    t
}

/// Rotated gradient of a scalar: `(dw/dy, -dw/dx)`.
pub fn curl2d_scalar(w: &ScalarField) -> VectorField {
    let g = w.grid;
    let cy = ScalarField::from_values(g, ddy(&g, w.values())).expect("finite");
    let cx = ScalarField::from_values(g, ddx(&g, w.values()))
        .expect("finite")
        .map(|v| -v);
    VectorField::from_components(cy, cx).expect("same grid")
}

/// Scalar curl of a vector: `dF2/dx - dF1/dy`.
pub fn curl2d_vector(f: &VectorField) -> ScalarField {
    let g = f.grid;
    let dx = ddx(&g, f.comp(1));
    let dy = ddy(&g, f.comp(0));
    let values = dx.into_iter().zip(dy).map(|(a, b)| a - b).collect();
    ScalarField::from_values(g, values).expect("finite")
}

/// Frobenius pairing of symmetric tensors, `sum_ij A_ij B_ij`, with no
/// conjugation. Pair against `b.conj()` for the sesquilinear form.
pub fn tensor_contract(a: &TensorField, b: &TensorField) -> ScalarField {
    assert_eq!(a.grid, b.grid, "fields live on different grids");
    let values = (0..a.xx.len())
        .map(|k| a.xx[k] * b.xx[k] + a.yy[k] * b.yy[k] + 2.0 * a.xy[k] * b.xy[k])
        .collect();
    ScalarField::from_values(a.grid, values).expect("finite")
}

pub fn laplacian(s: &ScalarField) -> ScalarField {
    let g = s.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = vec![Complex64::default(); g.len()];
    for j in 0..ny {
        d2_line(s.values(), &mut out, j * nx, 1, nx, g.hx());
    }
    for i in 0..nx {
        d2_line(s.values(), &mut out, i, nx, ny, g.hy());
    }
    ScalarField::from_values(g, out).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gradient_of_affine_is_exact() {
        let g = Grid::square(7, 2.0).unwrap();
        let s = ScalarField::from_fn(g, |x, y| c(x + 2.0 * y));
        let grad = gradient(&s);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let [gx, gy] = grad.at(i, j);
                assert!((gx - c(1.0)).norm() < 1e-13);
                assert!((gy - c(2.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let g = Grid::square(6, 1.0).unwrap();
        let rot = VectorField::from_fn(g, |x, y| [c(y), c(x)]);
        assert!(divergence(&rot).linf() < 1e-13);
        let dil = VectorField::from_fn(g, |x, y| [c(x), c(y)]);
        for v in divergence(&dil).values() {
            assert!((v - c(2.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn strain_of_rigid_motion_vanishes() {
        let g = Grid::square(8, 3.0).unwrap();
        let spin = VectorField::from_fn(g, |x, y| [c(y), c(-x)]);
        let e = sym_gradient(&spin);
        let max = e
            .xx
            .iter()
            .chain(&e.yy)
            .chain(&e.xy)
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-13);
    }

    #[test]
    fn stretch_strain() {
        let g = Grid::square(5, 1.0).unwrap();
        let u = VectorField::from_fn(g, |x, _| [c(x), c(0.0)]);
        let e = sym_gradient(&u);
        for k in 0..g.len() {
            assert!((e.xx[k] - c(1.0)).norm() < 1e-13);
            assert!(e.yy[k].norm() < 1e-13);
            assert!(e.xy[k].norm() < 1e-13);
        }
    }

    #[test]
    fn div_of_curl_vanishes() {
        let g = Grid::square(9, 1.0).unwrap();
        let w = ScalarField::from_fn(g, |x, y| c((x * x - 3.0 * y) * (y + 0.5)));
        // Both operators are linear stencils, so the cancellation is exact
        // for any field, not just smooth ones.
        assert!(divergence(&curl2d_scalar(&w)).linf() < 1e-10);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = Grid::square(9, 1.0).unwrap();
        let s = ScalarField::from_fn(g, |x, y| c(x * y * y + 2.0 * x));
        assert!(curl2d_vector(&gradient(&s)).linf() < 1e-10);
    }

    #[test]
    fn contraction_with_identity_gives_trace() {
        let g = Grid::square(4, 1.0).unwrap();
        let u = VectorField::from_fn(g, |x, y| [c(x * x), c(x * y)]);
        let e = sym_gradient(&u);
        let mut id = TensorField::zeros(g);
        id.xx = vec![c(1.0); g.len()];
        id.yy = vec![c(1.0); g.len()];
        let tr = tensor_contract(&e, &id);
        for (a, b) in tr.values().iter().zip(e.trace().values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let g = Grid::new(12, 9, 2.0, 1.5).unwrap();
        let s = ScalarField::from_fn(g, |x, y| c(x * x + 3.0 * y * y - x * y));
        for v in laplacian(&s).values() {
            assert!((v - c(8.0)).norm() < 1e-10);
        }
    }
}
