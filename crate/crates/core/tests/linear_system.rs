//! End to end checks of sparse assembly, constraint elimination, and
//! the direct solve, using a five point Laplacian whose truncation
//! error vanishes for biquadratic data.

use num_complex::Complex64;

use elastoscope_core::linsys::{apply_constraints, solve, ConstraintSet, SparseMatrix};
use elastoscope_core::Grid;

/// s(x, y) = x (10 - x) y (10 - y); its fourth derivatives vanish, so
/// the three point stencil reproduces the continuous Laplacian exactly
/// and the discrete solution must match at machine precision.
fn quartic(x: f64, y: f64) -> f64 {
    x * (10.0 - x) * y * (10.0 - y)
}

fn assemble_fd_poisson(grid: &Grid) -> (SparseMatrix, Vec<Complex64>, Vec<f64>) {
    let n = grid.len();
    let (hx2, hy2) = (grid.hx() * grid.hx(), grid.hy() * grid.hy());
    let mut mat = SparseMatrix::new(n);
    let mut rhs = vec![Complex64::default(); n];
    let mut exact = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (x, y) = grid.coords(i, j);
            exact[k] = quartic(x, y);
            if grid.is_boundary(i, j) {
                continue;
            }
            mat.push(k, k, Complex64::from(-2.0 / hx2 - 2.0 / hy2)).unwrap();
            mat.push(k, grid.idx(i - 1, j), Complex64::from(1.0 / hx2)).unwrap();
            mat.push(k, grid.idx(i + 1, j), Complex64::from(1.0 / hx2)).unwrap();
            mat.push(k, grid.idx(i, j - 1), Complex64::from(1.0 / hy2)).unwrap();
            mat.push(k, grid.idx(i, j + 1), Complex64::from(1.0 / hy2)).unwrap();
            // lap s = -2 y (10 - y) - 2 x (10 - x)
            rhs[k] = Complex64::from(-2.0 * y * (10.0 - y) - 2.0 * x * (10.0 - x));
        }
    }
    (mat, rhs, exact)
}

fn solve_fd_poisson(grid: &Grid) -> Vec<Complex64> {
    let (mut mat, mut rhs, exact) = assemble_fd_poisson(grid);
    let mut cs = ConstraintSet::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                cs.insert(grid.idx(i, j), Complex64::from(exact[grid.idx(i, j)])).unwrap();
            }
        }
    }
    apply_constraints(&mut mat, &mut rhs, &cs).unwrap();
    mat.finalize();
    let (x, report) = solve(&mat, &rhs, 1e-12).unwrap();
    assert!(report.converged, "relative residual {:.3e}", report.rel_residual);
    x
}

#[test]
fn fd_poisson_reproduces_biquadratic_exactly() {
    let grid = Grid::new(17, 17, 10.0, 10.0).unwrap();
    let (_, _, exact) = assemble_fd_poisson(&grid);
    let x = solve_fd_poisson(&grid);
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (k, got) in x.iter().enumerate() {
        assert!(
            (got - Complex64::from(exact[k])).norm() <= 1e-10 * scale,
            "node {k}: got {got:?}, want {}",
            exact[k]
        );
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let grid = Grid::new(17, 13, 10.0, 8.0).unwrap();
    let a = solve_fd_poisson(&grid);
    let b = solve_fd_poisson(&grid);
    let bits = |v: &[Complex64]| -> Vec<(u64, u64)> {
        v.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn matrix_market_dump_round_trips() {
    let grid = Grid::new(5, 5, 1.0, 1.0).unwrap();
    let (mut mat, mut rhs, _) = assemble_fd_poisson(&grid);
    let mut cs = ConstraintSet::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                cs.insert(grid.idx(i, j), Complex64::default()).unwrap();
            }
        }
    }
    apply_constraints(&mut mat, &mut rhs, &cs).unwrap();
    mat.finalize();

    let dir = std::env::temp_dir().join("elastoscope-mm-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("poisson.mtx");
    mat.write_matrix_market(&path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "%%MatrixMarket matrix coordinate complex general");
    let sizes: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(sizes[0], grid.len());
    assert_eq!(sizes[1], grid.len());
    assert_eq!(sizes[2], mat.nnz());

    let mut rebuilt = SparseMatrix::new(grid.len());
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(toks.len(), 4);
        let r: usize = toks[0].parse().unwrap();
        let c: usize = toks[1].parse().unwrap();
        let re: f64 = toks[2].parse().unwrap();
        let im: f64 = toks[3].parse().unwrap();
        rebuilt.push(r - 1, c - 1, Complex64::new(re, im)).unwrap();
    }
    rebuilt.finalize();

    let (rp, rc, rv) = rebuilt.csr().unwrap();
    let (mp, mc, mv) = mat.csr().unwrap();
    assert_eq!(rp, mp);
    assert_eq!(rc, mc);
    assert_eq!(rv, mv);
    std::fs::remove_dir_all(&dir).ok();
}
