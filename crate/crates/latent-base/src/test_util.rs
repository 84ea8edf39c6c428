//! Finite-difference oracles shared by unit tests. Test-only: independent of
//! the analytic gradient paths they check.

/// Central finite difference of a scalar function.
pub fn finite_difference(f: impl Fn(f64) -> f64, x: f64, delta: f64) -> f64 {
    (f(x + delta) - f(x - delta)) / (2.0 * delta)
}

/// log|det J| of a vector map via a central-difference Jacobian (square
/// maps, small dims).
pub fn fd_log_abs_det_jacobian(
    f: impl Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    delta: f64,
) -> f64 {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += delta;
        xm[j] -= delta;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..n {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * delta);
        }
    }
    det(&mut jac).abs().ln()
}

/// Plain Gaussian-elimination determinant (partial pivoting).
fn det(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            d = -d;
        }
        d *= a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    d
}

/// Relative agreement check used by all gradient tests: compares analytic
/// and finite-difference values with a floor so near-zero gradients don't
/// blow up the ratio.
pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0)
}
