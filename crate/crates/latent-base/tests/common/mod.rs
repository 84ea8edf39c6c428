//! Independent oracles shared by the integration suites: finite-difference
//! gradients/Jacobians, brute-force HMM path enumeration, and Pearson
//! correlation. These never call the implementation paths they check.

use latent_base::hmm::{GaussianHMM, SequenceEmbedding};

pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0)
}

/// log|det J| of a square map via central differences and Gaussian
/// elimination.
pub fn fd_log_abs_det_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], delta: f64) -> f64 {
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

/// Exact sequence likelihood by summing the joint density over every state
/// path (S^T paths).
pub fn brute_force_hmm_log_likelihood(hmm: &GaussianHMM, seq: &SequenceEmbedding) -> f64 {
    let s = hmm.num_states();
    let t = seq.len();
    let mut total: f64 = 0.0;
    for code in 0..s.pow(t as u32) {
        let mut rem = code;
        let mut log_p = 0.0;
        let mut prev: Option<usize> = None;
        for step in 0..t {
            let state = rem % s;
            rem /= s;
            log_p += match prev {
                None => hmm.initial()[state].ln(),
                Some(p) => hmm.transitions()[(p, state)].ln(),
            };
            log_p += hmm.emission_log_pdf(state, &seq.frames[step]);
            prev = Some(state);
        }
        total += log_p.exp();
    }
    total.ln()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}
