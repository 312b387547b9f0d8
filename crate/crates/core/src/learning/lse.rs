//! Least-squares fits for the linear weights.
//!
//! The systems are tall and at most three columns wide, so they are solved
//! through the normal equations with a Cholesky factorization. A column that is
//! (numerically) a combination of the others makes the Gram matrix singular; in
//! that case a small Tikhonov ridge is added, which picks the minimum-norm
//! solution in the limit.

use crate::error::{Error, Result};

/// Ridge strength, relative to the mean diagonal of the Gram matrix.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Pivots below this fraction of their original diagonal are treated as zero.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LseFit<const P: usize> {
    pub coef: [f64; P],
    /// True when the design matrix was rank-deficient and the ridge path was taken.
    pub ridge: bool,
}

fn cholesky<const P: usize>(g: &[[f64; P]; P]) -> Option<[[f64; P]; P]> {
    let mut l = [[0.0; P]; P];
    for i in 0..P {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > PIVOT_TOL * g[i][i].abs()) || !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<const P: usize>(l: &[[f64; P]; P], rhs: &[f64; P]) -> [f64; P] {
    let mut y = [0.0; P];
    for i in 0..P {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (rhs[i] - s) / l[i][i];
    }
    let mut x = [0.0; P];
    for i in (0..P).rev() {
        let s: f64 = (i + 1..P).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

fn normal_rhs<const P: usize>(rows: &[[f64; P]], y: &[f64], coef: &[f64; P]) -> [f64; P] {
    let mut c = [0.0; P];
    for (row, &t) in rows.iter().zip(y) {
        let pred: f64 = row.iter().zip(coef).map(|(a, w)| a * w).sum();
        let res = t - pred;
        for p in 0..P {
            c[p] += row[p] * res;
        }
    }
    c
}

/// Minimizes `‖X·w − y‖₂` over `w`.
pub fn lse_solve<const P: usize>(rows: &[[f64; P]], y: &[f64]) -> Result<LseFit<P>> {
    if rows.len() != y.len() {
        return Err(Error::arg(format!("{} design rows but {} targets", rows.len(), y.len())));
    }
    if rows.len() < P {
        return Err(Error::arg(format!("least squares with {P} unknowns needs at least {P} rows")));
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("least-squares system contains non-finite values".into()));
    }
    let mut g = [[0.0; P]; P];
    for row in rows {
        for i in 0..P {
            for j in 0..P {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    let (l, ridge) = match cholesky(&g) {
        Some(l) => (l, false),
        None => {
            let mean_diag = (0..P).map(|i| g[i][i]).sum::<f64>() / P as f64;
            let lambda = RIDGE_LAMBDA * mean_diag.max(1.0);
            let mut gr = g;
            for (i, row) in gr.iter_mut().enumerate() {
                row[i] += lambda;
            }
            let l = cholesky(&gr)
                .ok_or_else(|| Error::Numeric("ridge-regularized Gram matrix is not positive definite".into()))?;
            (l, true)
        }
    };
    let mut coef = cholesky_solve(&l, &normal_rhs(rows, y, &[0.0; P]));
    if !ridge {
        // one step of iterative refinement against the original residual
        let delta = cholesky_solve(&l, &normal_rhs(rows, y, &coef));
        for (c, d) in coef.iter_mut().zip(delta) {
            *c += d;
        }
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("least-squares solution is not finite".into()));
    }
    Ok(LseFit { coef, ridge })
}

fn check_lengths(lens: &[usize]) -> Result<()> {
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::arg(format!("vectors differ in length: {lens:?}")));
    }
    Ok(())
}

/// Output weights: `r_u ≈ w₁ r_a + w₂ r_o + w₃`.
pub fn lse_fit_w(r_a: &[f64], r_o: &[f64], r_u: &[f64]) -> Result<LseFit<3>> {
    check_lengths(&[r_a.len(), r_o.len(), r_u.len()])?;
    let rows: Vec<[f64; 3]> = r_a.iter().zip(r_o).map(|(&a, &o)| [a, o, 1.0]).collect();
    lse_solve(&rows, r_u)
}

/// AMYG punishment weights: `p_a^e ≈ w_a1 r_u + w_a2 r_a + w_a3`.
pub fn lse_fit_wa(r_u: &[f64], r_a: &[f64], p_a_e: &[f64]) -> Result<LseFit<3>> {
    check_lengths(&[r_u.len(), r_a.len(), p_a_e.len()])?;
    let rows: Vec<[f64; 3]> = r_u.iter().zip(r_a).map(|(&u, &a)| [u, a, 1.0]).collect();
    lse_solve(&rows, p_a_e)
}

/// ORBI punishment weights: `p_o^e ≈ w_o1 r_o + w_o2`.
pub fn lse_fit_wo(r_o: &[f64], p_o_e: &[f64]) -> Result<LseFit<2>> {
    check_lengths(&[r_o.len(), p_o_e.len()])?;
    let rows: Vec<[f64; 2]> = r_o.iter().map(|&o| [o, 1.0]).collect();
    lse_solve(&rows, p_o_e)
}

/// Largest `|x_pᵀ (y − X·w)| / (‖x_p‖ ‖y‖)` over the columns of the design.
pub fn orthogonality_residual<const P: usize>(rows: &[[f64; P]], y: &[f64], coef: &[f64; P]) -> f64 {
    let c = normal_rhs(rows, y, coef);
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    (0..P)
        .map(|p| {
            let col_norm = rows.iter().map(|r| r[p] * r[p]).sum::<f64>().sqrt();
            if col_norm == 0.0 {
                0.0
            } else {
                c[p].abs() / (col_norm * y_norm)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn exact_linear_recovery() {
        let r_a: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let r_o: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).cos()).collect();
        let r_u: Vec<f64> = r_a.iter().map(|a| 2.0 * a + 1.0).collect();
        let fit = lse_fit_w(&r_a, &r_o, &r_u).unwrap();
        assert!(!fit.ridge);
        assert!(close(&fit.coef, &[2.0, 0.0, 1.0], 1e-10), "{:?}", fit.coef);

        let fit = lse_fit_w(&r_a, &r_o, &r_a).unwrap();
        assert!(close(&fit.coef, &[1.0, 0.0, 0.0], 1e-10));
    }

    #[test]
    fn punishment_weights_recover_definition() {
        let r_u: Vec<f64> = (0..12).map(|i| (i as f64 * 0.4).sin() * 3.0).collect();
        let r_a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.4 + 0.2).sin() * 2.5).collect();
        let pe: Vec<f64> = r_u.iter().zip(&r_a).map(|(u, a)| u - a).collect();
        let fit = lse_fit_wa(&r_u, &r_a, &pe).unwrap();
        assert!(close(&fit.coef, &[1.0, -1.0, 0.0], 1e-10), "{:?}", fit.coef);

        let zeros = vec![0.0; 12];
        let fit = lse_fit_wa(&r_u, &r_a, &zeros).unwrap();
        assert!(close(&fit.coef, &[0.0, 0.0, 0.0], 1e-14));
    }

    #[test]
    fn orbi_weights() {
        let r_o: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        let fit = lse_fit_wo(&r_o, &r_o).unwrap();
        assert!(close(&fit.coef, &[1.0, 0.0], 1e-12));
        let fit = lse_fit_wo(&r_o, &[0.3; 6]).unwrap();
        assert!(close(&fit.coef, &[0.0, 0.3], 1e-12));
    }

    #[test]
    fn rank_deficient_takes_ridge_path() {
        let r_o = vec![0.0; 8];
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let fit = lse_fit_wo(&r_o, &y).unwrap();
        assert!(fit.ridge);
        assert_eq!(fit.coef[0], 0.0);
        assert!((fit.coef[1] - 3.5).abs() < 1e-6);

        // duplicated column: minimum-norm split of the shared coefficient
        let a: Vec<f64> = (0..8).map(|i| (i as f64).sqrt()).collect();
        let u: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let fit = lse_fit_w(&a, &a, &u).unwrap();
        assert!(fit.ridge);
        assert!(close(&fit.coef, &[1.0, 1.0, 0.0], 1e-4), "{:?}", fit.coef);
    }

    #[test]
    fn errors() {
        assert!(lse_fit_w(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(lse_fit_wo(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(lse_fit_wo(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
