//! Generic joint-Gaussian conditioning, used as an independent check on the
//! closed-form stage posteriors.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use super::{DistortionSchedule, SourceModel};
use crate::error::{Constraint, Error, Result};

/// Relative pivot threshold below which a conditioning block is treated as
/// singular.
const PIVOT_TOL: f64 = 1e-13;

/// Dense symmetric covariance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::domain(
                    "covariance row length",
                    row.len() as f64,
                    "square matrix",
                ));
            }
            data.extend_from_slice(row);
        }
        let m = CovarianceMatrix { dim, data };
        for i in 0..dim {
            let d = m.get(i, i);
            if d.is_nan() || d < 0.0 {
                return Err(Error::domain("covariance diagonal", m.get(i, i), ">= 0"));
            }
            for j in 0..i {
                let (a, b) = (m.get(i, j), m.get(j, i));
                let scale = 1.0f64.max(a.abs()).max(b.abs());
                let gap = (a - b).abs();
                if gap.is_nan() || gap > 1e-12 * scale {
                    return Err(Error::domain(
                        "covariance asymmetry",
                        a - b,
                        "symmetric matrix",
                    ));
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }
}

/// Linear MMSE coefficients and conditional variance of component `target`
/// given the components in `given`.
///
/// Returns `(coeffs, variance)` with `coeffs[k]` multiplying component
/// `given[k]`. Conditioning on nothing returns the prior variance.
pub fn gaussian_condition_oracle(
    cov: &CovarianceMatrix,
    target: usize,
    given: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let n = cov.dim();
    if target >= n {
        return Err(Error::domain("target index", target as f64, "< dimension"));
    }
    for (k, &g) in given.iter().enumerate() {
        if g >= n {
            return Err(Error::domain("given index", g as f64, "< dimension"));
        }
        if g == target || given[..k].contains(&g) {
            return Err(Error::domain(
                "given index",
                g as f64,
                "distinct from target and each other",
            ));
        }
    }

    let m = given.len();
    // Cholesky factor of the conditioning block.
    let mut l = vec![0.0; m * m];
    let scale = given.iter().map(|&g| cov.get(g, g)).fold(0.0, f64::max);
    for i in 0..m {
        for j in 0..=i {
            let mut s = cov.get(given[i], given[j]);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= PIVOT_TOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Singular { pivot: s });
                }
                l[i * m + i] = sqrt(s);
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }

    // Solve L L^T beta = cross.
    let mut z: Vec<f64> = given.iter().map(|&g| cov.get(g, target)).collect();
    for i in 0..m {
        for k in 0..i {
            z[i] -= l[i * m + k] * z[k];
        }
        z[i] /= l[i * m + i];
    }
    let mut beta = z.clone();
    for i in (0..m).rev() {
        for k in i + 1..m {
            beta[i] -= l[k * m + i] * beta[k];
        }
        beta[i] /= l[i * m + i];
    }

    let explained: f64 = z.iter().map(|v| v * v).sum();
    let variance = (cov.get(target, target) - explained).max(0.0);
    Ok((beta, variance))
}

/// Variables of [`test_channel_covariance`], in order.
pub const TEST_CHANNEL_LABELS: [&str; 5] = ["X", "Y", "X1", "Y2", "X3"];

/// Joint covariance of `(X, Y, X1, Y2, X3)` implied by the three forward
/// test channels
///
/// ```text
/// X1        = (1 - D_X1) X + W1
/// Y2 - mu_1 = (1 - D_Y2 / s1) (Y - mu_1) + W2
/// X3 - mu_2 = (1 - D_X3 / s2) (X - mu_2) + W3
/// ```
///
/// where `mu_i`, `s_i` are obtained by conditioning with
/// [`gaussian_condition_oracle`] at each step, never from the closed forms.
pub fn test_channel_covariance(
    model: &SourceModel,
    schedule: &DistortionSchedule,
) -> Result<CovarianceMatrix> {
    const X: usize = 0;
    const Y: usize = 1;
    const BASIS: usize = 5;

    let rho = model.rho();
    // Basis: X, Y, W1, W2, W3.
    let mut basis_cov = [[0.0; BASIS]; BASIS];
    basis_cov[X][X] = 1.0;
    basis_cov[Y][Y] = 1.0;
    basis_cov[X][Y] = rho;
    basis_cov[Y][X] = rho;

    let unit = |k: usize| {
        let mut v = [0.0; BASIS];
        v[k] = 1.0;
        v
    };
    let covariance = |vars: &[[f64; BASIS]], basis_cov: &[[f64; BASIS]; BASIS]| {
        let rows: Vec<Vec<f64>> = vars
            .iter()
            .map(|a| {
                vars.iter()
                    .map(|b| {
                        let mut s = 0.0;
                        for i in 0..BASIS {
                            for j in 0..BASIS {
                                s += a[i] * basis_cov[i][j] * b[j];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        CovarianceMatrix::from_rows(&rows)
    };
    // out = mean + a (input - mean) + W_k, Var W_k = D a, with a = 1 - D / s.
    let channel = |basis_cov: &mut [[f64; BASIS]; BASIS],
                   input: [f64; BASIS],
                   mean: [f64; BASIS],
                   s: f64,
                   d: f64,
                   noise: usize,
                   constraint: Constraint| {
        if d > s * (1.0 + super::BOUNDARY_SLACK) {
            return Err(Error::Infeasible {
                constraint,
                value: d,
                bound: s,
            });
        }
        let a = (1.0 - d / s).max(0.0);
        basis_cov[noise][noise] = d * a;
        let mut out = [0.0; BASIS];
        for k in 0..BASIS {
            out[k] = mean[k] + a * (input[k] - mean[k]);
        }
        out[noise] += 1.0;
        Ok(out)
    };
    let combine = |coeffs: &[f64], vars: &[[f64; BASIS]]| {
        let mut out = [0.0; BASIS];
        for (c, v) in coeffs.iter().zip(vars) {
            for k in 0..BASIS {
                out[k] += c * v[k];
            }
        }
        out
    };

    let (x, y) = (unit(X), unit(Y));
    let x1 = channel(
        &mut basis_cov,
        x,
        [0.0; BASIS],
        1.0,
        schedule.d_x1,
        2,
        Constraint::Stage1,
    )?;

    let c = covariance(&[x, y, x1], &basis_cov)?;
    let (b1, s1) = gaussian_condition_oracle(&c, 1, &[2])?;
    let mu1 = combine(&b1, &[x1]);
    let y2 = channel(
        &mut basis_cov,
        y,
        mu1,
        s1,
        schedule.d_y2,
        3,
        Constraint::Stage2,
    )?;

    let c = covariance(&[x, y, x1, y2], &basis_cov)?;
    let (b2, s2) = gaussian_condition_oracle(&c, 0, &[2, 3])?;
    let mu2 = combine(&b2, &[x1, y2]);
    let x3 = channel(
        &mut basis_cov,
        x,
        mu2,
        s2,
        schedule.d_x3,
        4,
        Constraint::Stage3,
    )?;

    covariance(&[x, y, x1, y2, x3], &basis_cov)
}
