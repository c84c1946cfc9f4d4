//! Closed-form stage recursion and the two-encoder minimum sum-rate.
//!
//! Sources have zero mean and unit variance, so a [`SourceModel`] is fully
//! described by the correlation `rho`. Every posterior is a linear function
//! of the decoded statistics `X1`, `Y2` and `X3` plus a variance, which is
//! the representation shared with [`gaussian_condition_oracle`].

mod oracle;

pub use oracle::{
    gaussian_condition_oracle, test_channel_covariance, CovarianceMatrix, TEST_CHANNEL_LABELS,
};

use libm::{log, sqrt};

use crate::error::{Constraint, Error, Result};

/// Relative slack granted to the inclusive upper bound of each distortion
/// constraint so that a bound recomputed in floating point still admits the
/// exact zero-rate schedule.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Wagner sum-rates whose magnitude is below this are rounding noise at the
/// zero-rate boundary.
pub const ZERO_RATE_CLAMP: f64 = 1e-12;

/// Bivariate Gaussian source with unit variances, zero means and
/// correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    rho: f64,
}

impl SourceModel {
    pub fn new(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(Error::domain("rho", rho, "|rho| < 1"));
        }
        Ok(SourceModel { rho })
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub(crate) fn rho_sq(&self) -> f64 {
        self.rho * self.rho
    }

    /// Variance of `Y` after the first stage, `D_X1 rho^2 - rho^2 + 1`.
    ///
    /// Evaluates the closed form for any `d_x1`; callers validate.
    #[inline]
    pub fn sigma1_sq(&self, d_x1: f64) -> f64 {
        let q = self.rho_sq();
        d_x1 * q - q + 1.0
    }

    /// Variance of `X` after the second stage.
    pub fn sigma2_sq(&self, d_x1: f64, d_y2: f64) -> f64 {
        let q = self.rho_sq();
        let s1 = self.sigma1_sq(d_x1);
        d_x1 * ((q - 1.0) * (q - 1.0) - d_x1 * q * (-d_y2 + q - 1.0)) / (s1 * s1)
    }

    /// Variance of `Y` after the third stage.
    pub fn sigma3_sq(&self, d_x1: f64, d_y2: f64, d_x3: f64) -> f64 {
        let q = self.rho_sq();
        let qm1_sq = (q - 1.0) * (q - 1.0);
        let s1 = self.sigma1_sq(d_x1);
        let num = d_y2
            * s1
            * ((1.0 - q) * (q * d_x3 * d_y2 + qm1_sq)
                + q * d_x1 * (d_y2 * (q * d_x3 - q + 1.0) + qm1_sq));
        let den = q * d_x1 * (d_y2 - q + 1.0) + qm1_sq;
        num / (den * den)
    }

    /// Smallest `D_Y2` for which the third-stage constraint
    /// `d_x3 <= sigma_2^2(d_x1, D_Y2)` holds. `sigma_2^2` is affine in `D_Y2`
    /// with slope `d_x1^2 rho^2 / sigma_1^4`, so the threshold is explicit.
    ///
    /// Returns `None` for `rho = 0`, where `sigma_2^2 = d_x1` does not depend
    /// on `D_Y2`.
    pub fn min_d_y2_for_stage3(&self, d_x1: f64, d_x3: f64) -> Option<f64> {
        let q = self.rho_sq();
        if q == 0.0 {
            return None;
        }
        let s1 = self.sigma1_sq(d_x1);
        Some((d_x3 * s1 * s1 / d_x1 - (1.0 - q) * (1.0 - q)) / (d_x1 * q) - (1.0 - q))
    }
}

/// The three free design distortions of a three-stage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSchedule {
    pub d_x1: f64,
    pub d_y2: f64,
    pub d_x3: f64,
}

impl DistortionSchedule {
    /// All three distortions must be finite and strictly positive. Upper
    /// bounds depend on `rho` and are checked by [`plan_schedule`].
    pub fn new(d_x1: f64, d_y2: f64, d_x3: f64) -> Result<Self> {
        positive("d_x1", d_x1)?;
        positive("d_y2", d_y2)?;
        positive("d_x3", d_x3)?;
        Ok(DistortionSchedule { d_x1, d_y2, d_x3 })
    }
}

/// Conditional Gaussian law `N(mean, variance)` whose mean is
/// `const_coeff + coeff_x1 * X1 + coeff_y2 * Y2 + coeff_x3 * X3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianPosterior {
    pub const_coeff: f64,
    pub coeff_x1: f64,
    pub coeff_y2: f64,
    pub coeff_x3: f64,
    pub variance: f64,
}

impl GaussianPosterior {
    #[inline]
    pub fn mean(&self, x1: f64, y2: f64, x3: f64) -> f64 {
        self.const_coeff + self.coeff_x1 * x1 + self.coeff_y2 * y2 + self.coeff_x3 * x3
    }

    pub fn coeffs(&self) -> [f64; 3] {
        [self.coeff_x1, self.coeff_y2, self.coeff_x3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    /// 1, 2 or 3.
    pub stage: u8,
    /// Rate spent in this stage alone, nats per sample.
    pub rate: f64,
    pub d_x: f64,
    pub d_y: f64,
    /// Posterior of the source that was *not* encoded in this stage.
    pub posterior: GaussianPosterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePlan {
    pub model: SourceModel,
    pub schedule: DistortionSchedule,
    pub stages: [StageReport; 3],
    pub cumulative_rates: [f64; 3],
}

impl SchedulePlan {
    pub fn rates(&self) -> [f64; 3] {
        [
            self.stages[0].rate,
            self.stages[1].rate,
            self.stages[2].rate,
        ]
    }

    /// `(D_X, D_Y)` after each stage.
    pub fn distortion_pairs(&self) -> [(f64, f64); 3] {
        [
            (self.stages[0].d_x, self.stages[0].d_y),
            (self.stages[1].d_x, self.stages[1].d_y),
            (self.stages[2].d_x, self.stages[2].d_y),
        ]
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.stages[0].posterior.variance
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.stages[1].posterior.variance
    }

    pub fn sigma3_sq(&self) -> f64 {
        self.stages[2].posterior.variance
    }

    pub fn total_rate(&self) -> f64 {
        self.cumulative_rates[2]
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite and > 0"))
    }
}

fn unit_interval(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "0 < value <= 1"))
    }
}

fn within_bound(constraint: Constraint, value: f64, bound: f64) -> Result<()> {
    if value <= bound * (1.0 + BOUNDARY_SLACK) {
        Ok(())
    } else {
        Err(Error::Infeasible {
            constraint,
            value,
            bound,
        })
    }
}

/// `1/2 ln(input_variance / target)`; a target within [`BOUNDARY_SLACK`]
/// of the input variance is a zero-rate stage.
#[inline]
fn gaussian_rate(input_variance: f64, target: f64) -> f64 {
    if target >= input_variance * (1.0 - BOUNDARY_SLACK) {
        0.0
    } else {
        0.5 * log(input_variance / target)
    }
}

/// Minimum sum-rate of two-encoder distributed coding of the source at
/// distortions `(d_x, d_y)`, in nats.
pub fn wagner_sum_rate(model: &SourceModel, d_x: f64, d_y: f64) -> Result<f64> {
    unit_interval("d_x", d_x)?;
    unit_interval("d_y", d_y)?;
    Ok(wagner_unchecked(model, d_x, d_y))
}

pub(crate) fn wagner_unchecked(model: &SourceModel, d_x: f64, d_y: f64) -> f64 {
    let q = model.rho_sq();
    let a = 1.0 - q;
    let dd = d_x * d_y;
    let radical = sqrt(4.0 * dd * q / (a * a) + 1.0);
    let rate = 0.5 * log(a * (radical + 1.0) / (2.0 * dd));
    if rate.abs() < ZERO_RATE_CLAMP {
        0.0
    } else {
        rate
    }
}

/// First stage: ENCx describes `X` at distortion `d_x1`.
///
/// Returns the stage rate and the receiver's posterior of `Y`,
/// `N(rho X1, sigma_1^2)`.
pub fn stage1(model: &SourceModel, d_x1: f64) -> Result<(f64, GaussianPosterior)> {
    positive("d_x1", d_x1)?;
    within_bound(Constraint::Stage1, d_x1, 1.0)?;
    let rate = gaussian_rate(1.0, d_x1);
    let posterior = GaussianPosterior {
        coeff_x1: model.rho,
        variance: model.sigma1_sq(d_x1),
        ..Default::default()
    };
    Ok((rate, posterior))
}

/// Second stage: ENCy describes `Y - mu_1` at distortion `d_y2`.
///
/// Returns the stage rate and the receiver's posterior of `X` given
/// `(X1, Y2)`.
pub fn stage2(model: &SourceModel, d_x1: f64, d_y2: f64) -> Result<(f64, GaussianPosterior)> {
    let (_, post1) = stage1(model, d_x1)?;
    positive("d_y2", d_y2)?;
    let s1 = post1.variance;
    within_bound(Constraint::Stage2, d_y2, s1)?;
    let rho = model.rho;
    let q = model.rho_sq();
    let posterior = GaussianPosterior {
        coeff_x1: (1.0 - q) / s1,
        coeff_y2: d_x1 * rho / s1,
        variance: model.sigma2_sq(d_x1, d_y2),
        ..Default::default()
    };
    Ok((gaussian_rate(s1, d_y2), posterior))
}

/// Third stage: ENCx describes `X - mu_2` at distortion `d_x3`.
///
/// Returns the stage rate and the receiver's posterior of `Y` given
/// `(X1, Y2, X3)`.
pub fn stage3(
    model: &SourceModel,
    d_x1: f64,
    d_y2: f64,
    d_x3: f64,
) -> Result<(f64, GaussianPosterior)> {
    let (_, post2) = stage2(model, d_x1, d_y2)?;
    positive("d_x3", d_x3)?;
    let s2 = post2.variance;
    within_bound(Constraint::Stage3, d_x3, s2)?;
    let rho = model.rho;
    let q = model.rho_sq();
    let s1 = model.sigma1_sq(d_x1);
    let den = q * d_x1 * (-d_y2 + q - 1.0) - (q - 1.0) * (q - 1.0);
    let posterior = GaussianPosterior {
        coeff_x1: -rho * d_y2 * (q - 1.0) / den,
        coeff_y2: (q - 1.0) * s1 / den,
        coeff_x3: -rho * d_y2 * s1 / den,
        variance: model.sigma3_sq(d_x1, d_y2, d_x3),
        ..Default::default()
    };
    Ok((gaussian_rate(s2, d_x3), posterior))
}

/// Validates the chained constraints and assembles all three stages.
pub fn plan_schedule(model: &SourceModel, schedule: &DistortionSchedule) -> Result<SchedulePlan> {
    let DistortionSchedule { d_x1, d_y2, d_x3 } = *schedule;
    let (r1, post1) = stage1(model, d_x1)?;
    let (r2, post2) = stage2(model, d_x1, d_y2)?;
    let (r3, post3) = stage3(model, d_x1, d_y2, d_x3)?;

    let stages = [
        StageReport {
            stage: 1,
            rate: r1,
            d_x: d_x1,
            d_y: post1.variance,
            posterior: post1,
        },
        StageReport {
            stage: 2,
            rate: r2,
            d_x: post2.variance,
            d_y: d_y2,
            posterior: post2,
        },
        StageReport {
            stage: 3,
            rate: r3,
            d_x: d_x3,
            d_y: post3.variance,
            posterior: post3,
        },
    ];
    Ok(SchedulePlan {
        model: *model,
        schedule: *schedule,
        stages,
        cumulative_rates: [r1, r1 + r2, r1 + r2 + r3],
    })
}
