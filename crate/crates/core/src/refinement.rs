//! Analyses built on the stage recursion: on-surface verification,
//! feasible distortion regions, rate allocation between the two encoders and
//! the transmission-energy comparison against separate distributed coding.

use alloc::vec::Vec;

use libm::{exp, expm1, pow, sqrt};

use crate::error::{Error, Result};
use crate::rd::{plan_schedule, wagner_sum_rate, DistortionSchedule, SchedulePlan, SourceModel};
use crate::roots::{bisect, DEFAULT_MAX_ITER};

/// Rates below this (nats) are compared absolutely in on-surface residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-3;

/// Absolute accuracy required of inner distortion solves.
pub const SOLVE_TOL: f64 = 1e-10;

/// Inner `d_x1` samples per row/column when mapping feasible regions.
pub const DEFAULT_INNER_POINTS: usize = 4096;

/// Sweep length used when callers do not specify one.
pub const DEFAULT_SWEEP_POINTS: usize = 512;

const REGION_TOL: f64 = 1e-12;
const INTERVAL_SCAN: usize = 1024;

/// `|rate - wagner| / max(rate, RESIDUAL_FLOOR)`.
#[inline]
pub fn surface_residual(cumulative_rate: f64, wagner: f64) -> f64 {
    (cumulative_rate - wagner).abs() / cumulative_rate.max(RESIDUAL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementCheck {
    pub residuals: [f64; 3],
    pub tol: f64,
}

impl RefinementCheck {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| *r <= self.tol)
    }
}

/// Residuals of each cumulative rate against the minimum sum-rate at the
/// stage's distortion pair.
pub fn refinement_residuals(plan: &SchedulePlan) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, (dx, dy)) in plan.distortion_pairs().into_iter().enumerate() {
        // Pairs of a validated plan lie in (0, 1].
        let w = crate::rd::wagner_unchecked(&plan.model, dx, dy);
        out[k] = surface_residual(plan.cumulative_rates[k], w);
    }
    out
}

pub fn verify_refinement(
    model: &SourceModel,
    schedule: &DistortionSchedule,
    tol: f64,
) -> Result<RefinementCheck> {
    let plan = plan_schedule(model, schedule)?;
    Ok(RefinementCheck {
        residuals: refinement_residuals(&plan),
        tol,
    })
}

/// Schedule that spends exactly `rates[k]` nats in stage `k + 1`. Every
/// non-negative rate triplet maps to a valid schedule.
pub fn schedule_from_rates(model: &SourceModel, rates: [f64; 3]) -> Result<DistortionSchedule> {
    for (name, r) in ["r1", "r2", "r3"].into_iter().zip(rates) {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::domain(name, r, "finite and >= 0"));
        }
    }
    let d_x1 = exp(-2.0 * rates[0]);
    let d_y2 = model.sigma1_sq(d_x1) * exp(-2.0 * rates[1]);
    let d_x3 = model.sigma2_sq(d_x1, d_y2) * exp(-2.0 * rates[2]);
    DistortionSchedule::new(d_x1, d_y2, d_x3)
}

/// One operating point of a refinement curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub rates: [f64; 3],
    pub sum_rate: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub wagner: f64,
    pub residual: f64,
}

/// Operating point after `stage` (1..=3) of the schedule spending `rates`.
pub fn surface_point(model: &SourceModel, rates: [f64; 3], stage: usize) -> Result<SurfacePoint> {
    if !(1..=3).contains(&stage) {
        return Err(Error::domain("stage", stage as f64, "1, 2 or 3"));
    }
    let plan = plan_schedule(model, &schedule_from_rates(model, rates)?)?;
    let (d_x, d_y) = plan.distortion_pairs()[stage - 1];
    let sum_rate = plan.cumulative_rates[stage - 1];
    let wagner = wagner_sum_rate(model, d_x, d_y)?;
    Ok(SurfacePoint {
        rates: plan.rates(),
        sum_rate,
        d_x,
        d_y,
        wagner,
        residual: surface_residual(sum_rate, wagner),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionStage {
    Second,
    Third,
}

impl RegionStage {
    pub fn from_index(stage: u8) -> Result<Self> {
        match stage {
            2 => Ok(RegionStage::Second),
            3 => Ok(RegionStage::Third),
            other => Err(Error::domain("stage", other as f64, "2 or 3")),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            RegionStage::Second => 2,
            RegionStage::Third => 3,
        }
    }
}

/// Boolean map of achievable `(d_x, d_y)` pairs after a given stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegionGrid {
    pub stage: RegionStage,
    pub rho: f64,
    pub axis: Vec<f64>,
    mask: Vec<bool>,
}

impl FeasibleRegionGrid {
    /// Whether `(d_x = axis[i], d_y = axis[j])` is achievable.
    #[inline]
    pub fn is_feasible(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.axis.len() + j]
    }

    pub fn resolution(&self) -> usize {
        self.axis.len()
    }

    pub fn feasible_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Number of cells whose flag differs from `other`'s.
    pub fn mismatches(&self, other: &FeasibleRegionGrid) -> Option<usize> {
        if self.axis != other.axis {
            return None;
        }
        Some(
            self.mask
                .iter()
                .zip(&other.mask)
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    /// `(d_x, d_y, feasible)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        let n = self.axis.len();
        (0..n * n).map(move |k| (self.axis[k / n], self.axis[k % n], self.mask[k]))
    }
}

/// Cell-centred grid `(k + 1/2) / n`.
pub fn region_axis(resolution: usize) -> Vec<f64> {
    (0..resolution)
        .map(|k| (k as f64 + 0.5) / resolution as f64)
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |k| if k + 1 == n { hi } else { lo + step * k as f64 })
}

#[derive(Debug, Clone, Copy)]
struct Hull {
    lo: f64,
    hi: f64,
}

impl Hull {
    fn empty() -> Self {
        Hull {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lo - REGION_TOL && v <= self.hi + REGION_TOL
    }
}

pub fn feasible_region(
    model: &SourceModel,
    stage: RegionStage,
    resolution: usize,
) -> Result<FeasibleRegionGrid> {
    feasible_region_with(model, stage, resolution, DEFAULT_INNER_POINTS)
}

/// Maps the feasible region by sweeping the free distortions forward.
///
/// For stage 2 each column fixes `d_y = D_Y2` and sweeps `d_x1` over the
/// values allowed by `D_Y2 <= sigma_1^2`; the achieved `sigma_2^2` form an
/// interval because the image of an interval under a continuous map is one.
/// For stage 3 each row fixes `d_x = D_X3`; for every swept `d_x1` the
/// admissible `D_Y2` form an interval on which `sigma_3^2` is increasing, so
/// its end points bound the achieved `d_y`.
pub fn feasible_region_with(
    model: &SourceModel,
    stage: RegionStage,
    resolution: usize,
    inner_points: usize,
) -> Result<FeasibleRegionGrid> {
    if resolution < 2 {
        return Err(Error::domain("resolution", resolution as f64, ">= 2"));
    }
    if inner_points < 2 {
        return Err(Error::domain("inner_points", inner_points as f64, ">= 2"));
    }
    let axis = region_axis(resolution);
    let n = resolution;
    let mut mask = alloc::vec![false; n * n];
    let q = model.rho_sq();

    match stage {
        RegionStage::Second => {
            for (j, &d_y) in axis.iter().enumerate() {
                let d_x1_min = if q > 0.0 {
                    (1.0 - (1.0 - d_y) / q).max(0.0)
                } else {
                    0.0
                };
                let mut hull = Hull::empty();
                for d_x1 in linspace(d_x1_min, 1.0, inner_points) {
                    hull.add(model.sigma2_sq(d_x1, d_y));
                }
                for (i, &d_x) in axis.iter().enumerate() {
                    mask[i * n + j] = hull.contains(d_x);
                }
            }
        }
        RegionStage::Third => {
            for (i, &d_x) in axis.iter().enumerate() {
                let mut hull = Hull::empty();
                // sigma_2^2 <= d_x1, so D_X3 <= sigma_2^2 needs d_x1 >= D_X3.
                for d_x1 in linspace(d_x, 1.0, inner_points) {
                    let s1 = model.sigma1_sq(d_x1);
                    let d_y2_min = model
                        .min_d_y2_for_stage3(d_x1, d_x)
                        .unwrap_or(0.0)
                        .clamp(0.0, s1);
                    hull.add(model.sigma3_sq(d_x1, d_y2_min, d_x));
                    hull.add(model.sigma3_sq(d_x1, s1, d_x));
                }
                for (j, &d_y) in axis.iter().enumerate() {
                    mask[i * n + j] = hull.contains(d_y);
                }
            }
        }
    }

    Ok(FeasibleRegionGrid {
        stage,
        rho: model.rho(),
        axis,
        mask,
    })
}

fn check_target(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "0 < value <= 1"))
    }
}

/// Admissible `D_Y2` range for a given `d_x1` once `D_X3` is fixed, or
/// `None` when no `D_Y2 <= sigma_1^2` keeps `D_X3 <= sigma_2^2`. `slack` is
/// the relative tolerance on that constraint.
fn d_y2_range(model: &SourceModel, d_x1: f64, d_x3: f64, slack: f64) -> Option<(f64, f64)> {
    if d_x3 > d_x1 * (1.0 + slack) {
        return None;
    }
    let s1 = model.sigma1_sq(d_x1);
    let lo = model
        .min_d_y2_for_stage3(d_x1, d_x3)
        .unwrap_or(0.0)
        .clamp(0.0, s1);
    Some((lo, s1))
}

/// Exact reachability, with no boundary slack, so that interval ends found by
/// bisection are feasible as they stand.
fn target_reachable(model: &SourceModel, d_x1: f64, d_x3: f64, d_y: f64) -> bool {
    match d_y2_range(model, d_x1, d_x3, 0.0) {
        Some((lo, hi)) => {
            model.sigma3_sq(d_x1, lo, d_x3) <= d_y && d_y <= model.sigma3_sq(d_x1, hi, d_x3)
        }
        None => false,
    }
}

/// `D_Y2` that makes the third-stage `Y` distortion equal `d_y_target` when
/// the stage-1 and stage-3 `X` distortions are `d_x1` and `d_x3_target`.
pub fn solve_dy2_for_target(
    model: &SourceModel,
    d_x1: f64,
    d_x3_target: f64,
    d_y_target: f64,
) -> Result<f64> {
    check_target("d_x1", d_x1)?;
    check_target("d_x3_target", d_x3_target)?;
    check_target("d_y_target", d_y_target)?;
    let (lo, hi) = d_y2_range(model, d_x1, d_x3_target, crate::rd::BOUNDARY_SLACK).ok_or(
        Error::NoSolution("d_x3 target exceeds sigma2^2 for every d_y2"),
    )?;
    let f = |d_y2: f64| model.sigma3_sq(d_x1, d_y2, d_x3_target) - d_y_target;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::NoSolution(
            "d_y target outside the reachable sigma3^2 range",
        ));
    }
    let d_y2 = bisect(f, lo, hi, 1e-15, DEFAULT_MAX_ITER)?;
    let residual = f(d_y2);
    if residual.abs() > SOLVE_TOL {
        return Err(Error::NonConvergence {
            iterations: DEFAULT_MAX_ITER,
            residual,
        });
    }
    Ok(d_y2)
}

/// Closed interval of `d_x1` for which `(d_x, d_y)` is reachable after the
/// third stage with `D_X3 = d_x`.
///
/// A coarse scan locates reachable values, then each end is refined by
/// bisection on reachability.
pub fn d_x1_interval(model: &SourceModel, d_x: f64, d_y: f64) -> Result<(f64, f64)> {
    check_target("d_x", d_x)?;
    check_target("d_y", d_y)?;
    let reachable = |d_x1: f64| target_reachable(model, d_x1, d_x, d_y);
    let grid: Vec<f64> = linspace(1.0 / INTERVAL_SCAN as f64, 1.0, INTERVAL_SCAN).collect();
    let first = grid
        .iter()
        .position(|&v| reachable(v))
        .ok_or(Error::NoSolution(
            "target distortion pair is not reachable for this rho",
        ))?;
    let last = grid.iter().rposition(|&v| reachable(v)).unwrap_or(first);

    let refine = |mut inside: f64, mut outside: f64| {
        for _ in 0..DEFAULT_MAX_ITER {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if reachable(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lower = if first == 0 {
        refine(grid[0], 0.0)
    } else {
        refine(grid[first], grid[first - 1])
    };
    let upper = if last + 1 == grid.len() {
        1.0
    } else {
        refine(grid[last], grid[last + 1])
    };
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationPoint {
    pub d_x1: f64,
    pub d_y2: f64,
    /// `R_1 + R_3`, spent by the `X` encoder.
    pub r_x: f64,
    /// `R_2`, spent by the `Y` encoder.
    pub r_y: f64,
}

impl AllocationPoint {
    pub fn sum_rate(&self) -> f64 {
        self.r_x + self.r_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationCurve {
    pub rho: f64,
    pub target: (f64, f64),
    /// Minimum sum-rate at the target pair.
    pub sum_rate: f64,
    pub points: Vec<AllocationPoint>,
    pub balanced_point: Option<AllocationPoint>,
}

fn allocation_point(model: &SourceModel, d_x1: f64, target: (f64, f64)) -> Result<AllocationPoint> {
    let d_y2 = solve_dy2_for_target(model, d_x1, target.0, target.1)?;
    let plan = plan_schedule(model, &DistortionSchedule::new(d_x1, d_y2, target.0)?)?;
    let [r1, r2, r3] = plan.rates();
    Ok(AllocationPoint {
        d_x1,
        d_y2,
        r_x: r1 + r3,
        r_y: r2,
    })
}

/// Sweeps the split of rate between the two encoders that reaches
/// `target = (d_x, d_y)` after three stages.
///
/// Returns an empty curve when the target is out of reach for this `rho`.
pub fn allocate_rates(
    model: &SourceModel,
    target: (f64, f64),
    n_points: usize,
) -> Result<AllocationCurve> {
    let sum_rate = wagner_sum_rate(model, target.0, target.1)?;
    if n_points < 2 {
        return Err(Error::domain("n_points", n_points as f64, ">= 2"));
    }
    let mut curve = AllocationCurve {
        rho: model.rho(),
        target,
        sum_rate,
        points: Vec::new(),
        balanced_point: None,
    };
    let (lo, hi) = match d_x1_interval(model, target.0, target.1) {
        Ok(iv) => iv,
        Err(Error::NoSolution(_)) => return Ok(curve),
        Err(e) => return Err(e),
    };
    curve.points = linspace(lo, hi, n_points)
        .map(|d_x1| allocation_point(model, d_x1, target))
        .collect::<Result<_>>()?;

    let gap = |d_x1: f64| {
        allocation_point(model, d_x1, target)
            .map(|p| p.r_x - p.r_y)
            .unwrap_or(f64::NAN)
    };
    if let Ok(d_x1) = bisect(gap, lo, hi, 1e-15, DEFAULT_MAX_ITER) {
        curve.balanced_point = Some(allocation_point(model, d_x1, target)?);
    }
    Ok(curve)
}

/// Energy per sample needed to carry `rate` nats over a Gaussian channel
/// with noise variance `n0 / 2`: `(e^{2 rate} - 1) n0 / 2`.
pub fn energy_per_rate(rate: f64, n0: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::domain("rate", rate, "finite and >= 0"));
    }
    check_n0(n0)?;
    Ok(expm1(2.0 * rate) * n0 / 2.0)
}

fn check_n0(n0: f64) -> Result<()> {
    if n0.is_finite() && n0 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("n0", n0, "finite and > 0"))
    }
}

/// Sum energy of the three transmissions from the distortion closed form
/// `(1/D_X1 + sigma_1^2/D_Y2 + sigma_2^2/D_X3 - 3) n0 / 2`.
pub fn energy_disac2(plan: &SchedulePlan, n0: f64) -> Result<f64> {
    check_n0(n0)?;
    let s = &plan.schedule;
    let ratio_sum = 1.0 / s.d_x1 + plan.sigma1_sq() / s.d_y2 + plan.sigma2_sq() / s.d_x3;
    Ok((ratio_sum - 3.0) * n0 / 2.0)
}

/// Same quantity as [`energy_disac2`], summed stage by stage from the rates.
pub fn energy_disac2_from_rates(plan: &SchedulePlan, n0: f64) -> Result<f64> {
    plan.rates()
        .into_iter()
        .try_fold(0.0, |acc, r| Ok(acc + energy_per_rate(r, n0)?))
}

/// Lower bound on the energy of separate distributed coding at
/// `(d_x, d_y)`: `min e^{2R_X} + e^{2R_Y} - 2` over `R_X + R_Y = R_sum`,
/// attained at `R_X = R_Y`, times `n0 / 2`.
pub fn energy_dsc2_min(model: &SourceModel, d_x: f64, d_y: f64, n0: f64) -> Result<f64> {
    check_n0(n0)?;
    let r_sum = wagner_sum_rate(model, d_x, d_y)?;
    Ok(expm1(r_sum) * n0)
}

/// [`energy_dsc2_min`] through the explicit square root of the sum-rate's
/// log argument.
pub fn energy_dsc2_min_closed_form(
    model: &SourceModel,
    d_x: f64,
    d_y: f64,
    n0: f64,
) -> Result<f64> {
    check_n0(n0)?;
    check_target("d_x", d_x)?;
    check_target("d_y", d_y)?;
    let q = model.rho_sq();
    let a = 1.0 - q;
    let dd = d_x * d_y;
    let arg = a * (sqrt(4.0 * dd * q / (a * a) + 1.0) + 1.0) / (2.0 * dd);
    Ok((sqrt(arg) - 1.0) * n0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Disac2,
    Dsc2,
    Tie,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Disac2 => "disac2",
            Scheme::Dsc2 => "dsc2",
            Scheme::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub d_x1: f64,
    pub d_y2: f64,
    pub e_disac2: f64,
    /// `(min E_DSC2 - E_DiSAC2) / min E_DSC2`; positive when the
    /// three-stage scheme is cheaper.
    pub saving: f64,
    pub cheaper: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub rho: f64,
    pub target: (f64, f64),
    pub n0: f64,
    pub sweep: Vec<EnergyPoint>,
    pub e_dsc2_min: f64,
    pub d_x1_lower_bound: f64,
    pub d_x1_upper_bound: f64,
}

impl EnergyReport {
    pub fn min_disac2(&self) -> Option<&EnergyPoint> {
        self.sweep
            .iter()
            .min_by(|a, b| a.e_disac2.total_cmp(&b.e_disac2))
    }
}

/// Sweeps `d_x1` log-uniformly over its admissible interval for the target
/// pair and compares the three-stage energy with the separate-coding bound.
pub fn energy_analysis(
    model: &SourceModel,
    target: (f64, f64),
    n0: f64,
    n_points: usize,
) -> Result<EnergyReport> {
    check_n0(n0)?;
    if n_points < 2 {
        return Err(Error::domain("n_points", n_points as f64, ">= 2"));
    }
    let e_dsc2_min = energy_dsc2_min(model, target.0, target.1, n0)?;
    let (lo, hi) = d_x1_interval(model, target.0, target.1)
        .map_err(|_| Error::NoSolution("no feasible d_x1 for the target pair"))?;

    let ratio = hi / lo;
    let sweep = (0..n_points)
        .map(|k| {
            let d_x1 = if k + 1 == n_points {
                hi
            } else {
                lo * pow(ratio, k as f64 / (n_points - 1) as f64)
            };
            let d_y2 = solve_dy2_for_target(model, d_x1, target.0, target.1)?;
            let plan = plan_schedule(model, &DistortionSchedule::new(d_x1, d_y2, target.0)?)?;
            let e_disac2 = energy_disac2(&plan, n0)?;
            let diff = e_dsc2_min - e_disac2;
            let cheaper = if diff.abs() <= 1e-12 * e_dsc2_min.max(e_disac2) {
                Scheme::Tie
            } else if diff > 0.0 {
                Scheme::Disac2
            } else {
                Scheme::Dsc2
            };
            let saving = if e_dsc2_min > 0.0 {
                diff / e_dsc2_min
            } else {
                0.0
            };
            Ok(EnergyPoint {
                d_x1,
                d_y2,
                e_disac2,
                saving,
                cheaper,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EnergyReport {
        rho: model.rho(),
        target,
        n0,
        sweep,
        e_dsc2_min,
        d_x1_lower_bound: lo,
        d_x1_upper_bound: hi,
    })
}

/// Converts nats to bits.
#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / core::f64::consts::LN_2
}
