//! Subcommand bodies. Each turns a resolved manifest into the bytes of its
//! output document.

use disac::montecarlo::{SimConfig, DISTORTION_LABELS};
use disac::refinement::{
    allocate_rates, energy_analysis, feasible_region_with, nats_to_bits, surface_point,
    verify_refinement, RegionStage, Scheme,
};
use disac::{plan_schedule, DistortionSchedule, GaussianPosterior, SourceModel};
use serde::Serialize;

use crate::error::{exit, CliError, Result};
use crate::format::{json_document, CsvWriter, Field};
use crate::manifest::{
    AllocateParams, EnergyParams, FeasibleParams, Params, PlanParams, RunManifest, SimulateParams,
    SurfaceParams,
};
use crate::sim::{simulate_parallel, with_threads};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            exit_code: exit::OK,
        }
    }
}

pub fn execute(manifest: &RunManifest, threads: Option<usize>) -> Result<Outcome> {
    match &manifest.params {
        Params::Plan(p) => plan(manifest, p),
        Params::Surface(p) => surface(manifest, p),
        Params::Feasible(p) => feasible(manifest, p),
        Params::Allocate(p) => allocate(manifest, p),
        Params::Energy(p) => energy(manifest, p),
        Params::Simulate(p) => simulate(manifest, p, threads),
    }
}

fn at_least(name: &str, value: u32, min: u32) -> Result<()> {
    if value < min {
        return Err(CliError::Invalid(format!(
            "--{name} must be >= {min}, got {value}"
        )));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: u32) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n.max(2) - 1) as f64;
    (0..n).map(move |k| if k + 1 == n { hi } else { lo + step * k as f64 })
}

#[derive(Serialize)]
struct PosteriorOut {
    source: &'static str,
    const_coeff: f64,
    coeff_x1: f64,
    coeff_y2: f64,
    coeff_x3: f64,
    variance: f64,
}

impl PosteriorOut {
    fn new(source: &'static str, p: &GaussianPosterior) -> Self {
        PosteriorOut {
            source,
            const_coeff: p.const_coeff,
            coeff_x1: p.coeff_x1,
            coeff_y2: p.coeff_y2,
            coeff_x3: p.coeff_x3,
            variance: p.variance,
        }
    }
}

#[derive(Serialize)]
struct StageOut {
    stage: u8,
    rate_nats: f64,
    rate_bits: f64,
    d_x: f64,
    d_y: f64,
    posterior: PosteriorOut,
}

#[derive(Serialize)]
struct PlanOut {
    stages: Vec<StageOut>,
    cumulative_rates_nats: [f64; 3],
    cumulative_rates_bits: [f64; 3],
    wagner_sum_rates_nats: [f64; 3],
    residuals: [f64; 3],
    tol: f64,
    on_surface: bool,
}

fn plan(manifest: &RunManifest, p: &PlanParams) -> Result<Outcome> {
    let model = SourceModel::new(p.rho)?;
    let schedule = DistortionSchedule::new(p.dx1, p.dy2, p.dx3)?;
    let plan = plan_schedule(&model, &schedule)?;
    let check = verify_refinement(&model, &schedule, p.tol)?;
    let wagner = plan
        .distortion_pairs()
        .map(|(dx, dy)| disac::wagner_sum_rate(&model, dx, dy));
    let wagner = [wagner[0].clone()?, wagner[1].clone()?, wagner[2].clone()?];

    let stages = plan
        .stages
        .iter()
        .map(|s| StageOut {
            stage: s.stage,
            rate_nats: s.rate,
            rate_bits: nats_to_bits(s.rate),
            d_x: s.d_x,
            d_y: s.d_y,
            posterior: PosteriorOut::new(if s.stage == 2 { "x" } else { "y" }, &s.posterior),
        })
        .collect();
    let out = PlanOut {
        stages,
        cumulative_rates_nats: plan.cumulative_rates,
        cumulative_rates_bits: plan.cumulative_rates.map(nats_to_bits),
        wagner_sum_rates_nats: wagner,
        residuals: check.residuals,
        tol: check.tol,
        on_surface: check.passed(),
    };
    Ok(Outcome::ok(json_document(manifest, &out)))
}

fn surface(manifest: &RunManifest, p: &SurfaceParams) -> Result<Outcome> {
    let model = SourceModel::new(p.rho)?;
    at_least("n-points", p.n_points, 2)?;
    if !(p.rate_max.is_finite() && p.rate_max >= 0.0) {
        return Err(CliError::Invalid(format!(
            "--rate-max must be >= 0, got {}",
            p.rate_max
        )));
    }
    // (fixed rates of each curve, index of the swept stage)
    let curves: Vec<[f64; 3]> = match p.stage {
        2 => {
            at_least("r1-count", p.r1_count, 1)?;
            (1..=p.r1_count)
                .map(|k| [p.r1_max * k as f64 / p.r1_count as f64, 0.0, 0.0])
                .collect()
        }
        3 => {
            at_least("r2-count", p.r2_count, 1)?;
            (1..=p.r2_count)
                .map(|k| [p.r1, p.r2_max * k as f64 / p.r2_count as f64, 0.0])
                .collect()
        }
        other => {
            return Err(CliError::Invalid(format!(
                "--stage must be 2 or 3, got {other}"
            )))
        }
    };
    let swept = p.stage as usize - 1;

    let mut csv = CsvWriter::new(
        manifest,
        &[
            "curve",
            "r1",
            "r2",
            "r3",
            "sum_rate",
            "d_x",
            "d_y",
            "wagner",
            "wagner_check_residual",
        ],
    );
    let mut max_residual = 0.0f64;
    let mut rows = 0u64;
    for (c, fixed) in curves.iter().enumerate() {
        for r in linspace(0.0, p.rate_max, p.n_points) {
            let mut rates = *fixed;
            rates[swept] = r;
            let pt = surface_point(&model, rates, p.stage as usize)?;
            max_residual = max_residual.max(pt.residual);
            rows += 1;
            csv.row(&[
                Field::U(c as u64),
                Field::F(pt.rates[0]),
                Field::F(pt.rates[1]),
                Field::F(pt.rates[2]),
                Field::F(pt.sum_rate),
                Field::F(pt.d_x),
                Field::F(pt.d_y),
                Field::F(pt.wagner),
                Field::F(pt.residual),
            ]);
        }
    }
    #[derive(Serialize)]
    struct Summary {
        curves: usize,
        rows: u64,
        max_residual: f64,
    }
    csv.footer(
        "summary",
        &Summary {
            curves: curves.len(),
            rows,
            max_residual,
        },
    );
    Ok(Outcome::ok(csv.finish()))
}

fn feasible(manifest: &RunManifest, p: &FeasibleParams) -> Result<Outcome> {
    let model = SourceModel::new(p.rho)?;
    let stage = RegionStage::from_index(p.stage)?;
    let grid = feasible_region_with(
        &model,
        stage,
        p.resolution as usize,
        p.inner_points as usize,
    )?;
    let stage2_mismatches = match stage {
        RegionStage::Third => {
            let second = feasible_region_with(
                &model,
                RegionStage::Second,
                p.resolution as usize,
                p.inner_points as usize,
            )?;
            grid.mismatches(&second)
        }
        RegionStage::Second => None,
    };

    let mut csv = CsvWriter::new(manifest, &["d_x", "d_y", "feasible"]);
    for (dx, dy, f) in grid.cells() {
        csv.row(&[Field::F(dx), Field::F(dy), Field::B(f)]);
    }
    #[derive(Serialize)]
    struct Summary {
        feasible_cells: usize,
        total_cells: usize,
        diagonal_feasible: bool,
        stage2_mismatches: Option<usize>,
    }
    let n = grid.resolution();
    csv.footer(
        "summary",
        &Summary {
            feasible_cells: grid.feasible_count(),
            total_cells: n * n,
            diagonal_feasible: (0..n).all(|i| grid.is_feasible(i, i)),
            stage2_mismatches,
        },
    );
    Ok(Outcome::ok(csv.finish()))
}

fn allocate(manifest: &RunManifest, p: &AllocateParams) -> Result<Outcome> {
    let model = SourceModel::new(p.rho)?;
    at_least("n-points", p.n_points, 2)?;
    let curve = allocate_rates(&model, (p.dx_target, p.dy_target), p.n_points as usize)?;

    let mut csv = CsvWriter::new(manifest, &["d_x1", "d_y2", "r_x", "r_y", "sum_rate"]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for pt in &curve.points {
        let s = pt.sum_rate();
        lo = lo.min(s);
        hi = hi.max(s);
        csv.row(&[
            Field::F(pt.d_x1),
            Field::F(pt.d_y2),
            Field::F(pt.r_x),
            Field::F(pt.r_y),
            Field::F(s),
        ]);
    }
    #[derive(Serialize)]
    struct Balanced {
        d_x1: f64,
        d_y2: f64,
        r_x: f64,
        r_y: f64,
    }
    #[derive(Serialize)]
    struct Summary {
        points: usize,
        wagner_sum_rate: f64,
        sum_rate_spread_rel: Option<f64>,
    }
    csv.footer(
        "balanced",
        &curve.balanced_point.map(|b| Balanced {
            d_x1: b.d_x1,
            d_y2: b.d_y2,
            r_x: b.r_x,
            r_y: b.r_y,
        }),
    );
    csv.footer(
        "summary",
        &Summary {
            points: curve.points.len(),
            wagner_sum_rate: curve.sum_rate,
            sum_rate_spread_rel: (!curve.points.is_empty()).then(|| (hi - lo) / curve.sum_rate),
        },
    );
    Ok(Outcome::ok(csv.finish()))
}

fn energy(manifest: &RunManifest, p: &EnergyParams) -> Result<Outcome> {
    at_least("n-points", p.n_points, 2)?;
    let mut csv = CsvWriter::new(
        manifest,
        &[
            "rho",
            "d_x1",
            "d_y2",
            "e_disac2",
            "e_dsc2_min",
            "saving",
            "cheaper_scheme",
        ],
    );

    #[derive(Serialize)]
    struct Bound {
        rho: f64,
        d_x1_lower_bound: f64,
        d_x1_upper_bound: f64,
        e_dsc2_min: f64,
        min_e_disac2: f64,
        argmin_d_x1: f64,
        disac2_cheaper_points: usize,
    }
    let mut bounds = Vec::with_capacity(p.rho.len());
    for &rho in &p.rho {
        let model = SourceModel::new(rho)?;
        let report = energy_analysis(
            &model,
            (p.dx_target, p.dy_target),
            p.n0,
            p.n_points as usize,
        )?;
        for pt in &report.sweep {
            csv.row(&[
                Field::F(rho),
                Field::F(pt.d_x1),
                Field::F(pt.d_y2),
                Field::F(pt.e_disac2),
                Field::F(report.e_dsc2_min),
                Field::F(pt.saving),
                Field::S(pt.cheaper.label()),
            ]);
        }
        let best = report.min_disac2().expect("non-empty sweep");
        bounds.push(Bound {
            rho,
            d_x1_lower_bound: report.d_x1_lower_bound,
            d_x1_upper_bound: report.d_x1_upper_bound,
            e_dsc2_min: report.e_dsc2_min,
            min_e_disac2: best.e_disac2,
            argmin_d_x1: best.d_x1,
            disac2_cheaper_points: report
                .sweep
                .iter()
                .filter(|s| s.cheaper == Scheme::Disac2)
                .count(),
        });
    }

    let mut by_rho: Vec<(f64, f64)> = bounds.iter().map(|b| (b.rho, b.d_x1_lower_bound)).collect();
    by_rho.sort_by(|a, b| a.0.total_cmp(&b.0));
    let trend = if by_rho.len() < 2 {
        "single"
    } else if by_rho.windows(2).all(|w| w[1].1 > w[0].1) {
        "increasing"
    } else if by_rho.windows(2).all(|w| w[1].1 < w[0].1) {
        "decreasing"
    } else {
        "non-monotone"
    };
    csv.footer("lower_bounds", &bounds);
    csv.footer("lower_bound_trend_in_rho", &trend);
    Ok(Outcome::ok(csv.finish()))
}

fn simulate(manifest: &RunManifest, p: &SimulateParams, threads: Option<usize>) -> Result<Outcome> {
    let model = SourceModel::new(p.rho)?;
    let schedule = DistortionSchedule::new(p.dx1, p.dy2, p.dx3)?;
    let config = SimConfig::new(model, schedule, p.n_samples, p.seed)?;
    if !(p.k_sigma.is_finite() && p.k_sigma > 0.0) {
        return Err(CliError::Invalid(format!(
            "--k-sigma must be > 0, got {}",
            p.k_sigma
        )));
    }
    let result = with_threads(threads, || simulate_parallel(&config))?;

    #[derive(Serialize)]
    struct DistortionOut {
        name: &'static str,
        analytic: f64,
        empirical: f64,
        std_err: f64,
        z_score: f64,
        pass: bool,
    }
    #[derive(Serialize)]
    struct OrthogonalityOut {
        name: &'static str,
        mean_error_times_reconstruction: f64,
        std_err: f64,
    }
    #[derive(Serialize)]
    struct SimOut {
        n_samples: u64,
        seed: u64,
        k_sigma: f64,
        distortions: Vec<DistortionOut>,
        orthogonality: Vec<OrthogonalityOut>,
        all_pass: bool,
    }
    let pass = result.within(p.k_sigma);
    let z = result.z_scores();
    let out = SimOut {
        n_samples: result.n_samples,
        seed: result.seed,
        k_sigma: p.k_sigma,
        distortions: (0..6)
            .map(|k| DistortionOut {
                name: DISTORTION_LABELS[k],
                analytic: result.analytic[k],
                empirical: result.empirical[k],
                std_err: result.std_err[k],
                z_score: if z[k].is_finite() { z[k] } else { 0.0 },
                pass: pass[k],
            })
            .collect(),
        orthogonality: (0..6)
            .map(|k| OrthogonalityOut {
                name: DISTORTION_LABELS[k],
                mean_error_times_reconstruction: result.orthogonality[k],
                std_err: result.orthogonality_std_err[k],
            })
            .collect(),
        all_pass: pass.iter().all(|b| *b),
    };
    Ok(Outcome {
        exit_code: if out.all_pass {
            exit::OK
        } else {
            exit::CHECK_FAILED
        },
        text: json_document(manifest, &out),
    })
}
