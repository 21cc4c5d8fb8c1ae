use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gwb_core::gaussian_solver::{solve_gaussian_gwb, uniqueness_check, FixedPointOptions, GaussianOptions};
use gwb_core::gmm::{gmm_gwb, GmmOptions};
use gwb_core::measures::{objective_f, Measure, MeasureKind, ProblemSpec};
use gwb_core::multimarginal::{
    free_support_barycenter, solve_entropic_route, solve_exact_route, solve_via_classical_mm, BarycenterResult,
    FreeSupportOptions, DEFAULT_TENSOR_CAP,
};
use gwb_core::sinkhorn::SinkhornOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, EXIT_NOT_CONVERGED};
use crate::problem::{load_measure, GaussianSpec, MeasureSpec, ProblemFile};
use crate::{DistanceArgs, ProjectArgs, Route, SolveArgs, UniquenessArgs};

pub const TENSOR_CAP_ENV: &str = "GWB_TENSOR_CAP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub route: String,
    pub objective: f64,
    /// `W₂²(νᵢ, Pᵢ#γ)` per marginal (`MW₂²` for mixtures).
    pub terms: Vec<f64>,
    pub converged: bool,
    pub diagnostics: ReportDiagnostics,
    pub measure: MeasureSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularized: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unconverged_tuples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn load_problem(path: &Path) -> Result<(ProblemFile, ProblemSpec), CliError> {
    let file = ProblemFile::load(path)?;
    let spec = file.to_spec(path.parent().unwrap_or(Path::new(".")))?;
    Ok((file, spec))
}

/// 12 significant digits.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

fn tensor_cap() -> Result<usize, CliError> {
    match std::env::var(TENSOR_CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Invalid {
            field: TENSOR_CAP_ENV.into(),
            message: format!("`{v}` is not a tuple count"),
        }),
        Err(_) => Ok(DEFAULT_TENSOR_CAP),
    }
}

fn discrete_report(res: BarycenterResult, seed: Option<u64>) -> SolveReport {
    let d = res.diagnostics;
    SolveReport {
        route: res.route.to_string(),
        objective: res.objective,
        terms: res.terms,
        converged: d.converged,
        diagnostics: ReportDiagnostics {
            iterations: (d.iterations > 0).then_some(d.iterations),
            plan_cost: d.plan_cost,
            marginal_error: d.marginal_error,
            objective_history: d.objective_history,
            seed,
            ..Default::default()
        },
        measure: MeasureSpec::from_measure(&Measure::Discrete(res.measure)),
    }
}

fn fixed_point_options(args: &SolveArgs, keep_every: usize) -> FixedPointOptions {
    let base = FixedPointOptions::default();
    FixedPointOptions {
        tol: args.tol.unwrap_or(base.tol),
        max_iter: args.max_iter.unwrap_or(base.max_iter),
        keep_every,
    }
}

fn expect_kind(spec: &ProblemSpec, kind: MeasureKind, route: Route) -> Result<(), CliError> {
    if spec.kind() != kind {
        return Err(CliError::Invalid {
            field: "marginals".into(),
            message: format!("route {route} needs {kind} marginals, found {}", spec.kind()),
        });
    }
    Ok(())
}

pub fn solve_report(args: &SolveArgs, spec: &ProblemSpec) -> Result<SolveReport, CliError> {
    let cap = tensor_cap()?;
    let route = args.route;
    match route {
        Route::MmExact | Route::MmSinkhorn | Route::ClassicalMm | Route::FreeSupport => {
            expect_kind(spec, MeasureKind::Discrete, route)?
        }
        Route::Gaussian => expect_kind(spec, MeasureKind::Gaussian, route)?,
        Route::Gmm => expect_kind(spec, MeasureKind::Mixture, route)?,
    }
    Ok(match route {
        Route::MmExact => discrete_report(solve_exact_route(spec, cap)?, None),
        Route::ClassicalMm => discrete_report(solve_via_classical_mm(spec, cap)?, None),
        Route::MmSinkhorn => {
            let base = SinkhornOptions::default();
            let opts = SinkhornOptions {
                epsilon: args.epsilon.unwrap_or(base.epsilon),
                max_iter: args.max_iter.unwrap_or(base.max_iter),
                tol: args.tol.unwrap_or(base.tol),
            };
            discrete_report(solve_entropic_route(spec, &opts, cap)?, None)
        }
        Route::FreeSupport => {
            let base = FreeSupportOptions::default();
            let largest = spec.discrete_marginals()?.iter().map(|m| m.len()).max().unwrap_or(1);
            let opts = FreeSupportOptions {
                n_atoms: args.atoms.unwrap_or(largest),
                init: None,
                max_iter: args.max_iter.unwrap_or(base.max_iter),
                tol: args.tol.unwrap_or(base.tol),
                random_starts: base.random_starts,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            discrete_report(free_support_barycenter(spec, &opts, &mut rng)?, Some(args.seed))
        }
        Route::Gaussian => {
            let opts = GaussianOptions {
                fixed_point: fixed_point_options(args, 0),
                regularization: args.regularization,
                k0: None,
            };
            let sol = solve_gaussian_gwb(spec, &opts)?;
            SolveReport {
                route: route.to_string(),
                objective: sol.objective.total,
                terms: sol.objective.terms,
                converged: sol.trace.converged(),
                diagnostics: ReportDiagnostics {
                    iterations: Some(sol.trace.iterations),
                    residual: Some(sol.trace.residual),
                    objective_history: sol.trace.objectives.clone(),
                    monotone: Some(sol.trace.is_monotone(gwb_core::gaussian_solver::MONOTONE_SLACK)),
                    certified: Some(sol.certified),
                    uniqueness: Some(sol.uniqueness.to_string()),
                    regularized: Some(sol.regularized),
                    ..Default::default()
                },
                measure: MeasureSpec::Gaussian(GaussianSpec::from_measure(&sol.measure)),
            }
        }
        Route::Gmm => {
            let opts = GmmOptions {
                fixed_point: fixed_point_options(args, 0),
                regularization: args.regularization,
                tensor_cap: cap,
            };
            let sol = gmm_gwb(spec, &opts)?;
            SolveReport {
                route: route.to_string(),
                objective: sol.objective.total,
                terms: sol.objective.terms,
                converged: sol.unconverged_tuples == 0,
                diagnostics: ReportDiagnostics {
                    plan_cost: Some(sol.tuple_cost),
                    regularized: Some(sol.regularized_components > 0),
                    unconverged_tuples: Some(sol.unconverged_tuples),
                    ..Default::default()
                },
                measure: MeasureSpec::from_measure(&Measure::Mixture(sol.mixture)),
            }
        }
    })
}

fn points_csv(measure: &Measure) -> Option<String> {
    let Measure::Discrete(m) = measure else { return None };
    let mut out = String::new();
    let header: Vec<String> = (1..=m.dim()).map(|k| format!("x{k}")).chain(["weight".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (k, w) in m.weights().iter().enumerate() {
        let row: Vec<String> = m.points().row(k).iter().chain([w]).map(|v| fmt12(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Some(out)
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (_, spec) = load_problem(&args.problem)?;
    let report = solve_report(args, &spec)?;
    create_out_dir(&args.out)?;
    let measure = report.measure.to_measure("measure", &args.out)?;
    write_file(
        &args.out.join("result.json"),
        &serde_json::to_string_pretty(&report).expect("reports serialize"),
    )?;
    let secondary: PathBuf = match &measure {
        Measure::Discrete(_) => {
            let path = args.out.join("barycenter.csv");
            write_file(&path, &points_csv(&measure).unwrap_or_default())?;
            path
        }
        Measure::Gaussian(_) | Measure::Mixture(_) => {
            let name = if matches!(measure, Measure::Gaussian(_)) { "gaussian.json" } else { "gmm.json" };
            let path = args.out.join(name);
            write_file(&path, &serde_json::to_string_pretty(&report.measure).expect("measures serialize"))?;
            path
        }
    };
    let _ = writeln!(
        out,
        "route {}: objective {:.12e}, {}; wrote {} and {}",
        report.route,
        report.objective,
        if report.converged { "converged" } else { "NOT converged" },
        args.out.join("result.json").display(),
        secondary.display()
    );
    Ok(if report.converged { 0 } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_check_uniqueness(args: &UniquenessArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = ProblemFile::load(&args.problem)?;
    let report = uniqueness_check(&file.family()?);
    let _ = writeln!(out, "{report}");
    Ok(0)
}

fn projection_csv(measure: &Measure) -> String {
    match measure {
        Measure::Discrete(_) => points_csv(measure).unwrap_or_default(),
        Measure::Gaussian(g) => {
            let mut s = String::from("axis,mean,variance\n");
            for k in 0..g.dim() {
                s.push_str(&format!("{},{},{}\n", k + 1, fmt12(g.mean()[k]), fmt12(g.cov()[(k, k)])));
            }
            s
        }
        Measure::Mixture(g) => {
            let mut s = String::from("component,weight,axis,mean,variance\n");
            for (c, (comp, w)) in g.components().iter().zip(g.weights()).enumerate() {
                for k in 0..comp.dim() {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        c + 1,
                        fmt12(*w),
                        k + 1,
                        fmt12(comp.mean()[k]),
                        fmt12(comp.cov()[(k, k)])
                    ));
                }
            }
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub files: Vec<String>,
    /// Present when the problem file has marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

pub fn cmd_project(args: &ProjectArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = ProblemFile::load(&args.problem)?;
    let family = file.family()?;
    let measure = load_measure(&args.result)?;
    if measure.dim() != family.dim() {
        return Err(CliError::Invalid {
            field: "measure".into(),
            message: format!("dimension {} does not match d = {}", measure.dim(), family.dim()),
        });
    }
    create_out_dir(&args.out)?;
    let mut files = Vec::new();
    for (i, p) in family.maps().iter().enumerate() {
        let projected = measure.pushforward(p)?;
        let name = format!("projection_{}.csv", i + 1);
        write_file(&args.out.join(&name), &projection_csv(&projected))?;
        files.push(name);
    }
    let mut report = ProjectionReport {
        files,
        terms: None,
        objective: None,
    };
    if !file.marginals.is_empty() {
        let spec = file.to_spec(args.problem.parent().unwrap_or(Path::new(".")))?;
        let obj = objective_f(&measure, &spec)?;
        for (i, t) in obj.terms.iter().enumerate() {
            let _ = writeln!(out, "marginal {}: W2^2 = {:.12e}", i + 1, t);
        }
        report.terms = Some(obj.terms);
        report.objective = Some(obj.total);
    }
    write_file(
        &args.out.join("projections.json"),
        &serde_json::to_string_pretty(&report).expect("reports serialize"),
    )?;
    let _ = writeln!(out, "wrote {} projection files to {}", report.files.len(), args.out.display());
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub kind: String,
    pub w2_squared: f64,
}

pub fn cmd_distance(args: &DistanceArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let a = load_measure(&args.first)?;
    let b = load_measure(&args.second)?;
    let value = a.w2_squared(&b)?;
    let report = DistanceReport {
        kind: a.kind().to_string(),
        w2_squared: value,
    };
    if let Some(dir) = &args.out {
        create_out_dir(dir)?;
        write_file(
            &dir.join("distance.json"),
            &serde_json::to_string_pretty(&report).expect("reports serialize"),
        )?;
    }
    let _ = writeln!(out, "{} W2^2 = {:.12e}", report.kind, value);
    Ok(0)
}
