use std::fmt::Write as _;

use homog_core::analysis::{
    approximation_study, contrast_study, convergence_study, write_studies_csv, StudyResult,
};
use homog_core::homogenize::{effective_tensor, flux_field};
use homog_core::io::{fmt_f64, write_atomic};
use homog_core::solver::{solve, LoadCase, Method, SolveReport, SolverConfig};
use homog_core::voxel::{load_voxel, save_field};
use homog_core::{CoefficientField, Error, Family, GridSpec, Result};

use crate::config::{MaterialSource, RunConfig, StudyKind};

/// Text for stdout plus whether every solve converged.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub converged: bool,
}

impl CommandOutput {
    fn ok(text: String) -> Self {
        CommandOutput { text, converged: true }
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged(_) | Error::PartialSolve { .. } => 1,
        e if e.is_data_error() => 3,
        _ => 2,
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", cells.join(", "))
}

fn material_label(cfg: &RunConfig) -> String {
    match &cfg.material {
        Some(MaterialSource::Voxel(p)) => p.display().to_string(),
        Some(MaterialSource::Family(f)) => f.to_string(),
        None => "none".into(),
    }
}

/// Loads or samples the coefficient field named by the configuration.
pub fn load_material(cfg: &RunConfig) -> Result<CoefficientField> {
    match &cfg.material {
        None => Err(Error::Format("no material given, use --material or --family".into())),
        Some(MaterialSource::Voxel(path)) => {
            let a = load_voxel(path, cfg.half_periods.as_deref())?;
            if let Some(shape) = &cfg.shape {
                if shape.as_slice() != a.spec().shape() {
                    return Err(Error::Format(format!(
                        "--grid {:?} disagrees with the shape {:?} of {}",
                        shape,
                        a.spec().shape(),
                        path.display()
                    )));
                }
            }
            Ok(a)
        }
        Some(MaterialSource::Family(f)) => {
            let shape = cfg
                .shape
                .as_ref()
                .ok_or_else(|| Error::Format(format!("family {f} needs a grid shape (--grid)")))?;
            f.sample(&grid_spec(cfg, shape)?)
        }
    }
}

fn grid_spec(cfg: &RunConfig, shape: &[usize]) -> Result<GridSpec> {
    let y = cfg.half_periods.clone().unwrap_or_else(|| vec![1.0; shape.len()]);
    GridSpec::new(&y, shape)
}

fn load_case(cfg: &RunConfig, d: usize) -> Result<LoadCase> {
    match &cfg.load {
        Some(e) if e.len() != d => Err(Error::Format(format!("{}-component load on a {d}-dimensional cell", e.len()))),
        Some(e) => LoadCase::new(e.clone()),
        None => Ok(LoadCase::unit(d, 0)),
    }
}

fn grid_lines(spec: &GridSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "shape = {:?}", spec.shape());
    let _ = writeln!(s, "half_periods = {}", fmt_vec(spec.half_periods()));
    let _ = writeln!(s, "spacings = {}", fmt_vec(spec.spacings()));
    let _ = writeln!(s, "points = {}", spec.total());
    let _ = writeln!(s, "max_spacing = {}", fmt_f64(spec.max_spacing()));
    let _ = writeln!(s, "spacing_ratio = {}", fmt_f64(spec.spacing_ratio()));
    s
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<CommandOutput> {
    let a = load_material(cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "material = {}", material_label(cfg));
    s.push_str(&grid_lines(a.spec()));
    let _ = writeln!(s, "isotropic = {}", a.is_isotropic());
    let _ = writeln!(s, "lower_bound = {}", fmt_f64(a.lower_bound()));
    let _ = writeln!(s, "upper_bound = {}", fmt_f64(a.upper_bound()));
    let _ = writeln!(s, "contrast = {}", fmt_f64(a.contrast()));
    let _ = writeln!(s, "status = valid");
    Ok(CommandOutput::ok(s))
}

fn report_lines(r: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method = {}", r.method);
    let _ = writeln!(s, "reference = {}", r.reference);
    let _ = writeln!(s, "load = {}", fmt_vec(r.load.as_slice()));
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let _ = writeln!(s, "final_residual = {}", fmt_f64(r.final_residual()));
    let _ = writeln!(s, "termination = {:?}", r.termination);
    let _ = writeln!(s, "converged = {}", r.converged());
    s
}

/// Writes `solution`, `flux` (voxel pairs), `residuals.csv` and
/// `summary.txt` into the output directory. A non-converged solve still
/// writes everything, with `converged = false` in the summary.
pub fn cmd_solve(cfg: &RunConfig) -> Result<CommandOutput> {
    let a = load_material(cfg)?;
    let d = a.dim();
    let load = load_case(cfg, d)?;
    let report = solve(&a, &load, &cfg.solver_for(d)?)?;
    let flux = flux_field(&a, &report)?;
    let total = report.total_field();
    let out = &cfg.out;

    save_field(&out.join("solution"), &report.solution)?;
    save_field(&out.join("flux"), &flux)?;
    let mut csv = String::from("iteration,residual\n");
    let first = match report.method {
        Method::Cg => 0,
        Method::Neumann => 1,
    };
    for (i, r) in report.residual_history.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + first, fmt_f64(*r));
    }
    write_atomic(&out.join("residuals.csv"), csv.as_bytes())?;

    let mean_flux = flux.mean();
    let e = load.as_slice();
    let effective = mean_flux.iter().zip(e).map(|(j, e)| j * e).sum::<f64>() / load.norm().powi(2);
    let mut s = String::new();
    let _ = writeln!(s, "material = {}", material_label(cfg));
    s.push_str(&grid_lines(a.spec()));
    s.push_str(&report_lines(&report));
    let _ = writeln!(s, "mean_gradient = {}", fmt_vec(&total.mean()));
    let _ = writeln!(s, "mean_flux = {}", fmt_vec(&mean_flux));
    let _ = writeln!(s, "effective_value = {}", fmt_f64(effective));
    write_atomic(&out.join("summary.txt"), s.as_bytes())?;
    Ok(CommandOutput { text: s, converged: report.converged() })
}

/// Writes `effective.csv` and `summary.txt`. Without convergence only the
/// summary is written, flagged `converged = false`.
pub fn cmd_homogenize(cfg: &RunConfig) -> Result<CommandOutput> {
    let a = load_material(cfg)?;
    let d = a.dim();
    let solver = cfg.solver_for(d)?;
    let mut s = String::new();
    let _ = writeln!(s, "material = {}", material_label(cfg));
    s.push_str(&grid_lines(a.spec()));
    match effective_tensor(&a, &solver) {
        Ok(t) => {
            t.write_csv(&cfg.out.join("effective.csv"))?;
            for (alpha, r) in t.reports().iter().enumerate() {
                let _ = writeln!(s, "[case {alpha}]");
                s.push_str(&report_lines(r));
            }
            let _ = writeln!(s, "[effective]");
            for row in t.matrix().chunks(d) {
                let _ = writeln!(s, "{}", fmt_vec(row));
            }
            let _ = writeln!(s, "asymmetry = {}", fmt_f64(t.asymmetry()));
            let _ = writeln!(s, "symmetry_tolerance = {}", fmt_f64(10.0 * solver.tol * a.upper_bound()));
            write_atomic(&cfg.out.join("summary.txt"), s.as_bytes())?;
            Ok(CommandOutput::ok(s))
        }
        Err(Error::PartialSolve { reports, .. }) => {
            for (alpha, r) in reports.iter().enumerate() {
                let _ = writeln!(s, "[case {alpha}]");
                s.push_str(&report_lines(r));
            }
            let _ = writeln!(s, "converged = false");
            write_atomic(&cfg.out.join("summary.txt"), s.as_bytes())?;
            Ok(CommandOutput { text: s, converged: false })
        }
        Err(e) => Err(e),
    }
}

fn study_lines(studies: &[StudyResult]) -> String {
    let mut s = String::new();
    for st in studies {
        let fit = st.fitted_exponent.map(fmt_f64).unwrap_or_else(|| "none".into());
        let q = st.fit_quality.map(fmt_f64).unwrap_or_else(|| "none".into());
        let _ = writeln!(s, "{}: exponent = {fit}, r2 = {q}, dropped = {}, flags = [{}]", st.label, st.dropped, st.flags.join(";"));
    }
    s
}

fn study_family(cfg: &RunConfig, default: Family) -> Result<Family> {
    match &cfg.material {
        None => Ok(default),
        Some(MaterialSource::Family(f)) => Ok(*f),
        Some(MaterialSource::Voxel(p)) => Err(Error::Format(format!(
            "studies need a built-in family, not the voxel file {}",
            p.display()
        ))),
    }
}

/// Runs a study and writes its CSV tables:
/// `study_cg.csv` + `study_neumann.csv`, `convergence.csv` or
/// `approximation.csv`.
pub fn cmd_study(cfg: &RunConfig, kind: Option<StudyKind>) -> Result<CommandOutput> {
    let kind = kind
        .or(cfg.study.kind)
        .ok_or_else(|| Error::Format("no study kind given (convergence, contrast or approximation)".into()))?;
    let out = &cfg.out;
    let text = match kind {
        StudyKind::Contrast => {
            let family = study_family(cfg, Family::Inclusion { contrast: 10.0, radius: 0.8 })?;
            let shape = cfg.shape.clone().unwrap_or_else(|| vec![81, 81]);
            let spec = grid_spec(cfg, &shape)?;
            let load = load_case(cfg, spec.dim())?;
            let max_iter = |m: Method| if cfg.solver.method == m { cfg.solver.max_iter } else { default_max_iter(m) };
            let cg = SolverConfig::cg(cfg.solver.tol, max_iter(Method::Cg));
            let neumann = SolverConfig::neumann(cfg.solver.tol, max_iter(Method::Neumann));
            let (a, b) = contrast_study(&family, &spec, &cfg.study.contrasts, &load, &cg, &neumann)?;
            write_studies_csv(&out.join("study_cg.csv"), std::slice::from_ref(&a))?;
            write_studies_csv(&out.join("study_neumann.csv"), std::slice::from_ref(&b))?;
            study_lines(&[a, b])
        }
        StudyKind::Convergence => {
            let family = study_family(cfg, Family::SINE_BENCHMARK)?;
            let grids = cfg.study.grids.clone().unwrap_or_else(|| vec![vec![9], vec![17], vec![33], vec![65]]);
            let d = grids.first().map(Vec::len).unwrap_or(1);
            let y = cfg.half_periods.clone().unwrap_or_else(|| vec![1.0; d]);
            let load = load_case(cfg, d)?;
            let st = convergence_study(&family, &y, &grids, &load, &cfg.solver_for(d)?)?;
            write_studies_csv(&out.join("convergence.csv"), std::slice::from_ref(&st))?;
            study_lines(&[st])
        }
        StudyKind::Approximation => {
            let grids = cfg.study.grids.clone().unwrap_or_else(|| vec![vec![9], vec![17], vec![33], vec![65]]);
            let d = grids.first().map(Vec::len).unwrap_or(1);
            let y = cfg.half_periods.clone().unwrap_or_else(|| vec![1.0; d]);
            let st = approximation_study(&y, &grids, cfg.study.smoothness, &cfg.study.orders, cfg.study.cutoff)?;
            write_studies_csv(&out.join("approximation.csv"), &st)?;
            study_lines(&st)
        }
    };
    Ok(CommandOutput::ok(text))
}

fn default_max_iter(m: Method) -> usize {
    match m {
        Method::Cg => 1_000,
        Method::Neumann => 100_000,
    }
}
