//! Matrix-free solvers for the fully discrete cell problem.
//!
//! Two routes lead to the same discrete solution `e_N = E_N + e~_N`:
//!
//! * conjugate gradients on the projected system
//!   `G_N A_N e~_N = -G_N A_N E_N`, where `G_N` is the orthogonal projection
//!   onto `E_N` (zero-mean curl-free fields) and every iterate stays in `E_N`;
//! * the Neumann series of the discrete Lippmann-Schwinger equation
//!   `e_(i) = -Gamma0_N (A_N - A0) e_(i-1) + E_N` (the basic FFT scheme).
//!
//! Residuals and errors are measured in the discrete mean L2 norm.

use std::fmt;

use crate::error::{Error, Result};
use crate::green::{GreenOperator, ReferenceTensor};
use crate::material::CoefficientField;
use crate::transforms::{dot, l2_norm, GridField};

/// Right-hand sides smaller than this fraction of `||A_N E_N||` are treated
/// as zero (homogeneous media up to FFT round-off).
pub const ZERO_RHS_FLOOR: f64 = 1e-14;

/// Consecutive growing updates after which the Neumann series is declared
/// divergent.
pub const DIVERGENCE_WINDOW: usize = 10;

/// Mean applied gradient `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase(Vec<f64>);

impl LoadCase {
    pub fn new(e: impl Into<Vec<f64>>) -> Result<Self> {
        let e = e.into();
        if e.is_empty() || e.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("load must be a finite non-empty vector, got {e:?}")));
        }
        Ok(LoadCase(e))
    }

    /// Unit load `E = e_alpha`.
    pub fn unit(dim: usize, alpha: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[alpha] = 1.0;
        LoadCase(e)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `E_N`, the constant grid field.
    pub fn field(&self, a: &CoefficientField) -> GridField {
        GridField::constant(a.spec(), &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cg,
    Neumann,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cg => "cg",
            Method::Neumann => "neumann",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" => Ok(Method::Cg),
            "neumann" => Ok(Method::Neumann),
            other => Err(Error::Format(format!("unknown solver {other:?}, expected cg or neumann"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative residual (CG) or relative update (Neumann) at which to stop.
    pub tol: f64,
    pub max_iter: usize,
    /// Reference medium. CG needs a scalar one (default `I`); Neumann
    /// defaults to `(c_A + C_A)/2 I`.
    pub reference: Option<ReferenceTensor>,
}

impl SolverConfig {
    pub fn cg(tol: f64, max_iter: usize) -> Self {
        SolverConfig { method: Method::Cg, tol, max_iter, reference: None }
    }

    pub fn neumann(tol: f64, max_iter: usize) -> Self {
        SolverConfig { method: Method::Neumann, tol, max_iter, reference: None }
    }

    pub fn with_reference(mut self, reference: ReferenceTensor) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Domain(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::cg(1e-8, 1000)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The update norm grew for [`DIVERGENCE_WINDOW`] consecutive iterations.
    Diverged { reference: String },
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `e~_N`, the fluctuating part of the gradient field.
    pub solution: GridField,
    pub iterations: usize,
    /// CG: `||r_i|| / ||r_0||` starting with `i = 0`. Neumann: relative
    /// update `||e_(i) - e_(i-1)|| / ||e_(i)||` starting with `i = 1`.
    pub residual_history: Vec<f64>,
    pub termination: Termination,
    pub method: Method,
    pub load: LoadCase,
    pub reference: ReferenceTensor,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `e_N = E_N + e~_N`.
    pub fn total_field(&self) -> GridField {
        let mut e = self.solution.clone();
        e.add_constant(self.load.as_slice());
        e
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// The operator `u -> G_N A_N u` with the orthogonal projection `G_N`.
#[derive(Debug, Clone)]
pub struct ProjectedSystem<'a> {
    a: &'a CoefficientField,
    green: GreenOperator,
}

impl<'a> ProjectedSystem<'a> {
    /// `reference` must be scalar; it only enters through round-off since
    /// `G0_N` does not depend on `lambda`.
    pub fn new(a: &'a CoefficientField, reference: Option<&ReferenceTensor>) -> Result<Self> {
        let reference = match reference {
            Some(r) => r.clone(),
            None => ReferenceTensor::scalar(a.dim(), 1.0)?,
        };
        if reference.scalar_mode().is_none() {
            return Err(Error::Domain(format!(
                "the projected system needs a scalar reference lambda I, got {reference}"
            )));
        }
        Ok(ProjectedSystem { a, green: GreenOperator::new(a.spec(), &reference)? })
    }

    pub fn reference(&self) -> &ReferenceTensor {
        self.green.reference()
    }

    pub fn green(&self) -> &GreenOperator {
        &self.green
    }

    /// `G_N A_N u`.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.green.apply_g0(&self.a.apply(u)?)
    }

    /// `-G_N A_N E_N`.
    pub fn rhs(&self, load: &LoadCase) -> Result<GridField> {
        let mut b = self.apply(&load.field(self.a))?;
        b.scale(-1.0);
        Ok(b)
    }
}

/// `G_N A_N u` with the default reference.
pub fn apply_system(a: &CoefficientField, u: &GridField) -> Result<GridField> {
    ProjectedSystem::new(a, None)?.apply(u)
}

/// `||G_N A_N (candidate + E_N)||`, zero exactly at the discrete solution.
pub fn residual_norm(a: &CoefficientField, load: &LoadCase, candidate: &GridField) -> Result<f64> {
    let mut e = candidate.clone();
    e.add_constant(load.as_slice());
    Ok(l2_norm(&apply_system(a, &e)?))
}

fn check_load(a: &CoefficientField, load: &LoadCase) -> Result<()> {
    if load.dim() != a.dim() {
        return Err(Error::Domain(format!(
            "{}-component load on a {}-dimensional cell",
            load.dim(),
            a.dim()
        )));
    }
    Ok(())
}

/// CG on the projected system, see [`solve_cg_observed`].
pub fn solve_cg(
    a: &CoefficientField,
    load: &LoadCase,
    cfg: &SolverConfig,
    init: Option<&GridField>,
) -> Result<SolveReport> {
    solve_cg_observed(a, load, cfg, init, |_, _| {})
}

/// Conjugate gradients for `G_N A_N e~ = -G_N A_N E_N` on `E_N`.
///
/// The initial guess (zero by default) is projected through `G_N` once.
/// Iteration stops when `||r_i|| <= tol ||r_0||`, where `r_0 = -G_N A_N E_N`
/// is the residual of the zero guess whatever `init` is; right-hand sides
/// below [`ZERO_RHS_FLOOR`] count as zero. `observer(i, x_i)` sees every
/// iterate including `x_0`. Exceeding `max_iter` yields a report with
/// [`Termination::MaxIterations`], not an error.
pub fn solve_cg_observed<F>(
    a: &CoefficientField,
    load: &LoadCase,
    cfg: &SolverConfig,
    init: Option<&GridField>,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(usize, &GridField),
{
    cfg.validate()?;
    check_load(a, load)?;
    let system = ProjectedSystem::new(a, cfg.reference.as_ref())?;
    let b = system.rhs(load)?;
    let b_norm = l2_norm(&b);
    let floor = ZERO_RHS_FLOOR * l2_norm(&a.apply(&load.field(a))?);
    let target = (cfg.tol * b_norm).max(floor);
    let scale = if b_norm > floor { b_norm } else { 1.0 };

    let (mut x, mut r) = match init {
        Some(x0) => {
            let x = system.green().apply_g0(x0)?;
            let mut r = b.clone();
            r.add_scaled(-1.0, &system.apply(&x)?);
            (x, r)
        }
        None => (GridField::zeros(a.spec(), a.dim()), b),
    };
    observer(0, &x);
    let mut rr = dot(r.values(), r.values());
    let mut history = vec![l2_norm(&r) / scale];
    let mut p = r.clone();
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    loop {
        if l2_norm(&r) <= target {
            termination = Termination::Converged;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        let ap = system.apply(&p)?;
        let pap = dot(p.values(), ap.values());
        if !(pap > 0.0) {
            // breakdown: p is numerically zero, nothing left to reduce
            break;
        }
        let alpha = rr / pap;
        x.add_scaled(alpha, &p);
        r.add_scaled(-alpha, &ap);
        let rr_new = dot(r.values(), r.values());
        let beta = rr_new / rr;
        rr = rr_new;
        p.scale(beta);
        p.add_scaled(1.0, &r);
        iterations += 1;
        history.push(l2_norm(&r) / scale);
        observer(iterations, &x);
    }
    Ok(SolveReport {
        solution: x,
        iterations,
        residual_history: history,
        termination,
        method: Method::Cg,
        load: load.clone(),
        reference: system.reference().clone(),
    })
}

/// Default reference of the Neumann series, `(c_A + C_A)/2 I`.
pub fn default_neumann_reference(a: &CoefficientField) -> Result<ReferenceTensor> {
    ReferenceTensor::scalar(a.dim(), 0.5 * (a.lower_bound() + a.upper_bound()))
}

/// Neumann series, see [`solve_neumann_observed`].
pub fn solve_neumann(a: &CoefficientField, load: &LoadCase, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_neumann_observed(a, load, cfg, |_, _| {})
}

/// Fixed-point iteration `e_(i) = -Gamma0_N (A_N - A0) e_(i-1) + E_N` from
/// `e_(0) = E_N`.
///
/// Converged once the relative update drops to `tol`. Growth of the update
/// for [`DIVERGENCE_WINDOW`] consecutive iterations (or a non-finite update)
/// ends the run with [`Termination::Diverged`]. `observer(i, e~_(i))` sees
/// every iterate.
pub fn solve_neumann_observed<F>(
    a: &CoefficientField,
    load: &LoadCase,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(usize, &GridField),
{
    cfg.validate()?;
    check_load(a, load)?;
    let reference = match &cfg.reference {
        Some(r) => r.clone(),
        None => default_neumann_reference(a)?,
    };
    let green = GreenOperator::new(a.spec(), &reference)?;
    let d = a.dim();
    let n = a.spec().total();
    let e_load = load.field(a);
    let mut e = e_load.clone();
    let mut polarization = GridField::zeros(a.spec(), d);
    let mut fluct = GridField::zeros(a.spec(), d);
    observer(0, &fluct);

    let mut history = Vec::new();
    let mut growth = 0;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let m0 = reference.matrix();
    while iterations < cfg.max_iter {
        // (A_N - A0) e
        a.apply_into(&e, &mut polarization)?;
        {
            let ev = e.values();
            let pv = polarization.values_mut();
            for p in 0..n {
                for i in 0..d {
                    let s: f64 = (0..d).map(|j| m0[i * d + j] * ev[j * n + p]).sum();
                    pv[i * n + p] -= s;
                }
            }
        }
        let mut next = green.apply_gamma0(&polarization)?;
        next.scale(-1.0);
        next.add_constant(load.as_slice());
        iterations += 1;

        let mut diff = next.clone();
        diff.add_scaled(-1.0, &e);
        let next_norm = l2_norm(&next);
        let update = if next_norm > 0.0 { l2_norm(&diff) / next_norm } else { l2_norm(&diff) };
        e = next;
        fluct.values_mut().copy_from_slice(e.values());
        fluct.add_constant(&load.as_slice().iter().map(|v| -v).collect::<Vec<_>>());
        observer(iterations, &fluct);

        if let Some(&prev) = history.last() {
            growth = if update > prev { growth + 1 } else { 0 };
        }
        history.push(update);
        if !update.is_finite() || growth >= DIVERGENCE_WINDOW {
            termination = Termination::Diverged { reference: reference.to_string() };
            break;
        }
        if update <= cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }
    let mut solution = e;
    solution.add_scaled(-1.0, &e_load);
    Ok(SolveReport {
        solution,
        iterations,
        residual_history: history,
        termination,
        method: Method::Neumann,
        load: load.clone(),
        reference,
    })
}

/// Dispatches on `cfg.method` (CG starts from zero).
pub fn solve(a: &CoefficientField, load: &LoadCase, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.method {
        Method::Cg => solve_cg(a, load, cfg, None),
        Method::Neumann => solve_neumann(a, load, cfg),
    }
}
