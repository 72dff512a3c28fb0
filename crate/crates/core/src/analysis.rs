//! Experiment harness: convergence and approximation rates, iteration
//! scaling with the contrast, and a dense direct-solve oracle.
//!
//! Exponents are fitted by least squares in log-log coordinates. A leading
//! point is treated as pre-asymptotic and dropped while removing it raises
//! the R^2 of the fit by more than [`DROP_R2_GAIN`], as long as at least
//! three points remain.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::Family;
use crate::grid::{FreqIndex, GridSpec};
use crate::io::{fmt_f64, write_atomic};
use crate::material::CoefficientField;
use crate::solver::{solve, LoadCase, Method, SolveReport, SolverConfig};
use crate::transforms::{
    dft_forward, dft_inverse, interpolate, l2_norm, prolong, restrict, sobolev_norm, trig_eval, FourierPlan,
    GridField, SpectralField,
};

pub const DROP_R2_GAIN: f64 = 0.05;

/// Largest `|N| d` accepted by [`dense_oracle`].
pub const DENSE_ORACLE_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub label: String,
    /// `C_h` for rate studies, the contrast for scaling studies.
    pub axis: Vec<f64>,
    /// Errors or iteration counts.
    pub values: Vec<f64>,
    /// Points that hit `max_iter`; they are kept but never fitted.
    pub censored: Vec<bool>,
    pub fitted_exponent: Option<f64>,
    pub fit_quality: Option<f64>,
    /// Leading points removed by the drop rule.
    pub dropped: usize,
    pub flags: Vec<String>,
}

impl StudyResult {
    fn new(label: impl Into<String>, axis: Vec<f64>, values: Vec<f64>, censored: Vec<bool>) -> Self {
        let mut r = StudyResult {
            label: label.into(),
            axis,
            values,
            censored,
            fitted_exponent: None,
            fit_quality: None,
            dropped: 0,
            flags: Vec::new(),
        };
        r.refit();
        r
    }

    /// Fits the uncensored points with positive values.
    fn refit(&mut self) {
        let pts: Vec<(f64, f64)> = (0..self.axis.len())
            .filter(|&i| !self.censored[i] && self.values[i] > 0.0)
            .map(|i| (self.axis[i], self.values[i]))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Some(fit) = fit_loglog(&x, &y) {
            self.fitted_exponent = Some(fit.exponent);
            self.fit_quality = Some(fit.r2);
            self.dropped = fit.dropped;
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }
}

/// Least-squares fit `ln y = p ln x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFit {
    pub exponent: f64,
    pub r2: f64,
    pub dropped: usize,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, r2)
}

/// Log-log fit with the leading-point drop rule. Needs two points with
/// distinct positive abscissae.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<LogFit> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    if x.iter().all(|v| *v == x[0]) {
        return None;
    }
    let mut start = 0;
    let (mut exponent, mut r2) = least_squares(x, y);
    while x.len() - start > 3 {
        let (e, q) = least_squares(&x[start + 1..], &y[start + 1..]);
        if q - r2 > DROP_R2_GAIN {
            start += 1;
            exponent = e;
            r2 = q;
        } else {
            break;
        }
    }
    Some(LogFit { exponent, r2, dropped: start })
}

/// CSV table of one or more studies, one row per point.
pub fn studies_to_csv(studies: &[StudyResult]) -> String {
    let mut out = String::from("series,axis,value,censored,fitted_exponent,fit_quality,flags\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for s in studies {
        for i in 0..s.axis.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.label,
                fmt_f64(s.axis[i]),
                fmt_f64(s.values[i]),
                s.censored[i],
                opt(s.fitted_exponent),
                opt(s.fit_quality),
                s.flags.join(";")
            ));
        }
    }
    out
}

pub fn write_studies_csv(path: &Path, studies: &[StudyResult]) -> Result<()> {
    write_atomic(path, studies_to_csv(studies).as_bytes())
}

fn odd_refinement(shapes: &[Vec<usize>]) -> Vec<usize> {
    let d = shapes[0].len();
    (0..d).map(|a| 4 * shapes.iter().map(|s| s[a]).max().unwrap_or(1) + 1).collect()
}

/// Discretization error `||e~ - e~_N||` against the grid spacing `C_h`.
///
/// The reference is the exact fluctuation where the family provides one,
/// sampled on a grid `4 N_max + 1` per axis; otherwise it is the discrete
/// solution on that grid. Coarse solutions are compared after spectral
/// prolongation. Discontinuous families are flagged `low-regularity`.
pub fn convergence_study(
    family: &Family,
    half_periods: &[f64],
    grids: &[Vec<usize>],
    load: &LoadCase,
    cfg: &SolverConfig,
) -> Result<StudyResult> {
    if grids.is_empty() {
        return Err(Error::Domain("convergence study needs at least one grid".into()));
    }
    let specs: Vec<GridSpec> = grids.iter().map(|g| GridSpec::new(half_periods, g)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by(|&i, &j| specs[j].max_spacing().total_cmp(&specs[i].max_spacing()));
    let fine = GridSpec::new(half_periods, &odd_refinement(grids))?;
    let d = fine.dim();

    let (reference, oracle) = match family.exact_fluctuation(load.as_slice(), half_periods) {
        Some(f) => (interpolate(&fine, d, |x, out| out.copy_from_slice(&f(x)))?, "analytic-reference"),
        None => {
            let a = family.sample(&fine)?;
            let r = solve(&a, load, cfg)?;
            if !r.converged() {
                return Err(Error::NotConverged(format!(
                    "reference solve on {:?} stopped with {:?}",
                    fine.shape(),
                    r.termination
                )));
            }
            (r.solution, "fine-grid-reference")
        }
    };

    let points: Vec<(f64, f64, bool)> = order
        .par_iter()
        .map(|&i| {
            let spec = &specs[i];
            let a = family.sample(spec)?;
            let r = solve(&a, load, cfg)?;
            let coarse = dft_inverse(&prolong(&dft_forward(&r.solution), &fine)?)?;
            let mut diff = coarse;
            diff.add_scaled(-1.0, &reference);
            Ok((spec.max_spacing(), l2_norm(&diff), !r.converged()))
        })
        .collect::<Result<_>>()?;

    let mut s = StudyResult::new(
        format!("convergence-{}", family.name()),
        points.iter().map(|p| p.0).collect(),
        points.iter().map(|p| p.1).collect(),
        points.iter().map(|p| p.2).collect(),
    );
    s.flag(oracle);
    if family.regularity().is_low() {
        s.flag("low-regularity");
    }
    if s.values.iter().all(|&v| v == 0.0) {
        s.flag("exact");
    }
    // axis runs from coarse to fine, so errors should not grow
    if s.values.windows(2).any(|w| w[1] > w[0]) {
        s.flag("non-monotone");
    }
    Ok(s)
}

/// Iterations to reach `cfg.tol` against the contrast, for CG and the
/// Neumann series (with its default reference), on the family with its
/// contrast parameter set to each value. Runs that stop at `max_iter` are
/// censored.
pub fn contrast_study(
    family: &Family,
    spec: &GridSpec,
    contrasts: &[f64],
    load: &LoadCase,
    cg: &SolverConfig,
    neumann: &SolverConfig,
) -> Result<(StudyResult, StudyResult)> {
    if cg.method != Method::Cg || neumann.method != Method::Neumann {
        return Err(Error::Domain("contrast study needs one cg and one neumann configuration".into()));
    }
    let runs: Vec<(SolveReport, SolveReport)> = contrasts
        .par_iter()
        .map(|&rho| {
            let a = family.with_contrast(rho).sample(spec)?;
            Ok((solve(&a, load, cg)?, solve(&a, load, neumann)?))
        })
        .collect::<Result<_>>()?;
    let build = |label: &str, pick: &dyn Fn(&(SolveReport, SolveReport)) -> &SolveReport| {
        let mut s = StudyResult::new(
            format!("{label}-{}", family.name()),
            contrasts.to_vec(),
            runs.iter().map(|r| pick(r).iterations as f64).collect(),
            runs.iter().map(|r| !pick(r).converged()).collect(),
        );
        if s.censored.iter().any(|&c| c) {
            s.flag("censored");
        }
        s
    };
    Ok((build("cg", &|r| &r.0), build("neumann", &|r| &r.1)))
}

fn real_basis(spec: &GridSpec) -> Vec<Vec<f64>> {
    // one representative of each pair {k, -k}: first non-zero entry positive
    let d = spec.dim();
    let n = spec.total();
    let points = spec.grid_points();
    let mut basis = Vec::with_capacity(n.saturating_sub(1));
    for k in spec.iter_lattice() {
        match k.as_slice().iter().find(|&&v| v != 0) {
            Some(&v) if v > 0 => {}
            _ => continue,
        }
        let xi = spec.frequency(&k);
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let mut c = vec![0.0; d * n];
        let mut s = vec![0.0; d * n];
        for p in 0..n {
            let x = &points[p * d..(p + 1) * d];
            let phase = PI * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let (sin, cos) = phase.sin_cos();
            for a in 0..d {
                c[a * n + p] = 2f64.sqrt() * cos * dir[a];
                s[a * n + p] = 2f64.sqrt() * sin * dir[a];
            }
        }
        basis.push(c);
        basis.push(s);
    }
    basis
}

/// Direct solution of the discrete cell problem for small grids.
///
/// `E_N` is spanned by the orthonormal fields `sqrt(2) cos(pi xi.x) xi/|xi|`
/// and `sqrt(2) sin(pi xi.x) xi/|xi|` evaluated directly at the grid points.
/// Because `G_N` is the orthogonal projection onto `E_N`, the system
/// restricted to this basis is the Galerkin matrix `<A_N b_j, b_i>`, which is
/// assembled densely and solved by Cholesky factorization. No FFT is used.
pub fn dense_oracle(a: &CoefficientField, load: &LoadCase) -> Result<GridField> {
    let spec = a.spec();
    let (d, n) = (spec.dim(), spec.total());
    if n * d > DENSE_ORACLE_LIMIT {
        return Err(Error::Domain(format!(
            "dense oracle limited to |N| d <= {DENSE_ORACLE_LIMIT}, got {}",
            n * d
        )));
    }
    if load.dim() != d {
        return Err(Error::Domain(format!("{}-component load on a {d}-dimensional cell", load.dim())));
    }
    let basis = real_basis(spec);
    let m = basis.len();
    let mean = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / n as f64;
    let applied: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| Ok(a.apply(&GridField::vector(spec, b.clone())?)?.into_values()))
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(m, m, |i, j| mean(&basis[i], &applied[j]));
    let ae = a.apply(&load.field(a))?.into_values();
    let rhs = DVector::from_fn(m, |i, _| -mean(&basis[i], &ae));
    let chol = matrix
        .cholesky()
        .ok_or_else(|| Error::Data("dense system is not positive definite".into()))?;
    let coef = chol.solve(&rhs);
    let mut out = vec![0.0; d * n];
    for (c, b) in coef.iter().zip(&basis) {
        for (o, v) in out.iter_mut().zip(b) {
            *o += c * v;
        }
    }
    GridField::vector(spec, out)
}

/// `||e~_N|| / (rho_A ||E||)`; at most `1 + 10 tol` for a converged solve.
pub fn apriori_ratio(a: &CoefficientField, report: &SolveReport) -> f64 {
    l2_norm(&report.solution) / (a.contrast() * report.load.norm())
}

/// Sum of `||m||^(-2s)` over `m in N_0^d \ {0}`, as a direct sum over
/// `||m||_inf <= cutoff` plus the bound `d 2^(d-1) M^(d-2s) / (2s-d)` on the
/// remainder. The result is an upper bound that is sharp to the size of the
/// remainder term, which is also returned.
pub fn lattice_sum(d: usize, s: f64, cutoff: usize) -> Result<(f64, f64)> {
    if !(2.0 * s > d as f64) {
        return Err(Error::Domain(format!("lattice sum diverges for s = {s} <= d/2 = {}", d as f64 / 2.0)));
    }
    let side = cutoff + 1;
    let total = side.checked_pow(d as u32).ok_or_else(|| Error::Domain("cutoff too large".into()))?;
    let partial: f64 = (1..total)
        .into_par_iter()
        .map(|mut lin| {
            let mut r2 = 0.0;
            for _ in 0..d {
                let m = (lin % side) as f64;
                lin /= side;
                r2 += m * m;
            }
            r2.powf(-s)
        })
        .sum();
    let m = cutoff as f64;
    let tail = d as f64 * 2f64.powi(d as i32 - 1) * m.powf(d as f64 - 2.0 * s) / (2.0 * s - d as f64);
    Ok((partial + tail, tail))
}

/// Upper bound for the interpolation constant `c_{r,s}` on `spec`:
/// `c^2 = 1 + d^r rho_h^(2r) sum ||m||^(-2s)`.
pub fn interpolation_constant(spec: &GridSpec, r: f64, s: f64) -> Result<f64> {
    let d = spec.dim();
    let cutoff = match d {
        1 => 200_000,
        2 => 1_000,
        3 => 100,
        _ => 16,
    };
    let (sum, _) = lattice_sum(d, s, cutoff)?;
    Ok((1.0 + (d as f64).powf(r) * spec.spacing_ratio().powf(2.0 * r) * sum).sqrt())
}

/// Trigonometric polynomial with coefficients `||k||^-(s + d/2 + 1/2)`
/// (`1` at `k = 0`) on the lattice `|k_a| <= cutoff`. Its `H^t` norms stay
/// bounded in the cutoff exactly for `t < s + 1/2`.
pub fn spectral_family(half_periods: &[f64], s: f64, cutoff: usize) -> Result<SpectralField> {
    let d = half_periods.len();
    let spec = GridSpec::new(half_periods, &vec![2 * cutoff + 1; d])?;
    let p = s + d as f64 / 2.0 + 0.5;
    let coeffs = spec
        .iter_lattice()
        .map(|k| {
            let n2: f64 = k.as_slice().iter().map(|&v| (v * v) as f64).sum();
            Complex64::new(if n2 == 0.0 { 1.0 } else { n2.powf(-p / 2.0) }, 0.0)
        })
        .collect();
    SpectralField::new(&spec, 1, coeffs)
}

/// Remainder `||u - u_M||_{H^r}` of the untruncated series behind
/// [`spectral_family`], bounded by comparing the shell sums with an integral.
pub fn spectral_family_tail(d: usize, s: f64, r: f64, cutoff: usize, half_periods: &[f64]) -> f64 {
    // on ||k||_inf = j: at most d (2j+1)^(d-1) 2 points with ||k|| >= j, and
    // ||xi|| <= sqrt(d) j / min Y
    let p = 2.0 * (s + d as f64 / 2.0 + 0.5);
    let ymin = half_periods.iter().cloned().fold(f64::INFINITY, f64::min);
    let q = p - 2.0 * r - (d as f64 - 1.0);
    if q <= 1.0 {
        return f64::INFINITY;
    }
    let c = 2.0 * d as f64 * 3f64.powf(d as f64 - 1.0) * (d as f64).powf(r) / ymin.powf(2.0 * r);
    let m = cutoff as f64;
    (c * m.powf(1.0 - q) / (q - 1.0)).sqrt()
}

/// Samples `u` at the grid points of `spec` by direct evaluation of the
/// trigonometric sum and returns `Q_N u`.
pub fn interpolate_spectral(u: &SpectralField, spec: &GridSpec) -> Result<SpectralField> {
    let d = spec.dim();
    let points = spec.grid_points();
    let values: Vec<f64> = (0..spec.total())
        .into_par_iter()
        .map(|p| trig_eval(u, &points[p * d..(p + 1) * d])[0])
        .collect();
    Ok(dft_forward(&GridField::new(spec, 1, values)?))
}

/// `P_N` and `Q_N` errors in `H^r`, `r in orders`, of
/// [`spectral_family`]`(s, cutoff)` on each grid, plus the aliasing witness
/// on the coarsest grid.
///
/// Each grid also reports whether the measured errors respect the bounds
/// `C_h^(s-r) ||u||_{H^s}` and `c_{r,s} C_h^(s-r) ||u||_{H^s}`; a violation
/// is flagged `bound-violated`.
pub fn approximation_study(
    half_periods: &[f64],
    grids: &[Vec<usize>],
    s: f64,
    orders: &[f64],
    cutoff: usize,
) -> Result<Vec<StudyResult>> {
    let u = spectral_family(half_periods, s, cutoff)?;
    let reference = u.spec().clone();
    let u_hs = sobolev_norm(&u, s)?;
    let specs: Vec<GridSpec> = grids.iter().map(|g| GridSpec::new(half_periods, g)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by(|&i, &j| specs[j].max_spacing().total_cmp(&specs[i].max_spacing()));

    struct Point {
        ch: f64,
        p_err: Vec<f64>,
        q_err: Vec<f64>,
        within: bool,
    }
    let points: Vec<Point> = order
        .par_iter()
        .map(|&i| {
            let spec = &specs[i];
            let pn = prolong(&restrict(&u, spec)?, &reference)?;
            let qn = prolong(&interpolate_spectral(&u, spec)?, &reference)?;
            let diff = |v: &SpectralField| {
                let c = u.coeffs().iter().zip(v.coeffs()).map(|(a, b)| a - b).collect();
                SpectralField::new(&reference, 1, c)
            };
            let (dp, dq) = (diff(&pn)?, diff(&qn)?);
            let mut p_err = Vec::new();
            let mut q_err = Vec::new();
            let mut within = true;
            for &r in orders {
                let (ep, eq) = (sobolev_norm(&dp, r)?, sobolev_norm(&dq, r)?);
                let rate = spec.max_spacing().powf(s - r) * u_hs;
                let c = if 2.0 * s > spec.dim() as f64 { interpolation_constant(spec, r, s)? } else { f64::INFINITY };
                within &= ep <= rate * (1.0 + 1e-12) && eq <= c * rate * (1.0 + 1e-12);
                p_err.push(ep);
                q_err.push(eq);
            }
            Ok(Point { ch: spec.max_spacing(), p_err, q_err, within })
        })
        .collect::<Result<_>>()?;

    let axis: Vec<f64> = points.iter().map(|p| p.ch).collect();
    let no_censor = vec![false; axis.len()];
    let tail_flag = |r: f64| {
        format!("tail<={}", fmt_f64(spectral_family_tail(half_periods.len(), s, r, cutoff, half_periods)))
    };
    let mut out = Vec::new();
    for (j, &r) in orders.iter().enumerate() {
        for (name, pick) in [("P_N", 0), ("Q_N", 1)] {
            let values = points.iter().map(|p| if pick == 0 { p.p_err[j] } else { p.q_err[j] }).collect();
            let mut st = StudyResult::new(format!("{name}-H{r}"), axis.clone(), values, no_censor.clone());
            st.flag(tail_flag(r));
            if points.iter().any(|p| !p.within) {
                st.flag("bound-violated");
            }
            out.push(st);
        }
    }
    if let Some(&first) = order.first() {
        let w = aliasing_witness(&specs[first], &FreqIndex::zero(specs[first].dim()).neg())?;
        let mut st = StudyResult::new("aliasing-witness", vec![specs[first].max_spacing()], vec![w.l2_error], vec![false]);
        st.flag(format!("coefficient-defect={}", fmt_f64(w.coefficient_defect)));
        out.push(st);
    }
    Ok(out)
}

/// Outcome of interpolating `phi_{k+N}` on the grid of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliasingWitness {
    /// `max_j |Q_N phi_{k+N}^(j) - delta_{jk}|` over the reduced lattice.
    pub coefficient_defect: f64,
    /// `||phi_{k+N} - Q_N phi_{k+N}||` in the mean L2 norm.
    pub l2_error: f64,
}

/// Samples the complex mode `phi_{k+N}` at the grid points, transforms and
/// compares with `phi_k`. Here `k + N` shifts every component by `N_a`.
pub fn aliasing_witness(spec: &GridSpec, k: &FreqIndex) -> Result<AliasingWitness> {
    let d = spec.dim();
    let n = spec.total();
    if !spec.contains(k) {
        return Err(Error::Domain(format!("{:?} is outside the reduced lattice", k.as_slice())));
    }
    let shifted: Vec<f64> = (0..d)
        .map(|a| (k.as_slice()[a] + spec.shape()[a] as i64) as f64 / spec.half_periods()[a])
        .collect();
    let points = spec.grid_points();
    let mut data: Vec<Complex64> = (0..n)
        .map(|p| {
            let phase = PI * shifted.iter().zip(&points[p * d..(p + 1) * d]).map(|(a, b)| a * b).sum::<f64>();
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    FourierPlan::new(spec).forward_in_place(&mut data);
    let target = spec.linear_index(k)?;
    let mut defect: f64 = 0.0;
    let mut energy = 1.0; // the mode k+N itself, absent from Q_N
    for (j, c) in data.iter().enumerate() {
        let c = c / n as f64;
        let expected = if j == target { 1.0 } else { 0.0 };
        defect = defect.max((c - expected).norm());
        energy += c.norm_sqr();
    }
    Ok(AliasingWitness { coefficient_defect: defect, l2_error: energy.sqrt() })
}
