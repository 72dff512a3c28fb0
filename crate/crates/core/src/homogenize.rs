//! Effective (homogenized) coefficients from `d` unit load cases.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};
use crate::material::CoefficientField;
use crate::solver::{solve, LoadCase, SolveReport, SolverConfig};
use crate::transforms::{l2_inner, GridField};

#[derive(Debug, Clone)]
pub struct EffectiveTensor {
    dim: usize,
    /// Row-major `d x d`, not symmetrized.
    matrix: Vec<f64>,
    reports: Vec<SolveReport>,
}

impl EffectiveTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    /// One report per unit load `E = e_alpha`, in order.
    pub fn reports(&self) -> &[SolveReport] {
        &self.reports
    }

    pub fn asymmetry(&self) -> f64 {
        crate::linalg::asymmetry(self.dim, &self.matrix)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let sym: Vec<f64> = (0..d * d)
            .map(|ij| 0.5 * (self.matrix[ij] + self.matrix[(ij % d) * d + ij / d]))
            .collect();
        crate::linalg::sym_eigenvalues(d, &crate::linalg::pack(d, &sym))
    }

    /// CSV text: `d` rows of `d` comma-separated values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.matrix.chunks(self.dim) {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Solves the unit load cases (in parallel) and assembles
/// `(A_eff)_{ab} = <A_N (E^a + e~^a), E^b + e~^b>`.
///
/// Fails with [`Error::PartialSolve`] if any case does not converge.
pub fn effective_tensor(a: &CoefficientField, cfg: &SolverConfig) -> Result<EffectiveTensor> {
    let d = a.dim();
    let reports: Vec<SolveReport> = (0..d)
        .into_par_iter()
        .map(|alpha| solve(a, &LoadCase::unit(d, alpha), cfg))
        .collect::<Result<_>>()?;
    let failed: Vec<usize> = (0..d).filter(|&i| !reports[i].converged()).collect();
    if !failed.is_empty() {
        return Err(Error::PartialSolve {
            message: format!("load cases {failed:?} stopped with {:?}", reports[failed[0]].termination),
            reports,
        });
    }
    assemble(a, reports)
}

/// Effective tensor from already computed unit load-case reports.
pub fn assemble(a: &CoefficientField, reports: Vec<SolveReport>) -> Result<EffectiveTensor> {
    let d = a.dim();
    if reports.len() != d {
        return Err(Error::Domain(format!("need {d} load cases, got {}", reports.len())));
    }
    let totals: Vec<GridField> = reports.iter().map(SolveReport::total_field).collect();
    let fluxes: Vec<GridField> = totals.iter().map(|e| a.apply(e)).collect::<Result<_>>()?;
    let mut matrix = vec![0.0; d * d];
    for (alpha, j) in fluxes.iter().enumerate() {
        for (beta, e) in totals.iter().enumerate() {
            matrix[alpha * d + beta] = l2_inner(j, e)?;
        }
    }
    Ok(EffectiveTensor { dim: d, matrix, reports })
}

/// Flux `j = A_N (E_N + e~_N)`.
pub fn flux_field(a: &CoefficientField, report: &SolveReport) -> Result<GridField> {
    a.apply(&report.total_field())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Family;
    use crate::green::{project_j, ReferenceTensor};
    use crate::grid::GridSpec;
    use crate::solver::solve_cg;
    use crate::transforms::l2_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor_field(spec: &GridSpec, seed: u64) -> CoefficientField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::material::sample_analytic(spec, |_| {
            let (a, b, c) = (rng.gen_range(1.0..5.0), rng.gen_range(-0.5..0.5), rng.gen_range(1.0..5.0));
            vec![a, b, b, c]
        })
        .unwrap()
    }

    #[test]
    fn homogeneous_is_exact() {
        let spec = GridSpec::unit(&[9, 9]).unwrap();
        let a = CoefficientField::homogeneous(&spec, &[5.0, 0.0, 0.0, 5.0]).unwrap();
        let t = effective_tensor(&a, &SolverConfig::cg(1e-8, 100)).unwrap();
        assert_eq!(t.matrix(), &[5.0, 0.0, 0.0, 5.0]);
        assert_eq!(t.to_csv(), format!("{0},{1}\n{1},{0}\n", fmt_f64(5.0), fmt_f64(0.0)));
    }

    #[test]
    fn sine_laminate() {
        let spec = GridSpec::unit(&[255]).unwrap();
        let a = Family::SINE_BENCHMARK.sample(&spec).unwrap();
        let t = effective_tensor(&a, &SolverConfig::cg(1e-10, 500)).unwrap();
        assert!((t.get(0, 0) - 5f64.sqrt()).abs() < 1e-6);
        // the discrete problem is solved by the harmonic mean of the samples
        assert!((t.get(0, 0) - a.harmonic_mean().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_between_bounds() {
        let tol = 1e-9;
        let spec = GridSpec::unit(&[15, 13]).unwrap();
        let a = random_tensor_field(&spec, 17);
        let t = effective_tensor(&a, &SolverConfig::cg(tol, 500)).unwrap();
        let slack = 10.0 * tol * a.upper_bound();
        assert!(t.asymmetry() <= slack, "{}", t.asymmetry());
        // Voigt: <A> - A_eff is positive semidefinite
        let mean = a.arithmetic_mean();
        let diff: Vec<f64> = mean.iter().zip(t.matrix()).map(|(m, e)| m - e).collect();
        let ev = crate::linalg::sym_eigenvalues(2, &crate::linalg::pack(2, &diff));
        assert!(ev[0] >= -slack);
        let ev = t.eigenvalues();
        assert!(ev[0] >= a.lower_bound() && ev[1] <= a.upper_bound());
    }

    #[test]
    fn reuss_bound_on_isotropic_phases() {
        let spec = GridSpec::unit(&[21, 21]).unwrap();
        let a = Family::Inclusion { contrast: 10.0, radius: 0.6 }.sample(&spec).unwrap();
        let t = effective_tensor(&a, &SolverConfig::cg(1e-9, 500)).unwrap();
        let h = a.harmonic_mean().unwrap();
        for e in t.eigenvalues() {
            assert!(e >= h * (1.0 - 1e-8));
        }
    }

    #[test]
    fn flux_mean_and_divergence_free() {
        let spec = GridSpec::unit(&[11, 9]).unwrap();
        let a = random_tensor_field(&spec, 5);
        let t = effective_tensor(&a, &SolverConfig::cg(1e-11, 500)).unwrap();
        for (alpha, r) in t.reports().iter().enumerate() {
            let j = flux_field(&a, r).unwrap();
            let m = j.mean();
            for beta in 0..2 {
                assert!((m[beta] - t.get(beta, alpha)).abs() < 1e-8);
            }
            let pj = project_j(&j, &ReferenceTensor::scalar(2, 1.0).unwrap()).unwrap();
            let mut jm = j.clone();
            jm.add_constant(&m.iter().map(|v| -v).collect::<Vec<_>>());
            jm.add_scaled(-1.0, &pj);
            assert!(l2_norm(&jm) < 1e-9 * l2_norm(&j));
        }
    }

    #[test]
    fn homogeneous_flux() {
        let spec = GridSpec::unit(&[5, 5]).unwrap();
        let a = CoefficientField::homogeneous(&spec, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let load = LoadCase::new(vec![1.0, -1.0]).unwrap();
        let r = solve_cg(&a, &load, &SolverConfig::cg(1e-8, 10), None).unwrap();
        let j = flux_field(&a, &r).unwrap();
        for p in 0..spec.total() {
            let v = j.at(p);
            assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] + 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn load_linearity() {
        let spec = GridSpec::unit(&[9, 11]).unwrap();
        let a = random_tensor_field(&spec, 8);
        let cfg = SolverConfig::cg(1e-12, 500);
        let base = solve_cg(&a, &LoadCase::new(vec![0.3, 0.7]).unwrap(), &cfg, None).unwrap();
        let scaled = solve_cg(&a, &LoadCase::new(vec![-0.9, -2.1]).unwrap(), &cfg, None).unwrap();
        let mut diff = base.solution.clone();
        diff.scale(-3.0);
        diff.add_scaled(-1.0, &scaled.solution);
        assert!(l2_norm(&diff) <= 1e-10 * l2_norm(&scaled.solution));
    }

    #[test]
    fn non_convergence_keeps_reports() {
        let spec = GridSpec::unit(&[15, 15]).unwrap();
        let a = random_tensor_field(&spec, 3);
        match effective_tensor(&a, &SolverConfig::cg(1e-12, 2)) {
            Err(Error::PartialSolve { reports, .. }) => assert_eq!(reports.len(), 2),
            other => panic!("expected a partial solve, got {other:?}"),
        }
    }
}
