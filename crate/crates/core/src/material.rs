//! Coefficient fields `A(x)` sampled on the grid.
//!
//! Each grid point carries a symmetric positive-definite `d x d` tensor stored
//! in the packed upper-triangle layout of [`crate::linalg::packed_index`],
//! point-major in grid storage order. The ellipticity bounds `c_A <= C_A` are
//! the extreme pointwise eigenvalues, computed once at construction.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{self, packed_index, packed_len};
use crate::transforms::GridField;

/// Pointwise asymmetry tolerated in sampled tensors before they are rejected.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    spec: GridSpec,
    tensors: Vec<f64>,
    isotropic: bool,
    lower: f64,
    upper: f64,
}

impl CoefficientField {
    /// Validates packed tensors (`d(d+1)/2` per point) and computes bounds.
    pub fn from_packed(spec: &GridSpec, tensors: Vec<f64>) -> Result<Self> {
        let d = spec.dim();
        let m = packed_len(d);
        if tensors.len() != m * spec.total() {
            return Err(Error::Data(format!(
                "{} tensor entries given, expected {} for {} grid points",
                tensors.len(),
                m * spec.total(),
                spec.total()
            )));
        }
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        let mut isotropic = true;
        for (p, t) in tensors.chunks(m).enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: spec.freq_index(p).0 });
            }
            let ev = linalg::sym_eigenvalues(d, t);
            if !(ev[0] > 0.0) {
                return Err(Error::NotSpd {
                    index: spec.freq_index(p).0,
                    reason: format!("smallest eigenvalue is {}", ev[0]),
                });
            }
            lower = lower.min(ev[0]);
            upper = upper.max(ev[d - 1]);
            isotropic &= (0..d).all(|i| {
                (i..d).all(|j| t[packed_index(d, i, j)] == if i == j { t[0] } else { 0.0 })
            });
        }
        Ok(CoefficientField { spec: spec.clone(), tensors, isotropic, lower, upper })
    }

    /// `a(x) I` from one scalar per grid point.
    pub fn isotropic(spec: &GridSpec, values: &[f64]) -> Result<Self> {
        let d = spec.dim();
        if values.len() != spec.total() {
            return Err(Error::Data(format!(
                "{} scalar values given for {} grid points",
                values.len(),
                spec.total()
            )));
        }
        let m = packed_len(d);
        let mut tensors = vec![0.0; m * spec.total()];
        for (p, &a) in values.iter().enumerate() {
            for i in 0..d {
                tensors[p * m + packed_index(d, i, i)] = a;
            }
        }
        Self::from_packed(spec, tensors)
    }

    /// The same full `d x d` tensor at every point.
    pub fn homogeneous(spec: &GridSpec, matrix: &[f64]) -> Result<Self> {
        sample_analytic(spec, |_| matrix.to_vec())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Packed tensors, point-major.
    pub fn packed(&self) -> &[f64] {
        &self.tensors
    }

    /// Packed tensor at grid point `p`.
    pub fn tensor_at(&self, p: usize) -> &[f64] {
        let m = packed_len(self.dim());
        &self.tensors[p * m..(p + 1) * m]
    }

    /// Full row-major tensor at grid point `p`.
    pub fn full_at(&self, p: usize) -> Vec<f64> {
        linalg::unpack(self.dim(), self.tensor_at(p))
    }

    /// Whether every tensor is a multiple of the identity.
    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    /// `c_A`.
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    /// `C_A`.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    /// `rho_A = C_A / c_A`.
    pub fn contrast(&self) -> f64 {
        self.upper / self.lower
    }

    /// Arithmetic (Voigt) mean over the grid, full row-major.
    pub fn arithmetic_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let m = packed_len(d);
        let mut acc = vec![0.0; m];
        for t in self.tensors.chunks(m) {
            for (a, v) in acc.iter_mut().zip(t) {
                *a += v;
            }
        }
        let n = self.spec.total() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        linalg::unpack(d, &acc)
    }

    /// Harmonic (Reuss) mean `<a^-1>^-1` of an isotropic field.
    pub fn harmonic_mean(&self) -> Option<f64> {
        if !self.isotropic {
            return None;
        }
        let m = packed_len(self.dim());
        let s: f64 = self.tensors.chunks(m).map(|t| 1.0 / t[0]).sum();
        Some(self.spec.total() as f64 / s)
    }

    /// Pointwise product `A_N u`.
    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        let mut out = GridField::zeros(u.spec(), u.components());
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// Pointwise product written into `out`.
    pub fn apply_into(&self, u: &GridField, out: &mut GridField) -> Result<()> {
        let d = self.dim();
        if u.spec() != &self.spec || u.components() != d || out.spec() != &self.spec || out.components() != d {
            return Err(Error::SpecMismatch);
        }
        let n = self.spec.total();
        let m = packed_len(d);
        let src = u.values();
        let dst = out.values_mut();
        if self.isotropic {
            for c in 0..d {
                for p in 0..n {
                    dst[c * n + p] = self.tensors[p * m] * src[c * n + p];
                }
            }
            return Ok(());
        }
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        for p in 0..n {
            for c in 0..d {
                x[c] = src[c * n + p];
            }
            linalg::sym_matvec(d, &self.tensors[p * m..(p + 1) * m], &x, &mut y);
            for c in 0..d {
                dst[c * n + p] = y[c];
            }
        }
        Ok(())
    }
}

/// Samples a symmetric-tensor-valued function (full row-major `d x d`) at
/// the grid points.
pub fn sample_analytic<F>(spec: &GridSpec, mut f: F) -> Result<CoefficientField>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let d = spec.dim();
    let points = spec.grid_points();
    let mut tensors = Vec::with_capacity(packed_len(d) * spec.total());
    for p in 0..spec.total() {
        let full = f(&points[p * d..(p + 1) * d]);
        if full.len() != d * d {
            return Err(Error::Domain(format!(
                "sampler returned {} entries, expected {}",
                full.len(),
                d * d
            )));
        }
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: spec.freq_index(p).0 });
        }
        if linalg::asymmetry(d, &full) > SYMMETRY_TOL {
            return Err(Error::NotSpd {
                index: spec.freq_index(p).0,
                reason: "tensor is not symmetric".into(),
            });
        }
        tensors.extend(linalg::pack(d, &full));
    }
    CoefficientField::from_packed(spec, tensors)
}

/// Samples a scalar coefficient `a(x)`, giving `A(x) = a(x) I`.
pub fn sample_isotropic<F>(spec: &GridSpec, f: F) -> Result<CoefficientField>
where
    F: Fn(&[f64]) -> f64,
{
    let d = spec.dim();
    let points = spec.grid_points();
    let values: Vec<f64> = (0..spec.total()).map(|p| f(&points[p * d..(p + 1) * d])).collect();
    CoefficientField::isotropic(spec, &values)
}

/// `A_N u`.
pub fn apply_a(a: &CoefficientField, u: &GridField) -> Result<GridField> {
    a.apply(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::l2_inner;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd_field(spec: &GridSpec, seed: u64) -> CoefficientField {
        let d = spec.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_analytic(spec, |_| {
            // B B^T + I
            let b: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum::<f64>();
                }
                m[i * d + i] += 1.0;
            }
            for i in 0..d {
                for j in 0..i {
                    m[i * d + j] = m[j * d + i];
                }
            }
            m
        })
        .unwrap()
    }

    #[test]
    fn constant_bounds() {
        let spec = GridSpec::unit(&[5, 5]).unwrap();
        let a = CoefficientField::homogeneous(&spec, &[5.0, 0.0, 0.0, 5.0]).unwrap();
        assert_eq!((a.lower_bound(), a.upper_bound(), a.contrast()), (5.0, 5.0, 1.0));
        assert!(a.is_isotropic());
    }

    #[test]
    fn sine_bounds_approach_range() {
        let mut prev = f64::INFINITY;
        for n in [5, 17, 65, 255] {
            let spec = GridSpec::unit(&[n]).unwrap();
            let a = sample_isotropic(&spec, |x| 3.0 + 2.0 * (std::f64::consts::PI * x[0]).sin()).unwrap();
            assert!(a.lower_bound() >= 1.0 && a.upper_bound() <= 5.0);
            let gap = (a.lower_bound() - 1.0) + (5.0 - a.upper_bound());
            assert!(gap <= prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn checkerboard_bounds() {
        let spec = GridSpec::unit(&[7, 7]).unwrap();
        let a = sample_isotropic(&spec, |x| if (x[0] >= 0.0) == (x[1] >= 0.0) { 1.0 } else { 100.0 }).unwrap();
        assert_eq!((a.lower_bound(), a.upper_bound()), (1.0, 100.0));
    }

    #[test]
    fn invalid_samples_carry_grid_index() {
        let spec = GridSpec::unit(&[5]).unwrap();
        let err = sample_isotropic(&spec, |x| if x[0] > 0.5 { -1.0 } else { 1.0 }).unwrap_err();
        assert!(matches!(err, Error::NotSpd { ref index, .. } if index == &vec![2]));
        assert!(err.is_data_error());
        let err = sample_isotropic(&spec, |x| if x[0] < -0.5 { f64::INFINITY } else { 1.0 }).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref index } if index == &vec![-2]));

        let spec = GridSpec::unit(&[3, 3]).unwrap();
        let err = sample_analytic(&spec, |_| vec![1.0, 0.5, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotSpd { .. }));
        assert!(CoefficientField::isotropic(&spec, &[1.0; 8]).is_err());
    }

    #[test]
    fn apply_is_symmetric_and_coercive() {
        let spec = GridSpec::unit(&[5, 3]).unwrap();
        let a = random_spd_field(&spec, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let u = GridField::vector(&spec, (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let v = GridField::vector(&spec, (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let au = a.apply(&u).unwrap();
            let av = a.apply(&v).unwrap();
            assert!((l2_inner(&au, &v).unwrap() - l2_inner(&u, &av).unwrap()).abs() < 1e-13);
            let uu = l2_inner(&u, &u).unwrap();
            let auu = l2_inner(&au, &u).unwrap();
            assert!(auu >= a.lower_bound() * uu * (1.0 - 1e-12));
            assert!(auu <= a.upper_bound() * uu * (1.0 + 1e-12));
        }
        let id = CoefficientField::homogeneous(&spec, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let u = GridField::vector(&spec, (0..30).map(|i| i as f64).collect()).unwrap();
        assert_eq!(id.apply(&u).unwrap(), u);
    }

    #[test]
    fn apply_is_block_diagonal() {
        let spec = GridSpec::unit(&[3, 3, 3]).unwrap();
        let a = random_spd_field(&spec, 5);
        let n = spec.total();
        let base = GridField::vector(&spec, (0..3 * n).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut bumped = base.clone();
        bumped.values_mut()[n + 13] += 1.0;
        let (a0, a1) = (a.apply(&base).unwrap(), a.apply(&bumped).unwrap());
        for p in 0..n {
            let changed = (0..3).any(|c| a0.values()[c * n + p] != a1.values()[c * n + p]);
            assert_eq!(changed, p == 13, "point {p}");
        }
    }

    #[test]
    fn rayleigh_quotients_within_bounds() {
        let spec = GridSpec::unit(&[3, 5, 3]).unwrap();
        let a = random_spd_field(&spec, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 0..spec.total() {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut av = vec![0.0; 3];
            linalg::sym_matvec(3, a.tensor_at(p), &v, &mut av);
            let q = av.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
            assert!(q >= a.lower_bound() * (1.0 - 1e-12) && q <= a.upper_bound() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn means() {
        let spec = GridSpec::unit(&[3]).unwrap();
        let a = CoefficientField::isotropic(&spec, &[1.0, 2.0, 4.0]).unwrap();
        assert!((a.arithmetic_mean()[0] - 7.0 / 3.0).abs() < 1e-15);
        assert!((a.harmonic_mean().unwrap() - 3.0 / 1.75).abs() < 1e-15);
    }
}
