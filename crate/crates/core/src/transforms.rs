//! Grid fields, their Fourier coefficients and the trigonometric toolbox.
//!
//! The discrete Fourier transform uses the normalization in which the
//! forward transform carries the factor `1/|N|`:
//!
//! ```text
//! u_hat(k) = 1/|N| sum_m u(x^m) exp(-2 pi i sum_a k_a m_a / N_a)
//! u(x^m)   =       sum_k u_hat(k) exp( 2 pi i sum_a k_a m_a / N_a)
//! ```
//!
//! so that `u_hat(k)` are exactly the Fourier coefficients of the
//! trigonometric polynomial interpolating `u` with respect to the basis
//! `phi_k(x) = exp(i pi <xi(k), x>)`. The backend FFT is unnormalized; the
//! scaling is applied here and never leaks out.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FreqIndex, GridSpec};

/// Imaginary parts below this fraction of `max(1, max |re|)` are dropped
/// after an inverse transform; larger residues are reported as errors.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Real field on the grid with `components` values per point.
///
/// Values are stored component-major: component `c` occupies
/// `values[c * |N| .. (c + 1) * |N|]` in the grid storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    components: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: &GridSpec, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * spec.total() {
            return Err(Error::Data(format!(
                "field of {} values does not match {} components on {} grid points",
                values.len(),
                components,
                spec.total()
            )));
        }
        Ok(GridField { spec: spec.clone(), components, values })
    }

    /// `d`-vector field.
    pub fn vector(spec: &GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::new(spec, spec.dim(), values)
    }

    pub fn zeros(spec: &GridSpec, components: usize) -> Self {
        GridField { spec: spec.clone(), components, values: vec![0.0; components * spec.total()] }
    }

    /// Field equal to `value` at every grid point.
    pub fn constant(spec: &GridSpec, value: &[f64]) -> Self {
        let n = spec.total();
        let mut values = Vec::with_capacity(n * value.len());
        for &v in value {
            values.extend(std::iter::repeat_n(v, n));
        }
        GridField { spec: spec.clone(), components: value.len(), values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.spec.total();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.spec.total();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Values at the grid point with flat index `point`.
    pub fn at(&self, point: usize) -> Vec<f64> {
        (0..self.components).map(|c| self.component(c)[point]).collect()
    }

    /// Discrete mean of every component (the `k = 0` coefficient).
    pub fn mean(&self) -> Vec<f64> {
        let n = self.spec.total() as f64;
        (0..self.components).map(|c| self.component(c).iter().sum::<f64>() / n).collect()
    }

    pub(crate) fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.spec != other.spec || self.components != other.components {
            Err(Error::SpecMismatch)
        } else {
            Ok(())
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &GridField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Adds the constant vector `value` at every grid point.
    pub fn add_constant(&mut self, value: &[f64]) {
        let n = self.spec.total();
        for (c, &v) in value.iter().enumerate() {
            self.values[c * n..(c + 1) * n].iter_mut().for_each(|x| *x += v);
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fourier coefficients of a grid field, indexed by the reduced lattice in
/// storage order and laid out component-major like [`GridField`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    spec: GridSpec,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(spec: &GridSpec, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if components == 0 || coeffs.len() != components * spec.total() {
            return Err(Error::Data(format!(
                "{} coefficients do not match {} components on {} modes",
                coeffs.len(),
                components,
                spec.total()
            )));
        }
        Ok(SpectralField { spec: spec.clone(), components, coeffs })
    }

    pub fn zeros(spec: &GridSpec, components: usize) -> Self {
        SpectralField {
            spec: spec.clone(),
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); components * spec.total()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.spec.total();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient of component `c` at `k`, or `None` outside the lattice.
    pub fn coeff(&self, c: usize, k: &FreqIndex) -> Option<Complex64> {
        let i = self.spec.linear_index(k).ok()?;
        Some(self.component(c)[i])
    }

    pub fn set_coeff(&mut self, c: usize, k: &FreqIndex, value: Complex64) -> Result<()> {
        let i = self.spec.linear_index(k)?;
        let n = self.spec.total();
        self.coeffs[c * n + i] = value;
        Ok(())
    }

    /// `max_k |c(-k) - conj(c(k))|` over all components.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.spec.total();
        let mut defect: f64 = 0.0;
        for (i, k) in self.spec.iter_lattice().enumerate() {
            let j = self.spec.linear_index_unchecked(k.neg().as_slice());
            for c in 0..self.components {
                let a = self.coeffs[c * n + i];
                let b = self.coeffs[c * n + j];
                defect = defect.max((b - a.conj()).norm());
            }
        }
        defect
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

/// Multidimensional FFT over the grid storage order, one 1-D plan per axis.
///
/// Both directions are unnormalized; [`dft_forward`] and [`dft_inverse`]
/// apply the `1/|N|` convention.
#[derive(Clone)]
pub struct FourierPlan {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan").field("shape", &self.shape).finish()
    }
}

impl FourierPlan {
    pub fn new(spec: &GridSpec) -> Self {
        let mut planner = planner().lock().unwrap_or_else(|e| e.into_inner());
        let shape = spec.shape().to_vec();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        FourierPlan { shape, forward, inverse }
    }

    fn total(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized forward transform of one grid-shaped block.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, true)
    }

    /// Unnormalized inverse transform of one grid-shaped block.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, false)
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let total = self.total();
        assert_eq!(data.len(), total, "block length does not match the grid");
        let mut buffer = Vec::new();
        let mut scratch = Vec::new();
        for axis in 0..self.shape.len() {
            let n = self.shape[axis];
            if n == 1 {
                continue;
            }
            let fft = if forward { &self.forward[axis] } else { &self.inverse[axis] };
            scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            let stride: usize = self.shape[axis + 1..].iter().product();
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let outer = total / (n * stride);
            buffer.resize(total, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                let base = o * n * stride;
                for i in 0..stride {
                    let line = &mut buffer[(o * stride + i) * n..(o * stride + i + 1) * n];
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride + i];
                    }
                }
            }
            fft.process_with_scratch(&mut buffer, &mut scratch);
            for o in 0..outer {
                let base = o * n * stride;
                for i in 0..stride {
                    let line = &buffer[(o * stride + i) * n..(o * stride + i + 1) * n];
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride + i] = *v;
                    }
                }
            }
        }
    }

    /// Forward DFT with the `1/|N|` normalization.
    pub fn forward(&self, u: &GridField) -> SpectralField {
        let n = u.spec.total();
        let scale = 1.0 / n as f64;
        let mut coeffs: Vec<Complex64> =
            u.values.iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
        for block in coeffs.chunks_mut(n) {
            self.forward_in_place(block);
        }
        SpectralField { spec: u.spec.clone(), components: u.components, coeffs }
    }

    /// Inverse DFT; fails when the result has a non-negligible imaginary part.
    pub fn inverse(&self, s: &SpectralField) -> Result<GridField> {
        let n = s.spec.total();
        let mut data = s.coeffs.clone();
        for block in data.chunks_mut(n) {
            self.inverse_in_place(block);
        }
        real_part_checked(&s.spec, s.components, data)
    }
}

fn real_part_checked(spec: &GridSpec, components: usize, data: Vec<Complex64>) -> Result<GridField> {
    let (max_re, max_im) = data
        .iter()
        .fold((0.0f64, 0.0f64), |(r, i), z| (r.max(z.re.abs()), i.max(z.im.abs())));
    if max_im > IMAG_RESIDUE_TOL * max_re.max(1.0) {
        return Err(Error::Data(format!(
            "inverse transform left an imaginary residue of {max_im:e} \
             (input is not Hermitian-symmetric)"
        )));
    }
    GridField::new(spec, components, data.into_iter().map(|z| z.re).collect())
}

/// Fourier coefficients `u_hat(k)` of the grid field `u`.
pub fn dft_forward(u: &GridField) -> SpectralField {
    FourierPlan::new(&u.spec).forward(u)
}

/// Grid values of the trigonometric polynomial with coefficients `s`.
pub fn dft_inverse(s: &SpectralField) -> Result<GridField> {
    FourierPlan::new(&s.spec).inverse(s)
}

/// Samples `f` at every grid point; `f` writes `components` values into its
/// output slice. Together with [`trig_eval`] this realizes the
/// interpolation operator `Q_N`.
pub fn interpolate<F>(spec: &GridSpec, components: usize, f: F) -> Result<GridField>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = spec.total();
    let d = spec.dim();
    let points = spec.grid_points();
    let mut values = vec![0.0; components * n];
    let mut out = vec![0.0; components];
    for p in 0..n {
        f(&points[p * d..(p + 1) * d], &mut out);
        for (c, &v) in out.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: spec.freq_index(p).0 });
            }
            values[c * n + p] = v;
        }
    }
    GridField::new(spec, components, values)
}

/// Scalar variant of [`interpolate`].
pub fn interpolate_scalar<F>(spec: &GridSpec, f: F) -> Result<GridField>
where
    F: Fn(&[f64]) -> f64,
{
    interpolate(spec, 1, |x, out| out[0] = f(x))
}

/// Orthogonal projection `P_N`: keeps the coefficients indexed by the
/// reduced lattice of `spec` and discards every other mode.
pub fn truncate<I>(coeffs: I, spec: &GridSpec) -> SpectralField
where
    I: IntoIterator<Item = (FreqIndex, Complex64)>,
{
    let mut out = SpectralField::zeros(spec, 1);
    for (k, v) in coeffs {
        if spec.contains(&k) {
            let i = spec.linear_index_unchecked(k.as_slice());
            out.coeffs[i] += v;
        }
    }
    out
}

/// Per-axis phase tables `exp(i pi xi_a(k) x_a)` in storage order.
fn phase_tables(spec: &GridSpec, x: &[f64]) -> Vec<Vec<Complex64>> {
    (0..spec.dim())
        .map(|a| {
            spec.axis_frequencies(a)
                .into_iter()
                .map(|xi| Complex64::from_polar(1.0, std::f64::consts::PI * xi * x[a]))
                .collect()
        })
        .collect()
}

/// Evaluates `sum_k s_hat(k) phi_k(x)` at an arbitrary point, one real value
/// per component.
pub fn trig_eval(s: &SpectralField, x: &[f64]) -> Vec<f64> {
    let spec = &s.spec;
    assert_eq!(x.len(), spec.dim(), "point dimension does not match the grid");
    let tables = phase_tables(spec, x);
    let n = spec.total();
    let shape = spec.shape();
    let d = spec.dim();
    let mut sums = vec![Complex64::new(0.0, 0.0); s.components];
    // prefix products of the phase tables, updated odometer-style
    let mut slot = vec![0usize; d];
    let mut prefix = vec![Complex64::new(1.0, 0.0); d + 1];
    for a in 0..d {
        prefix[a + 1] = prefix[a] * tables[a][0];
    }
    for i in 0..n {
        let phase = prefix[d];
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum += s.coeffs[c * n + i] * phase;
        }
        // advance
        let mut a = d;
        while a > 0 {
            a -= 1;
            slot[a] += 1;
            if slot[a] < shape[a] {
                break;
            }
            slot[a] = 0;
        }
        for b in a..d {
            prefix[b + 1] = prefix[b] * tables[b][slot[b]];
        }
    }
    sums.into_iter().map(|z| z.re).collect()
}

/// Spectral weights `||xi_(k)||^(2 order)` in storage order.
pub fn sobolev_weights(spec: &GridSpec, order: f64) -> Vec<f64> {
    spec.iter_lattice()
        .map(|k| {
            let xi = spec.underlined_frequency(&k);
            xi.iter().map(|v| v * v).sum::<f64>().powf(order)
        })
        .collect()
}

/// `H^s` norm `(sum_k ||xi_(k)||^(2s) ||u_hat(k)||^2)^(1/2)`, with the
/// all-ones vector standing in for `xi(0)` (so the mean mode has weight
/// `d^(s/2)` under the Euclidean norm).
pub fn sobolev_norm(s: &SpectralField, order: f64) -> Result<f64> {
    if !(order >= 0.0) {
        return Err(Error::Domain(format!("Sobolev order must be non-negative, got {order}")));
    }
    let n = s.spec.total();
    let weights = sobolev_weights(&s.spec, order);
    let mut sum = 0.0;
    for c in 0..s.components {
        for (w, z) in weights.iter().zip(&s.coeffs[c * n..(c + 1) * n]) {
            sum += w * z.norm_sqr();
        }
    }
    Ok(sum.sqrt())
}

/// Discrete mean inner product `1/|N| sum_k <u^k, v^k>`.
pub fn l2_inner(u: &GridField, v: &GridField) -> Result<f64> {
    u.check_compatible(v)?;
    Ok(dot(&u.values, &v.values) / u.spec.total() as f64)
}

/// Norm induced by [`l2_inner`].
pub fn l2_norm(u: &GridField) -> f64 {
    (dot(&u.values, &u.values) / u.spec.total() as f64).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plancherel inner product `sum_k Re <a_hat(k), b_hat(k)>`.
pub fn spectral_inner(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    if a.spec != b.spec || a.components != b.components {
        return Err(Error::SpecMismatch);
    }
    Ok(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x * y.conj()).re).sum())
}

/// Zero-padding of `s` onto the lattice of the finer grid `fine`; the
/// trigonometric polynomial represented is unchanged.
pub fn prolong(s: &SpectralField, fine: &GridSpec) -> Result<SpectralField> {
    let coarse = &s.spec;
    if fine.half_periods() != coarse.half_periods()
        || fine.dim() != coarse.dim()
        || fine.shape().iter().zip(coarse.shape()).any(|(f, c)| f < c)
    {
        return Err(Error::Domain(format!(
            "cannot prolong shape {:?} onto shape {:?}",
            coarse.shape(),
            fine.shape()
        )));
    }
    let mut out = SpectralField::zeros(fine, s.components);
    let (nc, nf) = (coarse.total(), fine.total());
    for (i, k) in coarse.iter_lattice().enumerate() {
        let j = fine.linear_index_unchecked(k.as_slice());
        for c in 0..s.components {
            out.coeffs[c * nf + j] = s.coeffs[c * nc + i];
        }
    }
    Ok(out)
}

/// Truncation of `s` onto the lattice of the coarser grid `coarse`.
pub fn restrict(s: &SpectralField, coarse: &GridSpec) -> Result<SpectralField> {
    let fine = &s.spec;
    if fine.half_periods() != coarse.half_periods()
        || fine.dim() != coarse.dim()
        || fine.shape().iter().zip(coarse.shape()).any(|(f, c)| f < c)
    {
        return Err(Error::Domain(format!(
            "cannot restrict shape {:?} onto shape {:?}",
            fine.shape(),
            coarse.shape()
        )));
    }
    let mut out = SpectralField::zeros(coarse, s.components);
    let (nc, nf) = (coarse.total(), fine.total());
    for (i, k) in coarse.iter_lattice().enumerate() {
        let j = fine.linear_index_unchecked(k.as_slice());
        for c in 0..s.components {
            out.coeffs[c * nc + i] = s.coeffs[c * nf + j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(spec: &GridSpec, comps: usize, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..comps * spec.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridField::new(spec, comps, v).unwrap()
    }

    fn mode(spec: &GridSpec, k: &[i64]) -> (GridField, GridField) {
        let xi = spec.frequency(&FreqIndex::new(k.to_vec()));
        let re = interpolate_scalar(spec, |x| {
            (PI * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).cos()
        })
        .unwrap();
        let im = interpolate_scalar(spec, |x| {
            (PI * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).sin()
        })
        .unwrap();
        (re, im)
    }

    #[test]
    fn constant_has_dc_only_spectrum() {
        let spec = GridSpec::new(&[1.0, 2.5], &[5, 7]).unwrap();
        let u = GridField::constant(&spec, &[3.0, -1.5]);
        let s = dft_forward(&u);
        for (i, k) in spec.iter_lattice().enumerate() {
            let expect = if k.is_zero() { [3.0, -1.5] } else { [0.0, 0.0] };
            for c in 0..2 {
                assert!((s.component(c)[i] - Complex64::new(expect[c], 0.0)).norm() < 1e-15);
            }
        }
        let back = dft_inverse(&s).unwrap();
        assert!(back.values().iter().zip(u.values()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn single_basis_mode_is_unit_coefficient() {
        // the real part of phi_1 has coefficients 1/2 at k = +-1
        let spec = GridSpec::unit(&[3]).unwrap();
        let (re, im) = mode(&spec, &[1]);
        let (sr, si) = (dft_forward(&re), dft_forward(&im));
        // phi_1 = re + i im
        let c = |k: i64| {
            let k = FreqIndex::new([k]);
            sr.coeff(0, &k).unwrap() + Complex64::i() * si.coeff(0, &k).unwrap()
        };
        assert!((c(1) - 1.0).norm() < 1e-15);
        assert!(c(0).norm() < 1e-15);
        assert!(c(-1).norm() < 1e-15);
    }

    #[test]
    fn cosine_mode_from_symmetric_pair() {
        let spec = GridSpec::new(&[1.5], &[5]).unwrap();
        let mut s = SpectralField::zeros(&spec, 1);
        s.set_coeff(0, &FreqIndex::new([1]), Complex64::new(0.5, 0.0)).unwrap();
        s.set_coeff(0, &FreqIndex::new([-1]), Complex64::new(0.5, 0.0)).unwrap();
        let u = dft_inverse(&s).unwrap();
        for (i, k) in spec.iter_lattice().enumerate() {
            let x = spec.grid_point(&k).unwrap()[0];
            assert!((u.values()[i] - (PI * x / 1.5).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let spec = GridSpec::unit(&[5]).unwrap();
        let mut s = SpectralField::zeros(&spec, 1);
        s.set_coeff(0, &FreqIndex::new([1]), Complex64::new(1.0, 0.0)).unwrap();
        assert!(s.hermitian_defect() > 0.5);
        assert!(matches!(dft_inverse(&s), Err(Error::Data(_))));
    }

    #[test]
    fn round_trip_and_hermitian_symmetry() {
        for (i, shape) in [vec![1], vec![9], vec![5, 7], vec![3, 5, 7], vec![27, 9]].iter().enumerate() {
            let spec = GridSpec::unit(shape).unwrap();
            let u = random_field(&spec, spec.dim(), i as u64);
            let s = dft_forward(&u);
            assert!(s.hermitian_defect() < 1e-15);
            let back = dft_inverse(&s).unwrap();
            let err = back.values().iter().zip(u.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-13 * u.max_abs(), "shape {shape:?}: {err}");
        }
    }

    #[test]
    fn interpolation_of_lattice_mode_is_exact() {
        let spec = GridSpec::unit(&[3]).unwrap();
        let (re, _) = mode(&spec, &[1]);
        let s = dft_forward(&re);
        for x in [-0.9, -0.3, 0.1, 0.77] {
            assert!((trig_eval(&s, &[x])[0] - (PI * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn aliasing_folds_mode_back_into_lattice() {
        // phi_4 sampled on N = 3 is indistinguishable from phi_1
        let spec = GridSpec::unit(&[3]).unwrap();
        let (re4, im4) = mode(&spec, &[4]);
        let (re1, im1) = mode(&spec, &[1]);
        let d = |a: &GridField, b: &GridField| {
            a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        assert!(d(&re4, &re1) < 1e-13);
        assert!(d(&im4, &im1) < 1e-13);
    }

    #[test]
    fn interpolate_rejects_non_finite() {
        let spec = GridSpec::unit(&[5]).unwrap();
        let r = interpolate_scalar(&spec, |x| if x[0] == 0.0 { f64::NAN } else { 1.0 });
        assert!(matches!(r, Err(Error::NonFinite { index }) if index == vec![0]));
    }

    #[test]
    fn truncation() {
        let spec = GridSpec::unit(&[3]).unwrap();
        let outside = truncate(
            [(FreqIndex::new([4]), Complex64::new(1.0, 0.0)), (FreqIndex::new([-4]), Complex64::new(1.0, 0.0))],
            &spec,
        );
        assert!(outside.coeffs().iter().all(|z| z.norm() == 0.0));

        let inside = vec![
            (FreqIndex::new([1]), Complex64::new(0.3, 0.2)),
            (FreqIndex::new([-1]), Complex64::new(0.3, -0.2)),
            (FreqIndex::new([0]), Complex64::new(1.0, 0.0)),
        ];
        let t = truncate(inside.clone(), &spec);
        for (k, v) in &inside {
            assert_eq!(t.coeff(0, k).unwrap(), *v);
        }

        let mixed = inside.into_iter().chain([
            (FreqIndex::new([2]), Complex64::new(0.5, 0.0)),
            (FreqIndex::new([-2]), Complex64::new(0.5, 0.0)),
        ]);
        let input_norm: f64 = (1.0f64 + 2.0 * 0.13 + 0.5).sqrt();
        let t = truncate(mixed, &spec);
        assert!(sobolev_norm(&t, 0.0).unwrap() <= input_norm);
    }

    #[test]
    fn trig_eval_matches_grid_values() {
        let spec = GridSpec::new(&[1.0, 0.7], &[5, 7]).unwrap();
        let u = random_field(&spec, 2, 7);
        let s = dft_forward(&u);
        for (i, k) in spec.iter_lattice().enumerate() {
            let x = spec.grid_point(&k).unwrap();
            let v = trig_eval(&s, &x);
            assert!((v[0] - u.component(0)[i]).abs() < 1e-12);
            assert!((v[1] - u.component(1)[i]).abs() < 1e-12);
        }
        let c = dft_forward(&GridField::constant(&spec, &[2.5]));
        assert!((trig_eval(&c, &[0.123, -0.4])[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn trig_eval_quarter_period_phase() {
        // s = phi_1 (complex), evaluated at x = Y/2: exp(i pi/2) = i, real part 0;
        // the real mode cos(pi x / Y) vanishes there and sin gives 1
        let spec = GridSpec::new(&[2.0], &[5]).unwrap();
        let mut s = SpectralField::zeros(&spec, 1);
        s.set_coeff(0, &FreqIndex::new([1]), Complex64::new(0.0, -0.5)).unwrap();
        s.set_coeff(0, &FreqIndex::new([-1]), Complex64::new(0.0, 0.5)).unwrap();
        assert!((trig_eval(&s, &[1.0])[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sobolev_norms() {
        let spec = GridSpec::unit(&[9]).unwrap();
        let u = random_field(&spec, 1, 3);
        let s = dft_forward(&u);
        assert!((sobolev_norm(&s, 0.0).unwrap() - l2_norm(&u)).abs() < 1e-14);
        assert!(sobolev_norm(&s, -1.0).is_err());

        let mut m = SpectralField::zeros(&spec, 1);
        m.set_coeff(0, &FreqIndex::new([3]), Complex64::new(1.0, 0.0)).unwrap();
        for order in [0.0, 0.5, 1.0, 2.0] {
            assert!((sobolev_norm(&m, order).unwrap() - 3f64.powf(order)).abs() < 1e-12);
        }

        let c = dft_forward(&GridField::constant(&spec, &[-2.0]));
        for order in [0.0, 1.0, 3.0] {
            assert!((sobolev_norm(&c, order).unwrap() - 2.0).abs() < 1e-14);
        }
        // in 2-D the mean mode is weighted by ||(1, 1)||^s
        let spec2 = GridSpec::unit(&[3, 3]).unwrap();
        let c2 = dft_forward(&GridField::constant(&spec2, &[1.0]));
        assert!((sobolev_norm(&c2, 2.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inner_products() {
        let spec = GridSpec::unit(&[5]).unwrap();
        let (c1, s1) = mode(&spec, &[1]);
        let (c2, s2) = mode(&spec, &[2]);
        for a in [&c1, &s1] {
            for b in [&c2, &s2] {
                assert!(l2_inner(a, b).unwrap().abs() < 1e-15);
            }
        }
        let zero = GridField::zeros(&spec, 1);
        assert_eq!(l2_inner(&zero, &zero).unwrap(), 0.0);
        assert!(l2_inner(&c1, &c1).unwrap() > 0.0);

        let other = GridSpec::unit(&[7]).unwrap();
        assert!(matches!(l2_inner(&c1, &GridField::zeros(&other, 1)), Err(Error::SpecMismatch)));

        let spec = GridSpec::unit(&[7, 5]).unwrap();
        let u = random_field(&spec, 2, 11);
        let v = random_field(&spec, 2, 12);
        let lhs = l2_inner(&u, &v).unwrap();
        let rhs = spectral_inner(&dft_forward(&u), &dft_forward(&v)).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn prolong_then_restrict_is_identity() {
        let coarse = GridSpec::unit(&[5, 3]).unwrap();
        let fine = GridSpec::unit(&[15, 9]).unwrap();
        let u = random_field(&coarse, 2, 5);
        let s = dft_forward(&u);
        let p = prolong(&s, &fine).unwrap();
        let up = dft_inverse(&p).unwrap();
        // same polynomial: mean-square norms agree
        assert!((l2_norm(&up) - l2_norm(&u)).abs() < 1e-13);
        assert_eq!(restrict(&p, &coarse).unwrap(), s);
        assert!(prolong(&p, &coarse).is_err());
    }
}
