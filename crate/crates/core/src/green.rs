//! Green operator of the homogeneous reference medium and the discrete
//! Helmholtz projectors.
//!
//! In Fourier space the Green operator acts mode by mode through
//!
//! ```text
//! Gamma_hat(k) = xi(k) (x) xi(k) / <A0 xi(k), xi(k)>   (k != 0),   0 at k = 0.
//! ```
//!
//! `G0 = Gamma0 A0` is a projection onto the zero-mean curl-free fields `E_N`.
//! For a scalar reference `A0 = lambda I` it is orthogonal and independent
//! of `lambda`; the projectors onto `U_N` (constants) and `J_N` (zero-mean
//! divergence-free fields) complete the decomposition
//! `R^{d x N} = U_N + E_N + J_N`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FreqIndex, GridSpec};
use crate::linalg;
use crate::transforms::{l2_norm, FourierPlan, GridField, SpectralField};

/// Tolerance of the projector identities at desk-scale grids, roughly 100x the
/// accumulated FFT round-off.
pub const PROJECTOR_TOL: f64 = 1e-12;

/// Constant symmetric positive-definite reference tensor `A0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTensor {
    dim: usize,
    matrix: Vec<f64>,
    scalar: Option<f64>,
    min_eig: f64,
    max_eig: f64,
}

impl ReferenceTensor {
    /// Reference from a full row-major `d x d` matrix.
    pub fn new(dim: usize, matrix: &[f64]) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Domain(format!(
                "reference tensor needs {} entries, got {}",
                dim * dim,
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("reference tensor has non-finite entries".into()));
        }
        if linalg::asymmetry(dim, matrix) > 0.0 {
            return Err(Error::Domain("reference tensor must be symmetric".into()));
        }
        let ev = linalg::sym_eigenvalues(dim, &linalg::pack(dim, matrix));
        let (min_eig, max_eig) = (ev[0], ev[dim - 1]);
        if !(min_eig > 0.0) {
            return Err(Error::Domain(format!(
                "reference tensor must be positive definite, smallest eigenvalue is {min_eig}"
            )));
        }
        let is_scalar = (0..dim).all(|i| {
            (0..dim).all(|j| matrix[i * dim + j] == if i == j { matrix[0] } else { 0.0 })
        });
        Ok(ReferenceTensor {
            dim,
            matrix: matrix.to_vec(),
            scalar: is_scalar.then_some(matrix[0]),
            min_eig,
            max_eig,
        })
    }

    /// `lambda I`.
    pub fn scalar(dim: usize, lambda: f64) -> Result<Self> {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = lambda;
        }
        Self::new(dim, &m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// `Some(lambda)` when the tensor is `lambda I`.
    pub fn scalar_mode(&self) -> Option<f64> {
        self.scalar
    }

    /// `c_A0`.
    pub fn lower_bound(&self) -> f64 {
        self.min_eig
    }

    /// `C_A0`.
    pub fn upper_bound(&self) -> f64 {
        self.max_eig
    }

    /// `rho_A0 = C_A0 / c_A0`.
    pub fn contrast(&self) -> f64 {
        self.max_eig / self.min_eig
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            y[i] = (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum();
        }
    }
}

impl fmt::Display for ReferenceTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scalar {
            Some(l) => write!(f, "A0 = {l} I"),
            None => write!(f, "A0 = {:?}", self.matrix),
        }
    }
}

/// `Gamma_hat(k)` as a row-major `d x d` matrix.
pub fn gamma_hat(k: &FreqIndex, reference: &ReferenceTensor, spec: &GridSpec) -> Vec<f64> {
    let d = spec.dim();
    let mut out = vec![0.0; d * d];
    if k.is_zero() {
        return out;
    }
    let xi = spec.frequency(k);
    let mut a_xi = vec![0.0; d];
    reference.apply(&xi, &mut a_xi);
    let q: f64 = a_xi.iter().zip(&xi).map(|(a, b)| a * b).sum();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = xi[i] * xi[j] / q;
        }
    }
    out
}

/// Calls `f(linear_index, xi)` for every mode in storage order.
pub(crate) fn for_each_mode(spec: &GridSpec, mut f: impl FnMut(usize, &[f64])) {
    let d = spec.dim();
    let tables: Vec<Vec<f64>> = (0..d).map(|a| spec.axis_frequencies(a)).collect();
    let shape = spec.shape();
    let mut slot = vec![0usize; d];
    let mut xi: Vec<f64> = tables.iter().map(|t| t[0]).collect();
    for i in 0..spec.total() {
        f(i, &xi);
        let mut a = d;
        while a > 0 {
            a -= 1;
            slot[a] += 1;
            if slot[a] < shape[a] {
                xi[a] = tables[a][slot[a]];
                break;
            }
            slot[a] = 0;
            xi[a] = tables[a][0];
        }
    }
}

/// Which multiplier a [`GreenOperator`] application uses.
#[derive(Clone, Copy)]
enum Symbol {
    /// `Gamma_hat(k) A0`
    Projection,
    /// `Gamma_hat(k)`
    Green,
}

/// Per-mode rank-one factors `xi` and `w` so that the symbol is `xi w^T`.
#[derive(Debug, Clone)]
struct ModeCache {
    xi: Vec<f64>,
    projection: Vec<f64>,
    green: Vec<f64>,
}

/// Matrix-free Green operator on a fixed grid.
///
/// Symbols are recomputed per mode on every application unless
/// [`GreenOperator::with_cache`] is used, which stores `O(d |N|)` factors.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    spec: GridSpec,
    reference: ReferenceTensor,
    plan: FourierPlan,
    cache: Option<ModeCache>,
}

impl GreenOperator {
    pub fn new(spec: &GridSpec, reference: &ReferenceTensor) -> Result<Self> {
        if reference.dim() != spec.dim() {
            return Err(Error::Domain(format!(
                "{}-dimensional reference tensor on a {}-dimensional grid",
                reference.dim(),
                spec.dim()
            )));
        }
        Ok(GreenOperator {
            spec: spec.clone(),
            reference: reference.clone(),
            plan: FourierPlan::new(spec),
            cache: None,
        })
    }

    /// Precomputes the per-mode factors.
    pub fn with_cache(mut self) -> Self {
        let d = self.spec.dim();
        let n = self.spec.total();
        let mut cache = ModeCache {
            xi: vec![0.0; d * n],
            projection: vec![0.0; d * n],
            green: vec![0.0; d * n],
        };
        let reference = self.reference.clone();
        let mut a_xi = vec![0.0; d];
        for_each_mode(&self.spec, |i, xi| {
            if i == 0 {
                return;
            }
            reference.apply(xi, &mut a_xi);
            let q: f64 = a_xi.iter().zip(xi).map(|(a, b)| a * b).sum();
            for a in 0..d {
                cache.xi[i * d + a] = xi[a];
                cache.projection[i * d + a] = a_xi[a] / q;
                cache.green[i * d + a] = xi[a] / q;
            }
        });
        self.cache = Some(cache);
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn reference(&self) -> &ReferenceTensor {
        &self.reference
    }

    pub fn plan(&self) -> &FourierPlan {
        &self.plan
    }

    fn check_field(&self, u: &GridField) -> Result<()> {
        if u.spec() != &self.spec || u.components() != self.spec.dim() {
            Err(Error::SpecMismatch)
        } else {
            Ok(())
        }
    }

    /// Applies the symbol to spectral coefficients in place.
    fn multiply(&self, s: &mut SpectralField, symbol: Symbol) {
        let d = self.spec.dim();
        let n = self.spec.total();
        let coeffs = s.coeffs_mut();
        let mut u = vec![Complex64::new(0.0, 0.0); d];
        match &self.cache {
            Some(cache) => {
                let w_all = match symbol {
                    Symbol::Projection => &cache.projection,
                    Symbol::Green => &cache.green,
                };
                for i in 0..n {
                    let xi = &cache.xi[i * d..(i + 1) * d];
                    let w = &w_all[i * d..(i + 1) * d];
                    let mut t = Complex64::new(0.0, 0.0);
                    for a in 0..d {
                        t += coeffs[a * n + i] * w[a];
                    }
                    for a in 0..d {
                        coeffs[a * n + i] = t * xi[a];
                    }
                }
            }
            None => {
                let reference = &self.reference;
                let mut a_xi = vec![0.0; d];
                for_each_mode(&self.spec, |i, xi| {
                    if i == 0 {
                        for a in 0..d {
                            coeffs[a * n] = Complex64::new(0.0, 0.0);
                        }
                        return;
                    }
                    reference.apply(xi, &mut a_xi);
                    let q: f64 = a_xi.iter().zip(xi).map(|(a, b)| a * b).sum();
                    for a in 0..d {
                        u[a] = coeffs[a * n + i];
                    }
                    let t: Complex64 = match symbol {
                        Symbol::Projection => (0..d).map(|a| u[a] * a_xi[a]).sum::<Complex64>() / q,
                        Symbol::Green => (0..d).map(|a| u[a] * xi[a]).sum::<Complex64>() / q,
                    };
                    for a in 0..d {
                        coeffs[a * n + i] = t * xi[a];
                    }
                });
            }
        }
    }

    fn apply_symbol(&self, u: &GridField, symbol: Symbol) -> Result<GridField> {
        self.check_field(u)?;
        let mut s = self.plan.forward(u);
        self.multiply(&mut s, symbol);
        self.plan.inverse(&s)
    }

    /// `G0_N u = Gamma0_N A0 u`, the projection onto `E_N`.
    pub fn apply_g0(&self, u: &GridField) -> Result<GridField> {
        self.apply_symbol(u, Symbol::Projection)
    }

    /// `Gamma0_N u`.
    pub fn apply_gamma0(&self, u: &GridField) -> Result<GridField> {
        self.apply_symbol(u, Symbol::Green)
    }

    /// Projection onto `J_N`, defined as `u - mean(u) - G0_N u`.
    /// Requires a scalar reference so that `G0_N` is orthogonal.
    pub fn project_j(&self, u: &GridField) -> Result<GridField> {
        if self.reference.scalar_mode().is_none() {
            return Err(Error::Domain(format!(
                "the divergence-free projector needs a scalar reference tensor, got {}",
                self.reference
            )));
        }
        let e = self.apply_g0(u)?;
        let mut out = u.clone();
        let mean = u.mean();
        out.add_constant(&mean.iter().map(|m| -m).collect::<Vec<_>>());
        out.add_scaled(-1.0, &e);
        Ok(out)
    }
}

/// `G0_N u` with a freshly planned operator.
pub fn apply_g0(u: &GridField, reference: &ReferenceTensor) -> Result<GridField> {
    GreenOperator::new(u.spec(), reference)?.apply_g0(u)
}

/// `Gamma0_N u` with a freshly planned operator.
pub fn apply_gamma0(u: &GridField, reference: &ReferenceTensor) -> Result<GridField> {
    GreenOperator::new(u.spec(), reference)?.apply_gamma0(u)
}

/// Projection onto the constant fields `U_N`.
pub fn project_mean(u: &GridField) -> GridField {
    GridField::constant(u.spec(), &u.mean())
}

/// Projection onto `J_N`.
pub fn project_j(u: &GridField, reference: &ReferenceTensor) -> Result<GridField> {
    GreenOperator::new(u.spec(), reference)?.project_j(u)
}

/// How far a vector field is from `E_N`, both parts relative to `||u||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceDefect {
    /// Norm of the mean `|u_hat(0)|`.
    pub mean: f64,
    /// Norm of the components of `u_hat(k)` orthogonal to `xi(k)`, summed
    /// over `k != 0` in the Plancherel sense.
    pub curl: f64,
}

impl SubspaceDefect {
    pub fn max(&self) -> f64 {
        self.mean.max(self.curl)
    }
}

/// Measures membership of `u` in `E_N` (zero-mean and curl-free).
pub fn subspace_defect(u: &GridField) -> SubspaceDefect {
    let spec = u.spec();
    let d = spec.dim();
    let n = spec.total();
    let s = FourierPlan::new(spec).forward(u);
    let c = s.coeffs();
    let scale = l2_norm(u).max(f64::MIN_POSITIVE);
    let mean = (0..d).map(|a| c[a * n].norm_sqr()).sum::<f64>().sqrt();
    let mut curl = 0.0;
    for_each_mode(spec, |i, xi| {
        if i == 0 {
            return;
        }
        let q: f64 = xi.iter().map(|x| x * x).sum();
        let t: Complex64 = (0..d).map(|a| c[a * n + i] * xi[a]).sum::<Complex64>() / q;
        for a in 0..d {
            curl += (c[a * n + i] - t * xi[a]).norm_sqr();
        }
    });
    SubspaceDefect { mean: mean / scale, curl: curl.sqrt() / scale }
}
