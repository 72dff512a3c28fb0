//! Built-in analytic coefficient families, so that benchmarks and the CLI
//! run without external data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::material::{sample_isotropic, CoefficientField};

/// Smoothness class of a coefficient family, declared rather than measured.
/// Point-wise vector-valued function of `x`.
pub type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Analytic,
    Sobolev(f64),
    /// Piecewise constant with jumps; convergence rates degrade.
    Discontinuous,
}

impl Regularity {
    pub fn is_low(&self) -> bool {
        matches!(self, Regularity::Discontinuous)
    }
}

/// Isotropic coefficient families `A(x) = a(x) I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `a = value`.
    Homogeneous { value: f64 },
    /// Laminate `a = mean + amplitude sin(pi x_1 / Y_1)`.
    Sine { mean: f64, amplitude: f64 },
    /// Smooth bump `a = 1 + (contrast - 1) prod_a ((1 + cos(pi x_a / Y_a)) / 2)^4`.
    SmoothInclusion { contrast: f64 },
    /// Two-phase checkerboard: `a1` where an even number of coordinates is
    /// negative (half-open quadrants, `x = 0` counts as non-negative), `a2`
    /// elsewhere.
    Checkerboard { a1: f64, a2: f64 },
    /// Two-phase ball `sum (x_a / Y_a)^2 < radius^2` of value `contrast` in a
    /// unit matrix.
    Inclusion { contrast: f64, radius: f64 },
}

impl Family {
    /// `3 + 2 sin(pi x_1)`, whose effective coefficient is `sqrt(5)`.
    pub const SINE_BENCHMARK: Family = Family::Sine { mean: 3.0, amplitude: 2.0 };

    pub fn name(&self) -> &'static str {
        match self {
            Family::Homogeneous { .. } => "homogeneous",
            Family::Sine { .. } => "sine",
            Family::SmoothInclusion { .. } => "smooth-inclusion",
            Family::Checkerboard { .. } => "checkerboard",
            Family::Inclusion { .. } => "inclusion",
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            Family::Homogeneous { .. } | Family::Sine { .. } | Family::SmoothInclusion { .. } => {
                Regularity::Analytic
            }
            Family::Checkerboard { .. } | Family::Inclusion { .. } => Regularity::Discontinuous,
        }
    }

    /// Scalar coefficient at `x` for a cell of half-periods `y`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Family::Homogeneous { value } => value,
            Family::Sine { mean, amplitude } => mean + amplitude * (PI * x[0] / y[0]).sin(),
            Family::SmoothInclusion { contrast } => {
                let bump: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(x, y)| (0.5 * (1.0 + (PI * x / y).cos())).powi(4))
                    .product();
                1.0 + (contrast - 1.0) * bump
            }
            Family::Checkerboard { a1, a2 } => {
                let negatives = x.iter().filter(|&&v| v < 0.0).count();
                if negatives % 2 == 0 {
                    a1
                } else {
                    a2
                }
            }
            Family::Inclusion { contrast, radius } => {
                let r2: f64 = x.iter().zip(y).map(|(x, y)| (x / y) * (x / y)).sum();
                if r2 < radius * radius {
                    contrast
                } else {
                    1.0
                }
            }
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> Result<CoefficientField> {
        if matches!(self, Family::Checkerboard { .. }) && spec.dim() < 2 {
            return Err(Error::Domain("the checkerboard family needs d >= 2".into()));
        }
        let y = spec.half_periods().to_vec();
        sample_isotropic(spec, |x| self.value(x, &y))
    }

    /// Exact fluctuation field `e~(x)` for load `e`, where known in closed
    /// form (homogeneous media and the sine laminate).
    pub fn exact_fluctuation(&self, load: &[f64], y: &[f64]) -> Option<VectorFn> {
        let d = load.len();
        match *self {
            Family::Homogeneous { .. } => Some(Box::new(move |_| vec![0.0; d])),
            Family::Sine { mean, amplitude } => {
                let harmonic = (mean * mean - amplitude * amplitude).sqrt();
                let (e1, y1) = (load[0], y[0]);
                Some(Box::new(move |x: &[f64]| {
                    let a = mean + amplitude * (PI * x[0] / y1).sin();
                    let mut out = vec![0.0; d];
                    out[0] = e1 * (harmonic / a - 1.0);
                    out
                }))
            }
            _ => None,
        }
    }

    /// Effective tensor in closed form, where known (full row-major).
    pub fn exact_effective(&self, d: usize) -> Option<Vec<f64>> {
        let diag = |v: Vec<f64>| {
            let mut m = vec![0.0; d * d];
            for (i, x) in v.into_iter().enumerate() {
                m[i * d + i] = x;
            }
            m
        };
        match *self {
            Family::Homogeneous { value } => Some(diag(vec![value; d])),
            Family::Sine { mean, amplitude } => {
                let mut v = vec![mean; d];
                v[0] = (mean * mean - amplitude * amplitude).sqrt();
                Some(diag(v))
            }
            Family::Checkerboard { a1, a2 } if d == 2 => Some(diag(vec![(a1 * a2).sqrt(); 2])),
            _ => None,
        }
    }

    /// The same family with its contrast parameter replaced, for contrast
    /// studies.
    pub fn with_contrast(&self, rho: f64) -> Family {
        match *self {
            Family::Homogeneous { .. } => Family::Homogeneous { value: 1.0 },
            Family::Sine { .. } => {
                // mean +- amplitude with ratio rho
                Family::Sine { mean: (rho + 1.0) / 2.0, amplitude: (rho - 1.0) / 2.0 }
            }
            Family::SmoothInclusion { .. } => Family::SmoothInclusion { contrast: rho },
            Family::Checkerboard { .. } => Family::Checkerboard { a1: 1.0, a2: rho },
            Family::Inclusion { radius, .. } => Family::Inclusion { contrast: rho, radius },
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Homogeneous { value } => write!(f, "homogeneous:{value}"),
            Family::Sine { mean, amplitude } => write!(f, "sine:{mean},{amplitude}"),
            Family::SmoothInclusion { contrast } => write!(f, "smooth-inclusion:{contrast}"),
            Family::Checkerboard { a1, a2 } => write!(f, "checkerboard:{a1},{a2}"),
            Family::Inclusion { contrast, radius } => write!(f, "inclusion:{contrast},{radius}"),
        }
    }
}

/// Parses `name[:p1,p2,...]`; omitted parameters take their defaults.
impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), p),
            None => (s.trim(), ""),
        };
        let params: Vec<f64> = params
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|e| Error::Format(format!("bad family parameter {p:?}: {e}"))))
            .collect::<Result<_>>()?;
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let (family, arity) = match name {
            "homogeneous" => (Family::Homogeneous { value: get(0, 1.0) }, 1),
            "sine" => (Family::Sine { mean: get(0, 3.0), amplitude: get(1, 2.0) }, 2),
            "smooth-inclusion" => (Family::SmoothInclusion { contrast: get(0, 10.0) }, 1),
            "checkerboard" => (Family::Checkerboard { a1: get(0, 1.0), a2: get(1, 100.0) }, 2),
            "inclusion" => (Family::Inclusion { contrast: get(0, 10.0), radius: get(1, 0.8) }, 2),
            other => return Err(Error::Format(format!("unknown material family {other:?}"))),
        };
        if params.len() > arity {
            return Err(Error::Format(format!("family {name} takes at most {arity} parameters")));
        }
        Ok(family)
    }
}
