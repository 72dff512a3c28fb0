//! Small dense symmetric matrices (d x d with d = dimension of the cell).

use std::f64::consts::PI;

/// Number of independent entries of a symmetric `d x d` matrix.
pub fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of `(i, j)` in the packed upper-triangle layout
/// `(0,0), (0,1), .., (0,d-1), (1,1), .., (d-1,d-1)`.
pub fn packed_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

pub fn pack(d: usize, full: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(packed_len(d));
    for i in 0..d {
        for j in i..d {
            out.push(full[i * d + j]);
        }
    }
    out
}

pub fn unpack(d: usize, packed: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = packed[packed_index(d, i, j)];
        }
    }
    out
}

/// Largest relative asymmetry `|m_ij - m_ji| / max|m|` of a full matrix.
pub fn asymmetry(d: usize, full: &[f64]) -> f64 {
    let scale = full.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            worst = worst.max((full[i * d + j] - full[j * d + i]).abs());
        }
    }
    worst / scale
}

/// Eigenvalues (ascending) of a symmetric matrix given in packed form.
///
/// Closed form for `d <= 3`; cyclic Jacobi rotations beyond that.
pub fn sym_eigenvalues(d: usize, packed: &[f64]) -> Vec<f64> {
    let mut ev = match d {
        1 => vec![packed[0]],
        2 => {
            let (a, b, c) = (packed[0], packed[1], packed[2]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        }
        3 => eig3(packed),
        _ => jacobi(d, unpack(d, packed)),
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn eig3(p: &[f64]) -> Vec<f64> {
    let (a11, a12, a13, a22, a23, a33) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    let off = a12 * a12 + a13 * a13 + a23 * a23;
    if off == 0.0 {
        return vec![a11, a22, a33];
    }
    let q = (a11 + a22 + a33) / 3.0;
    let (b11, b22, b33) = (a11 - q, a22 - q, a33 - q);
    let pp = ((b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * off) / 6.0).sqrt();
    // det(B / pp) / 2
    let det = b11 * (b22 * b33 - a23 * a23) - a12 * (a12 * b33 - a23 * a13)
        + a13 * (a12 * a23 - b22 * a13);
    let r = (det / (2.0 * pp * pp * pp)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * pp * phi.cos();
    let e3 = q + 2.0 * pp * (phi + 2.0 * PI / 3.0).cos();
    vec![e1, 3.0 * q - e1 - e3, e3]
}

fn jacobi(d: usize, mut a: Vec<f64>) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        let diag: f64 = (0..d).map(|i| a[i * d + i] * a[i * d + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k * d + p], a[k * d + q]);
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p * d + k], a[q * d + k]);
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

/// `y = M x` for packed symmetric `M`.
pub fn sym_matvec(d: usize, packed: &[f64], x: &[f64], y: &mut [f64]) {
    for i in 0..d {
        y[i] = (0..d).map(|j| packed[packed_index(d, i, j)] * x[j]).sum();
    }
}
