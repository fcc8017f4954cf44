//! Small real-polynomial toolkit: convolution, roots, expansion from roots
//! and the Schur-Cohn stability test.
//!
//! Coefficient slices are in descending powers: `c[0] z^n + ... + c[n]`.

use nalgebra::{Complex, DMatrix};

pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Autocorrelation `v[n] * v[-n]` at non-negative lags.
pub fn autocorrelation(v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|lag| v.iter().zip(&v[lag..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Roots of a real polynomial from the eigenvalues of its balanced companion
/// matrix.
pub fn roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let start = match coeffs.iter().position(|c| *c != 0.0) {
        Some(i) => i,
        None => return Vec::new(),
    };
    let c = &coeffs[start..];
    let zeros_at_origin = c.iter().rev().take_while(|x| **x == 0.0).count();
    let c = &c[..c.len() - zeros_at_origin];
    let degree = c.len() - 1;
    let mut out = vec![Complex::new(0.0, 0.0); zeros_at_origin];
    if degree == 0 {
        return out;
    }
    let mut m = DMatrix::<f64>::zeros(degree, degree);
    for j in 0..degree {
        m[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..degree {
        m[(i, i - 1)] = 1.0;
    }
    balance(&mut m);
    out.extend(m.complex_eigenvalues().iter().copied());
    out
}

/// Parlett-Reinsch diagonal similarity scaling, applied in place.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let sum = col + row;
            let mut f = 1.0;
            let mut c = col;
            let mut r = row;
            while c < r / radix {
                c *= radix;
                r /= radix;
                f *= radix;
            }
            while c >= r * radix {
                c /= radix;
                r *= radix;
                f /= radix;
            }
            if (c + r) < 0.95 * sum {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Expands `prod (z - r_i)` and returns the real parts of the coefficients.
pub fn from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|x| x.re).collect()
}

/// Largest root modulus of `v[0] z^(n) + ... + v[n]`.
pub fn max_root_modulus(coeffs: &[f64]) -> f64 {
    roots(coeffs).iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Reflection coefficients of the step-down (Schur-Cohn) recursion.
///
/// Returns `None` when some reflection coefficient reaches magnitude one,
/// i.e. the polynomial has a root on or outside the unit circle.
pub fn reflection_coefficients(coeffs: &[f64]) -> Option<Vec<f64>> {
    if coeffs.is_empty() || coeffs[0] == 0.0 {
        return None;
    }
    let mut a: Vec<f64> = coeffs.iter().map(|c| c / coeffs[0]).collect();
    let mut ks = Vec::with_capacity(a.len().saturating_sub(1));
    while a.len() > 1 {
        let p = a.len() - 1;
        let k = a[p];
        if !(k.abs() < 1.0) {
            return None;
        }
        ks.push(k);
        let scale = 1.0 - k * k;
        a = (0..p).map(|i| (a[i] - k * a[p - i]) / scale).collect();
    }
    Some(ks)
}
