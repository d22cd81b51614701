//! Scalar root finding used by the nested solvers.

use crate::error::{Error, Result};

/// Brent's method on a bracket with `f(a)` and `f(b)` of opposite sign (or zero).
pub fn brent(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, xtol: f64, what: &'static str) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Numeric(format!("{what}: non-finite value at bracket end")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence { what, iterations: 0, residual: fa.abs().min(fb.abs()), last: vec![a, b] });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Numeric(format!("{what}: non-finite value at {b}")));
        }
    }
    Err(Error::NoConvergence { what, iterations: 300, residual: fb.abs(), last: vec![b] })
}

/// Grows `hi` geometrically from `start` until `f(hi)` has the sign of `target_sign`.
pub fn expand_upper(mut f: impl FnMut(f64) -> f64, start: f64, target_sign: f64, what: &'static str) -> Result<f64> {
    let mut hi = start;
    for _ in 0..200 {
        let v = f(hi);
        if v.is_finite() && v.signum() == target_sign {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::NoConvergence { what, iterations: 200, residual: f64::NAN, last: vec![hi] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15, "sqrt2").unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let r = brent(|x| (x - 0.3).powi(3), -1.0, 1.0, 1e-14, "cubic").unwrap();
        assert!((r - 0.3).abs() < 1e-4);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, "none").is_err());
    }

    #[test]
    fn expands() {
        let hi = expand_upper(|x| 5.0 - x, 1.0, -1.0, "expand").unwrap();
        assert!(hi > 5.0);
    }
}
