//! Scalar root finding: closed-form polynomials and bracketing.

use crate::error::{Error, Result};

/// Real roots of `a x² + b x + c`, ascending.
pub fn quadratic_real(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // Avoid cancellation: q has the sign of b.
    let q = -0.5 * (b + b.signum() * sq);
    let mut r = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    r.sort_by(f64::total_cmp);
    r
}

/// Real roots of `a x³ + b x² + c x + d`, ascending, each polished with one
/// Newton step. Repeated roots are returned once per multiplicity found by the
/// closed form.
pub fn cubic_real(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    if a == 0.0 {
        return quadratic_real(b, c, d);
    }
    let (b, c, d) = (b / a, c / a, d / a);
    // x = t - b/3 gives t³ + p t + q = 0.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if p == 0.0 && q == 0.0 {
        vec![0.0]
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (phi - std::f64::consts::TAU * k as f64 / 3.0).cos())
            .collect()
    };
    for t in roots.iter_mut() {
        let x = *t - shift;
        let f = ((x + b) * x + c) * x + d;
        let df = (3.0 * x + 2.0 * b) * x + c;
        *t = if df != 0.0 { x - f / df } else { x };
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Bisection on a sign change. `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Dense sign scan of `f` on `n` equal intervals, then bisection in each
/// bracketing interval. Exact zeros on grid nodes are reported once.
pub fn scan_roots<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, xtol: f64) -> Vec<f64> {
    let n = n.max(1);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (fs[i], fs[i + 1]);
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        if a == 0.0 {
            out.push(xs[i]);
        } else if b != 0.0 && a.signum() != b.signum() {
            if let Ok(r) = bisect(&mut f, xs[i], xs[i + 1], xtol) {
                out.push(r);
            }
        }
    }
    if fs[n] == 0.0 {
        out.push(xs[n]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cubic_three_roots() {
        // (x-1)(x-2)(x-3)
        let r = cubic_real(1.0, -6.0, 11.0, -6.0);
        assert_eq!(r.len(), 3);
        for (x, e) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_one_root() {
        let r = cubic_real(1.0, 0.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_needs_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn cubic_recovers_constructed_roots(r1 in -10.0..10.0f64, r2 in -10.0..10.0f64, r3 in -10.0..10.0f64, a in 0.1..5.0f64) {
            prop_assume!((r1 - r2).abs() > 1e-2 && (r2 - r3).abs() > 1e-2 && (r1 - r3).abs() > 1e-2);
            let b = -a * (r1 + r2 + r3);
            let c = a * (r1 * r2 + r2 * r3 + r1 * r3);
            let d = -a * r1 * r2 * r3;
            let mut want = [r1, r2, r3];
            want.sort_by(f64::total_cmp);
            let got = cubic_real(a, b, c, d);
            prop_assert_eq!(got.len(), 3);
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() < 1e-8 * (1.0 + w.abs()));
            }
        }
    }
}
