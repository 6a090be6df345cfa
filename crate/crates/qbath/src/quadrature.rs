//! Adaptive Gauss–Kronrod quadrature (7/15 pair, QUADPACK constants).
//!
//! A single global worklist drives subdivision over an arbitrary initial
//! panel list, so callers can pre-split at known awkward points
//! (resonances, cutoffs, interpolation nodes) and let adaptivity do the
//! rest. Everything is deterministic: the worklist is ordered by error
//! estimate with insertion order as the tie break.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half) and weights, 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod pass over `[a, b]`: (integral, error estimate).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut result_gauss = fc * WG[3];
    let mut result_kronrod = fc * WGK[7];
    let mut result_abs = result_kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        result_kronrod += WGK[j] * (f1 + f2);
        result_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * result_kronrod;
    let mut result_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        result_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let integral = result_kronrod * half;
    let result_abs = result_abs * half.abs();
    let result_asc = result_asc * half.abs();

    let mut err = ((result_kronrod - result_gauss) * half).abs();
    if result_asc != 0.0 && err != 0.0 {
        err = result_asc * 1.0f64.min((200.0 * err / result_asc).powf(1.5));
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * result_abs);
    }
    (integral, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.seq == other.seq
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on error; older panel wins ties for determinism
        self.err
            .total_cmp(&other.err)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: f64,
    pub abs_error: f64,
    pub evals: usize,
}

/// Adaptively integrate `f` over the union of `panels`.
///
/// Stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol * |sum|)`; errors out with the achieved estimate
/// once `max_evals` integrand evaluations have been spent.
pub fn integrate_panels(
    mut f: impl FnMut(f64) -> f64,
    panels: &[(f64, f64)],
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<QuadOutcome> {
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut evals = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;

    for &(a, b) in panels {
        if !(b > a) {
            continue;
        }
        let (v, e) = gk15(&mut f, a, b);
        evals += 15;
        total += v;
        total_err += e;
        heap.push(Panel { a, b, value: v, err: e, seq });
        seq += 1;
    }

    loop {
        let goal = abs_tol.max(rel_tol * total.abs());
        if total_err <= goal || heap.is_empty() {
            return Ok(QuadOutcome { value: total, abs_error: total_err, evals });
        }
        if evals >= max_evals {
            return Err(Error::Convergence { achieved: total_err, requested: goal });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; keep its estimate
            total_err -= worst.err;
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1, seq });
        seq += 1;
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2, seq });
        seq += 1;
    }
}

/// Convenience wrapper for a single interval.
pub fn integrate(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<QuadOutcome> {
    integrate_panels(f, &[(a, b)], rel_tol, abs_tol, max_evals)
}

/// Bisection on a bracketing interval; `f(a)` and `f(b)` must differ in sign.
/// Returns the midpoint once the interval shrinks below `rel_tol` relative
/// to its magnitude (or machine resolution).
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || (b - a) <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        // K15 is exact for degree <= 22
        let out = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12, 0.0, 1000).unwrap();
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (1.0 / 4.0 - 1.0 + (-1.0));
        assert!((out.value - exact).abs() < 1e-13 * exact.abs());
    }

    #[test]
    fn narrow_lorentzian() {
        let w = 1e-5;
        let out = integrate(|x| w / (x * x + w * w), -1.0, 1.0, 1e-11, 0.0, 200_000).unwrap();
        let exact = 2.0 * (1.0 / w).atan();
        assert!(
            (out.value - exact).abs() < 1e-9 * exact,
            "got {} want {}",
            out.value,
            exact
        );
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let err = integrate(|x| (1e4 * x).sin() / x.abs().sqrt(), 1e-12, 1.0, 1e-14, 0.0, 60)
            .unwrap_err();
        match err {
            Error::Convergence { achieved, .. } => assert!(achieved > 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            integrate(|x| (x * 37.0).sin().exp(), 0.0, 10.0, 1e-12, 0.0, 100_000)
                .unwrap()
                .value
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_none());
    }
}
