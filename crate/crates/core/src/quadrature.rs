//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands,
//! plus a half-line driver working on geometrically growing panels.

use num_complex::Complex64;

use crate::error::{QError, QResult};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of a quadrature with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive bisection until the summed error estimate is below `tol`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> QResult<Quad> {
    let mut stack = vec![(a, b, 0u32)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    let width = (b - a).abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        evals += 15;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(QError::Domain(format!("integrand not finite on [{lo}, {hi}]")));
        }
        let share = tol * (hi - lo).abs() / width;
        if e <= share.max(1e-15 * v.norm()) || depth >= max_depth {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(Quad { value: total, error: err, evaluations: evals })
}

/// ∫_0^∞ f over panels [0,p], [p,2p], [2p,4p], … stopping once `quiet`
/// consecutive panels contribute less than `tol`, or failing at `max_end`.
pub fn integrate_half_line<F: Fn(f64) -> Complex64>(
    f: F,
    first_panel: f64,
    tol: f64,
    max_end: f64,
) -> QResult<Quad> {
    let mut total = integrate(&f, 0.0, first_panel, tol, 30)?;
    let (mut lo, mut hi) = (first_panel, 2.0 * first_panel);
    let mut quiet = 0;
    while hi <= max_end {
        let p = integrate(&f, lo, hi, tol, 30)?;
        total.value += p.value;
        total.error += p.error;
        total.evaluations += p.evaluations;
        if p.value.norm() < tol {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(QError::NonConverged { terms: total.evaluations, tail: f(lo).norm() * lo })
}
