//! Modified q²-Bessel functions I⁽ʲ⁾, q²-Bessel functions J⁽ʲ⁾, the
//! Macdonald-type combinations K⁽ʲ⁾, the matching constant and Wronskians.
//!
//! Family index j and deformation exponent δ are tied together:
//! j=1 ↔ δ=2 (Jackson type 1), j=2 ↔ δ=0 (Jackson type 2), j=3 ↔ δ=1
//! (Hahn–Exton).
//!
//! All I/K routines take the "natural" variable x > 0 and evaluate at the
//! standard argument y = 2μ(1−q²)q^{−δ/2}x unless the name says `_at`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};
use crate::qcalc::{
    poch_inf, poch_n, qexp_big, qexp_small, qgamma, qgamma_value, rpow, sum_series, Delta, QContext,
    SeriesValue, Tolerances,
};

/// Radius margin for the j=1 series: |y/2| must stay below 1 − margin.
pub const J1_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BesselKind(u8);

impl BesselKind {
    pub fn new(j: u8) -> QResult<Self> {
        match j {
            1..=3 => Ok(Self(j)),
            _ => Err(QError::InvalidParameter(format!("Bessel family must be 1, 2 or 3, got {j}"))),
        }
    }

    pub fn for_delta(delta: Delta) -> Self {
        match delta {
            Delta::Two => Self(1),
            Delta::Zero => Self(2),
            Delta::One => Self(3),
        }
    }

    pub fn j(self) -> u8 {
        self.0
    }

    pub fn delta(self) -> Delta {
        match self.0 {
            1 => Delta::Two,
            2 => Delta::Zero,
            _ => Delta::One,
        }
    }
}

/// Which of the two independent solutions I_{±iν}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuSign {
    Plus,
    Minus,
}

impl NuSign {
    pub fn factor(self) -> f64 {
        match self {
            NuSign::Plus => 1.0,
            NuSign::Minus => -1.0,
        }
    }
}

/// An evaluation record: family, order, argument and value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselEval {
    pub kind: BesselKind,
    pub order: Complex64,
    pub argument: Complex64,
    pub result: SeriesValue,
}

/// y = 2μ(1−q²)q^{−δ/2}x.
pub fn standard_argument(ctx: &QContext, x: f64) -> f64 {
    let q = ctx.q();
    2.0 * ctx.mu() * (1.0 - q * q) * q.powf(-0.5 * ctx.delta().as_f64()) * x
}

fn check_j1_window(delta: Delta, half_y: Complex64) -> QResult<()> {
    if delta == Delta::Two && half_y.norm() >= 1.0 - J1_MARGIN {
        return Err(QError::Domain(format!(
            "j=1 series needs |y/2| < {}, got {}",
            1.0 - J1_MARGIN,
            half_y.norm()
        )));
    }
    Ok(())
}

/// Shared core of the I and J series:
/// (y/2)^α / ((1−q²)^α Γ_{q²}(α+1)) · Σ_k s^k q^{(2−δ)k(k+α)} (y/2)^{2k} / ((q²;q²)_k (q^{2α+2};q²)_k)
/// with s = +1 for I and −1 for J.
fn bessel_series(
    q: f64,
    delta: Delta,
    alpha: Complex64,
    y: Complex64,
    alternate: bool,
    tol: &Tolerances,
) -> QResult<SeriesValue> {
    let b = q * q;
    let half = y * 0.5;
    check_j1_window(delta, half)?;
    let g = qgamma(alpha + 1.0, b, tol)?;
    let pref = if half.norm() == 0.0 {
        if alpha.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    } else {
        (alpha * half.ln()).exp()
    } / (rpow(1.0 - b, alpha) * g.value);
    let d = (2 - delta.value()) as f64;
    let h2 = half * half;
    let qa = rpow(q, 2.0 * alpha + 2.0);
    let sign = if alternate { -1.0 } else { 1.0 };
    let mut t = Complex64::new(1.0, 0.0);
    let mut qa_k = qa;
    let mut b_k = b;
    let s = sum_series(
        |k| {
            if k > 0 {
                let kk = (k - 1) as f64;
                // ratio t_k / t_{k−1}
                let r = rpow(q, d * (2.0 * kk + 1.0 + alpha)) * h2 * sign
                    / ((1.0 - b_k) * (1.0 - qa_k));
                t *= r;
                b_k *= b;
                qa_k *= b;
            }
            t
        },
        tol,
    )?;
    Ok(s.scale(pref))
}

/// I^{(j)}_α(y; q²) at an arbitrary complex order α and standard argument y.
pub fn modified_i_at(q: f64, delta: Delta, alpha: Complex64, y: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    bessel_series(q, delta, alpha, y, false, tol)
}

/// J^{(j)}_α(y; q²), the alternating companion of I (inside the j=1 window).
pub fn bessel_j_at(q: f64, delta: Delta, alpha: Complex64, y: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    bessel_series(q, delta, alpha, y, true, tol)
}

/// I^{(j)}_{±iν}(2μ(1−q²)q^{−δ/2}x; q²).
pub fn modified_i(ctx: &QContext, sign: NuSign, x: f64, tol: &Tolerances) -> QResult<SeriesValue> {
    if !(x > 0.0) {
        return Err(QError::Domain(format!("x must be positive, got {x}")));
    }
    let alpha = ctx.inu() * sign.factor();
    modified_i_at(ctx.q(), ctx.delta(), alpha, Complex64::new(standard_argument(ctx, x), 0.0), tol)
}

/// Same as [`modified_i`] but returning the full evaluation record.
pub fn modified_i_eval(ctx: &QContext, sign: NuSign, x: f64, tol: &Tolerances) -> QResult<BesselEval> {
    let result = modified_i(ctx, sign, x, tol)?;
    Ok(BesselEval {
        kind: BesselKind::for_delta(ctx.delta()),
        order: ctx.inu() * sign.factor(),
        argument: Complex64::new(standard_argument(ctx, x), 0.0),
        result,
    })
}

/// J₀^{(j)}(y; q²) = Σ_n (−1)^n q^{(2−δ)n²} (y/2)^{2n} / (q²;q²)_n².
///
/// For j=1 outside the series window the continuation
/// J₀^{(1)}(y) = J₀^{(2)}(y) / (−y²/4; q²)_∞ is used; its poles are reported.
pub fn bessel_j0(q: f64, kind: BesselKind, y: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    let delta = kind.delta();
    let zero = Complex64::new(0.0, 0.0);
    if delta == Delta::Two && (y * 0.5).norm() >= 1.0 - J1_MARGIN {
        let den = poch_inf(-y * y * 0.25, q * q);
        if den.norm() < 1e-10 {
            return Err(QError::Pole(format!("J0^(1) near a pole at y = {y}")));
        }
        let j2 = bessel_series(q, Delta::Zero, zero, y, true, tol)?;
        return Ok(j2.scale(1.0 / den));
    }
    bessel_series(q, delta, zero, y, true, tol)
}

/// The product form of J₀^{(3)}(2x; q²):
/// (qx²;q²)_∞/(q²;q²)_∞ · Σ_k (−1)^k q^{k(k+1)} / ((q²;q²)_k (qx²;q²)_k).
pub fn bessel_j0_hahn_exton_product(q: f64, x: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    let b = q * q;
    let a = x * x * q;
    let mut t = Complex64::new(1.0, 0.0);
    let s = sum_series(
        |k| {
            if k > 0 {
                let kk = k as f64;
                t *= -q.powf(2.0 * kk) / ((1.0 - b.powf(kk)) * (1.0 - a * b.powf(kk - 1.0)));
            }
            t
        },
        tol,
    )?;
    Ok(s.scale(poch_inf(a, b) / poch_inf(Complex64::new(b, 0.0), b)))
}

/// A_{iν} = sqrt(I⁽²⁾_{iν}(2;q²) / I⁽²⁾_{−iν}(2;q²)), principal branch.
pub fn matching_constant_a(ctx: &QContext, tol: &Tolerances) -> QResult<Complex64> {
    matching_constant_a_order(ctx.q(), ctx.inu(), tol)
}

pub fn matching_constant_a_order(q: f64, alpha: Complex64, tol: &Tolerances) -> QResult<Complex64> {
    let two = Complex64::new(2.0, 0.0);
    let num = modified_i_at(q, Delta::Zero, alpha, two, tol)?.value;
    let den = modified_i_at(q, Delta::Zero, -alpha, two, tol)?.value;
    if den.norm() < 1e-300 {
        return Err(QError::Domain("matching constant: vanishing denominator".into()));
    }
    Ok((num / den).sqrt())
}

fn check_order(alpha: Complex64) -> QResult<()> {
    if alpha.im.abs() < 1e-12 && (alpha.re - alpha.re.round()).abs() < 1e-12 {
        return Err(QError::Domain(format!("K needs a non-integer order, got {alpha}")));
    }
    Ok(())
}

/// K_α(y) = ½ q^{−α²+α} Γ_{q²}(α) Γ_{q²}(1−α) [I_{−α}(y) − I_α(y)] at arbitrary order.
///
/// This is the combination without the matching constant; for real ν the
/// constant equals one (see [`matching_constant_a`]).
pub fn macdonald_k_at(q: f64, delta: Delta, alpha: Complex64, y: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    check_order(alpha)?;
    let b = q * q;
    let pref = 0.5 * rpow(q, -alpha * alpha + alpha) * qgamma_value(alpha, b)? * qgamma_value(1.0 - alpha, b)?;
    let im = modified_i_at(q, delta, -alpha, y, tol)?;
    let ip = modified_i_at(q, delta, alpha, y, tol)?;
    Ok(SeriesValue {
        value: pref * (im.value - ip.value),
        terms_used: im.terms_used + ip.terms_used,
        tail_estimate: pref.norm() * (im.tail_estimate + ip.tail_estimate),
    })
}

/// K^{(j)}_{iν}(2μ(1−q²)q^{−δ/2}x; q²)
/// = ½ q^{ν²+iν} Γ(iν)Γ(1−iν) [A^{|1−δ|} I_{−iν} − A^{−|1−δ|} I_{iν}].
pub fn macdonald_k(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<SeriesValue> {
    if !(x > 0.0) {
        return Err(QError::Domain(format!("x must be positive, got {x}")));
    }
    let alpha = ctx.inu();
    check_order(alpha)?;
    let b = ctx.q() * ctx.q();
    let e = (1 - ctx.delta().value()).abs();
    let a = if e == 0 { Complex64::new(1.0, 0.0) } else { matching_constant_a(ctx, tol)? };
    let pref = 0.5 * rpow(ctx.q(), -alpha * alpha + alpha) * qgamma_value(alpha, b)? * qgamma_value(1.0 - alpha, b)?;
    let im = modified_i(ctx, NuSign::Minus, x, tol)?;
    let ip = modified_i(ctx, NuSign::Plus, x, tol)?;
    Ok(SeriesValue {
        value: pref * (a * im.value - ip.value / a),
        terms_used: im.terms_used + ip.terms_used,
        tail_estimate: pref.norm() * (im.tail_estimate * a.norm() + ip.tail_estimate / a.norm()),
    })
}

/// W(x) = F₊(x)F₋(qx) − F₋(x)F₊(qx), F± = I_{±iν} at the standard argument,
/// so the first factor sits at q^{−δ/2}x and the second at q^{1−δ/2}x.
pub fn wronskian(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<Complex64> {
    let q = ctx.q();
    let fp = modified_i(ctx, NuSign::Plus, x, tol)?.value;
    let fm = modified_i(ctx, NuSign::Minus, x, tol)?.value;
    let fpq = modified_i(ctx, NuSign::Plus, q * x, tol)?.value;
    let fmq = modified_i(ctx, NuSign::Minus, q * x, tol)?.value;
    Ok(fp * fmq - fm * fpq)
}

/// The x-independent part q^{−iν}(1−q^{2iν}) / (Γ_{q²}(1+iν)Γ_{q²}(1−iν)).
pub fn wronskian_constant(ctx: &QContext) -> QResult<Complex64> {
    let q = ctx.q();
    let inu = ctx.inu();
    Ok(rpow(q, -inu) * (1.0 - rpow(q, 2.0 * inu))
        / (qgamma_value(1.0 + inu, q * q)? * qgamma_value(1.0 - inu, q * q)?))
}

/// The x-dependent factor of the Wronskian: E_{q²}(−μ²(1−q²)²q²x²) for δ=0,
/// 1 for δ=1, e_{q²}(μ²(1−q²)²q^{−2}x²) for δ=2.
pub fn wronskian_factor(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<Complex64> {
    let q = ctx.q();
    let b = q * q;
    let v = ctx.mu() * ctx.mu() * (1.0 - b) * (1.0 - b) * x * x;
    Ok(match ctx.delta() {
        Delta::Zero => qexp_big(Complex64::new(-v * b, 0.0), b, tol)?.value,
        Delta::One => Complex64::new(1.0, 0.0),
        Delta::Two => qexp_small(Complex64::new(v / b, 0.0), b, tol)?.value,
    })
}

/// The factor exactly as printed in the source table (4μ²(1−q²) instead of
/// μ²(1−q²)²); kept as a negative control.
pub fn wronskian_factor_as_printed(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<Complex64> {
    let q = ctx.q();
    let b = q * q;
    let v = 4.0 * ctx.mu() * ctx.mu() * (1.0 - b) * x * x;
    Ok(match ctx.delta() {
        Delta::Zero => qexp_big(Complex64::new(-v * b, 0.0), b, tol)?.value,
        Delta::One => Complex64::new(1.0, 0.0),
        Delta::Two => qexp_small(Complex64::new(v / b, 0.0), b, tol)?.value,
    })
}

pub fn wronskian_closed_form(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<Complex64> {
    Ok(wronskian_constant(ctx)? * wronskian_factor(ctx, x, tol)?)
}

fn q2_binomial(q: f64, k: usize, n: usize) -> f64 {
    let b = Complex64::new(q * q, 0.0);
    (poch_n(b, q * q, k) / (poch_n(b, q * q, n) * poch_n(b, q * q, k - n))).re
}

/// The inner sum of the Cauchy product of the two I-series:
/// Σ_n [k n]_{q²} q^{−2(2−δ)n(k−n−iν)} (q^{−iν+2k−2n} − q^{iν+2n})
///      / ((q^{2iν+2};q²)_n (q^{−2iν+2};q²)_{k−n}).
pub fn interior_sum_s(ctx: &QContext, k: usize) -> QResult<Complex64> {
    interior_sum_with_scale(ctx, k).map(|(s, _)| s)
}

/// The sum together with Σ|terms|, the scale of its rounding error.
fn interior_sum_with_scale(ctx: &QContext, k: usize) -> QResult<(Complex64, f64)> {
    let q = ctx.q();
    let inu = ctx.inu();
    if ctx.nu() == 0.0 {
        return Err(QError::Domain("interior sum needs a non-integer order".into()));
    }
    let d = (2 - ctx.delta().value()) as f64;
    let mut s = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for n in 0..=k {
        let (nf, kf) = (n as f64, k as f64);
        let num = rpow(q, -2.0 * d * nf * (kf - nf - inu))
            * (rpow(q, -inu + 2.0 * kf - 2.0 * nf) - rpow(q, inu + 2.0 * nf));
        let den = poch_n(rpow(q, 2.0 * inu + 2.0), q * q, n) * poch_n(rpow(q, -2.0 * inu + 2.0), q * q, k - n);
        let t = q2_binomial(q, k, n) * num / den;
        scale += t.norm();
        s += t;
    }
    Ok((s, scale))
}

/// Closed form of [`interior_sum_s`]:
/// δ=0: (−1)^k q^{−k(k−2iν−1)−iν}(1−q^{2iν}); δ=1: q^{−iν}(1−q^{2iν}) at k=0, else 0;
/// δ=2: q^{−iν}(1−q^{2iν}).
pub fn interior_sum_closed_form(ctx: &QContext, k: usize) -> Complex64 {
    let q = ctx.q();
    let inu = ctx.inu();
    let base = rpow(q, -inu) * (1.0 - rpow(q, 2.0 * inu));
    let kf = k as f64;
    match ctx.delta() {
        Delta::Zero => {
            let sgn = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            sgn * rpow(q, -kf * (kf - 2.0 * inu - 1.0) - inu) * (1.0 - rpow(q, 2.0 * inu))
        }
        Delta::One => {
            if k == 0 {
                base
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Delta::Two => base,
    }
}

/// The case table as printed in the source (used only to document the
/// discrepancy: δ=0 carries +2iν and δ=2 an extra minus sign there).
pub fn interior_sum_table_as_printed(ctx: &QContext, k: usize) -> Complex64 {
    let q = ctx.q();
    let inu = ctx.inu();
    let base = rpow(q, -inu) * (1.0 - rpow(q, 2.0 * inu));
    let kf = k as f64;
    match ctx.delta() {
        Delta::Zero => {
            let sgn = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            sgn * rpow(q, -kf * (kf + 2.0 * inu - 1.0) - inu) * (1.0 - rpow(q, 2.0 * inu))
        }
        Delta::One => {
            if k == 0 {
                base
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Delta::Two => -base,
    }
}
