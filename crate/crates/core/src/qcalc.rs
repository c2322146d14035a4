//! q-calculus kernel: Pochhammer symbols, q-Gamma, q-exponentials,
//! q-numbers, Jackson derivatives and Jackson integrals over complex values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};

/// Value of the deformation exponent δ, with κ = q^δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delta {
    Zero,
    One,
    Two,
}

impl Delta {
    pub fn value(self) -> i32 {
        match self {
            Delta::Zero => 0,
            Delta::One => 1,
            Delta::Two => 2,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }
}

impl TryFrom<i32> for Delta {
    type Error = QError;

    fn try_from(v: i32) -> QResult<Self> {
        match v {
            0 => Ok(Delta::Zero),
            1 => Ok(Delta::One),
            2 => Ok(Delta::Two),
            _ => Err(QError::InvalidParameter(format!(
                "delta must be 0, 1 or 2 (got {v}); other values give higher-order difference equations"
            ))),
        }
    }
}

/// Base parameters shared by every numeric routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QContext {
    q: f64,
    delta: Delta,
    mu: f64,
    nu: f64,
}

impl QContext {
    pub fn new(q: f64, delta: i32, mu: f64, nu: f64) -> QResult<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(QError::InvalidParameter(format!("q must lie in (0,1), got {q}")));
        }
        let delta = Delta::try_from(delta)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(QError::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !nu.is_finite() {
            return Err(QError::InvalidParameter("nu must be finite".into()));
        }
        Ok(Self { q, delta, mu, nu })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn delta(&self) -> Delta {
        self.delta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// κ = q^δ.
    pub fn kappa(&self) -> f64 {
        self.q.powi(self.delta.value())
    }

    /// The order iν as a complex number.
    pub fn inu(&self) -> Complex64 {
        Complex64::new(0.0, self.nu)
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu, ..*self }
    }

    pub fn with_q(&self, q: f64) -> QResult<Self> {
        Self::new(q, self.delta.value(), self.mu, self.nu)
    }
}

/// Truncation controls for series, products and sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_eps: f64,
    pub abs_eps: f64,
    pub max_terms: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel_eps: 1e-12, abs_eps: 1e-300, max_terms: 10_000 }
    }
}

impl Tolerances {
    pub fn new(rel_eps: f64, abs_eps: f64, max_terms: usize) -> QResult<Self> {
        if !(rel_eps > 0.0) || !(abs_eps > 0.0) {
            return Err(QError::InvalidParameter("tolerances must be positive".into()));
        }
        if max_terms < 8 {
            return Err(QError::InvalidParameter("max_terms must be at least 8".into()));
        }
        Ok(Self { rel_eps, abs_eps, max_terms })
    }
}

/// A complex value together with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: Complex64,
    pub terms_used: usize,
    pub tail_estimate: f64,
}

impl SeriesValue {
    pub fn exact(value: Complex64, terms_used: usize) -> Self {
        Self { value, terms_used, tail_estimate: 0.0 }
    }

    pub fn is_converged(&self, tol: &Tolerances) -> bool {
        self.terms_used >= 1 && self.tail_estimate <= tol.rel_eps * self.value.norm() + tol.abs_eps
    }

    /// Product of two values; the relative tails add.
    pub fn times(self, other: SeriesValue) -> SeriesValue {
        let value = self.value * other.value;
        let rel = rel_tail(&self) + rel_tail(&other);
        SeriesValue {
            value,
            terms_used: self.terms_used + other.terms_used,
            tail_estimate: rel * value.norm(),
        }
    }

    pub fn scale(self, c: Complex64) -> SeriesValue {
        SeriesValue {
            value: self.value * c,
            terms_used: self.terms_used,
            tail_estimate: self.tail_estimate * c.norm(),
        }
    }
}

fn rel_tail(v: &SeriesValue) -> f64 {
    let n = v.value.norm();
    if n > 0.0 {
        v.tail_estimate / n
    } else {
        0.0
    }
}

/// Principal-branch complex power base^x = exp(x ln base) for real base > 0.
pub fn rpow(base: f64, x: Complex64) -> Complex64 {
    (x * base.ln()).exp()
}

/// Sum Σ_k term(k) with the "three consecutive small terms" stopping rule.
///
/// The tail estimate is a geometric bound built from the last two terms.
pub fn sum_series<F>(mut term: F, tol: &Tolerances) -> QResult<SeriesValue>
where
    F: FnMut(usize) -> Complex64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    let mut small = 0usize;
    let mut prev = f64::INFINITY;
    for k in 0..tol.max_terms {
        let t = term(k);
        if !t.re.is_finite() || !t.im.is_finite() {
            return Err(QError::NonConverged { terms: k, tail: f64::INFINITY });
        }
        sum += t;
        let a = t.norm();
        if a < tol.rel_eps * sum.norm() + tol.abs_eps {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 {
            let r = if prev > 0.0 && prev.is_finite() { a / prev } else { 0.0 };
            let tail = if r < 1.0 { a * r / (1.0 - r) } else { a };
            return Ok(SeriesValue { value: sum, terms_used: k + 1, tail_estimate: tail });
        }
        prev = a;
    }
    Err(QError::NonConverged { terms: tol.max_terms, tail: prev })
}

/// Length of a Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PochLength {
    Finite(usize),
    Infinite,
}

/// (a; q)_n = ∏_{k<n} (1 − a q^k), including n = ∞.
pub fn qpochhammer(a: Complex64, q: f64, n: PochLength, tol: &Tolerances) -> QResult<SeriesValue> {
    if !(q > 0.0 && q < 1.0) {
        return Err(QError::InvalidParameter(format!("base must lie in (0,1), got {q}")));
    }
    match n {
        PochLength::Finite(n) => {
            let mut p = Complex64::new(1.0, 0.0);
            let mut aq = a;
            for _ in 0..n {
                p *= 1.0 - aq;
                aq *= q;
            }
            Ok(SeriesValue::exact(p, n.max(1)))
        }
        PochLength::Infinite => {
            let mut p = Complex64::new(1.0, 0.0);
            let mut aq = a;
            // |log of the remaining product| ≲ 2|a q^k| / (1 − q)
            let stop = 0.25 * f64::EPSILON * (1.0 - q);
            for k in 0..tol.max_terms {
                let m = aq.norm();
                if m < stop || m < tol.abs_eps {
                    let tail = 2.0 * m / (1.0 - q) * p.norm();
                    return Ok(SeriesValue { value: p, terms_used: k.max(1), tail_estimate: tail });
                }
                p *= 1.0 - aq;
                aq *= q;
            }
            Err(QError::NonConverged { terms: tol.max_terms, tail: aq.norm() })
        }
    }
}

/// Shorthand for the infinite product value.
pub fn poch_inf(a: Complex64, q: f64) -> Complex64 {
    qpochhammer(a, q, PochLength::Infinite, &Tolerances::default())
        .map(|v| v.value)
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
}

/// Shorthand for the finite product value.
pub fn poch_n(a: Complex64, q: f64, n: usize) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    let mut aq = a;
    for _ in 0..n {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// Γ_base(x) = (base;base)_∞ / (base^x;base)_∞ · (1−base)^{1−x}.
///
/// Poles sit where base^{x+j} = 1, i.e. x = −j + 2πik/ln(base).
pub fn qgamma(x: Complex64, base: f64, tol: &Tolerances) -> QResult<SeriesValue> {
    if !(base > 0.0 && base < 1.0) {
        return Err(QError::InvalidParameter(format!("base must lie in (0,1), got {base}")));
    }
    let bx = rpow(base, x);
    let mut f = bx;
    let j_max = (-x.re).max(0.0).ceil() as usize + 2;
    for j in 0..=j_max {
        if (1.0 - f).norm() < 1e-13 {
            return Err(QError::Pole(format!("q-Gamma pole at x = {x} (shift {j})")));
        }
        f *= base;
    }
    let num = qpochhammer(Complex64::new(base, 0.0), base, PochLength::Infinite, tol)?;
    let den = qpochhammer(bx, base, PochLength::Infinite, tol)?;
    let scale = rpow(1.0 - base, 1.0 - x);
    let value = num.value / den.value * scale;
    let rel = rel_tail(&num) + rel_tail(&den);
    Ok(SeriesValue {
        value,
        terms_used: num.terms_used + den.terms_used,
        tail_estimate: rel * value.norm(),
    })
}

/// Convenience: Γ_base(x) value or NaN at a pole.
pub fn qgamma_value(x: Complex64, base: f64) -> QResult<Complex64> {
    qgamma(x, base, &Tolerances::default()).map(|v| v.value)
}

/// e_base(x) = 1/(x; base)_∞, defined for |x| < 1.
pub fn qexp_small(x: Complex64, base: f64, tol: &Tolerances) -> QResult<SeriesValue> {
    if x.norm() >= 1.0 {
        return Err(QError::Domain(format!("e_q(x) needs |x| < 1, got |x| = {}", x.norm())));
    }
    let p = qpochhammer(x, base, PochLength::Infinite, tol)?;
    let value = 1.0 / p.value;
    Ok(SeriesValue { value, terms_used: p.terms_used, tail_estimate: rel_tail(&p) * value.norm() })
}

/// E_base(x) = (−x; base)_∞, entire.
pub fn qexp_big(x: Complex64, base: f64, tol: &Tolerances) -> QResult<SeriesValue> {
    qpochhammer(-x, base, PochLength::Infinite, tol)
}

/// [x]_q = (q^x − q^{−x}) / (q − q^{−1}).
pub fn qnumber(x: Complex64, q: f64) -> Complex64 {
    (rpow(q, x) - rpow(q, -x)) / (q - 1.0 / q)
}

/// The two Jackson difference quotients in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacksonVariant {
    /// (f(x) − f(q²x)) / ((1−q²)x)
    SquaredBase,
    /// (f(x) − f(qx)) / ((1−q)x)
    PlainBase,
}

pub fn jackson_derivative<F>(f: F, x: Complex64, q: f64, variant: JacksonVariant) -> QResult<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    if x.norm() == 0.0 {
        return Err(QError::Domain("Jackson derivative at x = 0".into()));
    }
    let p = match variant {
        JacksonVariant::SquaredBase => q * q,
        JacksonVariant::PlainBase => q,
    };
    Ok((f(x) - f(x * p)) / ((1.0 - p) * x))
}

/// Support of a Jackson integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacksonDomain {
    /// ∫_0^∞ over the lattice anchor·q^n, n ∈ ℤ.
    HalfLine,
    /// ∫_{−∞}^{∞}: the half-line sum of f(x) + f(−x).
    Bilateral,
}

/// (1−q) Σ_{n∈ℤ} q^n·anchor·f(q^n·anchor), each end truncated independently.
pub fn jackson_integral<F>(
    f: F,
    q: f64,
    domain: JacksonDomain,
    anchor: f64,
    tol: &Tolerances,
) -> QResult<SeriesValue>
where
    F: Fn(f64) -> Complex64,
{
    if !(anchor > 0.0) {
        return Err(QError::InvalidParameter("Jackson anchor must be positive".into()));
    }
    let sample = |x: f64| match domain {
        JacksonDomain::HalfLine => f(x),
        JacksonDomain::Bilateral => f(x) + f(-x),
    };
    let ln_q = q.ln();
    let node = |n: i64| (n as f64 * ln_q).exp() * anchor;
    let down = sum_series(|k| {
        let x = node(k as i64);
        sample(x) * x
    }, tol)?;
    let up = sum_series(|k| {
        let x = node(-(k as i64) - 1);
        sample(x) * x
    }, tol)?;
    let value = (down.value + up.value) * (1.0 - q);
    Ok(SeriesValue {
        value,
        terms_used: down.terms_used + up.terms_used,
        tail_estimate: (down.tail_estimate + up.tail_estimate) * (1.0 - q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn context_rejects_bad_parameters() {
        assert!(QContext::new(1.0, 1, 1.0, 0.5).is_err());
        assert!(QContext::new(0.0, 1, 1.0, 0.5).is_err());
        assert!(QContext::new(0.5, 3, 1.0, 0.5).is_err());
        assert!(QContext::new(0.5, 1, 0.0, 0.5).is_err());
        assert!(QContext::new(0.5, 1, 1.0, f64::NAN).is_err());
        let ctx = QContext::new(0.5, 2, 1.0, 0.5).unwrap();
        assert_eq!(ctx.kappa(), 0.25);
    }

    #[test]
    fn pochhammer_small_cases() {
        let tol = Tolerances::default();
        let v = qpochhammer(c(0.7), 0.5, PochLength::Finite(0), &tol).unwrap();
        assert_eq!(v.value, c(1.0));
        let v = qpochhammer(c(0.25), 0.25, PochLength::Finite(1), &tol).unwrap();
        assert_eq!(v.value, c(0.75));
    }

    #[test]
    fn pochhammer_infinite_matches_long_product() {
        let v = qpochhammer(c(0.3), 0.5, PochLength::Infinite, &Tolerances::default()).unwrap();
        let mut p = 1.0;
        for k in 0..200 {
            p *= 1.0 - 0.3 * 0.5f64.powi(k);
        }
        assert!((v.value.re - p).abs() < 1e-15);
        assert!(v.tail_estimate < 1e-15);
    }

    #[test]
    fn qgamma_normalisation() {
        for q2 in [0.09, 0.25, 0.81] {
            assert!((qgamma_value(c(1.0), q2).unwrap() - 1.0).norm() < 1e-14);
            assert!((qgamma_value(c(2.0), q2).unwrap() - 1.0).norm() < 1e-14);
        }
        assert!((qgamma_value(c(3.0), 0.25).unwrap() - 1.25).norm() < 1e-14);
    }

    #[test]
    fn qgamma_poles_reported() {
        assert!(matches!(qgamma(c(0.0), 0.25, &Tolerances::default()), Err(QError::Pole(_))));
        assert!(matches!(qgamma(c(-2.0), 0.25, &Tolerances::default()), Err(QError::Pole(_))));
        // off-axis pole of the lattice
        let z = Complex64::new(-1.0, 2.0 * std::f64::consts::PI / 0.25f64.ln());
        assert!(matches!(qgamma(z, 0.25, &Tolerances::default()), Err(QError::Pole(_))));
    }

    #[test]
    fn qexp_pair_inverse() {
        let tol = Tolerances::default();
        let e = qexp_small(c(0.25), 0.5, &tol).unwrap().value;
        let big = qexp_big(c(-0.25), 0.5, &tol).unwrap().value;
        assert!((e * big - 1.0).norm() < 1e-15);
        assert_eq!(qexp_small(c(0.0), 0.5, &tol).unwrap().value, c(1.0));
        assert_eq!(qexp_big(c(0.0), 0.5, &tol).unwrap().value, c(1.0));
        assert!(qexp_small(c(1.2), 0.5, &tol).is_err());
    }

    #[test]
    fn qnumber_values() {
        assert_eq!(qnumber(c(0.0), 0.5), c(0.0));
        assert!((qnumber(c(1.0), 0.5) - 1.0).norm() < 1e-15);
        assert!((qnumber(c(2.0), 0.5) - 2.5).norm() < 1e-14);
    }

    #[test]
    fn jackson_derivative_basics() {
        let q = 0.6;
        let z = Complex64::new(0.3, 0.2);
        let d = jackson_derivative(|_| c(4.0), z, q, JacksonVariant::SquaredBase).unwrap();
        assert_eq!(d, c(0.0));
        let d = jackson_derivative(|x| x, z, q, JacksonVariant::SquaredBase).unwrap();
        assert!((d - 1.0).norm() < 1e-15);
        assert!(jackson_derivative(|x| x, c(0.0), q, JacksonVariant::PlainBase).is_err());
    }

    #[test]
    fn jackson_derivative_of_small_exponential_is_eigen() {
        // D e_{q²}(iμ(1−q²)z) = iμ e_{q²}(iμ(1−q²)z)
        let tol = Tolerances::default();
        let (q, mu) = (0.5f64, 1.3);
        let b = q * q;
        let lam = Complex64::new(0.0, mu * (1.0 - b));
        let f = |z: Complex64| qexp_small(lam * z, b, &tol).unwrap().value;
        for z in [Complex64::new(0.2, 0.1), c(0.5), Complex64::new(-0.3, 0.4)] {
            let d = jackson_derivative(f, z, q, JacksonVariant::SquaredBase).unwrap();
            let rhs = Complex64::new(0.0, mu) * f(z);
            assert!((d - rhs).norm() < 1e-13 * rhs.norm());
        }
    }

    #[test]
    fn jackson_integral_scaling_identity() {
        let tol = Tolerances { rel_eps: 1e-16, ..Tolerances::default() };
        let q = 0.7;
        let b = q * q;
        // decaying q-Gaussian 1/(−x²;q²)_∞
        let f = |x: f64| 1.0 / poch_inf(c(-x * x), b);
        let i1 = jackson_integral(f, q, JacksonDomain::HalfLine, 1.0, &tol).unwrap();
        let i2 = jackson_integral(|x| f(q * x), q, JacksonDomain::HalfLine, 1.0, &tol).unwrap();
        assert!((i2.value - i1.value / q).norm() < 1e-13 * i1.value.norm());
        let zero = jackson_integral(|_| c(0.0), q, JacksonDomain::Bilateral, 1.0, &tol).unwrap();
        assert_eq!(zero.value, c(0.0));
    }

    #[test]
    fn jackson_sum_of_plain_derivative_telescopes() {
        // On the lattice, Σ (1−q) q^n x D̃f(x) = Σ [f(q^n) − f(q^{n+1})] = lim_{∞} f − f(0).
        let tol = Tolerances::default();
        let q = 0.6;
        let f = |x: f64| 1.0 / poch_inf(c(-x * x), q * q);
        let df = |x: f64| {
            jackson_derivative(|z| 1.0 / poch_inf(-z * z, q * q), c(x), q, JacksonVariant::PlainBase)
                .unwrap()
        };
        let s = jackson_integral(df, q, JacksonDomain::HalfLine, 1.0, &tol).unwrap();
        assert!((s.value + f(0.0)).norm() < 1e-12);
    }

    #[test]
    fn sum_series_reports_divergence() {
        let tol = Tolerances { max_terms: 50, ..Tolerances::default() };
        assert!(matches!(sum_series(|k| c(2f64.powi(k as i32)), &tol), Err(QError::NonConverged { .. })));
    }
}
