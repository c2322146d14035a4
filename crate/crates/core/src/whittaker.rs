//! Whittaker-type vectors of the class-one principal series, the radial
//! matrix element, and the polar-reduced Hermitian form.
//!
//! Vectors are power series in z̄ and z. The principal-series generators act
//! on monomials by the coefficient maps of [`PrincipalSeries`]; for real q
//! the starred (z̄) generators use the same maps.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};
use crate::qbessel::{bessel_j0, BesselKind};
use crate::qcalc::{poch_inf, poch_n, rpow, QContext, SeriesValue, Tolerances};
use crate::quadrature::integrate;

fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Which variable a one-variable series is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesVariable {
    ZBar,
    Z,
    /// x = |z|²
    Modulus,
}

/// Truncated power series c₀ + c₁w + … + c_N w^N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries1D {
    coefficients: Vec<Complex64>,
    variable: SeriesVariable,
}

impl PowerSeries1D {
    pub fn new(coefficients: Vec<Complex64>, variable: SeriesVariable) -> Self {
        Self { coefficients, variable }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn variable(&self) -> SeriesVariable {
        self.variable
    }

    pub fn coefficient(&self, k: usize) -> Complex64 {
        self.coefficients.get(k).copied().unwrap_or_default()
    }

    /// Horner evaluation; the tail estimate is the size of the last term.
    pub fn eval(&self, w: Complex64) -> SeriesValue {
        let value = self.coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c);
        let n = self.coefficients.len();
        let tail = match self.coefficients.last() {
            Some(c) if n > 1 => (c * w.powu(n as u32 - 1)).norm(),
            _ => 0.0,
        };
        SeriesValue { value, terms_used: n.max(1), tail_estimate: tail }
    }
}

/// Generators of the class-one principal series acting on one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    A,
    B,
    C,
}

/// Coefficient maps of the principal-series operators on w^k:
/// A: w^k ↦ q^{(iν−1)/2−k} w^k,
/// B: w^k ↦ q^{iν/2−k}(1−q^{2k})/(1−q²) w^{k−1},
/// C: w^k ↦ (q^{−3iν/2+3+k} − q^{iν/2+1−k})/(1−q²) w^{k+1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalSeries {
    q: f64,
    inu: Complex64,
}

impl PrincipalSeries {
    pub fn new(ctx: &QContext) -> Self {
        Self { q: ctx.q(), inu: ctx.inu() }
    }

    /// (target degree, coefficient) for the image of w^k.
    pub fn on_monomial(&self, gen: Generator, k: usize) -> Option<(usize, Complex64)> {
        let q = self.q;
        let kf = k as f64;
        let inu = self.inu;
        match gen {
            Generator::A => Some((k, rpow(q, (inu - 1.0) * 0.5 - kf))),
            Generator::B if k == 0 => None,
            Generator::B => Some((k - 1, rpow(q, inu * 0.5 - kf) * (1.0 - q.powf(2.0 * kf)) / (1.0 - q * q))),
            Generator::C => Some((
                k + 1,
                (rpow(q, -1.5 * inu + 3.0 + kf) - rpow(q, inu * 0.5 + 1.0 - kf)) / (1.0 - q * q),
            )),
        }
    }

    pub fn apply(&self, gen: Generator, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); f.len() + 1];
        for (k, c) in f.iter().enumerate() {
            if let Some((t, w)) = self.on_monomial(gen, k) {
                out[t] += c * w;
            }
        }
        out
    }
}

/// The two candidate closed forms for the invariant vector:
/// `Derived` is (−q^{−2iν+4}x;q²)_∞/(−q²x;q²)_∞, `Displayed` has +2iν.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvariantForm {
    Derived,
    Displayed,
}

impl InvariantForm {
    fn sign(self) -> f64 {
        match self {
            InvariantForm::Derived => -1.0,
            InvariantForm::Displayed => 1.0,
        }
    }
}

/// ψ_L(x) in closed product form, x = |z|².
pub fn psi_l(ctx: &QContext, x: f64, form: InvariantForm) -> QResult<SeriesValue> {
    if !(x >= 0.0) {
        return Err(QError::Domain(format!("x = |z|² must be nonnegative, got {x}")));
    }
    let q = ctx.q();
    let b = q * q;
    let top = poch_inf(-rpow(q, 2.0 * form.sign() * ctx.inu() + 4.0) * x, b);
    let bottom = poch_inf(ci(-b * x, 0.0), b);
    Ok(SeriesValue::exact(top / bottom, 1))
}

/// Coefficients of ψ_L in x through degree `n`, from the q-binomial expansion
/// Σ_m (q^{±2iν+2};q²)_m (−q²x)^m / (q²;q²)_m.
pub fn psi_l_series(ctx: &QContext, n: usize, form: InvariantForm) -> PowerSeries1D {
    let q = ctx.q();
    let b = q * q;
    let a = rpow(q, 2.0 * form.sign() * ctx.inu() + 2.0);
    let mut c = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m > 0 {
            let mf = (m - 1) as f64;
            c *= -b * (1.0 - a * b.powf(mf)) / (1.0 - b.powf(mf + 1.0));
        }
        out.push(c);
    }
    PowerSeries1D::new(out, SeriesVariable::Modulus)
}

/// Worst relative mismatch of C*.ψ_L = ψ_L.B on the coefficients of
/// z̄^{m+1}z^m, m < n, for ψ_L = Σ p_m (z̄z)^m.
pub fn psi_l_invariance_residual(ctx: &QContext, form: InvariantForm, n: usize) -> f64 {
    let ps = PrincipalSeries::new(ctx);
    let p = psi_l_series(ctx, n, form);
    let mut worst: f64 = 0.0;
    for m in 0..n {
        let (_, c_star) = ps.on_monomial(Generator::C, m).expect("C raises degree");
        let (_, b) = ps.on_monomial(Generator::B, m + 1).expect("degree ≥ 1");
        let lhs = p.coefficient(m) * c_star;
        let rhs = p.coefficient(m + 1) * b;
        worst = worst.max((lhs - rhs).norm() / (lhs.norm() + rhs.norm()).max(1e-300));
    }
    worst
}

/// a_n = (iμ)^n q^{n(n−1)/2 + n(1−iν)}.
pub fn xi1_law(ctx: &QContext, n: usize) -> Complex64 {
    let nf = n as f64;
    ci(0.0, ctx.mu()).powu(n as u32) * rpow(ctx.q(), nf * (nf - 1.0) / 2.0 + nf * (1.0 - ctx.inu()))
}

/// c_k = (iμ)^k q^{k(k−1)(3−2δ)/2 + k(1−iν) + (iνδ−2δ+2)k}.
pub fn xi2_law(ctx: &QContext, k: usize) -> Complex64 {
    let kf = k as f64;
    let d = ctx.delta().as_f64();
    let inu = ctx.inu();
    ci(0.0, ctx.mu()).powu(k as u32)
        * rpow(ctx.q(), kf * (kf - 1.0) * (3.0 - 2.0 * d) / 2.0 + kf * (1.0 - inu) + (inu * d - 2.0 * d + 2.0) * kf)
}

fn normalized_series<F: Fn(usize) -> Complex64>(q: f64, n: usize, law: F, var: SeriesVariable) -> PowerSeries1D {
    let b = q * q;
    let coefficients = (0..=n)
        .map(|k| law(k) * (1.0 - b).powi(k as i32) / poch_n(ci(b, 0.0), b, k))
        .collect();
    PowerSeries1D::new(coefficients, var)
}

/// ξ₁ = Σ a_n (1−q²)^n z̄^n / (q²;q²)_n through degree `n`.
pub fn xi1_series(ctx: &QContext, n: usize) -> PowerSeries1D {
    normalized_series(ctx.q(), n, |k| xi1_law(ctx, k), SeriesVariable::ZBar)
}

/// ξ₂ = Σ c_k (1−q²)^k z^k / (q²;q²)_k through degree `n`.
pub fn xi2_series(ctx: &QContext, n: usize) -> PowerSeries1D {
    normalized_series(ctx.q(), n, |k| xi2_law(ctx, k), SeriesVariable::Z)
}

fn sum_coefficients<F: Fn(usize) -> Complex64>(coef: F, w: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut wk = Complex64::new(1.0, 0.0);
    let mut small = 0;
    for k in 0..tol.max_terms {
        let t = coef(k) * wk;
        if !t.re.is_finite() || !t.im.is_finite() {
            return Err(QError::NonConverged { terms: k, tail: f64::INFINITY });
        }
        sum += t;
        if t.norm() <= tol.rel_eps * sum.norm() + tol.abs_eps {
            small += 1;
            if small >= 3 {
                return Ok(SeriesValue { value: sum, terms_used: k + 1, tail_estimate: t.norm() });
            }
        } else {
            small = 0;
        }
        wk *= w;
    }
    Err(QError::NonConverged { terms: tol.max_terms, tail: (coef(tol.max_terms) * wk).norm() })
}

fn xi_coefficient<F: Fn(usize) -> Complex64>(q: f64, law: F) -> impl Fn(usize) -> Complex64 {
    let b = q * q;
    move |k| law(k) * (1.0 - b).powi(k as i32) / poch_n(ci(b, 0.0), b, k)
}

pub fn xi1(ctx: &QContext, zbar: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    sum_coefficients(xi_coefficient(ctx.q(), |k| xi1_law(ctx, k)), zbar, tol)
}

/// ξ₂(z). For δ = 2 the coefficients grow like q^{−k²/2}, the radius of
/// convergence is zero and every z ≠ 0 is rejected.
pub fn xi2(ctx: &QContext, z: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    if ctx.delta().value() == 2 && z.norm() > 0.0 {
        return Err(QError::Domain("ξ₂ has zero radius of convergence for δ = 2".into()));
    }
    sum_coefficients(xi_coefficient(ctx.q(), |k| xi2_law(ctx, k)), z, tol)
}

/// Basic hypergeometric series
/// rφs(a; b; p, w) = Σ (a₁,…,a_r;p)_n / ((p;p)_n (b₁,…,b_s;p)_n) · [(−1)^n p^{n(n−1)/2}]^{1+s−r} w^n.
pub fn basic_hypergeometric(
    upper: &[Complex64],
    lower: &[Complex64],
    p: f64,
    w: Complex64,
    tol: &Tolerances,
) -> QResult<SeriesValue> {
    let e = 1 + lower.len() as i32 - upper.len() as i32;
    let mut t = Complex64::new(1.0, 0.0);
    let mut sum = t;
    let mut small = 0;
    for n in 1..tol.max_terms {
        let m = (n - 1) as f64;
        let pm = p.powf(m);
        let mut ratio = w / (1.0 - p * pm);
        for a in upper {
            ratio *= 1.0 - a * pm;
        }
        for b in lower {
            ratio /= 1.0 - b * pm;
        }
        // [(−1)^n p^{n(n−1)/2}] / [(−1)^{n−1} p^{(n−1)(n−2)/2}] = −p^{n−1}
        ratio *= (-pm).powi(e);
        t *= ratio;
        if !t.re.is_finite() || !t.im.is_finite() {
            return Err(QError::NonConverged { terms: n, tail: f64::INFINITY });
        }
        sum += t;
        if t.norm() <= tol.rel_eps * sum.norm() + tol.abs_eps {
            small += 1;
            if small >= 3 {
                return Ok(SeriesValue { value: sum, terms_used: n + 1, tail_estimate: t.norm() });
            }
        } else {
            small = 0;
        }
    }
    Err(QError::NonConverged { terms: tol.max_terms, tail: t.norm() })
}

/// ξ₁(z̄) = ₁Φ₁(0; −q; q, −iμ(1−q²)q^{1−iν} z̄).
pub fn xi1_hypergeometric(ctx: &QContext, zbar: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    let q = ctx.q();
    let w = ci(0.0, -ctx.mu() * (1.0 - q * q)) * rpow(q, 1.0 - ctx.inu()) * zbar;
    basic_hypergeometric(&[ci(0.0, 0.0)], &[ci(-q, 0.0)], q, w, tol)
}

/// ξ₂(z) through its hypergeometric label:
/// δ=0: ₀Φ₂(−; 0, −q; q, −iμ(1−q²)q^{3−iν}z), δ=1: ₁Φ₁(0; −q; q, −iμ(1−q²)qz),
/// δ=2: ₃Φ₁(0,0,0; −q; q, −iμ(1−q²)q^{iν−1}z).
pub fn xi2_hypergeometric(ctx: &QContext, z: Complex64, tol: &Tolerances) -> QResult<SeriesValue> {
    let q = ctx.q();
    let zero = ci(0.0, 0.0);
    let pre = ci(0.0, -ctx.mu() * (1.0 - q * q)) * z;
    match ctx.delta().value() {
        0 => basic_hypergeometric(&[], &[zero, ci(-q, 0.0)], q, pre * rpow(q, 3.0 - ctx.inu()), tol),
        1 => basic_hypergeometric(&[zero], &[ci(-q, 0.0)], q, pre * q, tol),
        _ => basic_hypergeometric(&[zero, zero, zero], &[ci(-q, 0.0)], q, pre * rpow(q, ctx.inu() - 1.0), tol),
    }
}

/// max_{n,k ≤ N+1} of the relative mismatch in B*.ψ_R.B = −μ² q^{(iν−2)(δ−1)} ψ_R(z̄, q^{2−2δ}z)
/// for ψ_R = ξ₁(z̄)ξ₂(z), compared coefficient by coefficient at z̄^{n−1}z^{k−1}.
pub fn whittaker_condition_residual(ctx: &QContext, n: usize) -> QResult<f64> {
    if n < 2 {
        return Err(QError::InvalidParameter(format!("truncation order must be at least 2, got {n}")));
    }
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let ps = PrincipalSeries::new(ctx);
    let x1 = xi1_series(ctx, n + 1);
    let x2 = xi2_series(ctx, n + 1);
    let pre = -ctx.mu().powi(2) * rpow(q, (ctx.inu() - 2.0) * (d - 1.0));
    let mut worst: f64 = 0.0;
    for a in 0..=n + 1 {
        for b in 0..=n + 1 {
            // image of z̄^a z^b under B* (left, on z̄) and B (right, on z)
            let lhs = match (ps.on_monomial(Generator::B, a), ps.on_monomial(Generator::B, b)) {
                (Some((ta, wa)), Some((tb, wb))) => Some(((ta, tb), x1.coefficient(a) * x2.coefficient(b) * wa * wb)),
                _ => None,
            };
            if let Some(((ta, tb), l)) = lhs {
                let r = pre * x1.coefficient(ta) * x2.coefficient(tb) * q.powf((2.0 - 2.0 * d) * tb as f64);
                worst = worst.max((l - r).norm() / l.norm().max(r.norm()).max(1e-300));
            }
        }
    }
    Ok(worst)
}

/// Exponent in the coefficient recursion a_n c_k = −μ² a_{n−1} c_{k−1} q^{e(n,k)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecursionExponent {
    /// e = iνδ − 2iν + (3−2δ)k + n, as forced by the operators
    Derived,
    /// e = iνδ − 2iν − 2δ + 1 + (k−1)(3−2δ) + n, smaller by 2
    Displayed,
}

/// Worst relative violation of the recursion by the a_n, c_k laws, 1 ≤ n,k ≤ N.
pub fn coefficient_recursion_residual(ctx: &QContext, n_max: usize, form: RecursionExponent) -> f64 {
    let d = ctx.delta().as_f64();
    let inu = ctx.inu();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        for k in 1..=n_max {
            let (nf, kf) = (n as f64, k as f64);
            let e = match form {
                RecursionExponent::Derived => inu * d - 2.0 * inu + (3.0 - 2.0 * d) * kf + nf,
                RecursionExponent::Displayed => inu * d - 2.0 * inu - 2.0 * d + 1.0 + (kf - 1.0) * (3.0 - 2.0 * d) + nf,
            };
            let lhs = xi1_law(ctx, n) * xi2_law(ctx, k);
            let rhs = -ctx.mu().powi(2) * xi1_law(ctx, n - 1) * xi2_law(ctx, k - 1) * rpow(ctx.q(), e);
            worst = worst.max((lhs - rhs).norm() / lhs.norm());
        }
    }
    worst
}

/// Radial weight (−q^{2iν+4}ρ²;q²)_∞ / (−q²ρ²;q²)_∞ of the matrix element.
pub fn radial_weight(ctx: &QContext, rho: f64) -> Complex64 {
    let q = ctx.q();
    let b = q * q;
    let x = rho * rho;
    poch_inf(-rpow(q, 2.0 * ctx.inu() + 4.0) * x, b) / poch_inf(ci(-b * x, 0.0), b)
}

/// Partial sum through `terms` of the expansion
/// (1+ρ²)W(ρ) = (1+ρ²)(q^{2iν};q²)_∞ / ((1+q^{2iν+2}ρ²)(q²;q²)_∞)
///              · Σ_n (q^{−2iν+2};q²)_n q^{2iνn} / ((q²;q²)_n (1+q^{2n+2}ρ²)).
/// The summands have modulus tending to |(q^{−2iν+2};q²)_∞/(q²;q²)_∞| ≠ 0, so
/// the partial sums circle without converging.
pub fn radial_weight_expansion(ctx: &QContext, rho: f64, terms: usize) -> Complex64 {
    let q = ctx.q();
    let b = q * q;
    let inu = ctx.inu();
    let x = rho * rho;
    let a = rpow(q, -2.0 * inu + 2.0);
    let z = rpow(q, 2.0 * inu);
    let mut c = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..terms {
        if n > 0 {
            let m = (n - 1) as f64;
            c *= z * (1.0 - a * b.powf(m)) / (1.0 - b.powf(m + 1.0));
        }
        sum += c / (1.0 + b.powf(n as f64 + 1.0) * x);
    }
    (1.0 + x) * poch_inf(z, b) / ((1.0 + rpow(q, 2.0 * inu + 2.0) * x) * poch_inf(ci(b, 0.0), b)) * sum
}

/// A radial matrix-element value with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixElementResult {
    pub h: f64,
    pub value: Complex64,
    pub quadrature_error: f64,
    pub terms: usize,
}

/// Largest radius tried before declaring the radial integral divergent.
pub const MAX_RADIUS: f64 = 4096.0;

/// Integrand W(ρ)·J₀^{(j)}(2μ(1−q²)q^{(iν−1)δ/2+1}H⁻¹ρ; q²)·ρ.
pub fn radial_integrand(ctx: &QContext, h: f64, rho: f64, tol: &Tolerances) -> QResult<Complex64> {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let y = 2.0 * ctx.mu() * (1.0 - q * q) * rpow(q, (ctx.inu() - 1.0) * d / 2.0 + 1.0) * (rho / h);
    let j0 = bessel_j0(q, BesselKind::for_delta(ctx.delta()), y, tol)?;
    Ok(radial_weight(ctx, rho) * j0.value * rho)
}

/// F(H) = 4π q^{iν−1} H^{iν−1} ∫₀^∞ W(ρ) J₀(…ρ) ρ dρ over panels [0,1], [1,2], [2,4], …
///
/// The integral exists only if the integrand decays; when the panels stop
/// shrinking before [`MAX_RADIUS`] the result is `NonConverged`.
pub fn matrix_element_radial(ctx: &QContext, h: f64, tol: &Tolerances) -> QResult<MatrixElementResult> {
    if !(h > 0.0) {
        return Err(QError::Domain(format!("H must be positive, got {h}")));
    }
    let q = ctx.q();
    if ctx.delta().value() == 2 {
        let t = ctx.nu() * q.ln() / PI - 0.5;
        if (t - t.round()).abs() < 1e-9 {
            return Err(QError::Pole("ν ln q is a half-odd multiple of π".into()));
        }
    }
    let f = |rho: f64| radial_integrand(ctx, h, rho, tol).unwrap_or(ci(f64::NAN, f64::NAN));
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    let mut quiet = 0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi <= MAX_RADIUS {
        let crude = integrate(f, lo, hi, f64::INFINITY, 0)?.value.norm();
        let p = integrate(f, lo, hi, tol.rel_eps * crude.max(1e-300), 30)?;
        total += p.value;
        err += p.error;
        evals += p.evaluations;
        if p.value.norm() <= tol.rel_eps * total.norm() + tol.abs_eps {
            quiet += 1;
            if quiet >= 3 {
                let pre = 4.0 * PI * rpow(q, ctx.inu() - 1.0) * rpow(h, ctx.inu() - 1.0);
                return Ok(MatrixElementResult { h, value: pre * total, quadrature_error: pre.norm() * err, terms: evals });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(QError::NonConverged { terms: evals, tail: f(lo).norm() * lo })
}

/// Relative residual of
/// [qF(qH) − (q^{iν}+q^{−iν})F(H) + q⁻¹F(H/q)]/(1−q²)² − μ²q^{−δ−1}H⁻²F(q^{δ−1}H) = 0.
pub fn matrix_element_equation_residual<F>(ctx: &QContext, f: F, h: f64) -> QResult<f64>
where
    F: Fn(f64) -> QResult<Complex64>,
{
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let inu = ctx.inu();
    let t1 = q * f(q * h)?;
    let t2 = -(rpow(q, inu) + rpow(q, -inu)) * f(h)?;
    let t3 = f(h / q)? / q;
    let s = (1.0 - q * q).powi(2);
    let t4 = -ctx.mu().powi(2) * q.powf(-d - 1.0) / (h * h) * f(q.powf(d - 1.0) * h)?;
    let r = (t1 + t2 + t3) / s + t4;
    let scale = (t1.norm() + t2.norm() + t3.norm()) / s + t4.norm();
    Ok(r.norm() / scale.max(1e-300))
}

/// A term c·z̄^m z^n of a test vector; every term carries the same radial
/// weight e_{q²}(−|z|²) = 1/(−|z|²;q²)_∞, evaluated analytically off the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMonomial {
    pub coefficient: Complex64,
    pub bar_degree: u32,
    pub degree: u32,
}

fn q_gaussian(q: f64, x: Complex64) -> Complex64 {
    1.0 / poch_inf(-x, q * q)
}

/// <f|g> = q^{iν−1} ∫∫ conj(f(z̄,z)) g(q^{iν+1}z̄, q^{iν−1}z) dz̄ dz in polar form.
///
/// With z = ρe^{iφ} and dz̄dz = 2ρdρdφ only terms with equal total angular
/// frequency survive the φ integral, leaving one radial quadrature per pair.
pub fn hermitian_form(ctx: &QContext, f: &[WeightedMonomial], g: &[WeightedMonomial]) -> QResult<Complex64> {
    let q = ctx.q();
    let inu = ctx.inu();
    let rot = rpow(q, 2.0 * inu);
    let mut total = Complex64::new(0.0, 0.0);
    for a in f {
        for b in g {
            // conj(z̄^m z^n) = z̄^n z^m on the real-q slice
            if a.degree + b.bar_degree != a.bar_degree + b.degree {
                continue;
            }
            let power = (a.bar_degree + a.degree + b.bar_degree + b.degree + 1) as i32;
            let radial = |rho: f64| {
                let x = rho * rho;
                q_gaussian(q, ci(x, 0.0)).conj() * q_gaussian(q, rot * x) * rho.powi(power)
            };
            let near = integrate(radial, 0.0, 1.0, 1e-14, 40)?.value;
            let far = integrate(|u: f64| radial(u.exp()) * u.exp(), 0.0, 8.0, 1e-14, 40)?.value;
            let shift = rpow(q, (inu + 1.0) * b.bar_degree as f64 + (inu - 1.0) * b.degree as f64);
            total += a.coefficient.conj() * b.coefficient * shift * (near + far);
        }
    }
    Ok(total * 4.0 * PI * rpow(q, inu - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qbessel::macdonald_k;

    fn ctx(q: f64, d: i32, mu: f64, nu: f64) -> QContext {
        QContext::new(q, d, mu, nu).unwrap()
    }

    fn mono(c: Complex64, m: u32, n: u32) -> WeightedMonomial {
        WeightedMonomial { coefficient: c, bar_degree: m, degree: n }
    }

    #[test]
    fn psi_l_at_origin_and_first_coefficient() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        assert_eq!(psi_l(&c, 0.0, InvariantForm::Derived).unwrap().value, ci(1.0, 0.0));
        let s = psi_l_series(&c, 3, InvariantForm::Derived);
        let expect = -0.25 * (1.0 - rpow(0.5, -2.0 * c.inu() + 2.0)) / 0.75;
        assert!((s.coefficient(1) - expect).norm() < 1e-15);
    }

    #[test]
    fn psi_l_product_matches_series() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        for form in [InvariantForm::Derived, InvariantForm::Displayed] {
            let p = psi_l(&c, 0.3, form).unwrap().value;
            let s = psi_l_series(&c, 40, form).eval(ci(0.3, 0.0)).value;
            assert!((p - s).norm() < 1e-10, "{form:?}");
        }
    }

    #[test]
    fn psi_l_invariance_selects_derived_form() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        assert!(psi_l_invariance_residual(&c, InvariantForm::Derived, 12) < 1e-14);
        assert!(psi_l_invariance_residual(&c, InvariantForm::Displayed, 12) > 1e-2);
    }

    #[test]
    fn psi_l_coefficients_alternate_at_zero_nu() {
        let c = ctx(0.5, 1, 1.0, 0.0);
        let s = psi_l_series(&c, 10, InvariantForm::Derived);
        for (m, v) in s.coefficients().iter().enumerate() {
            assert!(v.re != 0.0 && (v.re > 0.0) == (m % 2 == 0));
        }
    }

    #[test]
    fn xi_normalization() {
        let tol = Tolerances::default();
        for d in [0, 1, 2] {
            let c = ctx(0.5, d, 1.0, 0.7);
            assert_eq!(xi1(&c, ci(0.0, 0.0), &tol).unwrap().value, ci(1.0, 0.0));
            assert_eq!(xi2(&c, ci(0.0, 0.0), &tol).unwrap().value, ci(1.0, 0.0));
        }
    }

    #[test]
    fn xi_laws_match_hypergeometric_labels() {
        let tol = Tolerances::default();
        for d in [0, 1] {
            for mu in [0.5, 1.0, 2.0] {
                let c = ctx(0.5, d, mu, 0.7);
                for w in [ci(0.3, -0.2), ci(-1.5, 0.7), ci(4.0, 1.0)] {
                    let a = xi1(&c, w, &tol).unwrap().value;
                    let b = xi1_hypergeometric(&c, w, &tol).unwrap().value;
                    assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
                    let a = xi2(&c, w, &tol).unwrap().value;
                    let b = xi2_hypergeometric(&c, w, &tol).unwrap().value;
                    assert!((a - b).norm() < 1e-12 * a.norm().max(1.0), "δ={d} μ={mu} w={w}");
                }
            }
        }
    }

    #[test]
    fn xi2_radius_depends_on_delta() {
        let tol = Tolerances::default();
        // the term ratio |t_{k+1}/t_k| tends to 0 for δ < 3/2 and grows like q^{−k} for δ = 2
        let c1 = ctx(0.5, 1, 1.0, 0.7);
        let s1 = xi2_series(&c1, 30);
        assert!((s1.coefficient(30) / s1.coefficient(29)).norm() < 1e-3);
        let c2 = ctx(0.5, 2, 1.0, 0.7);
        let s2 = xi2_series(&c2, 30);
        let r = |k: usize| (s2.coefficient(k + 1) / s2.coefficient(k)).norm();
        for k in 20..29 {
            assert!((r(k + 1) / r(k) - 2.0).abs() < 1e-6);
        }
        assert!(xi2(&c2, ci(1e-3, 0.0), &tol).is_err());
        assert!(xi2(&c1, ci(50.0, 0.0), &tol).is_ok());
    }

    #[test]
    fn whittaker_condition_holds() {
        for d in [0, 1, 2] {
            for mu in [0.5, 1.0] {
                let c = ctx(0.5, d, mu, 0.7);
                assert!(whittaker_condition_residual(&c, 8).unwrap() < 1e-13, "δ={d} μ={mu}");
            }
        }
        assert!(whittaker_condition_residual(&ctx(0.5, 1, 1.0, 0.7), 1).is_err());
    }

    #[test]
    fn recursion_exponent_forms() {
        for d in [0, 1, 2] {
            let c = ctx(0.5, d, 1.0, 0.7);
            assert!(coefficient_recursion_residual(&c, 8, RecursionExponent::Derived) < 1e-13);
            let bad = coefficient_recursion_residual(&c, 8, RecursionExponent::Displayed);
            assert!((bad - 3.0).abs() < 1e-12, "off by q^{{-2}} = 4: {bad}");
        }
    }

    #[test]
    fn radial_integrand_vanishes_at_origin() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        assert_eq!(radial_integrand(&c, 1.0, 0.0, &Tolerances::default()).unwrap().norm(), 0.0);
    }

    #[test]
    fn radial_integral_does_not_converge() {
        let tol = Tolerances::default();
        for d in [0, 1] {
            let c = ctx(0.5, d, 1.0, 0.8);
            let r = matrix_element_radial(&c, 1.0, &tol);
            assert!(matches!(r, Err(QError::NonConverged { .. })), "δ={d}: {r:?}");
        }
    }

    #[test]
    fn weight_expansion_does_not_converge() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        for rho in [0.5, 1.0, 3.0] {
            let direct = (1.0 + rho * rho) * radial_weight(&c, rho);
            let errs: Vec<f64> = [50, 51, 52, 53].iter().map(|&n| (radial_weight_expansion(&c, rho, n) - direct).norm()).collect();
            assert!(errs.iter().all(|e| *e > 0.5), "ρ={rho}: {errs:?}");
            let step = (radial_weight_expansion(&c, rho, 201) - radial_weight_expansion(&c, rho, 200)).norm();
            assert!(step > 0.1);
        }
    }

    #[test]
    fn equation_residual_accepts_rescaled_macdonald() {
        let tol = Tolerances::default();
        for d in [0, 1] {
            let c = ctx(0.5, d, 1.0, 0.8);
            let f = |h: f64| Ok(macdonald_k(&c, 1.0 / h, &tol)?.value / h);
            for n in -2..=2 {
                let h = 0.5f64.powi(n);
                assert!(matrix_element_equation_residual(&c, f, h).unwrap() < 1e-9);
            }
            let g = |h: f64| Ok(macdonald_k(&c, 1.0 / h, &tol)?.value);
            assert!(matrix_element_equation_residual(&c, g, 1.0).unwrap() > 1e-3);
        }
    }

    #[test]
    fn hermitian_form_basics() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        let g = [mono(ci(1.0, 0.5), 1, 1), mono(ci(0.3, 0.0), 0, 0)];
        assert_eq!(hermitian_form(&c, &[], &g).unwrap(), ci(0.0, 0.0));
        // different angular frequency pairs to zero
        let v = hermitian_form(&c, &[mono(ci(1.0, 0.0), 1, 0)], &[mono(ci(1.0, 0.0), 0, 0)]).unwrap();
        assert_eq!(v, ci(0.0, 0.0));
    }

    #[test]
    fn hermitian_form_conjugate_symmetry() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        let pairs = [
            (mono(ci(1.0, 0.0), 0, 0), mono(ci(1.0, 0.0), 0, 0)),
            (mono(ci(1.0, 0.0), 1, 1), mono(ci(0.0, 1.0), 0, 0)),
            (mono(ci(2.0, -1.0), 2, 1), mono(ci(1.0, 0.5), 1, 0)),
            (mono(ci(1.0, 0.0), 0, 2), mono(ci(1.0, 0.0), 1, 3)),
        ];
        for (f, g) in pairs {
            let fg = hermitian_form(&c, &[f], &[g]).unwrap();
            let gf = hermitian_form(&c, &[g], &[f]).unwrap();
            assert!((fg - gf.conj()).norm() < 1e-9 * fg.norm(), "{f:?} {g:?}: {fg} vs {gf}");
        }
    }
}
