//! Mellin–Barnes machinery: the kernel g(s), the vertical-line integral for
//! the decaying Macdonald-type function, its residue-lattice expansion, the
//! forward Mellin transform, and the order-lowering ladder identity.
//!
//! Normalization used throughout:
//!
//! K_B(x) = (i ln q / (4π(1−q²))) · q^{(4−δ)ν²/4} · ∫_{σ−i∞}^{σ+i∞} g(s) (μx)^{−s} ds,
//!
//! g(s) = q^{−δs²/4 + (2+δ)s/2} Γ_{q²}((s+iν)/2) Γ_{q²}((s−iν)/2).
//!
//! Γ_{q²} has poles at z = −n + iπk/ln q for every integer k. The k = 0
//! residues of K_B reproduce the two-term combination
//! [`crate::qbessel::macdonald_k`]; the k ≠ 0 families add small q-periodic
//! corrections, so the two agree only up to those terms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};
use crate::qbessel::{macdonald_k_at, standard_argument};
use crate::qcalc::{poch_n, qgamma_value, rpow, QContext, SeriesValue, Tolerances};
use crate::quadrature::integrate;

fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// g(s) = q^{−δs²/4 + (2+δ)s/2} Γ_{q²}((s+iν)/2) Γ_{q²}((s−iν)/2).
pub fn g_of_s(ctx: &QContext, s: Complex64) -> QResult<Complex64> {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let b = q * q;
    let inu = ctx.inu();
    let ga = qgamma_value((s + inu) * 0.5, b)?;
    let gb = qgamma_value((s - inu) * 0.5, b)?;
    Ok(rpow(q, -d * s * s / 4.0 + (2.0 + d) * s / 2.0) * ga * gb)
}

/// Relative residual of
/// q^{−s}(1−q^{s+iν})(1−q^{s−iν})/(1−q²)² g(s) = q^{(δ−1)s−2} g(s+2).
pub fn g_recurrence_residual(ctx: &QContext, s: Complex64) -> QResult<f64> {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let inu = ctx.inu();
    let lhs = rpow(q, -s) * (1.0 - rpow(q, s + inu)) * (1.0 - rpow(q, s - inu)) / (1.0 - q * q).powi(2)
        * g_of_s(ctx, s)?;
    let rhs = rpow(q, (d - 1.0) * s - 2.0) * g_of_s(ctx, s + 2.0)?;
    Ok((lhs - rhs).norm() / rhs.norm().max(lhs.norm()).max(1e-300))
}

/// Vertical contour s = σ + it, |t| ≤ T, uniform step h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarnesContour {
    sigma: f64,
    half_height: f64,
    step: f64,
}

impl BarnesContour {
    pub fn new(sigma: f64, half_height: f64, step: f64) -> QResult<Self> {
        if !(sigma > 0.0) {
            return Err(QError::InvalidParameter(format!("contour abscissa must be positive, got {sigma}")));
        }
        if !(half_height > 0.0) || !(step > 0.0) || step > half_height / 50.0 {
            return Err(QError::InvalidParameter("contour needs T > 0 and 0 < h ≤ T/50".into()));
        }
        Ok(Self { sigma, half_height, step })
    }

    /// σ = |ν| + 1, T = 20, h = T/2000.
    pub fn default_for(ctx: &QContext) -> Self {
        Self { sigma: ctx.nu().abs() + 1.0, half_height: 20.0, step: 0.01 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn with_height(&self, t: f64) -> Self {
        let ratio = self.step / self.half_height;
        Self { half_height: t, step: t * ratio, ..*self }
    }
}

/// Largest T tried before giving up on the tail.
pub const MAX_HALF_HEIGHT: f64 = 400.0;

/// g(σ+it) sampled on the trapezoid nodes, reusable for many x.
#[derive(Debug, Clone)]
pub struct BarnesKernel {
    ctx: QContext,
    contour: BarnesContour,
    nodes: Vec<(f64, Complex64)>,
    prefactor: f64,
    tail: f64,
}

impl BarnesKernel {
    /// Sample the kernel, doubling T from the contour's value until the tail
    /// envelope falls below `tol.rel_eps` of the running scale.
    pub fn build(ctx: &QContext, contour: BarnesContour, tol: &Tolerances) -> QResult<Self> {
        let q = ctx.q();
        let d = ctx.delta().as_f64();
        let nu = ctx.nu();
        let prefactor = -q.ln() / (4.0 * PI * (1.0 - q * q)) * q.powf((4.0 - d) * nu * nu / 4.0);
        let period = 2.0 * PI / q.ln().abs();
        let mut c = contour;
        loop {
            let n = (c.half_height / c.step).round() as i64;
            let mut nodes = Vec::with_capacity(2 * n as usize + 1);
            let mut peak: f64 = 0.0;
            for j in -n..=n {
                let t = j as f64 * c.step;
                let g = g_of_s(ctx, ci(c.sigma, t))?;
                peak = peak.max(g.norm());
                nodes.push((t, g));
            }
            // envelope over the last Γ period at each end, continued with the
            // Gaussian factor |q^{−δs²/4}| ∝ exp(−δ|ln q| t²/4)
            let edge: f64 = nodes
                .iter()
                .filter(|(t, _)| t.abs() >= c.half_height - period)
                .map(|(_, g)| g.norm())
                .fold(0.0, f64::max);
            let tail = if d > 0.0 {
                let a = d * q.ln().abs() / 4.0;
                edge * (1.0 / (2.0 * a * c.half_height)).min(period)
            } else {
                f64::INFINITY
            };
            if tail <= tol.rel_eps * peak {
                return Ok(Self { ctx: *ctx, contour: c, nodes, prefactor, tail: tail * 2.0 });
            }
            if 2.0 * c.half_height > MAX_HALF_HEIGHT {
                return Err(QError::NonConverged { terms: nodes.len(), tail });
            }
            c = c.with_height(2.0 * c.half_height);
        }
    }

    pub fn contour(&self) -> &BarnesContour {
        &self.contour
    }

    /// K_B(x) by the trapezoid rule on the sampled nodes.
    pub fn eval(&self, x: f64) -> QResult<SeriesValue> {
        if !(x > 0.0) {
            return Err(QError::Domain(format!("x must be positive, got {x}")));
        }
        let lx = (self.ctx.mu() * x).ln();
        let sigma = self.contour.sigma;
        let scale = (-sigma * lx).exp();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut comp = Complex64::new(0.0, 0.0);
        for &(t, g) in &self.nodes {
            // Kahan-compensated accumulation keeps the order-independent result stable
            let y = g * ci(0.0, -t * lx).exp() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
        }
        let value = sum * self.contour.step * scale * self.prefactor;
        Ok(SeriesValue {
            value,
            terms_used: self.nodes.len(),
            tail_estimate: self.tail * scale * self.prefactor,
        })
    }
}

/// The Barnes integral at x; see the module docs for the normalization.
pub fn barnes_k(ctx: &QContext, x: f64, contour: BarnesContour, tol: &Tolerances) -> QResult<SeriesValue> {
    BarnesKernel::build(ctx, contour, tol)?.eval(x)
}

/// Ratio of the alternative printed normalization to [`barnes_k`]:
/// the printed prefactor −ln q·μ^{−iν−2}A q^{(4−δ)ν²/4−δ/2}/(4π(1−q²)) with
/// x^{−s} in place of (μx)^{−s}. For μ = 1 (and A = 1) this is the constant −i q^{−δ/2}.
pub fn printed_barnes_prefactor_ratio(ctx: &QContext) -> Complex64 {
    ci(0.0, -1.0) * ctx.q().powf(-0.5 * ctx.delta().as_f64())
}

/// The same function as [`barnes_k`] computed from its residues at every
/// pole family k ∈ [−k_max, k_max]: the two routes are independent.
pub fn barnes_residue_series(ctx: &QContext, x: f64, k_max: i32, tol: &Tolerances) -> QResult<SeriesValue> {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    if d == 0.0 {
        return Err(QError::NonConverged { terms: 0, tail: f64::INFINITY });
    }
    let b = q * q;
    let lq = q.ln();
    let tau = 2.0 * PI / lq;
    let lmx = (ctx.mu() * x).ln();
    let mut total = Complex64::new(0.0, 0.0);
    let mut terms = 0;
    for sign in [1.0, -1.0] {
        let inu = ctx.inu() * sign;
        for k in -k_max..=k_max {
            let kf = k as f64;
            let mut family = Complex64::new(0.0, 0.0);
            let mut small = 0;
            for n in 0..tol.max_terms {
                let nf = n as f64;
                let s = -inu - 2.0 * nf + ci(0.0, tau * kf);
                let res_z = (if n % 2 == 0 { 1.0 } else { -1.0 }) * q.powf(nf * (nf + 1.0))
                    * rpow(1.0 - b, ci(1.0 + nf, -PI * kf / lq))
                    / (-2.0 * lq * poch_n(ci(b, 0.0), b, n));
                let term = 2.0 * res_z
                    * rpow(q, -d * s * s / 4.0 + (2.0 + d) * s / 2.0)
                    * qgamma_value((s - inu) * 0.5, b)?
                    * (-s * lmx).exp();
                family += term;
                terms += 1;
                if term.norm() < tol.rel_eps * family.norm() + tol.abs_eps {
                    small += 1;
                    if small >= 3 {
                        break;
                    }
                } else {
                    small = 0;
                }
            }
            total += family;
        }
    }
    // (1/2π)∫ g(μx)^{−s} ds = i Σ Res, so K_B = −(ln q/(2(1−q²))) q^{(4−δ)ν²/4} Σ Res
    let pref = -lq / (2.0 * (1.0 - b)) * q.powf((4.0 - d) * ctx.nu().powi(2) / 4.0);
    Ok(SeriesValue { value: total * pref, terms_used: terms, tail_estimate: 0.0 })
}

/// ∫_0^∞ K_B(x) x^{s−1} dx, computed in the variable u = ln x.
pub fn mellin_forward(ctx: &QContext, s: Complex64, contour: BarnesContour, tol: &Tolerances) -> QResult<Complex64> {
    if !(s.re > 0.0) {
        return Err(QError::Domain(format!("forward transform needs Re s > 0, got {s}")));
    }
    let kernel = BarnesKernel::build(ctx, contour, tol)?;
    // K_B is bounded near 0 and decays faster than any power at ∞
    let lo = -40.0 / s.re;
    let hi = 6.0 - ctx.mu().ln();
    let f = |u: f64| {
        let x = u.exp();
        kernel.eval(x).map(|v| v.value * (s * u).exp()).unwrap_or(ci(f64::NAN, f64::NAN))
    };
    Ok(integrate(f, lo, hi, 1e-12, 40)?.value)
}

/// B(s) with g(s) = B·∫_0^∞ K_B(x)x^{s−1}dx: B = −2(1−q²)μ^{s}q^{−(4−δ)ν²/4}/ln q.
pub fn mellin_constant_b(ctx: &QContext, s: Complex64) -> Complex64 {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    -2.0 * (1.0 - q * q) * rpow(ctx.mu(), s) * q.powf(-(4.0 - d) * ctx.nu().powi(2) / 4.0) / q.ln()
}

/// The printed constant −(2(1−q²)/ln q)μ^{iν+2}A_{−iν}^{|1−δ|}q^{−(4−δ)ν²/4+δ/2}
/// (with A = 1 for real ν).
pub fn mellin_constant_b_as_printed(ctx: &QContext) -> Complex64 {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    -2.0 * (1.0 - q * q) * rpow(ctx.mu(), ctx.inu() + 2.0) * q.powf(-(4.0 - d) * ctx.nu().powi(2) / 4.0 + d / 2.0)
        / q.ln()
}

/// B extracted numerically: g(s) / ∫K_B x^{s−1}.
pub fn extract_b(ctx: &QContext, s: Complex64, contour: BarnesContour, tol: &Tolerances) -> QResult<Complex64> {
    Ok(g_of_s(ctx, s)? / mellin_forward(ctx, s, contour, tol)?)
}

/// Both sides of the order-lowering identity at x:
/// (q^{δ/2}/(μ(1+q)x))·D̃_x[x^{iν}K_{iν}(y(x))]  and
/// −q^{−(2−δ)(iν−1)/2}·x^{iν−1}·K_{iν−1}(y(q^{(2−δ)/2}x)),
/// with y(x) = 2μ(1−q²)q^{−δ/2}x and D̃ f(x) = (f(x) − f(qx))/((1−q)x).
pub fn ladder_sides(ctx: &QContext, x: f64, tol: &Tolerances) -> QResult<(Complex64, Complex64)> {
    let q = ctx.q();
    let d = ctx.delta().as_f64();
    let inu = ctx.inu();
    let k = |order: Complex64, xx: f64| {
        macdonald_k_at(q, ctx.delta(), order, ci(standard_argument(ctx, xx), 0.0), tol).map(|v| v.value)
    };
    let f = |xx: f64| -> QResult<Complex64> { Ok(rpow(xx, inu) * k(inu, xx)?) };
    let dtilde = (f(x)? - f(q * x)?) / ((1.0 - q) * x);
    let lhs = q.powf(d / 2.0) / (ctx.mu() * (1.0 + q) * x) * dtilde;
    let rhs = -rpow(q, -(2.0 - d) * (inu - 1.0) / 2.0) * rpow(x, inu - 1.0) * k(inu - 1.0, q.powf((2.0 - d) / 2.0) * x)?;
    Ok((lhs, rhs))
}

/// max over `xs` of |lhs − rhs| / |rhs| for [`ladder_sides`].
pub fn ladder_identity_check(ctx: &QContext, xs: &[f64], tol: &Tolerances) -> QResult<f64> {
    let mut worst: f64 = 0.0;
    for &x in xs {
        let (l, r) = ladder_sides(ctx, x, tol)?;
        worst = worst.max((l - r).norm() / r.norm().max(1e-300));
    }
    Ok(worst)
}

/// (∫_0^∞ D̃f dx, (ln q/(1−q))·f(0)) with the ordinary integral; the identity
/// needs f to decay at infinity.
pub fn boundary_identity_sides<F>(f: F, q: f64) -> QResult<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let df = |x: f64| ci((f(x) - f(q * x)) / ((1.0 - q) * x), 0.0);
    // D̃f is O(x) near 0; integrate on a log scale beyond 1, where any
    // decaying f contributes only a few e-folds of x
    let near = integrate(df, 0.0, 1.0, 1e-14, 40)?.value.re;
    let far = integrate(|u: f64| df(u.exp()) * u.exp(), 0.0, 25.0, 1e-14, 40)?.value.re;
    Ok((near + far, q.ln() / (1.0 - q) * f(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qbessel::macdonald_k;
    use crate::qcalc::poch_inf;

    fn ctx(q: f64, d: i32, mu: f64, nu: f64) -> QContext {
        QContext::new(q, d, mu, nu).unwrap()
    }

    #[test]
    fn g_even_in_nu_and_delta_zero_form() {
        let s = ci(1.7, 0.4);
        let a = g_of_s(&ctx(0.5, 1, 1.0, 0.8), s).unwrap();
        let b = g_of_s(&ctx(0.5, 1, 1.0, -0.8), s).unwrap();
        assert!((a - b).norm() < 1e-15 * a.norm());
        let c0 = ctx(0.5, 0, 1.0, 0.8);
        let g = g_of_s(&c0, s).unwrap();
        let direct = rpow(0.5, s)
            * qgamma_value((s + c0.inu()) * 0.5, 0.25).unwrap()
            * qgamma_value((s - c0.inu()) * 0.5, 0.25).unwrap();
        assert!((g - direct).norm() < 1e-15 * g.norm());
    }

    #[test]
    fn g_recurrence_holds() {
        for d in [0, 1, 2] {
            let c = ctx(0.4, d, 1.0, 1.1);
            for s in [ci(0.3, 0.2), ci(1.5, -2.0), ci(-0.7, 1.3), ci(2.2, 5.0)] {
                assert!(g_recurrence_residual(&c, s).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn contour_validation() {
        assert!(BarnesContour::new(1.0, 20.0, 0.5).is_err());
        assert!(BarnesContour::new(-1.0, 20.0, 0.01).is_err());
        assert!(BarnesContour::new(1.8, 20.0, 0.01).is_ok());
    }

    #[test]
    fn barnes_value_is_real_for_real_parameters() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        let v = barnes_k(&c, 1.0, BarnesContour::default_for(&c), &Tolerances::default()).unwrap();
        assert!(v.value.im.abs() < 1e-10 * v.value.norm());
    }

    #[test]
    fn barnes_contour_and_residue_lattice_agree() {
        let tol = Tolerances::default();
        for (q, nu) in [(0.5, 0.5), (0.5, 1.3), (0.3, 0.5), (0.3, 1.3)] {
            let c = ctx(q, 1, 1.0, nu);
            let kernel = BarnesKernel::build(&c, BarnesContour::default_for(&c), &tol).unwrap();
            for x in [0.5, 1.0, 2.0] {
                let a = kernel.eval(x).unwrap().value;
                let b = barnes_residue_series(&c, x, 4, &tol).unwrap().value;
                assert!((a - b).norm() < 1e-10 * b.norm(), "q={q} ν={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn real_axis_residues_reproduce_two_term_combination() {
        let tol = Tolerances::default();
        let c = ctx(0.5, 1, 1.0, 0.8);
        for x in [0.5, 1.0, 2.0] {
            let k0 = barnes_residue_series(&c, x, 0, &tol).unwrap().value;
            let k77 = macdonald_k(&c, x, &tol).unwrap().value;
            assert!((k0 - k77).norm() < 1e-11 * k77.norm(), "x={x}: {k0} vs {k77}");
        }
    }

    #[test]
    fn barnes_stable_under_refinement() {
        let tol = Tolerances::default();
        let c = ctx(0.5, 1, 1.0, 0.8);
        let base = BarnesContour::new(1.8, 20.0, 0.01).unwrap();
        let v1 = barnes_k(&c, 1.0, base, &tol).unwrap();
        let v2 = barnes_k(&c, 1.0, BarnesContour::new(1.8, 40.0, 0.02).unwrap(), &tol).unwrap();
        let v3 = barnes_k(&c, 1.0, BarnesContour::new(1.8, 20.0, 0.005).unwrap(), &tol).unwrap();
        assert!((v1.value - v2.value).norm() <= v1.tail_estimate.max(1e-14 * v1.value.norm()));
        assert!((v1.value - v3.value).norm() < 1e-8 * v1.value.norm());
    }

    #[test]
    fn barnes_diverges_without_gaussian_factor() {
        let c = ctx(0.5, 0, 1.0, 0.8);
        let r = barnes_k(&c, 1.0, BarnesContour::default_for(&c), &Tolerances::default());
        assert!(matches!(r, Err(QError::NonConverged { .. })));
    }

    #[test]
    fn barnes_decays_along_doubling_ladder() {
        let tol = Tolerances::default();
        let c = ctx(0.5, 1, 1.0, 0.8);
        let kernel = BarnesKernel::build(&c, BarnesContour::default_for(&c), &tol).unwrap();
        let vals: Vec<f64> = (0..7).map(|m| kernel.eval(2f64.powi(m)).unwrap().value.norm()).collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "{vals:?}");
        }
    }

    #[test]
    fn mellin_constant_extracted() {
        let tol = Tolerances::default();
        let c = ctx(0.5, 1, 1.0, 0.8);
        let contour = BarnesContour::default_for(&c);
        let s1 = ci(1.5, 0.0);
        let s2 = ci(2.5, 0.3);
        let b1 = extract_b(&c, s1, contour, &tol).unwrap();
        let b2 = extract_b(&c, s2, contour, &tol).unwrap();
        let closed = mellin_constant_b(&c, s1);
        assert!((b1 / closed - 1.0).norm() < 1e-6, "{b1} vs {closed}");
        assert!((b1 / b2 - 1.0).norm() < 1e-6);
        let printed = mellin_constant_b_as_printed(&c);
        assert!(((printed / closed) - 0.5f64.sqrt()).norm() < 1e-12);
    }

    #[test]
    fn mellin_strip_enforced() {
        let c = ctx(0.5, 1, 1.0, 0.8);
        assert!(mellin_forward(&c, ci(-0.5, 0.0), BarnesContour::default_for(&c), &Tolerances::default()).is_err());
    }

    #[test]
    fn ladder_identity() {
        let tol = Tolerances::default();
        for d in [0, 1] {
            let c = ctx(0.5, d, 1.0, 1.3);
            let r = ladder_identity_check(&c, &[0.5, 1.0, 2.0], &tol).unwrap();
            assert!(r < 1e-9, "δ={d}: {r}");
        }
    }

    #[test]
    fn boundary_identity_for_decaying_function() {
        let q = 0.5f64;
        // 1/(−x²;q²)_∞ summed in logs so that large x underflows cleanly
        let f = |x: f64| (-(0..200).map(|k| (x * x * q.powi(2 * k)).ln_1p()).sum::<f64>()).exp();
        assert!((f(0.7) - 1.0 / poch_inf(ci(-0.49, 0.0), q * q).re).abs() < 1e-15);
        let (lhs, rhs) = boundary_identity_sides(f, q).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * rhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn boundary_identity_needs_decay() {
        let (lhs, rhs) = boundary_identity_sides(|_| 2.0, 0.5).unwrap();
        assert_eq!(lhs, 0.0);
        assert!(rhs.abs() > 1.0);
    }
}
