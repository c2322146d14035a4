//! Two-body relativistic open Toda q-difference operator on geometric grids.
//!
//! Ĥ = −Δ_q + μ²q^{−2δ+2}x²(T_q)^{1−δ}, with T_q f(x) = f(qx) and
//! Δ_q ψ(x) = (ψ(qx) − 2ψ(x) + ψ(x/q)) / (q − q^{−1})².

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};
use crate::qcalc::{qnumber, QContext};

/// Complex samples at x₀·qⁿ for n in [lo, hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    q: f64,
    anchor: f64,
    lo: i32,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(q: f64, anchor: f64, lo: i32, samples: Vec<Complex64>) -> QResult<Self> {
        if !(q > 0.0 && q < 1.0) || !(anchor > 0.0) {
            return Err(QError::InvalidParameter("grid needs 0<q<1 and a positive anchor".into()));
        }
        if samples.is_empty() {
            return Err(QError::InvalidParameter("grid window is empty".into()));
        }
        Ok(Self { q, anchor, lo, samples })
    }

    /// Sample `f` on the window, failing on the first error.
    pub fn sample<F>(q: f64, anchor: f64, lo: i32, hi: i32, f: F) -> QResult<Self>
    where
        F: Fn(f64) -> QResult<Complex64>,
    {
        if hi < lo {
            return Err(QError::InvalidParameter(format!("empty window [{lo}, {hi}]")));
        }
        let g = Self { q, anchor, lo, samples: Vec::new() };
        let samples = (lo..=hi).map(|n| f(g.point(n))).collect::<QResult<Vec<_>>>()?;
        Self::new(q, anchor, lo, samples)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.samples.len() as i32 - 1
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// x₀·qⁿ.
    pub fn point(&self, n: i32) -> f64 {
        self.anchor * self.q.powi(n)
    }

    pub fn get(&self, n: i32) -> Option<Complex64> {
        if n < self.lo || n > self.hi() {
            None
        } else {
            Some(self.samples[(n - self.lo) as usize])
        }
    }

    /// Pointwise αf + βg on the common window.
    pub fn combine(&self, alpha: Complex64, other: &GridFunction, beta: Complex64) -> QResult<Self> {
        if self.q != other.q || self.anchor != other.anchor {
            return Err(QError::InvalidParameter("grids differ".into()));
        }
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        let samples = (lo..=hi)
            .map(|n| alpha * self.get(n).unwrap() + beta * other.get(n).unwrap())
            .collect();
        Self::new(self.q, self.anchor, lo, samples)
    }

    fn map_interior<F>(&self, mut f: F) -> QResult<Self>
    where
        F: FnMut(i32) -> Complex64,
    {
        if self.hi() - self.lo < 2 {
            return Err(QError::Domain("window too small for a second difference".into()));
        }
        let samples = (self.lo + 1..self.hi()).map(&mut f).collect();
        Self::new(self.q, self.anchor, self.lo + 1, samples)
    }
}

/// Centered second q-difference; the window loses one point at each end.
pub fn delta_q(f: &GridFunction) -> QResult<GridFunction> {
    let q = f.q;
    let den = (q - 1.0 / q).powi(2);
    f.map_interior(|n| {
        // index n+1 is qx, n−1 is x/q
        (f.get(n + 1).unwrap() - 2.0 * f.get(n).unwrap() + f.get(n - 1).unwrap()) / den
    })
}

/// Ĥ for a fixed context; δ is restricted to {0,1,2} by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TodaOperator {
    ctx: QContext,
}

impl TodaOperator {
    pub fn new(ctx: QContext) -> Self {
        Self { ctx }
    }

    pub fn ctx(&self) -> &QContext {
        &self.ctx
    }

    /// Coefficient μ²q^{−2δ+2} of x²(T_q)^{1−δ}.
    pub fn potential_coefficient(&self) -> f64 {
        let q = self.ctx.q();
        self.ctx.mu().powi(2) * q.powi(2 - 2 * self.ctx.delta().value())
    }

    /// Grid offset of (T_q)^{1−δ}: x ↦ q^{1−δ}x is index n + (1−δ).
    fn shift(&self) -> i32 {
        1 - self.ctx.delta().value()
    }

    fn check_grid(&self, f: &GridFunction) -> QResult<()> {
        if (f.q - self.ctx.q()).abs() > 0.0 {
            return Err(QError::InvalidParameter("grid q differs from the operator's q".into()));
        }
        Ok(())
    }

    pub fn apply(&self, f: &GridFunction) -> QResult<GridFunction> {
        self.check_grid(f)?;
        let lap = delta_q(f)?;
        let c = self.potential_coefficient();
        let s = self.shift();
        let samples = (lap.lo()..=lap.hi())
            .map(|n| {
                let x = f.point(n);
                -lap.get(n).unwrap() + c * x * x * f.get(n + s).unwrap()
            })
            .collect();
        GridFunction::new(f.q, f.anchor, lap.lo(), samples)
    }
}

pub fn apply_hamiltonian(op: &TodaOperator, f: &GridFunction) -> QResult<GridFunction> {
    op.apply(f)
}

/// λ = −([iν/2]_q)², the eigenvalue carried by I_{±iν} and K_{iν}.
pub fn toda_eigenvalue(ctx: &QContext) -> Complex64 {
    let b = qnumber(ctx.inu() * 0.5, ctx.q());
    -(b * b)
}

/// Pointwise Ĥf − λf on the valid window.
pub fn raw_residual(op: &TodaOperator, f: &GridFunction, eigenvalue: Complex64) -> QResult<GridFunction> {
    let h = op.apply(f)?;
    let samples = (h.lo()..=h.hi()).map(|n| h.get(n).unwrap() - eigenvalue * f.get(n).unwrap()).collect();
    GridFunction::new(f.q, f.anchor, h.lo(), samples)
}

/// Residual diagnostics over the valid window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// max |Ĥf − λf| / (|Δ_q f| + |V·T f| + |λ f| + abs_eps)
    pub hamiltonian: f64,
    /// max |Ĥf − λf| / (|λ|·|f| + abs_eps)
    pub eigen_scaled: f64,
    /// max of the second-difference form F(x/q) + F(qx) − cF(x) − V F(q^{1−δ}x), each
    /// point divided by the sum of the magnitudes of its terms
    pub difference_equation: f64,
    /// max |R_diff + (q−q^{−1})²(Ĥf − λf)| relative to the same term scale
    pub form_discrepancy: f64,
    pub points: usize,
}

pub fn eigen_residual(op: &TodaOperator, f: &GridFunction, eigenvalue: Complex64, abs_eps: f64) -> QResult<ResidualReport> {
    op.check_grid(f)?;
    let raw = raw_residual(op, f, eigenvalue)?;
    let q = f.q;
    let qq = (q - 1.0 / q).powi(2);
    let c_pot = op.potential_coefficient();
    let s = op.shift();
    // (q − q^{−1})²·μ²q^{−2δ+2} = μ²(1−q²)²q^{−2δ}
    let v54 = qq * c_pot;
    let c_mid = 2.0 - qq * eigenvalue;
    let mut rep = ResidualReport { hamiltonian: 0.0, eigen_scaled: 0.0, difference_equation: 0.0, form_discrepancy: 0.0, points: 0 };
    for n in raw.lo()..=raw.hi() {
        let x = f.point(n);
        let (fm, f0, fp, fs) = (f.get(n - 1).unwrap(), f.get(n).unwrap(), f.get(n + 1).unwrap(), f.get(n + s).unwrap());
        let r = raw.get(n).unwrap();
        let lap = (fp - 2.0 * f0 + fm) / qq;
        let scale_h = lap.norm() + c_pot * x * x * fs.norm() + (eigenvalue * f0).norm() + abs_eps;
        let r54 = fm + fp - c_mid * f0 - v54 * x * x * fs;
        let scale54 = fm.norm() + fp.norm() + (c_mid * f0).norm() + v54 * x * x * fs.norm() + abs_eps;
        rep.hamiltonian = rep.hamiltonian.max(r.norm() / scale_h);
        rep.eigen_scaled = rep.eigen_scaled.max(r.norm() / (eigenvalue.norm() * f0.norm() + abs_eps));
        rep.difference_equation = rep.difference_equation.max(r54.norm() / scale54);
        rep.form_discrepancy = rep.form_discrepancy.max((r54 + qq * r).norm() / scale54);
        rep.points += 1;
    }
    if rep.points == 0 {
        return Err(QError::Domain("empty residual window".into()));
    }
    Ok(rep)
}

/// |Δ_q f(x) − ¼(x²f″(x) + xf′(x))| at a single point, for limit studies.
pub fn classical_limit_error<F, D1, D2>(f: F, df: D1, d2f: D2, x: f64, q: f64) -> f64
where
    F: Fn(f64) -> f64,
    D1: Fn(f64) -> f64,
    D2: Fn(f64) -> f64,
{
    let lap = (f(q * x) - 2.0 * f(x) + f(x / q)) / (q - 1.0 / q).powi(2);
    (lap - 0.25 * (x * x * d2f(x) + x * df(x))).abs()
}

/// Least-squares slope of log(error) against log(1−q).
pub fn richardson_order(qs: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = qs.iter().map(|q| (1.0 - q).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
