//! Verification suites behind `verify`.

use clap::ValueEnum;
use num_complex::Complex64;
use qtoda::hopf::{self, CheckReport};
use qtoda::mellin::{barnes_k, barnes_residue_series, g_recurrence_residual, ladder_identity_check, BarnesContour};
use qtoda::qbessel::{macdonald_k, modified_i, wronskian, wronskian_closed_form, wronskian_constant, wronskian_factor, NuSign, J1_MARGIN};
use qtoda::toda::{eigen_residual, toda_eigenvalue, GridFunction, TodaOperator};
use qtoda::whittaker::{
    coefficient_recursion_residual, psi_l_invariance_residual, whittaker_condition_residual, xi1, xi1_hypergeometric, xi2,
    xi2_hypergeometric, InvariantForm, RecursionExponent,
};
use qtoda::{Delta, QContext, QError, Tolerances};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Toda,
    Wronskian,
    Mellin,
    Whittaker,
    Hopf,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Nonconverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub status: Status,
    /// worst residual for numeric checks, mismatching terms for exact ones
    pub worst_residual: f64,
    pub tolerance: f64,
    pub basis_element: String,
    pub message: String,
}

impl CheckRow {
    fn numeric(suite: &'static str, check: impl Into<String>, r: Result<f64, QError>, tolerance: f64) -> Self {
        match r {
            Ok(v) => Self {
                suite,
                check: check.into(),
                status: if v < tolerance { Status::Pass } else { Status::Fail },
                worst_residual: v,
                tolerance,
                basis_element: String::new(),
                message: String::new(),
            },
            Err(e) => Self {
                suite,
                check: check.into(),
                status: match e {
                    QError::NonConverged { .. } => Status::Nonconverged,
                    _ => Status::Fail,
                },
                worst_residual: f64::NAN,
                tolerance,
                basis_element: String::new(),
                message: e.to_string(),
            },
        }
    }

    fn exact(r: CheckReport) -> Self {
        Self {
            suite: "hopf",
            status: if r.passed() { Status::Pass } else { Status::Fail },
            worst_residual: r.mismatch_terms as f64,
            tolerance: 0.0,
            basis_element: r.basis_element,
            check: r.relation,
            message: String::new(),
        }
    }
}

/// Extra knobs for the suites.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    /// added to the Toda eigenvalue (negative control)
    pub eigenvalue_offset: f64,
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Largest x with the δ=2 series window satisfied (with margin), for
/// suites that sample their own points.
fn safe_anchor(ctx: &QContext, wanted: f64) -> f64 {
    let q = ctx.q();
    match ctx.delta() {
        Delta::Two => wanted.min(0.9 * (1.0 - J1_MARGIN) * q / (ctx.mu() * (1.0 - q * q))),
        _ => wanted,
    }
}

pub fn toda(ctx: &QContext, grid: (f64, i32, i32), tol: &Tolerances, opts: SuiteOptions) -> Vec<CheckRow> {
    let op = TodaOperator::new(*ctx);
    let lam = toda_eigenvalue(ctx) + opts.eigenvalue_offset;
    let (x0, mut lo, hi) = grid;
    let mut note = String::new();
    if ctx.delta() == Delta::Two {
        // keep only grid points inside the series window
        let top = safe_anchor(ctx, f64::INFINITY);
        while lo < hi && x0 * ctx.q().powi(lo) > top {
            lo += 1;
        }
        if lo != grid.1 {
            note = format!("grid clipped to n ≥ {lo} (j=1 series window)");
        }
    }
    let mut out = vec![];
    let mut run = |name: &str, f: &dyn Fn(f64) -> Result<Complex64, QError>| {
        let r = GridFunction::sample(ctx.q(), x0, lo, hi, f)
            .and_then(|g| eigen_residual(&op, &g, lam, tol.abs_eps))
            .map(|rep| rep.difference_equation);
        let mut row = CheckRow::numeric("toda", format!("eigenfunction residual of {name}"), r, 1e-9);
        if row.message.is_empty() {
            row.message = note.clone();
        }
        out.push(row);
    };
    run("I_{+iν}", &|x| modified_i(ctx, NuSign::Plus, x, tol).map(|v| v.value));
    run("I_{-iν}", &|x| modified_i(ctx, NuSign::Minus, x, tol).map(|v| v.value));
    if ctx.delta() != Delta::Two {
        run("K", &|x| macdonald_k(ctx, x, tol).map(|v| v.value));
    }
    out
}

pub fn wronskian_suite(ctx: &QContext, tol: &Tolerances) -> Vec<CheckRow> {
    let x0 = safe_anchor(ctx, 0.6);
    let xs: Vec<f64> = (0..11).map(|n| x0 * ctx.q().powi(n)).collect();
    let closed = (|| {
        let mut worst = 0.0f64;
        for &x in &xs {
            worst = worst.max(rel(wronskian(ctx, x, tol)?, wronskian_closed_form(ctx, x, tol)?));
        }
        Ok(worst)
    })();
    let flat = (|| {
        let w0 = wronskian_constant(ctx)?;
        let mut worst = 0.0f64;
        for &x in &xs {
            worst = worst.max(rel(wronskian(ctx, x, tol)? / wronskian_factor(ctx, x, tol)?, w0));
        }
        Ok(worst)
    })();
    vec![
        CheckRow::numeric("wronskian", "W equals closed form", closed, 1e-8),
        CheckRow::numeric("wronskian", "W / factor is constant", flat, 1e-8),
    ]
}

pub fn mellin(ctx: &QContext, tol: &Tolerances) -> Vec<CheckRow> {
    let mut out = vec![];
    let samples: Vec<Complex64> =
        (0..20).map(|i| Complex64::new(-3.3 + 0.35 * i as f64, 5.0 * ((i as f64) * 0.7).sin())).collect();
    let rec = (|| {
        let mut worst = 0.0f64;
        for s in &samples {
            match g_recurrence_residual(ctx, *s) {
                Ok(r) => worst = worst.max(r),
                Err(QError::Pole(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(worst)
    })();
    out.push(CheckRow::numeric("mellin", "g(s) functional equation", rec, 1e-12));
    if ctx.delta() == Delta::One {
        let lattice = (|| {
            let mut worst = 0.0f64;
            for x in [0.5, 1.0, 2.0] {
                let b = barnes_k(ctx, x, BarnesContour::default_for(ctx), tol)?.value;
                worst = worst.max(rel(b, barnes_residue_series(ctx, x, 4, tol)?.value));
            }
            Ok(worst)
        })();
        out.push(CheckRow::numeric("mellin", "contour integral equals residue lattice sum", lattice, 1e-8));
    }
    if ctx.delta() != Delta::Two {
        out.push(CheckRow::numeric("mellin", "ladder identity", ladder_identity_check(ctx, &[0.5, 1.0, 2.0], tol), 1e-9));
    }
    out
}

pub fn whittaker(ctx: &QContext, tol: &Tolerances) -> Vec<CheckRow> {
    let mut out = vec![CheckRow::numeric(
        "whittaker",
        "ψ_L invariance C*.ψ_L = ψ_L.B",
        Ok(psi_l_invariance_residual(ctx, InvariantForm::Derived, 12)),
        1e-12,
    )];
    out.push(CheckRow::numeric("whittaker", "Whittaker condition to bidegree 8", whittaker_condition_residual(ctx, 8), 1e-13));
    out.push(CheckRow::numeric(
        "whittaker",
        "coefficient recursion to bidegree 8",
        Ok(coefficient_recursion_residual(ctx, 8, RecursionExponent::Derived)),
        1e-13,
    ));
    let w = Complex64::new(0.3, 0.2);
    out.push(CheckRow::numeric(
        "whittaker",
        "ξ₁ law equals its basic hypergeometric form",
        (|| Ok(rel(xi1(ctx, w, tol)?.value, xi1_hypergeometric(ctx, w, tol)?.value)))(),
        1e-12,
    ));
    if ctx.delta() != Delta::Two {
        out.push(CheckRow::numeric(
            "whittaker",
            "ξ₂ law equals its basic hypergeometric form",
            (|| Ok(rel(xi2(ctx, w, tol)?.value, xi2_hypergeometric(ctx, w, tol)?.value)))(),
            1e-12,
        ));
    }
    out
}

pub fn hopf_suite(ctx: &QContext) -> Vec<CheckRow> {
    match hopf::verify_all(ctx.delta()) {
        Ok(reports) => {
            let mut rows: Vec<CheckRow> = reports.into_iter().map(CheckRow::exact).collect();
            for g in [hopf::Gen::A, hopf::Gen::B, hopf::Gen::C] {
                let f = hopf::OrderedFunction::gaussian_monomial(1, 1, 1);
                rows.push(CheckRow::numeric(
                    "hopf",
                    format!("Haar invariance under {g:?}"),
                    hopf::haar_invariance(&f, g, ctx.q(), ctx.delta()),
                    1e-8,
                ));
            }
            rows
        }
        Err(e) => vec![CheckRow::numeric("hopf", "exact checks", Err(e), 0.0)],
    }
}

pub fn run(suite: Suite, ctx: &QContext, grid: (f64, i32, i32), tol: &Tolerances, opts: SuiteOptions) -> Vec<CheckRow> {
    match suite {
        Suite::Toda => toda(ctx, grid, tol, opts),
        Suite::Wronskian => wronskian_suite(ctx, tol),
        Suite::Mellin => mellin(ctx, tol),
        Suite::Whittaker => whittaker(ctx, tol),
        Suite::Hopf => hopf_suite(ctx),
        Suite::All => [Suite::Toda, Suite::Wronskian, Suite::Mellin, Suite::Whittaker, Suite::Hopf]
            .into_iter()
            .flat_map(|s| run(s, ctx, grid, tol, opts))
            .collect(),
    }
}
