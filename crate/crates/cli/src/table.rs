//! Evaluation tables: `eval` and `mellin-compare`.

use clap::ValueEnum;
use num_complex::Complex64;
use qtoda::mellin::{barnes_k, barnes_residue_series, g_of_s, BarnesContour};
use qtoda::qbessel::{bessel_j0, macdonald_k, modified_i, standard_argument, BesselKind, NuSign};
use qtoda::whittaker::{psi_l, xi1, xi2, InvariantForm};
use qtoda::{Delta, QContext, QError, SeriesValue, Tolerances};
use serde::Serialize;

/// Function families exposed by `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "I")]
    I,
    #[value(name = "J0")]
    J0,
    #[value(name = "K")]
    K,
    #[value(name = "psiL")]
    PsiL,
    #[value(name = "xi1")]
    Xi1,
    #[value(name = "xi2")]
    Xi2,
    #[value(name = "g_of_s")]
    GOfS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Nonconverged,
    Error,
    Excluded,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub x: f64,
    pub re: f64,
    pub im: f64,
    pub terms: usize,
    pub tail_estimate: f64,
    pub status: RowStatus,
    pub message: String,
}

impl EvalRow {
    fn from_result(x: f64, r: Result<SeriesValue, QError>) -> Self {
        match r {
            Ok(v) => Self {
                x,
                re: v.value.re,
                im: v.value.im,
                terms: v.terms_used,
                tail_estimate: v.tail_estimate,
                status: RowStatus::Ok,
                message: String::new(),
            },
            Err(e) => Self::failed(x, &e),
        }
    }

    fn failed(x: f64, e: &QError) -> Self {
        let status = match e {
            QError::NonConverged { .. } => RowStatus::Nonconverged,
            _ => RowStatus::Error,
        };
        Self { x, re: f64::NAN, im: f64::NAN, terms: 0, tail_estimate: f64::NAN, status, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub x: f64,
    pub barnes_re: f64,
    pub barnes_im: f64,
    pub series_re: f64,
    pub series_im: f64,
    pub rel_diff: f64,
    /// all pole families of the contour integrand, for reference
    pub lattice_re: f64,
    pub lattice_im: f64,
    pub lattice_rel_diff: f64,
    pub status: RowStatus,
    pub message: String,
}

/// Rows computed on scoped threads, returned in grid order.
pub fn parallel_rows<T, F>(xs: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync,
{
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(xs.len().max(1));
    let chunk = xs.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = xs.chunks(chunk).map(|c| s.spawn(|| c.iter().map(|&x| f(x)).collect::<Vec<T>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// One library call per grid point; nothing is rounded or post-processed.
pub fn eval_point(family: Family, ctx: &QContext, x: f64, tol: &Tolerances) -> EvalRow {
    let c = |z: f64| Complex64::new(z, 0.0);
    let r = match family {
        Family::I => modified_i(ctx, NuSign::Plus, x, tol),
        Family::J0 => bessel_j0(ctx.q(), BesselKind::for_delta(ctx.delta()), c(standard_argument(ctx, x)), tol),
        Family::K => macdonald_k(ctx, x, tol),
        Family::PsiL => psi_l(ctx, x, InvariantForm::Derived),
        Family::Xi1 => xi1(ctx, c(x), tol),
        Family::Xi2 => xi2(ctx, c(x), tol),
        Family::GOfS => g_of_s(ctx, c(x)).map(|v| SeriesValue::exact(v, 1)),
    };
    EvalRow::from_result(x, r)
}

pub fn eval_table(family: Family, ctx: &QContext, xs: &[f64], tol: &Tolerances) -> Vec<EvalRow> {
    parallel_rows(xs, |x| eval_point(family, ctx, x, tol))
}

/// Pole families k = −K..K kept in the reference lattice sum.
const LATTICE_FAMILIES: i32 = 4;

pub fn compare_point(ctx: &QContext, x: f64, tol: &Tolerances) -> CompareRow {
    let nan = f64::NAN;
    let mut row = CompareRow {
        x,
        barnes_re: nan,
        barnes_im: nan,
        series_re: nan,
        series_im: nan,
        rel_diff: nan,
        lattice_re: nan,
        lattice_im: nan,
        lattice_rel_diff: nan,
        status: RowStatus::Ok,
        message: String::new(),
    };
    if ctx.delta() == Delta::Two {
        row.status = RowStatus::Excluded;
        row.message = "excluded from default comparison (δ=2)".into();
        return row;
    }
    let fail = |row: &mut CompareRow, e: QError| {
        row.status = match e {
            QError::NonConverged { .. } => RowStatus::Nonconverged,
            _ => RowStatus::Error,
        };
        row.message = e.to_string();
    };
    match macdonald_k(ctx, x, tol) {
        Ok(v) => {
            row.series_re = v.value.re;
            row.series_im = v.value.im;
        }
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    }
    let b = match barnes_k(ctx, x, BarnesContour::default_for(ctx), tol) {
        Ok(v) => v.value,
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    };
    row.barnes_re = b.re;
    row.barnes_im = b.im;
    let s = Complex64::new(row.series_re, row.series_im);
    row.rel_diff = (b - s).norm() / s.norm();
    if let Ok(l) = barnes_residue_series(ctx, x, LATTICE_FAMILIES, tol) {
        row.lattice_re = l.value.re;
        row.lattice_im = l.value.im;
        row.lattice_rel_diff = (b - l.value).norm() / l.value.norm();
    }
    row
}

pub fn compare_table(ctx: &QContext, xs: &[f64], tol: &Tolerances) -> Vec<CompareRow> {
    parallel_rows(xs, |x| compare_point(ctx, x, tol))
}
