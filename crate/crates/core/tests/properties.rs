//! Property tests for the structural identities of the library.

use num_complex::Complex64;
use proptest::prelude::*;
use qtoda::hopf::{FormalScalar, Gen, HSlice, Lobachevsky, ModuleElement, Monomial, Side, Twist};
use qtoda::mellin::g_of_s;
use qtoda::qbessel::{modified_i, NuSign};
use qtoda::qcalc::{poch_n, qexp_big, qexp_small, qgamma_value, qnumber, rpow, Delta};
use qtoda::toda::{raw_residual, toda_eigenvalue, GridFunction, TodaOperator};
use qtoda::{QContext, Tolerances};

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn delta_of(d: u8) -> Delta {
    match d {
        0 => Delta::Zero,
        1 => Delta::One,
        _ => Delta::Two,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pochhammer_splits(q in 0.1f64..0.95, are in -2.0f64..2.0, aim in -2.0f64..2.0, m in 0usize..12, n in 0usize..12) {
        let a = cx(are, aim);
        let whole = poch_n(a, q, m + n);
        let split = poch_n(a, q, m) * poch_n(a * q.powi(m as i32), q, n);
        prop_assert!((whole - split).norm() <= 1e-12 * (1.0 + whole.norm()));
    }

    #[test]
    fn qgamma_recurrence(b in 0.05f64..0.9, re in 0.1f64..4.0, im in -3.0f64..3.0) {
        let x = cx(re, im);
        let lhs = qgamma_value(x + 1.0, b).unwrap();
        let rhs = (1.0 - rpow(b, x)) / (1.0 - b) * qgamma_value(x, b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0));
    }

    #[test]
    fn small_and_big_exponentials_are_reciprocal(b in 0.05f64..0.9, r in 0.0f64..0.95, t in 0.0f64..6.3) {
        let x = cx(r * t.cos(), r * t.sin());
        let tol = Tolerances::default();
        let p = qexp_small(x, b, &tol).unwrap().value * qexp_big(-x, b, &tol).unwrap().value;
        prop_assert!((p - 1.0).norm() < 1e-12);
    }

    #[test]
    fn qnumber_is_odd(q in 0.05f64..0.95, x in -5.0f64..5.0) {
        let v = qnumber(cx(x, 0.0), q);
        prop_assert!((v + qnumber(cx(-x, 0.0), q)).norm() < 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn g_is_even_in_nu(q in 0.2f64..0.8, d in 0u8..3, nu in 0.1f64..3.0, sre in 0.2f64..3.0, sim in -4.0f64..4.0) {
        let c = QContext::new(q, d as i32, 1.0, nu).unwrap();
        let s = cx(sre, sim);
        let a = g_of_s(&c, s).unwrap();
        let b = g_of_s(&c.with_nu(-nu), s).unwrap();
        prop_assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-300));
    }

    #[test]
    fn residual_is_linear(q in 0.3f64..0.8, d in 0u8..2, nu in 0.2f64..2.5, al in -2.0f64..2.0, be in -2.0f64..2.0) {
        let c = QContext::new(q, d as i32, 1.0, nu).unwrap();
        let tol = Tolerances::default();
        let op = TodaOperator::new(c);
        let lam = toda_eigenvalue(&c);
        let f = GridFunction::sample(q, 1.0, -4, 4, |x| Ok(cx(x.sin(), x * x))).unwrap();
        let g = GridFunction::sample(q, 1.0, -4, 4, |x| modified_i(&c, NuSign::Plus, x, &tol).map(|v| v.value)).unwrap();
        let (a, b) = (cx(al, 0.3), cx(be, -0.1));
        let combo = raw_residual(&op, &f.combine(a, &g, b).unwrap(), lam).unwrap();
        let rf = raw_residual(&op, &f, lam).unwrap();
        let rg = raw_residual(&op, &g, lam).unwrap();
        for n in combo.lo()..=combo.hi() {
            let expect = a * rf.get(n).unwrap() + b * rg.get(n).unwrap();
            let scale = 1.0 + (a * rf.get(n).unwrap()).norm() + (b * rg.get(n).unwrap()).norm();
            prop_assert!((combo.get(n).unwrap() - expect).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn scalar_evaluation_is_a_ring_map(
        a in prop::collection::vec((-6i64..6, -3i64..3, -5i128..5), 1..4),
        b in prop::collection::vec((-6i64..6, -3i64..3, -5i128..5), 1..4),
        q in 0.2f64..0.8, nu in -2.0f64..2.0,
    ) {
        let build = |v: &[(i64, i64, i128)]| v.iter().fold(FormalScalar::zero(), |acc, (h, u, c)| {
            acc + FormalScalar::q_power(*h, *u) * FormalScalar::integer(*c)
        });
        let (x, y) = (build(&a), build(&b).over_one_minus_q2());
        let prod = (x.clone() * y.clone()).eval(q, nu);
        let sum = (x.clone() + y.clone()).eval(q, nu);
        let (ex, ey) = (x.eval(q, nu), y.eval(q, nu));
        prop_assert!((prod - ex * ey).norm() < 1e-9 * (1.0 + (ex * ey).norm()));
        prop_assert!((sum - ex - ey).norm() < 1e-9 * (1.0 + ex.norm() + ey.norm()));
    }

    #[test]
    fn module_relations_on_random_combinations(
        d in 0u8..3,
        terms in prop::collection::vec((0u32..4, -3i64..4, 0u32..4, -3i128..4), 1..4),
        principal in any::<bool>(),
    ) {
        // AB = qBA on arbitrary finite combinations, not only basis vectors
        let slice = if principal { HSlice::Principal } else { HSlice::Integer };
        let module = Lobachevsky::new(delta_of(d), Twist::default());
        let mut e = ModuleElement::zero(slice);
        for (m, k, n, c) in terms {
            e.add_term(Monomial::new(m, k, n), FormalScalar::integer(c));
        }
        let ab = module.act(Side::Right, Gen::A, &module.act(Side::Right, Gen::B, &e));
        let ba = module.act(Side::Right, Gen::B, &module.act(Side::Right, Gen::A, &e));
        prop_assert_eq!(ab.mismatch(&ba.scaled(&FormalScalar::q_power(2, 0))), 0);
    }
}
