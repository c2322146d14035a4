//! Exact verification layer for the U_q(sl2) pair acting on the quantum
//! Lobachevsky space.
//!
//! Scalars live in ℚ[q^{±1/2}, u^{±1}] localized at (1−q²), with u = q^{iν/2}.
//! Module elements are combinations of ordered monomials w(m,k,n) = z*^m H^k z^n;
//! on the V_ν slice the true H-exponent is k + iν − 1.
//!
//! Products of generators act as operator composition: a word u₁u₂…u_n acts
//! by applying u_n first, on either side.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{QError, QResult};
use crate::qcalc::Delta;

pub type Rational = Ratio<i128>;

// ---------------------------------------------------------------------------
// coefficient ring

/// Σ c·q^{a/2}u^b / (1−q²)^d with rational c.
#[derive(Clone, Debug, Default)]
pub struct FormalScalar {
    num: BTreeMap<(i64, i64), Rational>,
    den: u32,
}

fn one_minus_q2() -> BTreeMap<(i64, i64), Rational> {
    let mut m = BTreeMap::new();
    m.insert((0, 0), Rational::one());
    m.insert((4, 0), -Rational::one());
    m
}

fn poly_mul(a: &BTreeMap<(i64, i64), Rational>, b: &BTreeMap<(i64, i64), Rational>) -> BTreeMap<(i64, i64), Rational> {
    let mut out: BTreeMap<(i64, i64), Rational> = BTreeMap::new();
    for (&(a1, b1), c1) in a {
        for (&(a2, b2), c2) in b {
            *out.entry((a1 + a2, b1 + b2)).or_insert_with(Rational::zero) += c1 * c2;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

impl FormalScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, 0, 0)
    }

    pub fn integer(c: i128) -> Self {
        Self::constant(Rational::from_integer(c))
    }

    /// c·q^{half/2}·u^{u}
    pub fn term(c: Rational, half: i64, u: i64) -> Self {
        let mut num = BTreeMap::new();
        if !c.is_zero() {
            num.insert((half, u), c);
        }
        Self { num, den: 0 }
    }

    /// q^{half/2}·u^{u}
    pub fn q_power(half: i64, u: i64) -> Self {
        Self::term(Rational::one(), half, u)
    }

    /// Divide by (1−q²).
    pub fn over_one_minus_q2(mut self) -> Self {
        self.den += 1;
        self.normalized()
    }

    /// (1 − q^{half/2}u^{u}) / (1 − q²)
    pub fn q_ratio(half: i64, u: i64) -> Self {
        (Self::one() - Self::q_power(half, u)).over_one_minus_q2()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.num.len()
    }

    pub fn denominator_power(&self) -> u32 {
        self.den
    }

    /// Complex conjugate for real q and ν: u ↦ u⁻¹.
    pub fn conj(&self) -> Self {
        Self { num: self.num.iter().map(|(&(a, b), c)| ((a, -b), *c)).collect(), den: self.den }
    }

    /// Numeric value at given q and ν.
    pub fn eval(&self, q: f64, nu: f64) -> Complex64 {
        let lq = q.ln();
        let mut s = Complex64::new(0.0, 0.0);
        for (&(a, b), c) in &self.num {
            let c = *c.numer() as f64 / *c.denom() as f64;
            s += c * Complex64::new(0.5 * a as f64 * lq, 0.5 * nu * b as f64 * lq).exp();
        }
        s / (1.0 - q * q).powi(self.den as i32)
    }

    fn lifted(&self, den: u32) -> BTreeMap<(i64, i64), Rational> {
        let mut n = self.num.clone();
        for _ in self.den..den {
            n = poly_mul(&n, &one_minus_q2());
        }
        n
    }

    /// Cancel common factors of (1−q²): in each class of terms with the same
    /// (a mod 4, b) the numerator is a Laurent polynomial in t = q², divisible
    /// by (1−t) iff its coefficients sum to zero.
    fn normalized(mut self) -> Self {
        self.num.retain(|_, c| !c.is_zero());
        while self.den > 0 && !self.num.is_empty() {
            let mut classes: BTreeMap<(i64, i64), Vec<(i64, Rational)>> = BTreeMap::new();
            for (&(a, b), c) in &self.num {
                classes.entry((a.rem_euclid(4), b)).or_default().push((a, *c));
            }
            if classes.values().any(|v| !v.iter().map(|(_, c)| *c).sum::<Rational>().is_zero()) {
                break;
            }
            let mut out = BTreeMap::new();
            for ((_, b), terms) in classes {
                // P(t) = (1−t)Q(t) ⇒ Q_e = Σ_{e' ≤ e} P_{e'}
                let lo = terms.first().map(|t| t.0).unwrap();
                let hi = terms.last().map(|t| t.0).unwrap();
                let lookup: BTreeMap<i64, Rational> = terms.into_iter().collect();
                let mut acc = Rational::zero();
                let mut a = lo;
                while a < hi {
                    acc += lookup.get(&a).copied().unwrap_or_else(Rational::zero);
                    if !acc.is_zero() {
                        out.insert((a, b), acc);
                    }
                    a += 4;
                }
            }
            self.num = out;
            self.den -= 1;
        }
        if self.num.is_empty() {
            self.den = 0;
        }
        self
    }
}

impl PartialEq for FormalScalar {
    fn eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).is_zero()
    }
}

impl Add for FormalScalar {
    type Output = FormalScalar;
    fn add(self, rhs: Self) -> Self {
        let den = self.den.max(rhs.den);
        let mut num = self.lifted(den);
        for (k, c) in rhs.lifted(den) {
            *num.entry(k).or_insert_with(Rational::zero) += c;
        }
        Self { num, den }.normalized()
    }
}

impl Sub for FormalScalar {
    type Output = FormalScalar;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FormalScalar {
    type Output = FormalScalar;
    fn neg(self) -> Self {
        Self { num: self.num.into_iter().map(|(k, c)| (k, -c)).collect(), den: self.den }
    }
}

impl Mul for FormalScalar {
    type Output = FormalScalar;
    // denominators are powers of (1−q²): exponents add
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        Self { num: poly_mul(&self.num, &rhs.num), den: self.den + rhs.den }.normalized()
    }
}

impl<'a> Mul<&'a FormalScalar> for &'a FormalScalar {
    type Output = FormalScalar;
    fn mul(self, rhs: &FormalScalar) -> FormalScalar {
        self.clone() * rhs.clone()
    }
}

impl fmt::Display for FormalScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .num
            .iter()
            .map(|(&(a, b), c)| {
                let mut s = format!("{c}");
                if a != 0 {
                    if a % 2 == 0 {
                        s += &format!("·q^{}", a / 2);
                    } else {
                        s += &format!("·q^({a}/2)");
                    }
                }
                if b != 0 {
                    s += &format!("·u^{b}");
                }
                s
            })
            .collect();
        if self.den > 0 {
            write!(f, "({})/(1-q^2)^{}", parts.join(" + "), self.den)
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

// ---------------------------------------------------------------------------
// ordered monomials

/// Which H-exponents a module uses: integers, or iν − 1 + integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HSlice {
    Integer,
    Principal,
}

/// w(m,k,n) = z*^m H^k z^n (k is the offset from the slice base).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub m: u32,
    pub k: i64,
    pub n: u32,
}

impl Monomial {
    pub fn new(m: u32, k: i64, n: u32) -> Self {
        Self { m, k, n }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w({},{},{})", self.m, self.k, self.n)
    }
}

/// Finite combination of ordered monomials on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    slice: HSlice,
    terms: BTreeMap<Monomial, FormalScalar>,
}

impl ModuleElement {
    pub fn zero(slice: HSlice) -> Self {
        Self { slice, terms: BTreeMap::new() }
    }

    pub fn basis(slice: HSlice, w: Monomial) -> Self {
        let mut e = Self::zero(slice);
        e.add_term(w, FormalScalar::one());
        e
    }

    pub fn slice(&self) -> HSlice {
        self.slice
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, FormalScalar> {
        &self.terms
    }

    pub fn coefficient(&self, w: Monomial) -> FormalScalar {
        self.terms.get(&w).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, w: Monomial, c: FormalScalar) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.remove(&w).unwrap_or_default() + c;
        if !entry.is_zero() {
            self.terms.insert(w, entry);
        }
    }

    pub fn add_scaled(&mut self, other: &ModuleElement, c: &FormalScalar) {
        for (w, v) in &other.terms {
            self.add_term(*w, c * v);
        }
    }

    pub fn scaled(&self, c: &FormalScalar) -> Self {
        let mut e = Self::zero(self.slice);
        e.add_scaled(self, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of monomials with nonzero coefficient in self − other.
    pub fn mismatch(&self, other: &ModuleElement) -> usize {
        let mut d = self.clone();
        d.add_scaled(other, &-FormalScalar::one());
        d.terms.len()
    }

    /// (Σ c w(m,k,n))* = Σ c̄ w(n,k,m); integer slice only.
    pub fn star(&self) -> QResult<Self> {
        if self.slice != HSlice::Integer {
            return Err(QError::InvalidParameter("the star map leaves the principal slice".into()));
        }
        let mut e = Self::zero(self.slice);
        for (w, c) in &self.terms {
            e.add_term(Monomial::new(w.n, w.k, w.m), c.conj());
        }
        Ok(e)
    }
}

// ---------------------------------------------------------------------------
// generators and actions

/// Generators of the pair of quantum algebras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gen {
    A,
    D,
    B,
    C,
    AStar,
    DStar,
    BStar,
    CStar,
}

impl Gen {
    fn name(self) -> &'static str {
        match self {
            Gen::A => "A",
            Gen::D => "D",
            Gen::B => "B",
            Gen::C => "C",
            Gen::AStar => "A*",
            Gen::DStar => "D*",
            Gen::BStar => "B*",
            Gen::CStar => "C*",
        }
    }

    /// The *-image of a generator.
    pub fn star(self) -> Gen {
        match self {
            Gen::A => Gen::AStar,
            Gen::D => Gen::DStar,
            Gen::B => Gen::BStar,
            Gen::C => Gen::CStar,
            Gen::AStar => Gen::A,
            Gen::DStar => Gen::D,
            Gen::BStar => Gen::B,
            Gen::CStar => Gen::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

/// Twist parameters (r, s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Twist {
    r: i32,
    s: i32,
}

impl Twist {
    /// s must keep the A*-scaling exponents on the half-integer lattice.
    pub fn new(r: i32, s: i32, delta: Delta) -> QResult<Self> {
        let lattice_ok = s != 0 && (delta == Delta::One || 2 % s == 0);
        if !lattice_ok {
            return Err(QError::InvalidParameter(format!("twist s = {s} leaves the coefficient lattice")));
        }
        Ok(Self { r, s })
    }

    pub fn r(&self) -> i32 {
        self.r
    }

    pub fn s(&self) -> i32 {
        self.s
    }
}

impl Default for Twist {
    fn default() -> Self {
        Self { r: 0, s: 1 }
    }
}

/// The module: deformation κ = q^δ and twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lobachevsky {
    delta: i64,
    twist: Twist,
}

impl Lobachevsky {
    pub fn new(delta: Delta, twist: Twist) -> Self {
        Self { delta: delta.value() as i64, twist }
    }

    pub fn delta(&self) -> i64 {
        self.delta
    }

    pub fn twist(&self) -> Twist {
        self.twist
    }

    /// q^{(c/2)·k_true} with k_true = k (+ iν − 1 on the principal slice).
    fn qk(&self, c: i64, k: i64, slice: HSlice) -> FormalScalar {
        match slice {
            HSlice::Integer => FormalScalar::q_power(c * k, 0),
            HSlice::Principal => FormalScalar::q_power(c * (k - 1), c),
        }
    }

    /// (q/κ)^{(−2j+k)/s}
    fn twist_scale(&self, j: u32, k: i64, slice: HSlice) -> FormalScalar {
        // exponent (1−δ)(−2j + k_true)/s; in halves 2(1−δ)/s per unit
        let per = 2 * (1 - self.delta) / self.twist.s as i64;
        FormalScalar::q_power(-per * 2 * j as i64, 0) * self.qk(per, k, slice)
    }

    /// q^{a·k_true}·κ^{k_true−1} (c in halves)
    fn kappa_k(&self, k: i64, slice: HSlice) -> FormalScalar {
        self.qk(2 * self.delta, k, slice) * FormalScalar::q_power(-2 * self.delta, 0)
    }

    fn on_monomial(&self, side: Side, gen: Gen, w: Monomial, slice: HSlice) -> Vec<(Monomial, FormalScalar)> {
        let Monomial { m, k, n } = w;
        let (mi, ni) = (m as i64, n as i64);
        let qp = FormalScalar::q_power;
        match (side, gen) {
            (Side::Right, Gen::A) => vec![(w, qp(-2 * ni, 0) * self.qk(1, k, slice))],
            (Side::Right, Gen::D) => vec![(w, qp(2 * ni, 0) * self.qk(-1, k, slice))],
            (Side::Right, Gen::AStar) => vec![(w, self.twist_scale(m, k, slice))],
            (Side::Right, Gen::DStar) => {
                let inv = self.twist_scale(m, k, slice);
                // the scale is a single monomial, so its inverse is exact
                let ((a, b), _) = inv.num.iter().next().map(|(k, c)| (*k, *c)).expect("nonzero scale");
                vec![(w, qp(-a, -b))]
            }
            (Side::Right, Gen::B) => {
                if n == 0 {
                    return vec![];
                }
                let c = qp(-2 * ni + 1, 0) * self.qk(1, k, slice) * FormalScalar::q_ratio(4 * ni, 0);
                vec![(Monomial::new(m, k, n - 1), c)]
            }
            (Side::Right, Gen::C) => {
                let mut out = vec![];
                if m > 0 {
                    let c = qp(2 * ni + 3, 0) * self.qk(-3, k, slice) * self.kappa_k(k, slice) * FormalScalar::q_ratio(4 * mi, 0);
                    out.push((Monomial::new(m - 1, k - 2, n), c));
                }
                // (1 − q^{2n − 2k_true})
                let ratio = match slice {
                    HSlice::Integer => FormalScalar::q_ratio(4 * ni - 4 * k, 0),
                    HSlice::Principal => FormalScalar::q_ratio(4 * ni - 4 * (k - 1), -4),
                };
                let c = -(qp(-2 * ni + 3, 0) * self.qk(1, k, slice) * ratio);
                out.push((Monomial::new(m, k, n + 1), c));
                out
            }
            (Side::Left, Gen::AStar) => vec![(w, qp(-2 * mi, 0) * self.qk(1, k, slice))],
            (Side::Left, Gen::DStar) => vec![(w, qp(2 * mi, 0) * self.qk(-1, k, slice))],
            (Side::Left, Gen::A) => vec![(w, self.twist_scale(n, k, slice))],
            (Side::Left, Gen::D) => {
                let inv = self.twist_scale(n, k, slice);
                let ((a, b), _) = inv.num.iter().next().map(|(k, c)| (*k, *c)).expect("nonzero scale");
                vec![(w, qp(-a, -b))]
            }
            (Side::Left, Gen::BStar) => {
                if m == 0 {
                    return vec![];
                }
                let c = qp(-2 * mi + 1, 0) * self.qk(1, k, slice) * FormalScalar::q_ratio(4 * mi, 0);
                vec![(Monomial::new(m - 1, k, n), c)]
            }
            (Side::Left, Gen::CStar) => {
                let mut out = vec![];
                if n > 0 {
                    let c = qp(2 * mi + 3, 0) * self.qk(-3, k, slice) * self.kappa_k(k, slice) * FormalScalar::q_ratio(4 * ni, 0);
                    out.push((Monomial::new(m, k - 2, n - 1), c));
                }
                let ratio = match slice {
                    HSlice::Integer => FormalScalar::q_ratio(4 * mi - 4 * k, 0),
                    HSlice::Principal => FormalScalar::q_ratio(4 * mi - 4 * (k - 1), -4),
                };
                let c = -(qp(-2 * mi + 3, 0) * self.qk(1, k, slice) * ratio);
                out.push((Monomial::new(m + 1, k, n), c));
                out
            }
            // B*, C* annihilate from the right; B, C from the left
            _ => vec![],
        }
    }

    /// Action of a single generator on a module element.
    pub fn act(&self, side: Side, gen: Gen, e: &ModuleElement) -> ModuleElement {
        let mut out = ModuleElement::zero(e.slice);
        for (w, c) in &e.terms {
            for (t, v) in self.on_monomial(side, gen, *w, e.slice) {
                out.add_term(t, c * &v);
            }
        }
        out
    }

    /// Action of an algebra element; each word acts by composition.
    pub fn apply(&self, side: Side, u: &AlgebraElement, e: &ModuleElement) -> ModuleElement {
        let mut out = ModuleElement::zero(e.slice);
        for (c, word) in &u.terms {
            let mut x = e.clone();
            for g in word.iter().rev() {
                x = self.act(side, *g, &x);
            }
            out.add_scaled(&x, c);
        }
        out
    }
}

/// Linear combination of words in the generators.
#[derive(Debug, Clone, Default)]
pub struct AlgebraElement {
    terms: Vec<(FormalScalar, Vec<Gen>)>,
}

impl AlgebraElement {
    pub fn unit() -> Self {
        Self { terms: vec![(FormalScalar::one(), vec![])] }
    }

    pub fn word(gens: &[Gen]) -> Self {
        Self { terms: vec![(FormalScalar::one(), gens.to_vec())] }
    }

    pub fn scaled(mut self, c: FormalScalar) -> Self {
        for t in &mut self.terms {
            t.0 = &t.0 * &c;
        }
        self
    }

    pub fn plus(mut self, other: AlgebraElement) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn minus(self, other: AlgebraElement) -> Self {
        self.plus(other.scaled(-FormalScalar::one()))
    }

    /// Product: self·other.
    pub fn times(&self, other: &AlgebraElement) -> Self {
        let mut terms = vec![];
        for (c1, w1) in &self.terms {
            for (c2, w2) in &other.terms {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                terms.push((c1 * c2, w));
            }
        }
        Self { terms }
    }

    pub fn terms(&self) -> &[(FormalScalar, Vec<Gen>)] {
        &self.terms
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub relation: String,
    pub basis_element: String,
    pub status: CheckStatus,
    pub mismatch_terms: usize,
}

impl CheckReport {
    fn from_mismatches(relation: impl Into<String>, checked: usize, first_bad: Option<String>, mismatch: usize) -> Self {
        Self {
            relation: relation.into(),
            basis_element: first_bad.unwrap_or_else(|| format!("all {checked} basis elements")),
            status: if mismatch == 0 { CheckStatus::Pass } else { CheckStatus::Fail },
            mismatch_terms: mismatch,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Monomial box m ≤ max_m, |k| ≤ max_k, n ≤ max_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBox {
    pub max_m: u32,
    pub max_k: i64,
    pub max_n: u32,
}

impl MonomialBox {
    pub fn new(max_m: u32, max_k: i64, max_n: u32) -> QResult<Self> {
        if max_m < 2 || max_k < 2 || max_n < 2 {
            return Err(QError::InvalidParameter("monomial box bounds must be at least 2".into()));
        }
        Ok(Self { max_m, max_k, max_n })
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        let mut v = vec![];
        for m in 0..=self.max_m {
            for k in -self.max_k..=self.max_k {
                for n in 0..=self.max_n {
                    v.push(Monomial::new(m, k, n));
                }
            }
        }
        v
    }
}

impl Default for MonomialBox {
    fn default() -> Self {
        Self { max_m: 4, max_k: 4, max_n: 4 }
    }
}

fn q_minus_q_inv_sq_inv() -> FormalScalar {
    // 1/(q − q⁻¹)² = q²/(1−q²)²
    FormalScalar::q_power(4, 0).over_one_minus_q2().over_one_minus_q2()
}

/// The defining relations as (name, lhs, rhs) over the given four letters.
fn defining_relations(a: Gen, d: Gen, b: Gen, c: Gen) -> Vec<(String, AlgebraElement, AlgebraElement)> {
    let w = AlgebraElement::word;
    let q = FormalScalar::q_power(2, 0);
    let qi = FormalScalar::q_power(-2, 0);
    let (an, bn, cn, dn) = (a.name(), b.name(), c.name(), d.name());
    vec![
        (format!("{an}{dn}=1"), w(&[a, d]), AlgebraElement::unit()),
        (format!("{dn}{an}=1"), w(&[d, a]), AlgebraElement::unit()),
        (format!("{an}{bn}=q{bn}{an}"), w(&[a, b]), w(&[b, a]).scaled(q.clone())),
        (format!("{bn}{dn}=q{dn}{bn}"), w(&[b, d]), w(&[d, b]).scaled(q)),
        (format!("{an}{cn}=q^-1{cn}{an}"), w(&[a, c]), w(&[c, a]).scaled(qi.clone())),
        (format!("{cn}{dn}=q^-1{dn}{cn}"), w(&[c, d]), w(&[d, c]).scaled(qi)),
        (
            format!("[{bn},{cn}]=({an}^2-{dn}^2)/(q-q^-1)"),
            w(&[b, c]).minus(w(&[c, b])),
            // 1/(q−q⁻¹) = −q/(1−q²)
            w(&[a, a]).minus(w(&[d, d])).scaled(-FormalScalar::q_power(2, 0).over_one_minus_q2()),
        ),
    ]
}

fn check_operator_identity<F>(name: &str, basis: &[Monomial], slice: HSlice, f: F) -> CheckReport
where
    F: Fn(&ModuleElement) -> (ModuleElement, ModuleElement),
{
    let mut mismatch = 0;
    let mut first = None;
    for w in basis {
        let (l, r) = f(&ModuleElement::basis(slice, *w));
        let mm = l.mismatch(&r);
        if mm > 0 && first.is_none() {
            first = Some(w.to_string());
        }
        mismatch += mm;
    }
    CheckReport::from_mismatches(name, basis.len(), first, mismatch)
}

/// All defining relations, for the unstarred generators acting from the
/// right and the starred ones acting from the left, on every monomial of the box.
pub fn verify_algebra_relations(module: &Lobachevsky, bx: &MonomialBox, slice: HSlice) -> Vec<CheckReport> {
    let basis = bx.monomials();
    let mut out = vec![];
    for (side, letters) in [
        (Side::Right, (Gen::A, Gen::D, Gen::B, Gen::C)),
        (Side::Left, (Gen::AStar, Gen::DStar, Gen::BStar, Gen::CStar)),
    ] {
        for (name, lhs, rhs) in defining_relations(letters.0, letters.1, letters.2, letters.3) {
            let label = format!("{name} ({:?}, {slice:?})", side);
            out.push(check_operator_identity(&label, &basis, slice, |e| {
                (module.apply(side, &lhs, e), module.apply(side, &rhs, e))
            }));
        }
    }
    // the right A* scaling commutes with the right unstarred generators
    for g in [Gen::A, Gen::B, Gen::C] {
        let lhs = AlgebraElement::word(&[Gen::AStar, g]);
        let rhs = AlgebraElement::word(&[g, Gen::AStar]);
        out.push(check_operator_identity(&format!("A*{0}={0}A* (Right, {slice:?})", g.name()), &basis, slice, |e| {
            (module.apply(Side::Right, &lhs, e), module.apply(Side::Right, &rhs, e))
        }));
    }
    out
}

// ---------------------------------------------------------------------------
// Casimir

/// Ω = (qA² + q⁻¹D² − 2)/(q − q⁻¹)² + CB as an algebra element.
pub fn casimir_element() -> AlgebraElement {
    let w = AlgebraElement::word;
    w(&[Gen::A, Gen::A])
        .scaled(FormalScalar::q_power(2, 0))
        .plus(w(&[Gen::D, Gen::D]).scaled(FormalScalar::q_power(-2, 0)))
        .plus(AlgebraElement::unit().scaled(FormalScalar::integer(-2)))
        .scaled(q_minus_q_inv_sq_inv())
        .plus(w(&[Gen::C, Gen::B]))
}

/// The constant q^{−iν+2}(1−q^{iν})²/(1−q²)² removed from Ω.
pub fn casimir_shift() -> FormalScalar {
    let one_minus = FormalScalar::one() - FormalScalar::q_power(0, 2);
    FormalScalar::q_power(4, -2) * one_minus.clone() * one_minus * q_minus_q_inv_sq_inv() * FormalScalar::q_power(-4, 0)
}

/// ([−iν/2]_q)² = q²(u⁻¹ − u)²/(1−q²)².
pub fn casimir_scalar() -> FormalScalar {
    let d = FormalScalar::q_power(0, -1) - FormalScalar::q_power(0, 1);
    d.clone() * d * q_minus_q_inv_sq_inv()
}

/// Two-term closed form of w.(Ω − shift) with κ = q^δ:
/// q^{−k+1}(1−q^{iν+k+1})(1−q^{−iν+k+1})/(1−q²)² w
/// + q^{(k−1)(δ−1)}(1−q^{2m})(1−q^{2n})/(1−q²)² w(m−1,k−2,n−1).
pub fn casimir_on_monomial(module: &Lobachevsky, e: &ModuleElement) -> ModuleElement {
    let slice = e.slice;
    let mut out = ModuleElement::zero(slice);
    let den = q_minus_q_inv_sq_inv() * FormalScalar::q_power(-4, 0);
    for (w, c) in &e.terms {
        let k = w.k;
        // q^{k_true+1}
        let qk1 = module.qk(2, k, slice) * FormalScalar::q_power(2, 0);
        let first = module.qk(-2, k, slice)
            * FormalScalar::q_power(2, 0)
            * (FormalScalar::one() - qk1.clone() * FormalScalar::q_power(0, 2))
            * (FormalScalar::one() - qk1 * FormalScalar::q_power(0, -2))
            * den.clone();
        out.add_term(*w, c * &first);
        if w.m > 0 && w.n > 0 {
            let second = module.qk(2 * (module.delta - 1), k, slice)
                * FormalScalar::q_power(-2 * (module.delta - 1), 0)
                * (FormalScalar::one() - FormalScalar::q_power(4 * w.m as i64, 0))
                * (FormalScalar::one() - FormalScalar::q_power(4 * w.n as i64, 0))
                * den.clone();
            out.add_term(Monomial::new(w.m - 1, k - 2, w.n - 1), c * &second);
        }
    }
    out
}

/// Assembled Ω minus the shift against the closed form on every monomial;
/// plus the scalar action on the m = 0 part of the principal slice.
pub fn verify_casimir(module: &Lobachevsky, bx: &MonomialBox) -> Vec<CheckReport> {
    let omega = casimir_element().plus(AlgebraElement::unit().scaled(-casimir_shift()));
    let mut out = vec![];
    for slice in [HSlice::Integer, HSlice::Principal] {
        out.push(check_operator_identity(
            &format!("assembled Casimir = two-term form ({slice:?})"),
            &bx.monomials(),
            slice,
            |e| (module.apply(Side::Right, &omega, e), casimir_on_monomial(module, e)),
        ));
    }
    let omega_full = casimir_element();
    let basis: Vec<Monomial> = (0..=bx.max_n).map(|n| Monomial::new(0, 0, n)).collect();
    out.push(check_operator_identity("Casimir scalar on z^n H^(iν-1)", &basis, HSlice::Principal, |e| {
        (module.apply(Side::Right, &omega_full, e), e.scaled(&casimir_scalar()))
    }));
    out
}

// ---------------------------------------------------------------------------
// principal series on one variable, exact

/// Exact principal-series operators (class one) on Laurent coefficients in z.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrincipalSeriesExact;

impl PrincipalSeriesExact {
    /// Image of z^j under a right generator (A, D, B, C) or left starred one;
    /// for real q both use the same coefficient maps.
    pub fn on_power(&self, gen: Gen, j: i64) -> Vec<(i64, FormalScalar)> {
        let qp = FormalScalar::q_power;
        match gen {
            // q^{(iν−1)/2 − j}
            Gen::A | Gen::AStar => vec![(j, qp(-1 - 2 * j, 1))],
            Gen::D | Gen::DStar => vec![(j, qp(1 + 2 * j, -1))],
            // q^{iν/2} (q^{−j} − q^{j})/(1−q²)
            Gen::B | Gen::BStar => {
                let c = (qp(-2 * j, 1) - qp(2 * j, 1)).over_one_minus_q2();
                if c.is_zero() {
                    vec![]
                } else {
                    vec![(j - 1, c)]
                }
            }
            // (−q^{(iν+2)/2 − j} + q^{−3iν/2 + 3 + j})/(1−q²)
            Gen::C | Gen::CStar => vec![(j + 1, (qp(6 + 2 * j, -3) - qp(2 - 2 * j, 1)).over_one_minus_q2())],
        }
    }

    pub fn act(&self, gen: Gen, f: &BTreeMap<i64, FormalScalar>) -> BTreeMap<i64, FormalScalar> {
        let mut out: BTreeMap<i64, FormalScalar> = BTreeMap::new();
        for (j, c) in f {
            for (t, v) in self.on_power(gen, *j) {
                let e = out.remove(&t).unwrap_or_default() + c * &v;
                if !e.is_zero() {
                    out.insert(t, e);
                }
            }
        }
        out
    }

    pub fn apply(&self, u: &AlgebraElement, f: &BTreeMap<i64, FormalScalar>) -> BTreeMap<i64, FormalScalar> {
        let mut out: BTreeMap<i64, FormalScalar> = BTreeMap::new();
        for (c, word) in &u.terms {
            let mut x = f.clone();
            for g in word.iter().rev() {
                x = self.act(*g, &x);
            }
            for (j, v) in x {
                let e = out.remove(&j).unwrap_or_default() + c * &v;
                if !e.is_zero() {
                    out.insert(j, e);
                }
            }
        }
        out
    }
}

fn laurent_mismatch(a: &BTreeMap<i64, FormalScalar>, b: &BTreeMap<i64, FormalScalar>) -> usize {
    let keys: std::collections::BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    keys.into_iter()
        .filter(|k| a.get(k).cloned().unwrap_or_default() != b.get(k).cloned().unwrap_or_default())
        .count()
}

/// Relations and the Casimir scalar for the one-variable principal series on z^j, 0 ≤ j ≤ max_degree.
pub fn verify_principal_series(max_degree: i64) -> Vec<CheckReport> {
    let ps = PrincipalSeriesExact;
    let mut out = vec![];
    let mut relations = defining_relations(Gen::A, Gen::D, Gen::B, Gen::C);
    relations.push(("Casimir = ([-iν/2]_q)^2".into(), casimir_element(), AlgebraElement::unit().scaled(casimir_scalar())));
    for (name, lhs, rhs) in relations {
        let mut mismatch = 0;
        let mut first = None;
        for j in 0..=max_degree {
            let f: BTreeMap<i64, FormalScalar> = [(j, FormalScalar::one())].into_iter().collect();
            let mm = laurent_mismatch(&ps.apply(&lhs, &f), &ps.apply(&rhs, &f));
            if mm > 0 && first.is_none() {
                first = Some(format!("z^{j}"));
            }
            mismatch += mm;
        }
        out.push(CheckReport::from_mismatches(format!("principal series: {name}"), (max_degree + 1) as usize, first, mismatch));
    }
    out
}

// ---------------------------------------------------------------------------
// normal ordering

/// Letters of words in the Lobachevsky algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    ZStar,
    H,
    HInv,
    Z,
}

impl Letter {
    pub fn parse_word(s: &str) -> QResult<Vec<Letter>> {
        let mut out = vec![];
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                'z' if chars.peek() == Some(&'*') => {
                    chars.next();
                    out.push(Letter::ZStar);
                }
                'z' => out.push(Letter::Z),
                'H' if chars.peek() == Some(&'~') => {
                    chars.next();
                    out.push(Letter::HInv);
                }
                'H' => out.push(Letter::H),
                ' ' => {}
                _ => return Err(QError::InvalidParameter(format!("unknown letter {c:?} (use z, z*, H, H~)"))),
            }
        }
        Ok(out)
    }
}

/// Rewriting system for zH = κHz, z*H = κ⁻¹Hz*, zz* = a z*z − b H⁻², HH⁻¹ = 1
/// with a = (κ/q)², b = κ⁻¹(κ/q)²(1−q²) and κ = q^δ.
#[derive(Debug, Clone)]
pub struct NormalOrderer {
    delta: i64,
    memo: HashMap<Vec<Letter>, BTreeMap<Monomial, FormalScalar>>,
    conflicts: Vec<Vec<Letter>>,
}

type WordCombination = Vec<(FormalScalar, Vec<Letter>)>;

impl NormalOrderer {
    pub fn new(delta: Delta) -> Self {
        Self { delta: delta.value() as i64, memo: HashMap::new(), conflicts: vec![] }
    }

    fn kappa(&self, p: i64) -> FormalScalar {
        FormalScalar::q_power(2 * self.delta * p, 0)
    }

    /// Possible rewrites at position i, if the pair there is out of order.
    fn rewrite(&self, w: &[Letter], i: usize) -> Option<WordCombination> {
        use Letter::*;
        let (x, y) = (w[i], w[i + 1]);
        let splice = |mid: &[Letter]| {
            let mut v = w[..i].to_vec();
            v.extend_from_slice(mid);
            v.extend_from_slice(&w[i + 2..]);
            v
        };
        match (x, y) {
            (Z, H) => Some(vec![(self.kappa(1), splice(&[H, Z]))]),
            (Z, HInv) => Some(vec![(self.kappa(-1), splice(&[HInv, Z]))]),
            (H, ZStar) => Some(vec![(self.kappa(1), splice(&[ZStar, H]))]),
            (HInv, ZStar) => Some(vec![(self.kappa(-1), splice(&[ZStar, HInv]))]),
            (Z, ZStar) => {
                let a = FormalScalar::q_power(4 * self.delta - 4, 0);
                let b = FormalScalar::q_power(2 * self.delta - 4, 0) * (FormalScalar::one() - FormalScalar::q_power(4, 0));
                Some(vec![(a, splice(&[ZStar, Z])), (-b, splice(&[HInv, HInv]))])
            }
            (H, HInv) | (HInv, H) => Some(vec![(FormalScalar::one(), splice(&[]))]),
            _ => None,
        }
    }

    fn ordered_monomial(w: &[Letter]) -> Monomial {
        let count = |l| w.iter().filter(|x| **x == l).count();
        Monomial::new(
            count(Letter::ZStar) as u32,
            count(Letter::H) as i64 - count(Letter::HInv) as i64,
            count(Letter::Z) as u32,
        )
    }

    /// Normal form, computed along every possible first rewrite; any
    /// disagreement between the branches is recorded as a conflict.
    fn reduce(&mut self, w: &[Letter]) -> BTreeMap<Monomial, FormalScalar> {
        if let Some(r) = self.memo.get(w) {
            return r.clone();
        }
        let mut result: Option<BTreeMap<Monomial, FormalScalar>> = None;
        for i in 0..w.len().saturating_sub(1) {
            if let Some(comb) = self.rewrite(w, i) {
                let mut acc = ModuleElement::zero(HSlice::Integer);
                for (c, word) in comb {
                    let nf = self.reduce(&word);
                    for (m, v) in nf {
                        acc.add_term(m, &c * &v);
                    }
                }
                match &result {
                    None => result = Some(acc.terms),
                    Some(prev) => {
                        let prev_e = ModuleElement { slice: HSlice::Integer, terms: prev.clone() };
                        if prev_e.mismatch(&acc) > 0 {
                            self.conflicts.push(w.to_vec());
                        }
                    }
                }
            }
        }
        let r = result.unwrap_or_else(|| {
            let mut m = BTreeMap::new();
            m.insert(Self::ordered_monomial(w), FormalScalar::one());
            m
        });
        self.memo.insert(w.to_vec(), r.clone());
        r
    }

    pub fn normal_order(&mut self, coefficient: FormalScalar, word: &[Letter]) -> ModuleElement {
        let mut e = ModuleElement::zero(HSlice::Integer);
        for (m, v) in self.reduce(word) {
            e.add_term(m, &coefficient * &v);
        }
        e
    }

    /// Words whose reduction paths disagreed.
    pub fn conflicts(&self) -> &[Vec<Letter>] {
        &self.conflicts
    }
}

/// Reduce every word of length ≤ `max_len` along all paths.
pub fn verify_confluence(delta: Delta, max_len: usize) -> CheckReport {
    use Letter::*;
    let letters = [ZStar, H, HInv, Z];
    let mut ord = NormalOrderer::new(delta);
    let mut words: Vec<Vec<Letter>> = vec![vec![]];
    let mut count = 0;
    for _ in 0..max_len {
        let mut next = vec![];
        for w in &words {
            for l in letters {
                let mut v = w.clone();
                v.push(l);
                ord.normal_order(FormalScalar::one(), &v);
                count += 1;
                next.push(v);
            }
        }
        words = next;
    }
    let first = ord.conflicts().first().map(|w| format!("{w:?}"));
    CheckReport::from_mismatches(format!("normal ordering confluence, words ≤ {max_len}"), count, first, ord.conflicts().len())
}

// ---------------------------------------------------------------------------
// coproduct, counit, antipode

/// Σ c · (left word ⊗ right word)
#[derive(Debug, Clone, Default)]
pub struct TensorOperator {
    terms: Vec<(FormalScalar, Vec<Gen>, Vec<Gen>)>,
}

impl TensorOperator {
    pub fn terms(&self) -> &[(FormalScalar, Vec<Gen>, Vec<Gen>)] {
        &self.terms
    }

    pub fn times(&self, other: &TensorOperator) -> Self {
        let mut terms = vec![];
        for (c1, l1, r1) in &self.terms {
            for (c2, l2, r2) in &other.terms {
                let mut l = l1.clone();
                l.extend_from_slice(l2);
                let mut r = r1.clone();
                r.extend_from_slice(r2);
                terms.push((c1 * c2, l, r));
            }
        }
        Self { terms }
    }

    pub fn plus(mut self, other: TensorOperator) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, c: FormalScalar) -> Self {
        for t in &mut self.terms {
            t.0 = &t.0 * &c;
        }
        self
    }

    fn identity() -> Self {
        Self { terms: vec![(FormalScalar::one(), vec![], vec![])] }
    }
}

fn repeat(g: Gen, n: i32) -> Vec<Gen> {
    vec![g; n.unsigned_abs() as usize]
}

/// (A*)^p as a word.
fn astar_power(p: i32) -> Vec<Gen> {
    if p >= 0 {
        repeat(Gen::AStar, p)
    } else {
        repeat(Gen::DStar, p)
    }
}

/// Twisted coproduct of a generator.
pub fn coproduct(gen: Gen, twist: Twist) -> TensorOperator {
    let (r, s) = (twist.r, twist.s);
    let one = FormalScalar::one;
    let cat = |a: Vec<Gen>, b: Vec<Gen>| [a, b].concat();
    let terms = match gen {
        Gen::A | Gen::D | Gen::AStar | Gen::DStar => vec![(one(), vec![gen], vec![gen])],
        Gen::B => vec![
            (one(), cat(astar_power(-r), vec![Gen::A]), vec![Gen::B]),
            (one(), vec![Gen::B], cat(vec![Gen::D], astar_power(s))),
        ],
        Gen::C => vec![
            (one(), cat(astar_power(r), vec![Gen::A]), vec![Gen::C]),
            (one(), vec![Gen::C], cat(vec![Gen::D], astar_power(-s))),
        ],
        Gen::BStar | Gen::CStar => vec![],
    };
    TensorOperator { terms }
}

/// Twisted antipode of a generator as an algebra element.
pub fn antipode(gen: Gen, twist: Twist) -> AlgebraElement {
    let (r, s) = (twist.r, twist.s);
    match gen {
        Gen::A => AlgebraElement::word(&[Gen::D]),
        Gen::D => AlgebraElement::word(&[Gen::A]),
        Gen::AStar => AlgebraElement::word(&[Gen::DStar]),
        Gen::DStar => AlgebraElement::word(&[Gen::AStar]),
        Gen::B => AlgebraElement::word(&[astar_power(r - s), vec![Gen::B]].concat()).scaled(-FormalScalar::q_power(-2, 0)),
        Gen::C => AlgebraElement::word(&[astar_power(s - r), vec![Gen::C]].concat()).scaled(-FormalScalar::q_power(2, 0)),
        Gen::BStar => AlgebraElement::word(&[Gen::BStar]).scaled(-FormalScalar::q_power(2, 0)),
        Gen::CStar => AlgebraElement::word(&[Gen::CStar]).scaled(-FormalScalar::q_power(-2, 0)),
    }
}

/// S on a word: antihomomorphism.
fn antipode_word(word: &[Gen], twist: Twist) -> AlgebraElement {
    word.iter().rev().fold(AlgebraElement::unit(), |acc, g| acc.times(&antipode(*g, twist)))
}

pub fn counit(gen: Gen) -> FormalScalar {
    match gen {
        Gen::A | Gen::D | Gen::AStar | Gen::DStar => FormalScalar::one(),
        _ => FormalScalar::zero(),
    }
}

fn counit_word(word: &[Gen]) -> FormalScalar {
    word.iter().fold(FormalScalar::one(), |acc, g| acc * counit(*g))
}

/// Elements of the tensor square of the right module.
type TensorElement = BTreeMap<(Monomial, Monomial), FormalScalar>;

fn apply_tensor(module: &Lobachevsky, op: &TensorOperator, x: &TensorElement, slice: HSlice) -> TensorElement {
    let mut out: TensorElement = BTreeMap::new();
    for (c, l, r) in &op.terms {
        for ((w1, w2), v) in x {
            let a = module.apply(Side::Right, &AlgebraElement::word(l), &ModuleElement::basis(slice, *w1));
            let b = module.apply(Side::Right, &AlgebraElement::word(r), &ModuleElement::basis(slice, *w2));
            for (t1, c1) in &a.terms {
                for (t2, c2) in &b.terms {
                    let add = c * &(v * &(c1 * c2));
                    let e = out.remove(&(*t1, *t2)).unwrap_or_default() + add;
                    if !e.is_zero() {
                        out.insert((*t1, *t2), e);
                    }
                }
            }
        }
    }
    out
}

fn tensor_mismatch(a: &TensorElement, b: &TensorElement) -> usize {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).copied().collect();
    keys.into_iter()
        .filter(|k| a.get(k).cloned().unwrap_or_default() != b.get(k).cloned().unwrap_or_default())
        .count()
}

/// Coproduct homomorphism (relations of the Δ images on the tensor square),
/// counit axioms and antipode axioms on the generators.
pub fn verify_coproduct(module: &Lobachevsky, leg: &[Monomial], slice: HSlice) -> Vec<CheckReport> {
    let twist = module.twist;
    let mut out = vec![];
    let pairs: Vec<(Monomial, Monomial)> = leg.iter().flat_map(|a| leg.iter().map(move |b| (*a, *b))).collect();
    let delta_of = |u: &AlgebraElement| {
        let mut acc = TensorOperator::default();
        for (c, word) in &u.terms {
            let t = word.iter().fold(TensorOperator::identity(), |t, g| t.times(&coproduct(*g, twist)));
            acc = acc.plus(t.scaled(c.clone()));
        }
        acc
    };
    for (name, lhs, rhs) in defining_relations(Gen::A, Gen::D, Gen::B, Gen::C) {
        let (dl, dr) = (delta_of(&lhs), delta_of(&rhs));
        let mut mismatch = 0;
        let mut first = None;
        for p in &pairs {
            let x: TensorElement = [(*p, FormalScalar::one())].into_iter().collect();
            let mm = tensor_mismatch(&apply_tensor(module, &dl, &x, slice), &apply_tensor(module, &dr, &x, slice));
            if mm > 0 && first.is_none() {
                first = Some(format!("{}⊗{}", p.0, p.1));
            }
            mismatch += mm;
        }
        out.push(CheckReport::from_mismatches(format!("coproduct: {name}"), pairs.len(), first, mismatch));
    }
    let basis: Vec<Monomial> = leg.to_vec();
    for g in [Gen::A, Gen::D, Gen::B, Gen::C] {
        let d = coproduct(g, twist);
        let u = AlgebraElement::word(&[g]);
        // (ε⊗id)Δ(u) = u = (id⊗ε)Δ(u)
        let left = d.terms.iter().fold(AlgebraElement::default(), |acc, (c, l, r)| {
            acc.plus(AlgebraElement::word(r).scaled(c * &counit_word(l)))
        });
        let right = d.terms.iter().fold(AlgebraElement::default(), |acc, (c, l, r)| {
            acc.plus(AlgebraElement::word(l).scaled(c * &counit_word(r)))
        });
        out.push(check_operator_identity(&format!("counit: (ε⊗id)Δ({})", g.name()), &basis, slice, |e| {
            (module.apply(Side::Right, &left, e), module.apply(Side::Right, &u, e))
        }));
        out.push(check_operator_identity(&format!("counit: (id⊗ε)Δ({})", g.name()), &basis, slice, |e| {
            (module.apply(Side::Right, &right, e), module.apply(Side::Right, &u, e))
        }));
        // m(S⊗id)Δ(u) = ε(u) = m(id⊗S)Δ(u)
        let eps = AlgebraElement::unit().scaled(counit(g));
        let s_left = d.terms.iter().fold(AlgebraElement::default(), |acc, (c, l, r)| {
            acc.plus(antipode_word(l, twist).times(&AlgebraElement::word(r)).scaled(c.clone()))
        });
        let s_right = d.terms.iter().fold(AlgebraElement::default(), |acc, (c, l, r)| {
            acc.plus(AlgebraElement::word(l).times(&antipode_word(r, twist)).scaled(c.clone()))
        });
        out.push(check_operator_identity(&format!("antipode: m(S⊗id)Δ({})", g.name()), &basis, slice, |e| {
            (module.apply(Side::Right, &s_left, e), module.apply(Side::Right, &eps, e))
        }));
        out.push(check_operator_identity(&format!("antipode: m(id⊗S)Δ({})", g.name()), &basis, slice, |e| {
            (module.apply(Side::Right, &s_right, e), module.apply(Side::Right, &eps, e))
        }));
    }
    out
}

/// (x.K)* = K*.x* for K ∈ {A, B, C, A*} on the integer-slice monomials of the box.
pub fn verify_star_compatibility(module: &Lobachevsky, bx: &MonomialBox) -> Vec<CheckReport> {
    let basis = bx.monomials();
    [Gen::A, Gen::B, Gen::C, Gen::AStar]
        .into_iter()
        .map(|g| {
            check_operator_identity(&format!("(x.{})* = {}.x*", g.name(), g.star().name()), &basis, HSlice::Integer, |e| {
                let l = module.act(Side::Right, g, e).star().expect("integer slice");
                let r = module.act(Side::Left, g.star(), &e.star().expect("integer slice"));
                (l, r)
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Haar functional on separable ordered functions

type Leg = Rc<dyn Fn(f64) -> f64>;

/// c · φ(z*) ψ(H) χ(z), ordered.
#[derive(Clone)]
pub struct SeparableTerm {
    pub coefficient: f64,
    pub zbar: Leg,
    pub h: Leg,
    pub z: Leg,
}

/// Sum of separable ordered terms.
#[derive(Clone, Default)]
pub struct OrderedFunction {
    pub terms: Vec<SeparableTerm>,
}

impl OrderedFunction {
    pub fn eval(&self, zbar: f64, h: f64, z: f64) -> f64 {
        self.terms.iter().map(|t| t.coefficient * (t.zbar)(zbar) * (t.h)(h) * (t.z)(z)).sum()
    }

    /// w(m,k,n) · exp(−z*²) exp(−H²) exp(−z²): the test class.
    pub fn gaussian_monomial(m: i32, k: i32, n: i32) -> Self {
        let leg = |p: i32| -> Leg { Rc::new(move |x: f64| x.powi(p) * (-x * x).exp()) };
        Self { terms: vec![SeparableTerm { coefficient: 1.0, zbar: leg(m), h: leg(k), z: leg(n) }] }
    }

    /// A bare monomial z*^m H^k z^n.
    pub fn monomial(m: i32, k: i32, n: i32) -> Self {
        Self {
            terms: vec![SeparableTerm {
                coefficient: 1.0,
                zbar: Rc::new(move |x: f64| x.powi(m)),
                h: Rc::new(move |x: f64| x.powi(k)),
                z: Rc::new(move |x: f64| x.powi(n)),
            }],
        }
    }
}

fn dilate(f: &Leg, c: f64) -> Leg {
    let f = f.clone();
    Rc::new(move |x| f(c * x))
}

/// (f(x) − f(p²x))/((1−p²)x)
fn jackson_d(f: &Leg, q: f64) -> Leg {
    let f = f.clone();
    Rc::new(move |x| (f(x) - f(q * q * x)) / ((1.0 - q * q) * x))
}

/// Right action of A, B or C on an ordered function through the difference
/// operators. In the C image the trailing H⁻² is moved left past z using
/// z H⁻² = κ⁻² H⁻² z, so the z leg of that term is taken at qz.
pub fn functional_action(gen: Gen, f: &OrderedFunction, q: f64, delta: Delta) -> QResult<OrderedFunction> {
    let kappa = q.powi(delta.value());
    let sq = q.sqrt();
    let mut out = OrderedFunction::default();
    for t in &f.terms {
        match gen {
            Gen::A => out.terms.push(SeparableTerm {
                coefficient: t.coefficient,
                zbar: t.zbar.clone(),
                h: dilate(&t.h, sq),
                z: dilate(&t.z, 1.0 / q),
            }),
            Gen::B => out.terms.push(SeparableTerm {
                coefficient: t.coefficient * sq,
                zbar: t.zbar.clone(),
                h: dilate(&t.h, sq),
                z: jackson_d(&dilate(&t.z, 1.0 / q), q),
            }),
            Gen::C => {
                let c = t.coefficient * q.powf(1.5);
                let h0 = t.h.clone();
                out.terms.push(SeparableTerm {
                    coefficient: c / kappa,
                    zbar: jackson_d(&t.zbar, q),
                    h: Rc::new(move |x| h0(q.powf(-1.5) * kappa * x) / (x * x)),
                    z: dilate(&t.z, q),
                });
                let zq = dilate(&t.z, q);
                let z_times: Leg = Rc::new(move |x| zq(x) * x);
                out.terms.push(SeparableTerm {
                    coefficient: c / (1.0 - q * q),
                    zbar: t.zbar.clone(),
                    h: dilate(&t.h, q.powf(-1.5)),
                    z: z_times.clone(),
                });
                out.terms.push(SeparableTerm {
                    coefficient: -c / (1.0 - q * q),
                    zbar: t.zbar.clone(),
                    h: dilate(&t.h, sq),
                    z: z_times,
                });
                let dz = jackson_d(&dilate(&t.z, 1.0 / q), q);
                out.terms.push(SeparableTerm {
                    coefficient: -c,
                    zbar: t.zbar.clone(),
                    h: dilate(&t.h, sq),
                    z: Rc::new(move |x| dz(x) * x * x),
                });
            }
            _ => return Err(QError::InvalidParameter(format!("no functional form for {}", gen.name()))),
        }
    }
    Ok(out)
}

/// Lattice ranges for the bilateral sums: s, t over z legs, r over the H leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaarGrid {
    pub z_range: (i32, i32),
    pub h_range: (i32, i32),
}

impl HaarGrid {
    /// Wide enough that q^{s} and q^{r/2} drop below 1e−18 at the far end
    /// and exceed 40 at the near end, where Gaussian legs underflow.
    pub fn for_q(q: f64) -> Self {
        let lq = -q.ln();
        let far = (18.0 * 10f64.ln() / lq).ceil() as i32;
        let near = (40f64.ln() / lq).ceil() as i32 + 2;
        Self { z_range: (-near, far), h_range: (-2 * near, 2 * far) }
    }
}

/// (1−q)²(1−q^{1/2}) Σ_{s,r,t} q^{s+r+t} [f(±q^s, q^{r/2}, ±q^t)] over all four sign pairs.
pub fn haar_functional(f: &OrderedFunction, q: f64, grid: &HaarGrid) -> f64 {
    let z_sum = |g: &Leg| -> f64 {
        (grid.z_range.0..=grid.z_range.1)
            .map(|s| {
                let x = q.powi(s);
                x * (g(x) + g(-x))
            })
            .sum()
    };
    let h_sum = |g: &Leg| -> f64 { (grid.h_range.0..=grid.h_range.1).map(|r| q.powi(r) * g(q.powf(0.5 * r as f64))).sum() };
    let pre = (1.0 - q).powi(2) * (1.0 - q.sqrt());
    pre * f.terms.iter().map(|t| t.coefficient * z_sum(&t.zbar) * h_sum(&t.h) * z_sum(&t.z)).sum::<f64>()
}

/// |I(f.gen) − ε(gen) I(f)| / |I(f)|.
pub fn haar_invariance(f: &OrderedFunction, gen: Gen, q: f64, delta: Delta) -> QResult<f64> {
    let grid = HaarGrid::for_q(q);
    let base = haar_functional(f, q, &grid);
    if base == 0.0 {
        return Ok(0.0);
    }
    let moved = haar_functional(&functional_action(gen, f, q, delta)?, q, &grid);
    let eps = counit(gen).eval(q, 0.0).re;
    Ok((moved - eps * base).abs() / base.abs())
}

// ---------------------------------------------------------------------------
// unitarity of the principal series under a formal pairing

/// q^{half/2} u^{u} as a dilation factor.
type Dilation = (i64, i64);

/// Σ c · w^j · F(λ w) for an unspecified base function F.
#[derive(Debug, Clone, Default)]
pub struct DilatedSeries {
    terms: Vec<(FormalScalar, i64, Dilation)>,
}

impl DilatedSeries {
    pub fn monomial(j: i64) -> Self {
        Self { terms: vec![(FormalScalar::one(), j, (0, 0))] }
    }

    /// f(μw) for μ = q^{half/2}u^{u}.
    fn dilated(&self, mu: Dilation) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, j, l)| (c * &FormalScalar::q_power(mu.0 * j, mu.1 * j), *j, (l.0 + mu.0, l.1 + mu.1)))
                .collect(),
        }
    }

    fn scaled(&self, c: &FormalScalar, shift_degree: i64) -> Self {
        Self { terms: self.terms.iter().map(|(v, j, l)| (v * c, j + shift_degree, *l)).collect() }
    }

    fn plus(mut self, other: Self) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// Principal-series action (real q, so starred generators use the same maps).
    pub fn act(&self, gen: Gen) -> Self {
        let qp = FormalScalar::q_power;
        let back = self.dilated((-2, 0));
        let fwd = self.dilated((2, 0));
        match gen {
            Gen::A | Gen::AStar => back.scaled(&qp(-1, 1), 0),
            Gen::D | Gen::DStar => fwd.scaled(&qp(1, -1), 0),
            Gen::B | Gen::BStar => {
                let c = qp(0, 1).over_one_minus_q2();
                back.scaled(&c, -1).plus(fwd.scaled(&-c, -1))
            }
            Gen::C | Gen::CStar => {
                let den = FormalScalar::one().over_one_minus_q2();
                back.scaled(&(-qp(2, 1) * den.clone()), 1).plus(fwd.scaled(&(qp(6, -3) * den), 1))
            }
        }
    }

    pub fn apply(&self, u: &AlgebraElement) -> Self {
        let mut out = Self::default();
        for (c, word) in &u.terms {
            let mut x = self.clone();
            for g in word.iter().rev() {
                x = x.act(*g);
            }
            out = out.plus(x.scaled(c, 0));
        }
        out
    }
}

/// <f|g> = ∫ conj(f(z̄)) g(q^{iν−1}z) dz reduced with ∫h(λz)dz = λ⁻¹∫h(z)dz
/// to a combination of T(J, γ) = ∫ z^J F̄(z) G(γz) dz.
pub fn formal_pairing(f: &DilatedSeries, g: &DilatedSeries) -> BTreeMap<(i64, Dilation), FormalScalar> {
    let g = g.dilated((-2, 2));
    let mut out: BTreeMap<(i64, Dilation), FormalScalar> = BTreeMap::new();
    for (c1, j1, l1) in &f.terms {
        // conj flips u; the conjugate F̄ sits at dilation l̄1
        let a = (l1.0, -l1.1);
        for (c2, j2, l2) in &g.terms {
            let jj = j1 + j2;
            // ∫ z^J F̄(αz) G(βz) dz = α^{−J−1} T(J, β/α)
            let c = c1.conj() * c2.clone() * FormalScalar::q_power(-a.0 * (jj + 1), -a.1 * (jj + 1));
            let key = (jj, (l2.0 - a.0, l2.1 - a.1));
            let e = out.remove(&key).unwrap_or_default() + c;
            if !e.is_zero() {
                out.insert(key, e);
            }
        }
    }
    out
}

/// <f | g.π(u)> = <π(S(u*)).f | g> for u ∈ {A, B, C} on z̄^a, z^b with a, b ≤ max_degree,
/// where S(A*) = D*, S(B*) = −qB*, S(C*) = −q⁻¹C*.
pub fn verify_unitarity(max_degree: i64) -> Vec<CheckReport> {
    let twist = Twist::default();
    [Gen::A, Gen::B, Gen::C]
        .into_iter()
        .map(|g| {
            let s = antipode(g.star(), twist);
            let mut mismatch = 0;
            let mut first = None;
            let mut count = 0;
            for a in 0..=max_degree {
                for b in 0..=max_degree {
                    let f = DilatedSeries::monomial(a);
                    let h = DilatedSeries::monomial(b);
                    let lhs = formal_pairing(&f, &h.act(g));
                    let rhs = formal_pairing(&f.apply(&s), &h);
                    let keys: std::collections::BTreeSet<_> = lhs.keys().chain(rhs.keys()).copied().collect();
                    let mm = keys
                        .into_iter()
                        .filter(|k| lhs.get(k).cloned().unwrap_or_default() != rhs.get(k).cloned().unwrap_or_default())
                        .count();
                    if mm > 0 && first.is_none() {
                        first = Some(format!("f=z̄^{a}, g=z^{b}"));
                    }
                    mismatch += mm;
                    count += 1;
                }
            }
            CheckReport::from_mismatches(format!("unitarity for {}", g.name()), count, first, mismatch)
        })
        .collect()
}

/// Every exact check on the default boxes.
pub fn verify_all(delta: Delta) -> QResult<Vec<CheckReport>> {
    let module = Lobachevsky::new(delta, Twist::default());
    let bx = MonomialBox::default();
    let mut out = vec![];
    out.extend(verify_algebra_relations(&module, &bx, HSlice::Integer));
    out.extend(verify_algebra_relations(&module, &bx, HSlice::Principal));
    out.extend(verify_casimir(&module, &bx));
    out.extend(verify_principal_series(8));
    out.push(verify_confluence(delta, 6));
    let leg: Vec<Monomial> = MonomialBox { max_m: 1, max_k: 1, max_n: 1 }.monomials();
    out.extend(verify_coproduct(&module, &leg, HSlice::Integer));
    out.extend(verify_star_compatibility(&module, &bx));
    out.extend(verify_unitarity(4));
    Ok(out)
}

/// Positive rational helper for tests and callers building scalars.
pub fn rational(n: i128, d: i128) -> Rational {
    let r = Rational::new(n, d);
    debug_assert!(r.denom().is_positive());
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(a: i64, b: i64) -> FormalScalar {
        FormalScalar::q_power(a, b)
    }

    fn all_pass(r: &[CheckReport]) {
        for c in r {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn scalar_arithmetic_and_normalization() {
        // (1 − q⁴)/(1 − q²) = 1 + q²
        assert_eq!(FormalScalar::q_ratio(8, 0), FormalScalar::one() + qp(4, 0));
        assert_eq!(FormalScalar::q_ratio(8, 0).denominator_power(), 0);
        // (1 − q^{-2})/(1 − q²) = −q^{-2}
        assert_eq!(FormalScalar::q_ratio(-4, 0), -qp(-4, 0));
        let x = FormalScalar::q_ratio(2, 3);
        assert_eq!(x.denominator_power(), 1);
        assert!((x.clone() - x.clone()).is_zero());
        let v = (x.clone() * x).eval(0.5, 0.7);
        let direct = ((1.0 - Complex64::new(0.5f64.ln(), 0.5f64.ln() * 0.7 * 1.5).exp()) / 0.75).powi(2);
        assert!((v - direct).norm() < 1e-14);
        assert_eq!(qp(0, 2).conj(), qp(0, -2));
        assert_eq!(FormalScalar::constant(rational(3, 2)).to_string(), "3/2");
    }

    #[test]
    fn sample_actions() {
        let m = Lobachevsky::new(Delta::One, Twist::default());
        let w0 = ModuleElement::basis(HSlice::Integer, Monomial::new(0, 0, 0));
        assert_eq!(m.act(Side::Right, Gen::A, &w0), w0);
        let w = ModuleElement::basis(HSlice::Integer, Monomial::new(0, 0, 1));
        assert_eq!(m.act(Side::Right, Gen::B, &w), w0.scaled(&qp(-1, 0)));
        // w(1,2,0).C = q^{−3/2}κ w(0,0,0) − q^{5/2}(1−q^{−4})/(1−q²) w(1,2,1)
        let w = ModuleElement::basis(HSlice::Integer, Monomial::new(1, 2, 0));
        let c = m.act(Side::Right, Gen::C, &w);
        assert_eq!(c.coefficient(Monomial::new(0, 0, 0)), qp(-3, 0) * qp(2, 0));
        assert_eq!(c.coefficient(Monomial::new(1, 2, 1)), -(qp(5, 0) * FormalScalar::q_ratio(-8, 0)));
    }

    #[test]
    fn relations_hold_on_both_slices() {
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            let m = Lobachevsky::new(d, Twist::default());
            let bx = MonomialBox::new(3, 3, 3).unwrap();
            all_pass(&verify_algebra_relations(&m, &bx, HSlice::Integer));
            all_pass(&verify_algebra_relations(&m, &bx, HSlice::Principal));
        }
    }

    #[test]
    fn box_bounds_validated() {
        assert!(MonomialBox::new(1, 3, 3).is_err());
    }

    #[test]
    fn casimir_forms_agree() {
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            let m = Lobachevsky::new(d, Twist::default());
            all_pass(&verify_casimir(&m, &MonomialBox::new(3, 3, 3).unwrap()));
        }
        // second term absent when m = 0
        let m = Lobachevsky::new(Delta::One, Twist::default());
        let e = casimir_on_monomial(&m, &ModuleElement::basis(HSlice::Integer, Monomial::new(0, 2, 3)));
        assert_eq!(e.terms().len(), 1);
        let e = casimir_on_monomial(&m, &ModuleElement::basis(HSlice::Integer, Monomial::new(1, 2, 1)));
        assert_eq!(e.terms().len(), 2);
    }

    #[test]
    fn casimir_scalar_matches_qnumber() {
        let v = casimir_scalar().eval(0.6, 1.1);
        let x = crate::qcalc::qnumber(Complex64::new(0.0, -0.55), 0.6);
        assert!((v - x * x).norm() < 1e-13);
    }

    #[test]
    fn principal_series_exact() {
        all_pass(&verify_principal_series(8));
        let ps = PrincipalSeriesExact;
        // 1.π(A) = q^{(iν−1)/2}
        assert_eq!(ps.on_power(Gen::A, 0), vec![(0, qp(-1, 1))]);
        // z.π(B) = q^{iν/2} q^{−1}
        assert_eq!(ps.on_power(Gen::B, 1)[0].1, qp(-2, 1));
    }

    #[test]
    fn normal_ordering_examples() {
        let mut o = NormalOrderer::new(Delta::One);
        let zh = o.normal_order(FormalScalar::one(), &Letter::parse_word("zH").unwrap());
        assert_eq!(zh.coefficient(Monomial::new(0, 1, 1)), qp(2, 0));
        let mut o = NormalOrderer::new(Delta::Zero);
        let zzs = o.normal_order(FormalScalar::one(), &Letter::parse_word("zz*").unwrap());
        // a = q^{−2}, b = q^{−2}(1−q²)
        assert_eq!(zzs.coefficient(Monomial::new(1, 0, 1)), qp(-4, 0));
        assert_eq!(zzs.coefficient(Monomial::new(0, -2, 0)), -(qp(-4, 0) - FormalScalar::one()));
        assert!(Letter::parse_word("zx").is_err());
    }

    #[test]
    fn normal_ordering_confluent() {
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            assert!(verify_confluence(d, 6).passed());
        }
    }

    #[test]
    fn coproduct_and_antipode() {
        let leg = MonomialBox { max_m: 1, max_k: 1, max_n: 1 }.monomials();
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            all_pass(&verify_coproduct(&Lobachevsky::new(d, Twist::default()), &leg, HSlice::Integer));
        }
        let m = Lobachevsky::new(Delta::One, Twist::new(2, -1, Delta::One).unwrap());
        all_pass(&verify_coproduct(&m, &leg, HSlice::Integer));
        assert!(Twist::new(0, 3, Delta::Zero).is_err());
    }

    #[test]
    fn star_compatible() {
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            all_pass(&verify_star_compatibility(&Lobachevsky::new(d, Twist::default()), &MonomialBox::new(3, 3, 3).unwrap()));
        }
    }

    #[test]
    fn functional_forms_match_monomial_actions() {
        let (q, nu) = (0.6, 0.0);
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            let module = Lobachevsky::new(d, Twist::default());
            for w in MonomialBox::new(2, 2, 2).unwrap().monomials() {
                let f = OrderedFunction::monomial(w.m as i32, w.k as i32, w.n as i32);
                for g in [Gen::A, Gen::B, Gen::C] {
                    let ff = functional_action(g, &f, q, d).unwrap();
                    let img = module.act(Side::Right, g, &ModuleElement::basis(HSlice::Integer, w));
                    for (x, h, z) in [(0.7, 1.3, -0.4), (-1.1, 0.8, 0.9)] {
                        let direct: f64 = img
                            .terms()
                            .iter()
                            .map(|(t, c)| c.eval(q, nu).re * f64::powi(x, t.m as i32) * f64::powi(h, t.k as i32) * f64::powi(z, t.n as i32))
                            .sum();
                        let via = ff.eval(x, h, z);
                        assert!((direct - via).abs() < 1e-11 * (1.0 + direct.abs()), "{d:?} {w} {g:?}: {direct} vs {via}");
                    }
                }
            }
        }
    }

    #[test]
    fn haar_invariance_on_gaussian_class() {
        for d in [Delta::Zero, Delta::One, Delta::Two] {
            for (m, k, n) in [(0, 0, 0), (1, 1, 1), (2, 0, 1), (0, 2, 2)] {
                let f = OrderedFunction::gaussian_monomial(m, k, n);
                for g in [Gen::A, Gen::B, Gen::C] {
                    let r = haar_invariance(&f, g, 0.5, d).unwrap();
                    assert!(r < 1e-8, "{d:?} ({m},{k},{n}) {g:?}: {r}");
                }
            }
        }
        let zero = OrderedFunction::default();
        assert_eq!(haar_functional(&zero, 0.5, &HaarGrid::for_q(0.5)), 0.0);
    }

    #[test]
    fn unitarity_identities() {
        all_pass(&verify_unitarity(4));
    }

    #[test]
    fn unitarity_fails_with_wrong_antipode() {
        // S(B*) = −q⁻¹B* instead of −qB*
        let f = DilatedSeries::monomial(1);
        let h = DilatedSeries::monomial(2);
        let lhs = formal_pairing(&f, &h.act(Gen::B));
        let wrong = AlgebraElement::word(&[Gen::BStar]).scaled(-qp(-2, 0));
        let rhs = formal_pairing(&f.apply(&wrong), &h);
        assert!(lhs.iter().any(|(k, v)| rhs.get(k).cloned().unwrap_or_default() != *v));
    }
}
