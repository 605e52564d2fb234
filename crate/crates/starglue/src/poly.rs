//! Exact multivariate polynomials over the Gaussian rationals, truncated in
//! the formal parameter `hbar`.
//!
//! The variable universe is fixed by the target dimension `d`: target
//! coordinates `x1..xd`, residual coordinates `z1..zd` and `zd1..zdd`
//! (all commuting here; odd bookkeeping lives in the graded module), and
//! evaluation-point coordinates `xt1..xtd`. Every polynomial carries a
//! truncation order `N`: monomials with hbar-degree above `N` are dropped by
//! every operation, so arithmetic takes place in the quotient ring modulo
//! `hbar^(N+1)`.

use crate::scalar::GaussRat;
use num::{BigRational, One, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("truncation order mismatch: {0} vs {1}")]
    OrderMismatch(u32, u32),
    #[error("variable index {idx} out of range 1..={d}")]
    IndexOutOfRange { idx: usize, d: usize },
    #[error("polynomial contains {0} variables where only target coordinates are allowed")]
    NotTargetOnly(&'static str),
    #[error("{0}")]
    Unsupported(String),
}

/// The four commuting variable classes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum VarClass {
    /// Target coordinates `x^i`.
    X,
    /// Residual coordinates `z^i`.
    Z,
    /// Residual coordinates `zd_i` (written `z†` on paper).
    ZDag,
    /// Evaluation point coordinates `xt^i`.
    Xt,
}

pub const CLASSES: [VarClass; 4] = [VarClass::X, VarClass::Z, VarClass::ZDag, VarClass::Xt];

impl VarClass {
    fn block(self) -> usize {
        match self {
            VarClass::X => 0,
            VarClass::Z => 1,
            VarClass::ZDag => 2,
            VarClass::Xt => 3,
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            VarClass::X => "x",
            VarClass::Z => "z",
            VarClass::ZDag => "zd",
            VarClass::Xt => "xt",
        }
    }
}

/// A monomial: an hbar power together with one exponent per variable.
///
/// Ordered for canonical printing: hbar-degree ascending, then total variable
/// degree descending, then exponent vector lexicographically descending, so
/// iteration yields the leading term of each hbar level first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono {
    pub hbar: u16,
    exps: Vec<u16>, // length 4*d, blocks [x | z | zd | xt]
}

impl Mono {
    fn unit(d: usize) -> Self {
        Mono { hbar: 0, exps: vec![0; 4 * d] }
    }

    fn slot(&self, d: usize, class: VarClass, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= d);
        class.block() * d + (i - 1)
    }

    pub fn exp(&self, d: usize, class: VarClass, i: usize) -> u16 {
        self.exps[self.slot(d, class, i)]
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().map(|e| *e as u32).sum()
    }

    fn class_degree(&self, d: usize, class: VarClass) -> u32 {
        let b = class.block() * d;
        self.exps[b..b + d].iter().map(|e| *e as u32).sum()
    }

    fn mul(&self, other: &Mono) -> Mono {
        Mono {
            hbar: self.hbar + other.hbar,
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hbar
            .cmp(&other.hbar)
            .then_with(|| other.total_degree().cmp(&self.total_degree()))
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact multivariate polynomial with hbar truncation.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Poly {
    d: usize,
    order: u32,
    terms: BTreeMap<Mono, GaussRat>,
}

impl Poly {
    pub fn zero(d: usize, order: u32) -> Self {
        Poly { d, order, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, order: u32, c: GaussRat) -> Self {
        let mut p = Self::zero(d, order);
        if !c.is_zero() {
            p.terms.insert(Mono::unit(d), c);
        }
        p
    }

    pub fn one(d: usize, order: u32) -> Self {
        Self::constant(d, order, GaussRat::one())
    }

    pub fn var(d: usize, order: u32, class: VarClass, i: usize) -> Result<Self, AlgebraError> {
        if i < 1 || i > d {
            return Err(AlgebraError::IndexOutOfRange { idx: i, d });
        }
        let mut m = Mono::unit(d);
        let s = m.slot(d, class, i);
        m.exps[s] = 1;
        let mut p = Self::zero(d, order);
        p.terms.insert(m, GaussRat::one());
        Ok(p)
    }

    /// A bare hbar^k monomial.
    pub fn hbar_mono(d: usize, order: u32, k: u16) -> Self {
        let mut p = Self::zero(d, order);
        if u32::from(k) <= order {
            let mut m = Mono::unit(d);
            m.hbar = k;
            p.terms.insert(m, GaussRat::one());
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mono, &GaussRat)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    pub fn max_hbar(&self) -> u16 {
        self.terms.keys().map(|m| m.hbar).max().unwrap_or(0)
    }

    fn check_compat(&self, other: &Poly) -> Result<(), AlgebraError> {
        if self.d != other.d {
            return Err(AlgebraError::DimensionMismatch(self.d, other.d));
        }
        if self.order != other.order {
            return Err(AlgebraError::OrderMismatch(self.order, other.order));
        }
        Ok(())
    }

    fn insert(&mut self, m: Mono, c: GaussRat) {
        if c.is_zero() || u32::from(m.hbar) > self.order {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = &*e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Result<Poly, AlgebraError> {
        self.check_compat(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, AlgebraError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            d: self.d,
            order: self.order,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly, AlgebraError> {
        self.check_compat(other)?;
        let mut out = Poly::zero(self.d, self.order);
        for (ma, ca) in &self.terms {
            if u32::from(ma.hbar) > self.order {
                continue;
            }
            for (mb, cb) in &other.terms {
                if u32::from(ma.hbar) + u32::from(mb.hbar) > self.order {
                    continue;
                }
                out.insert(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn mul_gauss(&self, g: &GaussRat) -> Poly {
        if g.is_zero() {
            return Poly::zero(self.d, self.order);
        }
        Poly {
            d: self.d,
            order: self.order,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * g)).collect(),
        }
    }

    /// Multiply by `hbar^k`, truncating.
    pub fn mul_hbar(&self, k: u16) -> Poly {
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            let mut m = m.clone();
            m.hbar += k;
            out.insert(m, c.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Result<Poly, AlgebraError> {
        let mut acc = Poly::one(self.d, self.order);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Exact partial derivative in the target coordinate `x^i`.
    pub fn partial_derivative(&self, i: usize) -> Result<Poly, AlgebraError> {
        self.derivative(VarClass::X, i)
    }

    pub fn derivative(&self, class: VarClass, i: usize) -> Result<Poly, AlgebraError> {
        if i < 1 || i > self.d {
            return Err(AlgebraError::IndexOutOfRange { idx: i, d: self.d });
        }
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            let s = m.slot(self.d, class, i);
            let e = m.exps[s];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.exps[s] = e - 1;
            out.insert(m2, c.mul_rat(&BigRational::from_integer(e.into())));
        }
        Ok(out)
    }

    /// Iterated derivative: one `derivative` per unit of each exponent.
    pub fn derivative_multi(&self, class: VarClass, exps: &[u16]) -> Result<Poly, AlgebraError> {
        let mut out = self.clone();
        for (k, e) in exps.iter().enumerate() {
            for _ in 0..*e {
                out = out.derivative(class, k + 1)?;
                if out.is_zero() {
                    return Ok(out);
                }
            }
        }
        Ok(out)
    }

    pub fn contains_class(&self, class: VarClass) -> bool {
        self.terms.keys().any(|m| m.class_degree(self.d, class) > 0)
    }

    pub fn degree_in_class(&self, class: VarClass) -> u32 {
        self.terms.keys().map(|m| m.class_degree(self.d, class)).max().unwrap_or(0)
    }

    /// `p(x + z)`: the exact binomial expansion of shifting every target
    /// coordinate by the matching residual coordinate. Setting `z = 0`
    /// recovers `p`.
    pub fn taylor_shift(&self) -> Result<Poly, AlgebraError> {
        if self.contains_class(VarClass::Z) || self.contains_class(VarClass::ZDag) {
            return Err(AlgebraError::NotTargetOnly("residual"));
        }
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            // expand prod_i (x_i + z_i)^{e_i}
            let mut parts: Vec<(Mono, BigRational)> = vec![(
                {
                    let mut b = Mono::unit(self.d);
                    b.hbar = m.hbar;
                    b
                },
                BigRational::one(),
            )];
            for i in 1..=self.d {
                let e = m.exp(self.d, VarClass::X, i);
                if e == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(parts.len() * (e as usize + 1));
                for (base, coef) in &parts {
                    let mut binom = BigRational::one();
                    for k in 0..=e {
                        if k > 0 {
                            binom = binom * BigRational::from_integer((e - k + 1).into())
                                / BigRational::from_integer(k.into());
                        }
                        let mut b = base.clone();
                        let sx = b.slot(self.d, VarClass::X, i);
                        let sz = b.slot(self.d, VarClass::Z, i);
                        b.exps[sx] += e - k;
                        b.exps[sz] += k;
                        next.push((b, coef * &binom));
                    }
                }
                parts = next;
            }
            for (b, coef) in parts {
                out.insert(b, c.mul_rat(&coef));
            }
        }
        Ok(out)
    }

    /// Substitute zero for every variable of the given class.
    pub fn set_class_zero(&self, class: VarClass) -> Poly {
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            if m.class_degree(self.d, class) == 0 {
                out.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// Substitute `x^i := xt^i` for all i, merging exponents onto the
    /// evaluation-point coordinates.
    pub fn eval_at_point_coords(&self) -> Poly {
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            for i in 1..=self.d {
                let sx = m2.slot(self.d, VarClass::X, i);
                let st = m2.slot(self.d, VarClass::Xt, i);
                m2.exps[st] += m2.exps[sx];
                m2.exps[sx] = 0;
            }
            out.insert(m2, c.clone());
        }
        out
    }

    /// Substitute rational values for a whole variable class.
    pub fn substitute_class(&self, class: VarClass, vals: &[BigRational]) -> Result<Poly, AlgebraError> {
        if vals.len() != self.d {
            return Err(AlgebraError::DimensionMismatch(vals.len(), self.d));
        }
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            let mut factor = BigRational::one();
            let mut zero = false;
            for i in 1..=self.d {
                let s = m2.slot(self.d, class, i);
                let e = m2.exps[s];
                if e == 0 {
                    continue;
                }
                m2.exps[s] = 0;
                if vals[i - 1].is_zero() {
                    zero = true;
                    break;
                }
                let mut pw = BigRational::one();
                for _ in 0..e {
                    pw *= &vals[i - 1];
                }
                factor *= pw;
            }
            if !zero {
                out.insert(m2, c.mul_rat(&factor));
            }
        }
        Ok(out)
    }

    /// The hbar-homogeneous part of degree `k`, with the hbar power removed.
    pub fn hbar_coefficient(&self, k: u16) -> Poly {
        let mut out = Poly::zero(self.d, self.order);
        for (m, c) in &self.terms {
            if m.hbar == k {
                let mut m2 = m.clone();
                m2.hbar = 0;
                out.insert(m2, c.clone());
            }
        }
        out
    }

    /// Reinterpret at a new truncation order, dropping what no longer fits.
    pub fn with_order(&self, order: u32) -> Poly {
        let mut out = Poly::zero(self.d, order);
        for (m, c) in &self.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.print_negative();
            let mag = if neg { -c } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if m.hbar > 0 {
                parts.push(if m.hbar == 1 { "hbar".into() } else { format!("hbar^{}", m.hbar) });
            }
            for class in CLASSES {
                for i in 1..=self.d {
                    let e = m.exp(self.d, class, i);
                    if e == 1 {
                        parts.push(format!("{}{}", class.prefix(), i));
                    } else if e > 1 {
                        parts.push(format!("{}{}^{}", class.prefix(), i, e));
                    }
                }
            }
            if parts.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", parts.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, parts.join("*"))?;
            }
        }
        Ok(())
    }
}

/// A constant antisymmetric Poisson tensor `alpha^{ij}` on the target.
///
/// For constant coefficients the Jacobi identity is automatic, so only
/// antisymmetry is enforced.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PoissonTensor {
    d: usize,
    entries: Vec<BigRational>, // row-major d*d
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PoissonError {
    #[error("matrix is {rows}x{cols}, expected {d}x{d}")]
    Shape { rows: usize, cols: usize, d: usize },
    #[error("matrix is not antisymmetric at ({i},{j})")]
    NotAntisymmetric { i: usize, j: usize },
}

impl PoissonTensor {
    pub fn new(d: usize, rows: Vec<Vec<BigRational>>) -> Result<Self, PoissonError> {
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(PoissonError::Shape {
                rows: rows.len(),
                cols: rows.first().map(|r| r.len()).unwrap_or(0),
                d,
            });
        }
        for i in 0..d {
            for j in 0..d {
                if rows[i][j] != -rows[j][i].clone() {
                    return Err(PoissonError::NotAntisymmetric { i: i + 1, j: j + 1 });
                }
            }
        }
        Ok(PoissonTensor { d, entries: rows.into_iter().flatten().collect() })
    }

    pub fn zero(d: usize) -> Self {
        PoissonTensor { d, entries: vec![BigRational::zero(); d * d] }
    }

    /// The standard symplectic-style tensor with `alpha^{12} = 1` (d >= 2),
    /// handy as a default.
    pub fn standard(d: usize) -> Self {
        let mut t = Self::zero(d);
        if d >= 2 {
            t.entries[1] = BigRational::one();
            t.entries[d] = -BigRational::one();
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `alpha^{ij}` with 1-based indices.
    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[(i - 1) * self.d + (j - 1)]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// All (i, j) with nonzero entry, 1-based.
    pub fn nonzero_pairs(&self) -> Vec<(usize, usize, BigRational)> {
        let mut out = Vec::new();
        for i in 1..=self.d {
            for j in 1..=self.d {
                let v = self.get(i, j);
                if !v.is_zero() {
                    out.push((i, j, v.clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn x(d: usize, n: u32, i: usize) -> Poly {
        Poly::var(d, n, VarClass::X, i).unwrap()
    }

    #[test]
    fn ring_examples() {
        let d = 2;
        let a = x(d, 4, 1).add(&x(d, 4, 2)).unwrap();
        let s = a.add(&x(d, 4, 1)).unwrap();
        // (x1+x2) + x1 = 2x1 + x2
        let expect = x(d, 4, 1).mul_gauss(&GaussRat::from_int(2)).add(&x(d, 4, 2)).unwrap();
        assert_eq!(s, expect);
        // x1 * x1 = x1^2
        assert_eq!(x(d, 4, 1).mul(&x(d, 4, 1)).unwrap(), x(d, 4, 1).pow(2).unwrap());
    }

    #[test]
    fn truncated_square() {
        // (1 + eps*x1)^2 at hbar-order 1 -> 1 + 2*eps*x1, eps = i*hbar/2
        let d = 1;
        let eps_x = x(d, 1, 1).mul_gauss(&GaussRat { re: rat(0, 1), im: rat(1, 2) }).mul_hbar(1);
        let p = Poly::one(d, 1).add(&eps_x).unwrap();
        let sq = p.mul(&p).unwrap();
        let expect = Poly::one(d, 1).add(&eps_x.mul_gauss(&GaussRat::from_int(2))).unwrap();
        assert_eq!(sq, expect);
    }

    #[test]
    fn derivative_examples() {
        let d = 2;
        // d1(x1 x2) = x2
        let p = x(d, 4, 1).mul(&x(d, 4, 2)).unwrap();
        assert_eq!(p.partial_derivative(1).unwrap(), x(d, 4, 2));
        // d2(const) = 0
        assert!(Poly::one(d, 4).partial_derivative(2).unwrap().is_zero());
        // d1(x1^3) = 3 x1^2
        let c = x(d, 4, 1).pow(3).unwrap().partial_derivative(1).unwrap();
        assert_eq!(c, x(d, 4, 1).pow(2).unwrap().mul_gauss(&GaussRat::from_int(3)));
        assert!(p.partial_derivative(3).is_err());
    }

    #[test]
    fn taylor_shift_examples() {
        let d = 1;
        let z1 = Poly::var(d, 4, VarClass::Z, 1).unwrap();
        // x1 -> x1 + z1
        assert_eq!(x(d, 4, 1).taylor_shift().unwrap(), x(d, 4, 1).add(&z1).unwrap());
        // x1^2 -> x1^2 + 2 x1 z1 + z1^2
        let sq = x(d, 4, 1).pow(2).unwrap().taylor_shift().unwrap();
        let expect = x(d, 4, 1)
            .pow(2)
            .unwrap()
            .add(&x(d, 4, 1).mul(&z1).unwrap().mul_gauss(&GaussRat::from_int(2)))
            .unwrap()
            .add(&z1.pow(2).unwrap())
            .unwrap();
        assert_eq!(sq, expect);
        // constants are shift-invariant
        assert_eq!(Poly::one(d, 4).taylor_shift().unwrap(), Poly::one(d, 4));
        // shift then z := 0 recovers the original
        assert_eq!(sq.set_class_zero(VarClass::Z), x(d, 4, 1).pow(2).unwrap());
        // shifting a z-containing poly is an error
        assert!(z1.taylor_shift().is_err());
    }

    #[test]
    fn order_mismatch_is_error() {
        let a = x(2, 3, 1);
        let b = x(2, 4, 1);
        assert_eq!(a.add(&b), Err(AlgebraError::OrderMismatch(3, 4)));
    }

    #[test]
    fn poisson_antisymmetry_enforced() {
        let bad = PoissonTensor::new(2, vec![vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]]);
        assert!(bad.is_err());
        let good = PoissonTensor::new(2, vec![vec![rat(0, 1), rat(1, 1)], vec![rat(-1, 1), rat(0, 1)]]);
        assert!(good.is_ok());
    }
}
