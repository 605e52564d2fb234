//! The background connection on target sections and its flatness checks.
//!
//! Sections are polynomials in the target and residual coordinates graded by
//! background one-forms `dx^J`. The connection acts as
//! `sum_j dx^j (d/dx^j - d/dz^j)`; shifted functions `f(x + z)` are exactly
//! its flat sections.

use crate::poly::{AlgebraError, Poly, VarClass};
use crate::scalar::GaussRat;
use std::collections::BTreeMap;
use std::fmt;

/// A `dx`-graded section: sorted index sets mapped to polynomial
/// coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TargetSection {
    pub components: BTreeMap<Vec<u8>, Poly>,
}

impl TargetSection {
    pub fn scalar(p: Poly) -> Self {
        let mut components = BTreeMap::new();
        if !p.is_zero() {
            components.insert(vec![], p);
        }
        TargetSection { components }
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    fn insert(&mut self, idx: Vec<u8>, p: Poly) {
        if p.is_zero() {
            return;
        }
        match self.components.entry(idx) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&p).expect("matching dimensions");
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }
}

impl fmt::Display for TargetSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, p) in &self.components {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if idx.is_empty() {
                write!(f, "({p})")?;
            } else {
                let wedge: Vec<String> = idx.iter().map(|j| format!("dx{j}")).collect();
                write!(f, "{}({p})", wedge.join("^"))?;
            }
        }
        Ok(())
    }
}

/// Apply the connection once, raising the form degree by one.
pub fn connection(section: &TargetSection, d: usize) -> Result<TargetSection, AlgebraError> {
    let mut out = TargetSection { components: BTreeMap::new() };
    for (idx, p) in &section.components {
        for j in 1..=d as u8 {
            if idx.contains(&j) {
                continue; // dx^j /\ dx^j = 0
            }
            let c = p.partial_derivative(j as usize)?.sub(&p.derivative(VarClass::Z, j as usize)?)?;
            if c.is_zero() {
                continue;
            }
            // insert j into the sorted index set with the wedge sign
            let mut nidx = idx.clone();
            let pos = nidx.iter().position(|k| *k > j).unwrap_or(nidx.len());
            nidx.insert(pos, j);
            let signed = if pos % 2 == 1 { c.mul_gauss(&GaussRat::from_int(-1)) } else { c };
            out.insert(nidx, signed);
        }
    }
    Ok(out)
}

/// The flatness residual of a shifted function: applying the connection to
/// `f(x + z)` must give zero.
pub fn grothendieck_flat_check(f: &Poly) -> Result<TargetSection, AlgebraError> {
    let shifted = f.taylor_shift()?;
    connection(&TargetSection::scalar(shifted), f.dim())
}

/// The square of the connection on an arbitrary section; identically zero.
pub fn connection_squared(section: &TargetSection, d: usize) -> Result<TargetSection, AlgebraError> {
    connection(&connection(section, d)?, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;

    #[test]
    fn coordinates_are_flat() {
        let f = parse_poly("x1", 2, 2).unwrap();
        assert!(grothendieck_flat_check(&f).unwrap().is_zero());
        let f = parse_poly("x1^2*x2", 2, 2).unwrap();
        assert!(grothendieck_flat_check(&f).unwrap().is_zero());
    }

    #[test]
    fn non_shifted_section_is_detected() {
        // x1 z1 is not a shifted function: the residual is dx1 (z1 - x1)
        let p = parse_poly("x1*z1", 1, 2).unwrap();
        let r = connection(&TargetSection::scalar(p), 1).unwrap();
        let expect = parse_poly("z1 - x1", 1, 2).unwrap();
        assert_eq!(r.components.get(&vec![1u8]), Some(&expect));
    }

    #[test]
    fn connection_squares_to_zero() {
        let p = parse_poly("x1^2*z2 + x2*z1^3 - 2*x1*x2*z1*z2", 2, 2).unwrap();
        let s = TargetSection::scalar(p);
        assert!(connection_squared(&s, 2).unwrap().is_zero());
    }
}
