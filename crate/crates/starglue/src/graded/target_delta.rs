//! Dirac deltas on the target with derivative multi-indices, and the
//! distribution calculus used when integrating glued densities over the
//! target: `int g(x) d^k delta(x - xt) d^dx = (-1)^{|k|} (d^k g)(xt)`.

use crate::poly::{AlgebraError, Poly, VarClass};
use crate::scalar::GaussRat;

/// A symbolic `d^k delta` centered at the evaluation point, where `k` is a
/// derivative multi-index over the target coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DeltaTarget {
    pub derivs: Vec<u16>,
}

impl DeltaTarget {
    pub fn plain(d: usize) -> Self {
        DeltaTarget { derivs: vec![0; d] }
    }

    pub fn order(&self) -> u32 {
        self.derivs.iter().map(|e| *e as u32).sum()
    }

    /// One more derivative in direction `i` (1-based).
    pub fn derive(&self, i: usize) -> Self {
        let mut derivs = self.derivs.clone();
        derivs[i - 1] += 1;
        DeltaTarget { derivs }
    }
}

/// Evaluate `int_P g(x) * d^k delta(x - xt) d^dx` exactly: apply the
/// derivatives to `g` with the sign `(-1)^{|k|}` and substitute the target
/// coordinates by the evaluation-point coordinates.
pub fn integrate_against(g: &Poly, dt: &DeltaTarget) -> Result<Poly, AlgebraError> {
    if dt.derivs.len() != g.dim() {
        return Err(AlgebraError::DimensionMismatch(dt.derivs.len(), g.dim()));
    }
    let dg = g.derivative_multi(VarClass::X, &dt.derivs)?;
    let signed = if dt.order() % 2 == 1 { dg.mul_gauss(&GaussRat::from_int(-1)) } else { dg };
    Ok(signed.eval_at_point_coords())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::poly::PoissonTensor;

    #[test]
    fn plain_delta_evaluates() {
        let f = parse_poly("x1^2*x2 + 3", 2, 2).unwrap();
        let r = integrate_against(&f, &DeltaTarget::plain(2)).unwrap();
        assert_eq!(r, parse_poly("xt1^2*xt2 + 3", 2, 2).unwrap());
    }

    #[test]
    fn one_derivative_integrates_by_parts() {
        // d_1 delta against g -> -d_1 g at the point
        let g = parse_poly("x1^2", 1, 2).unwrap();
        let r = integrate_against(&g, &DeltaTarget::plain(1).derive(1)).unwrap();
        assert_eq!(r, parse_poly("-2*xt1", 1, 2).unwrap());
    }

    #[test]
    fn antisymmetric_contraction_vanishes() {
        // sum_ij alpha^{ij} int d_i f * d_j delta = -sum alpha^{ij} (d_i d_j f)(xt) = 0
        let alpha = PoissonTensor::standard(2);
        let f = parse_poly("x1^3*x2^2 - x1*x2", 2, 2).unwrap();
        let mut acc = Poly::zero(2, 2);
        for (i, j, v) in alpha.nonzero_pairs() {
            let df = f.partial_derivative(i).unwrap();
            let term = integrate_against(&df, &DeltaTarget::plain(2).derive(j)).unwrap();
            acc = acc.add(&term.mul_gauss(&GaussRat::from_rational(v))).unwrap();
        }
        assert!(acc.is_zero(), "antisymmetry must kill the contraction, got {acc}");
    }
}
