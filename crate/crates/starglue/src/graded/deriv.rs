//! Graded multiplication, functional and coordinate derivatives, and the
//! truncated exponential.

use super::*;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GradedError {
    #[error("rewrite budget of {0} rule applications exceeded")]
    BudgetExceeded(usize),
    #[error("exponent contains a term of odd parity: {0}")]
    OddExponent(String),
}

/// Concatenate-then-canonicalize product. Bound labels of `b` are renamed
/// away from those of `a`; shared free labels are kept shared.
pub fn graded_mul(a: &GradedExpr, b: &GradedExpr) -> GradedExpr {
    let mut out = Vec::new();
    for ta in a.terms() {
        let shift = ta.bound_pts().iter().map(|p| p.0).max().map_or(0, |m| m + 1);
        for tb in b.terms() {
            let bound: std::collections::BTreeSet<Pt> = tb.bound_pts().into_iter().collect();
            debug_assert!(
                bound.iter().all(|p| p.0 + shift < FREE_BASE),
                "bound labels must stay below the free range"
            );
            let tb2 = tb.map_points(&mut |p| if bound.contains(&p) { Pt(p.0 + shift) } else { p });
            let mut factors = ta.factors.clone();
            factors.extend(tb2.factors);
            let mut domains = ta.domains.clone();
            domains.extend(tb2.domains);
            out.push(Term::new(ta.coeff.mul(&tb2.coeff), factors, domains));
        }
    }
    GradedExpr::from_terms(out)
}

/// Left functional derivative with respect to the field `kind`
/// (`E` or `X`) with target index `idx`, inserted at the free point `at`.
/// Each matched factor is replaced by the Dirac pairing `dpt(at, p)`; the
/// sign of moving an odd derivative past `k` preceding odd factors is
/// `(-1)^k`.
pub fn functional_derivative(e: &GradedExpr, kind: FieldKind, idx: u8, at: Pt) -> GradedExpr {
    debug_assert!(matches!(kind, FieldKind::E | FieldKind::X));
    let odd_op = kind.parity().is_odd();
    let mut out = Vec::new();
    for t in e.terms() {
        let mut prefix_odds = 0u32;
        for (p, f) in t.factors.iter().enumerate() {
            if let Factor::Field { kind: fk, idx: fi, pt: Some(q) } = f {
                if *fk == kind && *fi == idx {
                    let mut factors = t.factors.clone();
                    factors[p] = Factor::kernel2(KernelKind::DeltaPt, at, *q);
                    let mut coeff = t.coeff.clone();
                    if odd_op && prefix_odds % 2 == 1 {
                        coeff = coeff.neg();
                    }
                    out.push(Term::new(coeff, factors, t.domains.clone()));
                }
            }
            if f.parity().is_odd() {
                prefix_odds += 1;
            }
        }
    }
    GradedExpr::from_terms(out)
}

/// Left derivative with respect to a residual coordinate (`Z` or `ZDag`);
/// the matched factor is removed.
pub fn coordinate_derivative(e: &GradedExpr, kind: FieldKind, idx: u8) -> GradedExpr {
    debug_assert!(matches!(kind, FieldKind::Z | FieldKind::ZDag));
    let mut out = Vec::new();
    for t in e.terms() {
        let mut prefix_odds = 0u32;
        for (p, f) in t.factors.iter().enumerate() {
            if let Factor::Field { kind: fk, idx: fi, pt: None } = f {
                if *fk == kind && *fi == idx {
                    let mut factors = t.factors.clone();
                    factors.remove(p);
                    let mut coeff = t.coeff.clone();
                    if prefix_odds % 2 == 1 {
                        coeff = coeff.neg();
                    }
                    out.push(Term::new(coeff, factors, t.domains.clone()));
                }
            }
            if f.parity().is_odd() {
                prefix_odds += 1;
            }
        }
    }
    GradedExpr::from_terms(out)
}

/// In-place replacement of `from`-fields by `to`-fields at points bound by
/// one of `intervals`, with the prefix-parity sign of moving an odd operator
/// to the insertion position. This is the action of operators of the shape
/// `int dF delta/delta F` (and `int dx delta/delta X`) on a product of
/// factors.
pub fn field_shift(e: &GradedExpr, from: FieldKind, to: FieldKind, intervals: &[IntervalId]) -> GradedExpr {
    let mut out = Vec::new();
    for t in e.terms() {
        let mut prefix_odds = 0u32;
        for (p, f) in t.factors.iter().enumerate() {
            if let Factor::Field { kind: fk, idx: fi, pt: Some(q) } = f {
                let in_range = t.binding_of(*q).map_or(false, |d| match d.kind {
                    DomainKind::Interval(i) | DomainKind::Config2(i) => intervals.contains(&i),
                    DomainKind::Bulk => false,
                });
                if *fk == from && in_range {
                    let mut factors = t.factors.clone();
                    factors[p] = if to == FieldKind::Dx {
                        Factor::coord(FieldKind::Dx, *fi)
                    } else {
                        Factor::field(to, *fi, *q)
                    };
                    let mut coeff = t.coeff.clone();
                    if prefix_odds % 2 == 1 {
                        coeff = coeff.neg();
                    }
                    out.push(Term::new(coeff, factors, t.domains.clone()));
                }
            }
            if f.parity().is_odd() {
                prefix_odds += 1;
            }
        }
    }
    GradedExpr::from_terms(out)
}

/// Replace every closed-propagator factor by the homotopy differential, one
/// position at a time (the product rule for an even formal derivation).
pub fn time_derivative(e: &GradedExpr) -> GradedExpr {
    let mut out = Vec::new();
    for t in e.terms() {
        for (p, f) in t.factors.iter().enumerate() {
            if let Factor::Kernel { kind: KernelKind::Zeta, pts } = f {
                let mut factors = t.factors.clone();
                factors[p] = Factor::Kernel { kind: KernelKind::DKappa, pts: pts.clone() };
                out.push(Term::new(t.coeff.clone(), factors, t.domains.clone()));
            }
        }
    }
    GradedExpr::from_terms(out)
}

/// Contract Dirac pairings: `dpt(u, a)` with `a` bound integrates the bound
/// slot away and substitutes. Pairings across distinct intervals vanish.
pub fn contract_deltas(e: &GradedExpr) -> GradedExpr {
    let mut terms: Vec<Term> = e.terms().to_vec();
    let mut out = Vec::new();
    'outer: while let Some(t) = terms.pop() {
        for (p, f) in t.factors.iter().enumerate() {
            if let Factor::Kernel { kind: KernelKind::DeltaPt, pts } = f {
                let (u, a) = (pts[0], pts[1]);
                if let Some(next) = contract_one(&t, p, u, a) {
                    terms.extend(next);
                }
                continue 'outer;
            }
        }
        out.push(t);
    }
    GradedExpr::from_terms(out)
}

/// Contract a single Dirac pairing at factor position `p`. Returns the list
/// of resulting terms (empty when the pairing vanishes).
pub(crate) fn contract_one(t: &Term, p: usize, u: Pt, a: Pt) -> Option<Vec<Term>> {
    let bind_u = t.binding_of(u).map(|d| d.kind.clone());
    let bind_a = t.binding_of(a).map(|d| d.kind.clone());
    let interval_of = |k: &DomainKind| match k {
        DomainKind::Interval(i) | DomainKind::Config2(i) => Some(*i),
        DomainKind::Bulk => None,
    };
    // decide which point is integrated out
    let (kill, keep) = match (&bind_u, &bind_a) {
        (Some(ku), Some(ka)) => {
            match (interval_of(ku), interval_of(ka)) {
                (Some(iu), Some(ia)) if iu != ia => return Some(vec![]), // disjoint supports
                _ => {}
            }
            (a, u)
        }
        (None, Some(_)) => (a, u),
        (Some(_), None) => (u, a),
        (None, None) => return None, // nothing to contract
    };
    let mut factors = t.factors.clone();
    factors.remove(p);
    let mut domains = Vec::with_capacity(t.domains.len());
    for d in &t.domains {
        if d.pts.contains(&kill) {
            match &d.kind {
                DomainKind::Interval(_) | DomainKind::Bulk => continue, // slot consumed
                DomainKind::Config2(i) => {
                    let other = if d.pts[0] == kill { d.pts[1] } else { d.pts[0] };
                    domains.push(DomainFactor::interval(*i, other));
                }
            }
        } else {
            domains.push(d.clone());
        }
    }
    let mut out = Term::new(t.coeff.clone(), factors, domains);
    out = out.map_points(&mut |q| if q == kill { keep } else { q });
    Some(vec![out])
}

/// `sum_k S^k / k!` with exact coefficients, truncated once a term exceeds
/// the factor budget. Errors when `S` has a term of odd parity.
pub fn exp_truncated(s: &GradedExpr, factor_budget: usize) -> Result<GradedExpr, GradedError> {
    for t in s.terms() {
        if t.parity().is_odd() {
            return Err(GradedError::OddExponent(t.to_string()));
        }
    }
    let trim = |e: &GradedExpr| {
        GradedExpr::from_terms(
            e.terms().iter().filter(|t| t.factors.len() <= factor_budget).cloned().collect(),
        )
    };
    let mut acc = GradedExpr::one();
    let mut pow = GradedExpr::one();
    let mut k = 0u32;
    loop {
        k += 1;
        pow = trim(&graded_mul(&pow, s)).scale(&Scalar::from_ratio(1, k.into()));
        if pow.is_zero() || k as usize > factor_budget + 1 {
            return Ok(acc);
        }
        acc = acc.add(&pow);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1() -> IntervalId {
        IntervalId::e(1)
    }

    #[test]
    fn functional_derivative_free_term() {
        // delta/delta X_i(u) of int_{Q x P} E_j(s) zeta(v, s) X_j(v)
        //   -> int_Q E_i(s) zeta(u, s)
        let s = Pt(0);
        let v = Pt(1);
        let u = Pt::free(0);
        let d = 2u8;
        let mut terms = Vec::new();
        for j in 1..=d {
            terms.push(Term::new(
                Scalar::one(),
                vec![
                    Factor::field(FieldKind::E, j, s),
                    Factor::kernel2(KernelKind::Zeta, v, s),
                    Factor::field(FieldKind::X, j, v),
                ],
                vec![DomainFactor::interval(q1(), s), DomainFactor::interval(IntervalId::x(0), v)],
            ));
        }
        let e = GradedExpr::from_terms(terms);
        let der = contract_deltas(&functional_derivative(&e, FieldKind::X, 1, u));
        let expect = GradedExpr::single(Term::new(
            Scalar::one(),
            vec![Factor::field(FieldKind::E, 1, s), Factor::kernel2(KernelKind::Zeta, u, s)],
            vec![DomainFactor::interval(q1(), s)],
        ));
        assert_eq!(der, expect, "got {der}");
    }

    #[test]
    fn derivative_of_field_free_term_is_zero() {
        let s = Pt(0);
        let t = Term::new(
            Scalar::one(),
            vec![Factor::kernel2(KernelKind::ZetaHat, s, Pt(1))],
            vec![DomainFactor::config2(q1(), s, Pt(1))],
        );
        let e = GradedExpr::single(t);
        assert!(functional_derivative(&e, FieldKind::E, 1, Pt::free(0)).is_zero());
    }

    #[test]
    fn second_derivative_on_skew_quadratic_diagonal_vanishes() {
        // delta^2/dE_i(u) dE_i(u) of int E_i zhat E_j with i = j kills the
        // term through the skew kernel on the diagonal.
        let s = Pt(0);
        let t2 = Pt(1);
        let term = Term::new(
            Scalar::one(),
            vec![
                Factor::field(FieldKind::E, 1, s),
                Factor::kernel2(KernelKind::ZetaHat, s, t2),
                Factor::field(FieldKind::E, 1, t2),
            ],
            vec![DomainFactor::config2(q1(), s, t2)],
        );
        let e = GradedExpr::single(term);
        let u = Pt::free(0);
        let d1 = contract_deltas(&functional_derivative(&e, FieldKind::E, 1, u));
        let d2 = contract_deltas(&functional_derivative(&d1, FieldKind::E, 1, u));
        assert!(d2.is_zero(), "skew diagonal must vanish, got {d2}");
    }

    #[test]
    fn exp_of_zero_and_nilpotent() {
        assert_eq!(exp_truncated(&GradedExpr::zero(), 8).unwrap(), GradedExpr::one());
        // a single even term built from two odd coordinate factors squares
        // to zero once a coordinate repeats
        let t = Term::new(
            Scalar::one(),
            vec![Factor::coord(FieldKind::ZDag, 1), Factor::coord(FieldKind::Dx, 1)],
            vec![],
        );
        let e = GradedExpr::single(t.clone());
        let ex = exp_truncated(&e, 10).unwrap();
        assert_eq!(ex, GradedExpr::one().add(&e));
        // odd exponent rejected
        let odd = GradedExpr::single(Term::new(Scalar::one(), vec![Factor::coord(FieldKind::Z, 1)], vec![]));
        assert!(exp_truncated(&odd, 4).is_err());
    }

    #[test]
    fn exp_residual_pairing_truncates_at_dimension() {
        // exp((i/hbar) zd_j dx^j) over d = 2 terminates with 4 terms
        let d = 2u8;
        let mut terms = Vec::new();
        for j in 1..=d {
            terms.push(Term::new(
                Scalar::i_over_hbar(),
                vec![Factor::coord(FieldKind::ZDag, j), Factor::coord(FieldKind::Dx, j)],
                vec![],
            ));
        }
        let s = GradedExpr::from_terms(terms);
        let ex = exp_truncated(&s, 2 * d as usize).unwrap();
        // 1 + two linear terms + one top term
        assert_eq!(ex.num_terms(), 4);
    }
}
