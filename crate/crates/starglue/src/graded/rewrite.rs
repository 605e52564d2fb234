//! The terminating rewrite system encoding the analytic identities used by
//! the master-equation verifications: Dirac contraction, closedness of the
//! propagator, Stokes splitting of the boundary kernel, the unit diagonal
//! jump, endpoint vanishing, integration by parts, and the propagator unit
//! integral.

use super::deriv::{contract_one, GradedError};
use crate::scalar::GaussRat;
use super::*;

/// How the differential of the boundary kernel `zhat` resolves under Stokes:
/// on a disk with an `X`-polarized boundary piece it is the pairing of two
/// propagators through that piece; with residual fields present it splits
/// into one-forms `tau` attached to either argument.
#[derive(Clone, Debug)]
pub enum ZetaHatStokes {
    BoundaryPair { x_interval: IntervalId },
    TauSplit,
}

#[derive(Clone, Debug)]
pub struct RewriteCtx {
    pub budget: usize,
    pub zetahat_stokes: ZetaHatStokes,
    /// `X`-polarized intervals of the surface (bulk Stokes faces restrict to
    /// these; faces on `E`-polarized intervals die with the propagator).
    pub x_intervals: Vec<IntervalId>,
    pub trace: bool,
    /// Optional seed to shuffle the term-processing order; the normal form
    /// must not depend on it (exercised by the confluence suite).
    pub shuffle: Option<u64>,
}

pub const DEFAULT_BUDGET: usize = 200_000;
pub const BUDGET_ENV_VAR: &str = "STARGLUE_REWRITE_BUDGET";

pub fn budget_from_env() -> usize {
    std::env::var(BUDGET_ENV_VAR).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

impl RewriteCtx {
    pub fn new(zetahat_stokes: ZetaHatStokes, x_intervals: Vec<IntervalId>) -> Self {
        RewriteCtx { budget: budget_from_env(), zetahat_stokes, x_intervals, trace: false, shuffle: None }
    }
}

#[derive(Default, Debug, Clone)]
pub struct RewriteStats {
    pub applications: usize,
    pub passes: usize,
    pub trace: Vec<String>,
}

/// Rewrite to the fixpoint of the rule set. Returns the normal form together
/// with application statistics; errors when the rule budget is exceeded.
pub fn rewrite_normal_form(e: &GradedExpr, ctx: &RewriteCtx) -> Result<(GradedExpr, RewriteStats), GradedError> {
    let mut cur = e.clone();
    let mut stats = RewriteStats::default();
    loop {
        stats.passes += 1;
        let mut changed = false;
        let mut out: Vec<Term> = Vec::new();
        let mut terms: Vec<Term> = cur.terms().to_vec();
        if let Some(seed) = ctx.shuffle {
            shuffle_terms(&mut terms, seed.wrapping_add(stats.passes as u64));
        }
        for t in terms {
            match apply_first_rule(&t, ctx) {
                Some((rule, mut replacement)) => {
                    stats.applications += 1;
                    if stats.applications > ctx.budget {
                        return Err(GradedError::BudgetExceeded(ctx.budget));
                    }
                    if ctx.trace {
                        stats.trace.push(format!("{rule}: {t}"));
                    }
                    changed = true;
                    out.append(&mut replacement);
                }
                None => out.push(t),
            }
        }
        let next = GradedExpr::from_terms(out);
        if !changed {
            return Ok((next, stats));
        }
        cur = next;
    }
}

fn shuffle_terms(terms: &mut [Term], seed: u64) {
    // small deterministic LCG shuffle; avoids pulling rand into the core path
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for i in (1..terms.len()).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        terms.swap(i, j);
    }
}

fn apply_first_rule(t: &Term, ctx: &RewriteCtx) -> Option<(&'static str, Vec<Term>)> {
    if let Some(r) = rule_delta(t) {
        return Some(("delta", r));
    }
    if let Some(r) = rule_zeta_unit(t) {
        return Some(("zeta-unit", r));
    }
    if let Some(r) = rule_split_config(t) {
        return Some(("split", r));
    }
    if let Some(r) = rule_ibp(t, ctx) {
        return Some(("ibp", r));
    }
    None
}

/// R1: Dirac contraction.
fn rule_delta(t: &Term) -> Option<Vec<Term>> {
    for (p, f) in t.factors.iter().enumerate() {
        if let Factor::Kernel { kind: KernelKind::DeltaPt, pts } = f {
            if let Some(out) = contract_one(t, p, pts[0], pts[1]) {
                return Some(out);
            }
        }
    }
    None
}

/// R9: the propagator integrates to one over an `X`-polarized interval when
/// nothing else depends on the integration point.
fn rule_zeta_unit(t: &Term) -> Option<Vec<Term>> {
    for (p, f) in t.factors.iter().enumerate() {
        if let Factor::Kernel { kind: KernelKind::Zeta, pts } = f {
            let u = pts[0];
            let bound_x = matches!(
                t.binding_of(u).map(|d| &d.kind),
                Some(DomainKind::Interval(IntervalId { class: IntervalClass::XSide, .. }))
            );
            if !bound_x {
                continue;
            }
            let elsewhere = t
                .factors
                .iter()
                .enumerate()
                .any(|(q, g)| q != p && g.points().contains(&u));
            if elsewhere {
                continue;
            }
            let mut sign = 1i32;
            for g in &t.factors[..p] {
                if g.parity().is_odd() {
                    sign = -sign;
                }
            }
            let mut factors = t.factors.clone();
            factors.remove(p);
            let domains = t.domains.iter().filter(|d| !d.pts.contains(&u)).cloned().collect();
            let coeff = if sign < 0 { t.coeff.neg() } else { t.coeff.clone() };
            return Some(vec![Term::new(coeff, factors, domains)]);
        }
    }
    None
}

/// Split a two-point configuration domain into a plain product once no
/// factor needs its diagonal structure (no boundary kernel on the pair, no
/// bulk propagator pair, no pending differentials).
fn rule_split_config(t: &Term) -> Option<Vec<Term>> {
    let has_dfield = t.factors.iter().any(
        |f| matches!(f, Factor::Field { kind: FieldKind::DE | FieldKind::DX, .. }),
    );
    if has_dfield {
        return None;
    }
    for (r, d) in t.domains.iter().enumerate() {
        if let DomainKind::Config2(i) = &d.kind {
            let (s, u) = (d.pts[0], d.pts[1]);
            if needs_config(t, s, u) {
                continue;
            }
            let mut domains = t.domains.clone();
            domains.splice(
                r..=r,
                [DomainFactor::interval(*i, s), DomainFactor::interval(*i, u)],
            );
            return Some(vec![Term::new(t.coeff.clone(), t.factors.clone(), domains)]);
        }
    }
    None
}

fn needs_config(t: &Term, s: Pt, u: Pt) -> bool {
    for f in &t.factors {
        if let Factor::Kernel { kind: KernelKind::ZetaHat, pts } = f {
            if pts.contains(&s) && pts.contains(&u) {
                return true;
            }
        }
    }
    // a bulk point paired to both slots keeps the diagonal jump available
    for d in &t.domains {
        if matches!(d.kind, DomainKind::Bulk) {
            let w = d.pts[0];
            let to_s = t.factors.iter().any(|f| matches!(f, Factor::Kernel { kind: KernelKind::Zeta, pts } if pts[0] == w && pts[1] == s));
            let to_u = t.factors.iter().any(|f| matches!(f, Factor::Kernel { kind: KernelKind::Zeta, pts } if pts[0] == w && pts[1] == u));
            if to_s && to_u {
                return true;
            }
        }
    }
    false
}

const SIGN_DIAG: i32 = 1;
const SIGN_DIAG_BULK: i32 = 1;
const SIGN_BULK_FACE: i32 = 1;
const SIGN_R3_PAIR: i32 = 1;
const SIGN_R3_TAU_FIRST: i32 = 1;
const SIGN_R3_TAU_SECOND: i32 = -1;

/// R6 with its satellites: move a source differential off a boundary field.
/// The term is replaced by the Stokes faces of its full integrand minus the
/// Leibniz terms where the differential lands on every other factor
/// (`d zeta = 0`, `d zhat` by the surface's Stokes image, `d kappa` stored,
/// `d tau = 0`); faces vanish with the fields and kernels at endpoints, the
/// configuration-space diagonal contributes the unit jump. Fires only when
/// every produced differential-carrying term is canonically smaller, which
/// orients mirror pairs and makes the system terminate.
fn rule_ibp(t: &Term, ctx: &RewriteCtx) -> Option<Vec<Term>> {
    let pos_f = t.factors.iter().position(|f| {
        matches!(f, Factor::Field { kind: FieldKind::DE | FieldKind::DX, pt: Some(p), .. } if !p.is_free())
    })?;

    let prefix_sign = |k: usize| -> i32 {
        let odds = t.factors[..k].iter().filter(|f| f.parity().is_odd()).count();
        if odds % 2 == 1 {
            -1
        } else {
            1
        }
    };
    let s_f = prefix_sign(pos_f);

    let mut outputs: Vec<Term> = Vec::new();

    // undo the differential at the pivot for face restriction
    let mut base_factors = t.factors.clone();
    if let Factor::Field { kind, idx, pt } = &t.factors[pos_f] {
        let k = match kind {
            FieldKind::DE => FieldKind::E,
            FieldKind::DX => FieldKind::X,
            _ => unreachable!(),
        };
        base_factors[pos_f] = Factor::Field { kind: k, idx: *idx, pt: *pt };
    }

    // Stokes faces of the full domain
    for (r, dom) in t.domains.iter().enumerate() {
        match &dom.kind {
            DomainKind::Interval(_) => {
                // endpoint faces: die unless some factor survives; every
                // corpus face carries a vanishing field or kernel
                let p = dom.pts[0];
                let dies = base_factors.iter().any(|f| f.vanishes_at_endpoint_of(p));
                if !dies {
                    // surviving endpoint evaluation: keep it visible
                    let mut factors = base_factors.clone();
                    factors.push(Factor::Atom("endpoint"));
                    let mut domains = t.domains.clone();
                    domains.remove(r);
                    outputs.push(Term::new(
                        scale_sign(&t.coeff, s_f),
                        factors,
                        domains,
                    ));
                }
            }
            DomainKind::Config2(i) => {
                let (s, u) = (dom.pts[0], dom.pts[1]);
                // endpoint faces die on the boundary fields; diagonal face:
                if let Some(zh_pos) = t.factors.iter().position(|f| {
                    matches!(f, Factor::Kernel { kind: KernelKind::ZetaHat, pts } if pts.contains(&s) && pts.contains(&u))
                }) {
                    // unit jump across the diagonal of the boundary kernel
                    let mut factors = base_factors.clone();
                    factors.remove(zh_pos);
                    let merged = Pt(t.max_pt() + 1);
                    let mut nt = Term::new(scale_sign(&t.coeff, s_f * SIGN_DIAG), factors, {
                        let mut domains = t.domains.clone();
                        domains[r] = DomainFactor::interval(*i, merged);
                        domains
                    });
                    nt = nt.map_points(&mut |q| if q == s || q == u { merged } else { q });
                    outputs.push(nt);
                } else if let Some((za, zb, w)) = bulk_pair(t, s, u) {
                    // the bulk-integrated propagator pair carries the same
                    // unit jump; the bulk slot is consumed with it
                    let mut factors = base_factors.clone();
                    let (hi, lo) = if za > zb { (za, zb) } else { (zb, za) };
                    factors.remove(hi);
                    factors.remove(lo);
                    let merged = Pt(t.max_pt() + 1);
                    let mut domains = t.domains.clone();
                    domains[r] = DomainFactor::interval(*i, merged);
                    domains.retain(|d| !(matches!(d.kind, DomainKind::Bulk) && d.pts[0] == w));
                    let mut nt = Term::new(scale_sign(&t.coeff, s_f * SIGN_DIAG_BULK), factors, domains);
                    nt = nt.map_points(&mut |q| if q == s || q == u { merged } else { q });
                    outputs.push(nt);
                }
            }
            DomainKind::Bulk => {
                let w = dom.pts[0];
                for xi in &ctx.x_intervals {
                    let mut domains = t.domains.clone();
                    domains[r] = DomainFactor::interval(*xi, w);
                    outputs.push(Term::new(
                        scale_sign(&t.coeff, s_f * SIGN_BULK_FACE),
                        base_factors.clone(),
                        domains,
                    ));
                }
            }
        }
    }

    // Leibniz terms: the differential on every other factor
    for (q, f) in t.factors.iter().enumerate() {
        if q == pos_f {
            continue;
        }
        if f.points().iter().all(|p| p.is_free()) || f.points().is_empty() {
            continue;
        }
        let s_q = prefix_sign(q);
        let lsign = -s_f * s_q;
        match f {
            Factor::Field { kind: FieldKind::E, idx, pt } => {
                let mut factors = t.factors.clone();
                factors[pos_f] = base_factors[pos_f].clone();
                factors[q] = Factor::Field { kind: FieldKind::DE, idx: *idx, pt: *pt };
                outputs.push(Term::new(scale_sign(&t.coeff, lsign), factors, t.domains.clone()));
            }
            Factor::Field { kind: FieldKind::X, idx, pt } => {
                let mut factors = t.factors.clone();
                factors[pos_f] = base_factors[pos_f].clone();
                factors[q] = Factor::Field { kind: FieldKind::DX, idx: *idx, pt: *pt };
                outputs.push(Term::new(scale_sign(&t.coeff, lsign), factors, t.domains.clone()));
            }
            Factor::Kernel { kind: KernelKind::Kappa, pts } => {
                let mut factors = t.factors.clone();
                factors[pos_f] = base_factors[pos_f].clone();
                factors[q] = Factor::Kernel { kind: KernelKind::DKappa, pts: pts.clone() };
                outputs.push(Term::new(scale_sign(&t.coeff, lsign), factors, t.domains.clone()));
            }
            Factor::Kernel { kind: KernelKind::ZetaHat, pts } => {
                let (a, b) = (pts[0], pts[1]);
                match &ctx.zetahat_stokes {
                    ZetaHatStokes::BoundaryPair { x_interval } => {
                        let c = Pt(t.max_pt() + 1);
                        let mut factors = t.factors.clone();
                        factors[pos_f] = base_factors[pos_f].clone();
                        factors.splice(
                            q..=q,
                            [Factor::kernel2(KernelKind::Zeta, c, a), Factor::kernel2(KernelKind::Zeta, c, b)],
                        );
                        let mut domains = t.domains.clone();
                        domains.insert(0, DomainFactor::interval(*x_interval, c));
                        outputs.push(Term::new(
                            scale_sign(&t.coeff, lsign * SIGN_R3_PAIR),
                            factors,
                            domains,
                        ));
                    }
                    ZetaHatStokes::TauSplit => {
                        for (pt, sg) in [(a, SIGN_R3_TAU_FIRST), (b, SIGN_R3_TAU_SECOND)] {
                            let mut factors = t.factors.clone();
                            factors[pos_f] = base_factors[pos_f].clone();
                            factors[q] = Factor::tau(pt);
                            outputs.push(Term::new(scale_sign(&t.coeff, lsign * sg), factors, t.domains.clone()));
                        }
                    }
                }
            }
            // closed kernels and exact one-forms: d zeta = 0, d dkappa = 0,
            // d tau = 0; differentials of fields already carrying one vanish
            _ => {}
        }
    }

    // canonicalize outputs; outputs reproducing the input shape are solved
    // for algebraically, and the termination guard orients mirror pairs
    let my_key = t.key();
    let mut rest: Vec<Term> = Vec::new();
    let mut self_coeff = Scalar::zero();
    for o in outputs {
        if let Some(c) = canonicalize(&o) {
            if c.key() == my_key {
                self_coeff = self_coeff.add(&c.coeff);
                continue;
            }
            let has_d = c.factors.iter().any(
                |f| matches!(f, Factor::Field { kind: FieldKind::DE | FieldKind::DX, .. }),
            );
            if has_d && c.key() > my_key {
                return None; // the mirror term fires instead
            }
            rest.push(c);
        }
    }
    if self_coeff.is_zero() {
        return Some(rest);
    }
    // T = rest + lambda T  =>  (1 - lambda) T = rest
    let lambda = self_coeff.ratio_to(&t.coeff)?;
    let mu = &GaussRat::one() - &lambda;
    if mu.is_zero() {
        return None; // the identity carries no information about T
    }
    let inv = mu.recip();
    Some(
        rest.into_iter()
            .map(|mut o| {
                o.coeff = o.coeff.mul_gauss(&inv);
                o
            })
            .collect(),
    )
}

fn bulk_pair(t: &Term, s: Pt, u: Pt) -> Option<(usize, usize, Pt)> {
    for d in &t.domains {
        if matches!(d.kind, DomainKind::Bulk) {
            let w = d.pts[0];
            let za = t.factors.iter().position(|f| {
                matches!(f, Factor::Kernel { kind: KernelKind::Zeta, pts } if pts[0] == w && pts[1] == s)
            });
            let zb = t.factors.iter().position(|f| {
                matches!(f, Factor::Kernel { kind: KernelKind::Zeta, pts } if pts[0] == w && pts[1] == u)
            });
            if let (Some(za), Some(zb)) = (za, zb) {
                return Some((za, zb, w));
            }
        }
    }
    None
}

fn scale_sign(c: &Scalar, sign: i32) -> Scalar {
    if sign < 0 {
        c.neg()
    } else {
        c.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    fn ctx_l3() -> RewriteCtx {
        RewriteCtx::new(
            ZetaHatStokes::BoundaryPair { x_interval: IntervalId::x(0) },
            vec![IntervalId::x(0)],
        )
    }

    #[test]
    fn single_dfield_term_dies_at_endpoints() {
        // int_Q z_k dE_k: integration by parts leaves only endpoint faces,
        // which vanish with the field.
        let u = Pt(0);
        let t = Term::new(
            Scalar::one(),
            vec![Factor::coord(FieldKind::Z, 1), Factor::field(FieldKind::DE, 1, u)],
            vec![DomainFactor::interval(IntervalId::e(1), u)],
        );
        let (nf, _) = rewrite_normal_form(&GradedExpr::single(t), &ctx_l3()).unwrap();
        assert!(nf.is_zero(), "got {nf}");
    }

    #[test]
    fn free_pair_cancels() {
        // dE zeta X + E zeta dX rewrites to zero: the mirror of one cancels
        // the other, faces and d(zeta) vanish.
        let a = Pt(0);
        let b = Pt(1);
        let doms = vec![
            DomainFactor::interval(IntervalId::e(1), a),
            DomainFactor::interval(IntervalId::x(0), b),
        ];
        let t1 = Term::new(
            Scalar::one(),
            vec![
                Factor::field(FieldKind::DE, 1, a),
                Factor::kernel2(KernelKind::Zeta, b, a),
                Factor::field(FieldKind::X, 1, b),
            ],
            doms.clone(),
        );
        let t2 = Term::new(
            Scalar::one(),
            vec![
                Factor::field(FieldKind::E, 1, a),
                Factor::kernel2(KernelKind::Zeta, b, a),
                Factor::field(FieldKind::DX, 1, b),
            ],
            doms,
        );
        // the relative sign that makes the pair exact is fixed by the
        // Leibniz rule; d(E zeta X) = dE zeta X - E dzeta X + E zeta dX
        let e = GradedExpr::from_terms(vec![t1, t2]);
        let (nf, _) = rewrite_normal_form(&e, &ctx_l3()).unwrap();
        assert!(nf.is_zero(), "got {nf}");
    }

    #[test]
    fn zeta_unit_integral_fires() {
        let a = Pt(0);
        let u = Pt(1);
        let t = Term::new(
            Scalar::one(),
            vec![
                Factor::field(FieldKind::E, 1, a),
                Factor::kernel2(KernelKind::Zeta, u, a),
                Factor::coord(FieldKind::Dx, 1),
            ],
            vec![
                DomainFactor::interval(IntervalId::e(1), a),
                DomainFactor::interval(IntervalId::x(0), u),
            ],
        );
        let (nf, _) = rewrite_normal_form(&GradedExpr::single(t), &ctx_l3()).unwrap();
        assert_eq!(nf.num_terms(), 1);
        let out = &nf.terms()[0];
        assert_eq!(out.factors.len(), 2);
        assert_eq!(out.domains.len(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let u = Pt(0);
        let t = Term::new(
            Scalar::one(),
            vec![Factor::coord(FieldKind::Z, 1), Factor::field(FieldKind::DE, 1, u)],
            vec![DomainFactor::interval(IntervalId::e(1), u)],
        );
        let mut ctx = ctx_l3();
        ctx.budget = 0;
        let r = rewrite_normal_form(&GradedExpr::single(t), &ctx);
        assert!(matches!(r, Err(GradedError::BudgetExceeded(0))));
    }
}
