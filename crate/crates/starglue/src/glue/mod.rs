//! Cap states with observables, Wick-contraction gluing along interfaces,
//! the BV integral over the residual fields, distributional integration over
//! the target, and the end-to-end pipeline that reproduces the Moyal product
//! through gluing.

use crate::graded::target_delta::{integrate_against, DeltaTarget};
use crate::poly::{AlgebraError, Poly, PoissonTensor, VarClass};
use crate::scalar::{GaussRat, Scalar};
use num::BigRational;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GlueError {
    #[error("polarization mismatch: expected opposite interface polarizations")]
    PolarizationMismatch,
    #[error("density is missing the residual exponential factor")]
    MissingResidualExponential,
    #[error("density still depends on residual coordinates")]
    ResidualDependence,
    #[error("density has no target delta factor")]
    NoDeltaFactor,
    #[error("truncation orders differ: {0} vs {1}")]
    OrderMismatch(u32, u32),
    #[error("flatness pre-check failed: the density does not depend on x+z only")]
    FlatnessPreCheck,
    #[error("stage {stage}: {source}")]
    Stage { stage: &'static str, source: Box<GlueError> },
    #[error("algebra: {0}")]
    Algebra(#[from] AlgebraError),
}

fn at_stage<T>(stage: &'static str, r: Result<T, GlueError>) -> Result<T, GlueError> {
    r.map_err(|e| GlueError::Stage { stage, source: Box::new(e) })
}

/// The observable attached to a disk with one free boundary interval.
#[derive(Clone, Debug)]
pub enum CapKind {
    /// A polynomial observable; the state is its Wick series with the
    /// propagator unit integrals already applied.
    F(Poly),
    /// The delta observable at the evaluation point, with prefactor
    /// `(i/hbar)^d` and, for a nonzero tensor, the one-form vertex series.
    Delta,
}

/// A cap state: one disk, one observable, one open interface.
#[derive(Clone, Debug)]
pub struct CapState {
    pub d: usize,
    pub order: u32,
    pub alpha: PoissonTensor,
    pub kind: CapKind,
    /// For `F` caps: the boundary-field legs, one entry per derivative
    /// multi-index `a`: the weight `(-i hbar)^{|a|} / a!` and the derivative
    /// `d^a f`.
    legs: Vec<(Vec<u16>, Scalar, Poly)>,
}

fn multi_factorial(a: &[u16]) -> BigRational {
    let mut f = BigRational::from_integer(1.into());
    for e in a {
        for k in 2..=*e {
            f *= BigRational::from_integer(k.into());
        }
    }
    f
}

fn enumerate_multi_indices(d: usize, max_total: u32) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut stack = vec![(vec![0u16; d], 0usize, 0u32)];
    while let Some((a, from, total)) = stack.pop() {
        out.push(a.clone());
        for i in from..d {
            if total < max_total {
                let mut b = a.clone();
                b[i] += 1;
                stack.push((b, i, total + 1));
            }
        }
    }
    out
}

/// Build a cap state at truncation order `order`.
///
/// For a polynomial observable the Wick series closes after finitely many
/// legs: the leg weight for a multi-index `a` collects the `(-i hbar)^n / n!`
/// of the series with the count of ordered index tuples of type `a`.
pub fn cap_state(kind: CapKind, d: usize, alpha: &PoissonTensor, order: u32) -> Result<CapState, GlueError> {
    let mut legs = Vec::new();
    if let CapKind::F(f) = &kind {
        if f.dim() != d {
            return Err(AlgebraError::DimensionMismatch(f.dim(), d).into());
        }
        if f.order() != order {
            return Err(GlueError::OrderMismatch(f.order(), order));
        }
        if f.contains_class(VarClass::Z) || f.contains_class(VarClass::ZDag) {
            return Err(AlgebraError::NotTargetOnly("residual").into());
        }
        for a in enumerate_multi_indices(d, f.total_degree()) {
            let df = f.derivative_multi(VarClass::X, &a)?;
            if df.is_zero() {
                continue;
            }
            let n: u32 = a.iter().map(|e| *e as u32).sum();
            // (-i hbar)^n / a!
            let w = Scalar::gauss_hbar(
                GaussRat::from_rational(multi_factorial(&a).recip()).mul_i_pow(3 * n),
                n as i32,
            );
            legs.push((a, w, df));
        }
    }
    Ok(CapState { d, order, alpha: alpha.clone(), kind, legs })
}

impl CapState {
    pub fn is_delta(&self) -> bool {
        matches!(self.kind, CapKind::Delta)
    }

    pub fn legs(&self) -> &[(Vec<u16>, Scalar, Poly)] {
        &self.legs
    }
}

/// A glued density: normalization times a sum of `d^J delta * polynomial`
/// terms, with an optional residual exponential factor and the delta
/// argument either shifted (`x + z - xt`) or plain (`x - xt`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluedDensity {
    pub d: usize,
    pub order: u32,
    pub norm: Scalar,
    pub terms: Vec<(DeltaTarget, Poly)>,
    pub has_residual_exp: bool,
    pub arg_shifted: bool,
}

impl GluedDensity {
    fn push(&mut self, dt: DeltaTarget, p: Poly) {
        if p.is_zero() {
            return;
        }
        for (d0, p0) in self.terms.iter_mut() {
            if *d0 == dt {
                *p0 = p0.add(&p).expect("matching dimensions");
                return;
            }
        }
        self.terms.push((dt, p));
    }

    fn prune(&mut self) {
        self.terms.retain(|(_, p)| !p.is_zero());
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
    }
}

/// Wick-contract a delta cap against an observable cap along their open
/// interfaces. The delta cap carries the `E`-data, the observable cap the
/// `X`-data; every observable leg pairs with the residual series of the
/// delta cap (each pairing has unit weight once the propagator unit
/// integrals are absorbed), and for a nonzero tensor each one-form vertex of
/// the delta cap consumes one more leg with weight `eps` per vertex,
/// applying one derivative to the delta.
pub fn glue_pair(delta_cap: &CapState, f_cap: &CapState) -> Result<GluedDensity, GlueError> {
    if !delta_cap.is_delta() || f_cap.is_delta() {
        return Err(GlueError::PolarizationMismatch);
    }
    if delta_cap.order != f_cap.order {
        return Err(GlueError::OrderMismatch(delta_cap.order, f_cap.order));
    }
    let d = delta_cap.d;
    let order = f_cap.order;
    let mut out = GluedDensity {
        d,
        order,
        norm: Scalar::gauss_hbar(GaussRat::i().pow(d as u32), -(d as i32)), // (i/hbar)^d
        terms: Vec::new(),
        has_residual_exp: true,
        arg_shifted: true,
    };
    // Tensor contraction states: one vertex per level binds one observable
    // leg (derivative multi-index I on f) to one delta derivative (J), with
    // the coefficient accumulating prod alpha^{i_k j_k} / l!.
    let f = match &f_cap.kind {
        CapKind::F(f) => f,
        CapKind::Delta => unreachable!(),
    };
    let pairs = delta_cap.alpha.nonzero_pairs();
    let l_cap = order.min(f.total_degree());
    let mut level: BTreeMap<(Vec<u16>, Vec<u16>), GaussRat> = BTreeMap::new();
    level.insert((vec![0u16; d], vec![0u16; d]), GaussRat::one());
    for l in 0..=l_cap {
        for ((extra, dts), c) in &level {
            let df = f.derivative_multi(VarClass::X, extra)?;
            if df.is_zero() {
                continue;
            }
            // eps^l * contraction coefficient, observable legs resummed to
            // the shifted Taylor form
            let eps_l = Scalar::gauss_hbar(
                GaussRat::from_rational(BigRational::new(1.into(), 2u64.pow(l).into())).mul_i_pow(l),
                l as i32,
            );
            let poly = mul_poly_scalar(&df.taylor_shift()?, &eps_l.mul_gauss(c), order)?;
            out.push(DeltaTarget { derivs: dts.clone() }, poly);
        }
        if l == l_cap {
            break;
        }
        let mut next: BTreeMap<(Vec<u16>, Vec<u16>), GaussRat> = BTreeMap::new();
        let step = BigRational::from_integer((l + 1).into());
        for ((extra, dts), c) in &level {
            for (i, j, v) in &pairs {
                let mut key = (extra.clone(), dts.clone());
                key.0[i - 1] += 1;
                key.1[j - 1] += 1;
                let e = next.entry(key.clone()).or_insert_with(GaussRat::zero);
                *e = &*e + &c.mul_rat(&(v / &step));
                if e.is_zero() {
                    next.remove(&key);
                }
            }
        }
        level = next;
        if level.is_empty() {
            break;
        }
    }
    out.prune();
    Ok(out)
}

fn mul_poly_scalar(p: &Poly, s: &Scalar, order: u32) -> Result<Poly, GlueError> {
    let mut acc = Poly::zero(p.dim(), order);
    for (k, g) in s.iter() {
        if *k < 0 {
            return Err(GlueError::FlatnessPreCheck);
        }
        acc = acc.add(&p.mul_gauss(g).mul_hbar(*k as u16))?;
    }
    Ok(acc)
}

/// The state on the glued three-boundary disk with two observable caps
/// attached: a triple sum over the two families of boundary-field legs and
/// the cross contractions through the pairing kernels. Same-side double
/// contractions vanish by antisymmetry and are checked explicitly.
#[derive(Clone, Debug)]
pub struct TopCap {
    pub d: usize,
    pub order: u32,
    pub alpha: PoissonTensor,
    /// Entries `(a_f, a_g, weight, poly)`: leg multi-indices on each family,
    /// the `(-i hbar)` leg weights with the cross-contraction factor, and
    /// the contracted derivative product.
    pub terms: Vec<(Vec<u16>, Vec<u16>, Scalar, Poly)>,
}

/// The same-side double contraction `alpha^{ij} d_i d_j h`; identically zero
/// by antisymmetry. Exposed so the vanishing is checkable by enumeration.
pub fn same_side_contraction(alpha: &PoissonTensor, h: &Poly) -> Result<Poly, GlueError> {
    let mut acc = Poly::zero(h.dim(), h.order());
    for (i, j, v) in alpha.nonzero_pairs() {
        let dd = h.partial_derivative(i)?.partial_derivative(j)?;
        acc = acc.add(&dd.mul_gauss(&GaussRat::from_rational(v)))?;
    }
    Ok(acc)
}

/// Glue two observable caps onto the two `E`-intervals of the three-boundary
/// disk. The result is a cap on the remaining `X`-interval whose terms carry
/// the open boundary legs of both observables and the cross contractions
/// with weight `eps` per vertex.
pub fn glue_triple_l3(
    cap_f: &CapState,
    cap_g: &CapState,
    l3: &crate::bvbfv::State,
    n_max: u32,
) -> Result<TopCap, GlueError> {
    if cap_f.is_delta() || cap_g.is_delta() {
        return Err(GlueError::PolarizationMismatch);
    }
    if !matches!(l3.action.surface, crate::bvbfv::SurfaceSpec::L3) {
        return Err(GlueError::PolarizationMismatch);
    }
    if cap_f.order != cap_g.order || cap_f.order != n_max {
        return Err(GlueError::OrderMismatch(cap_f.order, n_max));
    }
    let d = cap_f.d;
    let (f, g) = match (&cap_f.kind, &cap_g.kind) {
        (CapKind::F(f), CapKind::F(g)) => (f, g),
        _ => unreachable!(),
    };
    let alpha = &cap_f.alpha;
    let pairs = alpha.nonzero_pairs();
    // cross contraction states: (derivatives on f, derivatives on g) with
    // the coefficient prod alpha / l!, weighted eps^l
    let l_cap = n_max.min(f.total_degree()).min(g.total_degree());
    let mut level: BTreeMap<(Vec<u16>, Vec<u16>), GaussRat> = BTreeMap::new();
    level.insert((vec![0u16; d], vec![0u16; d]), GaussRat::one());
    let mut terms = Vec::new();
    for l in 0..=l_cap {
        let eps_l = Scalar::gauss_hbar(
            GaussRat::from_rational(BigRational::new(1.into(), 2u64.pow(l).into())).mul_i_pow(l),
            l as i32,
        );
        for ((cf, cg), c) in &level {
            let df_base = f.derivative_multi(VarClass::X, cf)?;
            let dg_base = g.derivative_multi(VarClass::X, cg)?;
            if df_base.is_zero() || dg_base.is_zero() {
                continue;
            }
            // open legs on each side
            for af in enumerate_multi_indices(d, df_base.total_degree()) {
                let dff = df_base.derivative_multi(VarClass::X, &af)?;
                if dff.is_zero() {
                    continue;
                }
                for ag in enumerate_multi_indices(d, dg_base.total_degree()) {
                    let dgg = dg_base.derivative_multi(VarClass::X, &ag)?;
                    if dgg.is_zero() {
                        continue;
                    }
                    let nf: u32 = af.iter().map(|e| *e as u32).sum();
                    let ng: u32 = ag.iter().map(|e| *e as u32).sum();
                    // (-i hbar)^{nf+ng} / (af! ag!)
                    let legs_w = Scalar::gauss_hbar(
                        GaussRat::from_rational(
                            (multi_factorial(&af) * multi_factorial(&ag)).recip(),
                        )
                        .mul_i_pow(3 * (nf + ng)),
                        (nf + ng) as i32,
                    );
                    let w = legs_w.mul(&eps_l).mul_gauss(c);
                    terms.push((af.clone(), ag.clone(), w, dff.mul(&dgg)?));
                }
            }
        }
        if l == l_cap {
            break;
        }
        let mut next: BTreeMap<(Vec<u16>, Vec<u16>), GaussRat> = BTreeMap::new();
        let step = BigRational::from_integer((l + 1).into());
        for ((cf, cg), c) in &level {
            for (i, j, v) in &pairs {
                let mut key = (cf.clone(), cg.clone());
                key.0[i - 1] += 1;
                key.1[j - 1] += 1;
                let e = next.entry(key.clone()).or_insert_with(GaussRat::zero);
                *e = &*e + &c.mul_rat(&(v / &step));
                if e.is_zero() {
                    next.remove(&key);
                }
            }
        }
        level = next;
        if level.is_empty() {
            break;
        }
    }
    Ok(TopCap { d, order: n_max, alpha: alpha.clone(), terms })
}

impl TopCap {
    /// The observable this cap represents: the zero-leg terms carry the
    /// cross-contracted product of the two observables; every other term is
    /// a derivative of these, weighted so that resumming the open legs
    /// against a residual series reproduces the shifted composite exactly.
    pub fn compose_observable(&self) -> Result<Poly, GlueError> {
        let mut acc = Poly::zero(self.d, self.order);
        for (af, ag, w, p) in &self.terms {
            if af.iter().all(|e| *e == 0) && ag.iter().all(|e| *e == 0) {
                acc = acc.add(&mul_poly_scalar(p, w, self.order)?)?;
            }
        }
        Ok(acc)
    }

    /// View the composite as an observable cap, for gluing against the
    /// delta cap.
    pub fn to_cap(&self) -> Result<CapState, GlueError> {
        cap_state(CapKind::F(self.compose_observable()?), self.d, &self.alpha, self.order)
    }
}

/// Restrict to the Lagrangian `z = 0` and integrate out the residual
/// exponential: `int exp((i/hbar) zd . dx) d^d zd = (hbar/i)^d d^d x`.
/// Runs the flatness pre-check first: the density must depend on the
/// coordinates only through `x + z`.
pub fn bv_integrate_z(gd: &GluedDensity) -> Result<GluedDensity, GlueError> {
    if !gd.has_residual_exp {
        return Err(GlueError::MissingResidualExponential);
    }
    check_density_flatness(gd)?;
    let mut out = GluedDensity {
        d: gd.d,
        order: gd.order,
        norm: gd.norm.mul(&Scalar::gauss_hbar(GaussRat::i().mul_i_pow(2).pow(gd.d as u32), gd.d as i32)),
        terms: Vec::new(),
        has_residual_exp: false,
        arg_shifted: false,
    };
    for (dt, p) in &gd.terms {
        if p.contains_class(VarClass::ZDag) {
            return Err(GlueError::ResidualDependence);
        }
        out.push(dt.clone(), p.set_class_zero(VarClass::Z));
    }
    out.prune();
    Ok(out)
}

/// The master-equation pre-check on a glued density: the residual Laplacian
/// equals `i/hbar` times the background differential, i.e. every term
/// depends on the coordinates only through the shifted combination. Checked
/// exactly: `d/dz_k - d/dx_k` annihilates each polynomial (the delta factor
/// carries the shifted argument and drops out of the difference).
pub fn check_density_flatness(gd: &GluedDensity) -> Result<(), GlueError> {
    for (_, p) in &gd.terms {
        for k in 1..=gd.d {
            let diff = p.derivative(VarClass::Z, k)?.sub(&p.partial_derivative(k)?)?;
            if !diff.is_zero() {
                return Err(GlueError::FlatnessPreCheck);
            }
        }
    }
    Ok(())
}

/// Integrate the top density over the target: delta calculus evaluates each
/// term at the evaluation point, with tensor-contracted symmetric-derivative
/// terms vanishing by antisymmetry.
pub fn integrate_target(gd: &GluedDensity) -> Result<Poly, GlueError> {
    if gd.has_residual_exp || gd.arg_shifted {
        return Err(GlueError::ResidualDependence);
    }
    if gd.terms.is_empty() {
        return Ok(Poly::zero(gd.d, gd.order));
    }
    let mut acc = Poly::zero(gd.d, gd.order);
    for (dt, p) in &gd.terms {
        if p.contains_class(VarClass::Z) || p.contains_class(VarClass::ZDag) {
            return Err(GlueError::ResidualDependence);
        }
        acc = acc.add(&integrate_against(p, dt)?)?;
    }
    mul_poly_scalar(&acc, &gd.norm, gd.order)
}

/// The full pipeline: cap the two observables, glue them onto the
/// three-boundary disk, cap with the delta state, integrate the residual
/// fields over the Lagrangian, and integrate over the target. The result is
/// the star product of the observables evaluated at the point coordinates.
pub fn moyal_via_gluing(
    f: &Poly,
    g: &Poly,
    point: Option<&[BigRational]>,
    alpha: &PoissonTensor,
    n_max: u32,
) -> Result<Poly, GlueError> {
    let d = alpha.dim();
    let cap_f = at_stage("cap-f", cap_state(CapKind::F(f.clone()), d, alpha, n_max))?;
    let cap_g = at_stage("cap-g", cap_state(CapKind::F(g.clone()), d, alpha, n_max))?;
    let l3_action = crate::bvbfv::build_effective_action(crate::bvbfv::SurfaceSpec::L3, d, alpha)
        .expect("three-boundary disk");
    let l3 = crate::bvbfv::State::new(l3_action);
    let top = at_stage("glue-triple", glue_triple_l3(&cap_f, &cap_g, &l3, n_max))?;
    let delta = at_stage("cap-delta", cap_state(CapKind::Delta, d, alpha, n_max))?;
    let glued = at_stage("glue-delta", glue_pair(&delta, &top.to_cap()?))?;
    let density = at_stage("bv-integral", bv_integrate_z(&glued))?;
    let value = at_stage("target-integral", integrate_target(&density))?;
    match point {
        Some(pt) => Ok(value.substitute_class(VarClass::Xt, pt).map_err(GlueError::from)?),
        None => Ok(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::scalar::rat;
    use crate::star::moyal_product;

    fn p(s: &str, d: usize, n: u32) -> Poly {
        parse_poly(s, d, n).unwrap()
    }

    #[test]
    fn observable_cap_legs_truncate() {
        // f = x1: one constant leg and one first-derivative leg
        let alpha = PoissonTensor::standard(2);
        let cap = cap_state(CapKind::F(p("x1", 2, 2)), 2, &alpha, 2).unwrap();
        assert_eq!(cap.legs().len(), 2);
        // the derivative leg carries weight (-i hbar) and value 1
        let (a, w, df) = &cap.legs()[1];
        assert_eq!(a, &vec![1, 0]);
        assert_eq!(w, &Scalar::gauss_hbar(GaussRat::i().mul_i_pow(2), 1));
        assert_eq!(df, &p("1", 2, 2));
        // f = 1: the constant cap
        let cap = cap_state(CapKind::F(p("1", 2, 2)), 2, &alpha, 2).unwrap();
        assert_eq!(cap.legs().len(), 1);
    }

    #[test]
    fn delta_f_glue_closed_form_alpha_zero() {
        // glue(delta-cap, f-cap) at alpha = 0 is the shifted observable times
        // the shifted delta
        let alpha = PoissonTensor::zero(2);
        let f = p("x1^2*x2 - 3", 2, 3);
        let delta = cap_state(CapKind::Delta, 2, &alpha, 3).unwrap();
        let fcap = cap_state(CapKind::F(f.clone()), 2, &alpha, 3).unwrap();
        let glued = glue_pair(&delta, &fcap).unwrap();
        assert!(glued.has_residual_exp && glued.arg_shifted);
        assert_eq!(glued.terms.len(), 1);
        let (dt, poly) = &glued.terms[0];
        assert_eq!(dt.order(), 0);
        assert_eq!(poly, &f.taylor_shift().unwrap());
        // f = 1 leaves the delta cap untouched
        let one = cap_state(CapKind::F(p("1", 2, 3)), 2, &alpha, 3).unwrap();
        let glued = glue_pair(&delta, &one).unwrap();
        assert_eq!(glued.terms.len(), 1);
        assert_eq!(glued.terms[0].1, p("1", 2, 3));
    }

    #[test]
    fn delta_f_glue_first_order_matches_star_with_delta() {
        // at order one the prefactor is the Taylor form of the observable
        // star-multiplied against the delta: the derivative term is
        // eps alpha^{ij} d_i f (x+z) d_j delta
        let alpha = PoissonTensor::standard(2);
        let f = p("x1*x2", 2, 1);
        let delta = cap_state(CapKind::Delta, 2, &alpha, 1).unwrap();
        let fcap = cap_state(CapKind::F(f.clone()), 2, &alpha, 1).unwrap();
        let glued = glue_pair(&delta, &fcap).unwrap();
        // terms: plain delta with f(x+z); d_2 delta with eps*d_1 f; d_1 delta with -eps*d_2 f
        assert_eq!(glued.terms.len(), 3);
        for (dt, poly) in &glued.terms {
            match dt.derivs.as_slice() {
                [0, 0] => assert_eq!(poly, &f.taylor_shift().unwrap()),
                [0, 1] => {
                    let expect = mul_poly_scalar(
                        &f.partial_derivative(1).unwrap().taylor_shift().unwrap(),
                        &Scalar::epsilon(),
                        1,
                    )
                    .unwrap();
                    assert_eq!(poly, &expect);
                }
                [1, 0] => {
                    let expect = mul_poly_scalar(
                        &f.partial_derivative(2).unwrap().taylor_shift().unwrap(),
                        &Scalar::epsilon().neg(),
                        1,
                    )
                    .unwrap();
                    assert_eq!(poly, &expect);
                }
                other => panic!("unexpected delta index {other:?}"),
            }
        }
    }

    #[test]
    fn polarization_mismatch_is_an_error() {
        let alpha = PoissonTensor::standard(2);
        let f = cap_state(CapKind::F(p("x1", 2, 2)), 2, &alpha, 2).unwrap();
        let g = cap_state(CapKind::F(p("x2", 2, 2)), 2, &alpha, 2).unwrap();
        assert!(matches!(glue_pair(&f, &g), Err(GlueError::PolarizationMismatch)));
    }

    #[test]
    fn cap_identity_returns_the_function() {
        // delta-cap against f-cap, BV integral, target integral: exactly
        // f at the evaluation point, for zero and nonzero tensors
        let f = p("x1^3*x2 - 1/2*x1*x2^2 + 2", 2, 3);
        for alpha in [PoissonTensor::zero(2), PoissonTensor::standard(2)] {
            let delta = cap_state(CapKind::Delta, 2, &alpha, 3).unwrap();
            let fcap = cap_state(CapKind::F(f.clone()), 2, &alpha, 3).unwrap();
            let glued = glue_pair(&delta, &fcap).unwrap();
            let density = bv_integrate_z(&glued).unwrap();
            let value = integrate_target(&density).unwrap();
            assert_eq!(value, f.eval_at_point_coords(), "alpha zero: {}", alpha.is_zero());
        }
    }

    #[test]
    fn bv_integral_requires_exponential_and_flatness() {
        let alpha = PoissonTensor::zero(2);
        let f = p("x1", 2, 2);
        let delta = cap_state(CapKind::Delta, 2, &alpha, 2).unwrap();
        let fcap = cap_state(CapKind::F(f), 2, &alpha, 2).unwrap();
        let mut glued = glue_pair(&delta, &fcap).unwrap();
        let density = bv_integrate_z(&glued).unwrap();
        assert!(matches!(bv_integrate_z(&density), Err(GlueError::MissingResidualExponential)));
        // injecting a non-shifted polynomial trips the pre-check
        glued.terms[0].1 = p("x1", 2, 2);
        assert!(matches!(bv_integrate_z(&glued), Err(GlueError::FlatnessPreCheck)));
    }

    #[test]
    fn top_cap_matches_composite_observable_legs() {
        // grouping the two leg families by their sum reproduces the
        // observable cap of the composite
        let alpha = PoissonTensor::standard(2);
        let f = p("x1^2", 2, 2);
        let g = p("x2^2", 2, 2);
        let cf = cap_state(CapKind::F(f), 2, &alpha, 2).unwrap();
        let cg = cap_state(CapKind::F(g), 2, &alpha, 2).unwrap();
        let l3 = crate::bvbfv::State::new(
            crate::bvbfv::build_effective_action(crate::bvbfv::SurfaceSpec::L3, 2, &alpha).unwrap(),
        );
        let top = glue_triple_l3(&cf, &cg, &l3, 2).unwrap();
        let composite_cap = top.to_cap().unwrap();
        // sum the top-cap terms with legs a_f + a_g = a and compare with the
        // composite cap's leg for a
        for (a, w, da) in composite_cap.legs() {
            let mut acc = Poly::zero(2, 2);
            for (af, ag, tw, tp) in &top.terms {
                let sum: Vec<u16> = af.iter().zip(ag).map(|(x, y)| x + y).collect();
                if &sum == a {
                    acc = acc.add(&mul_poly_scalar(tp, tw, 2).unwrap()).unwrap();
                }
            }
            let expect = mul_poly_scalar(da, w, 2).unwrap();
            assert_eq!(acc, expect, "leg {a:?} mismatch");
        }
    }

    #[test]
    fn same_side_contractions_vanish() {
        let alpha = PoissonTensor::standard(3);
        for h in ["x1^2*x2*x3", "x1*x2*x3 - x2^4", "x3^3 + x1*x2"] {
            let h = p(h, 3, 3);
            assert!(same_side_contraction(&alpha, &h).unwrap().is_zero());
            // iterated contractions at orders <= 3 vanish as well
            let twice = same_side_contraction(&alpha, &h).unwrap();
            assert!(same_side_contraction(&alpha, &twice).unwrap().is_zero());
        }
    }

    #[test]
    fn pipeline_examples() {
        let alpha = PoissonTensor::standard(2);
        // f = x1, g = x2 at the origin: x1 x2 + eps evaluated at 0 is eps
        let origin = vec![rat(0, 1), rat(0, 1)];
        let r = moyal_via_gluing(&p("x1", 2, 2), &p("x2", 2, 2), Some(&origin), &alpha, 2).unwrap();
        assert_eq!(r, p("(1/2)*i*hbar", 2, 2));
        // alpha = 0: the pointwise product at the point
        let z = PoissonTensor::zero(2);
        let r = moyal_via_gluing(&p("x1+1", 2, 2), &p("x2^2", 2, 2), None, &z, 2).unwrap();
        assert_eq!(r, p("xt1*xt2^2 + xt2^2", 2, 2));
        // order-2 example: f = x1^2, g = x2^2 at the origin leaves 2 eps^2
        let r = moyal_via_gluing(&p("x1^2", 2, 2), &p("x2^2", 2, 2), Some(&origin), &alpha, 2).unwrap();
        assert_eq!(r, p("-1/2*hbar^2", 2, 2));
    }

    #[test]
    fn pipeline_matches_closed_form() {
        let alpha = PoissonTensor::standard(2);
        for (fs, gs) in [("x1^2*x2", "x1*x2"), ("x1^2 - x2", "x2^2 + x1")] {
            let f = p(fs, 2, 3);
            let g = p(gs, 2, 3);
            let via_glue = moyal_via_gluing(&f, &g, None, &alpha, 3).unwrap();
            let closed = moyal_product(&f, &g, &alpha, 3).unwrap().eval_at_point_coords();
            assert_eq!(via_glue, closed, "pipeline vs closed form for {fs} * {gs}");
        }
    }
}
