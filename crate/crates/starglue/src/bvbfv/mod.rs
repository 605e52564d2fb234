//! Effective actions, states, and boundary operators for the disk surfaces,
//! plus the operator-application machinery used by the master-equation
//! verifiers.

pub mod flat;
pub mod verify;

use crate::graded::deriv::{
    contract_deltas, coordinate_derivative, field_shift, functional_derivative, graded_mul,
};
use crate::graded::*;
use crate::poly::PoissonTensor;
use crate::scalar::{GaussRat, Scalar};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("unknown or unsupported surface for this operation: {0}")]
    Unsupported(String),
    #[error("field kind absent from surface")]
    FieldAbsent,
}

/// The disk surfaces of the workbench: the three-boundary disk `L3`, the
/// one-boundary disk `L1` in either polarization, and the `n`-interval
/// family `Mn` used by the homotopy check.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SurfaceSpec {
    L3,
    /// `L1` with the state depending on the `E` boundary field.
    L1X,
    /// `L1` in the opposite polarization: the trivial state.
    L1E,
    Mn(usize),
}

impl SurfaceSpec {
    pub fn name(&self) -> String {
        match self {
            SurfaceSpec::L3 => "L3".into(),
            SurfaceSpec::L1X => "L1".into(),
            SurfaceSpec::L1E => "L1-E-polarization".into(),
            SurfaceSpec::Mn(n) => format!("M{n}"),
        }
    }

    pub fn x_interval(&self) -> Option<IntervalId> {
        match self {
            SurfaceSpec::L3 | SurfaceSpec::Mn(_) => Some(IntervalId::x(0)),
            _ => None,
        }
    }

    pub fn e_intervals(&self) -> Vec<IntervalId> {
        match self {
            SurfaceSpec::L3 => vec![IntervalId::e(1), IntervalId::e(2)],
            SurfaceSpec::L1X | SurfaceSpec::L1E => vec![IntervalId::e(1)],
            SurfaceSpec::Mn(n) => (1..=*n as u8).map(IntervalId::e).collect(),
        }
    }

    pub fn rewrite_ctx(&self) -> crate::graded::rewrite::RewriteCtx {
        use crate::graded::rewrite::{RewriteCtx, ZetaHatStokes};
        match self {
            SurfaceSpec::L3 => RewriteCtx::new(
                ZetaHatStokes::BoundaryPair { x_interval: IntervalId::x(0) },
                vec![IntervalId::x(0)],
            ),
            SurfaceSpec::L1X | SurfaceSpec::L1E => RewriteCtx::new(ZetaHatStokes::TauSplit, vec![]),
            SurfaceSpec::Mn(_) => RewriteCtx::new(
                ZetaHatStokes::BoundaryPair { x_interval: IntervalId::x(0) },
                vec![IntervalId::x(0)],
            ),
        }
    }
}

/// An effective action: a list of named generating terms.
#[derive(Clone, Debug)]
pub struct EffectiveAction {
    pub surface: SurfaceSpec,
    pub d: usize,
    pub generators: Vec<(String, GradedExpr)>,
}

impl EffectiveAction {
    pub fn sum(&self) -> GradedExpr {
        let mut acc = GradedExpr::zero();
        for (_, g) in &self.generators {
            acc = acc.add(g);
        }
        acc
    }

    pub fn with_flipped(&self, name: &str) -> Option<EffectiveAction> {
        let mut out = self.clone();
        let mut found = false;
        for (n, g) in out.generators.iter_mut() {
            if n == name {
                *g = g.neg();
                found = true;
            }
        }
        found.then_some(out)
    }
}

/// A boundary state `T * prefactor * exp((i/hbar) S)`.
#[derive(Clone, Debug)]
pub struct State {
    pub normalization: Scalar,
    pub prefactor: GradedExpr,
    pub action: EffectiveAction,
    pub residual_basis: Vec<&'static str>,
}

impl State {
    pub fn new(action: EffectiveAction) -> State {
        let residual_basis = match action.surface {
            // cohomology of the disk relative to nothing / the boundary
            SurfaceSpec::L1X => vec!["1", "mu"],
            _ => vec![],
        };
        State { normalization: Scalar::one(), prefactor: GradedExpr::one(), action, residual_basis }
    }

    pub fn with_prefactor(mut self, p: GradedExpr) -> State {
        self.prefactor = p;
        self
    }
}

#[derive(Clone, Debug)]
pub enum OpAtomKind {
    /// Multiplication by a fixed expression.
    Mult(GradedExpr),
    /// `int dF delta/delta F` over the given intervals.
    FieldShift { from: FieldKind, to: FieldKind, intervals: Vec<IntervalId> },
    /// `alpha^{ij} int delta^2 / delta X_i delta X_j` over one interval.
    SecondX { interval: IntervalId, pairs: Vec<(u8, u8, GaussRat)> },
    /// `int dx^i delta/delta X_i` over one interval.
    DxShift { interval: IntervalId },
    /// `d/dz^i d/dzd_i` for one index; the Laplacian is their all-plus sum.
    ResidualPair { idx: u8 },
}

#[derive(Clone, Debug)]
pub struct OpAtom {
    pub name: String,
    pub weight: Scalar,
    pub kind: OpAtomKind,
}

/// A boundary operator: a formal sum of atoms.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub surface: SurfaceSpec,
    pub atoms: Vec<OpAtom>,
}

impl BoundaryOperator {
    pub fn with_flipped(&self, name: &str) -> Option<BoundaryOperator> {
        let mut out = self.clone();
        let mut found = false;
        for a in out.atoms.iter_mut() {
            if a.name == name {
                a.weight = a.weight.neg();
                found = true;
            }
        }
        found.then_some(out)
    }
}

fn alpha_pairs(alpha: &PoissonTensor) -> Vec<(u8, u8, GaussRat)> {
    alpha
        .nonzero_pairs()
        .into_iter()
        .map(|(i, j, v)| (i as u8, j as u8, GaussRat::from_rational(v)))
        .collect()
}

/// The exact generating terms of the effective action for a surface.
pub fn build_effective_action(
    surface: SurfaceSpec,
    d: usize,
    alpha: &PoissonTensor,
) -> Result<EffectiveAction, SurfaceError> {
    let half = Scalar::from_ratio(1, 2);
    let pairs = alpha_pairs(alpha);
    let mut generators: Vec<(String, GradedExpr)> = Vec::new();

    // quadratic boundary-kernel perturbation over a single two-point domain
    let pert_quadratic = |doms: Vec<DomainFactor>, s: Pt, t: Pt| -> GradedExpr {
        let mut terms = Vec::new();
        for (i, j, v) in &pairs {
            terms.push(Term::new(
                half.mul_gauss(v),
                vec![
                    Factor::field(FieldKind::E, *i, s),
                    Factor::kernel2(KernelKind::ZetaHat, s, t),
                    Factor::field(FieldKind::E, *j, t),
                ],
                doms.clone(),
            ));
        }
        GradedExpr::from_terms(terms)
    };

    match surface {
        SurfaceSpec::L3 | SurfaceSpec::Mn(_) => {
            let p = IntervalId::x(0);
            let qs = surface.e_intervals();
            let bulk_form = matches!(surface, SurfaceSpec::Mn(_));
            for (k, q) in qs.iter().enumerate() {
                // free pairing of the boundary fields through the propagator
                let a = Pt(0);
                let b = Pt(1);
                let mut terms = Vec::new();
                for i in 1..=d as u8 {
                    terms.push(Term::new(
                        Scalar::from_int(-1),
                        vec![
                            Factor::field(FieldKind::E, i, a),
                            Factor::kernel2(KernelKind::Zeta, b, a),
                            Factor::field(FieldKind::X, i, b),
                        ],
                        vec![DomainFactor::interval(*q, a), DomainFactor::interval(p, b)],
                    ));
                }
                generators.push((format!("free-{}", k + 1), GradedExpr::from_terms(terms)));
            }
            // perturbations: same-interval configuration spaces ...
            for (k, q) in qs.iter().enumerate() {
                let s = Pt(0);
                let t = Pt(1);
                let name = format!("pert-{}{}", k + 1, k + 1);
                let expr = if bulk_form {
                    let w = Pt(2);
                    bulk_quadratic(&pairs, &half, w, s, t, vec![
                        DomainFactor::bulk(w),
                        DomainFactor::config2(*q, s, t),
                    ])
                } else {
                    pert_quadratic(vec![DomainFactor::config2(*q, s, t)], s, t)
                };
                generators.push((name, expr));
            }
            // ... and cross-interval products; the two-point configuration
            // space of a disjoint union contains both ordered products, so
            // each unordered pair contributes twice
            for k in 0..qs.len() {
                for l in k + 1..qs.len() {
                    let s = Pt(0);
                    let t = Pt(1);
                    let name = format!("pert-{}{}", k + 1, l + 1);
                    let mut expr = GradedExpr::zero();
                    for (qa, qb) in [(qs[k], qs[l]), (qs[l], qs[k])] {
                        let doms = vec![
                            DomainFactor::interval(qa, s),
                            DomainFactor::interval(qb, t),
                        ];
                        let piece = if bulk_form {
                            let w = Pt(2);
                            let mut doms = doms.clone();
                            doms.insert(0, DomainFactor::bulk(w));
                            bulk_quadratic(&pairs, &half, w, s, t, doms)
                        } else {
                            pert_quadratic(doms, s, t)
                        };
                        expr = expr.add(&piece);
                    }
                    generators.push((name, expr));
                }
            }
        }
        SurfaceSpec::L1X => {
            let q = IntervalId::e(1);
            let s = Pt(0);
            let t = Pt(1);
            generators.push(("pert".into(), pert_quadratic(vec![DomainFactor::config2(q, s, t)], s, t)));
            // residual pairings: z^k int E_k and zd_k dx^k
            let u = Pt(0);
            let mut terms = Vec::new();
            for k in 1..=d as u8 {
                terms.push(Term::new(
                    Scalar::one(),
                    vec![Factor::coord(FieldKind::Z, k), Factor::field(FieldKind::E, k, u)],
                    vec![DomainFactor::interval(q, u)],
                ));
            }
            generators.push(("res-z".into(), GradedExpr::from_terms(terms)));
            let mut terms = Vec::new();
            for k in 1..=d as u8 {
                terms.push(Term::new(
                    Scalar::one(),
                    vec![Factor::coord(FieldKind::ZDag, k), Factor::coord(FieldKind::Dx, k)],
                    vec![],
                ));
            }
            generators.push(("res-zdag".into(), GradedExpr::from_terms(terms)));
            // the one-form vertex from bulk integration against the volume
            // generator
            let mut terms = Vec::new();
            for (k, l, v) in &pairs {
                terms.push(Term::new(
                    Scalar::from_gauss(v.clone()),
                    vec![
                        Factor::coord(FieldKind::ZDag, *k),
                        Factor::field(FieldKind::E, *l, u),
                        Factor::tau(u),
                    ],
                    vec![DomainFactor::interval(q, u)],
                ));
            }
            generators.push(("res-tau".into(), GradedExpr::from_terms(terms)));
        }
        SurfaceSpec::L1E => {
            // no admissible pairings: the trivial state
        }
    }
    Ok(EffectiveAction { surface, d, generators })
}

fn bulk_quadratic(
    pairs: &[(u8, u8, GaussRat)],
    half: &Scalar,
    w: Pt,
    s: Pt,
    t: Pt,
    doms: Vec<DomainFactor>,
) -> GradedExpr {
    let mut terms = Vec::new();
    for (i, j, v) in pairs {
        terms.push(Term::new(
            half.mul_gauss(v),
            vec![
                Factor::kernel2(KernelKind::Zeta, w, s),
                Factor::kernel2(KernelKind::Zeta, w, t),
                Factor::field(FieldKind::E, *i, s),
                Factor::field(FieldKind::E, *j, t),
            ],
            doms.clone(),
        ));
    }
    GradedExpr::from_terms(terms)
}

/// The multiplication atom `sum_i int_Q E_i /\ dx^i`. Its weight is of
/// hbar-degree zero; any hbar-weighting here would leave an uncancelled
/// residual against the Laplacian and derivative chains, which carry
/// `i/hbar` per exponent derivative.
fn edx_atom(qs: &[IntervalId], d: usize) -> GradedExpr {
    let u = Pt(0);
    let mut terms = Vec::new();
    for q in qs {
        for i in 1..=d as u8 {
            terms.push(Term::new(
                Scalar::one(),
                vec![Factor::field(FieldKind::E, i, u), Factor::coord(FieldKind::Dx, i)],
                vec![DomainFactor::interval(*q, u)],
            ));
        }
    }
    GradedExpr::from_terms(terms)
}

fn ee_atom(qs: &[IntervalId], pairs: &[(u8, u8, GaussRat)], half: &Scalar) -> GradedExpr {
    let u = Pt(0);
    let mut terms = Vec::new();
    for q in qs {
        for (i, j, v) in pairs {
            terms.push(Term::new(
                half.mul_gauss(v),
                vec![Factor::field(FieldKind::E, *i, u), Factor::field(FieldKind::E, *j, u)],
                vec![DomainFactor::interval(*q, u)],
            ));
        }
    }
    GradedExpr::from_terms(terms)
}

/// The boundary operator and the residual-field Laplacian for a surface.
pub fn build_boundary_operator(
    surface: SurfaceSpec,
    d: usize,
    alpha: &PoissonTensor,
) -> Result<(BoundaryOperator, BoundaryOperator), SurfaceError> {
    let pairs = alpha_pairs(alpha);
    let half = Scalar::from_ratio(1, 2);
    let mut atoms: Vec<OpAtom> = Vec::new();
    let mut delta_atoms: Vec<OpAtom> = Vec::new();
    match surface {
        SurfaceSpec::L3 | SurfaceSpec::Mn(_) => {
            let p = IntervalId::x(0);
            let qs = surface.e_intervals();
            atoms.push(OpAtom {
                name: "pert-xx".into(),
                weight: Scalar::gauss_hbar(GaussRat::from_ratio(-1, 2), 2), // -hbar^2/2
                kind: OpAtomKind::SecondX { interval: p, pairs: pairs.clone() },
            });
            atoms.push(OpAtom {
                name: "pert-ee".into(),
                weight: Scalar::one(),
                kind: OpAtomKind::Mult(ee_atom(&qs, &pairs, &half)),
            });
            atoms.push(OpAtom {
                name: "free-dX".into(),
                weight: Scalar::i_hbar(),
                kind: OpAtomKind::FieldShift { from: FieldKind::X, to: FieldKind::DX, intervals: vec![p] },
            });
            atoms.push(OpAtom {
                name: "free-dE".into(),
                weight: Scalar::i_hbar(),
                kind: OpAtomKind::FieldShift { from: FieldKind::E, to: FieldKind::DE, intervals: qs.clone() },
            });
            atoms.push(OpAtom {
                name: "free-dx-shift".into(),
                weight: Scalar::i_hbar(),
                kind: OpAtomKind::DxShift { interval: p },
            });
            atoms.push(OpAtom {
                name: "free-edx".into(),
                weight: Scalar::one(),
                kind: OpAtomKind::Mult(edx_atom(&qs, d)),
            });
        }
        SurfaceSpec::L1X => {
            let qs = vec![IntervalId::e(1)];
            atoms.push(OpAtom {
                name: "free-dE".into(),
                weight: Scalar::i_hbar(),
                kind: OpAtomKind::FieldShift { from: FieldKind::E, to: FieldKind::DE, intervals: qs.clone() },
            });
            atoms.push(OpAtom {
                name: "free-edx".into(),
                weight: Scalar::one(),
                kind: OpAtomKind::Mult(edx_atom(&qs, d)),
            });
            atoms.push(OpAtom {
                name: "pert-ee".into(),
                weight: Scalar::one(),
                kind: OpAtomKind::Mult(ee_atom(&qs, &pairs, &half)),
            });
            for i in 1..=d as u8 {
                delta_atoms.push(OpAtom {
                    name: format!("delta-{i}"),
                    weight: Scalar::one(),
                    kind: OpAtomKind::ResidualPair { idx: i },
                });
            }
        }
        SurfaceSpec::L1E => {}
    }
    Ok((
        BoundaryOperator { surface, atoms },
        BoundaryOperator { surface, atoms: delta_atoms },
    ))
}

/// `delta/delta F` chain through `exp((i/hbar) S) * prefactor` at a free
/// point: the chain term from the exponent multiplies the prefactor from the
/// left (the exponent is even, so the derivative passes it without a sign),
/// plus the derivative of the prefactor itself.
fn chain_field(prefactor: &GradedExpr, s: &GradedExpr, kind: FieldKind, idx: u8, at: Pt) -> GradedExpr {
    let own = functional_derivative(prefactor, kind, idx, at);
    let chain = graded_mul(
        &functional_derivative(s, kind, idx, at).scale(&Scalar::i_over_hbar()),
        prefactor,
    );
    contract_deltas(&own.add(&chain))
}

fn chain_coord(prefactor: &GradedExpr, s: &GradedExpr, kind: FieldKind, idx: u8) -> GradedExpr {
    let own = coordinate_derivative(prefactor, kind, idx);
    let chain = graded_mul(
        &coordinate_derivative(s, kind, idx).scale(&Scalar::i_over_hbar()),
        prefactor,
    );
    own.add(&chain)
}

/// Apply a boundary operator to a state, producing the prefactor of the
/// result (the state's exponential is carried along implicitly). Dirac
/// pairings from the functional derivatives are contracted; no other
/// rewriting is performed.
pub fn apply_operator(op: &BoundaryOperator, state: &State) -> GradedExpr {
    apply_atoms(op, &state.action, &state.prefactor)
}

/// The operator applied to the bare exponential (prefactor one): the chains
/// hit only the exponent.
pub fn apply_operator_exponent(op: &BoundaryOperator, action: &EffectiveAction) -> GradedExpr {
    apply_atoms(op, action, &GradedExpr::one())
}

/// The part of the operator application where at least one derivative lands
/// on the prefactor. By construction
/// `apply = apply_to_exponent * prefactor + reduced`,
/// which is the graded product rule for the operator over
/// `exp((i/hbar) S) * prefactor`.
pub fn apply_operator_reduced(
    op: &BoundaryOperator,
    action: &EffectiveAction,
    prefactor: &GradedExpr,
) -> GradedExpr {
    let full = apply_atoms(op, action, prefactor);
    let spectator = graded_mul(&apply_operator_exponent(op, action), prefactor);
    full.sub(&spectator)
}

fn apply_atoms(op: &BoundaryOperator, action: &EffectiveAction, w: &GradedExpr) -> GradedExpr {
    let s = action.sum();
    let mut out = GradedExpr::zero();
    for atom in &op.atoms {
        if atom.weight.is_zero() {
            continue;
        }
        let contribution = match &atom.kind {
            OpAtomKind::Mult(m) => graded_mul(m, w),
            OpAtomKind::FieldShift { from, to, intervals } => {
                let own = field_shift(w, *from, *to, intervals);
                let chain = graded_mul(
                    &field_shift(&s, *from, *to, intervals).scale(&Scalar::i_over_hbar()),
                    w,
                );
                own.add(&chain)
            }
            OpAtomKind::DxShift { interval } => {
                let own = field_shift(w, FieldKind::X, FieldKind::Dx, &[*interval]);
                let chain = graded_mul(
                    &field_shift(&s, FieldKind::X, FieldKind::Dx, &[*interval])
                        .scale(&Scalar::i_over_hbar()),
                    w,
                );
                own.add(&chain)
            }
            OpAtomKind::SecondX { interval, pairs } => {
                let u = Pt::free(9);
                let mut acc = GradedExpr::zero();
                for (i, j, v) in pairs {
                    let inner = chain_field(w, &s, FieldKind::X, *j, u);
                    let outer = chain_field(&inner, &s, FieldKind::X, *i, u);
                    acc = acc.add(&outer.scale(&Scalar::from_gauss(v.clone())));
                }
                bind_free_point(&acc, u, *interval)
            }
            OpAtomKind::ResidualPair { idx } => {
                let inner = chain_coord(w, &s, FieldKind::ZDag, *idx);
                chain_coord(&inner, &s, FieldKind::Z, *idx)
            }
        };
        out = out.add(&contribution.scale(&atom.weight));
    }
    out
}

/// Turn the free operator point into an integration over the interval.
fn bind_free_point(e: &GradedExpr, u: Pt, interval: IntervalId) -> GradedExpr {
    let mut out = Vec::new();
    for t in e.terms() {
        if t.factors.iter().any(|f| f.points().contains(&u)) {
            let mut domains = t.domains.clone();
            domains.push(DomainFactor::interval(interval, u));
            out.push(Term::new(t.coeff.clone(), t.factors.clone(), domains));
        }
        // terms without the insertion point would integrate a constant; the
        // derivative chains never produce them
    }
    GradedExpr::from_terms(out)
}
