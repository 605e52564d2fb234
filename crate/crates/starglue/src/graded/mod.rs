//! Koszul-signed symbolic term algebra for boundary fields and kernels.
//!
//! A [`GradedExpr`] is a formal sum of terms; each term is an exact scalar
//! coefficient times an ordered list of field/kernel factors times a list of
//! integration domains binding point labels. Reordering two adjacent odd
//! factors flips the sign; reordering two one-dimensional integration slots
//! likewise. Terms are kept in a canonical form (minimal over all bound-label
//! relabelings, with signs absorbed into the coefficient), so syntactic
//! equality of factor lists is equality of integrands and merging is exact.

pub mod deriv;
pub mod rewrite;
pub mod target_delta;

use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn is_odd(self) -> bool {
        matches!(self, Parity::Odd)
    }
}

/// A point label. Labels bound by a domain are canonicalized per term;
/// labels at or above [`FREE_BASE`] are free (operator insertion points).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Pt(pub u32);

pub const FREE_BASE: u32 = 1 << 20;

impl Pt {
    pub fn free(k: u32) -> Pt {
        Pt(FREE_BASE + k)
    }

    pub fn is_free(self) -> bool {
        self.0 >= FREE_BASE
    }
}

/// Field symbols. `E`/`X` are the boundary fields, `DE`/`DX` their source
/// differentials, `Dx` the background one-form on the moduli of constant
/// maps, `Z`/`ZDag` the residual coordinates, and `VarX`/`VarE` variational
/// one-forms (used by the classical master-equation check).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum FieldKind {
    Z,
    ZDag,
    E,
    X,
    DE,
    DX,
    Dx,
    VarX,
    VarE,
}

impl FieldKind {
    pub fn parity(self) -> Parity {
        match self {
            FieldKind::Z | FieldKind::ZDag | FieldKind::E | FieldKind::DX | FieldKind::Dx | FieldKind::VarX => {
                Parity::Odd
            }
            FieldKind::X | FieldKind::DE | FieldKind::VarE => Parity::Even,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FieldKind::Z => "z",
            FieldKind::ZDag => "zd",
            FieldKind::E => "E",
            FieldKind::X => "X",
            FieldKind::DE => "dE",
            FieldKind::DX => "dX",
            FieldKind::Dx => "dx",
            FieldKind::VarX => "varX",
            FieldKind::VarE => "varE",
        }
    }
}

/// Kernel symbols, treated axiomatically: `Zeta` is the closed propagator
/// one-form, `ZetaHat` the induced boundary kernel (skew, unit jump across
/// the diagonal, vanishing at interval endpoints), `Tau` the one-form from
/// bulk integration, `Kappa` a homotopy zero-form with `DKappa` its
/// differential, and `DeltaPt` the Dirac pairing on an interval.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum KernelKind {
    Zeta,
    ZetaHat,
    Tau,
    Kappa,
    DKappa,
    DeltaPt,
}

impl KernelKind {
    pub fn parity(self) -> Parity {
        match self {
            KernelKind::Zeta | KernelKind::DKappa => Parity::Odd,
            KernelKind::ZetaHat | KernelKind::Tau | KernelKind::Kappa | KernelKind::DeltaPt => Parity::Even,
        }
    }

    fn name(self) -> &'static str {
        match self {
            KernelKind::Zeta => "zeta",
            KernelKind::ZetaHat => "zhat",
            KernelKind::Tau => "tau",
            KernelKind::Kappa => "kappa",
            KernelKind::DKappa => "dkappa",
            KernelKind::DeltaPt => "dpt",
        }
    }

    /// Whether the kernel vanishes when one of its arguments sits at an
    /// interval endpoint.
    pub fn vanishes_at_endpoint(self) -> bool {
        !matches!(self, KernelKind::DeltaPt)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Factor {
    Field { kind: FieldKind, idx: u8, pt: Option<Pt> },
    Kernel { kind: KernelKind, pts: Vec<Pt> },
    /// Opaque named symbol, even parity.
    Atom(&'static str),
}

impl Factor {
    pub fn parity(&self) -> Parity {
        match self {
            Factor::Field { kind, .. } => kind.parity(),
            Factor::Kernel { kind, .. } => kind.parity(),
            Factor::Atom(_) => Parity::Even,
        }
    }

    pub fn field(kind: FieldKind, idx: u8, pt: Pt) -> Factor {
        Factor::Field { kind, idx, pt: Some(pt) }
    }

    pub fn coord(kind: FieldKind, idx: u8) -> Factor {
        Factor::Field { kind, idx, pt: None }
    }

    pub fn kernel2(kind: KernelKind, a: Pt, b: Pt) -> Factor {
        Factor::Kernel { kind, pts: vec![a, b] }
    }

    pub fn tau(p: Pt) -> Factor {
        Factor::Kernel { kind: KernelKind::Tau, pts: vec![p] }
    }

    pub fn points(&self) -> &[Pt] {
        match self {
            Factor::Field { pt: Some(p), .. } => std::slice::from_ref(p),
            Factor::Field { pt: None, .. } => &[],
            Factor::Kernel { pts, .. } => pts,
            Factor::Atom(_) => &[],
        }
    }

    pub fn map_points(&self, f: &mut dyn FnMut(Pt) -> Pt) -> Factor {
        match self {
            Factor::Field { kind, idx, pt } => Factor::Field { kind: *kind, idx: *idx, pt: pt.map(&mut *f) },
            Factor::Kernel { kind, pts } => Factor::Kernel { kind: *kind, pts: pts.iter().map(|p| f(*p)).collect() },
            Factor::Atom(a) => Factor::Atom(a),
        }
    }

    /// Whether the factor vanishes when `p` is evaluated at an interval
    /// endpoint. Boundary fields live in the subcomplex of forms vanishing
    /// at endpoints; propagator-type kernels vanish there too. The field `X`
    /// and global factors survive.
    pub fn vanishes_at_endpoint_of(&self, p: Pt) -> bool {
        match self {
            Factor::Field { kind, pt: Some(q), .. } if *q == p => match kind {
                FieldKind::E | FieldKind::DE => true,
                // a source differential contributes a one-form leg that dies
                // on a zero-dimensional face
                FieldKind::DX => true,
                _ => false,
            },
            Factor::Kernel { kind, pts } if pts.contains(&p) => kind.vanishes_at_endpoint(),
            _ => false,
        }
    }
}

/// Named boundary intervals. `XSide` intervals carry the `X` boundary field,
/// `ESide` intervals carry `E`. The ordering (E-side slots first) fixes the
/// canonical orientation of iterated boundary integrals.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum IntervalClass {
    ESide,
    XSide,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct IntervalId {
    pub class: IntervalClass,
    pub index: u8,
}

impl IntervalId {
    pub fn x(index: u8) -> Self {
        IntervalId { class: IntervalClass::XSide, index }
    }

    pub fn e(index: u8) -> Self {
        IntervalId { class: IntervalClass::ESide, index }
    }
}

impl fmt::Display for IntervalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            IntervalClass::XSide => write!(f, "P{}", self.index),
            IntervalClass::ESide => write!(f, "Q{}", self.index),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DomainKind {
    /// The two-dimensional bulk; binds one point.
    Bulk,
    /// A boundary interval; binds one point.
    Interval(IntervalId),
    /// The ordered configuration space of two points of one interval;
    /// binds two points and owns a diagonal boundary face.
    Config2(IntervalId),
}

impl DomainKind {
    fn rank(&self) -> (u8, Option<IntervalId>) {
        match self {
            DomainKind::Bulk => (0, None),
            DomainKind::Interval(i) => (1, Some(*i)),
            DomainKind::Config2(i) => (2, Some(*i)),
        }
    }

    /// Dimension parity: one-dimensional slots anticommute.
    pub fn is_odd_dim(&self) -> bool {
        matches!(self, DomainKind::Interval(_))
    }

    pub fn arity(&self) -> usize {
        match self {
            DomainKind::Bulk | DomainKind::Interval(_) => 1,
            DomainKind::Config2(_) => 2,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DomainFactor {
    pub kind: DomainKind,
    pub pts: Vec<Pt>,
}

impl DomainFactor {
    pub fn interval(id: IntervalId, p: Pt) -> Self {
        DomainFactor { kind: DomainKind::Interval(id), pts: vec![p] }
    }

    pub fn config2(id: IntervalId, s: Pt, t: Pt) -> Self {
        DomainFactor { kind: DomainKind::Config2(id), pts: vec![s, t] }
    }

    pub fn bulk(p: Pt) -> Self {
        DomainFactor { kind: DomainKind::Bulk, pts: vec![p] }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Term {
    pub coeff: Scalar,
    pub factors: Vec<Factor>,
    pub domains: Vec<DomainFactor>,
}

/// Shape key identifying a term up to its coefficient.
pub type TermKey = (Vec<Factor>, Vec<DomainFactor>);

impl Term {
    pub fn new(coeff: Scalar, factors: Vec<Factor>, domains: Vec<DomainFactor>) -> Self {
        Term { coeff, factors, domains }
    }

    pub fn one() -> Self {
        Term { coeff: Scalar::one(), factors: vec![], domains: vec![] }
    }

    pub fn key(&self) -> TermKey {
        (self.factors.clone(), self.domains.clone())
    }

    pub fn parity(&self) -> Parity {
        let odds = self.factors.iter().filter(|f| f.parity().is_odd()).count();
        if odds % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn bound_pts(&self) -> Vec<Pt> {
        self.domains.iter().flat_map(|d| d.pts.iter().copied()).collect()
    }

    pub fn max_pt(&self) -> u32 {
        self.factors
            .iter()
            .flat_map(|f| f.points().iter())
            .chain(self.domains.iter().flat_map(|d| d.pts.iter()))
            .map(|p| p.0)
            .max()
            .unwrap_or(0)
    }

    /// The domain factor binding `p`, if any.
    pub fn binding_of(&self, p: Pt) -> Option<&DomainFactor> {
        self.domains.iter().find(|d| d.pts.contains(&p))
    }

    pub fn map_points(&self, f: &mut dyn FnMut(Pt) -> Pt) -> Term {
        Term {
            coeff: self.coeff.clone(),
            factors: self.factors.iter().map(|x| x.map_points(f)).collect(),
            domains: self
                .domains
                .iter()
                .map(|d| DomainFactor { kind: d.kind.clone(), pts: d.pts.iter().map(|p| f(*p)).collect() })
                .collect(),
        }
    }
}

/// Insertion-sort the factors, accumulating the Koszul sign. Returns `None`
/// when two equal odd factors collide (the term is zero).
fn koszul_sort(factors: &mut [Factor]) -> Option<i32> {
    let mut sign = 1i32;
    for i in 1..factors.len() {
        let mut j = i;
        while j > 0 && factors[j] < factors[j - 1] {
            if factors[j].parity().is_odd() && factors[j - 1].parity().is_odd() {
                sign = -sign;
            }
            factors.swap(j - 1, j);
            j -= 1;
        }
    }
    for w in factors.windows(2) {
        if w[0] == w[1] && w[0].parity().is_odd() {
            return None;
        }
    }
    Some(sign)
}

/// Kernel-level normalizations applied after relabeling: the boundary kernel
/// is skew under swapping its arguments and vanishes on the diagonal; the
/// Dirac pairing is symmetric.
fn normalize_kernels(factors: &mut [Factor]) -> Option<i32> {
    let mut sign = 1i32;
    for f in factors.iter_mut() {
        if let Factor::Kernel { kind, pts } = f {
            match kind {
                KernelKind::ZetaHat => {
                    if pts[0] == pts[1] {
                        return None;
                    }
                    if pts[0] > pts[1] {
                        pts.swap(0, 1);
                        sign = -sign;
                    }
                }
                KernelKind::DeltaPt => {
                    if pts[0] > pts[1] {
                        pts.swap(0, 1);
                    }
                }
                _ => {}
            }
        }
    }
    Some(sign)
}

/// Stably sort the domain slots, flipping the sign for every transposition
/// of two one-dimensional slots.
fn sort_domains(domains: &mut Vec<DomainFactor>) -> i32 {
    let mut sign = 1i32;
    for i in 1..domains.len() {
        let mut j = i;
        while j > 0 && domains[j].kind.rank() < domains[j - 1].kind.rank() {
            if domains[j].kind.is_odd_dim() && domains[j - 1].kind.is_odd_dim() {
                sign = -sign;
            }
            domains.swap(j - 1, j);
            j -= 1;
        }
    }
    sign
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    permute(&mut idx, 0, &mut out);
    out
}

fn permute(idx: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == idx.len() {
        out.push(idx.clone());
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, out);
        idx.swap(k, i);
    }
}

fn perm_parity(p: &[usize]) -> i32 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1i32;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Canonicalize a term: minimal signed representative over all relabelings
/// of bound points induced by permuting identical domain slots and flipping
/// configuration-space pairs. Returns `None` when the term vanishes.
pub fn canonicalize(term: &Term) -> Option<Term> {
    if term.coeff.is_zero() {
        return None;
    }
    let mut domains = term.domains.clone();
    let base_sign = sort_domains(&mut domains);

    // group identical-kind slots (consecutive after sorting)
    let mut groups: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut i = 0;
    while i < domains.len() {
        let mut j = i + 1;
        while j < domains.len() && domains[j].kind == domains[i].kind {
            j += 1;
        }
        groups.push((i, j - i));
        i = j;
    }

    let group_perms: Vec<Vec<Vec<usize>>> = groups.iter().map(|(_, len)| permutations(*len)).collect();
    let c2_positions: Vec<usize> = domains
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d.kind, DomainKind::Config2(_)))
        .map(|(k, _)| k)
        .collect();

    let mut candidates: BTreeMap<TermKey, i32> = BTreeMap::new();

    let mut perm_choice = vec![0usize; groups.len()];
    loop {
        // arrangement of domain slots for this choice
        let mut arrangement: Vec<usize> = Vec::with_capacity(domains.len());
        let mut arrangement_sign = 1i32;
        for (g, (start, _len)) in groups.iter().enumerate() {
            let perm = &group_perms[g][perm_choice[g]];
            if domains[*start].kind.is_odd_dim() {
                arrangement_sign *= perm_parity(perm);
            }
            for p in perm {
                arrangement.push(start + p);
            }
        }

        for flips in 0..(1usize << c2_positions.len()) {
            let mut sign = base_sign * arrangement_sign;
            // build relabel map
            let mut map: BTreeMap<Pt, Pt> = BTreeMap::new();
            let mut next = 0u32;
            let mut new_domains = Vec::with_capacity(domains.len());
            for (slot, &orig) in arrangement.iter().enumerate() {
                let d = &domains[orig];
                let mut pts = d.pts.clone();
                if let Some(ci) = c2_positions.iter().position(|&c| c == orig) {
                    if flips >> ci & 1 == 1 {
                        pts.swap(0, 1);
                        sign = -sign;
                    }
                }
                let mut new_pts = Vec::with_capacity(pts.len());
                for p in pts {
                    let np = Pt(next);
                    next += 1;
                    map.insert(p, np);
                    new_pts.push(np);
                }
                let _ = slot;
                new_domains.push(DomainFactor { kind: d.kind.clone(), pts: new_pts });
                debug_assert!(next < FREE_BASE);
            }
            let mut factors: Vec<Factor> = term
                .factors
                .iter()
                .map(|f| f.map_points(&mut |p| *map.get(&p).unwrap_or(&p)))
                .collect();
            match normalize_kernels(&mut factors) {
                None => return None,
                Some(s) => sign *= s,
            }
            match koszul_sort(&mut factors) {
                None => return None,
                Some(s) => sign *= s,
            }
            let key = (factors, new_domains.clone());
            match candidates.get(&key) {
                // reachable with both signs means the term is its own
                // negative, hence zero
                Some(s) if *s != sign => return None,
                Some(_) => {}
                None => {
                    candidates.insert(key, sign);
                }
            }
        }

        // advance perm_choice
        let mut g = 0;
        loop {
            if g == groups.len() {
                let (key, sign) = candidates.into_iter().next().expect("at least one candidate");
                let coeff = if sign < 0 { term.coeff.neg() } else { term.coeff.clone() };
                return Some(Term { coeff, factors: key.0, domains: key.1 });
            }
            perm_choice[g] += 1;
            if perm_choice[g] < group_perms[g].len() {
                break;
            }
            perm_choice[g] = 0;
            g += 1;
        }
    }
}

/// A canonical formal sum of graded terms.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct GradedExpr {
    terms: Vec<Term>,
}

impl GradedExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_terms(vec![Term::one()])
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut merged: BTreeMap<TermKey, Scalar> = BTreeMap::new();
        for t in terms {
            if let Some(c) = canonicalize(&t) {
                let e = merged.entry(c.key()).or_insert_with(Scalar::zero);
                *e = e.add(&c.coeff);
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((factors, domains), coeff)| Term { coeff, factors, domains })
            .collect();
        GradedExpr { terms }
    }

    pub fn single(t: Term) -> Self {
        Self::from_terms(vec![t])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn add(&self, other: &GradedExpr) -> GradedExpr {
        let mut all = self.terms.clone();
        all.extend(other.terms.iter().cloned());
        Self::from_terms(all)
    }

    pub fn sub(&self, other: &GradedExpr) -> GradedExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> GradedExpr {
        GradedExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff.neg(), factors: t.factors.clone(), domains: t.domains.clone() })
                .collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> GradedExpr {
        if s.is_zero() {
            return Self::zero();
        }
        GradedExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff.mul(s), factors: t.factors.clone(), domains: t.domains.clone() })
                .collect(),
        }
    }

    /// Every term has even total parity.
    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| !t.parity().is_odd())
    }

    /// Canonical one-line-per-term serialization.
    pub fn serialize_terms(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.to_string()).collect()
    }
}

fn fmt_pt(p: Pt) -> String {
    if p.is_free() {
        format!("u{}", p.0 - FREE_BASE)
    } else {
        format!("p{}", p.0)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Field { kind, idx, pt } => {
                write!(f, "{}_{}", kind.name(), idx)?;
                if let Some(p) = pt {
                    write!(f, "({})", fmt_pt(*p))?;
                }
                Ok(())
            }
            Factor::Kernel { kind, pts } => {
                let pts: Vec<String> = pts.iter().map(|p| fmt_pt(*p)).collect();
                write!(f, "{}({})", kind.name(), pts.join(","))
            }
            Factor::Atom(a) => write!(f, "#{a}"),
        }
    }
}

impl fmt::Display for DomainFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pts: Vec<String> = self.pts.iter().map(|p| fmt_pt(*p)).collect();
        match &self.kind {
            DomainKind::Bulk => write!(f, "M({})", pts.join(",")),
            DomainKind::Interval(i) => write!(f, "I[{}]({})", i, pts.join(",")),
            DomainKind::Config2(i) => write!(f, "C2[{}]({})", i, pts.join(",")),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let factors: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        let domains: Vec<String> = self.domains.iter().map(|x| x.to_string()).collect();
        write!(
            f,
            "{} ; {} ; {}",
            self.coeff,
            if factors.is_empty() { "1".into() } else { factors.join(" ") },
            if domains.is_empty() { "-".into() } else { domains.join(" ") }
        )
    }
}

impl fmt::Display for GradedExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}
