//! Admissible graphs for constant Poisson tensors and their bidifferential
//! operators.
//!
//! With a constant tensor, derivatives of `alpha` vanish, so every edge of an
//! admissible graph must target one of the two ground vertices. A graph on
//! `n` aerial vertices is therefore an ordered pair of ground targets per
//! vertex, giving `4^n` graphs at order `n`.

use crate::poly::{AlgebraError, Poly, PoissonTensor, VarClass};
use crate::scalar::GaussRat;
use num::{BigRational, One, Zero};
use std::collections::BTreeMap;

/// Ground vertex labels: the left factor (`f`) and the right factor (`g`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Ground {
    F,
    G,
}

/// An admissible graph for a constant tensor: per aerial vertex, the ordered
/// pair of ground targets of its two outgoing edges.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AdmissibleGraph {
    pub targets: Vec<(Ground, Ground)>,
}

impl AdmissibleGraph {
    pub fn order(&self) -> usize {
        self.targets.len()
    }

    /// Number of edges; always `2n`.
    pub fn num_edges(&self) -> usize {
        2 * self.targets.len()
    }
}

/// A graph together with its weight in the star-product expansion.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GraphWeight {
    pub graph: AdmissibleGraph,
    pub weight: BigRational,
}

/// All `4^n` graphs of order `n` in lexicographic order on the target tuples
/// (`F` before `G`).
pub fn enumerate_graphs(n: usize) -> Vec<AdmissibleGraph> {
    let mut out = Vec::with_capacity(1usize << (2 * n));
    let total = 1usize << (2 * n);
    for code in 0..total {
        let mut targets = Vec::with_capacity(n);
        for v in 0..n {
            // two bits per vertex, most significant vertex first
            let shift = 2 * (n - 1 - v);
            let bits = (code >> shift) & 0b11;
            let first = if bits & 0b10 == 0 { Ground::F } else { Ground::G };
            let second = if bits & 0b01 == 0 { Ground::F } else { Ground::G };
            targets.push((first, second));
        }
        out.push(AdmissibleGraph { targets });
    }
    out
}

/// Per-vertex weights `1/2` for an `(F, G)` edge pair and `-1/2` for `(G, F)`,
/// multiplied over vertices. Vertices sending both edges to one ground get
/// weight `1/2` as well; their operator vanishes by antisymmetry regardless.
/// These weights are pinned by order-1 and order-2 agreement with the Moyal
/// closed form and validated at higher orders by the acceptance suite.
pub fn graph_weight(graph: &AdmissibleGraph) -> BigRational {
    let half = BigRational::new(1.into(), 2.into());
    let mut w = BigRational::one();
    for (a, b) in &graph.targets {
        w *= &half;
        if (a, b) == (&Ground::G, &Ground::F) {
            w = -w;
        }
    }
    w
}

/// Weighted graph list at order `n`.
pub fn kontsevich_weights(n: usize) -> Vec<GraphWeight> {
    enumerate_graphs(n)
        .into_iter()
        .map(|graph| {
            let weight = graph_weight(&graph);
            GraphWeight { graph, weight }
        })
        .collect()
}

/// The bidifferential operator `B_{Gamma, alpha}(f, g)`: each aerial vertex
/// contracts `alpha^{ij}` with `d_i` applied to its first edge's target and
/// `d_j` to its second edge's target.
pub fn apply_graph_operator(
    graph: &AdmissibleGraph,
    alpha: &PoissonTensor,
    f: &Poly,
    g: &Poly,
) -> Result<Poly, AlgebraError> {
    if f.dim() != g.dim() {
        return Err(AlgebraError::DimensionMismatch(f.dim(), g.dim()));
    }
    if f.dim() != alpha.dim() {
        return Err(AlgebraError::DimensionMismatch(f.dim(), alpha.dim()));
    }
    if f.order() != g.order() {
        return Err(AlgebraError::OrderMismatch(f.order(), g.order()));
    }
    let d = f.dim();
    // accumulated derivative exponents on (f, g) with tensor coefficients
    let mut state: BTreeMap<(Vec<u16>, Vec<u16>), BigRational> = BTreeMap::new();
    state.insert((vec![0; d], vec![0; d]), BigRational::one());
    let pairs = alpha.nonzero_pairs();
    for (t1, t2) in &graph.targets {
        let mut next: BTreeMap<(Vec<u16>, Vec<u16>), BigRational> = BTreeMap::new();
        for ((a, b), c) in &state {
            for (i, j, v) in &pairs {
                let mut key = (a.clone(), b.clone());
                match t1 {
                    Ground::F => key.0[i - 1] += 1,
                    Ground::G => key.1[i - 1] += 1,
                }
                match t2 {
                    Ground::F => key.0[j - 1] += 1,
                    Ground::G => key.1[j - 1] += 1,
                }
                let e = next.entry(key.clone()).or_insert_with(BigRational::zero);
                *e += c * v;
                if e.is_zero() {
                    next.remove(&key);
                }
            }
        }
        state = next;
        if state.is_empty() {
            break;
        }
    }
    let mut out = Poly::zero(d, f.order());
    for ((a, b), c) in &state {
        let df = f.derivative_multi(VarClass::X, a)?;
        if df.is_zero() {
            continue;
        }
        let dg = g.derivative_multi(VarClass::X, b)?;
        if dg.is_zero() {
            continue;
        }
        out = out.add(&df.mul(&dg)?.mul_gauss(&GaussRat::from_rational(c.clone())))?;
    }
    Ok(out)
}

/// The graph-expansion star product for constant tensors:
/// `sum_n (eps^n / n!) sum_Gamma w(Gamma) B_{Gamma, alpha}(f, g)`.
/// Coincides term by term with the Moyal closed form.
pub fn kontsevich_constant_product(
    f: &Poly,
    g: &Poly,
    alpha: &PoissonTensor,
    n_max: u32,
) -> Result<Poly, AlgebraError> {
    if f.order() != g.order() {
        return Err(AlgebraError::OrderMismatch(f.order(), g.order()));
    }
    let d = f.dim();
    let mut acc = f.mul(g)?;
    let mut factorial = BigRational::one();
    let n_cap = n_max.min(f.order()).min(f.total_degree()).min(g.total_degree());
    for n in 1..=n_cap {
        factorial *= BigRational::from_integer(n.into());
        let mut level = Poly::zero(d, f.order());
        for gw in kontsevich_weights(n as usize) {
            if gw.weight.is_zero() {
                continue;
            }
            let b = apply_graph_operator(&gw.graph, alpha, f, g)?;
            if !b.is_zero() {
                level = level.add(&b.mul_gauss(&GaussRat::from_rational(gw.weight)))?;
            }
        }
        if level.is_zero() {
            continue;
        }
        let coeff = GaussRat::from_rational(
            BigRational::new(1.into(), 2.into()).pow(n as i32) / &factorial,
        )
        .mul_i_pow(n);
        acc = acc.add(&level.mul_gauss(&coeff).mul_hbar(n as u16))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::star::moyal_product;

    fn p(s: &str, d: usize, n: u32) -> Poly {
        parse_poly(s, d, n).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_graphs(0).len(), 1);
        assert_eq!(enumerate_graphs(1).len(), 4);
        assert_eq!(enumerate_graphs(2).len(), 16);
        // deterministic lexicographic order: first graph all-F, last all-G
        let g2 = enumerate_graphs(2);
        assert_eq!(g2[0].targets, vec![(Ground::F, Ground::F); 2]);
        assert_eq!(g2[15].targets, vec![(Ground::G, Ground::G); 2]);
    }

    #[test]
    fn wedge_graph_value() {
        // single wedge (F, G): B(f, g) = sum alpha^{ij} d_i f d_j g
        let alpha = PoissonTensor::standard(2);
        let wedge = AdmissibleGraph { targets: vec![(Ground::F, Ground::G)] };
        let b = apply_graph_operator(&wedge, &alpha, &p("x1", 2, 2), &p("x2", 2, 2)).unwrap();
        assert_eq!(b, p("1", 2, 2));
        // reversed wedge picks up the transposed contraction
        let rev = AdmissibleGraph { targets: vec![(Ground::G, Ground::F)] };
        let b = apply_graph_operator(&rev, &alpha, &p("x1", 2, 2), &p("x2", 2, 2)).unwrap();
        assert_eq!(b, p("-1", 2, 2));
    }

    #[test]
    fn doubled_target_vanishes() {
        let alpha = PoissonTensor::standard(2);
        for targets in [vec![(Ground::F, Ground::F)], vec![(Ground::G, Ground::G)]] {
            let g = AdmissibleGraph { targets };
            let b = apply_graph_operator(&g, &alpha, &p("x1^2*x2", 2, 2), &p("x2^3", 2, 2)).unwrap();
            assert!(b.is_zero(), "antisymmetry must kill doubled ground targets");
        }
    }

    #[test]
    fn empty_graph_is_product() {
        let alpha = PoissonTensor::standard(2);
        let g = AdmissibleGraph { targets: vec![] };
        let f = p("x1+x2", 2, 2);
        let h = p("x1*x2", 2, 2);
        assert_eq!(apply_graph_operator(&g, &alpha, &f, &h).unwrap(), f.mul(&h).unwrap());
    }

    #[test]
    fn matches_moyal_small() {
        let alpha = PoissonTensor::standard(2);
        for (f, g) in [("x1", "x2"), ("x1^2", "x2^2"), ("x1^2*x2", "x1*x2^2")] {
            let f = p(f, 2, 3);
            let g = p(g, 2, 3);
            let a = kontsevich_constant_product(&f, &g, &alpha, 3).unwrap();
            let b = moyal_product(&f, &g, &alpha, 3).unwrap();
            assert_eq!(a, b);
        }
        // alpha = 0 -> plain product
        let z = PoissonTensor::zero(2);
        let f = p("x1^2", 2, 3);
        let g = p("x2", 2, 3);
        assert_eq!(kontsevich_constant_product(&f, &g, &z, 3).unwrap(), f.mul(&g).unwrap());
    }
}
