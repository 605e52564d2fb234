//! The Moyal star product for constant Poisson tensors, bracket recovery,
//! associativity checking, and the admissible-graph engine.

mod graph;

pub use graph::{
    apply_graph_operator, enumerate_graphs, kontsevich_constant_product, kontsevich_weights,
    AdmissibleGraph, GraphWeight, Ground,
};

use crate::poly::{AlgebraError, Poly, PoissonTensor, VarClass};
use crate::scalar::GaussRat;
use num::{BigRational, One, Zero};
use std::collections::BTreeMap;

fn check_inputs(f: &Poly, g: &Poly, alpha: &PoissonTensor) -> Result<(), AlgebraError> {
    if f.dim() != g.dim() {
        return Err(AlgebraError::DimensionMismatch(f.dim(), g.dim()));
    }
    if f.dim() != alpha.dim() {
        return Err(AlgebraError::DimensionMismatch(f.dim(), alpha.dim()));
    }
    if f.order() != g.order() {
        return Err(AlgebraError::OrderMismatch(f.order(), g.order()));
    }
    Ok(())
}

/// One contraction state: accumulated derivative exponents on the left and
/// right factor, with the product of tensor entries picked up on the way.
type ContractionMap = BTreeMap<(Vec<u16>, Vec<u16>), BigRational>;

fn contraction_step(alpha: &PoissonTensor, prev: &ContractionMap) -> ContractionMap {
    let mut next: ContractionMap = BTreeMap::new();
    let pairs = alpha.nonzero_pairs();
    for ((a, b), c) in prev {
        for (i, j, v) in &pairs {
            let mut key = (a.clone(), b.clone());
            key.0[i - 1] += 1;
            key.1[j - 1] += 1;
            let e = next.entry(key.clone()).or_insert_with(BigRational::zero);
            *e += c * v;
            if e.is_zero() {
                next.remove(&key);
            }
        }
    }
    next
}

/// The Moyal product truncated at hbar-order `n_max`:
/// `sum_n (eps^n / n!) alpha^{i1 j1}..alpha^{in jn} (d_I f)(d_J g)` with
/// `eps = i*hbar/2`, evaluated with exact unrestricted index sums.
pub fn moyal_product(f: &Poly, g: &Poly, alpha: &PoissonTensor, n_max: u32) -> Result<Poly, AlgebraError> {
    check_inputs(f, g, alpha)?;
    let d = f.dim();
    let mut acc = f.mul(g)?;
    let mut contr: ContractionMap = BTreeMap::new();
    contr.insert((vec![0; d], vec![0; d]), BigRational::one());
    let n_cap = n_max.min(f.order()).min(f.total_degree()).min(g.total_degree());
    let mut factorial = BigRational::one();
    for n in 1..=n_cap {
        contr = contraction_step(alpha, &contr);
        if contr.is_empty() {
            break;
        }
        factorial *= BigRational::from_integer(n.into());
        // eps^n / n! = (i/2)^n hbar^n / n!
        let coeff = GaussRat::from_rational(
            BigRational::new(1.into(), 2.into()).pow(n as i32) / &factorial,
        )
        .mul_i_pow(n);
        let mut level = Poly::zero(d, f.order());
        let mut df_cache: BTreeMap<&Vec<u16>, Poly> = BTreeMap::new();
        let mut dg_cache: BTreeMap<&Vec<u16>, Poly> = BTreeMap::new();
        for ((a, b), c) in &contr {
            let df = df_cache
                .entry(a)
                .or_insert_with(|| f.derivative_multi(VarClass::X, a).expect("index in range"));
            if df.is_zero() {
                continue;
            }
            let df = df.clone();
            let dg = dg_cache
                .entry(b)
                .or_insert_with(|| g.derivative_multi(VarClass::X, b).expect("index in range"));
            if dg.is_zero() {
                continue;
            }
            level = level.add(&df.mul(dg)?.mul_gauss(&GaussRat::from_rational(c.clone())))?;
        }
        acc = acc.add(&level.mul_gauss(&coeff).mul_hbar(n as u16))?;
    }
    Ok(acc)
}

/// `(f*g - g*f)/eps` at `eps = 0`: the Poisson bracket recovered from the
/// star commutator. Values are derived from the product, never normalized
/// independently; for the unrestricted-sum convention used here this equals
/// `2 * sum_{i<j} alpha^{ij} (d_i f d_j g - d_j f d_i g)`.
pub fn star_bracket(f: &Poly, g: &Poly, alpha: &PoissonTensor) -> Result<Poly, AlgebraError> {
    check_inputs(f, g, alpha)?;
    let fg = moyal_product(f, g, alpha, 1)?;
    let gf = moyal_product(g, f, alpha, 1)?;
    let comm = fg.sub(&gf)?;
    // keep the hbar^1 coefficient and divide by eps = i*hbar/2
    let lin = comm.hbar_coefficient(1);
    Ok(lin.mul_gauss(&GaussRat::from_int(-2).mul_i_pow(1))) // 1/eps|_{hbar} = 2/i = -2i
}

/// Associativity residual `(f*g)*h - f*(g*h)` truncated at order `n_max`.
/// Must be identically zero.
pub fn check_associativity(
    f: &Poly,
    g: &Poly,
    h: &Poly,
    alpha: &PoissonTensor,
    n_max: u32,
) -> Result<Poly, AlgebraError> {
    let left = moyal_product(&moyal_product(f, g, alpha, n_max)?, h, alpha, n_max)?;
    let right = moyal_product(f, &moyal_product(g, h, alpha, n_max)?, alpha, n_max)?;
    left.sub(&right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::scalar::rat;

    fn std_alpha(d: usize) -> PoissonTensor {
        PoissonTensor::standard(d)
    }

    fn p(s: &str, d: usize, n: u32) -> Poly {
        parse_poly(s, d, n).unwrap()
    }

    #[test]
    fn moyal_first_order() {
        // x1 * x2 -> x1 x2 + eps, frozen from the exponential bidifferential
        // closed form evaluated by hand.
        let r = moyal_product(&p("x1", 2, 2), &p("x2", 2, 2), &std_alpha(2), 2).unwrap();
        assert_eq!(r, p("x1*x2 + (1/2)*i*hbar", 2, 2));
        assert_eq!(r.to_string(), "x1*x2 + (1/2)*i*hbar");
    }

    #[test]
    fn moyal_unit_law() {
        let f = p("x1^2*x2 - 3/2*x2 + 1", 2, 3);
        let one = Poly::one(2, 3);
        assert_eq!(moyal_product(&f, &one, &std_alpha(2), 3).unwrap(), f);
        assert_eq!(moyal_product(&one, &f, &std_alpha(2), 3).unwrap(), f);
    }

    #[test]
    fn moyal_second_order() {
        // f = x1^2, g = x2^2: f*g = x1^2 x2^2 + 4 eps x1 x2 + 2 eps^2
        let r = moyal_product(&p("x1^2", 2, 2), &p("x2^2", 2, 2), &std_alpha(2), 2).unwrap();
        // 4 eps = 2 i hbar, 2 eps^2 = -hbar^2/2
        assert_eq!(r, p("x1^2*x2^2 + 2*i*hbar*x1*x2 - 1/2*hbar^2", 2, 2));
    }

    #[test]
    fn bracket_examples() {
        let a = std_alpha(2);
        // {x1, x2} = alpha^{12} - alpha^{21} = 2
        let b = star_bracket(&p("x1", 2, 2), &p("x2", 2, 2), &a).unwrap();
        assert_eq!(b, p("2", 2, 2));
        // {f, f} = 0
        let f = p("x1^2*x2 + x2", 2, 2);
        assert!(star_bracket(&f, &f, &a).unwrap().is_zero());
        // alpha = 0 -> 0
        let z = PoissonTensor::zero(2);
        assert!(star_bracket(&p("x1", 2, 2), &p("x2", 2, 2), &z).unwrap().is_zero());
    }

    #[test]
    fn associativity_example() {
        let a = std_alpha(2);
        let r = check_associativity(&p("x1", 2, 3), &p("x2", 2, 3), &p("x1*x2", 2, 3), &a, 3).unwrap();
        assert!(r.is_zero(), "residual {r}");
        // alpha = 0 reduces to the ordinary product
        let z = PoissonTensor::zero(2);
        let r = check_associativity(&p("x1+1", 2, 3), &p("x2^2", 2, 3), &p("x1*x2", 2, 3), &z, 3).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn generic_alpha_d3() {
        let a = PoissonTensor::new(
            3,
            vec![
                vec![rat(0, 1), rat(2, 1), rat(3, 1)],
                vec![rat(-2, 1), rat(0, 1), rat(5, 1)],
                vec![rat(-3, 1), rat(-5, 1), rat(0, 1)],
            ],
        )
        .unwrap();
        let f = p("x1*x3^2 + x2", 3, 4);
        let g = p("x2^2 - x1*x2*x3", 3, 4);
        let h = p("x3 + x1^2", 3, 4);
        assert!(check_associativity(&f, &g, &h, &a, 4).unwrap().is_zero());
    }
}
