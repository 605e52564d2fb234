//! The acceptance gate: one test per criterion, each printing a pass line.
//! Everything is exact rational arithmetic, so every comparison is equality.

use num::BigRational;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use starglue::bvbfv::verify::{
    mdqme_mutation_battery, verify_homotopy, verify_mdcme, verify_mdqme, HomotopyOptions,
    MdcmeOptions, VerifyOptions,
};
use starglue::bvbfv::verify::mdqme_setup;
use starglue::bvbfv::{
    apply_operator_exponent, build_boundary_operator, build_effective_action, flat, SurfaceSpec,
};
use starglue::glue::{
    bv_integrate_z, cap_state, glue_pair, integrate_target, moyal_via_gluing, same_side_contraction,
    CapKind,
};
use starglue::graded::rewrite::rewrite_normal_form;
use starglue::graded::GradedExpr;
use starglue::poly::{Poly, PoissonTensor, VarClass};
use starglue::sample::{rand_alpha, rand_point, rand_poly, rng_from_seed};
use starglue::scalar::GaussRat;
use starglue::star::{check_associativity, kontsevich_constant_product, moyal_product, star_bracket};

/// Independent oracle for the star product: the exponential bidifferential
/// closed form, evaluated by brute force in doubled variables. `f` and `g`
/// are embedded in `2d` coordinates, the operator
/// `sum alpha^{ij} d_{x_i} d_{y_j}` is applied repeatedly, and the diagonal
/// `y = x` is taken at the end. Shares nothing with the implementation but
/// polynomial arithmetic.
fn moyal_oracle(f: &Poly, g: &Poly, alpha: &PoissonTensor, n_max: u32) -> Poly {
    let d = f.dim();
    let order = f.order();
    let embed = |p: &Poly, offset: usize| -> Poly {
        let mut acc = Poly::zero(2 * d, order);
        for (m, c) in p.iter() {
            let mut t = Poly::constant(2 * d, order, c.clone());
            for i in 1..=d {
                for _ in 0..m.exp(d, VarClass::X, i) {
                    t = t.mul(&Poly::var(2 * d, order, VarClass::X, offset + i).unwrap()).unwrap();
                }
            }
            acc = acc.add(&t.mul_hbar(m.hbar)).unwrap();
        }
        acc
    };
    let restrict = |p: &Poly| -> Poly {
        let mut acc = Poly::zero(d, order);
        for (m, c) in p.iter() {
            let mut t = Poly::constant(d, order, c.clone());
            for i in 1..=d {
                let e = m.exp(2 * d, VarClass::X, i) + m.exp(2 * d, VarClass::X, d + i);
                for _ in 0..e {
                    t = t.mul(&Poly::var(d, order, VarClass::X, i).unwrap()).unwrap();
                }
            }
            acc = acc.add(&t.mul_hbar(m.hbar)).unwrap();
        }
        acc
    };
    let mut big = embed(f, 0).mul(&embed(g, d)).unwrap();
    let mut acc = big.clone();
    let mut factorial = BigRational::from_integer(1.into());
    for n in 1..=n_max {
        // apply D once
        let mut next = Poly::zero(2 * d, order);
        for (i, j, v) in alpha.nonzero_pairs() {
            let dd = big.partial_derivative(i).unwrap().partial_derivative(d + j).unwrap();
            next = next.add(&dd.mul_gauss(&GaussRat::from_rational(v))).unwrap();
        }
        big = next;
        if big.is_zero() {
            break;
        }
        factorial *= BigRational::from_integer(n.into());
        let coeff = GaussRat::from_rational(
            BigRational::new(1.into(), 2u64.pow(n).into()) / &factorial,
        )
        .mul_i_pow(n);
        acc = acc.add(&big.mul_gauss(&coeff).mul_hbar(n as u16)).unwrap();
    }
    restrict(&acc)
}

/// Bracket oracle by direct differentiation:
/// `2 sum_{i<j} alpha^{ij} (d_i f d_j g - d_j f d_i g)`.
fn bracket_oracle(f: &Poly, g: &Poly, alpha: &PoissonTensor) -> Poly {
    let mut acc = Poly::zero(f.dim(), f.order());
    for i in 1..=f.dim() {
        for j in i + 1..=f.dim() {
            let v = alpha.get(i, j);
            if v == &BigRational::from_integer(0.into()) {
                continue;
            }
            let term = f
                .partial_derivative(i)
                .unwrap()
                .mul(&g.partial_derivative(j).unwrap())
                .unwrap()
                .sub(&f.partial_derivative(j).unwrap().mul(&g.partial_derivative(i).unwrap()).unwrap())
                .unwrap();
            acc = acc.add(&term.mul_gauss(&GaussRat::from_rational(v * BigRational::from_integer(2.into())))).unwrap();
        }
    }
    acc
}

fn random_case(rng: &mut ChaCha8Rng, max_d: usize, max_deg: u32, max_order: u32) -> (usize, u32, PoissonTensor, Poly, Poly) {
    use rand::Rng;
    let d = rng.gen_range(1..=max_d);
    let order = rng.gen_range(0..=max_order);
    let deg = rng.gen_range(0..=max_deg);
    let alpha = rand_alpha(rng, d);
    let f = rand_poly(rng, d, order, deg, 4);
    let g = rand_poly(rng, d, order, deg, 4);
    (d, order, alpha, f, g)
}

#[test]
fn criterion_01_moyal_matches_brute_force_oracle() {
    let cases: Vec<_> = {
        let mut rng = rng_from_seed(101);
        (0..200).map(|_| random_case(&mut rng, 4, 5, 6)).collect()
    };
    cases.par_iter().for_each(|(d, order, alpha, f, g)| {
        let got = moyal_product(f, g, alpha, *order).unwrap();
        let expect = moyal_oracle(f, g, alpha, *order);
        assert_eq!(got, expect, "d={d} order={order} f={f} g={g}");
    });
    println!("criterion 1: PASS — 200 random pairs match the exponential bidifferential oracle");
}

#[test]
fn criterion_02_associativity_battery() {
    let cases: Vec<_> = {
        let mut rng = rng_from_seed(202);
        (0..100)
            .map(|_| {
                let (d, order, alpha, f, g) = random_case(&mut rng, 4, 4, 6);
                let h = rand_poly(&mut rng, d, order, 4, 4);
                (order, alpha, f, g, h)
            })
            .collect()
    };
    cases.par_iter().for_each(|(order, alpha, f, g, h)| {
        let r = check_associativity(f, g, h, alpha, *order).unwrap();
        assert!(r.is_zero(), "associativity residual {r} for f={f} g={g} h={h}");
    });
    println!("criterion 2: PASS — 100 random associativity residuals identically zero");
}

#[test]
fn criterion_03_bracket_recovery() {
    let mut rng = rng_from_seed(303);
    for _ in 0..100 {
        let (_, _, alpha, f, g) = random_case(&mut rng, 4, 4, 2);
        let f = f.with_order(2.max(f.order()));
        let g = g.with_order(f.order());
        let got = star_bracket(&f, &g, &alpha).unwrap();
        let expect = bracket_oracle(&f, &g, &alpha);
        assert_eq!(got, expect, "bracket mismatch for f={f} g={g}");
    }
    println!("criterion 3: PASS — 100 commutator brackets equal direct differentiation");
}

#[test]
fn criterion_04_graph_expansion_equals_closed_form() {
    let cases: Vec<_> = {
        let mut rng = rng_from_seed(404);
        (0..40).map(|_| random_case(&mut rng, 3, 4, 5)).collect()
    };
    cases.par_iter().for_each(|(d, order, alpha, f, g)| {
        let a = kontsevich_constant_product(f, g, alpha, *order).unwrap();
        let b = moyal_product(f, g, alpha, *order).unwrap();
        assert_eq!(a, b, "graph expansion deviates at d={d} order={order}");
    });
    println!("criterion 4: PASS — graph expansion equals the closed form through order 5");
}

#[test]
fn criterion_05_mdqme_l3_with_mutations() {
    let alpha = PoissonTensor::standard(2);
    let r = verify_mdqme(SurfaceSpec::L3, 2, &alpha, &VerifyOptions::default()).unwrap();
    assert!(r.verified, "residual: {:?}", r.residual_terms);
    let battery = mdqme_mutation_battery(SurfaceSpec::L3, 2, &alpha).unwrap();
    assert!(battery.len() >= 9, "need at least nine single-sign mutations");
    for m in &battery {
        assert!(m.detected, "mutation {} left an empty residual", m.mutation);
    }
    println!(
        "criterion 5: PASS — three-boundary master equation holds; {} mutations all detected",
        battery.len()
    );
}

#[test]
fn criterion_06_mdqme_l1_with_mutations() {
    let alpha = PoissonTensor::standard(2);
    let r = verify_mdqme(SurfaceSpec::L1X, 2, &alpha, &VerifyOptions::default()).unwrap();
    assert!(r.verified, "residual: {:?}", r.residual_terms);
    // the one-form vertex and the residual-pair bookkeeping participate
    let battery = mdqme_mutation_battery(SurfaceSpec::L1X, 2, &alpha).unwrap();
    assert!(battery.iter().any(|m| m.mutation == "s:res-tau"));
    assert!(battery.iter().any(|m| m.mutation == "delta"));
    for m in &battery {
        assert!(m.detected, "mutation {} left an empty residual", m.mutation);
    }
    println!(
        "criterion 6: PASS — one-boundary master equation holds; {} mutations all detected",
        battery.len()
    );
}

#[test]
fn criterion_07_mdcme() {
    let r = verify_mdcme(2, &MdcmeOptions::default());
    assert!(r.verified);
    assert!(!verify_mdcme(2, &MdcmeOptions { drop_r_term: true, ..Default::default() }).verified);
    assert!(!verify_mdcme(2, &MdcmeOptions { flip_dx_sign: true, ..Default::default() }).verified);
    println!("criterion 7: PASS — classical master-equation reduction verified with mutations");
}

#[test]
fn criterion_08_homotopy() {
    let alpha = PoissonTensor::standard(2);
    for n in [1usize, 2, 3] {
        let r = verify_homotopy(n, 2, &alpha, &HomotopyOptions::default()).unwrap();
        assert!(r.verified, "n={n} residual: {:?}", r.residual_terms);
    }
    println!("criterion 8: PASS — propagator-family variation is operator-exact for n in 1..=3");
}

#[test]
fn criterion_09_gluing_reproduces_star_product() {
    let cases: Vec<_> = {
        let mut rng = rng_from_seed(909);
        (0..50)
            .map(|_| {
                let (d, _, alpha, f, g) = random_case(&mut rng, 3, 4, 4);
                use rand::Rng;
                let order = rng.gen_range(0..=4u32);
                let pt = rand_point(&mut rng, d);
                (d, order, alpha, f.with_order(order), g.with_order(order), pt)
            })
            .collect()
    };
    cases.par_iter().for_each(|(d, order, alpha, f, g, pt)| {
        let via_glue = moyal_via_gluing(f, g, Some(pt), alpha, *order).unwrap();
        let closed = moyal_product(f, g, alpha, *order)
            .unwrap()
            .eval_at_point_coords()
            .substitute_class(VarClass::Xt, pt)
            .unwrap();
        assert_eq!(via_glue, closed, "pipeline deviates at d={d} order={order} f={f} g={g}");
    });
    println!("criterion 9: PASS — 50 random gluing pipelines equal the closed form exactly");
}

#[test]
fn criterion_10_cap_identity() {
    let mut rng = rng_from_seed(1010);
    for alpha in [PoissonTensor::zero(2), PoissonTensor::standard(2), rand_alpha(&mut rng, 3)] {
        let d = alpha.dim();
        let f = rand_poly(&mut rng, d, 3, 3, 4);
        let delta = cap_state(CapKind::Delta, d, &alpha, 3).unwrap();
        let fcap = cap_state(CapKind::F(f.clone()), d, &alpha, 3).unwrap();
        let value = integrate_target(&bv_integrate_z(&glue_pair(&delta, &fcap).unwrap()).unwrap()).unwrap();
        assert_eq!(value, f.eval_at_point_coords(), "cap identity failed for {f}");
    }
    println!("criterion 10: PASS — delta/observable cap composition returns the function exactly");
}

#[test]
fn criterion_11_flat_sections() {
    let mut rng = rng_from_seed(1111);
    for _ in 0..100 {
        use rand::Rng;
        let d = rng.gen_range(1..=3);
        let f = rand_poly(&mut rng, d, 2, 4, 5);
        assert!(flat::grothendieck_flat_check(&f).unwrap().is_zero(), "shifted {f} not flat");
        let section = flat::TargetSection::scalar(rand_poly(&mut rng, d, 2, 3, 4));
        assert!(flat::connection_squared(&section, d).unwrap().is_zero());
    }
    println!("criterion 11: PASS — 100 shifted functions flat; connection squares to zero");
}

#[test]
fn criterion_12_graded_engine_laws() {
    // rewrite termination within budget on the full verification corpora,
    // and identical normal forms over randomized rule orders
    let alpha = PoissonTensor::standard(2);
    let mut corpora: Vec<(SurfaceSpec, GradedExpr)> = Vec::new();
    for surface in [SurfaceSpec::L3, SurfaceSpec::L1X, SurfaceSpec::Mn(1), SurfaceSpec::Mn(2), SurfaceSpec::Mn(3)] {
        let setup = mdqme_setup(surface, 2, &alpha).unwrap();
        corpora.push((surface, apply_operator_exponent(&setup.omega, &setup.state.action)));
    }
    // include a mutated (non-vanishing) expression: normal forms must agree
    // across shuffles even away from zero
    let action = build_effective_action(SurfaceSpec::L3, 2, &alpha).unwrap().with_flipped("pert-12").unwrap();
    let (omega, _) = build_boundary_operator(SurfaceSpec::L3, 2, &alpha).unwrap();
    corpora.push((SurfaceSpec::L3, apply_operator_exponent(&omega, &action)));

    for (surface, expr) in &corpora {
        let mut ctx = surface.rewrite_ctx();
        let (reference, stats) = rewrite_normal_form(expr, &ctx).unwrap();
        assert!(stats.applications < ctx.budget, "budget exhausted on {surface:?}");
        for shuffle in 1..=20u64 {
            ctx.shuffle = Some(shuffle);
            let (nf, _) = rewrite_normal_form(expr, &ctx).unwrap();
            assert_eq!(nf, reference, "confluence failure on {surface:?} at shuffle {shuffle}");
        }
    }
    // antisymmetry kill for same-side contractions, enumerated at low orders
    let mut rng = rng_from_seed(1212);
    for _ in 0..20 {
        let h = rand_poly(&mut rng, 3, 3, 4, 4);
        let alpha3 = rand_alpha(&mut rng, 3);
        let once = same_side_contraction(&alpha3, &h).unwrap();
        assert!(once.is_zero());
    }
    println!("criterion 12: PASS — termination within budget, 20-shuffle confluence, sign laws");
}
