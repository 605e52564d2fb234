//! Seeded random inputs for the randomized batteries; identical seeds give
//! identical inputs everywhere.

use crate::poly::{Poly, PoissonTensor, VarClass};
use crate::scalar::GaussRat;
use num::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_rational(rng: &mut ChaCha8Rng, max_abs: i64) -> BigRational {
    let num = rng.gen_range(-max_abs..=max_abs);
    let den = rng.gen_range(1..=4i64);
    BigRational::new(num.into(), den.into())
}

/// A random polynomial in the target coordinates.
pub fn rand_poly(rng: &mut ChaCha8Rng, d: usize, order: u32, max_deg: u32, max_terms: usize) -> Poly {
    let terms = rng.gen_range(1..=max_terms);
    let mut acc = Poly::zero(d, order);
    for _ in 0..terms {
        let mut mono = Poly::constant(d, order, GaussRat::from_rational(rand_rational(rng, 6)));
        let deg = rng.gen_range(0..=max_deg);
        for _ in 0..deg {
            let i = rng.gen_range(1..=d);
            mono = mono.mul(&Poly::var(d, order, VarClass::X, i).expect("index in range")).unwrap();
        }
        acc = acc.add(&mono).unwrap();
    }
    acc
}

/// A random antisymmetric tensor with small rational entries.
pub fn rand_alpha(rng: &mut ChaCha8Rng, d: usize) -> PoissonTensor {
    let mut rows = vec![vec![BigRational::from_integer(0.into()); d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let v = rand_rational(rng, 3);
            rows[i][j] = v.clone();
            rows[j][i] = -v;
        }
    }
    PoissonTensor::new(d, rows).expect("antisymmetric by construction")
}

pub fn rand_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<BigRational> {
    (0..d).map(|_| rand_rational(rng, 3)).collect()
}
