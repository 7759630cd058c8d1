//! Shared builders for the integration suites: random sparse series with
//! controlled support and a few closed-form ones.

#![allow(dead_code)]

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use releg_core::series::{Dims, Series, TermKey};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `cos(k . q)` as a series.
pub fn cosine(dims: Dims, k: Vec<i32>) -> Series {
    let neg: Vec<i32> = k.iter().map(|v| -v).collect();
    Series::from_terms(
        dims,
        [
            (c(0.5, 0.0), TermKey::harmonic(k, dims.n2)),
            (c(0.5, 0.0), TermKey::harmonic(neg, dims.n2)),
        ],
    )
    .unwrap()
}

/// The action monomial `p_j`.
pub fn action(dims: Dims, j: usize) -> Series {
    let mut mp = vec![0u32; dims.n1];
    mp[j] = 1;
    Series::monomial(
        dims,
        c(1.0, 0.0),
        TermKey::new(vec![0; dims.n1], mp, vec![0; dims.n2], vec![0; dims.n2]),
    )
    .unwrap()
}

/// A random sparse series: harmonics in the cube `|k_i| <= max_k`, each
/// polynomial exponent at most `max_pow`, coefficients in the unit square.
pub fn random_series(
    rng: &mut ChaCha8Rng,
    dims: Dims,
    max_k: i32,
    max_pow: u32,
    terms: usize,
) -> Series {
    let mut out = Series::zero(dims);
    for _ in 0..terms {
        let k: Vec<i32> = (0..dims.n1).map(|_| rng.gen_range(-max_k..=max_k)).collect();
        let mp: Vec<u32> = (0..dims.n1).map(|_| rng.gen_range(0..=max_pow)).collect();
        let mz: Vec<u32> = (0..dims.n2).map(|_| rng.gen_range(0..=max_pow)).collect();
        let mw: Vec<u32> = (0..dims.n2).map(|_| rng.gen_range(0..=max_pow)).collect();
        let coeff = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        out.insert_add(TermKey::new(k, mp, mz, mw), coeff);
    }
    out
}

/// Largest coefficient magnitude among several series, floored at 1 so it
/// can serve as a relative-error scale.
pub fn scale_of(series: &[&Series]) -> f64 {
    series.iter().map(|s| s.linf()).fold(1.0, f64::max)
}
