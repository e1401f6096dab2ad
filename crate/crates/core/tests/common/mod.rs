#![allow(dead_code)]

use diffamp::driver_field::SpectralWeights;
use diffamp::rng::rng_from_seed;
use diffamp::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

/// Random probability vector on modes `-n_max..=n_max`, with some slots
/// zeroed so degenerate and one-sided pairs show up.
pub fn random_weights(rng: &mut ChaCha8Rng, n_max: usize) -> SpectralWeights {
    let dim = 2 * n_max + 1;
    loop {
        let mut eps: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let total: f64 = eps.iter().sum();
        if total <= 0.0 {
            continue;
        }
        eps.iter_mut().for_each(|e| *e /= total);
        return SpectralWeights::from_slots(n_max, eps).expect("normalized");
    }
}

pub fn random_complex_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect()
}
