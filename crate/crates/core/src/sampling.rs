//! Seeded random draws shared by the simulator and the multinomial check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Generator for replicate `index` of a study seeded with `seed`. Each
/// replicate owns an independent ChaCha stream, so results do not depend on
/// the order or thread in which replicates run.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One `Binomial(n, p)` draw; `p` is clamped to `[0, 1]`.
pub fn binomial<R: rand::Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

/// `Multinomial(n, probs)` via sequential conditional binomials.
///
/// `probs` need not be normalised; they are divided by their sum.
pub fn multinomial<R: rand::Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut remaining = n;
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return out;
    };
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            out[k] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let x = binomial(rng, remaining, p / remaining_mass);
        out[k] = x;
        remaining -= x;
        remaining_mass -= p;
    }
    out
}
