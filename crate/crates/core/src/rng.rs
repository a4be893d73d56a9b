//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, domain, episode, epoch, arm)`: the ChaCha
//! key comes from `seed` and `domain`, the stream id is the episode and the
//! word position encodes `(epoch, arm)`. Results therefore never depend on
//! the order in which arms or rounds are simulated.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Next-state sampling in the environment.
pub const DOMAIN_ENV: u64 = 0x656e_7669;
/// Arm subsets drawn by the random baseline.
pub const DOMAIN_RANDOM_POLICY: u64 = 0x7261_6e64;

/// SplitMix64 finalizer; used to derive independent keys from small integers.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for Monte-Carlo round `round` of a run with base seed `base`.
pub fn round_seed(base: u64, round: u64) -> u64 {
    mix64(mix64(base) ^ round.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// The ChaCha stream for one episode in one domain.
pub fn episode_stream(seed: u64, domain: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(domain)));
    rng.set_stream(episode as u64);
    rng
}

/// Uniform draw in `[0, 1)` at a fixed `(epoch, arm)` slot of an episode stream.
pub fn uniform_at(seed: u64, domain: u64, episode: usize, epoch: usize, arm: usize, num_arms: usize) -> f64 {
    let mut rng = episode_stream(seed, domain, episode);
    rng.set_word_pos(2 * (epoch * num_arms + arm) as u128);
    unit_f64(rng.next_u64())
}

#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index drawn from a probability row by inverse CDF.
pub fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: fall back to the last state with positive mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_are_addressable_in_any_order() {
        let a = uniform_at(7, DOMAIN_ENV, 3, 4, 1, 5);
        let _ = uniform_at(7, DOMAIN_ENV, 3, 0, 0, 5);
        assert_eq!(a, uniform_at(7, DOMAIN_ENV, 3, 4, 1, 5));
        assert_ne!(a, uniform_at(7, DOMAIN_ENV, 3, 4, 2, 5));
        assert_ne!(a, uniform_at(7, DOMAIN_ENV, 4, 4, 1, 5));
        assert_ne!(a, uniform_at(8, DOMAIN_ENV, 3, 4, 1, 5));
    }

    #[test]
    fn sample_index_inverts_cdf() {
        let row = [0.2, 0.0, 0.8];
        assert_eq!(sample_index(&row, 0.0), 0);
        assert_eq!(sample_index(&row, 0.19), 0);
        assert_eq!(sample_index(&row, 0.2), 2);
        assert_eq!(sample_index(&row, 0.999_999), 2);
    }

    #[test]
    fn round_seeds_differ() {
        assert_ne!(round_seed(1, 0), round_seed(1, 1));
        assert_ne!(round_seed(1, 0), round_seed(2, 0));
    }
}
