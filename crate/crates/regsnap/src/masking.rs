//! Boolean secret sharing: a byte split into d+1 shares whose XOR is the
//! value. Share order is significant in storage (each share lives in its own
//! register) but carries no meaning; `MaskedByte` equality is share-wise and
//! [`MaskedByte::value_eq`] compares unshared values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::GfByte;

/// Masking parameters: order `d` (so `d + 1` shares) and the seed used for
/// mask generation. Mask randomness on the target is not observable, so any
/// deterministic seedable generator works; the seed is recorded in outputs
/// for replay.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct ShareConfig {
    pub d: usize,
    pub rng_seed: u64,
}

impl ShareConfig {
    pub fn new(d: usize, rng_seed: u64) -> Self {
        Self { d, rng_seed }
    }

    pub fn share_count(&self) -> usize {
        self.d + 1
    }
}

/// Deterministic RNG used throughout the toolkit.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes several indices into a sub-seed so that independent draws (per cell,
/// per trial, ...) can be made from one master seed without shared state.
pub fn sub_seed(master: u64, parts: &[u64]) -> u64 {
    let mut x = master;
    for &p in parts {
        x = splitmix64(x ^ splitmix64(p));
    }
    x
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A byte in shared form: `value = shares[0] ^ ... ^ shares[d]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedByte {
    shares: Vec<GfByte>,
}

impl MaskedByte {
    /// Builds from explicit shares. Panics on an empty share list, which has
    /// no value.
    pub fn from_shares(shares: Vec<GfByte>) -> Self {
        assert!(!shares.is_empty(), "a masked byte needs at least one share");
        Self { shares }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            shares: vec![GfByte(0); d + 1],
        }
    }

    pub fn shares(&self) -> &[GfByte] {
        &self.shares
    }

    /// Masking order d (= share count - 1).
    pub fn order(&self) -> usize {
        self.shares.len() - 1
    }

    /// True when both sides unshare to the same value, regardless of the
    /// share split.
    pub fn value_eq(&self, other: &MaskedByte) -> bool {
        unshare(self) == unshare(other)
    }
}

/// Splits `value` into d+1 shares: d fresh uniform shares plus one chosen so
/// the XOR comes out right.
pub fn share(value: GfByte, d: usize, rng: &mut impl Rng) -> MaskedByte {
    let mut shares = Vec::with_capacity(d + 1);
    let mut acc = value;
    for _ in 0..d {
        let s = GfByte(rng.gen());
        acc ^= s;
        shares.push(s);
    }
    shares.push(acc);
    MaskedByte { shares }
}

/// XOR of all shares.
pub fn unshare(m: &MaskedByte) -> GfByte {
    m.shares.iter().fold(GfByte(0), |a, &s| a ^ s)
}

/// Same value, fresh masks.
pub fn reshare(m: &MaskedByte, rng: &mut impl Rng) -> MaskedByte {
    share(unshare(m), m.order(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_single_share() {
        let mut rng = rng_from_seed(1);
        let m = share(GfByte(0xab), 0, &mut rng);
        assert_eq!(m.shares(), &[GfByte(0xab)]);
        // d = 0 reshare is the identity: no randomness can be injected.
        assert_eq!(reshare(&m, &mut rng), m);
    }

    #[test]
    fn share_unshare_round_trip() {
        let mut rng = rng_from_seed(2);
        for _ in 0..10_000 {
            let v = GfByte(rng.gen());
            let d = rng.gen_range(0..=6);
            let m = share(v, d, &mut rng);
            assert_eq!(m.shares().len(), d + 1);
            assert_eq!(unshare(&m), v);
        }
    }

    #[test]
    fn reshare_preserves_value() {
        let mut rng = rng_from_seed(3);
        let m = share(GfByte(0x5a), 3, &mut rng);
        let mut cur = m.clone();
        for _ in 0..10_000 {
            cur = reshare(&cur, &mut rng);
            assert!(cur.value_eq(&m));
        }
    }

    #[test]
    fn fig9_share_triple() {
        let m = MaskedByte::from_shares(vec![GfByte(0xa6), GfByte(0x28), GfByte(0x39)]);
        assert_eq!(unshare(&m), GfByte(0xb7));
    }

    #[test]
    fn first_share_is_uniform() {
        // Chi-squared goodness of fit for share 0 over 10^4 draws of a fixed
        // value; 255 dof, 99.9% critical value is ~330.5.
        let mut rng = rng_from_seed(4);
        let mut counts = [0u32; 256];
        let draws = 10_000;
        for _ in 0..draws {
            let m = share(GfByte(0x42), 1, &mut rng);
            counts[m.shares()[0].0 as usize] += 1;
        }
        let expect = draws as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expect;
                diff * diff / expect
            })
            .sum();
        assert!(chi2 < 330.5, "chi2 = {chi2}");
    }

    #[test]
    fn reshared_first_share_independent_of_value() {
        // For d = 1 the first share after resharing must look uniform no
        // matter the underlying value.
        let mut rng = rng_from_seed(5);
        for &v in &[0x00u8, 0xff, 0x37] {
            let m = share(GfByte(v), 1, &mut rng);
            let mut counts = [0u32; 256];
            let draws = 10_000;
            for _ in 0..draws {
                counts[reshare(&m, &mut rng).shares()[0].0 as usize] += 1;
            }
            let expect = draws as f64 / 256.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| {
                    let diff = c as f64 - expect;
                    diff * diff / expect
                })
                .sum();
            assert!(chi2 < 330.5, "value {v:#x}: chi2 = {chi2}");
        }
    }

    #[test]
    fn sub_seed_parts_matter() {
        assert_ne!(sub_seed(1, &[0, 1]), sub_seed(1, &[1, 0]));
        assert_ne!(sub_seed(1, &[2]), sub_seed(2, &[2]));
        assert_eq!(sub_seed(9, &[3, 4]), sub_seed(9, &[3, 4]));
    }
}
