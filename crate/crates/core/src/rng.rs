//! Addressed random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha stream whose seed
//! is a hash of a tuple of addressing components (run seed, faculty id,
//! trial index, ...). Results therefore do not depend on evaluation order or
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a stream address.
#[derive(Clone, Copy, Debug)]
pub enum Key<'a> {
    U64(u64),
    Str(&'a str),
}

impl From<u64> for Key<'_> {
    fn from(v: u64) -> Self {
        Key::U64(v)
    }
}

impl From<usize> for Key<'_> {
    fn from(v: usize) -> Self {
        Key::U64(v as u64)
    }
}

impl<'a> From<&'a str> for Key<'a> {
    fn from(v: &'a str) -> Self {
        Key::Str(v)
    }
}

/// 256-bit digest of a domain label and the address components.
pub fn address(domain: &str, keys: &[Key<'_>]) -> [u8; 32] {
    let mut h = Sha256::new();
    feed_str(&mut h, domain);
    for k in keys {
        match *k {
            Key::U64(v) => {
                h.update([0u8]);
                h.update(v.to_le_bytes());
            }
            Key::Str(s) => {
                h.update([1u8]);
                feed_str(&mut h, s);
            }
        }
    }
    h.finalize().into()
}

fn feed_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

pub fn stream(domain: &str, keys: &[Key<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(address(domain, keys))
}

/// 64-bit digest, for deriving sub-seeds cheaply.
pub fn address_u64(domain: &str, keys: &[Key<'_>]) -> u64 {
    let d = address(domain, keys);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for a precomputed base key combined with a small index.
pub fn substream(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(base ^ mix64(index)))
}
