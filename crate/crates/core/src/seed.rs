//! Deterministic per-task random streams.
//!
//! Every task (simulation, chain, partition shuffle) owns a stream seeded by
//! [`derive_seed`]. The derivation is:
//!
//! ```text
//! digest = SHA-256( "hetmr/seed/v1"
//!                   || master_seed as u64 little-endian
//!                   || encode(label_1) || ... || encode(label_n) )
//! seed   = first 8 bytes of digest, read as u64 little-endian
//!
//! encode(Config(i))    = 0x01 || i as u64 LE
//! encode(Replicate(i)) = 0x02 || i as u64 LE
//! encode(Subset(i))    = 0x03 || i as u64 LE
//! encode(Role(s))      = 0x04 || len(s) as u32 LE || utf8 bytes of s
//! ```
//!
//! Streams are ChaCha8 generators seeded through `SeedableRng::seed_from_u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

const DOMAIN: &[u8] = b"hetmr/seed/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedLabel<'a> {
    Config(u64),
    Replicate(u64),
    Subset(u64),
    Role(&'a str),
}

pub fn derive_seed(master_seed: u64, labels: &[SeedLabel<'_>]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master_seed.to_le_bytes());
    for label in labels {
        match *label {
            SeedLabel::Config(i) => {
                hasher.update([0x01]);
                hasher.update(i.to_le_bytes());
            }
            SeedLabel::Replicate(i) => {
                hasher.update([0x02]);
                hasher.update(i.to_le_bytes());
            }
            SeedLabel::Subset(i) => {
                hasher.update([0x03]);
                hasher.update(i.to_le_bytes());
            }
            SeedLabel::Role(tag) => {
                hasher.update([0x04]);
                hasher.update((tag.len() as u32).to_le_bytes());
                hasher.update(tag.as_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
