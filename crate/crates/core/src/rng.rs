//! Seedable, splittable random streams.
//!
//! Every draw in the crate comes from a [`SimRng`] built out of a root seed
//! and a path of labels (`scenario/replicate-i/subject-j`). Streams for
//! different paths are independent, and a subject's stream does not depend
//! on how many other subjects are drawn or on which worker draws them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A position in the stream tree. Cheap to copy; derive children with
/// [`StreamKey::child`] and [`StreamKey::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(splitmix(seed))
    }

    pub fn child(self, label: &str) -> Self {
        StreamKey(splitmix(self.0 ^ splitmix(hash_label(label))))
    }

    pub fn index(self, i: u64) -> Self {
        StreamKey(splitmix(self.0.rotate_left(17) ^ splitmix(i.wrapping_add(GOLDEN))))
    }

    pub fn replicate(self, i: usize) -> Self {
        self.child("replicate").index(i as u64)
    }

    pub fn subject(self, j: usize) -> Self {
        self.child("subject").index(j as u64)
    }

    pub fn rng(self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}
