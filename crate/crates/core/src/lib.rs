//! Palette modeling: extraction from images, Binary Palette Sort, palette
//! manifolds (GPLVM and PCA+GMM), completion, recolorization and benchmarks.

pub mod assignment;
pub mod bench;
pub mod bps;
pub mod color;
pub mod error;
pub mod extract;
pub mod manifold;
pub mod palette;
pub mod recolor;
pub mod synth;

pub use error::{Error, Result};

/// Mixes a base seed with a path of indices (splitmix64 finalizer per step).
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut x = seed;
    for &p in path {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}
