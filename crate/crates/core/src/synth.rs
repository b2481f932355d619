//! Synthetic palette datasets with a planted slot correspondence.
//!
//! Every palette is drawn from one of a few contexts. A context fixes K base
//! colors, built as light and dark shades of two or three hues. Each palette
//! moves the base colors along a smooth 2-D family, adds per-color jitter,
//! and finally shuffles its colors, so that the true correspondence is known
//! but hidden.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::color::{LabColor, NEUTRAL_AB};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::palette::{Palette, PaletteSet, MAX_PALETTE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub k: usize,
    pub n: usize,
    pub contexts: usize,
    /// Amplitude of the smooth per-palette variation.
    pub drift: f64,
    /// Standard deviation of independent per-channel noise.
    pub jitter: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k: 5,
            n: 100,
            contexts: 1,
            drift: 0.1,
            jitter: 0.01,
            shuffle: true,
            seed: 0,
        }
    }
}

/// The generated palettes with their hidden slot orders.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    /// Shuffled palettes, as an extractor would produce them.
    pub palettes: PaletteSet,
    /// `truth[n][k]` is the position in `palettes[n]` of planted slot `k`.
    pub truth: Vec<Vec<usize>>,
    pub context: Vec<usize>,
}

impl PlantedDataset {
    /// Palettes with colors restored to planted slot order.
    pub fn aligned(&self) -> Vec<Palette> {
        self.palettes
            .iter()
            .zip(&self.truth)
            .map(|(p, t)| p.permuted(t))
            .collect()
    }
}

struct Context {
    base: Vec<[f64; 3]>,
    u: Vec<[f64; 3]>,
    v: Vec<[f64; 3]>,
}

fn make_context(k: usize, rng: &mut ChaCha8Rng) -> Context {
    let hues = if k >= 6 { 3 } else { 2 };
    let hue0 = rng.random_range(0.0..TAU);
    let angles: Vec<f64> = (0..hues)
        .map(|i| hue0 + i as f64 * TAU / hues as f64 + rng.random_range(-0.3..0.3))
        .collect();
    // Lightness levels spread evenly, then dealt out to hues in turn.
    let mut levels: Vec<f64> = (0..k).map(|i| 0.15 + 0.75 * (i as f64 + 0.5) / k as f64).collect();
    levels.shuffle(rng);
    let base = (0..k)
        .map(|h| {
            let angle = angles[h % hues] + rng.random_range(-0.15..0.15);
            let chroma = rng.random_range(0.06..0.16);
            [
                levels[h],
                NEUTRAL_AB + chroma * angle.cos(),
                NEUTRAL_AB + chroma * angle.sin(),
            ]
        })
        .collect();
    let mut direction = || {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let u = (0..k).map(|_| direction()).collect();
    let v = (0..k).map(|_| direction()).collect();
    Context { base, u, v }
}

/// Generates `n` palettes of `k` colors. Deterministic in the config.
pub fn planted_palettes(cfg: &SynthConfig) -> Result<PlantedDataset> {
    if !(1..=MAX_PALETTE_SIZE).contains(&cfg.k) {
        return Err(Error::InvalidPaletteSize(cfg.k));
    }
    if cfg.n == 0 || cfg.contexts == 0 {
        return Err(Error::InvalidParameter("need at least one palette and one context".into()));
    }
    if !(cfg.jitter >= 0.0 && cfg.drift >= 0.0) {
        return Err(Error::InvalidParameter("jitter and drift must be non-negative".into()));
    }
    let mut ctx_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0]));
    let contexts: Vec<Context> = (0..cfg.contexts).map(|_| make_context(cfg.k, &mut ctx_rng)).collect();
    let noise = Normal::new(0.0, cfg.jitter).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1]));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));

    let mut palettes = Vec::with_capacity(cfg.n);
    let mut truth = Vec::with_capacity(cfg.n);
    let mut context = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let c = rng.random_range(0..cfg.contexts);
        let ctx = &contexts[c];
        let t0: f64 = rng.random_range(0.0..1.0);
        let t1: f64 = rng.random_range(-0.5..0.5);
        let (w0, w1) = (cfg.drift * (PI * t0).sin(), cfg.drift * t1);
        let colors: Vec<LabColor> = (0..cfg.k)
            .map(|h| {
                let mut ch = |i: usize| ctx.base[h][i] + w0 * ctx.u[h][i] + w1 * ctx.v[h][i] + noise.sample(&mut rng);
                LabColor::new(ch(0), ch(1), ch(2)).clamped()
            })
            .collect();
        // order[j] = planted slot shown at position j
        let mut order: Vec<usize> = (0..cfg.k).collect();
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut t = vec![0; cfg.k];
        for (j, &h) in order.iter().enumerate() {
            t[h] = j;
        }
        palettes.push(Palette::new(order.iter().map(|&h| colors[h]).collect())?);
        truth.push(t);
        context.push(c);
    }
    Ok(PlantedDataset {
        palettes: PaletteSet::new(palettes)?,
        truth,
        context,
    })
}
