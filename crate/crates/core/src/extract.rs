//! Palette datasets from image collections: rescale, slide patches, sample
//! pixels and cluster each patch into `K` colors.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{srgb_to_lab, LabColor};
use crate::error::{Error, Result};
use crate::palette::{Palette, PaletteSet, MAX_PALETTE_SIZE};
use crate::derive_seed;

/// Longest side after [`rescale_image`].
pub const RESCALED_MAX_DIM: u32 = 500;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchSpec {
    pub patch_size: u32,
    pub step: u32,
    pub samples_per_patch: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            patch_size: 200,
            step: 100,
            samples_per_patch: 1000,
        }
    }
}

impl PatchSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.step == 0 || self.patch_size < self.step {
            return Err(Error::InvalidParameter(format!(
                "need patch_size >= step >= 1, got {} / {}",
                self.patch_size, self.step
            )));
        }
        if self.samples_per_patch < k {
            return Err(Error::InvalidParameter(format!(
                "samples_per_patch {} < K {}",
                self.samples_per_patch, k
            )));
        }
        Ok(())
    }
}

fn default_palettes_per_set() -> usize {
    400
}

/// Inputs for [`build_dataset`], read from a JSON manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source_paths: Vec<PathBuf>,
    pub k: usize,
    #[serde(default = "default_palettes_per_set")]
    pub palettes_per_set: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub patch: PatchSpec,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        // Relative image paths are resolved against the manifest's directory.
        if let Some(dir) = path.parent() {
            for p in manifest.source_paths.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PALETTE_SIZE).contains(&self.k) {
            return Err(Error::InvalidPaletteSize(self.k));
        }
        if self.palettes_per_set == 0 {
            return Err(Error::InvalidParameter("palettes_per_set must be >= 1".into()));
        }
        self.patch.validate(self.k)
    }
}

/// Resamples (bilinear) so the longer side is [`RESCALED_MAX_DIM`] pixels.
pub fn rescale_image(img: &RgbImage) -> Result<RgbImage> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let longest = w.max(h);
    if longest == RESCALED_MAX_DIM {
        return Ok(img.clone());
    }
    let scale = RESCALED_MAX_DIM as f64 / longest as f64;
    let nw = ((w as f64 * scale).round() as u32).clamp(1, RESCALED_MAX_DIM);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, RESCALED_MAX_DIM);
    Ok(imageops::resize(img, nw, nh, FilterType::Triangle))
}

/// Top-left corners of the sliding-window grid.
pub fn patch_origins(width: u32, height: u32, spec: &PatchSpec) -> Vec<(u32, u32)> {
    let axis = |len: u32| -> Vec<u32> {
        if len < spec.patch_size {
            vec![0]
        } else {
            (0..=(len - spec.patch_size) / spec.step).map(|i| i * spec.step).collect()
        }
    };
    let xs = axis(width);
    let ys = axis(height);
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
}

/// Cuts patches on a regular grid. An image smaller than the patch in either
/// dimension yields a single centered patch clipped to the image.
pub fn extract_patches(img: &RgbImage, spec: &PatchSpec) -> Vec<RgbImage> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Vec::new();
    }
    if w < spec.patch_size || h < spec.patch_size {
        let pw = w.min(spec.patch_size);
        let ph = h.min(spec.patch_size);
        let x = (w - pw) / 2;
        let y = (h - ph) / 2;
        return vec![imageops::crop_imm(img, x, y, pw, ph).to_image()];
    }
    patch_origins(w, h, spec)
        .into_iter()
        .map(|(x, y)| imageops::crop_imm(img, x, y, spec.patch_size, spec.patch_size).to_image())
        .collect()
}

/// `n` pixels drawn uniformly with replacement, as normalized Lab.
pub fn sample_pixels(patch: &RgbImage, n: usize, seed: u64) -> Vec<LabColor> {
    let pixels: Vec<_> = patch.pixels().collect();
    if pixels.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = pixels[rng.random_range(0..pixels.len())];
            srgb_to_lab(p[0], p[1], p[2])
        })
        .collect()
}

/// Outcome of [`kmeans_palette`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansPalette {
    pub palette: Palette,
    /// Fewer distinct input colors than `K`; some centers are duplicates.
    pub degenerate: bool,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
}

fn sq_dist(a: &LabColor, b: &LabColor) -> f64 {
    (a.l - b.l).powi(2) + (a.a - b.a).powi(2) + (a.b - b.b).powi(2)
}

fn nearest(c: &LabColor, centers: &[LabColor]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, m) in centers.iter().enumerate() {
        let d = sq_dist(c, m);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn count_distinct(pixels: &[LabColor], limit: usize) -> usize {
    let mut seen: Vec<[u64; 3]> = Vec::new();
    for p in pixels {
        let key = [p.l.to_bits(), p.a.to_bits(), p.b.to_bits()];
        if !seen.contains(&key) {
            seen.push(key);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

fn kmeans_pp_init(pixels: &[LabColor], k: usize, rng: &mut ChaCha8Rng) -> Vec<LabColor> {
    let mut centers = vec![pixels[rng.random_range(0..pixels.len())]];
    let mut d2: Vec<f64> = pixels.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            pixels[chosen]
        } else {
            // Every pixel coincides with a center already: duplicate the first one.
            centers[0]
        };
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min(sq_dist(p, &next));
        }
        centers.push(next);
    }
    centers
}

/// K-means in normalized Lab with k-means++ seeding and Lloyd iterations.
pub fn kmeans_palette(pixels: &[LabColor], k: usize, seed: u64) -> Result<KMeansPalette> {
    if !(1..=MAX_PALETTE_SIZE).contains(&k) {
        return Err(Error::InvalidPaletteSize(k));
    }
    if pixels.len() < k {
        return Err(Error::InvalidParameter(format!(
            "{} pixels cannot form {k} clusters",
            pixels.len()
        )));
    }
    let degenerate = count_distinct(pixels, k) < k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(pixels, k, &mut rng);
    let mut labels = vec![0usize; pixels.len()];
    let mut trace = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let mut objective = 0.0;
        for (label, p) in labels.iter_mut().zip(pixels) {
            let (i, d) = nearest(p, &centers);
            *label = i;
            objective += d;
        }
        trace.push(objective);

        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (&label, p) in labels.iter().zip(pixels) {
            sums[label][0] += p.l;
            sums[label][1] += p.a;
            sums[label][2] += p.b;
            counts[label] += 1;
        }
        let mut movement = 0.0f64;
        for ((center, sum), &count) in centers.iter_mut().zip(&sums).zip(&counts) {
            if count == 0 {
                continue;
            }
            let n = count as f64;
            let updated = LabColor::new(sum[0] / n, sum[1] / n, sum[2] / n);
            movement = movement.max(sq_dist(center, &updated).sqrt());
            *center = updated;
        }
        if movement < KMEANS_TOLERANCE {
            break;
        }
    }

    Ok(KMeansPalette {
        palette: Palette::new(centers.into_iter().map(LabColor::clamped).collect())?,
        degenerate,
        objective_trace: trace,
    })
}

/// All patch palettes of one (already loaded) image.
pub fn image_palettes(img: &RgbImage, k: usize, spec: &PatchSpec, seed: u64) -> Result<Vec<Palette>> {
    let img = rescale_image(img)?;
    extract_patches(&img, spec)
        .iter()
        .enumerate()
        .map(|(i, patch)| {
            let patch_seed = derive_seed(seed, &[i as u64]);
            let pixels = sample_pixels(patch, spec.samples_per_patch, patch_seed);
            Ok(kmeans_palette(&pixels, k, derive_seed(patch_seed, &[1]))?.palette)
        })
        .collect()
}

/// Runs the whole extraction pipeline over the manifest's images.
///
/// Unreadable images are skipped with a warning. The result is a pure
/// function of the manifest, including its seed.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<PaletteSet> {
    manifest.validate()?;
    let per_image: Vec<Option<Vec<Palette>>> = manifest
        .source_paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let img = match image::open(path) {
                Ok(img) => img.to_rgb8(),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    return None;
                }
            };
            match image_palettes(&img, manifest.k, &manifest.patch, derive_seed(manifest.seed, &[i as u64])) {
                Ok(p) => Some(p),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    None
                }
            }
        })
        .collect();

    let palettes: Vec<Palette> = per_image.into_iter().flatten().flatten().collect();
    if palettes.is_empty() {
        return Err(Error::NoUsableImages);
    }
    if palettes.len() <= manifest.palettes_per_set {
        return PaletteSet::new(palettes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(manifest.seed, &[u64::MAX]));
    let mut chosen = index::sample(&mut rng, palettes.len(), manifest.palettes_per_set).into_vec();
    chosen.sort_unstable();
    PaletteSet::new(chosen.into_iter().map(|i| palettes[i].clone()).collect())
}
