//! Palette-driven recoloring: nearest-slot color shifting, grid
//! segmentation, and region-wise recoloring with model-completed palettes.

use image::{Rgb, RgbImage};
use rayon::prelude::*;

use crate::assignment::align_row_sets;
use crate::color::{lab_to_srgb, srgb_to_lab, LabColor};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::extract::kmeans_palette;
use crate::manifold::{align_partial, gplvm_complete, CompletionOptions, GplvmModel};
use crate::palette::{Palette, PaletteSet};

pub const MIN_CELL: u32 = 8;

/// An image converted once to normalized Lab.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<LabColor>,
}

impl LabImage {
    pub fn from_rgb(img: &RgbImage) -> Self {
        LabImage {
            width: img.width(),
            height: img.height(),
            pixels: img.pixels().map(|Rgb([r, g, b])| srgb_to_lab(*r, *g, *b)).collect(),
        }
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            Rgb(lab_to_srgb(self.pixels[(y * self.width + x) as usize]))
        })
    }
}

/// Per-pixel region labels `0..count`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl SegmentMap {
    /// Pixel indices of each segment, in row-major order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }
}

/// Regular grid of `cell x cell` blocks; edge blocks may be smaller.
pub fn segment_grid(width: u32, height: u32, cell: u32) -> Result<SegmentMap> {
    if cell < MIN_CELL {
        return Err(Error::InvalidParameter(format!("grid cell {cell} is below {MIN_CELL}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    let cols = width.div_ceil(cell);
    let rows = height.div_ceil(cell);
    let labels = (0..height)
        .flat_map(|y| (0..width).map(move |x| (y / cell) * cols + x / cell))
        .collect();
    Ok(SegmentMap {
        width,
        height,
        labels,
        count: (cols * rows) as usize,
    })
}

/// Parses a segmentation spec of the form `grid:N` and returns the cell size.
pub fn parse_grid_spec(spec: &str) -> Result<u32> {
    let cell = spec
        .strip_prefix("grid:")
        .and_then(|n| n.parse::<u32>().ok())
        .ok_or_else(|| Error::InvalidParameter(format!("segments must look like grid:N, got {spec:?}")))?;
    if cell < MIN_CELL {
        return Err(Error::InvalidParameter(format!("grid cell {cell} is below {MIN_CELL}")));
    }
    Ok(cell)
}

/// Source and target palettes with matching slots.
#[derive(Debug, Clone, PartialEq)]
pub struct RecolorSpec {
    pub source: Palette,
    pub target: Palette,
    pub preserve_luminance: bool,
    pub blend: f64,
}

impl RecolorSpec {
    pub fn new(source: Palette, target: Palette, preserve_luminance: bool, blend: f64) -> Result<Self> {
        if source.k() != target.k() {
            return Err(Error::SizeMismatch {
                expected: source.k(),
                found: target.k(),
            });
        }
        if !(0.0..=1.0).contains(&blend) {
            return Err(Error::InvalidParameter(format!("blend {blend} outside [0, 1]")));
        }
        Ok(RecolorSpec {
            source,
            target,
            preserve_luminance,
            blend,
        })
    }

    fn nearest_slot(&self, p: &LabColor) -> usize {
        let dist = |c: &LabColor| {
            let (da, db) = (p.a - c.a, p.b - c.b);
            let dl = if self.preserve_luminance { 0.0 } else { p.l - c.l };
            dl * dl + da * da + db * db
        };
        let colors = self.source.colors();
        (1..colors.len()).fold(0, |best, i| if dist(&colors[i]) < dist(&colors[best]) { i } else { best })
    }

    /// Shifts `p` by the target-minus-source offset of its nearest slot.
    pub fn apply(&self, p: LabColor) -> LabColor {
        let slot = self.nearest_slot(&p);
        let (s, t) = (self.source[slot], self.target[slot]);
        let w = self.blend;
        let dl = if self.preserve_luminance { 0.0 } else { t.l - s.l };
        LabColor::new(p.l + w * dl, p.a + w * (t.a - s.a), p.b + w * (t.b - s.b)).clamped()
    }
}

/// Lab-level recoloring of every pixel.
pub fn recolor_lab(img: &LabImage, spec: &RecolorSpec) -> LabImage {
    LabImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.par_iter().map(|&p| spec.apply(p)).collect(),
    }
}

fn write_pixels(out: &mut RgbImage, lab: &LabImage, indices: &[usize], spec: &RecolorSpec) {
    let w = lab.width as usize;
    for &i in indices {
        let p = lab.pixels[i];
        let q = spec.apply(p);
        if q != p {
            out.put_pixel((i % w) as u32, (i / w) as u32, Rgb(lab_to_srgb(q)));
        }
    }
}

/// Recolors an sRGB image. Pixels whose Lab value is unchanged keep their
/// original bytes.
pub fn recolor_single(img: &RgbImage, spec: &RecolorSpec) -> RgbImage {
    let lab = LabImage::from_rgb(img);
    let mut out = img.clone();
    let all: Vec<usize> = (0..lab.pixels.len()).collect();
    write_pixels(&mut out, &lab, &all, spec);
    out
}

/// Best pool palette for `source`: each candidate is first permuted onto
/// `source`'s slots by minimum-cost assignment, then the candidate with the
/// smallest summed slot distance wins (ties by pool index).
pub fn match_palette(source: &Palette, pool: &[Palette]) -> Result<Palette> {
    if pool.is_empty() {
        return Err(Error::EmptyPaletteSet);
    }
    let src = PaletteSet::new(vec![source.clone()])?;
    let mut best: Option<(f64, Palette)> = None;
    for candidate in pool {
        let assignment = align_row_sets(&src, &PaletteSet::new(vec![candidate.clone()])?)?;
        let aligned = candidate.permuted(&assignment.perm);
        let cost: f64 = aligned.colors().iter().zip(source.colors()).map(|(a, b)| a.distance(b)).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, aligned));
        }
    }
    Ok(best.expect("non-empty pool").1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichedOptions {
    pub sim_iters: usize,
    pub seed: u64,
    pub preserve_luminance: bool,
    pub blend: f64,
}

impl Default for EnrichedOptions {
    fn default() -> Self {
        EnrichedOptions {
            sim_iters: 100,
            seed: 0,
            preserve_luminance: false,
            blend: 1.0,
        }
    }
}

/// Extracts each segment's palette and aligns it to the model's slots.
/// Segments with fewer than K pixels get `None`.
pub fn segment_sources(lab: &LabImage, segments: &SegmentMap, model: &GplvmModel, seed: u64) -> Result<Vec<Option<Palette>>> {
    if segments.width != lab.width || segments.height != lab.height {
        return Err(Error::InvalidParameter("segment map and image sizes differ".into()));
    }
    let k = model.k();
    let training = model.training_palettes();
    segments
        .members()
        .par_iter()
        .enumerate()
        .map(|(s, idx)| {
            if idx.len() < k {
                log::warn!("segment {s} has {} pixels, fewer than {k}; left unchanged", idx.len());
                return Ok(None);
            }
            let pixels: Vec<LabColor> = idx.iter().map(|&i| lab.pixels[i]).collect();
            let extracted = kmeans_palette(&pixels, k, derive_seed(seed, &[s as u64]))?.palette;
            let partial = align_partial(extracted.colors(), &training)?;
            Ok(Some(Palette::new(partial.observed_colors())?))
        })
        .collect()
}

/// Per-segment target palettes completed by the model from the aligned sources.
pub fn complete_targets(model: &GplvmModel, sources: &[Option<Palette>], sim_iters: usize) -> Result<Vec<Option<Palette>>> {
    sources
        .par_iter()
        .map(|src| {
            src.as_ref()
                .map(|p| {
                    let partial = crate::manifold::PartialPalette::from_mask(p, &vec![true; p.k()])?;
                    let opts = CompletionOptions {
                        sim_iters,
                        clamp_observed: false,
                    };
                    Ok(gplvm_complete(model, &partial, &opts)?.palette)
                })
                .transpose()
        })
        .collect()
}

/// Recolors each segment from its source palette to its target palette.
pub fn recolor_segments(
    img: &RgbImage,
    segments: &SegmentMap,
    sources: &[Option<Palette>],
    targets: &[Option<Palette>],
    preserve_luminance: bool,
    blend: f64,
) -> Result<RgbImage> {
    if sources.len() != segments.count || targets.len() != segments.count {
        return Err(Error::SizeMismatch {
            expected: segments.count,
            found: sources.len().min(targets.len()),
        });
    }
    let lab = LabImage::from_rgb(img);
    let members = segments.members();
    let specs: Vec<Option<RecolorSpec>> = sources
        .iter()
        .zip(targets)
        .map(|(s, t)| match (s, t) {
            (Some(s), Some(t)) => RecolorSpec::new(s.clone(), t.clone(), preserve_luminance, blend).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let mut out = img.clone();
    for (idx, spec) in members.iter().zip(&specs) {
        if let Some(spec) = spec {
            write_pixels(&mut out, &lab, idx, spec);
        }
    }
    Ok(out)
}

/// Region-wise recoloring: each segment's extracted palette is aligned to the
/// model, completed by latent projection, and used as that segment's target.
pub fn recolor_enriched(img: &RgbImage, segments: &SegmentMap, model: &GplvmModel, opts: &EnrichedOptions) -> Result<RgbImage> {
    let lab = LabImage::from_rgb(img);
    let sources = segment_sources(&lab, segments, model, opts.seed)?;
    let targets = complete_targets(model, &sources, opts.sim_iters)?;
    recolor_segments(img, segments, &sources, &targets, opts.preserve_luminance, opts.blend)
}
