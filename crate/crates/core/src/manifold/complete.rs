//! Partial palettes, slot alignment of unordered observations, and GPLVM
//! completion by latent projection on the observed dimensions only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gplvm::GplvmModel;
use super::scg::{self, Objective, ScgOptions};
use crate::assignment::{hungarian, CostMatrix};
use crate::color::{mhd, LabColor};
use crate::error::{Error, Result};
use crate::palette::{Palette, MAX_PALETTE_SIZE};

/// Number of nearest training palettes used as alignment exemplars.
pub const ALIGN_EXEMPLARS: usize = 3;

/// K slots, some of them observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialPalette {
    slots: Vec<Option<LabColor>>,
}

impl PartialPalette {
    pub fn new(slots: Vec<Option<LabColor>>) -> Result<Self> {
        if !(1..=MAX_PALETTE_SIZE).contains(&slots.len()) {
            return Err(Error::InvalidPaletteSize(slots.len()));
        }
        if slots.iter().all(Option::is_none) {
            return Err(Error::EmptyColorSet);
        }
        if let Some(c) = slots.iter().flatten().find(|c| !c.is_valid()) {
            return Err(Error::ColorOutOfRange(c.to_array()));
        }
        Ok(PartialPalette { slots })
    }

    /// Keeps the slots of `palette` where `mask` is true.
    pub fn from_mask(palette: &Palette, mask: &[bool]) -> Result<Self> {
        if mask.len() != palette.k() {
            return Err(Error::SizeMismatch {
                expected: palette.k(),
                found: mask.len(),
            });
        }
        PartialPalette::new(palette.colors().iter().zip(mask).map(|(c, &m)| m.then_some(*c)).collect())
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, i: usize) -> Option<LabColor> {
        self.slots[i]
    }

    pub fn slots(&self) -> &[Option<LabColor>] {
        &self.slots
    }

    pub fn observed_count(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn observed_colors(&self) -> Vec<LabColor> {
        self.slots.iter().flatten().copied().collect()
    }

    pub fn observed_slots(&self) -> Vec<usize> {
        (0..self.k()).filter(|&i| self.slots[i].is_some()).collect()
    }

    /// Feature-vector indices (3 per observed slot), ascending.
    pub fn observed_dims(&self) -> Vec<usize> {
        self.observed_slots().into_iter().flat_map(|s| 3 * s..3 * s + 3).collect()
    }

    /// Values at [`Self::observed_dims`].
    pub fn observed_vector(&self) -> Vec<f64> {
        self.slots.iter().flatten().flat_map(|c| c.to_array()).collect()
    }

    /// Replaces the observed slots of `palette` with the observed colors.
    pub fn clamp(&self, palette: &Palette) -> Palette {
        let colors = palette
            .colors()
            .iter()
            .zip(&self.slots)
            .map(|(c, s)| s.unwrap_or(*c))
            .collect();
        Palette::new(colors).expect("same size")
    }
}

/// Indices of the `count` training palettes nearest to `colors` by MHD,
/// nearest first, ties by index.
pub fn nearest_palettes(colors: &[LabColor], training: &[Palette], count: usize) -> Result<Vec<usize>> {
    let mut scored: Vec<(f64, usize)> = training
        .iter()
        .enumerate()
        .map(|(i, p)| mhd(colors, p.colors()).map(|d| (d, i)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(count).map(|(_, i)| i).collect())
}

/// Assigns unordered observed colors to slots of a sorted training set.
///
/// The exemplars are the nearest training palettes by MHD; slot `h` is
/// represented by the set of the exemplars' colors in slot `h`, and the
/// observed colors are matched to slots by minimum-cost assignment.
pub fn align_partial(observed: &[LabColor], training: &[Palette]) -> Result<PartialPalette> {
    let first = training.first().ok_or(Error::EmptyPaletteSet)?;
    let k = first.k();
    if observed.is_empty() {
        return Err(Error::EmptyColorSet);
    }
    if observed.len() > k {
        return Err(Error::SizeMismatch {
            expected: k,
            found: observed.len(),
        });
    }
    let exemplars = nearest_palettes(observed, training, ALIGN_EXEMPLARS)?;
    let rows: Vec<Vec<LabColor>> = (0..k)
        .map(|h| exemplars.iter().map(|&e| training[e][h]).collect())
        .collect();
    let mut entries = vec![vec![0.0; k]; k];
    for (i, o) in observed.iter().enumerate() {
        for (h, row) in rows.iter().enumerate() {
            entries[i][h] = mhd(std::slice::from_ref(o), row)?;
        }
    }
    let assignment = hungarian(&CostMatrix::new(entries)?);
    let mut slots = vec![None; k];
    for (i, o) in observed.iter().enumerate() {
        slots[assignment.perm[i]] = Some(*o);
    }
    PartialPalette::new(slots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions {
    pub sim_iters: usize,
    pub clamp_observed: bool,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            sim_iters: 100,
            clamp_observed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub palette: Palette,
    pub latent: Vec<f64>,
    /// Index of the training point the latent search started from.
    pub init_index: usize,
    pub predictive_variance: f64,
}

/// Negative log-likelihood of the observed dims at a latent point, plus the
/// latent prior. Missing dims carry zero precision and drop out.
struct ProjectionObjective<'a> {
    model: &'a GplvmModel,
    dims: Vec<usize>,
    target: Vec<f64>,
}

impl ProjectionObjective<'_> {
    fn eval(&self, x: &DVector<f64>, with_gradient: bool) -> (f64, Option<DVector<f64>>) {
        let m = self.model;
        let q = m.q();
        let n = m.n();
        let xs = x.as_slice();
        let kx = m.kernel_vector(xs);
        let v = m.chol().solve(&kx);
        let var = m.prior_variance() - kx.dot(&v);
        if !(var > 0.0) || !x.iter().all(|c| c.is_finite()) {
            return (f64::INFINITY, with_gradient.then(|| DVector::zeros(q)));
        }
        let w = m.weights();
        let mean = m.data_mean();
        let resid: Vec<f64> = self
            .dims
            .iter()
            .zip(&self.target)
            .map(|(&d, &y)| y - mean[d] - (0..n).map(|i| kx[i] * w[(i, d)]).sum::<f64>())
            .collect();
        let s: f64 = resid.iter().map(|r| r * r).sum();
        let o = self.dims.len() as f64;
        let value = 0.5 * s / var + 0.5 * o * var.ln() + 0.5 * x.norm_squared();
        if !with_gradient {
            return (value, None);
        }

        // dk_i/dx = -gamma (x - x_i) k_i
        let gamma = m.params().gamma;
        let lat = m.latent();
        let jk = DMatrix::from_fn(n, q, |i, c| -gamma * (xs[c] - lat[(i, c)]) * kx[i]);
        let dvar = jk.tr_mul(&v) * -2.0;
        let mut grad = x.clone();
        for (r, &d) in resid.iter().zip(&self.dims) {
            let dmu = jk.tr_mul(&w.column(d));
            grad -= dmu * (r / var);
        }
        grad += dvar * (-0.5 * s / (var * var) + 0.5 * o / var);
        (value, Some(grad))
    }
}

impl Objective for ProjectionObjective<'_> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x, false).0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval(x, true).1.expect("requested")
    }
}

/// Index of the training point nearest to the observation in observed dims.
pub fn nearest_in_observed_dims(model: &GplvmModel, partial: &PartialPalette) -> usize {
    let dims = partial.observed_dims();
    let target = partial.observed_vector();
    let y = model.centered_data();
    let mean = model.data_mean();
    let dist = |i: usize| -> f64 {
        dims.iter()
            .zip(&target)
            .map(|(&d, t)| (y[(i, d)] + mean[d] - t).powi(2))
            .sum()
    };
    (0..model.n()).fold(0, |best, i| if dist(i) < dist(best) { i } else { best })
}

/// Completes a slot-aligned partial palette: starts at the latent point of
/// the training palette nearest in the observed dims, runs `sim_iters`
/// optimizer steps on the observed-only likelihood, then back-projects.
pub fn gplvm_complete(model: &GplvmModel, partial: &PartialPalette, opts: &CompletionOptions) -> Result<Completion> {
    if partial.k() != model.k() {
        return Err(Error::SizeMismatch {
            expected: model.k(),
            found: partial.k(),
        });
    }
    let init_index = nearest_in_observed_dims(model, partial);
    let x0 = DVector::from_vec(model.latent_point(init_index));
    let objective = ProjectionObjective {
        model,
        dims: partial.observed_dims(),
        target: partial.observed_vector(),
    };
    let run = scg::minimize(
        &objective,
        x0,
        &ScgOptions {
            max_iters: opts.sim_iters,
            ..Default::default()
        },
    );
    let latent: Vec<f64> = run.x.iter().copied().collect();
    let (mean, predictive_variance) = model.backproject(&latent);
    let mut palette = Palette::from_vector(&mean)?;
    if opts.clamp_observed {
        palette = partial.clamp(&palette);
    }
    Ok(Completion {
        palette,
        latent,
        init_index,
        predictive_variance,
    })
}
