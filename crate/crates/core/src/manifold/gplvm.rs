//! Gaussian process latent variable model with a shared RBF kernel.
//!
//! The likelihood treats the `D = 3K` output columns as independent GP draws
//! over the same latent points. A unit Gaussian prior on the latent points
//! fixes the latent scale, which the RBF kernel alone leaves free.
//! Hyperparameters are optimized in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scg::{self, Objective, ScgOptions};
use crate::error::{Error, Result};
use crate::palette::{Palette, MAX_PALETTE_SIZE};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal jitter tried in order when the kernel matrix fails to factor.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// RBF variance, RBF inverse squared lengthscale and noise precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl KernelParams {
    fn to_log(self) -> [f64; 3] {
        [self.alpha.ln(), self.gamma.ln(), self.beta.ln()]
    }

    fn from_log(v: &[f64]) -> Self {
        KernelParams {
            alpha: v[0].exp(),
            gamma: v[1].exp(),
            beta: v[2].exp(),
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.alpha, self.gamma, self.beta]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    /// RBF part of the covariance between two latent points.
    pub fn rbf(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.alpha * (-0.5 * self.gamma * r2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GplvmConfig {
    pub q: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for GplvmConfig {
    fn default() -> Self {
        GplvmConfig {
            q: 4,
            iters: 200,
            seed: 0,
        }
    }
}

fn sq_dists(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
            r[(i, j)] = d;
            r[(j, i)] = d;
        }
    }
    r
}

/// RBF part of the kernel matrix, and its Cholesky factor with noise added.
fn factor_kernel(x: &DMatrix<f64>, p: &KernelParams) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    let n = x.nrows();
    let rbf = sq_dists(x).map(|r2| p.alpha * (-0.5 * p.gamma * r2).exp());
    for &jitter in &JITTER_LADDER {
        let mut k = rbf.clone();
        for i in 0..n {
            k[(i, i)] += 1.0 / p.beta + jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            if jitter > 0.0 {
                log::debug!("kernel factored with jitter {jitter:e}");
            }
            return Ok((rbf, chol));
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Negative log-likelihood (data term plus latent prior) of centered data `y`
/// at latent points `x`, optionally with its gradient in the packed
/// `[x row-major, ln alpha, ln gamma, ln beta]` parameterization.
pub fn negative_log_likelihood(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    p: &KernelParams,
    with_gradient: bool,
) -> Result<(f64, Option<DVector<f64>>)> {
    let (n, d) = (y.nrows() as f64, y.ncols() as f64);
    let q = x.ncols();
    let (rbf, chol) = factor_kernel(x, p)?;
    let a = chol.solve(y);
    let data_fit: f64 = a.component_mul(y).sum();
    let prior = 0.5 * x.norm_squared() + 0.5 * n * q as f64 * LN_2PI;
    let nll = 0.5 * d * log_det(&chol) + 0.5 * data_fit + 0.5 * n * d * LN_2PI + prior;
    if !nll.is_finite() {
        return Err(Error::NonFinite(format!("negative log-likelihood {nll}")));
    }
    if !with_gradient {
        return Ok((nll, None));
    }

    // dL/dK = (D K^-1 - A A^T) / 2
    let k_inv = chol.inverse();
    let g = (k_inv * d - &a * a.transpose()) * 0.5;
    let m = g.component_mul(&rbf);
    let r2 = sq_dists(x);

    let rows = x.nrows();
    let mut grad = DVector::zeros(rows * q + 3);
    let row_sums: Vec<f64> = (0..rows).map(|i| m.row(i).sum()).collect();
    let mx = &m * x;
    for i in 0..rows {
        for c in 0..q {
            grad[i * q + c] = -2.0 * p.gamma * (row_sums[i] * x[(i, c)] - mx[(i, c)]) + x[(i, c)];
        }
    }
    grad[rows * q] = m.sum();
    grad[rows * q + 1] = -0.5 * p.gamma * m.component_mul(&r2).sum();
    grad[rows * q + 2] = -g.trace() / p.beta;
    Ok((nll, Some(grad)))
}

fn pack(x: &DMatrix<f64>, p: &KernelParams) -> DVector<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(x.len() + 3);
    for i in 0..x.nrows() {
        v.extend(x.row(i).iter());
    }
    v.extend(p.to_log());
    DVector::from_vec(v)
}

fn unpack(v: &DVector<f64>, n: usize, q: usize) -> (DMatrix<f64>, KernelParams) {
    let x = DMatrix::from_row_slice(n, q, &v.as_slice()[..n * q]);
    (x, KernelParams::from_log(&v.as_slice()[n * q..]))
}

struct TrainingObjective<'a> {
    y: &'a DMatrix<f64>,
    q: usize,
}

impl Objective for TrainingObjective<'_> {
    fn value(&self, v: &DVector<f64>) -> f64 {
        let (x, p) = unpack(v, self.y.nrows(), self.q);
        if !p.is_valid() {
            return f64::INFINITY;
        }
        negative_log_likelihood(self.y, &x, &p, false).map_or(f64::INFINITY, |r| r.0)
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let (x, p) = unpack(v, self.y.nrows(), self.q);
        match negative_log_likelihood(self.y, &x, &p, true) {
            Ok((_, Some(g))) if p.is_valid() => g,
            _ => DVector::zeros(v.len()),
        }
    }
}

/// A trained GPLVM with its factorized kernel cached for prediction.
#[derive(Debug, Clone)]
pub struct GplvmModel {
    k: usize,
    data_mean: DVector<f64>,
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    params: KernelParams,
    degenerate: bool,
    training_log: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// K^-1 Y
    weights: DMatrix<f64>,
}

/// Serialized form, see [`GplvmModel::to_file`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GplvmFile {
    pub k: usize,
    pub q: usize,
    pub data_mean: Vec<f64>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    pub hyperparams: KernelParams,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default)]
    pub training_log: Vec<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format(format!("matrix rows must have {cols} columns")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

/// Top-`q` principal directions of the rows of `y`, largest first, with a
/// deterministic sign (largest-magnitude entry positive).
pub(crate) fn principal_axes(y: &DMatrix<f64>, q: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = y.nrows().max(1) as f64;
    let cov = y.transpose() * y / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let d = y.ncols();
    let mut axes = DMatrix::zeros(d, q);
    let mut values = Vec::with_capacity(q);
    for (c, &i) in order.iter().take(q).enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = (0..d).fold(0, |best, r| if v[r].abs() > v[best].abs() { r } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        axes.set_column(c, &(v * sign));
        values.push(eig.eigenvalues[i].max(0.0));
    }
    (axes, values)
}

pub(crate) fn palettes_to_matrix(palettes: &[Palette]) -> DMatrix<f64> {
    let d = palettes[0].k() * 3;
    let flat: Vec<f64> = palettes.iter().flat_map(|p| p.to_vector()).collect();
    DMatrix::from_row_slice(palettes.len(), d, &flat)
}

pub(crate) fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), (0..m.ncols()).map(|c| m.column(c).mean()))
}

/// Fits a GPLVM to palettes whose slots are already in correspondence.
///
/// Latent points start from PCA of the centered data; scaled conjugate
/// gradients then optimizes latent points and kernel parameters jointly.
pub fn train_gplvm(palettes: &[Palette], cfg: &GplvmConfig) -> Result<GplvmModel> {
    let n = palettes.len();
    let q = cfg.q;
    if q == 0 {
        return Err(Error::InvalidParameter("latent dimension must be >= 1".into()));
    }
    if n < 2 * q {
        return Err(Error::TooFewPalettes { needed: 2 * q, got: n });
    }
    let k = palettes[0].k();
    if let Some(p) = palettes.iter().find(|p| p.k() != k) {
        return Err(Error::SizeMismatch { expected: k, found: p.k() });
    }
    if q >= 3 * k {
        return Err(Error::InvalidParameter(format!("latent dimension {q} must be below {}", 3 * k)));
    }

    let raw = palettes_to_matrix(palettes);
    let mean = column_mean(&raw);
    let y = DMatrix::from_fn(n, 3 * k, |i, j| raw[(i, j)] - mean[j]);
    let variance = y.norm_squared() / (n * 3 * k) as f64;

    if variance < 1e-12 {
        let params = KernelParams { alpha: 1.0, gamma: 1.0, beta: 1e6 };
        return GplvmModel::assemble(k, mean, y, DMatrix::zeros(n, q), params, true, Vec::new());
    }

    let (axes, values) = principal_axes(&y, q);
    let scale = values[0].sqrt().max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = (&y * axes / scale).map(|v| v + 1e-4 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
    let p0 = KernelParams {
        alpha: variance,
        gamma: 1.0,
        beta: 1.0 / (0.1 * variance),
    };

    let objective = TrainingObjective { y: &y, q };
    let start = pack(&x0, &p0);
    if !objective.value(&start).is_finite() {
        return Err(Error::NonFinite("initial negative log-likelihood".into()));
    }
    let run = scg::minimize(
        &objective,
        start,
        &ScgOptions {
            max_iters: cfg.iters,
            ..Default::default()
        },
    );
    if run.stalled_non_finite {
        return Err(Error::NonFinite(format!(
            "optimization stalled on non-finite likelihood after {} iterations (last finite value {})",
            run.iterations, run.value
        )));
    }
    let (x, params) = unpack(&run.x, n, q);
    GplvmModel::assemble(k, mean, y, x, params, false, run.accepted)
}

impl GplvmModel {
    fn assemble(
        k: usize,
        data_mean: DVector<f64>,
        y: DMatrix<f64>,
        x: DMatrix<f64>,
        params: KernelParams,
        degenerate: bool,
        training_log: Vec<f64>,
    ) -> Result<Self> {
        if !params.is_valid() {
            return Err(Error::InvalidParameter(format!("kernel parameters {params:?}")));
        }
        let (_, chol) = factor_kernel(&x, &params)?;
        let weights = chol.solve(&y);
        Ok(GplvmModel {
            k,
            data_mean,
            y,
            x,
            params,
            degenerate,
            training_log,
            chol,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn output_dim(&self) -> usize {
        3 * self.k
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn latent(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn latent_point(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn data_mean(&self) -> &DVector<f64> {
        &self.data_mean
    }

    pub fn centered_data(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// True when all training palettes were identical; the model then
    /// predicts that palette everywhere.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Negative log-likelihood after each accepted optimizer step.
    pub fn training_log(&self) -> &[f64] {
        &self.training_log
    }

    /// Training vectors in the original (uncentered) feature space.
    pub fn training_vector(&self, i: usize) -> Vec<f64> {
        (0..self.output_dim()).map(|j| self.y[(i, j)] + self.data_mean[j]).collect()
    }

    pub fn training_palettes(&self) -> Vec<Palette> {
        (0..self.n())
            .map(|i| Palette::from_vector(&self.training_vector(i)).expect("3K-dimensional rows"))
            .collect()
    }

    pub fn nll(&self) -> Result<f64> {
        negative_log_likelihood(&self.y, &self.x, &self.params, false).map(|r| r.0)
    }

    /// Gradient with respect to `[latent row-major, ln alpha, ln gamma, ln beta]`.
    pub fn nll_gradient(&self) -> Result<DVector<f64>> {
        negative_log_likelihood(&self.y, &self.x, &self.params, true).map(|r| r.1.expect("requested"))
    }

    pub(crate) fn kernel_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| {
                let r2: f64 = x.iter().enumerate().map(|(c, v)| (v - self.x[(i, c)]).powi(2)).sum();
                self.params.alpha * (-0.5 * self.params.gamma * r2).exp()
            }),
        )
    }

    pub(crate) fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub(crate) fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub(crate) fn prior_variance(&self) -> f64 {
        self.params.alpha + 1.0 / self.params.beta
    }

    /// GP posterior mean (in feature space) and predictive variance, shared by
    /// all output dimensions, at latent point `x`.
    pub fn backproject(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let kx = self.kernel_vector(x);
        let mean = self.weights.tr_mul(&kx);
        let v = self.chol.solve(&kx);
        let var = (self.prior_variance() - kx.dot(&v)).max(f64::MIN_POSITIVE);
        let out = (0..self.output_dim()).map(|j| mean[j] + self.data_mean[j]).collect();
        (out, var)
    }

    pub fn backproject_palette(&self, x: &[f64]) -> Palette {
        Palette::from_vector(&self.backproject(x).0).expect("3K-dimensional output")
    }

    /// Log-likelihood of the predicted mean under the predictive Gaussian at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let (_, var) = self.backproject(x);
        -0.5 * self.output_dim() as f64 * (LN_2PI + var.ln())
    }

    /// The two latent dimensions with the largest variance across training points.
    pub fn most_significant_dims(&self) -> (usize, usize) {
        let mut vars: Vec<(usize, f64)> = (0..self.q())
            .map(|c| {
                let col = self.x.column(c);
                let m = col.mean();
                (c, col.iter().map(|v| (v - m).powi(2)).sum::<f64>())
            })
            .collect();
        vars.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        match vars.len() {
            1 => (0, 0),
            _ => (vars[0].0, vars[1].0),
        }
    }

    pub fn to_file(&self) -> GplvmFile {
        GplvmFile {
            k: self.k,
            q: self.q(),
            data_mean: self.data_mean.iter().copied().collect(),
            x: rows_of(&self.x),
            y: rows_of(&self.y),
            hyperparams: self.params,
            degenerate: self.degenerate,
            training_log: self.training_log.clone(),
        }
    }

    pub fn from_file(f: GplvmFile) -> Result<Self> {
        if !(1..=MAX_PALETTE_SIZE).contains(&f.k) {
            return Err(Error::InvalidPaletteSize(f.k));
        }
        let d = 3 * f.k;
        if f.data_mean.len() != d || f.x.len() != f.y.len() || f.x.is_empty() || f.q == 0 {
            return Err(Error::Format("inconsistent GPLVM dimensions".into()));
        }
        let x = matrix_from_rows(&f.x, f.q)?;
        let y = matrix_from_rows(&f.y, d)?;
        GplvmModel::assemble(
            f.k,
            DVector::from_vec(f.data_mean),
            y,
            x,
            f.hyperparams,
            f.degenerate,
            f.training_log,
        )
    }

    /// Copy with the latent points and kernel parameters replaced.
    pub fn with_state(&self, x: DMatrix<f64>, params: KernelParams) -> Result<Self> {
        if x.shape() != self.x.shape() {
            return Err(Error::InvalidParameter("latent shape mismatch".into()));
        }
        GplvmModel::assemble(
            self.k,
            self.data_mean.clone(),
            self.y.clone(),
            x,
            params,
            self.degenerate,
            self.training_log.clone(),
        )
    }
}

/// Log-likelihood grid over a 2-D slice of latent space (other dims at 0).
///
/// `values[row][col]` is evaluated at the cell center
/// `(x_min + (col + 0.5) * dx, y_min + (row + 0.5) * dy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub dims: [usize; 2],
    pub resolution: usize,
    /// `[x_min, x_max, y_min, y_max]` in latent coordinates.
    pub extents: [f64; 4],
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn cell_area(&self) -> f64 {
        let [x0, x1, y0, y1] = self.extents;
        (x1 - x0) * (y1 - y0) / (self.resolution * self.resolution) as f64
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.extents;
        let r = self.resolution as f64;
        (
            x0 + (col as f64 + 0.5) * (x1 - x0) / r,
            y0 + (row as f64 + 0.5) * (y1 - y0) / r,
        )
    }
}

/// Bounding box of the training latents on `dims`, widened by 10% per side.
pub fn default_extents(model: &GplvmModel, dims: (usize, usize)) -> [f64; 4] {
    let span = |c: usize| {
        let col = model.latent().column(c);
        let lo = col.min();
        let hi = col.max();
        let margin = 0.1 * (hi - lo).max(1e-6);
        (lo - margin, hi + margin)
    };
    let (x0, x1) = span(dims.0);
    let (y0, y1) = span(dims.1);
    [x0, x1, y0, y1]
}

/// Evaluates [`GplvmModel::log_density`] on a `resolution x resolution` grid.
pub fn gplvm_density(
    model: &GplvmModel,
    dims: Option<(usize, usize)>,
    resolution: usize,
    extents: Option<[f64; 4]>,
) -> Result<DensityGrid> {
    let dims = dims.unwrap_or_else(|| model.most_significant_dims());
    if dims.0 == dims.1 || dims.0 >= model.q() || dims.1 >= model.q() {
        return Err(Error::InvalidParameter(format!(
            "latent dims {dims:?} must be distinct and below {}",
            model.q()
        )));
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be >= 1".into()));
    }
    let extents = match extents {
        Some(e) if e.iter().all(|v| v.is_finite()) && e[1] > e[0] && e[3] > e[2] => e,
        Some(e) => return Err(Error::InvalidParameter(format!("bad extents {e:?}"))),
        None => default_extents(model, dims),
    };
    let mut grid = DensityGrid {
        dims: [dims.0, dims.1],
        resolution,
        extents,
        values: Vec::with_capacity(resolution),
    };
    let mut point = vec![0.0; model.q()];
    for row in 0..resolution {
        let mut values = Vec::with_capacity(resolution);
        for col in 0..resolution {
            let (px, py) = grid.cell_center(row, col);
            point[dims.0] = px;
            point[dims.1] = py;
            values.push(model.log_density(&point));
        }
        grid.values.push(values);
    }
    Ok(grid)
}
