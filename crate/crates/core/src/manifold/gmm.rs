//! PCA followed by a full-covariance Gaussian mixture, with Gaussian mixture
//! regression for completion.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gplvm::{column_mean, palettes_to_matrix, principal_axes, JITTER_LADDER};
use super::PartialPalette;
use crate::color::LabColor;
use crate::error::{Error, Result};
use crate::palette::{Palette, MAX_PALETTE_SIZE};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    /// PCA dimension; capped at 3K.
    pub d: usize,
    pub components: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            d: 8,
            components: 10,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

/// Serialized form, see [`GmmModel::to_file`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFile {
    pub k: usize,
    pub q: usize,
    pub data_mean: Vec<f64>,
    /// 3K rows of `q` basis coefficients.
    pub pca_basis: Vec<Vec<f64>>,
    pub residual_variance: f64,
    pub mixture: Mixture,
    #[serde(default)]
    pub training_log: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    k: usize,
    data_mean: DVector<f64>,
    basis: DMatrix<f64>,
    residual_variance: f64,
    components: Vec<Component>,
    training_log: Vec<f64>,
}

fn factor(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let scale = (m.trace() / m.nrows() as f64).abs().max(1e-300);
    for &j in &JITTER_LADDER {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += j * scale;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

fn log_normal(x: &DVector<f64>, mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let diff = x - mean;
    let maha = diff.dot(&chol.solve(&diff));
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (diff.len() as f64 * LN_2PI + log_det + maha)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn plus_plus_seeds(z: &[DVector<f64>], c: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut centers = vec![z[rng.random_range(0..z.len())].clone()];
    let mut d2: Vec<f64> = z.iter().map(|p| (p - &centers[0]).norm_squared()).collect();
    while centers.len() < c {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..z.len())
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut idx = z.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        };
        let center = z[pick].clone();
        for (d, p) in d2.iter_mut().zip(z) {
            *d = d.min((p - &center).norm_squared());
        }
        centers.push(center);
    }
    centers
}

/// Fits the PCA basis and the mixture by EM.
///
/// Covariances get a fixed ridge `eps = 1e-6 * trace / d` through a MAP
/// update `(S_c + eps I) / N_c`; the training log holds the matching
/// penalized log-likelihood, which EM never decreases.
pub fn train_pca_gmm(palettes: &[Palette], cfg: &GmmConfig) -> Result<GmmModel> {
    let n = palettes.len();
    if palettes.is_empty() {
        return Err(Error::EmptyPaletteSet);
    }
    let k = palettes[0].k();
    if let Some(p) = palettes.iter().find(|p| p.k() != k) {
        return Err(Error::SizeMismatch { expected: k, found: p.k() });
    }
    let d = cfg.d.min(3 * k);
    let c = cfg.components;
    if d == 0 || c == 0 {
        return Err(Error::InvalidParameter("PCA dimension and component count must be >= 1".into()));
    }
    if n <= d || n <= c {
        return Err(Error::TooFewPalettes { needed: d.max(c) + 1, got: n });
    }

    let raw = palettes_to_matrix(palettes);
    let mean = column_mean(&raw);
    let y = DMatrix::from_fn(n, 3 * k, |i, j| raw[(i, j)] - mean[j]);
    let (basis, kept) = principal_axes(&y, d);
    let (_, all) = principal_axes(&y, 3 * k);
    let residual_variance = if d < 3 * k {
        all[d..].iter().sum::<f64>() / (3 * k - d) as f64
    } else {
        0.0
    };
    let zm = &y * &basis;
    let z: Vec<DVector<f64>> = (0..n).map(|i| zm.row(i).transpose()).collect();

    let total_var: f64 = kept.iter().sum();
    let eps = (1e-6 * total_var / d as f64).max(1e-12);
    let ridge = DMatrix::<f64>::identity(d, d) * eps;
    let global = DMatrix::from_diagonal(&DVector::from_iterator(d, kept.iter().map(|v| v.max(eps))));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut comps: Vec<Component> = plus_plus_seeds(&z, c, &mut rng)
        .into_iter()
        .map(|m| Component {
            weight: 1.0 / c as f64,
            mean: m,
            cov: global.clone(),
        })
        .collect();

    let mut log = Vec::new();
    let mut resp = DMatrix::<f64>::zeros(n, c);
    for iter in 0..=cfg.max_iters {
        let chols: Vec<Cholesky<f64, Dyn>> = comps.iter().map(|co| factor(&co.cov)).collect::<Result<_>>()?;
        let mut ll = 0.0;
        for (i, zi) in z.iter().enumerate() {
            let lp: Vec<f64> = comps
                .iter()
                .zip(&chols)
                .map(|(co, ch)| co.weight.ln() + log_normal(zi, &co.mean, ch))
                .collect();
            let lse = log_sum_exp(&lp);
            ll += lse;
            for (j, v) in lp.iter().enumerate() {
                resp[(i, j)] = (v - lse).exp();
            }
        }
        let penalty: f64 = chols.iter().map(|ch| 0.5 * eps * ch.inverse().trace()).sum();
        let objective = ll - penalty;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!("EM log-likelihood at iteration {iter}")));
        }
        let converged = log
            .last()
            .is_some_and(|prev: &f64| (objective - prev).abs() <= 1e-10 * objective.abs().max(1.0));
        log.push(objective);
        if converged || iter == cfg.max_iters {
            break;
        }

        for (j, co) in comps.iter_mut().enumerate() {
            let nj: f64 = resp.column(j).sum();
            co.weight = nj / n as f64;
            if nj < 1e-10 {
                continue;
            }
            let mut m = DVector::zeros(d);
            for (i, zi) in z.iter().enumerate() {
                m += zi * resp[(i, j)];
            }
            m /= nj;
            let mut s = ridge.clone();
            for (i, zi) in z.iter().enumerate() {
                let diff = zi - &m;
                s += &diff * diff.transpose() * resp[(i, j)];
            }
            co.mean = m;
            co.cov = s / nj;
        }
    }

    let model = GmmModel {
        k,
        data_mean: mean,
        basis,
        residual_variance,
        components: comps,
        training_log: log,
    };
    model.validate()?;
    Ok(model)
}

impl GmmModel {
    fn validate(&self) -> Result<()> {
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.is_empty() || (sum - 1.0).abs() > 1e-6 || self.components.iter().any(|c| c.weight < 0.0) {
            return Err(Error::Format(format!("mixture weights sum to {sum}")));
        }
        for c in &self.components {
            if Cholesky::new(c.cov.clone()).is_none() {
                return Err(Error::NotPositiveDefinite { jitter: 0.0 });
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// PCA dimension.
    pub fn q(&self) -> usize {
        self.basis.ncols()
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Penalized log-likelihood at each EM iteration.
    pub fn training_log(&self) -> &[f64] {
        &self.training_log
    }

    /// Mean and covariance of component `c` in the 3K-dimensional feature space.
    pub fn feature_gaussian(&self, c: usize) -> (DVector<f64>, DMatrix<f64>) {
        let comp = &self.components[c];
        let mean = &self.data_mean + &self.basis * &comp.mean;
        let d = self.data_mean.len();
        let cov = &self.basis * &comp.cov * self.basis.transpose()
            + DMatrix::<f64>::identity(d, d) * self.residual_variance;
        (mean, cov)
    }

    /// Gaussian mixture regression of the missing slots on the observed ones.
    /// Observed slots are returned unchanged.
    pub fn complete(&self, partial: &PartialPalette) -> Result<Palette> {
        if partial.k() != self.k {
            return Err(Error::SizeMismatch {
                expected: self.k,
                found: partial.k(),
            });
        }
        let obs: Vec<usize> = partial.observed_dims();
        if obs.is_empty() {
            return Err(Error::EmptyColorSet);
        }
        let dim = 3 * self.k;
        let missing: Vec<usize> = (0..dim).filter(|i| !obs.contains(i)).collect();
        let y_o = DVector::from_iterator(obs.len(), partial.observed_vector());

        let mut log_w = Vec::with_capacity(self.components.len());
        let mut conds = Vec::with_capacity(self.components.len());
        for c in 0..self.components.len() {
            let (mean, cov) = self.feature_gaussian(c);
            let s_oo = cov.select_rows(&obs).select_columns(&obs);
            let s_mo = cov.select_rows(&missing).select_columns(&obs);
            let mu_o = mean.select_rows(&obs);
            let chol = factor(&s_oo)?;
            let cond = mean.select_rows(&missing) + &s_mo * chol.solve(&(&y_o - &mu_o));
            log_w.push(self.components[c].weight.ln() + log_normal(&y_o, &mu_o, &chol));
            conds.push(cond);
        }
        let lse = log_sum_exp(&log_w);
        let mut prediction = DVector::zeros(missing.len());
        for (lw, cond) in log_w.iter().zip(&conds) {
            prediction += cond * (lw - lse).exp();
        }

        let mut full = vec![0.0; dim];
        for (i, &o) in obs.iter().enumerate() {
            full[o] = y_o[i];
        }
        for (i, &m) in missing.iter().enumerate() {
            full[m] = prediction[i];
        }
        let colors = (0..self.k)
            .map(|s| match partial.slot(s) {
                Some(c) => c,
                None => LabColor::from_slice(&full[3 * s..3 * s + 3]).clamped(),
            })
            .collect();
        Palette::new(colors)
    }

    pub fn to_file(&self) -> GmmFile {
        let mat_rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        GmmFile {
            k: self.k,
            q: self.q(),
            data_mean: self.data_mean.iter().copied().collect(),
            pca_basis: mat_rows(&self.basis),
            residual_variance: self.residual_variance,
            mixture: Mixture {
                weights: self.weights(),
                means: self.components.iter().map(|c| c.mean.iter().copied().collect()).collect(),
                covariances: self.components.iter().map(|c| mat_rows(&c.cov)).collect(),
            },
            training_log: self.training_log.clone(),
        }
    }

    pub fn from_file(f: GmmFile) -> Result<Self> {
        if !(1..=MAX_PALETTE_SIZE).contains(&f.k) {
            return Err(Error::InvalidPaletteSize(f.k));
        }
        let dim = 3 * f.k;
        let q = f.q;
        let bad = |what: &str| Error::Format(format!("inconsistent mixture: {what}"));
        if f.data_mean.len() != dim || f.pca_basis.len() != dim || f.pca_basis.iter().any(|r| r.len() != q) {
            return Err(bad("basis shape"));
        }
        let c = f.mixture.weights.len();
        if f.mixture.means.len() != c || f.mixture.covariances.len() != c {
            return Err(bad("component count"));
        }
        let mut components = Vec::with_capacity(c);
        for i in 0..c {
            let m = &f.mixture.means[i];
            let s = &f.mixture.covariances[i];
            if m.len() != q || s.len() != q || s.iter().any(|r| r.len() != q) {
                return Err(bad("component shape"));
            }
            components.push(Component {
                weight: f.mixture.weights[i],
                mean: DVector::from_column_slice(m),
                cov: DMatrix::from_fn(q, q, |r, col| s[r][col]),
            });
        }
        if !(f.residual_variance >= 0.0) {
            return Err(bad("residual variance"));
        }
        let model = GmmModel {
            k: f.k,
            data_mean: DVector::from_vec(f.data_mean),
            basis: DMatrix::from_fn(dim, q, |r, col| f.pca_basis[r][col]),
            residual_variance: f.residual_variance,
            components,
            training_log: f.training_log,
        };
        model.validate()?;
        Ok(model)
    }
}
