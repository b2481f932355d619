//! Ordering and completion benchmarks with JSON, CSV and SVG reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bps::{consecutive_distance, kpca_order, SortMethod};
use crate::color::{mhd, LabColor};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::manifold::{
    align_partial, gplvm_complete, train_gplvm, train_pca_gmm, CompletionOptions, GmmConfig, GmmModel, GplvmConfig,
    GplvmModel, PartialPalette,
};
use crate::palette::{load_palette_set, Palette, PaletteSet};
use crate::synth::{planted_palettes, SynthConfig};

/// Synthetic data used when a benchmark config names no (or too few) datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    #[serde(flatten)]
    pub config: SynthConfig,
    /// Independent datasets generated per condition.
    #[serde(default = "one")]
    pub datasets: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingConfig {
    pub datasets: Vec<PathBuf>,
    pub synthetic: Option<SyntheticSource>,
    pub palette_sizes: Vec<usize>,
    pub palettes_per_trial: usize,
    pub repeats: usize,
    pub seed: u64,
    pub methods: Vec<SortMethod>,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            datasets: Vec::new(),
            synthetic: None,
            palette_sizes: vec![4, 5, 6, 7, 8, 9, 10, 12],
            palettes_per_trial: 20,
            repeats: 5,
            seed: 0,
            methods: vec![SortMethod::Bps, SortMethod::Brightness, SortMethod::Hue],
        }
    }
}

/// Completion predictor: model family and the ordering applied to the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompletionMethod {
    #[serde(rename = "gplvm+spf")]
    GplvmSpf,
    #[serde(rename = "gplvm+brightness")]
    GplvmBrightness,
    #[serde(rename = "gplvm+none")]
    GplvmNone,
    #[serde(rename = "gmm+spf")]
    GmmSpf,
    #[serde(rename = "gmm+none")]
    GmmNone,
    #[serde(rename = "retrieval+spf")]
    RetrievalSpf,
    #[serde(rename = "retrieval+none")]
    RetrievalNone,
    #[serde(rename = "mean")]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gplvm,
    Gmm,
    Retrieval,
    Mean,
}

impl CompletionMethod {
    pub const ALL: [CompletionMethod; 8] = [
        CompletionMethod::GplvmSpf,
        CompletionMethod::GplvmBrightness,
        CompletionMethod::GplvmNone,
        CompletionMethod::GmmSpf,
        CompletionMethod::GmmNone,
        CompletionMethod::RetrievalSpf,
        CompletionMethod::RetrievalNone,
        CompletionMethod::Mean,
    ];

    fn parts(self) -> (Family, SortMethod) {
        use CompletionMethod::*;
        match self {
            GplvmSpf => (Family::Gplvm, SortMethod::Bps),
            GplvmBrightness => (Family::Gplvm, SortMethod::Brightness),
            GplvmNone => (Family::Gplvm, SortMethod::None),
            GmmSpf => (Family::Gmm, SortMethod::Bps),
            GmmNone => (Family::Gmm, SortMethod::None),
            RetrievalSpf => (Family::Retrieval, SortMethod::Bps),
            RetrievalNone => (Family::Retrieval, SortMethod::None),
            Mean => (Family::Mean, SortMethod::None),
        }
    }

    pub fn name(self) -> &'static str {
        use CompletionMethod::*;
        match self {
            GplvmSpf => "gplvm+spf",
            GplvmBrightness => "gplvm+brightness",
            GplvmNone => "gplvm+none",
            GmmSpf => "gmm+spf",
            GmmNone => "gmm+none",
            RetrievalSpf => "retrieval+spf",
            RetrievalNone => "retrieval+none",
            Mean => "mean",
        }
    }
}

impl std::str::FromStr for CompletionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CompletionMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown completion method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GplvmSettings {
    pub q: usize,
    pub iters: usize,
}

impl Default for GplvmSettings {
    fn default() -> Self {
        GplvmSettings { q: 4, iters: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmSettings {
    pub d: usize,
    pub components: usize,
    pub max_iters: usize,
}

impl Default for GmmSettings {
    fn default() -> Self {
        GmmSettings {
            d: 8,
            components: 10,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub datasets: Vec<PathBuf>,
    pub synthetic: Option<SyntheticSource>,
    pub train_ratio: f64,
    pub splits: usize,
    pub observed_counts: Vec<usize>,
    pub seed: u64,
    pub methods: Vec<CompletionMethod>,
    pub gplvm: GplvmSettings,
    pub gmm: GmmSettings,
    pub sim_iters: usize,
    /// Copy the observed colors into GPLVM and retrieval predictions.
    pub clamp_observed: bool,
    /// Cap on test palettes per split, taken from the front of the test fold.
    pub max_test_items: Option<usize>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            datasets: Vec::new(),
            synthetic: None,
            train_ratio: 0.6,
            splits: 5,
            observed_counts: vec![4, 3, 2, 1],
            seed: 0,
            methods: CompletionMethod::ALL.to_vec(),
            gplvm: GplvmSettings::default(),
            gmm: GmmSettings::default(),
            sim_iters: 100,
            clamp_observed: true,
            max_test_items: None,
        }
    }
}

/// One measured error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub condition: usize,
    pub dataset: usize,
    /// Repeat index (ordering) or split index (completion).
    pub split: usize,
    pub item: usize,
    pub error: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub method: String,
    pub condition: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// Mean of the per-split means, one entry per split.
    pub split_means: Vec<f64>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub benchmark: String,
    /// What the condition number means: `palette_size` or `observed`.
    pub condition_name: String,
    pub methods: Vec<String>,
    pub conditions: Vec<ConditionSummary>,
    pub records: Vec<Record>,
}

impl BenchReport {
    fn from_records(benchmark: &str, condition_name: &str, methods: Vec<String>, records: Vec<Record>) -> Self {
        let mut groups: BTreeMap<(usize, usize), Vec<&Record>> = BTreeMap::new();
        for r in &records {
            let m = methods.iter().position(|x| *x == r.method).expect("configured method");
            groups.entry((m, r.condition)).or_default().push(r);
        }
        let conditions = groups
            .into_iter()
            .map(|((m, condition), rs)| {
                let n = rs.len() as f64;
                let mean = rs.iter().map(|r| r.error).sum::<f64>() / n;
                let var = if rs.len() > 1 {
                    rs.iter().map(|r| (r.error - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let mut by_split: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
                for r in &rs {
                    let e = by_split.entry(r.split).or_default();
                    e.0 += r.error;
                    e.1 += 1;
                }
                ConditionSummary {
                    method: methods[m].clone(),
                    condition,
                    mean,
                    std: var.sqrt(),
                    count: rs.len(),
                    split_means: by_split.values().map(|(s, c)| s / *c as f64).collect(),
                    runtime_ms: rs.iter().map(|r| r.runtime_ms).sum::<f64>() / n,
                }
            })
            .collect();
        BenchReport {
            benchmark: benchmark.into(),
            condition_name: condition_name.into(),
            methods,
            conditions,
            records,
        }
    }

    pub fn summary(&self, method: &str, condition: usize) -> Option<&ConditionSummary> {
        self.conditions
            .iter()
            .find(|c| c.method == method && c.condition == condition)
    }

    /// Mean error of `method` over all its records.
    pub fn overall_mean(&self, method: &str) -> Option<f64> {
        let errors: Vec<f64> = self.records.iter().filter(|r| r.method == method).map(|r| r.error).collect();
        (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64)
    }

    /// Overall mean of the per-split means of `method`.
    pub fn split_averaged_mean(&self, method: &str) -> Option<f64> {
        let mut by_split: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.method == method) {
            let e = by_split.entry(r.split).or_default();
            e.0 += r.error;
            e.1 += 1;
        }
        (!by_split.is_empty())
            .then(|| by_split.values().map(|(s, c)| s / *c as f64).sum::<f64>() / by_split.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{},mean,std,count,runtime_ms\n", self.condition_name);
        for c in &self.conditions {
            let _ = writeln!(out, "{},{},{},{},{},{}", c.method, c.condition, c.mean, c.std, c.count, c.runtime_ms);
        }
        out
    }

    /// Line chart of mean error per condition, one line per method.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 56.0;
        const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
        let xs: Vec<usize> = {
            let mut v: Vec<usize> = self.conditions.iter().map(|c| c.condition).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let y_max = self.conditions.iter().map(|c| c.mean).fold(0.0, f64::max).max(1e-9) * 1.1;
        let (x_lo, x_hi) = (
            *xs.first().unwrap_or(&0) as f64,
            (*xs.last().unwrap_or(&1) as f64).max(*xs.first().unwrap_or(&0) as f64 + 1.0),
        );
        let px = |x: f64| M + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * M);
        let py = |y: f64| H - M - y / y_max * (H - 2.0 * M);

        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <line x1=\"{M}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{b}\" stroke=\"black\"/>\n",
            b = H - M,
            r = W - M
        );
        for &x in &xs {
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x}</text>",
                px(x as f64),
                H - M + 18.0
            );
        }
        for i in 0..=4 {
            let y = y_max * i as f64 / 4.0;
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y:.3}</text>",
                M - 6.0,
                py(y) + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            W / 2.0,
            H - 12.0,
            self.condition_name
        );
        for (i, method) in self.methods.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = self
                .conditions
                .iter()
                .filter(|c| &c.method == method)
                .map(|c| format!("{:.1},{:.1}", px(c.condition as f64), py(c.mean)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                pts.join(" ")
            );
            let ly = M + 16.0 * i as f64;
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{ly:.1}\" fill=\"{color}\">{method}</text>",
                W - M - 110.0
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `path` (JSON) plus `.csv` and `.svg` siblings.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let write = |p: PathBuf, text: String| std::fs::write(&p, text).map_err(|e| Error::io(p, e));
        write(path.to_path_buf(), serde_json::to_string_pretty(self)?)?;
        write(path.with_extension("csv"), self.to_csv())?;
        write(path.with_extension("svg"), self.to_svg())
    }
}

fn load_datasets(paths: &[PathBuf]) -> Result<Vec<PaletteSet>> {
    paths.iter().map(load_palette_set).collect()
}

fn synthetic_sets(src: &SyntheticSource, k: usize, salt: u64) -> Result<Vec<PaletteSet>> {
    (0..src.datasets)
        .map(|i| {
            let cfg = SynthConfig {
                k,
                seed: derive_seed(src.config.seed, &[salt, k as u64, i as u64]),
                ..src.config
            };
            Ok(planted_palettes(&cfg)?.palettes)
        })
        .collect()
}

/// Mean consecutive distance of KPCA-ordered random subsets after each sort.
pub fn ordering_benchmark(cfg: &OrderingConfig) -> Result<BenchReport> {
    if cfg.repeats == 0 || cfg.palettes_per_trial < 2 {
        return Err(Error::InvalidParameter("need repeats >= 1 and at least 2 palettes per trial".into()));
    }
    let files = load_datasets(&cfg.datasets)?;
    let mut records = Vec::new();
    for &k in &cfg.palette_sizes {
        let mut sets: Vec<PaletteSet> = files.iter().filter(|s| s.k() == k).cloned().collect();
        if let Some(src) = &cfg.synthetic {
            sets.extend(synthetic_sets(src, k, 0)?);
        }
        let usable: Vec<&PaletteSet> = sets.iter().filter(|s| s.len() >= cfg.palettes_per_trial).collect();
        if usable.is_empty() {
            log::warn!("no dataset with {} palettes of size {k}; skipping", cfg.palettes_per_trial);
            continue;
        }
        for (d, set) in usable.iter().enumerate() {
            let trials: Vec<Vec<Record>> = (0..cfg.repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[k as u64, d as u64, r as u64]));
                    let mut pick = index::sample(&mut rng, set.len(), cfg.palettes_per_trial).into_vec();
                    pick.sort_unstable();
                    let ordered = kpca_order(&set.select(&pick)?);
                    cfg.methods
                        .iter()
                        .map(|&m| {
                            let start = Instant::now();
                            let sorted = m.apply(&ordered);
                            let error = consecutive_distance(sorted.palettes())?;
                            Ok(Record {
                                method: m.to_string(),
                                condition: k,
                                dataset: d,
                                split: r,
                                item: 0,
                                error,
                                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            records.extend(trials.into_iter().flatten());
        }
    }
    Ok(BenchReport::from_records(
        "ordering",
        "palette_size",
        cfg.methods.iter().map(|m| m.to_string()).collect(),
        records,
    ))
}

/// Every missing slot set to the mean of the observed colors.
pub fn mean_predict(observed: &[LabColor], k: usize) -> Result<Palette> {
    if observed.is_empty() {
        return Err(Error::EmptyColorSet);
    }
    if observed.len() > k {
        return Err(Error::SizeMismatch {
            expected: k,
            found: observed.len(),
        });
    }
    let n = observed.len() as f64;
    let mean = LabColor::new(
        observed.iter().map(|c| c.l).sum::<f64>() / n,
        observed.iter().map(|c| c.a).sum::<f64>() / n,
        observed.iter().map(|c| c.b).sum::<f64>() / n,
    );
    let mut colors = observed.to_vec();
    colors.resize(k, mean);
    Palette::new(colors)
}

/// Training palette nearest to the observed slots (summed Euclidean slot
/// distance, ties by index).
pub fn retrieval_predict(partial: &PartialPalette, training: &[Palette]) -> Result<Palette> {
    let slots = partial.observed_slots();
    let cost = |p: &Palette| -> f64 { slots.iter().map(|&s| p[s].distance(&partial.slot(s).expect("observed"))).sum() };
    let mut best: Option<(f64, &Palette)> = None;
    for p in training {
        if p.k() != partial.k() {
            return Err(Error::SizeMismatch {
                expected: partial.k(),
                found: p.k(),
            });
        }
        let c = cost(p);
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, p));
        }
    }
    best.map(|(_, p)| p.clone()).ok_or(Error::EmptyPaletteSet)
}

struct SplitModels {
    orderings: BTreeMap<SortMethod, Vec<Palette>>,
    gplvm: BTreeMap<SortMethod, GplvmModel>,
    gmm: BTreeMap<SortMethod, GmmModel>,
}

fn train_split(cfg: &CompletionConfig, train: &PaletteSet, seed: u64) -> Result<SplitModels> {
    let mut orderings = BTreeMap::new();
    for m in &cfg.methods {
        let (_, ord) = m.parts();
        orderings.entry(ord).or_insert_with(|| ord.apply(train).palettes().to_vec());
    }
    let gplvm_jobs: Vec<SortMethod> = cfg
        .methods
        .iter()
        .filter(|m| m.parts().0 == Family::Gplvm)
        .map(|m| m.parts().1)
        .collect();
    let gmm_jobs: Vec<SortMethod> = cfg
        .methods
        .iter()
        .filter(|m| m.parts().0 == Family::Gmm)
        .map(|m| m.parts().1)
        .collect();
    let gplvm = gplvm_jobs
        .par_iter()
        .map(|ord| {
            let gcfg = GplvmConfig {
                q: cfg.gplvm.q,
                iters: cfg.gplvm.iters,
                seed,
            };
            Ok((*ord, train_gplvm(&orderings[ord], &gcfg)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let gmm = gmm_jobs
        .par_iter()
        .map(|ord| {
            let gcfg = GmmConfig {
                d: cfg.gmm.d,
                components: cfg.gmm.components,
                max_iters: cfg.gmm.max_iters,
                seed,
            };
            Ok((*ord, train_pca_gmm(&orderings[ord], &gcfg)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(SplitModels { orderings, gplvm, gmm })
}

fn predict(cfg: &CompletionConfig, models: &SplitModels, method: CompletionMethod, observed: &[LabColor], k: usize) -> Result<Palette> {
    let (family, ord) = method.parts();
    if family == Family::Mean {
        return mean_predict(observed, k);
    }
    let training = &models.orderings[&ord];
    let partial = align_partial(observed, training)?;
    match family {
        Family::Gplvm => {
            let opts = CompletionOptions {
                sim_iters: cfg.sim_iters,
                clamp_observed: cfg.clamp_observed,
            };
            Ok(gplvm_complete(&models.gplvm[&ord], &partial, &opts)?.palette)
        }
        Family::Gmm => models.gmm[&ord].complete(&partial),
        Family::Retrieval => {
            let p = retrieval_predict(&partial, training)?;
            Ok(if cfg.clamp_observed { partial.clamp(&p) } else { p })
        }
        Family::Mean => unreachable!(),
    }
}

/// Train/test splits of `set`; returns (train, test) index lists.
pub fn split_indices(n: usize, train_ratio: f64, seed: u64, split: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[split as u64])));
    let n_train = ((n as f64 * train_ratio).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Hides all but `m` colors of each test palette and scores every method's
/// prediction by MHD to the full palette.
pub fn completion_benchmark(cfg: &CompletionConfig) -> Result<BenchReport> {
    if !(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("train ratio {} outside (0, 1)", cfg.train_ratio)));
    }
    if cfg.splits == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one split and one method".into()));
    }
    let mut sets = load_datasets(&cfg.datasets)?;
    if let Some(src) = &cfg.synthetic {
        sets.extend(synthetic_sets(src, src.config.k, 1)?);
    }
    if sets.is_empty() {
        return Err(Error::EmptyPaletteSet);
    }

    let mut records = Vec::new();
    for (d, set) in sets.iter().enumerate() {
        let k = set.k();
        if let Some(&m) = cfg.observed_counts.iter().find(|&&m| m == 0 || m >= k) {
            return Err(Error::InvalidParameter(format!("cannot observe {m} of {k} colors")));
        }
        for split in 0..cfg.splits {
            let split_seed = derive_seed(cfg.seed, &[d as u64, split as u64]);
            let (train_idx, mut test_idx) = split_indices(set.len(), cfg.train_ratio, derive_seed(cfg.seed, &[d as u64]), split);
            if let Some(cap) = cfg.max_test_items {
                test_idx.truncate(cap);
            }
            let models = train_split(cfg, &set.select(&train_idx)?, split_seed)?;
            let jobs: Vec<(usize, usize)> = test_idx
                .iter()
                .flat_map(|&t| cfg.observed_counts.iter().map(move |&m| (t, m)))
                .collect();
            let split_records: Vec<Vec<Record>> = jobs
                .par_iter()
                .map(|&(t, m)| {
                    let truth = &set[t];
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(split_seed, &[t as u64, m as u64]));
                    let observed: Vec<LabColor> = index::sample(&mut rng, k, m).iter().map(|i| truth[i]).collect();
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let start = Instant::now();
                            let pred = predict(cfg, &models, method, &observed, k)?;
                            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                            Ok(Record {
                                method: method.name().into(),
                                condition: m,
                                dataset: d,
                                split,
                                item: t,
                                error: mhd(pred.colors(), truth.colors())?,
                                runtime_ms,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            records.extend(split_records.into_iter().flatten());
        }
    }
    Ok(BenchReport::from_records(
        "completion",
        "observed",
        cfg.methods.iter().map(|m| m.name().to_string()).collect(),
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_predict_examples() {
        let c = LabColor::new(0.3, 0.4, 0.5);
        assert_eq!(mean_predict(&[c], 4).unwrap().colors(), &[c; 4]);
        let d = LabColor::new(0.5, 0.6, 0.7);
        let p = mean_predict(&[c, d], 3).unwrap();
        assert!(p[2].distance(&LabColor::new(0.4, 0.5, 0.6)) < 1e-15);
        assert!(mean_predict(&[], 3).is_err());
    }

    #[test]
    fn retrieval_over_one_palette() {
        let p = Palette::new(vec![LabColor::new(0.1, 0.2, 0.3), LabColor::new(0.6, 0.5, 0.4)]).unwrap();
        let partial = PartialPalette::new(vec![None, Some(LabColor::new(0.9, 0.9, 0.9))]).unwrap();
        assert_eq!(retrieval_predict(&partial, std::slice::from_ref(&p)).unwrap(), p);
        assert!(retrieval_predict(&partial, &[]).is_err());
    }

    #[test]
    fn splits_are_pure_and_disjoint() {
        let (a, b) = split_indices(50, 0.6, 9, 2);
        assert_eq!((a.len(), b.len()), (30, 20));
        assert_eq!(split_indices(50, 0.6, 9, 2), (a.clone(), b.clone()));
        assert_ne!(split_indices(50, 0.6, 9, 3).0, a);
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn method_names_round_trip() {
        for m in CompletionMethod::ALL {
            assert_eq!(m.name().parse::<CompletionMethod>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
    }
}
