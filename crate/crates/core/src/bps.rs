//! Binary Palette Sort: recursive partition, row-set alignment and merge.
//!
//! The palette order of the input is kept; only the colors inside each
//! palette are permuted so that slot `k` holds corresponding colors across
//! the whole set. Partitioning projects palettes onto the leading kernel
//! principal component of an MHD-derived kernel and splits at the median.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::assignment::{align_row_sets, hungarian, row_cost_matrix};
use crate::color::{color_dist, mhd, LabColor};
use crate::error::{Error, Result};
use crate::palette::{DatasetFile, Palette, PaletteSet, COLOR_SPACE_TAG};

/// Palettes with their colors reordered, plus the permutation applied to each.
///
/// `provenance[n][k]` is the input slot of the color now at slot `k` of palette `n`.
/// Unlike [`PaletteSet`] this may be empty, which [`merge`] relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedPaletteSet {
    k: usize,
    palettes: Vec<Palette>,
    provenance: Vec<Vec<usize>>,
}

impl SortedPaletteSet {
    pub fn empty(k: usize) -> Self {
        SortedPaletteSet {
            k,
            palettes: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Wraps palettes as already sorted, with identity provenance.
    pub fn identity(set: &PaletteSet) -> Self {
        SortedPaletteSet {
            k: set.k(),
            palettes: set.palettes().to_vec(),
            provenance: vec![(0..set.k()).collect(); set.len()],
        }
    }

    pub fn from_parts(set: PaletteSet, provenance: Vec<Vec<usize>>) -> Result<Self> {
        if provenance.len() != set.len() {
            return Err(Error::SizeMismatch {
                expected: set.len(),
                found: provenance.len(),
            });
        }
        for perm in &provenance {
            let mut seen = vec![false; set.k()];
            if perm.len() != set.k() || perm.iter().any(|&i| i >= set.k() || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidParameter(format!("provenance {perm:?} is not a permutation")));
            }
        }
        Ok(SortedPaletteSet {
            k: set.k(),
            palettes: set.into_palettes(),
            provenance,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.palettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.palettes.is_empty()
    }

    pub fn palettes(&self) -> &[Palette] {
        &self.palettes
    }

    pub fn provenance(&self) -> &[Vec<usize>] {
        &self.provenance
    }

    pub fn to_set(&self) -> Result<PaletteSet> {
        PaletteSet::new(self.palettes.clone())
    }

    pub fn to_dataset(&self) -> DatasetFile {
        DatasetFile {
            k: self.k,
            colors_space: COLOR_SPACE_TAG.to_string(),
            palettes: self.palettes.clone(),
            provenance: Some(self.provenance.clone()),
        }
    }

    /// Reads back a sorted dataset; a missing provenance means identity.
    pub fn from_dataset(file: DatasetFile) -> Result<Self> {
        let provenance = file.provenance.clone();
        let set = file.into_set()?;
        match provenance {
            Some(p) => SortedPaletteSet::from_parts(set, p),
            None => Ok(SortedPaletteSet::identity(&set)),
        }
    }
}

/// Binary split of a palette set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub left: PaletteSet,
    pub right: PaletteSet,
    /// `true` where the input palette went to `left`.
    pub membership: Vec<bool>,
}

/// Pairwise MHD between palettes viewed as color sets.
pub fn mhd_matrix(palettes: &[Palette]) -> DMatrix<f64> {
    let n = palettes.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = mhd(palettes[i].colors(), palettes[j].colors()).expect("palettes are non-empty");
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Coordinates on the first kernel principal component for the kernel
/// `exp(-d^2 / sigma^2)`, with `sigma` the median off-diagonal distance.
///
/// Negative eigenvalues of the centered kernel are treated as zero; the sign
/// is fixed so the entry of largest magnitude is positive.
pub fn kpca_coordinates(dist: &DMatrix<f64>) -> Vec<f64> {
    let n = dist.nrows();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut off_diag = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            off_diag.push(dist[(i, j)]);
        }
    }
    let sigma = median(off_diag);
    if sigma <= 0.0 {
        return vec![0.0; n];
    }
    let s2 = sigma * sigma;
    let kernel = dist.map(|d| (-(d * d) / s2).exp());

    let row_means: Vec<f64> = (0..n).map(|i| kernel.row(i).sum() / n as f64).collect();
    let total_mean = row_means.iter().sum::<f64>() / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] - row_means[i] - row_means[j] + total_mean);

    let eig = SymmetricEigen::new(centered);
    let (top, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("n >= 2");
    if lambda <= 0.0 {
        return vec![0.0; n];
    }
    let v = eig.eigenvectors.column(top);
    let mut pivot = 0;
    for i in 1..n {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|x| sign * lambda.sqrt() * x).collect()
}

fn order_by_coordinate(coords: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[a].total_cmp(&coords[b]));
    order
}

/// Input indices sorted by their first kernel principal coordinate (stable).
pub fn kpca_order_indices(set: &PaletteSet) -> Vec<usize> {
    order_by_coordinate(&kpca_coordinates(&mhd_matrix(set.palettes())))
}

pub fn kpca_order(set: &PaletteSet) -> PaletteSet {
    set.select(&kpca_order_indices(set)).expect("reordering keeps the set non-empty")
}

fn split_sizes(n: usize) -> usize {
    n.div_ceil(2)
}

/// Median split of the KPCA ordering; the lower-coordinate half is `left`.
pub fn partition(set: &PaletteSet) -> Result<PartitionResult> {
    if set.len() < 2 {
        return Err(Error::TooFewPalettes {
            needed: 2,
            got: set.len(),
        });
    }
    let order = kpca_order_indices(set);
    let (l, r) = order.split_at(split_sizes(order.len()));
    let mut membership = vec![false; set.len()];
    for &i in l {
        membership[i] = true;
    }
    Ok(PartitionResult {
        left: set.select(l)?,
        right: set.select(r)?,
        membership,
    })
}

/// Appends `q` to `p`, permuting the colors of every palette in `q` so its
/// rows align with those of `p`. `p` is left untouched.
pub fn merge(p: &SortedPaletteSet, q: &SortedPaletteSet) -> Result<SortedPaletteSet> {
    if p.k != q.k {
        return Err(Error::SizeMismatch {
            expected: p.k,
            found: q.k,
        });
    }
    if q.is_empty() {
        return Ok(p.clone());
    }
    if p.is_empty() {
        return Ok(q.clone());
    }
    let g = align_row_sets(&p.to_set()?, &q.to_set()?)?.perm;
    let mut out = p.clone();
    for (pal, prov) in q.palettes.iter().zip(&q.provenance) {
        out.palettes.push(pal.permuted(&g));
        out.provenance.push(g.iter().map(|&h| prov[h]).collect());
    }
    Ok(out)
}

fn sort_indices(items: &[usize], dist: &DMatrix<f64>, palettes: &[Palette]) -> Vec<(usize, Vec<usize>)> {
    if items.len() == 1 {
        return vec![(items[0], (0..palettes[0].k()).collect())];
    }
    let sub = DMatrix::from_fn(items.len(), items.len(), |i, j| dist[(items[i], items[j])]);
    let order: Vec<usize> = order_by_coordinate(&kpca_coordinates(&sub))
        .into_iter()
        .map(|i| items[i])
        .collect();
    let (l, r) = order.split_at(split_sizes(order.len()));
    let (left, mut right) = rayon::join(
        || sort_indices(l, dist, palettes),
        || sort_indices(r, dist, palettes),
    );

    let k = palettes[0].k();
    let rows = |block: &[(usize, Vec<usize>)]| -> Vec<Vec<LabColor>> {
        (0..k)
            .map(|slot| block.iter().map(|(i, perm)| palettes[*i][perm[slot]]).collect())
            .collect()
    };
    let cost = row_cost_matrix(&rows(&left), &rows(&right)).expect("blocks share K");
    let g = hungarian(&cost).perm;
    for (_, perm) in right.iter_mut() {
        *perm = g.iter().map(|&h| perm[h]).collect();
    }
    let mut merged = left;
    merged.extend(right);
    merged
}

/// Sorts the colors of every palette so that equal slots correspond across the set.
pub fn bps_sort(set: &PaletteSet) -> SortedPaletteSet {
    let dist = mhd_matrix(set.palettes());
    let all: Vec<usize> = (0..set.len()).collect();
    let mut perms = vec![Vec::new(); set.len()];
    for (i, perm) in sort_indices(&all, &dist, set.palettes()) {
        perms[i] = perm;
    }
    SortedPaletteSet {
        k: set.k(),
        palettes: set.iter().zip(&perms).map(|(p, perm)| p.permuted(perm)).collect(),
        provenance: perms,
    }
}

/// Sum over all ordered palette pairs and slots of the slot-wise color distance.
pub fn objective(palettes: &[Palette]) -> f64 {
    let mut total = 0.0;
    for (n, p) in palettes.iter().enumerate() {
        for q in &palettes[n + 1..] {
            total += p
                .colors()
                .iter()
                .zip(q.colors())
                .map(|(a, b)| color_dist(a, b))
                .sum::<f64>();
        }
    }
    2.0 * total
}

fn sort_each_by(set: &PaletteSet, key: impl Fn(&LabColor) -> f64) -> SortedPaletteSet {
    let mut palettes = Vec::with_capacity(set.len());
    let mut provenance = Vec::with_capacity(set.len());
    for p in set.iter() {
        let mut perm: Vec<usize> = (0..p.k()).collect();
        perm.sort_by(|&a, &b| key(&p[a]).total_cmp(&key(&p[b])));
        palettes.push(p.permuted(&perm));
        provenance.push(perm);
    }
    SortedPaletteSet {
        k: set.k(),
        palettes,
        provenance,
    }
}

/// Each palette sorted by ascending lightness (stable).
pub fn brightness_sort(set: &PaletteSet) -> SortedPaletteSet {
    sort_each_by(set, |c| c.l)
}

/// Each palette sorted by ascending hue angle around the neutral axis
/// (stable). Achromatic colors have no hue and come first, in input order.
pub fn hue_sort(set: &PaletteSet) -> SortedPaletteSet {
    sort_each_by(set, |c| c.hue().unwrap_or(f64::NEG_INFINITY))
}

/// Mean over consecutive palette pairs of the mean slot-wise color distance.
pub fn consecutive_distance(palettes: &[Palette]) -> Result<f64> {
    if palettes.len() < 2 {
        return Err(Error::TooFewPalettes {
            needed: 2,
            got: palettes.len(),
        });
    }
    let total: f64 = palettes
        .windows(2)
        .map(|w| {
            let k = w[0].k() as f64;
            w[0].colors()
                .iter()
                .zip(w[1].colors())
                .map(|(a, b)| color_dist(a, b))
                .sum::<f64>()
                / k
        })
        .sum();
    Ok(total / (palettes.len() - 1) as f64)
}

/// Ordering method used by the sort command and the ordering benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortMethod {
    Bps,
    Brightness,
    Hue,
    /// Leaves palettes as given.
    None,
}

impl SortMethod {
    pub fn apply(self, set: &PaletteSet) -> SortedPaletteSet {
        match self {
            SortMethod::Bps => bps_sort(set),
            SortMethod::Brightness => brightness_sort(set),
            SortMethod::Hue => hue_sort(set),
            SortMethod::None => SortedPaletteSet::identity(set),
        }
    }
}

impl std::str::FromStr for SortMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bps" => Ok(SortMethod::Bps),
            "brightness" => Ok(SortMethod::Brightness),
            "hue" => Ok(SortMethod::Hue),
            "none" => Ok(SortMethod::None),
            other => Err(Error::InvalidParameter(format!("unknown sort method {other:?}"))),
        }
    }
}

impl std::fmt::Display for SortMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SortMethod::Bps => "bps",
            SortMethod::Brightness => "brightness",
            SortMethod::Hue => "hue",
            SortMethod::None => "none",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_palette(rng: &mut ChaCha8Rng, k: usize) -> Palette {
        Palette::new(
            (0..k)
                .map(|_| LabColor::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap()
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, k: usize) -> PaletteSet {
        PaletteSet::new((0..n).map(|_| random_palette(rng, k)).collect()).unwrap()
    }

    fn jittered(rng: &mut ChaCha8Rng, base: &Palette, eps: f64) -> Palette {
        let mut colors: Vec<LabColor> = base
            .colors()
            .iter()
            .map(|c| {
                LabColor::new(
                    c.l + rng.random_range(-eps..eps),
                    c.a + rng.random_range(-eps..eps),
                    c.b + rng.random_range(-eps..eps),
                )
                .clamped()
            })
            .collect();
        colors.shuffle(rng);
        Palette::new(colors).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn sorted_colors(p: &Palette) -> Vec<[u64; 3]> {
        let mut v: Vec<[u64; 3]> = p
            .colors()
            .iter()
            .map(|c| [c.l.to_bits(), c.a.to_bits(), c.b.to_bits()])
            .collect();
        v.sort();
        v
    }

    #[test]
    fn kpca_single_palette_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = random_set(&mut rng, 1, 4);
        assert_eq!(kpca_order(&set), set);
    }

    #[test]
    fn kpca_keeps_identical_palettes_adjacent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_palette(&mut rng, 5);
        let c = Palette::new(a.colors().iter().map(|x| LabColor::new(1.0 - x.l, 1.0 - x.a, 1.0 - x.b)).collect()).unwrap();
        for perm in permutations(3) {
            let items = [a.clone(), a.clone(), c.clone()];
            let set = PaletteSet::new(perm.iter().map(|&i| items[i].clone()).collect()).unwrap();
            let order = kpca_order_indices(&set);
            let pos_c = order.iter().position(|&i| perm[i] == 2).unwrap();
            assert!(pos_c == 0 || pos_c == 2, "C must not separate the twins: {order:?}");
        }
    }

    fn two_clusters(rng: &mut ChaCha8Rng, per_cluster: usize, k: usize) -> (PaletteSet, Vec<usize>) {
        let bases = [random_palette(rng, k), random_palette(rng, k)];
        let mut items: Vec<(Palette, usize)> = (0..2 * per_cluster)
            .map(|i| (jittered(rng, &bases[i % 2], 0.01), i % 2))
            .collect();
        items.shuffle(rng);
        let labels = items.iter().map(|x| x.1).collect();
        (PaletteSet::new(items.into_iter().map(|x| x.0).collect()).unwrap(), labels)
    }

    #[test]
    fn kpca_places_clusters_contiguously() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (set, labels) = two_clusters(&mut rng, 10, 5);
            let order = kpca_order_indices(&set);
            let seq: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            let changes = seq.windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(changes, 1, "{seq:?}");
        }
    }

    #[test]
    fn partition_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let two = partition(&random_set(&mut rng, 2, 3)).unwrap();
        assert_eq!((two.left.len(), two.right.len()), (1, 1));
        let five = partition(&random_set(&mut rng, 5, 3)).unwrap();
        assert_eq!((five.left.len(), five.right.len()), (3, 2));
        assert_eq!(five.membership.iter().filter(|&&m| m).count(), 3);
        assert!(matches!(
            partition(&random_set(&mut rng, 1, 3)),
            Err(Error::TooFewPalettes { .. })
        ));
    }

    #[test]
    fn partition_recovers_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (set, labels) = two_clusters(&mut rng, 10, 4);
        let part = partition(&set).unwrap();
        let left_label = labels[part.membership.iter().position(|&m| m).unwrap()];
        for (m, l) in part.membership.iter().zip(&labels) {
            assert_eq!(*m, *l == left_label);
        }
    }

    #[test]
    fn merge_empty_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = SortedPaletteSet::identity(&random_set(&mut rng, 3, 4));
        let e = SortedPaletteSet::empty(4);
        assert_eq!(merge(&p, &e).unwrap(), p);
        assert_eq!(merge(&e, &p).unwrap(), p);
        assert!(merge(&p, &SortedPaletteSet::empty(5)).is_err());
    }

    #[test]
    fn merge_realigns_shuffled_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = random_set(&mut rng, 1, 6);
        let perm = vec![3, 5, 0, 1, 4, 2];
        let shuffled = PaletteSet::new(vec![base[0].permuted(&perm)]).unwrap();
        let out = merge(&SortedPaletteSet::identity(&base), &SortedPaletteSet::identity(&shuffled)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.palettes()[0], base[0]);
        assert_eq!(out.palettes()[1], base[0]);
        // Provenance maps back to slots of the shuffled input.
        for (k, &src) in out.provenance()[1].iter().enumerate() {
            assert_eq!(shuffled[0][src], base[0][k]);
        }
    }

    #[test]
    fn merge_of_aligned_block_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let set = random_set(&mut rng, 6, 5);
        let sorted = bps_sort(&set);
        let (p, q) = sorted.palettes().split_at(3);
        let p = SortedPaletteSet::identity(&PaletteSet::new(p.to_vec()).unwrap());
        let q_once = merge(&p, &SortedPaletteSet::identity(&PaletteSet::new(q.to_vec()).unwrap())).unwrap();
        let q_aligned = PaletteSet::new(q_once.palettes()[3..].to_vec()).unwrap();
        let g = align_row_sets(&p.to_set().unwrap(), &q_aligned).unwrap();
        assert_eq!(g.perm, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn bps_single_palette_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = random_set(&mut rng, 1, 5);
        let sorted = bps_sort(&set);
        assert_eq!(sorted.palettes(), set.palettes());
        assert_eq!(sorted.provenance(), &[vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn bps_pairs_are_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for k in 1..=6 {
            let perms = permutations(k);
            for _ in 0..10 {
                let set = random_set(&mut rng, 2, k);
                let best = perms
                    .iter()
                    .map(|g| objective(&[set[0].clone(), set[1].permuted(g)]))
                    .fold(f64::INFINITY, f64::min);
                let got = objective(bps_sort(&set).palettes());
                assert!((got - best).abs() < 1e-9, "k={k}: {got} vs {best}");
            }
        }
    }

    #[test]
    fn bps_usually_improves_raw_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let trials = 40;
        let improved = (0..trials)
            .filter(|_| {
                let set = random_set(&mut rng, 20, 5);
                objective(bps_sort(&set).palettes()) <= objective(set.palettes())
            })
            .count();
        assert!(improved as f64 >= 0.95 * trials as f64, "{improved}/{trials}");
    }

    #[test]
    fn bps_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let set = random_set(&mut rng, 25, 6);
        assert_eq!(bps_sort(&set), bps_sort(&set));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sorting_conserves_colors(seed in any::<u64>(), n in 1usize..30, k in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = random_set(&mut rng, n, k);
            for method in [SortMethod::Bps, SortMethod::Brightness, SortMethod::Hue] {
                let sorted = method.apply(&set);
                for ((orig, out), prov) in set.iter().zip(sorted.palettes()).zip(sorted.provenance()) {
                    prop_assert_eq!(sorted_colors(orig), sorted_colors(out));
                    for (slot, &src) in prov.iter().enumerate() {
                        prop_assert_eq!(out[slot], orig[src]);
                    }
                }
            }
        }
    }

    #[test]
    fn objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = random_palette(&mut rng, 4);
        assert_eq!(objective(std::slice::from_ref(&p)), 0.0);
        assert_eq!(objective(&[p.clone(), p.clone()]), 0.0);
        let mut colors = p.colors().to_vec();
        colors[2].l = (colors[2].l + 0.1).min(1.0);
        let d = color_dist(&colors[2], &p[2]);
        let q = Palette::new(colors).unwrap();
        assert!((objective(&[p, q]) - 2.0 * d).abs() < 1e-15);
    }

    #[test]
    fn brightness_and_hue_sorting() {
        let asc = Palette::new(vec![
            LabColor::new(0.1, 0.9, 0.2),
            LabColor::new(0.4, 0.1, 0.3),
            LabColor::new(0.8, 0.5, 0.9),
        ])
        .unwrap();
        let set = PaletteSet::new(vec![asc.clone()]).unwrap();
        assert_eq!(brightness_sort(&set).palettes()[0], asc);

        let gray = Palette::new(vec![
            LabColor::new(0.9, NEUTRAL, NEUTRAL),
            LabColor::new(0.2, NEUTRAL, NEUTRAL),
            LabColor::new(0.5, NEUTRAL, NEUTRAL),
        ])
        .unwrap();
        let sorted = hue_sort(&PaletteSet::new(vec![gray.clone()]).unwrap());
        assert_eq!(sorted.palettes()[0], gray);
        assert_eq!(sorted.provenance()[0], vec![0, 1, 2]);

        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let set = random_set(&mut rng, 50, 7);
        for p in brightness_sort(&set).palettes() {
            assert!(p.colors().windows(2).all(|w| w[0].l <= w[1].l));
        }
        for p in hue_sort(&set).palettes() {
            let hues: Vec<f64> = p.colors().iter().map(|c| c.hue().unwrap_or(f64::NEG_INFINITY)).collect();
            assert!(hues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    const NEUTRAL: f64 = crate::color::NEUTRAL_AB;

    #[test]
    fn consecutive_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p = random_palette(&mut rng, 5);
        assert_eq!(consecutive_distance(&[p.clone(), p.clone(), p.clone()]).unwrap(), 0.0);
        let shifted = Palette::new(
            p.colors().iter().map(|c| LabColor::new(c.l, c.a, c.b + 0.5)).collect(),
        )
        .unwrap();
        assert!((consecutive_distance(&[p.clone(), shifted]).unwrap() - 0.5).abs() < 1e-12);
        assert!(consecutive_distance(&[p]).is_err());
    }
}
