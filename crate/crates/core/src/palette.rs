//! Palettes, palette sets and the JSON dataset exchange format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::LabColor;
use crate::error::{Error, Result};

pub const MAX_PALETTE_SIZE: usize = 16;

/// An ordered tuple of `K` colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LabColor>", into = "Vec<LabColor>")]
pub struct Palette {
    colors: Vec<LabColor>,
}

impl TryFrom<Vec<LabColor>> for Palette {
    type Error = Error;

    fn try_from(colors: Vec<LabColor>) -> Result<Self> {
        Palette::new(colors)
    }
}

impl From<Palette> for Vec<LabColor> {
    fn from(p: Palette) -> Self {
        p.colors
    }
}

impl Palette {
    pub fn new(colors: Vec<LabColor>) -> Result<Self> {
        if colors.is_empty() || colors.len() > MAX_PALETTE_SIZE {
            return Err(Error::InvalidPaletteSize(colors.len()));
        }
        Ok(Palette { colors })
    }

    pub fn k(&self) -> usize {
        self.colors.len()
    }

    pub fn colors(&self) -> &[LabColor] {
        &self.colors
    }

    pub fn into_colors(self) -> Vec<LabColor> {
        self.colors
    }

    /// Reorders colors so that slot `k` of the result holds `self[perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> Palette {
        debug_assert_eq!(perm.len(), self.k());
        Palette {
            colors: perm.iter().map(|&i| self.colors[i]).collect(),
        }
    }

    /// Concatenated `[l, a, b, l, a, b, ...]` feature vector.
    pub fn to_vector(&self) -> Vec<f64> {
        self.colors.iter().flat_map(|c| c.to_array()).collect()
    }

    /// Decodes a `3K` vector, clamping each component into `[0, 1]`.
    pub fn from_vector(values: &[f64]) -> Result<Palette> {
        if values.len() % 3 != 0 {
            return Err(Error::InvalidParameter(format!(
                "vector length {} is not a multiple of 3",
                values.len()
            )));
        }
        Palette::new(
            values
                .chunks_exact(3)
                .map(|c| LabColor::from_slice(c).clamped())
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for Palette {
    type Output = LabColor;

    fn index(&self, i: usize) -> &LabColor {
        &self.colors[i]
    }
}

/// A non-empty list of palettes sharing one size `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaletteSet {
    k: usize,
    palettes: Vec<Palette>,
}

impl PaletteSet {
    pub fn new(palettes: Vec<Palette>) -> Result<Self> {
        let k = palettes.first().ok_or(Error::EmptyPaletteSet)?.k();
        if let Some(p) = palettes.iter().find(|p| p.k() != k) {
            return Err(Error::SizeMismatch {
                expected: k,
                found: p.k(),
            });
        }
        Ok(PaletteSet { k, palettes })
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

    pub fn into_palettes(self) -> Vec<Palette> {
        self.palettes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Palette> {
        self.palettes.iter()
    }

    /// Palettes at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PaletteSet> {
        PaletteSet::new(indices.iter().map(|&i| self.palettes[i].clone()).collect())
    }

    /// The set of `k`-th colors across all palettes.
    pub fn row(&self, k: usize) -> Vec<LabColor> {
        self.palettes.iter().map(|p| p[k]).collect()
    }
}

impl std::ops::Index<usize> for PaletteSet {
    type Output = Palette;

    fn index(&self, i: usize) -> &Palette {
        &self.palettes[i]
    }
}

pub const COLOR_SPACE_TAG: &str = "lab01";

/// On-disk dataset: `{"k": K, "colors_space": "lab01", "palettes": [[[l,a,b], ...], ...]}`.
///
/// Sorted datasets additionally carry `provenance`, one permutation per
/// palette giving the original slot of each sorted color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub k: usize,
    pub colors_space: String,
    pub palettes: Vec<Palette>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<Vec<usize>>>,
}

impl DatasetFile {
    pub fn from_set(set: &PaletteSet) -> Self {
        DatasetFile {
            k: set.k(),
            colors_space: COLOR_SPACE_TAG.to_string(),
            palettes: set.palettes().to_vec(),
            provenance: None,
        }
    }

    pub fn into_set(self) -> Result<PaletteSet> {
        if self.colors_space != COLOR_SPACE_TAG {
            return Err(Error::Format(format!(
                "colors_space {:?}, expected {COLOR_SPACE_TAG:?}",
                self.colors_space
            )));
        }
        let set = PaletteSet::new(self.palettes)?;
        if set.k() != self.k {
            return Err(Error::SizeMismatch {
                expected: self.k,
                found: set.k(),
            });
        }
        if let Some(bad) = set.iter().flat_map(|p| p.colors()).find(|c| !c.is_valid()) {
            return Err(Error::ColorOutOfRange(bad.to_array()));
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn load_palette_set(path: impl AsRef<Path>) -> Result<PaletteSet> {
    DatasetFile::load(path)?.into_set()
}
