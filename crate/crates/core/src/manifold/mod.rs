//! Density and interpolation models over sorted palette feature vectors.

pub mod complete;
pub mod gmm;
pub mod gplvm;
pub mod scg;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use complete::{align_partial, gplvm_complete, Completion, CompletionOptions, PartialPalette};
pub use gmm::{train_pca_gmm, GmmConfig, GmmModel};
pub use gplvm::{gplvm_density, train_gplvm, DensityGrid, GplvmConfig, GplvmModel, KernelParams};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum Model {
    Gplvm(GplvmModel),
    Gmm(GmmModel),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum Body {
    #[serde(rename = "gplvm")]
    Gplvm(gplvm::GplvmFile),
    #[serde(rename = "pca-gmm")]
    Gmm(gmm::GmmFile),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    body: Body,
}

impl Model {
    pub fn k(&self) -> usize {
        match self {
            Model::Gplvm(m) => m.k(),
            Model::Gmm(m) => m.k(),
        }
    }

    pub fn q(&self) -> usize {
        match self {
            Model::Gplvm(m) => m.q(),
            Model::Gmm(m) => m.q(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Model::Gplvm(_) => "gplvm",
            Model::Gmm(_) => "pca-gmm",
        }
    }

    pub fn as_gplvm(&self) -> Option<&GplvmModel> {
        match self {
            Model::Gplvm(m) => Some(m),
            Model::Gmm(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let body = match self {
            Model::Gplvm(m) => Body::Gplvm(m.to_file()),
            Model::Gmm(m) => Body::Gmm(m.to_file()),
        };
        Ok(serde_json::to_string(&ModelFile {
            format_version: FORMAT_VERSION,
            body,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format_version {}", file.format_version)));
        }
        match file.body {
            Body::Gplvm(f) => Ok(Model::Gplvm(GplvmModel::from_file(f)?)),
            Body::Gmm(f) => Ok(Model::Gmm(GmmModel::from_file(f)?)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

impl From<GplvmModel> for Model {
    fn from(m: GplvmModel) -> Self {
        Model::Gplvm(m)
    }
}

impl From<GmmModel> for Model {
    fn from(m: GmmModel) -> Self {
        Model::Gmm(m)
    }
}
