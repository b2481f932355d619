use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock, RwLock};

use image::RgbImage;
use orchestra_core::manifold::{GplvmModel, Model};
use orchestra_core::palette::Palette;
use orchestra_core::recolor::SegmentMap;
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ApiResult};

/// Entries beyond this count flush the recolor cache.
pub const CACHE_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub image: String,
    pub model: String,
    /// Grid cell size in working-resolution pixels.
    pub cell: u32,
    pub full: bool,
    pub seed: u64,
}

/// Everything a recolor request needs that does not depend on the target.
pub struct RecolorEntry {
    pub image: RgbImage,
    pub segments: SegmentMap,
    /// Per-segment palettes aligned to the model's slots.
    pub sources: Vec<Option<Palette>>,
    /// Completed targets for auto mode, keyed by sim_iters.
    pub auto_targets: RwLock<HashMap<usize, Arc<Vec<Option<Palette>>>>>,
}

/// Loaded models, uploaded images and the recolor cache.
pub struct AppState {
    models: BTreeMap<String, Model>,
    images: RwLock<HashMap<String, Arc<RgbImage>>>,
    images_dir: Option<PathBuf>,
    cache: RwLock<HashMap<CacheKey, Arc<OnceLock<Arc<RecolorEntry>>>>>,
}

impl AppState {
    pub fn new(models: BTreeMap<String, Model>) -> Self {
        AppState {
            models,
            images: RwLock::new(HashMap::new()),
            images_dir: None,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Loads every `*.png` in `dir` and saves later uploads there too.
    pub fn with_images_dir(mut self, dir: impl Into<PathBuf>) -> orchestra_core::Result<Self> {
        let dir = dir.into();
        if dir.is_dir() {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| orchestra_core::Error::io(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            paths.sort();
            for p in paths {
                match std::fs::read(&p) {
                    Ok(bytes) => match self.insert_image(&bytes) {
                        Ok((id, _)) => log::info!("loaded image {} as {id}", p.display()),
                        Err(e) => log::warn!("skipping {}: {}", p.display(), e.message),
                    },
                    Err(e) => log::warn!("skipping {}: {e}", p.display()),
                }
            }
        }
        self.images_dir = Some(dir);
        Ok(self)
    }

    pub fn models(&self) -> &BTreeMap<String, Model> {
        &self.models
    }

    pub fn model(&self, name: &str) -> ApiResult<&Model> {
        self.models
            .get(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown model {name:?}")))
    }

    pub fn gplvm(&self, name: &str) -> ApiResult<&GplvmModel> {
        self.model(name)?
            .as_gplvm()
            .ok_or_else(|| ApiError::bad_request(format!("model {name:?} is not a GPLVM")))
    }

    pub fn image(&self, id: &str) -> ApiResult<Arc<RgbImage>> {
        self.images
            .read()
            .expect("image store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown image {id:?}")))
    }

    /// Decodes and stores a PNG; the id is the SHA-256 of the bytes.
    pub fn insert_image(&self, bytes: &[u8]) -> ApiResult<(String, Arc<RgbImage>)> {
        let id = image_id(bytes);
        if let Ok(img) = self.image(&id) {
            return Ok((id, img));
        }
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| ApiError::bad_request(format!("cannot decode PNG: {e}")))?
            .to_rgb8();
        if img.width() == 0 || img.height() == 0 {
            return Err(ApiError::bad_request("image has a zero dimension"));
        }
        if let Some(dir) = &self.images_dir {
            let path = dir.join(format!("{id}.png"));
            if !path.exists() {
                if let Err(e) = std::fs::write(&path, bytes) {
                    log::warn!("could not save {}: {e}", path.display());
                }
            }
        }
        let img = Arc::new(img);
        self.images
            .write()
            .expect("image store lock")
            .insert(id.clone(), img.clone());
        Ok((id, img))
    }

    /// Returns the cached entry for `key`, building it once with `build`.
    pub fn recolor_entry(
        &self,
        key: CacheKey,
        build: impl FnOnce() -> ApiResult<RecolorEntry>,
    ) -> ApiResult<(Arc<RecolorEntry>, bool)> {
        let cell = {
            let cache = self.cache.read().expect("cache lock");
            cache.get(&key).cloned()
        };
        let cell = match cell {
            Some(c) => c,
            None => {
                let mut cache = self.cache.write().expect("cache lock");
                if cache.len() >= CACHE_CAPACITY && !cache.contains_key(&key) {
                    cache.clear();
                }
                cache.entry(key.clone()).or_default().clone()
            }
        };
        if let Some(entry) = cell.get() {
            return Ok((entry.clone(), true));
        }
        let entry = Arc::new(build()?);
        // A concurrent builder may have won; both results are identical.
        Ok((cell.get_or_init(|| entry).clone(), false))
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

pub fn image_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads every `*.json` model in `dir`, named by file stem.
pub fn load_models_dir(dir: &Path) -> orchestra_core::Result<BTreeMap<String, Model>> {
    let mut models = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| orchestra_core::Error::io(dir, e))?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.extension().is_none_or(|x| x != "json") {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        match Model::load(&path) {
            Ok(m) => {
                log::info!("loaded {} model {name} (k={}, q={})", m.type_name(), m.k(), m.q());
                models.insert(name.to_string(), m);
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    Ok(models)
}
