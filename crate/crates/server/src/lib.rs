//! HTTP API over trained palette models: density maps, back-projection,
//! recolor previews and palette suggestions.

mod error;
mod state;

use std::io::Cursor;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use image::imageops::FilterType;
use image::RgbImage;
use orchestra_core::bps::brightness_sort;
use orchestra_core::color::{lab_to_srgb, LabColor};
use orchestra_core::manifold::{align_partial, gplvm_complete, gplvm_density, CompletionOptions, GplvmModel};
use orchestra_core::palette::{Palette, PaletteSet};
use orchestra_core::recolor::{
    complete_targets, parse_grid_spec, recolor_segments, segment_grid, segment_sources, LabImage, MIN_CELL,
};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ApiResult};
pub use state::{image_id, load_models_dir, AppState, CacheKey, RecolorEntry, CACHE_CAPACITY};

/// Longest side of a preview render.
pub const PREVIEW_MAX_DIM: u32 = 256;
pub const DEFAULT_RESOLUTION: usize = 64;
pub const MAX_RESOLUTION: usize = 512;
pub const MAX_SUGGESTIONS: usize = 8;
pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/models/{name}/density", get(density))
        .route("/models/{name}/palette", get(palette))
        .route("/images", post(upload_image))
        .route("/recolor", post(recolor))
        .route("/suggest", post(suggest))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn json_body<T>(b: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    b.map(|Json(v)| v).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub k: usize,
    pub q: usize,
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelInfo>> {
    Json(
        state
            .models()
            .iter()
            .map(|(name, m)| ModelInfo {
                name: name.clone(),
                k: m.k(),
                q: m.q(),
            })
            .collect(),
    )
}

fn parse_dims(dims: Option<&str>, model: &GplvmModel) -> ApiResult<(usize, usize)> {
    let Some(s) = dims else {
        return Ok(model.most_significant_dims());
    };
    let parts: Vec<&str> = s.split(',').collect();
    let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match parsed.as_deref() {
        Some(&[i, j]) if i != j && i < model.q() && j < model.q() => Ok((i, j)),
        _ => Err(ApiError::bad_request(format!(
            "dims must be two distinct indices below {}, got {s:?}",
            model.q()
        ))),
    }
}

#[derive(Debug, Deserialize)]
struct DensityQuery {
    dims: Option<String>,
    res: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensityResponse {
    pub model: String,
    pub dims: [usize; 2],
    pub resolution: usize,
    pub extents: [f64; 4],
    /// `values[row][col]`, log-density at cell centers.
    pub values: Vec<Vec<f64>>,
    /// Training latents projected onto `dims`.
    pub training_points: Vec<[f64; 2]>,
}

async fn density(
    State(state): State<Arc<AppState>>,
    Path(name): Path<String>,
    q: Result<Query<DensityQuery>, QueryRejection>,
) -> ApiResult<Json<DensityResponse>> {
    let q = query(q)?;
    blocking(move || {
        let model = state.gplvm(&name)?;
        let dims = parse_dims(q.dims.as_deref(), model)?;
        let res = q.res.unwrap_or(DEFAULT_RESOLUTION);
        if !(1..=MAX_RESOLUTION).contains(&res) {
            return Err(ApiError::bad_request(format!("res must be in 1..={MAX_RESOLUTION}")));
        }
        let grid = gplvm_density(model, Some(dims), res, None)?;
        let training_points = (0..model.n())
            .map(|i| {
                let p = model.latent_point(i);
                [p[dims.0], p[dims.1]]
            })
            .collect();
        Ok(Json(DensityResponse {
            model: name,
            dims: grid.dims,
            resolution: grid.resolution,
            extents: grid.extents,
            values: grid.values,
            training_points,
        }))
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteJson {
    pub colors: Vec<LabColor>,
    /// sRGB hex strings, for display.
    pub hex: Vec<String>,
}

impl From<&Palette> for PaletteJson {
    fn from(p: &Palette) -> Self {
        PaletteJson {
            colors: p.colors().to_vec(),
            hex: p
                .colors()
                .iter()
                .map(|&c| {
                    let [r, g, b] = lab_to_srgb(c);
                    format!("#{r:02x}{g:02x}{b:02x}")
                })
                .collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct PointQuery {
    x: f64,
    y: f64,
    dims: Option<String>,
}

fn latent_point(model: &GplvmModel, x: f64, y: f64, dims: (usize, usize)) -> ApiResult<Vec<f64>> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(ApiError::bad_request("x and y must be finite"));
    }
    let mut p = vec![0.0; model.q()];
    p[dims.0] = x;
    p[dims.1] = y;
    Ok(p)
}

async fn palette(
    State(state): State<Arc<AppState>>,
    Path(name): Path<String>,
    q: Result<Query<PointQuery>, QueryRejection>,
) -> ApiResult<Json<PaletteJson>> {
    let q = query(q)?;
    let model = state.gplvm(&name)?;
    let dims = parse_dims(q.dims.as_deref(), model)?;
    let p = latent_point(model, q.x, q.y, dims)?;
    Ok(Json(PaletteJson::from(&model.backproject_palette(&p))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

async fn upload_image(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<UploadResponse>)> {
    if !body.starts_with(&PNG_SIGNATURE) {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "only PNG uploads are accepted"));
    }
    blocking(move || {
        let (id, img) = state.insert_image(&body)?;
        Ok((
            StatusCode::CREATED,
            Json(UploadResponse {
                id,
                width: img.width(),
                height: img.height(),
            }),
        ))
    })
    .await
}

fn default_segments() -> String {
    "grid:100".into()
}

fn default_sim_iters() -> usize {
    100
}

fn default_blend() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct RecolorRequest {
    pub image: String,
    pub model: String,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
    #[serde(default)]
    pub dims: Option<[usize; 2]>,
    /// Complete each segment's own palette instead of using a latent point.
    #[serde(default)]
    pub auto: bool,
    #[serde(default = "default_segments")]
    pub segments: String,
    #[serde(default = "default_sim_iters")]
    pub sim_iters: usize,
    #[serde(default)]
    pub preserve_luminance: bool,
    #[serde(default = "default_blend")]
    pub blend: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Default, Deserialize)]
struct RecolorQuery {
    full: Option<String>,
}

fn is_truthy(v: Option<&str>) -> bool {
    matches!(v, Some("1" | "true" | "yes"))
}

/// Image downscaled so its longer side is at most `max_dim`.
pub fn preview_image(img: &RgbImage, max_dim: u32) -> RgbImage {
    let longest = img.width().max(img.height());
    if longest <= max_dim {
        return img.clone();
    }
    let scale = max_dim as f64 / longest as f64;
    let w = ((img.width() as f64 * scale).round() as u32).max(1);
    let h = ((img.height() as f64 * scale).round() as u32).max(1);
    image::imageops::resize(img, w, h, FilterType::Triangle)
}

fn encode_png(img: &RgbImage) -> ApiResult<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| ApiError::internal(format!("PNG encoding failed: {e}")))?;
    Ok(out.into_inner())
}

fn render_recolor(state: &AppState, req: RecolorRequest, full: bool) -> ApiResult<(Vec<u8>, bool)> {
    let model = state.gplvm(&req.model)?;
    let source = state.image(&req.image)?;
    let cell = parse_grid_spec(&req.segments)?;
    if !(0.0..=1.0).contains(&req.blend) {
        return Err(ApiError::bad_request("blend must be in [0, 1]"));
    }
    let point = match (req.auto, req.x, req.y) {
        (true, _, _) => None,
        (false, Some(x), Some(y)) => {
            let dims = match req.dims {
                Some([i, j]) => parse_dims(Some(&format!("{i},{j}")), model)?,
                None => model.most_significant_dims(),
            };
            Some(latent_point(model, x, y, dims)?)
        }
        _ => return Err(ApiError::bad_request("give x and y, or set auto")),
    };

    let working = if full { (*source).clone() } else { preview_image(&source, PREVIEW_MAX_DIM) };
    let scale = working.width() as f64 / source.width() as f64;
    let cell = ((cell as f64 * scale).round() as u32).max(MIN_CELL);
    let key = CacheKey {
        image: req.image.clone(),
        model: req.model.clone(),
        cell,
        full,
        seed: req.seed,
    };
    let (entry, hit) = state.recolor_entry(key, || {
        let segments = segment_grid(working.width(), working.height(), cell)?;
        let sources = segment_sources(&LabImage::from_rgb(&working), &segments, model, req.seed)?;
        Ok(RecolorEntry {
            image: working,
            segments,
            sources,
            auto_targets: Default::default(),
        })
    })?;

    let targets = match point {
        Some(p) => {
            let target = model.backproject_palette(&p);
            Arc::new(entry.sources.iter().map(|s| s.as_ref().map(|_| target.clone())).collect())
        }
        None => {
            let cached = entry.auto_targets.read().expect("target lock").get(&req.sim_iters).cloned();
            match cached {
                Some(t) => t,
                None => {
                    let t = Arc::new(complete_targets(model, &entry.sources, req.sim_iters)?);
                    entry
                        .auto_targets
                        .write()
                        .expect("target lock")
                        .insert(req.sim_iters, t.clone());
                    t
                }
            }
        }
    };
    let out = recolor_segments(
        &entry.image,
        &entry.segments,
        &entry.sources,
        &targets,
        req.preserve_luminance,
        req.blend,
    )?;
    Ok((encode_png(&out)?, hit))
}

async fn recolor(
    State(state): State<Arc<AppState>>,
    q: Result<Query<RecolorQuery>, QueryRejection>,
    body: Result<Json<RecolorRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let full = is_truthy(query(q)?.full.as_deref());
    let req = json_body(body)?;
    let (png, hit) = blocking(move || render_recolor(&state, req, full)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, "image/png".parse().expect("static header"));
    headers.insert("x-cache", if hit { "hit" } else { "miss" }.parse().expect("static header"));
    Ok((headers, png).into_response())
}

fn default_count() -> usize {
    3
}

fn default_clamp() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct SuggestRequest {
    pub model: String,
    pub observed: Vec<LabColor>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_clamp")]
    pub clamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub sim_iters: usize,
    #[serde(flatten)]
    pub palette: PaletteJson,
}

/// Latent iterations for each suggestion, most iterations first.
pub fn suggestion_schedule(count: usize) -> Vec<usize> {
    (0..count).map(|i| 100usize >> i.min(usize::BITS as usize - 1)).collect()
}

fn run_suggest(state: &AppState, req: SuggestRequest) -> ApiResult<Vec<Suggestion>> {
    let model = state.gplvm(&req.model)?;
    if req.observed.is_empty() {
        return Err(ApiError::bad_request("observed must hold at least one color"));
    }
    if req.observed.len() > model.k() {
        return Err(ApiError::bad_request(format!(
            "observed holds {} colors but the model has {}",
            req.observed.len(),
            model.k()
        )));
    }
    if let Some(c) = req.observed.iter().find(|c| !c.is_valid()) {
        return Err(ApiError::bad_request(format!("color {:?} is outside [0, 1]", c.to_array())));
    }
    if !(1..=MAX_SUGGESTIONS).contains(&req.count) {
        return Err(ApiError::bad_request(format!("count must be in 1..={MAX_SUGGESTIONS}")));
    }
    let partial = align_partial(&req.observed, &model.training_palettes())?;
    suggestion_schedule(req.count)
        .into_iter()
        .map(|sim_iters| {
            let opts = CompletionOptions {
                sim_iters,
                clamp_observed: req.clamp,
            };
            let completed = gplvm_complete(model, &partial, &opts)?.palette;
            let sorted = brightness_sort(&PaletteSet::new(vec![completed])?).palettes()[0].clone();
            Ok(Suggestion {
                sim_iters,
                palette: PaletteJson::from(&sorted),
            })
        })
        .collect()
}

async fn suggest(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SuggestRequest>, JsonRejection>,
) -> ApiResult<Json<Vec<Suggestion>>> {
    let req = json_body(body)?;
    blocking(move || run_suggest(&state, req).map(Json)).await
}
