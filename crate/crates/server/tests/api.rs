use std::collections::BTreeMap;
use std::io::Cursor;
use std::sync::{Arc, OnceLock};

use image::{Rgb, RgbImage};
use orchestra_core::bps::bps_sort;
use orchestra_core::color::{color_dist, mhd, LabColor};
use orchestra_core::derive_seed;
use orchestra_core::extract::{image_palettes, kmeans_palette, PatchSpec};
use orchestra_core::manifold::{train_gplvm, train_pca_gmm, GmmConfig, GplvmConfig, GplvmModel, Model};
use orchestra_core::palette::{Palette, PaletteSet};
use orchestra_core::recolor::LabImage;
use orchestra_server::{image_id, AppState, DensityResponse, ModelInfo, PaletteJson, Suggestion, UploadResponse};
use serde_json::{json, Value};

fn scene() -> RgbImage {
    RgbImage::from_fn(200, 160, |x, y| {
        let t = x as f64 / 199.0;
        let s = y as f64 / 159.0;
        let band = ((x / 25 + y / 40) % 3) as f64;
        Rgb([
            (40.0 + 180.0 * t + 10.0 * band) as u8,
            (60.0 + 100.0 * s + 20.0 * band) as u8,
            (200.0 - 150.0 * t + 5.0 * band) as u8,
        ])
    })
}

fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn patch_model(img: &RgbImage, extra: Option<Palette>) -> GplvmModel {
    let spec = PatchSpec {
        patch_size: 250,
        step: 50,
        samples_per_patch: 600,
    };
    let mut palettes = image_palettes(img, 5, &spec, 3).unwrap();
    palettes.extend(extra);
    let sorted = bps_sort(&PaletteSet::new(palettes).unwrap());
    train_gplvm(sorted.palettes(), &GplvmConfig { q: 2, iters: 150, seed: 1 }).unwrap()
}

fn scene_model() -> &'static GplvmModel {
    static MODEL: OnceLock<GplvmModel> = OnceLock::new();
    MODEL.get_or_init(|| patch_model(&scene(), None))
}

/// Stationary texture: every patch holds the same color mix.
fn tiles() -> RgbImage {
    const COLORS: [[u8; 3]; 5] = [[200, 60, 50], [40, 90, 170], [230, 210, 120], [60, 140, 80], [30, 30, 40]];
    RgbImage::from_fn(200, 160, |x, y| {
        let c = COLORS[((x / 5 + 2 * (y / 5)) % 5) as usize];
        let shade = ((x + y) % 5) as u8 * 3;
        Rgb([c[0].saturating_add(shade), c[1].saturating_add(shade), c[2].saturating_add(shade)])
    })
}

/// Palette the server extracts from a single-segment image with seed 0.
fn own_palette(img: &RgbImage) -> Palette {
    let pixels = LabImage::from_rgb(img).pixels;
    kmeans_palette(&pixels, 5, derive_seed(0, &[0])).unwrap().palette
}

/// Patch palettes of the texture plus its whole-image palette.
fn tiles_model() -> &'static GplvmModel {
    static MODEL: OnceLock<GplvmModel> = OnceLock::new();
    MODEL.get_or_init(|| patch_model(&tiles(), Some(own_palette(&tiles()))))
}

/// Smooth one-parameter family of palettes.
fn curve_model() -> GplvmModel {
    let palettes: Vec<Palette> = (0..30)
        .map(|i| {
            let t = i as f64 / 29.0;
            Palette::new(
                (0..5)
                    .map(|s| {
                        let s = s as f64;
                        LabColor::new(0.2 + 0.15 * s, 0.5 + 0.2 * (t * 2.0 + s).sin(), 0.5 + 0.2 * (t * 1.5 - s).cos())
                    })
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    train_gplvm(&palettes, &GplvmConfig { q: 2, iters: 200, seed: 4 }).unwrap()
}

fn models() -> BTreeMap<String, Model> {
    let model = scene_model().clone();
    let gmm = train_pca_gmm(&model.training_palettes(), &GmmConfig { components: 2, ..Default::default() }).unwrap();
    BTreeMap::from([
        ("scene".to_string(), Model::from(model)),
        ("mix".to_string(), Model::from(gmm)),
        ("curve".to_string(), Model::from(curve_model())),
        ("tiles".to_string(), Model::from(tiles_model().clone())),
    ])
}

struct Server {
    base: String,
    client: reqwest::Client,
}

impl Server {
    async fn start(state: AppState) -> Server {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(orchestra_server::serve(listener, Arc::new(state)));
        Server {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
        }
    }

    async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(format!("{}{path}", self.base)).send().await.unwrap()
    }

    async fn post_json(&self, path: &str, body: &Value) -> reqwest::Response {
        self.client
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap()
    }

    async fn upload(&self, bytes: Vec<u8>) -> reqwest::Response {
        self.client
            .post(format!("{}/images", self.base))
            .header("content-type", "image/png")
            .body(bytes)
            .send()
            .await
            .unwrap()
    }
}

async fn expect_error(resp: reqwest::Response, status: u16) {
    assert_eq!(resp.status().as_u16(), status);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["code"], status);
    assert!(body["error"].as_str().is_some_and(|s| !s.is_empty()));
}

#[tokio::test]
async fn empty_server_lists_no_models() {
    let server = Server::start(AppState::new(BTreeMap::new())).await;
    let list: Vec<ModelInfo> = server.get("/models").await.json().await.unwrap();
    assert!(list.is_empty());
    expect_error(server.get("/nowhere").await, 404).await;
}

#[tokio::test]
async fn models_are_listed_by_name() {
    let server = Server::start(AppState::new(models())).await;
    let list: Vec<ModelInfo> = server.get("/models").await.json().await.unwrap();
    let names: Vec<&str> = list.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["curve", "mix", "scene", "tiles"]);
    assert_eq!(list[2].k, 5);
    assert_eq!(list[2].q, 2);
}

#[tokio::test]
async fn density_grid() {
    let server = Server::start(AppState::new(models())).await;
    let resp = server.get("/models/scene/density?res=64").await;
    assert_eq!(resp.status(), 200);
    let d: DensityResponse = resp.json().await.unwrap();
    assert_eq!(d.resolution, 64);
    assert_eq!(d.values.len(), 64);
    assert!(d.values.iter().all(|r| r.len() == 64));
    let (i, j) = scene_model().most_significant_dims();
    assert_eq!(d.dims, [i, j]);
    assert_eq!(d.training_points.len(), scene_model().n());

    // The cell holding a training point sits above the grid minimum.
    let [x0, x1, y0, y1] = d.extents;
    let [px, py] = d.training_points[0];
    let col = (((px - x0) / (x1 - x0)) * 64.0) as usize;
    let row = (((py - y0) / (y1 - y0)) * 64.0) as usize;
    let min = d.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    assert!(d.values[row.min(63)][col.min(63)] > min);

    let again = server.get("/models/scene/density?res=64").await.bytes().await.unwrap();
    let first = server.get("/models/scene/density?res=64").await.bytes().await.unwrap();
    assert_eq!(again, first);

    expect_error(server.get("/models/scene/density?dims=0,0").await, 400).await;
    expect_error(server.get("/models/scene/density?dims=0,7").await, 400).await;
    expect_error(server.get("/models/scene/density?res=0").await, 400).await;
    expect_error(server.get("/models/nope/density").await, 404).await;
    expect_error(server.get("/models/mix/density").await, 400).await;
}

#[tokio::test]
async fn palette_backprojection() {
    let server = Server::start(AppState::new(models())).await;
    let model = &curve_model();
    let training = model.training_palettes();
    for i in [0, model.n() / 2, model.n() - 1] {
        let p = model.latent_point(i);
        let url = format!("/models/curve/palette?x={}&y={}&dims=0,1", p[0], p[1]);
        let got: PaletteJson = server.get(&url).await.json().await.unwrap();
        assert_eq!(got.colors.len(), 5);
        assert_eq!(got.hex.len(), 5);
        for (a, b) in got.colors.iter().zip(training[i].colors()) {
            for (u, v) in a.to_array().iter().zip(b.to_array()) {
                assert!((u - v).abs() < 0.01, "palette {i}: {u} vs {v}");
            }
        }
        let again = server.get(&url).await.bytes().await.unwrap();
        assert_eq!(server.get(&url).await.bytes().await.unwrap(), again);
    }

    let far: PaletteJson = server.get("/models/curve/palette?x=1e4&y=-1e4").await.json().await.unwrap();
    let mean = model.data_mean();
    for (s, c) in far.colors.iter().enumerate() {
        for (ch, v) in c.to_array().iter().enumerate() {
            assert!((v - mean[3 * s + ch].clamp(0.0, 1.0)).abs() < 1e-9);
        }
    }

    expect_error(server.get("/models/curve/palette?x=NaN&y=0").await, 400).await;
    expect_error(server.get("/models/curve/palette?x=inf&y=0").await, 400).await;
    expect_error(server.get("/models/curve/palette?y=0").await, 400).await;
    expect_error(server.get("/models/nope/palette?x=0&y=0").await, 404).await;
}

#[tokio::test]
async fn uploads_are_content_addressed() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(AppState::new(models()).with_images_dir(dir.path()).unwrap()).await;
    let bytes = png_bytes(&scene());
    let resp = server.upload(bytes.clone()).await;
    assert_eq!(resp.status(), 201);
    let up: UploadResponse = resp.json().await.unwrap();
    assert_eq!(up.id, image_id(&bytes));
    assert_eq!((up.width, up.height), (200, 160));
    assert!(dir.path().join(format!("{}.png", up.id)).exists());
    let again: UploadResponse = server.upload(bytes).await.json().await.unwrap();
    assert_eq!(again.id, up.id);

    expect_error(server.upload(b"GIF89a not a png".to_vec()).await, 415).await;
    let mut broken = png_bytes(&scene());
    broken.truncate(40);
    expect_error(server.upload(broken).await, 400).await;

    // A fresh server picks the stored image up from the directory.
    let reloaded = AppState::new(BTreeMap::new()).with_images_dir(dir.path()).unwrap();
    assert!(reloaded.image(&up.id).is_ok());
}

fn mean_lab_distance(a: &RgbImage, b: &RgbImage) -> f64 {
    let (la, lb) = (LabImage::from_rgb(a), LabImage::from_rgb(b));
    la.pixels.iter().zip(&lb.pixels).map(|(p, q)| color_dist(p, q)).sum::<f64>() / la.pixels.len() as f64
}

async fn render(server: &Server, query: &str, body: &Value) -> (Vec<u8>, String) {
    let resp = server.post_json(&format!("/recolor{query}"), body).await;
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["content-type"], "image/png");
    let cache = resp.headers()["x-cache"].to_str().unwrap().to_string();
    (resp.bytes().await.unwrap().to_vec(), cache)
}

fn decode(bytes: &[u8]) -> RgbImage {
    image::load_from_memory(bytes).unwrap().to_rgb8()
}

#[tokio::test]
async fn recolor_at_own_palette_is_nearly_identity() {
    let img = tiles();
    let server = Server::start(AppState::new(models())).await;
    let up: UploadResponse = server.upload(png_bytes(&img)).await.json().await.unwrap();

    let model = tiles_model();
    let own = own_palette(&img);
    let training = model.training_palettes();
    let nearest = (0..model.n())
        .find(|&i| mhd(training[i].colors(), own.colors()).unwrap() == 0.0)
        .unwrap();
    let p = model.latent_point(nearest);

    let body = json!({"image": up.id, "model": "tiles", "x": p[0], "y": p[1], "dims": [0, 1], "segments": "grid:256"});
    let (first, cache) = render(&server, "", &body).await;
    assert_eq!(cache, "miss");
    let out = decode(&first);
    assert_eq!(out.dimensions(), img.dimensions());
    let d = mean_lab_distance(&img, &out);
    assert!(d < 0.05, "mean Lab distance {d}");

    let (second, cache) = render(&server, "", &body).await;
    assert_eq!(cache, "hit");
    assert_eq!(first, second);

    // A cold server renders the same bytes.
    let cold = Server::start(AppState::new(models())).await;
    cold.upload(png_bytes(&img)).await;
    assert_eq!(render(&cold, "", &body).await.0, first);
}

#[tokio::test]
async fn recolor_modes_and_sizes() {
    let big = RgbImage::from_fn(400, 300, |x, y| *scene().get_pixel(x / 2, (y * 160 / 300).min(159)));
    let server = Server::start(AppState::new(models())).await;
    let up: UploadResponse = server.upload(png_bytes(&big)).await.json().await.unwrap();

    let point = json!({"image": up.id, "model": "scene", "x": 0.5, "y": -0.5});
    let preview = decode(&render(&server, "", &point).await.0);
    assert_eq!(preview.dimensions(), (256, 192));
    let full = decode(&render(&server, "?full=1", &point).await.0);
    assert_eq!(full.dimensions(), (400, 300));

    let auto = json!({"image": up.id, "model": "scene", "auto": true, "sim_iters": 30});
    let (a, _) = render(&server, "", &auto).await;
    let (b, cache) = render(&server, "", &auto).await;
    assert_eq!(a, b);
    assert_eq!(cache, "hit");
    assert_eq!(decode(&a).dimensions(), (256, 192));

    // Luminance preservation keeps L within sRGB rounding.
    let keep = json!({"image": up.id, "model": "scene", "x": 2.0, "y": 2.0, "preserve_luminance": true});
    let kept = decode(&render(&server, "", &keep).await.0);
    let src = LabImage::from_rgb(&orchestra_server::preview_image(&big, 256));
    let out = LabImage::from_rgb(&kept);
    let worst = src.pixels.iter().zip(&out.pixels).map(|(p, q)| (p.l - q.l).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "L moved by {worst}");

    expect_error(server.post_json("/recolor", &json!({"image": "ab", "model": "scene", "auto": true})).await, 404).await;
    expect_error(server.post_json("/recolor", &json!({"image": up.id, "model": "nope", "auto": true})).await, 404).await;
    expect_error(server.post_json("/recolor", &json!({"image": up.id, "model": "mix", "auto": true})).await, 400).await;
    expect_error(server.post_json("/recolor", &json!({"image": up.id, "model": "scene"})).await, 400).await;
    expect_error(
        server
            .post_json("/recolor", &json!({"image": up.id, "model": "scene", "auto": true, "segments": "grid:2"}))
            .await,
        400,
    )
    .await;
    expect_error(server.post_json("/recolor", &json!({"model": "scene"})).await, 422).await;
}

#[tokio::test]
async fn concurrent_recolors_agree() {
    let server = Arc::new(Server::start(AppState::new(models())).await);
    let up: UploadResponse = server.upload(png_bytes(&scene())).await.json().await.unwrap();
    let body = json!({"image": up.id, "model": "scene", "x": 0.1, "y": 0.2, "segments": "grid:50"});
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let (server, body) = (server.clone(), body.clone());
            tokio::spawn(async move { render(&server, "", &body).await.0 })
        })
        .collect();
    let mut outputs = Vec::new();
    for t in tasks {
        outputs.push(t.await.unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

async fn suggest(server: &Server, body: &Value) -> Vec<Suggestion> {
    let resp = server.post_json("/suggest", body).await;
    assert_eq!(resp.status(), 200);
    resp.json().await.unwrap()
}

#[tokio::test]
async fn suggestions() {
    let server = Server::start(AppState::new(models())).await;
    let model = scene_model();
    let own = &model.training_palettes()[3];

    let got = suggest(&server, &json!({"model": "scene", "observed": own.colors(), "count": 3})).await;
    assert_eq!(got.len(), 3);
    assert!(got.windows(2).all(|w| w[0].sim_iters > w[1].sim_iters));
    for s in &got {
        assert_eq!(s.palette.colors.len(), 5);
        assert!(s.palette.colors.windows(2).all(|w| w[0].l <= w[1].l));
    }
    let d = mhd(&got[0].palette.colors, own.colors()).unwrap();
    assert!(d < 0.01, "first suggestion is {d} from the observed palette");

    let red = LabColor::new(0.55, 0.82, 0.75);
    for s in suggest(&server, &json!({"model": "scene", "observed": [red]})).await {
        assert!(s.palette.colors.iter().any(|c| color_dist(c, &red) < 0.1));
    }

    expect_error(server.post_json("/suggest", &json!({"model": "scene", "observed": []})).await, 400).await;
    expect_error(
        server
            .post_json("/suggest", &json!({"model": "scene", "observed": [[0.5, 0.5, 0.5]], "count": 0}))
            .await,
        400,
    )
    .await;
    expect_error(
        server
            .post_json("/suggest", &json!({"model": "scene", "observed": [[1.5, 0.5, 0.5]]}))
            .await,
        400,
    )
    .await;
    let six = vec![[0.5, 0.5, 0.5]; 6];
    expect_error(server.post_json("/suggest", &json!({"model": "scene", "observed": six})).await, 400).await;
    expect_error(server.post_json("/suggest", &json!({"model": "nope", "observed": [[0.5, 0.5, 0.5]]})).await, 404).await;
}
