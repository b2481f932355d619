use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use orchestra_core::bench::{completion_benchmark, ordering_benchmark, CompletionConfig, OrderingConfig};
use orchestra_core::bps::{SortMethod, SortedPaletteSet};
use orchestra_core::color::LabColor;
use orchestra_core::extract::{build_dataset, kmeans_palette, DatasetManifest};
use orchestra_core::manifold::{train_gplvm, train_pca_gmm, GmmConfig, GplvmConfig, Model};
use orchestra_core::palette::{load_palette_set, DatasetFile, Palette};
use orchestra_core::recolor::{
    match_palette, parse_grid_spec, recolor_enriched, recolor_single, segment_grid, EnrichedOptions, LabImage,
    RecolorSpec,
};
use orchestra_core::synth::{planted_palettes, SynthConfig};
use orchestra_server::{load_models_dir, AppState};

#[derive(Parser)]
#[command(name = "palette-orchestra", version, about = "Color palette modeling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a palette dataset from the images listed in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Palette ordering.
    Bps {
        #[command(subcommand)]
        command: BpsCommand,
    },
    /// Model training.
    Model {
        #[command(subcommand)]
        command: ModelCommand,
    },
    Recolor(RecolorArgs),
    /// Run a benchmark described by a JSON config.
    Bench {
        kind: BenchKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve trained models over HTTP.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, env = "PALETTE_ORCHESTRA_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write a synthetic dataset with planted slot correspondences.
    Synth {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        contexts: usize,
        #[arg(long, default_value_t = 0.1)]
        drift: f64,
        #[arg(long, default_value_t = 0.01)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the hidden slot permutations.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BpsCommand {
    /// Reorder the colors of every palette in a dataset.
    Sort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bps")]
        method: SortMethod,
        /// Unused; every method is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelMethod {
    Gplvm,
    Gmm,
}

#[derive(Subcommand)]
enum ModelCommand {
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "gplvm")]
        method: ModelMethod,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Latent dimension (GPLVM).
        #[arg(long, default_value_t = 4)]
        q: usize,
        /// PCA dimension (GMM).
        #[arg(long, default_value_t = 8)]
        d: usize,
        /// Mixture components (GMM).
        #[arg(long, default_value_t = 10)]
        components: usize,
    },
}

#[derive(Args)]
struct RecolorArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "grid:100")]
    segments: String,
    #[arg(long)]
    out: PathBuf,
    /// Target palette; recolors the whole image toward it instead of using the model.
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    sim_iters: usize,
    #[arg(long)]
    preserve_luminance: bool,
    #[arg(long, default_value_t = 1.0)]
    blend: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Ordering,
    Completion,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A palette file is either a bare color list or an object with `colors`.
fn read_palette(path: &Path) -> Result<Palette> {
    let value: serde_json::Value = read_json(path)?;
    let colors = match value.get("colors") {
        Some(c) => c.clone(),
        None => value,
    };
    let colors: Vec<LabColor> = serde_json::from_value(colors).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Palette::new(colors)?)
}

fn recolor(args: &RecolorArgs) -> Result<()> {
    let img = image::open(&args.image)
        .with_context(|| format!("reading {}", args.image.display()))?
        .to_rgb8();
    let out = match (&args.palette, &args.model) {
        (Some(p), _) => {
            let target = read_palette(p)?;
            let lab = LabImage::from_rgb(&img);
            let source = kmeans_palette(&lab.pixels, target.k(), args.seed)?.palette;
            let target = match_palette(&source, &[target])?;
            let spec = RecolorSpec::new(source, target, args.preserve_luminance, args.blend)?;
            recolor_single(&img, &spec)
        }
        (None, Some(m)) => {
            let model = Model::load(m)?;
            let Some(model) = model.as_gplvm() else {
                bail!("{} is not a GPLVM model", m.display());
            };
            let cell = parse_grid_spec(&args.segments)?;
            let segments = segment_grid(img.width(), img.height(), cell)?;
            let opts = EnrichedOptions {
                sim_iters: args.sim_iters,
                seed: args.seed,
                preserve_luminance: args.preserve_luminance,
                blend: args.blend,
            };
            recolor_enriched(&img, &segments, model, &opts)?
        }
        (None, None) => bail!("give --model or --palette"),
    };
    out.save_with_format(&args.out, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", args.out.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { manifest, out } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let set = build_dataset(&manifest)?;
            DatasetFile::from_set(&set).save(&out)?;
            log::info!("wrote {} palettes of {} colors to {}", set.len(), set.k(), out.display());
        }
        Command::Bps {
            command: BpsCommand::Sort { input, out, method, .. },
        } => {
            let set = load_palette_set(&input)?;
            let sorted: SortedPaletteSet = method.apply(&set);
            sorted.to_dataset().save(&out)?;
        }
        Command::Model {
            command:
                ModelCommand::Train {
                    input,
                    method,
                    out,
                    seed,
                    iters,
                    q,
                    d,
                    components,
                },
        } => {
            let set = load_palette_set(&input)?;
            let model = match method {
                ModelMethod::Gplvm => Model::from(train_gplvm(set.palettes(), &GplvmConfig { q, iters, seed })?),
                ModelMethod::Gmm => Model::from(train_pca_gmm(
                    set.palettes(),
                    &GmmConfig {
                        d,
                        components,
                        max_iters: iters,
                        seed,
                    },
                )?),
            };
            model.save(&out)?;
        }
        Command::Recolor(args) => recolor(&args)?,
        Command::Bench { kind, config, out } => {
            let report = match kind {
                BenchKind::Ordering => ordering_benchmark(&read_json::<OrderingConfig>(&config)?)?,
                BenchKind::Completion => completion_benchmark(&read_json::<CompletionConfig>(&config)?)?,
            };
            report.save(&out)?;
            print!("{}", report.to_csv());
        }
        Command::Serve {
            models,
            port,
            images,
            host,
        } => {
            let mut state = AppState::new(load_models_dir(&models)?);
            if let Some(dir) = images {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                state = state.with_images_dir(dir)?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                log::info!("listening on {}", listener.local_addr()?);
                orchestra_server::serve(listener, Arc::new(state)).await
            })?;
        }
        Command::Synth {
            k,
            n,
            contexts,
            drift,
            jitter,
            seed,
            out,
            truth,
        } => {
            let data = planted_palettes(&SynthConfig {
                k,
                n,
                contexts,
                drift,
                jitter,
                shuffle: true,
                seed,
            })?;
            DatasetFile::from_set(&data.palettes).save(&out)?;
            if let Some(path) = truth {
                std::fs::write(&path, serde_json::to_string(&data.truth)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
