use image::{Rgb, RgbImage};
use orchestra_core::bps::bps_sort;
use orchestra_core::color::color_dist;
use orchestra_core::extract::{image_palettes, PatchSpec};
use orchestra_core::manifold::{train_gplvm, GplvmConfig, GplvmModel};
use orchestra_core::palette::PaletteSet;
use orchestra_core::recolor::{
    complete_targets, recolor_enriched, recolor_single, segment_grid, segment_sources, EnrichedOptions, LabImage,
    RecolorSpec,
};

/// Smooth two-axis gradient with a few hue bands.
fn scene() -> RgbImage {
    RgbImage::from_fn(200, 200, |x, y| {
        let t = x as f64 / 199.0;
        let s = y as f64 / 199.0;
        let band = ((x / 25 + y / 40) % 3) as f64;
        Rgb([
            (40.0 + 180.0 * t + 10.0 * band) as u8,
            (60.0 + 100.0 * s + 20.0 * band) as u8,
            (200.0 - 150.0 * t + 5.0 * band) as u8,
        ])
    })
}

fn self_model(img: &RgbImage) -> GplvmModel {
    let spec = PatchSpec {
        patch_size: 250,
        step: 50,
        samples_per_patch: 600,
    };
    let palettes = image_palettes(img, 5, &spec, 3).unwrap();
    let sorted = bps_sort(&PaletteSet::new(palettes).unwrap());
    train_gplvm(sorted.palettes(), &GplvmConfig { q: 4, iters: 200, seed: 1 }).unwrap()
}

fn mean_lab_distance(a: &RgbImage, b: &RgbImage) -> f64 {
    let (la, lb) = (LabImage::from_rgb(a), LabImage::from_rgb(b));
    la.pixels.iter().zip(&lb.pixels).map(|(p, q)| color_dist(p, q)).sum::<f64>() / la.pixels.len() as f64
}

#[test]
fn self_recolorization_is_nearly_identity() {
    let img = scene();
    let model = self_model(&img);
    let segments = segment_grid(200, 200, 100).unwrap();
    let opts = EnrichedOptions {
        sim_iters: 200,
        ..Default::default()
    };
    let out = recolor_enriched(&img, &segments, &model, &opts).unwrap();
    let d = mean_lab_distance(&img, &out);
    assert!(d < 0.05, "mean Lab distance {d}");
    assert_eq!(out, recolor_enriched(&img, &segments, &model, &opts).unwrap());
}

#[test]
fn one_segment_is_global_recoloring() {
    let img = scene();
    let model = self_model(&img);
    let segments = segment_grid(200, 200, 256).unwrap();
    assert_eq!(segments.count, 1);
    let opts = EnrichedOptions::default();
    let lab = LabImage::from_rgb(&img);
    let sources = segment_sources(&lab, &segments, &model, opts.seed).unwrap();
    let targets = complete_targets(&model, &sources, opts.sim_iters).unwrap();
    let spec = RecolorSpec::new(sources[0].clone().unwrap(), targets[0].clone().unwrap(), false, 1.0).unwrap();
    assert_eq!(
        recolor_enriched(&img, &segments, &model, &opts).unwrap(),
        recolor_single(&img, &spec)
    );
}

#[test]
fn disjoint_segments_get_different_palettes() {
    let img = RgbImage::from_fn(64, 32, |x, y| {
        let v = ((x * 7 + y * 3) % 40) as u8;
        if x < 32 {
            Rgb([200 + v / 2, 40 + v, 30])
        } else {
            Rgb([30, 60 + v, 190 + v / 2])
        }
    });
    let spec = PatchSpec {
        patch_size: 100,
        step: 50,
        samples_per_patch: 400,
    };
    let palettes = image_palettes(&img, 4, &spec, 9).unwrap();
    let sorted = bps_sort(&PaletteSet::new(palettes).unwrap());
    let model = train_gplvm(sorted.palettes(), &GplvmConfig { q: 2, iters: 100, seed: 2 }).unwrap();
    let segments = segment_grid(64, 32, 32).unwrap();
    let lab = LabImage::from_rgb(&img);
    let sources = segment_sources(&lab, &segments, &model, 0).unwrap();
    let targets = complete_targets(&model, &sources, 50).unwrap();
    let (a, b) = (targets[0].as_ref().unwrap(), targets[1].as_ref().unwrap());
    assert!(orchestra_core::color::mhd(a.colors(), b.colors()).unwrap() > 0.0);
}

#[test]
fn tiny_segments_pass_through() {
    let img = scene();
    let model = self_model(&img);
    // Edge cells of a 9x9 image hold 8, 8 and 1 pixels.
    let small = RgbImage::from_fn(9, 9, |x, y| *img.get_pixel(x * 20, y * 20));
    let segments = segment_grid(9, 9, 8).unwrap();
    assert_eq!(segments.count, 4);
    let out = recolor_enriched(&small, &segments, &model, &EnrichedOptions::default()).unwrap();
    // The 1x1 corner cell is left alone.
    assert_eq!(out.get_pixel(8, 8), small.get_pixel(8, 8));
}
