use nalgebra::DVector;
use orchestra_core::manifold::gplvm::{default_extents, gplvm_density, train_gplvm, GplvmConfig, GplvmModel, KernelParams};
use orchestra_core::manifold::Model;
use orchestra_core::palette::Palette;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RADIUS: f64 = 0.35;

/// Quarter circle in a random 2-D plane of the 15-D feature space.
struct Arc {
    u: DVector<f64>,
    v: DVector<f64>,
}

impl Arc {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_unit = || {
            let v = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
            v.normalize()
        };
        let u = rand_unit();
        let w = rand_unit();
        let v = (&w - &u * u.dot(&w)).normalize();
        Arc { u, v }
    }

    fn point(&self, theta: f64) -> DVector<f64> {
        DVector::from_element(15, 0.5) + (&self.u * theta.cos() + &self.v * theta.sin()) * RADIUS
    }

    fn distance_to_circle(&self, p: &DVector<f64>) -> f64 {
        let rel = p - DVector::from_element(15, 0.5);
        let (a, b) = (rel.dot(&self.u), rel.dot(&self.v));
        let out = &rel - &self.u * a - &self.v * b;
        (((a * a + b * b).sqrt() - RADIUS).powi(2) + out.norm_squared()).sqrt()
    }

    fn palettes(&self, n: usize) -> Vec<Palette> {
        (0..n)
            .map(|i| {
                let theta = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Palette::from_vector(self.point(theta).as_slice()).unwrap()
            })
            .collect()
    }
}

fn curve_model() -> (Arc, Vec<Palette>, GplvmModel) {
    let arc = Arc::new(11);
    let data = arc.palettes(40);
    let model = train_gplvm(&data, &GplvmConfig { q: 4, iters: 200, seed: 1 }).unwrap();
    (arc, data, model)
}

#[test]
fn curve_is_captured_by_one_latent_dimension() {
    let (_, _, model) = curve_model();
    let x = model.latent();
    let vars: Vec<f64> = (0..model.q())
        .map(|c| {
            let col = x.column(c);
            let m = col.mean();
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .collect();
    let total: f64 = vars.iter().sum();
    let top = vars.iter().copied().fold(0.0, f64::max);
    assert!(top / total >= 0.9, "latent variances {vars:?}");
}

#[test]
fn training_log_never_increases() {
    let (_, _, model) = curve_model();
    let log = model.training_log();
    assert!(log.len() > 1);
    assert!(log.windows(2).all(|w| w[1] <= w[0]));
    assert!((model.nll().unwrap() - log.last().unwrap()).abs() <= 1e-9 * log.last().unwrap().abs().max(1.0));
}

#[test]
fn training_latents_reproduce_training_vectors() {
    let (_, data, model) = curve_model();
    for (i, p) in data.iter().enumerate() {
        let (mean, var) = model.backproject(&model.latent_point(i));
        let std = var.sqrt();
        for (a, b) in mean.iter().zip(p.to_vector()) {
            assert!((a - b).abs() <= 2.0 * std, "point {i}: {a} vs {b}, std {std}");
        }
    }

    // Nearly noiseless kernel: interpolation at the data.
    let p = model.params();
    let sharp = model
        .with_state(model.latent().clone(), KernelParams { beta: 1e8, ..p })
        .unwrap();
    for (i, palette) in data.iter().enumerate() {
        let (mean, _) = sharp.backproject(&sharp.latent_point(i));
        for (a, b) in mean.iter().zip(palette.to_vector()) {
            assert!((a - b).abs() < 1e-3, "point {i}: {a} vs {b}");
        }
    }
}

#[test]
fn far_points_fall_back_to_the_prior() {
    let (_, _, model) = curve_model();
    let (mean, var) = model.backproject(&[1e3, -1e3, 1e3, 0.0]);
    for (a, b) in mean.iter().zip(model.data_mean().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    let p = model.params();
    assert!((var - (p.alpha + 1.0 / p.beta)).abs() < 1e-12 * var);
}

#[test]
fn latent_midpoints_stay_on_the_curve() {
    let (arc, data, model) = curve_model();
    for (i, j) in [(4, 16), (14, 26), (24, 36)] {
        let xi = model.latent_point(i);
        let xj = model.latent_point(j);
        let mid: Vec<f64> = xi.iter().zip(&xj).map(|(a, b)| 0.5 * (a + b)).collect();
        let (pred, _) = model.backproject(&mid);
        let pred = DVector::from_vec(pred);
        let chord = (DVector::from_vec(data[i].to_vector()) + DVector::from_vec(data[j].to_vector())) * 0.5;
        let sagitta = arc.distance_to_circle(&chord);
        let off_curve = arc.distance_to_circle(&pred);
        assert!(off_curve <= 0.5 * sagitta, "pair ({i},{j}): {off_curve} vs sagitta {sagitta}");
        assert!(off_curve < (&pred - &chord).norm());
    }
}

#[test]
fn density_is_higher_near_data() {
    let (_, _, model) = curve_model();
    let grid = gplvm_density(&model, None, 32, None).unwrap();
    let dims = model.most_significant_dims();
    assert_eq!(grid.dims, [dims.0, dims.1]);
    assert_eq!(grid.extents, default_extents(&model, dims));
    assert_eq!(grid.values.len(), 32);
    assert!(grid.values.iter().all(|r| r.len() == 32 && r.iter().all(|v| v.is_finite())));

    // Every training point projects inside the extents.
    let [x0, x1, y0, y1] = grid.extents;
    for i in 0..model.n() {
        let p = model.latent_point(i);
        assert!(p[dims.0] > x0 && p[dims.0] < x1 && p[dims.1] > y0 && p[dims.1] < y1);
    }

    let at_data = {
        let mut p = vec![0.0; model.q()];
        let t = model.latent_point(20);
        p[dims.0] = t[dims.0];
        p[dims.1] = t[dims.1];
        model.log_density(&p)
    };
    let far = {
        let mut p = vec![0.0; model.q()];
        p[dims.0] = x1 + 3.0 * (x1 - x0);
        p[dims.1] = y1 + 3.0 * (y1 - y0);
        model.log_density(&p)
    };
    assert!(at_data > far, "{at_data} vs {far}");
}

#[test]
fn density_riemann_sum_is_stable() {
    let (_, _, model) = curve_model();
    let coarse = gplvm_density(&model, None, 64, None).unwrap();
    let fine = gplvm_density(&model, None, 128, None).unwrap();
    let peak = fine.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |g: &orchestra_core::manifold::DensityGrid| {
        g.values.iter().flatten().map(|v| (v - peak).exp()).sum::<f64>() * g.cell_area()
    };
    let (a, b) = (mass(&coarse), mass(&fine));
    assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
}

#[test]
fn bad_density_requests_are_rejected() {
    let (_, _, model) = curve_model();
    assert!(gplvm_density(&model, Some((1, 1)), 8, None).is_err());
    assert!(gplvm_density(&model, Some((0, 4)), 8, None).is_err());
    assert!(gplvm_density(&model, None, 8, Some([1.0, 0.0, 0.0, 1.0])).is_err());
}

#[test]
fn training_is_deterministic_and_serializable() {
    let arc = Arc::new(12);
    let data = arc.palettes(16);
    let cfg = GplvmConfig { q: 2, iters: 40, seed: 5 };
    let a = train_gplvm(&data, &cfg).unwrap();
    let b = train_gplvm(&data, &cfg).unwrap();
    assert_eq!(a.latent(), b.latent());
    assert_eq!(a.params(), b.params());

    let json = Model::from(a.clone()).to_json().unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["format_version"], 1);
    assert_eq!(value["type"], "gplvm");
    assert_eq!(value["k"], 5);
    assert_eq!(value["q"], 2);
    let back = Model::from_json(&json).unwrap();
    let back = back.as_gplvm().unwrap();
    assert_eq!(back.latent(), a.latent());
    assert_eq!(back.backproject(&[0.1, 0.2]), a.backproject(&[0.1, 0.2]));
}

#[test]
fn default_dimensions() {
    let arc = Arc::new(13);
    let model = train_gplvm(&arc.palettes(12), &GplvmConfig { iters: 5, ..Default::default() }).unwrap();
    assert_eq!(model.output_dim(), 15);
    assert_eq!(model.q(), 4);
}
