//! Independent reference computations and canned run setups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use semfield::encoding::sh_basis;
use semfield::eval::{MapSample, MaterialMap};
use semfield::geom::Point3;
use semfield::mapper::RunConfig;
use semfield::material::{Material, NUM_CLASSES};
use semfield::scene::{Primitive, Scene, Shape};
use semfield::touchsim::{Finger, SensorProfile, SimConfig, Simulator};

/// Map with random points, classes and ROI flags. `roi_fraction` of the
/// samples are inside the ROI on average; at least one always is.
pub fn random_map(rng: &mut ChaCha8Rng, n: usize, roi_fraction: f64) -> MaterialMap {
    let mut samples: Vec<MapSample> = (0..n)
        .map(|_| MapSample {
            point: Point3::new(rng.random(), rng.random(), rng.random()),
            predicted: Material::ALL[rng.random_range(0..NUM_CLASSES)],
            truth: Material::ALL[rng.random_range(0..NUM_CLASSES)],
            in_roi: rng.random_bool(roi_fraction),
        })
        .collect();
    samples[0].in_roi = true;
    MaterialMap { samples }
}

/// Confusion counts `[truth][predicted]` over ROI samples, tallied one
/// cell at a time by rescanning the whole map.
pub fn confusion_recount(map: &MaterialMap) -> [[u64; NUM_CLASSES]; NUM_CLASSES] {
    let mut m = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (t, row) in m.iter_mut().enumerate() {
        for (p, cell) in row.iter_mut().enumerate() {
            for s in &map.samples {
                if s.in_roi && s.truth.index() == t && s.predicted.index() == p {
                    *cell += 1;
                }
            }
        }
    }
    m
}

/// Matching percentage from the recount.
pub fn recount_pct(map: &MaterialMap) -> f64 {
    let m = confusion_recount(map);
    let total: u64 = m.iter().flatten().sum();
    let diag: u64 = (0..NUM_CLASSES).map(|c| m[c][c]).sum();
    100.0 * diag as f64 / total as f64
}

/// Per-class accuracy percentages from the recount; `None` without support.
pub fn recount_class_accuracy(map: &MaterialMap) -> [Option<f64>; NUM_CLASSES] {
    let m = confusion_recount(map);
    std::array::from_fn(|c| {
        let support: u64 = m[c].iter().sum();
        (support > 0).then(|| 100.0 * m[c][c] as f64 / support as f64)
    })
}

/// Uniform direction on the unit sphere.
pub fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Largest deviation from the identity of the Monte-Carlo Gram matrix
/// `4π/n · Σ Y_i(d) Y_j(d)` over `n` uniform directions.
pub fn sh_gram_deviation(bands: usize, n: usize, seed: u64) -> f64 {
    let dim = bands * bands;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gram = vec![0.0f64; dim * dim];
    let mut y = vec![0f32; dim];
    for _ in 0..n {
        sh_basis(random_direction(&mut rng), bands, &mut y);
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] += f64::from(y[i]) * f64::from(y[j]);
            }
        }
    }
    let scale = 4.0 * std::f64::consts::PI / n as f64;
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[i * dim + j] * scale - target).abs());
        }
    }
    worst
}

/// A 5 cm sphere made entirely of `class`.
pub fn single_material_sphere(class: Material) -> Scene {
    Scene {
        name: format!("{class}_sphere"),
        primitives: vec![Primitive::new(Shape::Sphere { radius: 0.05 })],
        regions: Vec::new(),
        default_class: class,
        roi: Vec::new(),
        bounds: None,
        surface_tolerance: 5e-3,
    }
}

/// Empirical label accuracy of `finger` on `draws` contacts with a surface
/// made of `class`, using the default profile for that finger.
/// Returns `(correct, draws)`.
pub fn label_accuracy(finger: Finger, class: Material, draws: usize, seed: u64) -> (usize, usize) {
    let scene = single_material_sphere(class);
    let cfg = SimConfig {
        profiles: vec![SensorProfile::default_for(finger)],
        ..SimConfig::default()
    };
    let mut sim = Simulator::new(&scene, cfg, seed).expect("valid simulator");
    let mut labels = Vec::with_capacity(draws);
    while labels.len() < draws {
        for o in sim.step().expect("contacts").observations {
            assert_eq!(o.true_label, class);
            labels.push(o.noisy_label);
        }
    }
    labels.truncate(draws);
    (labels.iter().filter(|&&l| l == class).count(), draws)
}

/// `|p̂ − p| ≤ 3σ` for a binomial proportion.
pub fn within_three_sigma(correct: usize, n: usize, p: f64) -> bool {
    let phat = correct as f64 / n as f64;
    (phat - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Path of a file shipped at the workspace root.
pub fn workspace_file(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Default run on the two-material cylinder.
pub fn cylinder_config(seed: u64) -> RunConfig {
    RunConfig {
        scene: workspace_file("scenes/two_material_cylinder.json"),
        seed,
        export_snapshot_meshes: false,
        ..RunConfig::default()
    }
}

/// Noiseless unit-sphere run whose finger bands together reach every
/// latitude, so the whole sphere is supervised.
pub fn sphere_config() -> RunConfig {
    let mut sim = SimConfig {
        profiles: Finger::ALL.into_iter().map(SensorProfile::perfect).collect(),
        position_noise: 0.0,
        ..SimConfig::default()
    };
    for (p, band) in sim.profiles.iter_mut().zip([[30.0, 90.0], [-30.0, 30.0], [-90.0, -30.0], [-60.0, 60.0]]) {
        p.elevation_deg = band;
    }
    RunConfig {
        scene: workspace_file("scenes/unit_sphere.json"),
        steps: 600,
        snapshot_every: 50,
        early_stop_patience: 0,
        eval_points: 1000,
        export_snapshot_meshes: false,
        sim,
        ..RunConfig::default()
    }
}

/// Short cylinder run for tests that only need a trained-ish field.
pub fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        steps: 30,
        snapshot_every: 10,
        grad_steps_per_timestep: 1,
        eval_points: 300,
        mesh_resolution: 16,
        ..cylinder_config(seed)
    }
}
