//! Quick built-in checks of the numerical core, runnable from the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigenspace::{build_eigenspace, center, mean_image, symmetric_eigen};
use crate::image::{
    decode_pgm, encode_pgm, resize_nearest, rotate_nearest, GrayImage, ImageVector,
};
use crate::logpolar::{
    log_polar_transform, log_polar_transform_sized, shift_columns, LogPolarConfig,
};
use crate::mlp::{
    backward, batch_error, init_network, parameter_step, Hyperparams, Pattern, WeightState,
};
use crate::synth;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Runs every check and returns the results in a fixed order.
pub fn run() -> Vec<Check> {
    vec![
        pgm_round_trip(),
        rotation_shift(),
        scale_invariance(),
        gram_equivalence(),
        gradient_check(),
        update_arithmetic(),
        eta_positivity(),
    ]
}

fn pgm_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ok = (0..50).all(|_| {
        let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let px = (0..w * h).map(|_| rng.gen()).collect();
        let img = GrayImage::new(w, h, px).expect("valid");
        decode_pgm(&encode_pgm(&img)).ok().as_ref() == Some(&img)
    });
    check("pgm round trip", ok, "50 random images")
}

fn rotation_shift() -> Check {
    let cfg = LogPolarConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let img = synth::fixture(seed, synth::ORL_WIDTH, synth::ORL_HEIGHT);
        let base = log_polar_transform(&img, &cfg).expect("fixture transforms");
        let side = base.width();
        for delta in [15.0, 30.0, 45.0, 90.0] {
            let rotated = log_polar_transform(&rotate_nearest(&img, delta), &cfg)
                .expect("fixture transforms");
            let shifted = shift_columns(&base, (delta * side as f64 / 360.0).round() as i64);
            worst = worst.max(outer_rows_mad(&rotated, &shifted, 0.2));
        }
    }
    check(
        "rotation -> column shift",
        worst <= 10.0,
        format!("worst mean |diff| {worst:.2}"),
    )
}

/// Mean absolute difference over rows whose normalized log-radius is ≥ `p_min`.
pub fn outer_rows_mad(a: &GrayImage, b: &GrayImage, p_min: f64) -> f64 {
    let side = a.height();
    let first = (p_min * (side - 1) as f64).ceil() as usize;
    let mut total = 0u64;
    let mut count = 0u64;
    for y in first..side {
        for x in 0..a.width() {
            total += u64::from(a.get(x, y).abs_diff(b.get(x, y)));
            count += 1;
        }
    }
    total as f64 / count as f64
}

fn scale_invariance() -> Check {
    let cfg = LogPolarConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let img = synth::fixture(seed, synth::ORL_WIDTH, synth::ORL_HEIGHT);
        let base = log_polar_transform(&img, &cfg).expect("fixture transforms");
        for s in [2, 3] {
            let up = resize_nearest(&img, img.width() * s, img.height() * s).expect("upscale");
            let lp =
                log_polar_transform_sized(&up, &cfg, base.width()).expect("upscaled transforms");
            worst = worst.max(lp.mean_abs_diff(&base).expect("same size"));
        }
    }
    check(
        "scale invariance",
        worst <= 10.0,
        format!("worst mean |diff| {worst:.2}"),
    )
}

fn gram_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let h = rng.gen_range(3..=12);
        let p = rng.gen_range(2..=6);
        let train: Vec<ImageVector> = (0..p)
            .map(|_| {
                ImageVector::new((0..h).map(|_| rng.gen_range(0.0..255.0)).collect())
                    .expect("finite")
            })
            .collect();
        let mean = mean_image(&train).expect("non-empty");
        let x = center(&train, &mean).expect("same length");
        let space = build_eigenspace(&x, &mean, 40).expect("non-degenerate");
        let direct = symmetric_eigen(&x.covariance()).expect("symmetric");
        for (k, &l) in space.eigenvalues().iter().enumerate() {
            worst = worst.max((l - direct.values[k]).abs() / direct.values[k].abs());
        }
    }
    check(
        "gram vs direct covariance",
        worst <= 1e-8,
        format!("worst relative error {worst:.2e}"),
    )
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sizes = [3, 4, 2];
    let mut net = init_network(&sizes, 9).expect("valid sizes");
    let batch: Vec<Pattern> = (0..4)
        .map(|k| Pattern::labeled((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(), k % 2, 2))
        .collect();
    let analytic: Vec<f64> = backward(&net, &batch)
        .expect("valid batch")
        .iter()
        .copied()
        .collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let orig = *net.params().iter().nth(i).expect("index in range");
        *net.params_mut().iter_mut().nth(i).expect("index in range") = orig + h;
        let plus = batch_error(&net, &batch).expect("valid batch");
        *net.params_mut().iter_mut().nth(i).expect("index in range") = orig - h;
        let minus = batch_error(&net, &batch).expect("valid batch");
        *net.params_mut().iter_mut().nth(i).expect("index in range") = orig;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
    }
    check(
        "analytic vs finite-difference gradient",
        worst < 1e-5,
        format!("worst relative error {worst:.2e}"),
    )
}

fn update_arithmetic() -> Check {
    let hp = Hyperparams::default();
    let mut s = WeightState {
        eta: 0.02,
        lambda_bar: 0.0,
        delta_prev: 0.1,
    };
    let dw = parameter_step(1.0, &mut s, &hp);
    let mut t = WeightState {
        eta: 0.02,
        lambda_bar: 0.5,
        delta_prev: 0.0,
    };
    parameter_step(0.2, &mut t, &hp);
    let ok = (dw - 0.07).abs() < 1e-15
        && (t.lambda_bar - 0.41).abs() < 1e-15
        && (t.eta - 0.021).abs() < 1e-15;
    check(
        "momentum and rate update arithmetic",
        ok,
        format!("dw {dw}, lambda_bar {}", t.lambda_bar),
    )
}

fn eta_positivity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hp = Hyperparams::default();
    let mut s = WeightState {
        eta: hp.eta0,
        lambda_bar: 0.0,
        delta_prev: 0.0,
    };
    let mut min = f64::INFINITY;
    for _ in 0..10_000 {
        parameter_step(rng.gen_range(-1.0..1.0), &mut s, &hp);
        min = min.min(s.eta);
    }
    check(
        "learning rates stay positive",
        min > 0.0,
        format!("smallest eta {min:.3e}"),
    )
}
