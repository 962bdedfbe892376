//! End-to-end acceptance checks, one result line per criterion.
//!
//! Criteria 3 and 4 need the ORL face database. Point `LPFACE_ORL_DIR` at an
//! extracted copy (`s1/1.pgm … s40/10.pgm`) to run them for real; without it
//! they are reported as BLOCKED and the same checks run on the procedural
//! ORL-shaped stand-in from `lpface::synth`, labelled `proxy`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpface::eigenspace::{build_eigenspace, center, mean_image, symmetric_eigen};
use lpface::image::{decode_pgm, encode_pgm, resize_nearest, rotate_nearest, write_pgm};
use lpface::logpolar::{
    log_polar_transform, log_polar_transform_sized, shift_columns, LogPolarConfig,
};
use lpface::mlp::{
    backward, batch_error, init_network, parameter_step, rate_change, train, Hyperparams, Network,
    Pattern, WeightState,
};
use lpface::pipeline::{
    compare_modes, load_generic, load_orl, split, sweep_hidden1, write_comparison_csv, Dataset,
    Mode, PipelineConfig,
};
use lpface::synth;
use lpface::{GrayImage, ImageVector};

const ROTATION_MAD_MAX: f64 = 10.0;
const SCALE_MAD_MAX: f64 = 10.0;
const GRAM_RTOL: f64 = 1e-8;
const RESIDUAL_RTOL: f64 = 1e-8;
const TRACE_RTOL: f64 = 1e-8;
const FD_RTOL: f64 = 1e-5;
const XOR_E: f64 = 0.01;
const XOR_EPOCHS: usize = 5000;
const XOR_SEEDS_NEEDED: usize = 4;
const SWEEP_EPOCHS: usize = 2000;
const ORL_RATE_MIN: f64 = 90.0;
const ORL_GAP_MIN: f64 = 3.0;
const PROPERTY_SECS_MAX: f64 = 60.0;
const ORL_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Blocked,
}

struct Report {
    failed: bool,
}

impl Report {
    fn line(&mut self, status: Status, id: &str, text: impl AsRef<str>) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => {
                self.failed = true;
                "FAIL"
            }
            Status::Blocked => "BLOCKED",
        };
        println!("{tag:<7} {id:<10} {}", text.as_ref());
    }

    fn check(&mut self, id: &str, ok: bool, text: impl AsRef<str>) {
        self.line(if ok { Status::Pass } else { Status::Fail }, id, text);
    }
}

fn fixtures() -> Vec<GrayImage> {
    (0..5)
        .map(|s| synth::fixture(s, synth::ORL_WIDTH, synth::ORL_HEIGHT))
        .collect()
}

fn mad(a: &GrayImage, b: &GrayImage) -> f64 {
    a.mean_abs_diff(b).expect("same size")
}

fn pgm_round_trip() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut n = 0;
    let mut ok = true;
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(1..64), rng.gen_range(1..64));
        let img = GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap();
        ok &= decode_pgm(&encode_pgm(&img)).ok().as_ref() == Some(&img);
        n += 1;
    }
    let p2 = decode_pgm(b"P2\n# c\n3 1\n255\n0 128 255\n").map(|i| i.pixels().to_vec());
    ok &= p2.ok() == Some(vec![0, 128, 255]);
    (ok, format!("{n} random P5 images plus an ASCII P2 file"))
}

fn rotation_shift() -> (bool, String) {
    let cfg = LogPolarConfig::default();
    let mut worst: f64 = 0.0;
    for img in fixtures() {
        let base = log_polar_transform(&img, &cfg).unwrap();
        let side = base.width() as f64;
        for delta in [15.0, 30.0, 45.0, 90.0] {
            let rotated = log_polar_transform(&rotate_nearest(&img, delta), &cfg).unwrap();
            let k = (delta * side / 360.0).round() as i64;
            worst = worst.max(mad(&rotated, &shift_columns(&base, k)));
        }
    }
    (
        worst <= ROTATION_MAD_MAX,
        format!("worst mean |diff| {worst:.2} over 5 fixtures x {{15,30,45,90}} deg"),
    )
}

fn scale_invariance() -> (bool, String) {
    let cfg = LogPolarConfig::default();
    let mut worst: f64 = 0.0;
    for img in fixtures() {
        let base = log_polar_transform(&img, &cfg).unwrap();
        for s in [2, 3] {
            let up = resize_nearest(&img, img.width() * s, img.height() * s).unwrap();
            let lp = log_polar_transform_sized(&up, &cfg, base.width()).unwrap();
            worst = worst.max(mad(&lp, &base));
        }
    }
    (
        worst <= SCALE_MAD_MAX,
        format!("worst mean |diff| {worst:.2} over 5 fixtures x {{2,3}}x"),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// The direct route: Jacobi on the full H×H covariance, assembled here.
fn eigen_checks() -> Vec<(&'static str, bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut gram, mut ortho, mut resid, mut trace): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..20 {
        let h = rng.gen_range(4..=12);
        let p = rng.gen_range(2..=6.min(h));
        let train: Vec<ImageVector> = (0..p)
            .map(|_| ImageVector::new((0..h).map(|_| rng.gen_range(0.0..255.0)).collect()).unwrap())
            .collect();
        let mean = mean_image(&train).unwrap();
        let x = center(&train, &mean).unwrap();
        let space = build_eigenspace(&x, &mean, 40).unwrap();

        let mut omega = vec![vec![0.0; h]; h];
        for col in x.columns() {
            for a in 0..h {
                for b in 0..h {
                    omega[a][b] += col[a] * col[b];
                }
            }
        }
        let omega_f = omega.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let direct =
            symmetric_eigen(&lpface::eigenspace::SymMatrix::from_rows(&omega).unwrap()).unwrap();
        for (k, &l) in space.eigenvalues().iter().enumerate() {
            gram = gram.max((l - direct.values[k]).abs() / direct.values[k].abs());
        }
        for (i, vi) in space.basis().iter().enumerate() {
            for (j, vj) in space.basis().iter().enumerate() {
                ortho = ortho.max((dot(vi, vj) - if i == j { 1.0 } else { 0.0 }).abs());
            }
            let l = space.eigenvalues()[i];
            let r: f64 = omega
                .iter()
                .zip(vi)
                .map(|(row, &v)| (dot(row, vi) - l * v).powi(2))
                .sum::<f64>()
                .sqrt();
            resid = resid.max(r / omega_f);
        }
        let total: f64 = space.eigenvalues().iter().sum();
        let fro = x.columns().iter().flatten().map(|v| v * v).sum::<f64>();
        trace = trace.max((total - fro).abs() / fro);
    }
    vec![
        (
            "C1.gram",
            gram <= GRAM_RTOL,
            format!(
                "snapshot vs direct eigenvalues, worst relative error {gram:.2e} (20 instances)"
            ),
        ),
        (
            "C1.ortho",
            ortho <= RESIDUAL_RTOL && resid <= RESIDUAL_RTOL,
            format!("max |VtV - I| {ortho:.2e}, max residual / |Omega|_F {resid:.2e}"),
        ),
        (
            "C1.trace",
            trace <= TRACE_RTOL,
            format!("sum of eigenvalues vs |X|_F^2, worst relative error {trace:.2e}"),
        ),
    ]
}

fn random_batch(rng: &mut ChaCha8Rng, sizes: &[usize], n: usize) -> Vec<Pattern> {
    let (ni, no) = (sizes[0], *sizes.last().unwrap());
    (0..n)
        .map(|k| {
            Pattern::labeled(
                (0..ni).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                k % no,
                no,
            )
        })
        .collect()
}

fn perturbed(net: &Network, i: usize, h: f64) -> Network {
    let mut n = net.clone();
    *n.params_mut().iter_mut().nth(i).unwrap() += h;
    n
}

fn finite_differences() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let sizes = [
            rng.gen_range(2..6),
            rng.gen_range(2..6),
            rng.gen_range(2..5),
            rng.gen_range(1..4),
        ];
        let net = init_network(&sizes, seed).unwrap();
        let batch = random_batch(&mut rng, &sizes, 5);
        let analytic: Vec<f64> = backward(&net, &batch).unwrap().iter().copied().collect();
        for (i, &g) in analytic.iter().enumerate() {
            let fd = (batch_error(&perturbed(&net, i, h), &batch).unwrap()
                - batch_error(&perturbed(&net, i, -h), &batch).unwrap())
                / (2.0 * h);
            let scale = g.abs().max(fd.abs());
            if scale > 1e-7 {
                worst = worst.max((g - fd).abs() / scale);
            }
        }
    }
    (
        worst < FD_RTOL,
        format!("worst relative error {worst:.2e} over 10 random nets"),
    )
}

fn update_arithmetic() -> (bool, String) {
    let hp = Hyperparams::default();
    let mut s = WeightState {
        eta: 0.02,
        lambda_bar: 0.0,
        delta_prev: 0.1,
    };
    let dw = parameter_step(1.0, &mut s, &hp);
    let up = rate_change(0.5, 0.2, 0.02, &hp);
    let down = rate_change(0.5, -0.2, 0.02, &hp);
    let zero = rate_change(0.0, 0.2, 0.02, &hp);
    let mut t = WeightState {
        eta: 0.02,
        lambda_bar: 0.5,
        delta_prev: 0.0,
    };
    parameter_step(0.2, &mut t, &hp);
    let ok = (dw - 0.07).abs() < 1e-15
        && up == 0.001
        && (down + 0.01).abs() < 1e-15
        && zero == 0.0
        && (t.lambda_bar - 0.41).abs() < 1e-15;
    (
        ok,
        format!(
            "dw {dw:.4}, +a {up}, -b*eta {down:.4}, zero {zero}, smoothed {:.4}",
            t.lambda_bar
        ),
    )
}

fn eta_positivity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let hp = Hyperparams::default();
    let mut s = WeightState {
        eta: hp.eta0,
        lambda_bar: 0.0,
        delta_prev: 0.0,
    };
    let mut min = f64::INFINITY;
    for _ in 0..10_000 {
        parameter_step(rng.gen_range(-10.0..10.0), &mut s, &hp);
        min = min.min(s.eta);
    }
    (
        min > 0.0,
        format!("smallest eta {min:.3e} after 10^4 random updates"),
    )
}

fn plain_descent() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let sizes = [4, 5, 3];
    let net = init_network(&sizes, 1).unwrap();
    let batch = random_batch(&mut rng, &sizes, 8);
    let hp = Hyperparams {
        rate_increase: 0.0,
        rate_decrease: 0.0,
        alpha: 0.0,
        max_epochs: 5,
        e_max: 0.0,
        goal: 0.0,
        ..Default::default()
    };
    let out = train(net.clone(), &batch, &hp).unwrap();
    let scale = hp.objective.gradient_scale(batch.len(), 3);
    let mut expect = net;
    for _ in 0..5 {
        let g = backward(&expect, &batch).unwrap();
        for (w, g) in expect.params_mut().iter_mut().zip(g.iter()) {
            *w -= hp.eta0 * (scale * g);
        }
    }
    (
        out.network == expect,
        "5 updates with a = b = alpha = 0 equal w - eta0 * grad bit for bit".into(),
    )
}

fn xor() -> (bool, String) {
    let batch: Vec<Pattern> = [
        ([0.0, 0.0], -1.0),
        ([0.0, 1.0], 1.0),
        ([1.0, 0.0], 1.0),
        ([1.0, 1.0], -1.0),
    ]
    .into_iter()
    .map(|(x, t)| Pattern {
        input: x.to_vec(),
        target: vec![t],
    })
    .collect();
    let hp = Hyperparams {
        max_epochs: XOR_EPOCHS,
        e_max: 0.0,
        ..Default::default()
    };
    let mut detail = Vec::new();
    let mut converged = 0;
    for seed in 0..5 {
        let out = train(init_network(&[2, 4, 1], seed).unwrap(), &batch, &hp).unwrap();
        match out.trace().iter().position(|&e| e < XOR_E) {
            Some(epoch) => {
                converged += 1;
                detail.push(format!("seed {seed}: {epoch}"));
            }
            None => detail.push(format!("seed {seed}: E {:.3}", out.final_error())),
        }
    }
    (
        converged >= XOR_SEEDS_NEEDED,
        format!(
            "{converged}/5 seeds reach E < {XOR_E} within {XOR_EPOCHS} epochs ({})",
            detail.join(", ")
        ),
    )
}

fn hidden_width_trend(ds: &Dataset) -> (bool, String) {
    let cfg = PipelineConfig {
        mode: Mode::LogPolar,
        ..PipelineConfig::default()
    };
    let (train_set, _) = split(ds, &cfg.split).unwrap();
    let results = sweep_hidden1(&train_set, &cfg, &[5, 10, 20, 40], SWEEP_EPOCHS).unwrap();
    let finals: Vec<(usize, f64)> = results
        .iter()
        .map(|r| (r.hidden1, r.final_error().unwrap_or(f64::NAN)))
        .collect();
    let e = |n: usize| {
        finals
            .iter()
            .find(|(h, _)| *h == n)
            .map(|(_, e)| *e)
            .unwrap()
    };
    let text = finals
        .iter()
        .map(|(h, e)| format!("{h}: {e:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    (
        e(40) <= e(10),
        format!("final E after {SWEEP_EPOCHS} epochs, hidden1 {text}"),
    )
}

fn orl_end_to_end(ds: &Dataset, csv: PathBuf) -> Vec<(&'static str, bool, String)> {
    let cfg = PipelineConfig::default();
    let rows = compare_modes(ds, &cfg, &ORL_SEEDS).unwrap();
    let rate = |mode: Mode, seed: u64| {
        rows.iter()
            .find(|r| r.mode == mode && r.seed == seed)
            .map(|r| r.metrics.recognition_rate)
            .unwrap()
    };
    let lp: Vec<f64> = ORL_SEEDS.iter().map(|&s| rate(Mode::LogPolar, s)).collect();
    let vis: Vec<f64> = ORL_SEEDS.iter().map(|&s| rate(Mode::Visual, s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gaps: Vec<f64> = lp.iter().zip(&vis).map(|(a, b)| a - b).collect();
    let mean_gap = mean(&gaps);
    let test_n = rows[0].metrics.total;

    std::fs::create_dir_all(csv.parent().unwrap()).unwrap();
    let mut buf = Vec::new();
    write_comparison_csv(&rows, &mut buf).unwrap();
    std::fs::write(&csv, &buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let published_ok = text.lines().skip(1).all(|l| {
        let cols: Vec<&str> = l.split(',').collect();
        let want = if cols[0] == "visual" { "10.5" } else { "2.5" };
        cols[6] == want
    });

    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.1}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    vec![
        (
            "C4a",
            mean(&lp) >= ORL_RATE_MIN,
            format!(
                "log-polar recognition {:.2}% mean over seeds 0,1,2 ({}) on {test_n} test images",
                mean(&lp),
                fmt(&lp)
            ),
        ),
        (
            "C4b",
            mean_gap >= ORL_GAP_MIN,
            format!(
                "log-polar minus visual {mean_gap:.2} points mean of paired seeds ({}; visual {})",
                fmt(&gaps),
                fmt(&vis)
            ),
        ),
        (
            "C4c",
            published_ok,
            format!(
                "published 10.5% / 2.5% error rates alongside measured in {}",
                csv.display()
            ),
        ),
    ]
}

fn otcbvs_shaped_ingestion() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for k in 0..16 {
        let sub = dir.path().join(format!("person{k:02}"));
        std::fs::create_dir(&sub).unwrap();
        for j in 0..125 {
            let img = GrayImage::new(32, 24, (0..32 * 24).map(|_| rng.gen()).collect()).unwrap();
            write_pgm(sub.join(format!("{j:04}.pgm")), &img).unwrap();
        }
    }
    let ds = load_generic(dir.path(), (92, 112)).unwrap();
    let ok = ds.len() == 2000 && ds.num_classes() == 16 && ds.image_dimensions() == Some((92, 112));
    (
        ok,
        format!(
            "documented only (87.84% / 96.36% not reproduced); generic loader ingests {} images of {} classes",
            ds.len(),
            ds.num_classes()
        ),
    )
}

fn main() -> ExitCode {
    let mut report = Report { failed: false };
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");

    let t = Instant::now();
    let mut c1 = vec![
        ("C1.pgm", pgm_round_trip()),
        ("C1.rotate", rotation_shift()),
        ("C1.scale", scale_invariance()),
    ];
    for (id, ok, text) in eigen_checks() {
        c1.push((id, (ok, text)));
    }
    c1.push(("C1.fd", finite_differences()));
    c1.push(("C1.update", update_arithmetic()));
    c1.push(("C1.eta", eta_positivity()));
    c1.push(("C1.descent", plain_descent()));
    for (id, (ok, text)) in c1 {
        report.check(id, ok, text);
    }
    let secs = t.elapsed().as_secs_f64();
    report.check(
        "C1.time",
        secs < PROPERTY_SECS_MAX,
        format!("property suite took {secs:.1}s"),
    );

    let (ok, text) = xor();
    report.check("C2", ok, text);

    let (orl, label) = match std::env::var_os("LPFACE_ORL_DIR") {
        Some(dir) => (
            load_orl(&dir).expect("LPFACE_ORL_DIR holds an ORL tree"),
            "ORL",
        ),
        None => {
            report.line(
                Status::Blocked,
                "C3",
                "ORL not available (set LPFACE_ORL_DIR); running proxy below",
            );
            report.line(
                Status::Blocked,
                "C4",
                "ORL not available (set LPFACE_ORL_DIR); running proxy below",
            );
            (synth::dataset(&synth::SynthSpec::default()), "proxy")
        }
    };
    let id = |c: &str| {
        if label == "ORL" {
            c.to_string()
        } else {
            format!("{c}/proxy")
        }
    };

    let t = Instant::now();
    let (ok, text) = hidden_width_trend(&orl);
    report.check(
        &id("C3"),
        ok,
        format!("{text} [{:.0}s]", t.elapsed().as_secs_f64()),
    );

    let t = Instant::now();
    let csv = out_dir.join(format!("{label}_comparison.csv"));
    let results = orl_end_to_end(&orl, csv);
    let secs = t.elapsed().as_secs_f64();
    for (c, ok, text) in results {
        report.check(&id(c), ok, format!("{text} [{secs:.0}s]"));
    }

    let (ok, text) = otcbvs_shaped_ingestion();
    report.check("C5", ok, text);

    if report.failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
