//! Procedural face-like images.
//!
//! Used as test fixtures and as a stand-in dataset with the ORL layout
//! (92×112 images, one directory per subject) when the real images are not
//! at hand. Every subject gets a fixed set of facial proportions, tones and a
//! skin texture; every image of that subject adds a pose (rotation, scale,
//! small shift), an expression, a lighting change and sensor noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{write_pgm, GrayImage};
use crate::pipeline::{Dataset, Sample};

pub const ORL_WIDTH: usize = 92;
pub const ORL_HEIGHT: usize = 112;

/// Identity-specific appearance.
#[derive(Debug, Clone)]
pub struct Subject {
    head_a: f64,
    head_b: f64,
    skin: f64,
    hair: f64,
    hairline: f64,
    eye_dx: f64,
    eye_y: f64,
    eye_r: f64,
    brow_y: f64,
    brow_tone: f64,
    nose_len: f64,
    nose_w: f64,
    mouth_y: f64,
    mouth_w: f64,
    glasses: bool,
    beard: bool,
    texture: [(f64, f64, f64, f64); 3],
}

impl Subject {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut tex = || {
            (
                rng.gen_range(0.15..0.6),
                rng.gen_range(0.15..0.6),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(4.0..14.0),
            )
        };
        let texture = [tex(), tex(), tex()];
        Subject {
            head_a: rng.gen_range(27.0..36.0),
            head_b: rng.gen_range(36.0..46.0),
            skin: rng.gen_range(110.0..210.0),
            hair: rng.gen_range(15.0..100.0),
            hairline: rng.gen_range(-32.0..-18.0),
            eye_dx: rng.gen_range(10.0..17.0),
            eye_y: rng.gen_range(-12.0..-4.0),
            eye_r: rng.gen_range(2.5..5.0),
            brow_y: rng.gen_range(5.0..9.0),
            brow_tone: rng.gen_range(0.2..0.7),
            nose_len: rng.gen_range(8.0..16.0),
            nose_w: rng.gen_range(2.5..6.0),
            mouth_y: rng.gen_range(14.0..22.0),
            mouth_w: rng.gen_range(7.0..14.0),
            glasses: rng.gen_bool(0.25),
            beard: rng.gen_bool(0.2),
            texture,
        }
    }
}

/// Per-image nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation_deg: f64,
    pub scale: f64,
    pub shift: (f64, f64),
    pub smile: f64,
    pub gain: f64,
    pub noise: f64,
    pub noise_seed: u64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose {
            rotation_deg: 0.0,
            scale: 1.0,
            shift: (0.0, 0.0),
            smile: 0.0,
            gain: 1.0,
            noise: 0.0,
            noise_seed: 0,
        }
    }
}

/// Ranges the nuisance parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
    pub max_shift: f64,
    pub max_smile: f64,
    pub gain_range: (f64, f64),
    pub noise: f64,
}

impl Default for Variation {
    /// In-plane tilt up to 20° and scale within 10%, the limits quoted for
    /// the ORL collection, plus up to a pixel of centering error.
    fn default() -> Self {
        Variation {
            max_rotation_deg: 20.0,
            scale_range: (0.9, 1.1),
            max_shift: 1.0,
            max_smile: 1.0,
            gain_range: (0.85, 1.15),
            noise: 6.0,
        }
    }
}

impl Variation {
    pub fn draw(&self, rng: &mut impl Rng) -> Pose {
        let sym =
            |rng: &mut dyn rand::RngCore, m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let range = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        };
        Pose {
            rotation_deg: sym(rng, self.max_rotation_deg),
            scale: range(rng, self.scale_range),
            shift: (sym(rng, self.max_shift), sym(rng, self.max_shift)),
            smile: sym(rng, self.max_smile),
            gain: range(rng, self.gain_range),
            noise: self.noise,
            noise_seed: rng.gen(),
        }
    }
}

fn smoothstep(edge: f64, width: f64, d: f64) -> f64 {
    // 1 inside (d < edge - width), 0 outside (d > edge + width)
    let t = ((edge + width - d) / (2.0 * width)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn ellipse(u: f64, v: f64, cu: f64, cv: f64, a: f64, b: f64) -> f64 {
    (((u - cu) / a).powi(2) + ((v - cv) / b).powi(2)).sqrt()
}

/// Renders one face into a `width × height` frame.
pub fn render(subject: &Subject, pose: &Pose, width: usize, height: usize) -> GrayImage {
    let s = subject;
    let cx = (width / 2) as f64 + pose.shift.0;
    let cy = (height / 2) as f64 + pose.shift.1;
    let (sin, cos) = pose.rotation_deg.to_radians().sin_cos();
    let frame_scale = width as f64 / ORL_WIDTH as f64;
    let mut noise = ChaCha8Rng::seed_from_u64(pose.noise_seed);
    GrayImage::from_fn(width, height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        // face coordinates: undo rotation and scale
        let k = pose.scale * frame_scale;
        let u = (dx * cos + dy * sin) / k;
        let v = (-dx * sin + dy * cos) / k;

        let background = 25.0 + 10.0 * (y as f64 / height as f64);
        let head = smoothstep(1.0, 0.04, ellipse(u, v, 0.0, 2.0, s.head_a, s.head_b));
        let hair_mask = smoothstep(
            1.0,
            0.05,
            ellipse(u, v, 0.0, -4.0, s.head_a + 4.0, s.head_b + 3.0),
        ) * smoothstep(0.0, 2.0, v - s.hairline);
        let (t0, t1, t2) = (s.texture[0], s.texture[1], s.texture[2]);
        let tex = [t0, t1, t2]
            .iter()
            .map(|&(fu, fv, ph, amp)| amp * (fu * u + fv * v + ph).sin())
            .sum::<f64>();
        let shade = 1.0 - 0.25 * (u / s.head_a).powi(2);
        let mut skin = s.skin * shade + tex;

        // eyes
        for side in [-1.0, 1.0] {
            let eu = side * s.eye_dx;
            let e = ellipse(u, v, eu, s.eye_y, s.eye_r * 1.6, s.eye_r);
            skin = skin * (1.0 - 0.75 * smoothstep(1.0, 0.15, e)) + 60.0 * smoothstep(0.45, 0.1, e);
            let brow = ellipse(u, v, eu, s.eye_y - s.brow_y, s.eye_r * 2.2, 1.4);
            skin *= 1.0 - s.brow_tone * smoothstep(1.0, 0.2, brow);
            if s.glasses {
                let rim = (ellipse(u, v, eu, s.eye_y, s.eye_r * 2.4, s.eye_r * 2.0) - 1.0).abs();
                skin *= 1.0 - 0.6 * smoothstep(0.0, 0.08, rim);
            }
        }
        // nose
        let nose = ellipse(
            u,
            v,
            0.0,
            s.eye_y + s.nose_len * 0.6,
            s.nose_w,
            s.nose_len * 0.6,
        );
        skin *= 1.0 - 0.25 * smoothstep(1.0, 0.3, nose);
        // mouth, curved by the expression
        let curve = pose.smile * 0.06 * u * u;
        let mouth = ellipse(
            u,
            v - curve,
            0.0,
            s.mouth_y,
            s.mouth_w,
            1.8 + pose.smile.abs(),
        );
        skin *= 1.0 - 0.55 * smoothstep(1.0, 0.2, mouth);
        if s.beard {
            let beard = smoothstep(
                1.0,
                0.1,
                ellipse(u, v, 0.0, s.mouth_y + 6.0, s.head_a * 0.8, 14.0),
            );
            skin = skin * (1.0 - 0.5 * beard) + 30.0 * beard;
        }

        let face = skin * (1.0 - hair_mask) + (s.hair + 0.5 * tex) * hair_mask;
        let value = background * (1.0 - head.max(hair_mask)) + face * head.max(hair_mask);
        let n = if pose.noise > 0.0 {
            noise.gen_range(-pose.noise..=pose.noise)
        } else {
            0.0
        };
        (value * pose.gain + n).round().clamp(0.0, 255.0) as u8
    })
    .expect("positive dimensions")
}

/// An upright, noise-free face of a random subject, `width × height`.
pub fn fixture(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subject = Subject::random(&mut rng);
    let pose = Pose {
        noise: 3.0,
        noise_seed: seed,
        ..Pose::default()
    };
    render(&subject, &pose, width, height)
}

/// Specification of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    pub images_per_subject: usize,
    pub width: usize,
    pub height: usize,
    pub variation: Variation,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// ORL-shaped: 40 subjects × 10 images of 92×112.
    fn default() -> Self {
        SynthSpec {
            subjects: 40,
            images_per_subject: 10,
            width: ORL_WIDTH,
            height: ORL_HEIGHT,
            variation: Variation::default(),
            seed: 0,
        }
    }
}

/// Generates the dataset in memory, ordered by subject then image.
pub fn dataset(spec: &SynthSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.subjects * spec.images_per_subject);
    for label in 0..spec.subjects {
        let subject = Subject::random(&mut rng);
        for _ in 0..spec.images_per_subject {
            let pose = spec.variation.draw(&mut rng);
            samples.push(Sample {
                label,
                image: render(&subject, &pose, spec.width, spec.height),
            });
        }
    }
    let names = (1..=spec.subjects).map(|k| format!("s{k}")).collect();
    Dataset::new(samples, names).expect("synthetic dataset is well formed")
}

/// Writes `ds` in the ORL layout: `s<k>/<j>.pgm`, both 1-based.
pub fn write_orl_tree(ds: &Dataset, root: &Path) -> Result<()> {
    let mut counters = vec![0usize; ds.num_classes()];
    for s in ds.samples() {
        counters[s.label] += 1;
        let dir = root.join(format!("s{}", s.label + 1));
        std::fs::create_dir_all(&dir)?;
        write_pgm(dir.join(format!("{}.pgm", counters[s.label])), &s.image)?;
    }
    Ok(())
}
