//! End-to-end recognition pipeline: register, project, classify, measure.

mod bundle;
mod config;
mod dataset;
mod report;

pub use bundle::{load_bundle, read_bundle, save_bundle, write_bundle, FORMAT_VERSION};
pub use config::PipelineConfig;
pub use dataset::{load_generic, load_orl, split, Dataset, Sample, SplitMode, SplitSpec};
pub use report::{
    compare_modes, write_comparison_csv, write_curve_csv, write_sweep_csv, ComparisonRow,
    PUBLISHED_ORL_ERROR_RATE_LOGPOLAR, PUBLISHED_ORL_ERROR_RATE_VISUAL,
};

use serde::{Deserialize, Serialize};

use crate::eigenspace::{
    build_eigenspace_with, center, mean_image, project, Eigenspace, FeatureVector,
};
use crate::error::{Error, Result};
use crate::image::{to_vector, GrayImage, ImageVector};
use crate::logpolar::{log_polar_transform, output_dimensions, LogPolarConfig};
use crate::mlp::{classify, init_network, train_with, Hyperparams, Network, Pattern, StopReason};
use crate::par::{self, Exec};

/// Which registration is applied before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Raw pixels.
    Visual,
    /// Log-polar resampling about the image center.
    #[serde(alias = "log-polar")]
    LogPolar,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Visual => "visual",
            Mode::LogPolar => "logpolar",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visual" => Ok(Mode::Visual),
            "logpolar" | "log-polar" => Ok(Mode::LogPolar),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Applies the registration of `mode` to one image.
pub fn register(img: &GrayImage, mode: Mode, lp: &LogPolarConfig) -> Result<GrayImage> {
    match mode {
        Mode::Visual => Ok(img.clone()),
        Mode::LogPolar => log_polar_transform(img, lp),
    }
}

/// Geometry of the registered image for inputs of `input` size.
pub fn registered_dimensions(
    input: (usize, usize),
    mode: Mode,
    lp: &LogPolarConfig,
) -> Result<(usize, usize)> {
    match mode {
        Mode::Visual => Ok(input),
        Mode::LogPolar => output_dimensions(input.0, input.1, lp),
    }
}

fn registered_vectors(
    images: &[&GrayImage],
    mode: Mode,
    lp: &LogPolarConfig,
    exec: Exec,
) -> Result<Vec<ImageVector>> {
    par::map(exec, images, |img| {
        register(img, mode, lp).map(|r| to_vector(&r))
    })
    .into_iter()
    .collect()
}

/// Per-feature affine map of the training range onto `[-1, 1]`, so every
/// network input starts in the responsive part of tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaling {
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        let width = features
            .first()
            .ok_or_else(|| Error::invalid("no features to fit"))?
            .len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for f in features {
            for (k, &v) in f.as_slice().iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(FeatureScaling { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Constant features map to 0.
    pub fn apply(&self, f: &FeatureVector) -> Vec<f64> {
        f.as_slice()
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    2.0 * (v - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Provenance of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_error: f64,
    pub stop: StopReason,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Everything needed to classify new images.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub mode: Mode,
    pub logpolar: LogPolarConfig,
    /// Size of the raw images the model accepts.
    pub input_dims: (usize, usize),
    pub eigenspace: Eigenspace,
    pub scaling: FeatureScaling,
    pub network: Network,
    pub hyper: Hyperparams,
    pub split: SplitSpec,
    pub class_names: Vec<String>,
    pub meta: TrainingMeta,
}

impl ModelBundle {
    /// Checks that the stages fit together.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = registered_dimensions(self.input_dims, self.mode, &self.logpolar)?;
        if self.eigenspace.dim() != w * h {
            return Err(Error::invalid(format!(
                "eigenspace dimension {} does not match {} geometry {w}x{h}",
                self.eigenspace.dim(),
                self.mode
            )));
        }
        if self.scaling.width() != self.eigenspace.feature_width() {
            return Err(Error::invalid(
                "feature scaling width differs from the eigenspace",
            ));
        }
        if self.network.inputs() != self.eigenspace.feature_width() {
            return Err(Error::invalid(
                "network input width differs from the feature width",
            ));
        }
        if self.network.outputs() != self.class_names.len() {
            return Err(Error::invalid(
                "network output width differs from the class count",
            ));
        }
        Ok(())
    }

    /// Network input for one raw image.
    pub fn features(&self, img: &GrayImage) -> Result<Vec<f64>> {
        if img.dimensions() != self.input_dims {
            return Err(Error::invalid(format!(
                "image is {}x{}, model expects {}x{}",
                img.width(),
                img.height(),
                self.input_dims.0,
                self.input_dims.1
            )));
        }
        let reg = register(img, self.mode, &self.logpolar)?;
        let f = project(&self.eigenspace, &to_vector(&reg))?;
        Ok(self.scaling.apply(&f))
    }

    /// Predicted class and output scores for one raw image.
    pub fn classify(&self, img: &GrayImage) -> Result<(usize, Vec<f64>)> {
        classify(&self.network, &self.features(img)?)
    }
}

/// Intermediate products shared by training and sweeps.
struct PreparedTraining {
    eigenspace: Eigenspace,
    scaling: FeatureScaling,
    patterns: Vec<Pattern>,
    input_dims: (usize, usize),
    warnings: Vec<String>,
}

fn prepare(train: &Dataset, cfg: &PipelineConfig, exec: Exec) -> Result<PreparedTraining> {
    cfg.validate()?;
    let input_dims = train
        .image_dimensions()
        .ok_or_else(|| Error::invalid("training images differ in size"))?;
    let images: Vec<&GrayImage> = train.samples().iter().map(|s| &s.image).collect();
    let vectors = registered_vectors(&images, cfg.mode, &cfg.logpolar, exec)?;
    let mean = mean_image(&vectors)?;
    let data = center(&vectors, &mean)?;
    let eigenspace = build_eigenspace_with(&data, &mean, cfg.features, exec)?;
    let mut warnings = Vec::new();
    if eigenspace.is_padded() {
        warnings.push(format!(
            "only {} positive eigenvalues; features zero-padded to {}",
            eigenspace.rank(),
            cfg.features
        ));
    }
    let features: Vec<FeatureVector> = par::map(exec, &vectors, |v| project(&eigenspace, v))
        .into_iter()
        .collect::<Result<_>>()?;
    let scaling = FeatureScaling::fit(&features)?;
    let classes = train.num_classes();
    let patterns = features
        .iter()
        .zip(train.samples())
        .map(|(f, s)| Pattern::labeled(scaling.apply(f), s.label, classes))
        .collect();
    Ok(PreparedTraining {
        eigenspace,
        scaling,
        patterns,
        input_dims,
        warnings,
    })
}

/// Registers, projects and trains on `train`, packaging the result.
pub fn train_pipeline(train: &Dataset, cfg: &PipelineConfig) -> Result<ModelBundle> {
    train_pipeline_with(train, cfg, Exec::default())
}

pub fn train_pipeline_with(
    train: &Dataset,
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<ModelBundle> {
    let prepared = prepare(train, cfg, exec)?;
    let sizes = cfg.layer_sizes(train.num_classes());
    let net = init_network(&sizes, cfg.hyper.seed)?;
    let outcome = train_with(net, &prepared.patterns, &cfg.hyper, exec)?;
    let meta = TrainingMeta {
        seed: cfg.hyper.seed,
        epochs: outcome.epochs(),
        final_error: outcome.final_error(),
        stop: outcome.stop,
        warnings: prepared.warnings,
    };
    let bundle = ModelBundle {
        mode: cfg.mode,
        logpolar: cfg.logpolar,
        input_dims: prepared.input_dims,
        eigenspace: prepared.eigenspace,
        scaling: prepared.scaling,
        network: outcome.network,
        hyper: cfg.hyper,
        split: cfg.split,
        class_names: train.class_names().to_vec(),
        meta,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Outcome for a single test image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub predicted: usize,
    pub score: f64,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }

    /// Misclassified, or classified correctly with a winning score below `threshold`.
    pub fn rejected(&self, threshold: f64) -> bool {
        !self.correct() || self.score < threshold
    }
}

/// Rates over the first `n_test` images of the interleaved test order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_test: usize,
    pub recognition_rate: f64,
    pub false_rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub total: usize,
    pub correct: usize,
    /// Percent of test images given their own class.
    pub recognition_rate: f64,
    /// Percent of test images misclassified or scored below `threshold`.
    pub false_rejection_rate: f64,
    pub threshold: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub curve: Vec<CurvePoint>,
    /// In the interleaved test order.
    pub predictions: Vec<Prediction>,
}

impl Metrics {
    pub fn error_rate(&self) -> f64 {
        100.0 - self.recognition_rate
    }

    pub fn from_predictions(
        predictions: Vec<Prediction>,
        classes: usize,
        threshold: f64,
    ) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::invalid("no test samples"));
        }
        let mut confusion = vec![vec![0; classes]; classes];
        for p in &predictions {
            confusion[p.label][p.predicted] += 1;
        }
        let rates = |ps: &[Prediction]| {
            let n = ps.len() as f64;
            let correct = ps.iter().filter(|p| p.correct()).count() as f64;
            let rejected = ps.iter().filter(|p| p.rejected(threshold)).count() as f64;
            (100.0 * correct / n, 100.0 * rejected / n)
        };
        let step = classes.max(1);
        let mut ends: Vec<usize> = (1..=predictions.len() / step).map(|k| k * step).collect();
        if ends.last() != Some(&predictions.len()) {
            ends.push(predictions.len());
        }
        let curve = ends
            .into_iter()
            .map(|n| {
                let (rr, frr) = rates(&predictions[..n]);
                CurvePoint {
                    n_test: n,
                    recognition_rate: rr,
                    false_rejection_rate: frr,
                }
            })
            .collect();
        let (recognition_rate, false_rejection_rate) = rates(&predictions);
        Ok(Metrics {
            total: predictions.len(),
            correct: predictions.iter().filter(|p| p.correct()).count(),
            recognition_rate,
            false_rejection_rate,
            threshold,
            confusion,
            curve,
            predictions,
        })
    }

    /// False rejection rate at a different threshold.
    pub fn false_rejection_rate_at(&self, threshold: f64) -> f64 {
        let rejected = self
            .predictions
            .iter()
            .filter(|p| p.rejected(threshold))
            .count();
        100.0 * rejected as f64 / self.total as f64
    }
}

/// Classifies every test image with `bundle` and summarizes the results.
pub fn evaluate(bundle: &ModelBundle, test: &Dataset, threshold: f64) -> Result<Metrics> {
    evaluate_with(bundle, test, threshold, Exec::default())
}

pub fn evaluate_with(
    bundle: &ModelBundle,
    test: &Dataset,
    threshold: f64,
    exec: Exec,
) -> Result<Metrics> {
    if test.num_classes() != bundle.class_names.len() {
        return Err(Error::invalid(format!(
            "test set has {} classes, model has {}",
            test.num_classes(),
            bundle.class_names.len()
        )));
    }
    let order = test.interleaved();
    let predictions: Vec<Prediction> = par::map(exec, &order, |s| {
        bundle
            .classify(&s.image)
            .map(|(predicted, scores)| Prediction {
                label: s.label,
                predicted,
                score: scores[predicted],
            })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Metrics::from_predictions(predictions, test.num_classes(), threshold)
}

/// Error trace of one hidden-layer width in a sweep.
#[derive(Debug)]
pub struct SweepResult {
    pub hidden1: usize,
    pub trace: Result<Vec<f64>>,
}

impl SweepResult {
    pub fn final_error(&self) -> Option<f64> {
        self.trace.as_ref().ok().and_then(|t| t.last().copied())
    }
}

/// Trains one network per first-hidden-layer width for exactly `epochs`
/// updates from the same seed, returning every error trace. A failing width
/// is reported in its own slot without stopping the others.
pub fn sweep_hidden1(
    train: &Dataset,
    cfg: &PipelineConfig,
    sizes: &[usize],
    epochs: usize,
) -> Result<Vec<SweepResult>> {
    sweep_hidden1_with(train, cfg, sizes, epochs, Exec::default())
}

pub fn sweep_hidden1_with(
    train: &Dataset,
    cfg: &PipelineConfig,
    sizes: &[usize],
    epochs: usize,
    exec: Exec,
) -> Result<Vec<SweepResult>> {
    if sizes.is_empty() {
        return Err(Error::invalid("sweep needs at least one hidden-layer size"));
    }
    let prepared = prepare(train, cfg, exec)?;
    let hp = Hyperparams {
        max_epochs: epochs,
        e_max: 0.0,
        goal: 0.0,
        ..cfg.hyper
    };
    let classes = train.num_classes();
    // Each width trains sequentially inside; the widths themselves fan out.
    Ok(par::map(exec, sizes, |&hidden1| {
        let trace = (|| {
            let mut sizes = cfg.layer_sizes(classes);
            sizes[1] = hidden1;
            let net = init_network(&sizes, hp.seed)?;
            let out = train_with(net, &prepared.patterns, &hp, Exec::Sequential)?;
            Ok(out.state.trace)
        })();
        SweepResult { hidden1, trace }
    }))
}
