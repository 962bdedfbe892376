//! Fully connected tanh network trained by batch backpropagation with
//! momentum and per-parameter delta-bar-delta learning rates.
//!
//! One parameter update happens per epoch: gradients of the summed squared
//! error are accumulated over the whole training set first. Every weight and
//! every bias carries its own learning rate `η`, smoothed gradient `λ̄` and
//! previous update `Δw`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Patterns per work unit when accumulating batch gradients. Fixed so the
/// summation order, and with it every bit of the result, does not depend on
/// the thread count.
pub const GRADIENT_CHUNK: usize = 16;

/// Smallest learning rate a decrease can reach.
pub const ETA_FLOOR: f64 = f64::MIN_POSITIVE;

/// Weights (`outputs × inputs`, row-major) and biases of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// A value per network parameter, laid out like the network itself. Used for
/// the parameters, their gradients and the per-parameter training state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    pub fn filled(sizes: &[usize], value: f64) -> Self {
        ParamSet {
            layers: sizes
                .windows(2)
                .map(|w| LayerParams {
                    weights: vec![value; w[0] * w[1]],
                    biases: vec![value; w[1]],
                })
                .collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        ParamSet::filled(sizes, 0.0)
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.len() == b.weights.len() && a.biases.len() == b.biases.len()
            })
    }

    fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }
}

/// A feed-forward network with tanh activation on every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sizes: Vec<usize>,
    params: ParamSet,
}

impl Network {
    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        validate_sizes(sizes)?;
        Ok(Network {
            sizes: sizes.to_vec(),
            params: ParamSet::zeros(sizes),
        })
    }

    pub fn from_params(sizes: &[usize], params: ParamSet) -> Result<Self> {
        validate_sizes(sizes)?;
        if !params.same_shape(&ParamSet::zeros(sizes)) {
            return Err(Error::invalid("parameter shapes do not match layer sizes"));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(Network {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid(format!(
            "a network needs at least 2 layers, got {}",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer widths must be positive: {sizes:?}"
        )));
    }
    Ok(())
}

/// Weights uniform in `±1/√fan_in` from a seeded ChaCha stream; biases zero.
pub fn init_network(sizes: &[usize], seed: u64) -> Result<Network> {
    let mut net = Network::zeros(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (layer, w) in net.params.layers.iter_mut().zip(sizes.windows(2)) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        for v in &mut layer.weights {
            *v = rng.gen_range(-bound..=bound);
        }
    }
    Ok(net)
}

/// Input and output of every layer for one pattern.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `layers[0]` is the input; `layers[k]` the output of layer `k`.
    pub layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least input and output")
    }
}

pub fn forward(net: &Network, x: &[f64]) -> Result<Activations> {
    if x.len() != net.inputs() {
        return Err(Error::invalid(format!(
            "input has length {}, network expects {}",
            x.len(),
            net.inputs()
        )));
    }
    Ok(forward_unchecked(net, x))
}

fn forward_unchecked(net: &Network, x: &[f64]) -> Activations {
    let mut layers = Vec::with_capacity(net.sizes.len());
    layers.push(x.to_vec());
    for (p, w) in net.params.layers.iter().zip(net.sizes.windows(2)) {
        let prev = layers.last().expect("input pushed");
        let (n_in, n_out) = (w[0], w[1]);
        let out: Vec<f64> = (0..n_out)
            .map(|o| {
                let row = &p.weights[o * n_in..(o + 1) * n_in];
                let z: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>() + p.biases[o];
                z.tanh()
            })
            .collect();
        layers.push(out);
    }
    Activations { layers }
}

/// An input with its desired output.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Pattern {
    /// Pattern whose target is `+1` at `label` and `-1` elsewhere.
    pub fn labeled(input: Vec<f64>, label: usize, classes: usize) -> Self {
        Pattern {
            input,
            target: encode_target(label, classes),
        }
    }
}

/// `+1` at `label`, `-1` at every other of `classes` positions.
pub fn encode_target(label: usize, classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|k| if k == label { 1.0 } else { -1.0 })
        .collect()
}

fn check_batch(net: &Network, batch: &[Pattern]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    for (k, p) in batch.iter().enumerate() {
        if p.input.len() != net.inputs() || p.target.len() != net.outputs() {
            return Err(Error::invalid(format!(
                "pattern {k} has shape {}→{}, network is {}→{}",
                p.input.len(),
                p.target.len(),
                net.inputs(),
                net.outputs()
            )));
        }
    }
    Ok(())
}

fn pattern_error(target: &[f64], output: &[f64]) -> f64 {
    0.5 * target
        .iter()
        .zip(output)
        .map(|(d, y)| (d - y).powi(2))
        .sum::<f64>()
}

/// `E = Σ_k ½ Σ_i (d_i − y_i)²` over the batch.
pub fn batch_error(net: &Network, batch: &[Pattern]) -> Result<f64> {
    check_batch(net, batch)?;
    Ok(batch_error_unchecked(net, batch, Exec::default()))
}

fn batch_error_unchecked(net: &Network, batch: &[Pattern], exec: Exec) -> f64 {
    par::map_chunks(exec, batch, GRADIENT_CHUNK, |chunk| {
        chunk
            .iter()
            .map(|p| pattern_error(&p.target, forward_unchecked(net, &p.input).output()))
            .sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Accumulates the gradient of one pattern's error into `grads`, returning
/// that pattern's error.
fn accumulate_pattern(net: &Network, p: &Pattern, grads: &mut ParamSet) -> f64 {
    let acts = forward_unchecked(net, &p.input);
    let out = acts.output();
    let err = pattern_error(&p.target, out);

    // δ at the output: ∂E/∂z = (y − d)(1 − y²)
    let mut delta: Vec<f64> = out
        .iter()
        .zip(&p.target)
        .map(|(y, d)| (y - d) * (1.0 - y * y))
        .collect();

    for l in (0..net.params.layers.len()).rev() {
        let n_in = net.sizes[l];
        let prev = &acts.layers[l];
        let g = &mut grads.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            let row = &mut g.weights[o * n_in..(o + 1) * n_in];
            for (gw, a) in row.iter_mut().zip(prev) {
                *gw += d * a;
            }
            g.biases[o] += d;
        }
        if l > 0 {
            let w = &net.params.layers[l].weights;
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| d * w[o * n_in + i])
                        .sum();
                    back * (1.0 - prev[i] * prev[i])
                })
                .collect();
        }
    }
    err
}

/// Batch error and its exact gradient, summed over all patterns.
pub fn batch_gradient(net: &Network, batch: &[Pattern]) -> Result<(f64, ParamSet)> {
    batch_gradient_with(net, batch, Exec::default())
}

pub fn batch_gradient_with(
    net: &Network,
    batch: &[Pattern],
    exec: Exec,
) -> Result<(f64, ParamSet)> {
    check_batch(net, batch)?;
    Ok(batch_gradient_unchecked(net, batch, exec))
}

fn batch_gradient_unchecked(net: &Network, batch: &[Pattern], exec: Exec) -> (f64, ParamSet) {
    let partials = par::map_chunks(exec, batch, GRADIENT_CHUNK, |chunk| {
        let mut g = ParamSet::zeros(&net.sizes);
        let e: f64 = chunk
            .iter()
            .map(|p| accumulate_pattern(net, p, &mut g))
            .sum();
        (e, g)
    });
    let mut iter = partials.into_iter();
    let (mut error, mut grads) = iter.next().expect("batch is non-empty");
    for (e, g) in iter {
        error += e;
        grads.add_assign(&g);
    }
    (error, grads)
}

/// `∂E/∂w` for every weight and bias, summed over the batch.
pub fn backward(net: &Network, batch: &[Pattern]) -> Result<ParamSet> {
    batch_gradient(net, batch).map(|(_, g)| g)
}

/// The quantity whose gradient drives the weight updates.
///
/// Both share their minimizer with the summed error `E` reported by
/// [`batch_error`]; they differ only in how the gradient is scaled, which
/// sets the effective step size for a given learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `E = Σ_k ½ Σ_i (d_i − y_i)²`, gradient used as is.
    SumSquared,
    /// Mean squared error over all `P × n_out` outputs, `2E / (P·n_out)`;
    /// the performance measure of MATLAB's `traingdm`.
    Mse,
}

impl Objective {
    /// Factor turning `∂E/∂w` into the gradient of this objective.
    pub fn gradient_scale(self, patterns: usize, outputs: usize) -> f64 {
        match self {
            Objective::SumSquared => 1.0,
            Objective::Mse => 2.0 / (patterns * outputs) as f64,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Initial learning rate of every parameter.
    pub eta0: f64,
    /// Momentum: fraction of the previous update carried into the next.
    pub alpha: f64,
    /// Additive learning-rate increase when gradient signs agree.
    pub rate_increase: f64,
    /// Multiplicative learning-rate decrease when gradient signs disagree.
    pub rate_decrease: f64,
    /// Weight of the previous smoothed gradient.
    pub smoothing: f64,
    pub max_epochs: usize,
    /// Stop once the gradient norm falls to this value.
    pub goal: f64,
    /// Stop once the total error `E` falls to this value.
    pub e_max: f64,
    pub seed: u64,
    pub objective: Objective,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            eta0: 0.02,
            alpha: 0.9,
            rate_increase: 0.001,
            rate_decrease: 0.5,
            smoothing: 0.7,
            max_epochs: 70_000,
            goal: 1e-6,
            e_max: 1e-3,
            seed: 0,
            objective: Objective::Mse,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("invalid hyperparameter: {what}")));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad("eta0 must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.rate_increase >= 0.0 && self.rate_increase.is_finite()) {
            return bad("rate_increase must be non-negative");
        }
        if !(0.0..1.0).contains(&self.rate_decrease) {
            return bad("rate_decrease must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return bad("smoothing must lie in [0, 1]");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.goal.is_nan() || self.e_max.is_nan() {
            return bad("stopping thresholds must not be NaN");
        }
        Ok(())
    }
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub eta: ParamSet,
    pub lambda_bar: ParamSet,
    pub delta_prev: ParamSet,
    /// Updates applied so far.
    pub epoch: usize,
    /// Total error at the start of each epoch.
    pub trace: Vec<f64>,
}

impl TrainState {
    pub fn new(net: &Network, hp: &Hyperparams) -> Self {
        TrainState {
            eta: ParamSet::filled(&net.sizes, hp.eta0),
            lambda_bar: ParamSet::zeros(&net.sizes),
            delta_prev: ParamSet::zeros(&net.sizes),
            epoch: 0,
            trace: Vec::new(),
        }
    }
}

/// Optimizer state of a single parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightState {
    pub eta: f64,
    pub lambda_bar: f64,
    pub delta_prev: f64,
}

/// Learning-rate change for one parameter: `+a` when the smoothed and
/// current gradients agree in sign, `−b·η` when they disagree, else 0.
pub fn rate_change(lambda_bar_prev: f64, lambda: f64, eta: f64, hp: &Hyperparams) -> f64 {
    let s = lambda_bar_prev * lambda;
    if s > 0.0 {
        hp.rate_increase
    } else if s < 0.0 {
        -hp.rate_decrease * eta
    } else {
        0.0
    }
}

/// One delta-bar-delta step for a single parameter with gradient `lambda`.
/// Updates `state` and returns the weight change `Δw`.
pub fn parameter_step(lambda: f64, state: &mut WeightState, hp: &Hyperparams) -> f64 {
    let eta = state.eta + rate_change(state.lambda_bar, lambda, state.eta, hp);
    state.eta = eta.max(ETA_FLOOR);
    state.lambda_bar = (1.0 - hp.smoothing) * lambda + hp.smoothing * state.lambda_bar;
    let delta = -state.eta * lambda + hp.alpha * state.delta_prev;
    state.delta_prev = delta;
    delta
}

/// Applies one update to every parameter of `net`.
pub fn update_weights(
    net: &mut Network,
    grads: &ParamSet,
    state: &mut TrainState,
    hp: &Hyperparams,
) -> Result<()> {
    if !grads.same_shape(&net.params) || !state.eta.same_shape(&net.params) {
        return Err(Error::invalid(
            "gradient or state shape does not match the network",
        ));
    }
    for (l, layer) in net.params.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let eta = &mut state.eta.layers[l];
        let lbar = &mut state.lambda_bar.layers[l];
        let dprev = &mut state.delta_prev.layers[l];
        step_slice(
            &mut layer.weights,
            &g.weights,
            &mut eta.weights,
            &mut lbar.weights,
            &mut dprev.weights,
            hp,
        );
        step_slice(
            &mut layer.biases,
            &g.biases,
            &mut eta.biases,
            &mut lbar.biases,
            &mut dprev.biases,
            hp,
        );
    }
    state.epoch += 1;
    Ok(())
}

fn step_slice(
    w: &mut [f64],
    g: &[f64],
    eta: &mut [f64],
    lbar: &mut [f64],
    dprev: &mut [f64],
    hp: &Hyperparams,
) {
    for i in 0..w.len() {
        let mut s = WeightState {
            eta: eta[i],
            lambda_bar: lbar[i],
            delta_prev: dprev[i],
        };
        w[i] += parameter_step(g[i], &mut s, hp);
        eta[i] = s.eta;
        lbar[i] = s.lambda_bar;
        dprev[i] = s.delta_prev;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ErrorGoal,
    GradientGoal,
    EpochLimit,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub state: TrainState,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn epochs(&self) -> usize {
        self.state.epoch
    }

    /// Error at the returned weights.
    pub fn final_error(&self) -> f64 {
        *self
            .state
            .trace
            .last()
            .expect("trace holds at least one evaluation")
    }

    pub fn trace(&self) -> &[f64] {
        &self.state.trace
    }
}

/// Batch training until the error reaches `e_max`, the gradient norm reaches
/// `goal`, or `max_epochs` updates have been applied.
///
/// Updates follow the gradient of `hp.objective`; the gradient-norm test uses
/// that same gradient, while `e_max` and the trace are in units of the summed
/// error `E`.
///
/// The error trace holds the total error before every update plus the error
/// at the returned weights, so it is one longer than the number of updates.
pub fn train(net: Network, batch: &[Pattern], hp: &Hyperparams) -> Result<TrainOutcome> {
    train_with(net, batch, hp, Exec::default())
}

pub fn train_with(
    mut net: Network,
    batch: &[Pattern],
    hp: &Hyperparams,
    exec: Exec,
) -> Result<TrainOutcome> {
    hp.validate()?;
    check_batch(&net, batch)?;
    let mut state = TrainState::new(&net, hp);
    let scale = hp.objective.gradient_scale(batch.len(), net.outputs());
    loop {
        let (error, mut grads) = batch_gradient_unchecked(&net, batch, exec);
        if scale != 1.0 {
            grads.iter_mut().for_each(|g| *g *= scale);
        }
        let grad_norm = grads.norm();
        if !error.is_finite() || !grad_norm.is_finite() {
            return Err(Error::TrainingDiverged { epoch: state.epoch });
        }
        state.trace.push(error);
        let stop = if error <= hp.e_max {
            Some(StopReason::ErrorGoal)
        } else if grad_norm <= hp.goal {
            Some(StopReason::GradientGoal)
        } else if state.epoch >= hp.max_epochs {
            Some(StopReason::EpochLimit)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(TrainOutcome {
                network: net,
                state,
                stop,
            });
        }
        update_weights(&mut net, &grads, &mut state, hp)?;
        if state.epoch.is_multiple_of(5000) {
            log::debug!("epoch {}: E = {error:.6}", state.epoch);
        }
    }
}

/// Index of the largest output (lowest index on ties) and all output scores.
pub fn classify(net: &Network, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let acts = forward(net, x)?;
    let scores = acts.layers.into_iter().last().expect("output layer");
    Ok((argmax(&scores), scores))
}

/// Lowest index of the maximum value.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
