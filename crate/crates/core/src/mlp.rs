//! Fully connected sigmoid network trained by online backpropagation with momentum.
//!
//! Loss is the per-sample squared error `E = ½ Σ (y - t)²`. Each update is
//! `Δw(n) = -η ∂E/∂w + α Δw(n-1)`, applied after every sample, with the
//! sample order reshuffled every epoch from a seeded generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// `[input, hidden..., output]`.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Stop once the epoch mean squared error drops to this value.
    pub target_error: f64,
}

impl MlpConfig {
    /// One hidden layer of 100 units, η = 0.1, α = 0.9, 1000 epochs, target error 1e-3.
    pub fn with_defaults(inputs: usize, outputs: usize) -> Self {
        MlpConfig {
            layer_sizes: vec![inputs, 100, outputs],
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 1000,
            seed: 0,
            target_error: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: String| Err(MlpError::InvalidConfig(m));
        if self.layer_sizes.len() < 2 {
            return bad(format!(
                "need at least 2 layers, got {}",
                self.layer_sizes.len()
            ));
        }
        if self.layer_sizes.contains(&0) {
            return bad(format!(
                "layer sizes must be positive: {:?}",
                self.layer_sizes
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.target_error.is_nan() || self.target_error < 0.0 {
            return bad(format!(
                "target error must be nonnegative, got {}",
                self.target_error
            ));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// Weights are row-major `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.fan_in)
                .zip(&self.biases)
                .map(|(row, b)| {
                    let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
                    sigmoid(z)
                }),
        );
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub layers: Vec<Layer>,
}

/// Gradient of the per-sample loss, shaped like the model's layers.
pub type Gradients = Vec<Layer>;

impl MlpModel {
    /// Model with every weight and bias zero.
    pub fn zeros(config: MlpConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(MlpModel { config, layers })
    }

    /// Weights and biases drawn uniformly from `[-0.5, 0.5]`.
    pub fn random(config: MlpConfig, rng: &mut impl Rng) -> Result<Self, MlpError> {
        let mut model = Self::zeros(config)?;
        for layer in &mut model.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = rng.random_range(-0.5..=0.5);
            }
        }
        Ok(model)
    }

    pub fn inputs(&self) -> usize {
        self.config.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.config.outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.inputs() {
            return Err(MlpError::LengthMismatch {
                what: "input vector",
                expected: self.inputs(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer, input included; the last entry holds the class scores.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, MlpError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.fan_out);
            layer.forward(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        Ok(acts)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        Ok(self.forward(x)?.pop().unwrap())
    }

    /// Argmax class (lowest index on ties) and the score vector.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>), MlpError> {
        let scores = self.scores(x)?;
        Ok((argmax(&scores), scores))
    }

    /// `½ Σ (y - t)²` for one sample.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64, MlpError> {
        self.check_target(target)?;
        let y = self.scores(x)?;
        Ok(0.5
            * y.iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
    }

    fn check_target(&self, target: &[f64]) -> Result<(), MlpError> {
        if target.len() != self.outputs() {
            return Err(MlpError::LengthMismatch {
                what: "target vector",
                expected: self.outputs(),
                found: target.len(),
            });
        }
        Ok(())
    }

    /// Backpropagated gradient of the per-sample loss, plus the loss itself.
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Result<(Gradients, f64), MlpError> {
        self.check_target(target)?;
        let acts = self.forward(x)?;
        let y = acts.last().unwrap();
        let loss = 0.5
            * y.iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();

        let mut grads: Gradients = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in, l.fan_out))
            .collect();
        // δ for the output layer: (y - t) σ'(z), with σ' = y (1 - y).
        let mut delta: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(&yi, &ti)| (yi - ti) * yi * (1.0 - yi))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            let g = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] = d;
                let row = &mut g.weights[o * g.fan_in..(o + 1) * g.fan_in];
                row.iter_mut().zip(input).for_each(|(w, a)| *w = d * a);
            }
            if l > 0 {
                let layer = &self.layers[l];
                let mut prev = vec![0.0; layer.fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
                }
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= a * (1.0 - a);
                }
                delta = prev;
            }
        }
        Ok((grads, loss))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    /// Mean over samples and outputs of `(y - t)²`, accumulated during the last epoch.
    pub final_mse: f64,
    pub reached_target: bool,
}

/// Online trainer holding the model and the previous update for the momentum term.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: MlpModel,
    velocity: Vec<Layer>,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Initializes weights from `config.seed`.
    pub fn new(config: MlpConfig) -> Result<Self, MlpError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = MlpModel::random(config, &mut rng)?;
        Ok(Self::from_model(model, rng))
    }

    /// Continues training from an existing model.
    pub fn with_model(model: MlpModel) -> Result<Self, MlpError> {
        model.config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        Ok(Self::from_model(model, rng))
    }

    fn from_model(model: MlpModel, rng: ChaCha8Rng) -> Self {
        let velocity = model
            .layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in, l.fan_out))
            .collect();
        Trainer {
            model,
            velocity,
            rng,
        }
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }

    /// One momentum update on a single sample; returns the sample's loss before the update.
    pub fn step(&mut self, x: &[f64], target: &[f64]) -> Result<f64, MlpError> {
        let (grads, loss) = self.model.gradients(x, target)?;
        let eta = self.model.config.learning_rate;
        let alpha = self.model.config.momentum;
        for ((layer, vel), g) in self
            .model
            .layers
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(&grads)
        {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let vels = vel.weights.iter_mut().chain(vel.biases.iter_mut());
            let gs = g.weights.iter().chain(g.biases.iter());
            for ((p, v), gi) in params.zip(vels).zip(gs) {
                *v = -eta * gi + alpha * *v;
                *p += *v;
            }
        }
        Ok(loss)
    }

    /// One shuffled pass over the data; returns the epoch mean squared error.
    pub fn epoch(&mut self, data: &[(Vec<f64>, Vec<f64>)]) -> Result<f64, MlpError> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for i in order {
            let (x, t) = &data[i];
            total += 2.0 * self.step(x, t)?;
        }
        Ok(total / (data.len() * self.model.outputs()) as f64)
    }
}

/// Trains a fresh network on `(features, target)` pairs.
pub fn train(
    config: MlpConfig,
    data: &[(Vec<f64>, Vec<f64>)],
) -> Result<(MlpModel, TrainingSummary), MlpError> {
    config.validate()?;
    if data.is_empty() {
        return Err(MlpError::EmptyData);
    }
    for (x, t) in data {
        if x.len() != config.inputs() {
            return Err(MlpError::LengthMismatch {
                what: "input vector",
                expected: config.inputs(),
                found: x.len(),
            });
        }
        if t.len() != config.outputs() {
            return Err(MlpError::LengthMismatch {
                what: "target vector",
                expected: config.outputs(),
                found: t.len(),
            });
        }
    }
    let epochs = config.epochs;
    let target_error = config.target_error;
    let mut trainer = Trainer::new(config)?;
    let mut mse = f64::INFINITY;
    let mut epochs_run = 0;
    for epoch in 1..=epochs {
        mse = trainer.epoch(data)?;
        epochs_run = epoch;
        let finite = mse.is_finite()
            && trainer
                .model
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(&l.biases).all(|w| w.is_finite()));
        if !finite {
            return Err(MlpError::NonFiniteLoss { epoch });
        }
        if mse <= target_error {
            break;
        }
    }
    Ok((
        trainer.into_model(),
        TrainingSummary {
            epochs_run,
            final_mse: mse,
            reached_target: mse <= target_error,
        },
    ))
}

/// One-hot target with `off`/`on` levels, e.g. 0.1 / 0.9.
pub fn one_hot(class: usize, classes: usize, off: f64, on: f64) -> Vec<f64> {
    (0..classes)
        .map(|i| if i == class { on } else { off })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sizes: &[usize]) -> MlpConfig {
        MlpConfig {
            layer_sizes: sizes.to_vec(),
            learning_rate: 0.5,
            momentum: 0.9,
            epochs: 10,
            seed: 1,
            target_error: 0.0,
        }
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = MlpModel::zeros(cfg(&[3, 4, 2])).unwrap();
        assert_eq!(m.scores(&[1.0, -2.0, 7.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.predict(&[0.0, 0.0, 0.0]).unwrap().0, 0);
    }

    #[test]
    fn single_unit_sigmoid_values() {
        let mut m = MlpModel::zeros(cfg(&[1, 1])).unwrap();
        m.layers[0].weights[0] = 1.0;
        assert_eq!(m.scores(&[0.0]).unwrap(), vec![0.5]);
        assert!((m.scores(&[3f64.ln()]).unwrap()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }

    #[test]
    fn length_checks() {
        let m = MlpModel::zeros(cfg(&[2, 1])).unwrap();
        assert!(matches!(
            m.forward(&[1.0]),
            Err(MlpError::LengthMismatch { .. })
        ));
        assert!(matches!(
            m.loss(&[1.0, 1.0], &[1.0, 0.0]),
            Err(MlpError::LengthMismatch { .. })
        ));
        assert_eq!(train(cfg(&[2, 1]), &[]).unwrap_err(), MlpError::EmptyData);
        assert!(matches!(
            train(cfg(&[2, 1]), &[(vec![1.0], vec![1.0])]),
            Err(MlpError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(&[2]);
        assert!(c.validate().is_err());
        c = cfg(&[2, 0, 1]);
        assert!(c.validate().is_err());
        c = cfg(&[2, 1]);
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c.momentum = 0.5;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_error_sample_leaves_weights() {
        let mut c = cfg(&[3, 4, 2]);
        c.epochs = 1;
        let x = vec![0.3, -0.2, 0.9];
        let init = Trainer::new(c.clone()).unwrap().into_model();
        let t = init.scores(&x).unwrap();
        let (trained, _) = train(c, &[(x, t)]).unwrap();
        for (a, b) in init.layers.iter().zip(&trained.layers) {
            for (p, q) in a
                .weights
                .iter()
                .chain(&a.biases)
                .zip(b.weights.iter().chain(&b.biases))
            {
                assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn no_momentum_means_plain_gradient_steps() {
        let mut c = cfg(&[2, 3, 1]);
        c.momentum = 0.0;
        let x = [0.4, -0.7];
        let t = [0.9];
        let mut trainer = Trainer::new(c.clone()).unwrap();
        let mut manual = trainer.model().clone();
        for _ in 0..2 {
            trainer.step(&x, &t).unwrap();
            let (g, _) = manual.gradients(&x, &t).unwrap();
            for (l, gl) in manual.layers.iter_mut().zip(&g) {
                l.weights
                    .iter_mut()
                    .zip(&gl.weights)
                    .for_each(|(w, d)| *w -= c.learning_rate * d);
                l.biases
                    .iter_mut()
                    .zip(&gl.biases)
                    .for_each(|(w, d)| *w -= c.learning_rate * d);
            }
        }
        assert_eq!(trainer.model(), &manual);
    }

    #[test]
    fn momentum_accumulates_previous_update() {
        let mut c = cfg(&[1, 1]);
        c.momentum = 0.5;
        c.learning_rate = 0.1;
        let mut trainer = Trainer::new(c).unwrap();
        let w0 = trainer.model().layers[0].weights[0];
        let (g1, _) = trainer.model().gradients(&[1.0], &[1.0]).unwrap();
        trainer.step(&[1.0], &[1.0]).unwrap();
        let w1 = trainer.model().layers[0].weights[0];
        let (g2, _) = trainer.model().gradients(&[1.0], &[1.0]).unwrap();
        trainer.step(&[1.0], &[1.0]).unwrap();
        let w2 = trainer.model().layers[0].weights[0];
        let d1 = -0.1 * g1[0].weights[0];
        assert!((w1 - w0 - d1).abs() < 1e-15);
        assert!((w2 - w1 - (-0.1 * g2[0].weights[0] + 0.5 * d1)).abs() < 1e-15);
    }

    #[test]
    fn scores_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = MlpModel::random(cfg(&[4, 6, 3]), &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            for s in m.scores(&x).unwrap() {
                assert!(s > 0.0 && s < 1.0);
            }
        }
    }

    #[test]
    fn non_finite_loss_reported() {
        let mut c = cfg(&[1, 1]);
        c.epochs = 3;
        let err = train(c, &[(vec![f64::NAN], vec![0.0]), (vec![1.0], vec![1.0])]).unwrap_err();
        assert_eq!(err, MlpError::NonFiniteLoss { epoch: 1 });
    }

    #[test]
    fn one_hot_levels() {
        assert_eq!(one_hot(1, 3, 0.1, 0.9), vec![0.1, 0.9, 0.1]);
    }
}
