//! A small ReLU multilayer perceptron producing class logits, and its
//! mini-batch gradient-descent trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationSet;
use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossKind, LossValue};

/// Logits are clamped to this range before entering a loss during training.
pub const TRAIN_LOGIT_CLAMP: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl ModelDims {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Result<Self> {
        if input == 0 || output < 2 || hidden.contains(&0) {
            return Err(Error::config(format!(
                "bad network dimensions: input {input}, hidden {hidden:?}, output {output}"
            )));
        }
        Ok(Self { input, hidden, output })
    }

    /// `(inputs, outputs)` of every layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input);
        sizes.extend(&self.hidden);
        sizes.push(self.output);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// An affine layer. `weights[i * outputs + j]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.outputs + j]
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        out
    }
}

/// Network parameters; also used to hold parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    pub fn zeros(dims: &ModelDims) -> Self {
        Self {
            layers: dims
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: &ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(dims);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for w in &mut layer.weights {
                *w = dist.sample(&mut rng);
            }
        }
        params
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.layers[0].inputs,
            hidden: self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect(),
            output: self.layers.last().map(|l| l.outputs).unwrap_or(0),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Checks that consecutive layers chain and every buffer has its size.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Format("model has no layers".into()));
        }
        for (n, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Format(format!("layer {n} buffers do not match its shape")));
            }
            if n > 0 && self.layers[n - 1].outputs != l.inputs {
                return Err(Error::Format(format!("layer {n} does not chain with layer {}", n - 1)));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "feature vector has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (n, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h);
            if n < last {
                relu(&mut h);
            }
        }
        Ok(h)
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// the loss gradient at the logits.
    pub fn backward(&self, x: &[f64], grad_z: &[f64]) -> Result<ModelParams> {
        self.check_input(x)?;
        if grad_z.len() != self.output_dim() {
            return Err(Error::invalid("upstream gradient does not match the output size"));
        }
        // inputs to each layer, post-activation
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (n, layer) in self.layers.iter().enumerate() {
            if n == last {
                inputs.push(h);
                break;
            }
            let mut next = layer.apply(&h);
            relu(&mut next);
            inputs.push(std::mem::replace(&mut h, next));
        }

        let mut grads = ModelParams::zeros(&self.dims());
        let mut delta = grad_z.to_vec();
        for n in (0..self.layers.len()).rev() {
            let layer = &self.layers[n];
            let input = &inputs[n];
            let g = &mut grads.layers[n];
            g.bias.copy_from_slice(&delta);
            for (i, &xi) in input.iter().enumerate() {
                let row = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (w, d) in row.iter_mut().zip(&delta) {
                    *w = xi * d;
                }
            }
            if n == 0 {
                break;
            }
            // ReLU derivative: the stored input is zero exactly where the unit was inactive
            let mut prev = vec![0.0; layer.inputs];
            for (i, p) in prev.iter_mut().enumerate() {
                if input[i] > 0.0 {
                    let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                }
            }
            delta = prev;
        }
        Ok(grads)
    }
}

fn relu(h: &mut [f64]) {
    for v in h {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl TrainConfig {
    pub fn new(kind: LossKind) -> Self {
        Self {
            loss: LossConfig::new(kind),
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 150,
            seed: 42,
            hidden: vec![64],
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        self.loss.validate(k)?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch size and epochs must be at least 1"));
        }
        Ok(())
    }
}

/// One training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub features: Vec<f64>,
    pub annotations: AnnotationSet,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Mean training loss of every epoch, in order.
    pub epoch_loss: Vec<f64>,
    pub examples_used: usize,
}

/// Loss of one example through the network, with the training-time logit clamp.
pub fn example_loss(params: &ModelParams, loss: &LossConfig, ex: &TrainExample) -> Result<(LossValue, Vec<f64>)> {
    let z = params.forward(&ex.features)?;
    let clamped: Vec<f64> = z
        .iter()
        .map(|v| v.clamp(-TRAIN_LOGIT_CLAMP, TRAIN_LOGIT_CLAMP))
        .collect();
    let mut lv = loss.evaluate(&ex.annotations, &clamped)?;
    for (g, v) in lv.grad_z.iter_mut().zip(&z) {
        if v.abs() > TRAIN_LOGIT_CLAMP {
            *g = 0.0;
        }
    }
    Ok((lv, z))
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 initialises the weights
    rng.set_stream(1 + epoch as u64);
    rng
}

/// Mini-batch gradient descent with a fixed learning rate.
///
/// `hard` trains only on utterances with a majority class. Each epoch
/// visits the examples in a Fisher-Yates order drawn from its own stream;
/// within a batch, gradients are summed in example order so runs are
/// bit-reproducible.
pub fn train(examples: &[TrainExample], config: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    let first = examples.first().ok_or_else(|| Error::invalid("empty training set"))?;
    let k = first.annotations.k();
    config.validate(k)?;
    let used: Vec<&TrainExample> = examples
        .iter()
        .filter(|e| config.loss.kind != LossKind::Hard || e.annotations.agreement().majority.is_some())
        .collect();
    if used.is_empty() {
        return Err(Error::invalid("no utterance with a majority label to train the hard system"));
    }
    let dims = ModelDims::new(first.features.len(), config.hidden.clone(), k)?;
    let mut params = ModelParams::init(&dims, config.seed);
    let mut log = TrainLog {
        epoch_loss: Vec::with_capacity(config.epochs),
        examples_used: used.len(),
    };

    let mut order: Vec<usize> = (0..used.len()).collect();
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut epoch_rng(config.seed, epoch));
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut acc = ModelParams::zeros(&dims);
            for &idx in chunk {
                let ex = used[idx];
                let wrap = |e: Error| Error::Training {
                    epoch,
                    batch,
                    utterance: ex.id.clone(),
                    source: Box::new(e),
                };
                let (lv, _) = example_loss(&params, &config.loss, ex).map_err(wrap)?;
                if !lv.value.is_finite() || lv.grad_z.iter().any(|g| !g.is_finite()) {
                    return Err(wrap(Error::NonFinite(format!("loss {}", lv.value))));
                }
                total += lv.value;
                let g = params.backward(&ex.features, &lv.grad_z)?;
                for (a, b) in acc.values_mut().zip(g.values()) {
                    *a += b;
                }
            }
            let step = config.learning_rate / chunk.len() as f64;
            for (p, g) in params.values_mut().zip(acc.values()) {
                *p -= step * g;
            }
        }
        log.epoch_loss.push(total / used.len() as f64);
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ClassSpace, Evaluation};
    use rand::Rng;

    fn ann(classes: &[usize], k: usize) -> AnnotationSet {
        let space = ClassSpace::with_letters(k).unwrap();
        AnnotationSet::new(classes.iter().map(|&c| Evaluation::single(c)).collect(), &space).unwrap()
    }

    fn dims(d: usize, hidden: &[usize], k: usize) -> ModelDims {
        ModelDims::new(d, hidden.to_vec(), k).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn init_is_seeded() {
        let d = dims(8, &[16], 5);
        assert_eq!(ModelParams::init(&d, 1), ModelParams::init(&d, 1));
        assert_ne!(ModelParams::init(&d, 1), ModelParams::init(&d, 2));
        assert_eq!(d.layer_shapes(), vec![(8, 16), (16, 5)]);
        let p = ModelParams::init(&d, 1);
        assert_eq!(p.n_params(), 8 * 16 + 16 + 16 * 5 + 5);
        assert!(p.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0f64 / 24.0).sqrt();
        assert!(p.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert_eq!(p.dims(), d);
    }

    #[test]
    fn bad_dims_are_rejected() {
        assert!(ModelDims::new(0, vec![], 3).is_err());
        assert!(ModelDims::new(3, vec![0], 3).is_err());
        assert!(ModelDims::new(3, vec![], 1).is_err());
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let p = ModelParams::zeros(&dims(4, &[6], 3));
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut p = ModelParams::zeros(&dims(3, &[], 3));
        for i in 0..3 {
            p.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = [0.5, -1.5, 2.0];
        assert_eq!(p.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_is_pure_and_checks_size() {
        let p = ModelParams::init(&dims(4, &[6], 3), 9);
        let x = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(p.forward(&x).unwrap(), p.forward(&x).unwrap());
        assert!(matches!(p.forward(&[1.0; 3]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = ModelParams::init(&dims(4, &[6], 3), 3);
        for l in &mut p.layers {
            for b in &mut l.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = p.backward(&x, &u).unwrap();
        let analytic: Vec<f64> = grad.values().copied().collect();
        let h = 1e-6;
        for i in 0..p.n_params() {
            let mut up = p.clone();
            let mut dn = p.clone();
            *up.values_mut().nth(i).unwrap() += h;
            *dn.values_mut().nth(i).unwrap() -= h;
            let num = (dot(&up.forward(&x).unwrap(), &u) - dot(&dn.forward(&x).unwrap(), &u)) / (2.0 * h);
            let a = analytic[i];
            assert!(
                (a - num).abs() <= 1e-4 * a.abs().max(1e-8) || (a - num).abs() < 1e-9,
                "param {i}: {a} vs {num}"
            );
        }
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        let p = ModelParams::init(&dims(4, &[6], 3), 3);
        let x = [0.3, -0.2, 0.9, 0.1];
        let zero = p.backward(&x, &[0.0; 3]).unwrap();
        assert!(zero.values().all(|&g| g == 0.0));
        let g1 = p.backward(&x, &[0.2, -0.4, 0.7]).unwrap();
        let g2 = p.backward(&x, &[0.4, -0.8, 1.4]).unwrap();
        for (a, b) in g1.values().zip(g2.values()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_through_network_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = ModelParams::init(&dims(4, &[6], 3), 4);
        let ex = TrainExample {
            id: "x".into(),
            features: vec![0.5, -0.1, 0.8, -0.6],
            annotations: ann(&[0, 0, 2], 3),
        };
        for kind in LossKind::ALL {
            let cfg = LossConfig::new(kind);
            let (lv, _) = example_loss(&p, &cfg, &ex).unwrap();
            let grad: Vec<f64> = p.backward(&ex.features, &lv.grad_z).unwrap().values().copied().collect();
            for _ in 0..10 {
                let i = rng.random_range(0..p.n_params());
                let h = 1e-6;
                let mut up = p.clone();
                let mut dn = p.clone();
                *up.values_mut().nth(i).unwrap() += h;
                *dn.values_mut().nth(i).unwrap() -= h;
                let f = |q: &ModelParams| example_loss(q, &cfg, &ex).unwrap().0.value;
                let num = (f(&up) - f(&dn)) / (2.0 * h);
                let a = grad[i];
                assert!(
                    (a - num).abs() <= 1e-4 * a.abs().max(1e-8) || (a - num).abs() < 1e-8,
                    "{kind} param {i}: {a} vs {num}"
                );
            }
        }
    }

    #[test]
    fn clamped_logits_get_no_gradient() {
        let mut p = ModelParams::zeros(&dims(1, &[], 2));
        p.layers[0].bias = vec![100.0, 0.0];
        let ex = TrainExample {
            id: "x".into(),
            features: vec![0.0],
            annotations: ann(&[1, 1], 2),
        };
        let (lv, z) = example_loss(&p, &LossConfig::new(LossKind::Hard), &ex).unwrap();
        assert_eq!(z[0], 100.0);
        assert_eq!(lv.grad_z[0], 0.0);
        assert!((lv.value - 60.0).abs() < 1e-9);
    }

    fn separable(n: usize, seed: u64) -> Vec<TrainExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = usize::from(x[0] + 0.5 * x[1] > 0.0);
                TrainExample {
                    id: format!("s{i}"),
                    features: x,
                    annotations: ann(&[c, c, c], 2),
                }
            })
            .collect()
    }

    #[test]
    fn learns_a_separable_problem() {
        let data = separable(200, 1);
        let mut cfg = TrainConfig::new(LossKind::Hard);
        cfg.epochs = 50;
        cfg.learning_rate = 0.5;
        cfg.hidden = vec![8];
        let (p, log) = train(&data, &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|e| {
                let z = p.forward(&e.features).unwrap();
                Some(usize::from(z[1] > z[0])) == e.annotations.agreement().majority
            })
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95, "{correct}/200");
        assert!(log.epoch_loss.last().unwrap() < &log.epoch_loss[0]);
    }

    #[test]
    fn zero_learning_rate_keeps_the_initialisation() {
        let data = separable(20, 2);
        let mut cfg = TrainConfig::new(LossKind::SoftKl);
        cfg.epochs = 1;
        cfg.learning_rate = 0.0;
        let (p, log) = train(&data, &cfg).unwrap();
        assert_eq!(p, ModelParams::init(&dims(2, &[64], 2), cfg.seed));
        assert_eq!(log.epoch_loss.len(), 1);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = separable(50, 3);
        for kind in LossKind::ALL {
            let mut cfg = TrainConfig::new(kind);
            cfg.epochs = 3;
            let (a, la) = train(&data, &cfg).unwrap();
            let (b, lb) = train(&data, &cfg).unwrap();
            assert!(a.values().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn hard_skips_utterances_without_majority() {
        let mut data = separable(10, 4);
        data[0].annotations = ann(&[0, 1], 2);
        data[1].annotations = ann(&[1, 0], 2);
        let mut cfg = TrainConfig::new(LossKind::Hard);
        cfg.epochs = 1;
        assert_eq!(train(&data, &cfg).unwrap().1.examples_used, 8);
        cfg.loss.kind = LossKind::SoftKl;
        assert_eq!(train(&data, &cfg).unwrap().1.examples_used, 10);
        for e in &mut data {
            e.annotations = ann(&[0, 1], 2);
        }
        cfg.loss.kind = LossKind::Hard;
        assert!(train(&data, &cfg).is_err());
    }

    #[test]
    fn numerical_failures_carry_their_location() {
        let data = separable(10, 5);
        let mut cfg = TrainConfig::new(LossKind::Dpn);
        cfg.loss.eps1 = 0.0;
        cfg.epochs = 1;
        let err = train(&data, &cfg).unwrap_err();
        match &err {
            Error::Training { epoch: 0, batch: 0, utterance, .. } => assert!(utterance.starts_with('s')),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.is_numerical());
    }

    #[test]
    fn config_is_validated() {
        let data = separable(10, 6);
        let mut cfg = TrainConfig::new(LossKind::SoftKl);
        cfg.batch_size = 0;
        assert!(matches!(train(&data, &cfg), Err(Error::InvalidConfig(_))));
        assert!(train(&[], &TrainConfig::new(LossKind::SoftKl)).is_err());
    }
}
