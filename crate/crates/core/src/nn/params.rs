use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shape of each learned restriction map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SheafForm {
    /// `d` outputs placed on the diagonal.
    #[default]
    Diagonal,
    /// `d * d` outputs, row-major.
    General,
}

/// Per-node input of the sheaf learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeSummary {
    /// Mean over channels of the node's `d x f` block (length `d`).
    #[default]
    ChannelMean,
    /// The whole block, row-major (length `d * f`).
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub stalk_dim: usize,
    pub channels: usize,
    pub layers: usize,
    pub activation: Activation,
    pub sheaf_form: SheafForm,
    pub node_summary: NodeSummary,
    pub pair_width: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            stalk_dim: 2,
            channels: 4,
            layers: 3,
            activation: Activation::Identity,
            sheaf_form: SheafForm::Diagonal,
            node_summary: NodeSummary::ChannelMean,
            pair_width: 4,
            hidden_width: 8,
            learning_rate: 0.01,
            epochs: 200,
            seed: 0,
            weight_decay: 0.05,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let positive = [
            ("stalk_dim", self.stalk_dim),
            ("channels", self.channels),
            ("layers", self.layers),
            ("pair_width", self.pair_width),
            ("hidden_width", self.hidden_width),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::Config(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::Config("learning_rate must be positive".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(NnError::Config("weight_decay must be nonnegative".into()));
        }
        Ok(())
    }

    /// Length of the per-node summary fed to the sheaf learner.
    pub fn summary_dim(&self) -> usize {
        match self.node_summary {
            NodeSummary::ChannelMean => self.stalk_dim,
            NodeSummary::Flatten => self.stalk_dim * self.channels,
        }
    }

    /// Outputs of the final map per restriction.
    pub fn map_outputs(&self) -> usize {
        match self.sheaf_form {
            SheafForm::Diagonal => self.stalk_dim,
            SheafForm::General => self.stalk_dim * self.stalk_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `d x d`, acts on stalks.
    pub w1: DMatrix<f64>,
    /// `f x f`, mixes channels.
    pub w2: DMatrix<f64>,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `raw x (d f)`.
    pub input_weight: DMatrix<f64>,
    /// `1 x (d f)`.
    pub input_bias: DMatrix<f64>,
    pub layers: Vec<LayerParams>,
    /// `(s + 1) x h`, `s` the summary length.
    pub learner_w: DMatrix<f64>,
    /// `h x p`.
    pub learner_m: DMatrix<f64>,
    /// `(s + p) x q`, `q` the map outputs.
    pub map_weight: DMatrix<f64>,
    /// `1 x q`.
    pub map_bias: DMatrix<f64>,
    /// `(d f) x classes`.
    pub head_weight: DMatrix<f64>,
    /// `1 x classes`.
    pub head_bias: DMatrix<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, and identity diffusion weights.
    pub fn init(config: &ModelConfig, raw_dim: usize, classes: usize, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let (d, f) = (config.stalk_dim, config.channels);
        let (s, h, p, q) = (config.summary_dim(), config.hidden_width, config.pair_width, config.map_outputs());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ModelParams {
            input_weight: glorot(&mut rng, raw_dim, d * f),
            input_bias: DMatrix::zeros(1, d * f),
            layers: (0..config.layers)
                .map(|_| LayerParams { w1: DMatrix::identity(d, d), w2: DMatrix::identity(f, f) })
                .collect(),
            learner_w: glorot(&mut rng, s + 1, h),
            learner_m: glorot(&mut rng, h, p),
            map_weight: glorot(&mut rng, s + p, q),
            map_bias: DMatrix::zeros(1, q),
            head_weight: glorot(&mut rng, d * f, classes),
            head_bias: DMatrix::zeros(1, classes),
        })
    }

    /// Every entry i.i.d. uniform in `[-scale, scale]`.
    pub fn random(config: &ModelConfig, raw_dim: usize, classes: usize, scale: f64, seed: u64) -> Result<Self, NnError> {
        let mut out = Self::init(config, raw_dim, classes, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        for t in out.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-scale..=scale));
        }
        Ok(out)
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["input_weight".to_string(), "input_bias".to_string()];
        for t in 0..self.layers.len() {
            names.push(format!("layer{t}.w1"));
            names.push(format!("layer{t}.w2"));
        }
        names.extend(
            ["learner_w", "learner_m", "map_weight", "map_bias", "head_weight", "head_bias"].map(String::from),
        );
        names
    }

    /// Tensors in the order of [`Self::tensor_names`].
    pub fn tensors(&self) -> Vec<&DMatrix<f64>> {
        let mut out = vec![&self.input_weight, &self.input_bias];
        for l in &self.layers {
            out.push(&l.w1);
            out.push(&l.w2);
        }
        out.extend([
            &self.learner_w,
            &self.learner_m,
            &self.map_weight,
            &self.map_bias,
            &self.head_weight,
            &self.head_bias,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        let mut out = vec![&mut self.input_weight, &mut self.input_bias];
        for l in &mut self.layers {
            out.push(&mut l.w1);
            out.push(&mut l.w2);
        }
        out.extend([
            &mut self.learner_w,
            &mut self.learner_m,
            &mut self.map_weight,
            &mut self.map_bias,
            &mut self.head_weight,
            &mut self.head_bias,
        ]);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All entries, tensor by tensor in column-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_scalars());
        let mut it = flat.iter();
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = *it.next().unwrap());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks every shape against `config`.
    pub fn check_shapes(&self, config: &ModelConfig, raw_dim: usize, classes: usize) -> Result<(), NnError> {
        let expected = Self::init(config, raw_dim, classes, 0)?;
        if self.layers.len() != expected.layers.len() {
            return Err(NnError::Shape {
                what: "layers",
                expected: expected.layers.len().to_string(),
                found: self.layers.len().to_string(),
            });
        }
        for ((name, a), b) in self.tensor_names().into_iter().zip(self.tensors()).zip(expected.tensors()) {
            if a.shape() != b.shape() {
                return Err(NnError::Shape {
                    what: "parameter",
                    expected: format!("{name} {:?}", b.shape()),
                    found: format!("{:?}", a.shape()),
                });
            }
        }
        Ok(())
    }
}
