use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{cross_entropy, forward, loss_and_grad, masked_loss, PairStructure};
use super::params::{ModelConfig, ModelParams};
use super::{Dataset, NnError};
use crate::oracle::finite_difference_grad;

pub const TRAIN_FRACTION: f64 = 0.5;
pub const VAL_FRACTION: f64 = 0.25;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Disjoint node index sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then the first half trains, the next quarter validates, the rest tests.
/// Fails if some class that occurs in `labels` has no training node.
pub fn split_nodes(labels: &[usize], seed: u64) -> Result<Split, NnError> {
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let n_val = ((VAL_FRACTION * n as f64).round() as usize).min(n - n_train);
    let split = Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    let mut seen = vec![false; labels.iter().max().map_or(0, |m| m + 1)];
    split.train.iter().for_each(|&v| seen[labels[v]] = true);
    for &l in labels {
        if !seen[l] {
            return Err(NnError::DegenerateSplit { class: l });
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the selected epoch.
    pub params: ModelParams,
    pub best: EpochMetrics,
    pub trace: Vec<EpochMetrics>,
}

fn accuracy(logits: &DMatrix<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes.iter().filter(|&&v| logits.row(v).transpose().argmax().0 == labels[v]).count();
    correct as f64 / nodes.len() as f64
}

fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    structure: &PairStructure,
    data: &Dataset,
    split: &Split,
    epoch: usize,
) -> Result<EpochMetrics, NnError> {
    let logits = forward(params, config, structure, &data.features)?.logits;
    Ok(EpochMetrics {
        epoch,
        train_loss: cross_entropy(&logits, &data.labels, &split.train)?.0,
        train_acc: accuracy(&logits, &data.labels, &split.train),
        val_loss: cross_entropy(&logits, &data.labels, &split.val)?.0,
        val_acc: accuracy(&logits, &data.labels, &split.val),
        test_acc: accuracy(&logits, &data.labels, &split.test),
    })
}

/// Lower validation error wins, then lower validation loss, then the earlier epoch.
fn improves(candidate: &EpochMetrics, best: &EpochMetrics) -> bool {
    let (ce, be) = (1.0 - candidate.val_acc, 1.0 - best.val_acc);
    ce < be || (ce == be && candidate.val_loss < best.val_loss)
}

/// Full-batch Adam on the training nodes with L2 weight decay added to the gradient.
///
/// Epoch 0 is the initial model; epoch `e` is the model after `e` updates. Each trace row is
/// measured after its update, and the returned parameters are those of the selected epoch.
pub fn train(init: ModelParams, data: &Dataset, split: &Split, config: &ModelConfig) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    init.check_shapes(config, data.raw_dim(), data.num_classes)?;
    let structure = PairStructure::new(&data.hypergraph);
    let mut params = init;
    let mut first = params.zeros_like();
    let mut second = params.zeros_like();

    let initial = evaluate(&params, config, &structure, data, split, 0)?;
    let mut best = initial;
    let mut best_params = params.clone();
    let mut trace = vec![initial];
    for epoch in 1..=config.epochs {
        let (_, grads) = loss_and_grad(&params, config, &structure, data, &split.train)?;
        let step = epoch as i32;
        let (c1, c2) = (1.0 - ADAM_BETA1.powi(step), 1.0 - ADAM_BETA2.powi(step));
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        for ((p, g), (m, v)) in tensors.zip(first.tensors_mut().into_iter().zip(second.tensors_mut())) {
            for i in 0..p.len() {
                let gi = g[i] + config.weight_decay * p[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                p[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
        if !params.is_finite() {
            return Err(NnError::NonFiniteLoss);
        }
        let metrics = evaluate(&params, config, &structure, data, split, epoch)?;
        if improves(&metrics, &best) {
            best = metrics;
            best_params = params.clone();
        }
        trace.push(metrics);
    }
    Ok(TrainOutcome { params: best_params, best, trace })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub runs: Vec<TrainOutcome>,
    /// Test accuracy at the selected epoch of each run.
    pub test_accs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// `runs` independent trainings; run `r` uses seed `config.seed + r` for both split and init.
pub fn train_runs(data: &Dataset, config: &ModelConfig, runs: usize) -> Result<RunSummary, NnError> {
    let mut outcomes = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = config.seed.wrapping_add(r as u64);
        let split = split_nodes(&data.labels, seed)?;
        let init = ModelParams::init(config, data.raw_dim(), data.num_classes, seed)?;
        outcomes.push(train(init, data, &split, config)?);
    }
    let test_accs: Vec<f64> = outcomes.iter().map(|o| o.best.test_acc).collect();
    let n = test_accs.len().max(1) as f64;
    let mean = test_accs.iter().sum::<f64>() / n;
    let std = (test_accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RunSummary { runs: outcomes, test_accs, mean, std })
}

/// `epoch,train_loss,train_acc,val_acc,test_acc`, one row per trace entry, 17 significant digits.
pub fn metrics_csv(trace: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc,test_acc\n");
    for m in trace {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e}", m.epoch, m.train_loss, m.train_acc, m.val_acc, m.test_acc)
            .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` in the Frobenius norm; zero when both
    /// norms are below `1e-10`.
    pub rel_error: f64,
    pub analytic_norm: f64,
}

/// Compares [`loss_and_grad`] with central differences of step `step`, tensor by tensor.
pub fn gradient_check(
    params: &ModelParams,
    config: &ModelConfig,
    data: &Dataset,
    mask: &[usize],
    step: f64,
) -> Result<Vec<TensorCheck>, NnError> {
    let structure = PairStructure::new(&data.hypergraph);
    let (_, analytic) = loss_and_grad(params, config, &structure, data, mask)?;
    let mut probe = params.clone();
    let mut failure = None;
    let fd = finite_difference_grad(
        |flat| {
            probe.set_flat(flat);
            masked_loss(&probe, config, &structure, data, mask).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &params.to_flat(),
        step,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let fd = fd.map_err(|_| NnError::NonFiniteLoss)?;
    let mut numeric = params.clone();
    numeric.set_flat(&fd);
    Ok(params
        .tensor_names()
        .into_iter()
        .zip(analytic.tensors().into_iter().zip(numeric.tensors()))
        .map(|(name, (a, b))| {
            let scale = a.norm().max(b.norm());
            let rel_error = if scale < 1e-10 { 0.0 } else { (a - b).norm() / scale };
            TensorCheck { name, rel_error, analytic_norm: a.norm() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_block_dataset;

    #[test]
    fn split_fractions_and_determinism() {
        let labels: Vec<usize> = (0..40).map(|v| v % 2).collect();
        let a = split_nodes(&labels, 3).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (20, 10, 10));
        assert_eq!(a, split_nodes(&labels, 3).unwrap());
        assert_ne!(a, split_nodes(&labels, 4).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_missing_class() {
        let mut labels = vec![0; 10];
        labels[0] = 1;
        let failing = (0..50).find(|&s| split_nodes(&labels, s).is_err());
        assert!(matches!(split_nodes(&labels, failing.unwrap()), Err(NnError::DegenerateSplit { class: 1 })));
    }

    #[test]
    fn loss_drops_and_runs_reproduce() {
        let data = two_block_dataset(60, 1);
        let config = ModelConfig { epochs: 10, ..ModelConfig::default() };
        let split = split_nodes(&data.labels, 1).unwrap();
        let init = ModelParams::init(&config, data.raw_dim(), data.num_classes, 1).unwrap();
        let a = train(init.clone(), &data, &split, &config).unwrap();
        let b = train(init, &data, &split, &config).unwrap();
        assert!(a.trace[10].train_loss < a.trace[0].train_loss);
        assert_eq!(metrics_csv(&a.trace), metrics_csv(&b.trace));
        assert_eq!(a.trace.len(), 11);
    }

    #[test]
    fn csv_layout() {
        let m = EpochMetrics { epoch: 3, train_loss: 0.5, train_acc: 1.0, val_loss: 0.0, val_acc: 0.25, test_acc: 0.0 };
        let csv = metrics_csv(&[m]);
        assert_eq!(csv.lines().next().unwrap(), "epoch,train_loss,train_acc,val_acc,test_acc");
        assert_eq!(csv.lines().nth(1).unwrap(), "3,5.0000000000000000e-1,1.0000000000000000e0,2.5000000000000000e-1,0.0000000000000000e0");
    }

    #[test]
    fn selection_prefers_lower_error_then_loss() {
        let base = EpochMetrics { epoch: 0, train_loss: 0.0, train_acc: 0.0, val_loss: 1.0, val_acc: 0.5, test_acc: 0.0 };
        assert!(improves(&EpochMetrics { val_acc: 0.6, val_loss: 9.0, ..base }, &base));
        assert!(improves(&EpochMetrics { val_loss: 0.5, ..base }, &base));
        assert!(!improves(&base, &base));
    }
}
