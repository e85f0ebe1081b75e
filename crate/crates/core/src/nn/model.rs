use nalgebra::{DMatrix, DVector};

use super::params::{Activation, LayerParams, ModelConfig, ModelParams, NodeSummary, SheafForm};
use super::{Dataset, NnError};
use crate::hypergraph::{clique_expansion_multigraph, Hypergraph};
use crate::laplacian::{BlockSparseMatrix, InvSqrt, NormalizeOptions, PairRestrictions};
use crate::sheaf::CellularSheaf;
use crate::simplicial::Skeleton;

/// Unordered node pairs that share at least one hyperedge, with their co-membership counts.
///
/// The learned map of `[v]` into `[v, w]_e` depends only on the features of `v` and `w`, so every
/// hyperedge containing both contributes the same blocks; with both orderings of the pair this
/// gives a factor `2 * count` on each block.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStructure {
    num_nodes: usize,
    pairs: Vec<(usize, usize, f64)>,
}

impl PairStructure {
    pub fn new(h: &Hypergraph) -> Self {
        let ce = clique_expansion_multigraph(h);
        PairStructure { num_nodes: h.num_nodes(), pairs: ce.pairs().map(|((v, w), c)| (v, w, c as f64)).collect() }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }
}

#[derive(Debug, Clone)]
struct SideCache {
    input: DVector<f64>,
    out: DVector<f64>,
    map: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct PairCache {
    product: DVector<f64>,
    hidden_pre: DVector<f64>,
    feature: DVector<f64>,
    sides: [SideCache; 2],
}

#[derive(Debug, Clone)]
struct LayerCache {
    summaries: Vec<DVector<f64>>,
    pairs: Vec<PairCache>,
    diag: Vec<DMatrix<f64>>,
    inv_sqrt: Vec<InvSqrt>,
    /// `L_vw` per pair.
    off: Vec<DMatrix<f64>>,
    norm_diag: Vec<DMatrix<f64>>,
    norm_off: Vec<DMatrix<f64>>,
    mixed: DMatrix<f64>,
    projected: DMatrix<f64>,
    update: DMatrix<f64>,
}

/// Result of a forward pass with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `N x classes`.
    pub logits: DMatrix<f64>,
    /// `X_0, ..., X_T`, each `(N d) x f`.
    pub states: Vec<DMatrix<f64>>,
    caches: Vec<LayerCache>,
}

fn check_inputs(params: &ModelParams, config: &ModelConfig, structure: &PairStructure, features: &DMatrix<f64>) -> Result<(), NnError> {
    config.validate()?;
    if features.nrows() != structure.num_nodes {
        return Err(NnError::Shape {
            what: "feature rows",
            expected: structure.num_nodes.to_string(),
            found: features.nrows().to_string(),
        });
    }
    params.check_shapes(config, features.ncols(), params.head_bias.ncols())
}

fn block(x: &DMatrix<f64>, v: usize, d: usize) -> DMatrix<f64> {
    x.rows(v * d, d).into_owned()
}

/// Row `v` of `rows` (length `d f`, row-major) becomes the `d x f` block of node `v`.
fn rows_to_blocks(rows: &DMatrix<f64>, d: usize, f: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.nrows() * d, f, |r, c| rows[(r / d, (r % d) * f + c)])
}

fn blocks_to_rows(x: &DMatrix<f64>, d: usize, f: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows() / d, d * f, |v, k| x[(v * d + k / f, k % f)])
}

fn summarize(x: &DMatrix<f64>, v: usize, config: &ModelConfig) -> DVector<f64> {
    let (d, f) = (config.stalk_dim, config.channels);
    match config.node_summary {
        NodeSummary::ChannelMean => DVector::from_fn(d, |a, _| x.row(v * d + a).sum() / f as f64),
        NodeSummary::Flatten => DVector::from_fn(d * f, |k, _| x[(v * d + k / f, k % f)]),
    }
}

fn augment(x: &DVector<f64>) -> DVector<f64> {
    x.clone().insert_row(x.len(), 1.0)
}

fn side(params: &ModelParams, config: &ModelConfig, summary: &DVector<f64>, feature: &DVector<f64>) -> SideCache {
    let d = config.stalk_dim;
    let input = DVector::from_iterator(summary.len() + feature.len(), summary.iter().chain(feature.iter()).copied());
    let out = (params.map_weight.tr_mul(&input) + params.map_bias.transpose()).map(f64::tanh);
    let map = match config.sheaf_form {
        SheafForm::Diagonal => DMatrix::from_diagonal(&out),
        SheafForm::General => DMatrix::from_fn(d, d, |i, j| out[i * d + j]),
    };
    SideCache { input, out, map }
}

fn learn_pair(params: &ModelParams, config: &ModelConfig, xv: &DVector<f64>, xw: &DVector<f64>) -> PairCache {
    let product = augment(xv).component_mul(&augment(xw));
    let hidden_pre = params.learner_w.tr_mul(&product);
    let hidden = hidden_pre.map(|z| z.max(0.0));
    let feature = params.learner_m.tr_mul(&hidden).map(f64::tanh);
    let sides = [side(params, config, xv, &feature), side(params, config, xw, &feature)];
    PairCache { product, hidden_pre, feature, sides }
}

/// Learned maps `F([v] <| [v, w]_e)` for every hyperedge `e` and ordered pair inside it.
pub fn learn_pair_restrictions(
    params: &ModelParams,
    config: &ModelConfig,
    x: &DMatrix<f64>,
    h: &Hypergraph,
) -> Result<PairRestrictions, NnError> {
    let d = config.stalk_dim;
    if x.nrows() != h.num_nodes() * d || x.ncols() != config.channels {
        return Err(NnError::Shape {
            what: "features",
            expected: format!("{} x {}", h.num_nodes() * d, config.channels),
            found: format!("{} x {}", x.nrows(), x.ncols()),
        });
    }
    let summaries: Vec<DVector<f64>> = (0..h.num_nodes()).map(|v| summarize(x, v, config)).collect();
    let mut out = PairRestrictions::new(d);
    for (e, edge) in h.edges().iter().enumerate() {
        for (i, &v) in edge.nodes.iter().enumerate() {
            for &w in &edge.nodes[i + 1..] {
                let pair = learn_pair(params, config, &summaries[v], &summaries[w]);
                let [fv, fw] = pair.sides;
                out.insert(e, v, w, fv.map);
                out.insert(e, w, v, fw.map);
            }
        }
    }
    Ok(out)
}

/// The learned degree-1 sheaf on `sk`, equal on both orderings of each pair.
pub fn learn_sheaf(
    params: &ModelParams,
    config: &ModelConfig,
    x: &DMatrix<f64>,
    h: &Hypergraph,
    sk: &Skeleton,
) -> Result<CellularSheaf, NnError> {
    Ok(learn_pair_restrictions(params, config, x, h)?.to_sheaf(sk)?)
}

fn run_layer(
    params: &ModelParams,
    layer: &LayerParams,
    config: &ModelConfig,
    structure: &PairStructure,
    x: &DMatrix<f64>,
) -> (DMatrix<f64>, LayerCache) {
    let (n, d) = (structure.num_nodes, config.stalk_dim);
    let summaries: Vec<DVector<f64>> = (0..n).map(|v| summarize(x, v, config)).collect();
    let pairs: Vec<PairCache> =
        structure.pairs.iter().map(|&(v, w, _)| learn_pair(params, config, &summaries[v], &summaries[w])).collect();

    let mut diag = vec![DMatrix::zeros(d, d); n];
    let mut off = Vec::with_capacity(pairs.len());
    for (&(v, w, c), pc) in structure.pairs.iter().zip(&pairs) {
        let (fv, fw) = (&pc.sides[0].map, &pc.sides[1].map);
        diag[v] += fv.tr_mul(fv) * (2.0 * c);
        diag[w] += fw.tr_mul(fw) * (2.0 * c);
        off.push(fv.tr_mul(fw) * (-2.0 * c));
    }
    let inv_sqrt: Vec<InvSqrt> = diag.iter().map(|b| InvSqrt::new(b, NormalizeOptions::default())).collect();
    let norm_diag: Vec<DMatrix<f64>> =
        (0..n).map(|v| &inv_sqrt[v].matrix * &diag[v] * &inv_sqrt[v].matrix).collect();
    let norm_off: Vec<DMatrix<f64>> = structure
        .pairs
        .iter()
        .zip(&off)
        .map(|(&(v, w, _), l)| &inv_sqrt[v].matrix * l * &inv_sqrt[w].matrix)
        .collect();

    let mut mixed = x.clone();
    for v in 0..n {
        mixed.rows_mut(v * d, d).copy_from(&(&layer.w1 * x.rows(v * d, d)));
    }
    let projected = &mixed * &layer.w2;
    let mut update = DMatrix::zeros(x.nrows(), x.ncols());
    for v in 0..n {
        let contribution = &norm_diag[v] * projected.rows(v * d, d);
        let mut rows = update.rows_mut(v * d, d);
        rows += contribution;
    }
    for (&(v, w, _), hb) in structure.pairs.iter().zip(&norm_off) {
        let to_v = hb * projected.rows(w * d, d);
        let to_w = hb.tr_mul(&projected.rows(v * d, d));
        let mut rows = update.rows_mut(v * d, d);
        rows += to_v;
        let mut rows = update.rows_mut(w * d, d);
        rows += to_w;
    }
    let next = x - update.map(|y| config.activation.apply(y));
    let cache =
        LayerCache { summaries, pairs, diag, inv_sqrt, off, norm_diag, norm_off, mixed, projected, update };
    (next, cache)
}

/// One diffusion layer with a fixed normalized Laplacian:
/// `X - act(Lhat (I (x) W1) X W2)`.
pub fn diffusion_step(
    normalized: &BlockSparseMatrix,
    layer: &LayerParams,
    activation: Activation,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>, NnError> {
    let d = normalized.block_dim();
    if x.nrows() != normalized.dim() || layer.w1.shape() != (d, d) || layer.w2.shape() != (x.ncols(), x.ncols()) {
        return Err(NnError::Shape {
            what: "diffusion step",
            expected: format!("{} rows, w1 {d}x{d}, w2 {f}x{f}", normalized.dim(), f = x.ncols()),
            found: format!("{} rows, w1 {:?}, w2 {:?}", x.nrows(), layer.w1.shape(), layer.w2.shape()),
        });
    }
    let mut mixed = x.clone();
    for v in 0..normalized.n_blocks() {
        mixed.rows_mut(v * d, d).copy_from(&(&layer.w1 * x.rows(v * d, d)));
    }
    let update = normalized.mul_dense(&(mixed * &layer.w2));
    Ok(x - update.map(|y| activation.apply(y)))
}

/// Normalized degree-0 Laplacian of the sheaf learned from `x`, through the pair fast path.
pub fn layer_laplacian(
    params: &ModelParams,
    config: &ModelConfig,
    structure: &PairStructure,
    x: &DMatrix<f64>,
) -> BlockSparseMatrix {
    let (_, cache) = run_layer(params, &params.layers[0], config, structure, x);
    let d = config.stalk_dim;
    let mut triplets: Vec<(usize, usize, DMatrix<f64>)> =
        cache.norm_diag.into_iter().enumerate().map(|(v, b)| (v, v, b)).collect();
    for (&(v, w, _), b) in structure.pairs.iter().zip(cache.norm_off) {
        triplets.push((w, v, b.transpose()));
        triplets.push((v, w, b));
    }
    BlockSparseMatrix::from_triplets(structure.num_nodes, d, triplets)
}

pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    structure: &PairStructure,
    features: &DMatrix<f64>,
) -> Result<Forward, NnError> {
    check_inputs(params, config, structure, features)?;
    let (d, f) = (config.stalk_dim, config.channels);
    let n = features.nrows();
    let projected = features * &params.input_weight + DMatrix::from_fn(n, d * f, |_, k| params.input_bias[(0, k)]);
    let mut states = vec![rows_to_blocks(&projected, d, f)];
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (next, cache) = run_layer(params, layer, config, structure, states.last().unwrap());
        states.push(next);
        caches.push(cache);
    }
    let flat = blocks_to_rows(states.last().unwrap(), d, f);
    let classes = params.head_bias.ncols();
    let logits = &flat * &params.head_weight + DMatrix::from_fn(n, classes, |_, k| params.head_bias[(0, k)]);
    Ok(Forward { logits, states, caches })
}

fn log_softmax_row(logits: &DMatrix<f64>, v: usize) -> DVector<f64> {
    let row = logits.row(v);
    let max = row.max();
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    DVector::from_iterator(row.len(), row.iter().map(|z| z - lse))
}

/// Mean softmax cross-entropy over `mask` and its gradient with respect to the logits.
pub(super) fn cross_entropy(logits: &DMatrix<f64>, labels: &[usize], mask: &[usize]) -> Result<(f64, DMatrix<f64>), NnError> {
    let mut grad = DMatrix::zeros(logits.nrows(), logits.ncols());
    if mask.is_empty() {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / mask.len() as f64;
    let mut loss = 0.0;
    for &v in mask {
        let logp = log_softmax_row(logits, v);
        loss -= logp[labels[v]] * scale;
        for k in 0..logits.ncols() {
            grad[(v, k)] = logp[k].exp() * scale;
        }
        grad[(v, labels[v])] -= scale;
    }
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss);
    }
    Ok((loss, grad))
}

/// Mean cross-entropy over `mask` without gradients.
pub fn masked_loss(
    params: &ModelParams,
    config: &ModelConfig,
    structure: &PairStructure,
    data: &Dataset,
    mask: &[usize],
) -> Result<f64, NnError> {
    let fwd = forward(params, config, structure, &data.features)?;
    Ok(cross_entropy(&fwd.logits, &data.labels, mask)?.0)
}

#[allow(clippy::too_many_arguments)]
fn backward_layer(
    params: &ModelParams,
    layer: &LayerParams,
    config: &ModelConfig,
    structure: &PairStructure,
    x: &DMatrix<f64>,
    cache: &LayerCache,
    grad_next: &DMatrix<f64>,
    grads: &mut ModelParams,
    layer_grad: &mut LayerParams,
) -> DMatrix<f64> {
    let (n, d, f) = (structure.num_nodes, config.stalk_dim, config.channels);
    let mut grad_x = grad_next.clone();
    let grad_update = -grad_next.component_mul(&cache.update.map(|y| config.activation.derivative(y)));

    // update = Lhat * projected
    let mut grad_projected = DMatrix::zeros(x.nrows(), f);
    let mut grad_norm_diag = Vec::with_capacity(n);
    for v in 0..n {
        let gu = block(&grad_update, v, d);
        let mut rows = grad_projected.rows_mut(v * d, d);
        rows += cache.norm_diag[v].tr_mul(&gu);
        grad_norm_diag.push(gu * block(&cache.projected, v, d).transpose());
    }
    let mut grad_norm_off = Vec::with_capacity(structure.pairs.len());
    for (&(v, w, _), hb) in structure.pairs.iter().zip(&cache.norm_off) {
        let (gv, gw) = (block(&grad_update, v, d), block(&grad_update, w, d));
        let (pv, pw) = (block(&cache.projected, v, d), block(&cache.projected, w, d));
        let mut rows = grad_projected.rows_mut(w * d, d);
        rows += hb.tr_mul(&gv);
        let mut rows = grad_projected.rows_mut(v * d, d);
        rows += hb * &gw;
        grad_norm_off.push(&gv * pw.transpose() + pv * gw.transpose());
    }

    // projected = mixed * W2, mixed_v = W1 x_v
    layer_grad.w2 += cache.mixed.tr_mul(&grad_projected);
    let grad_mixed = &grad_projected * layer.w2.transpose();
    for v in 0..n {
        let gm = block(&grad_mixed, v, d);
        layer_grad.w1 += &gm * block(x, v, d).transpose();
        let mut rows = grad_x.rows_mut(v * d, d);
        rows += layer.w1.tr_mul(&gm);
    }

    // Lhat_vv = S_v D_v S_v, Lhat_vw = S_v L_vw S_w
    let mut grad_diag: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); n];
    let mut grad_s: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); n];
    for v in 0..n {
        let (s, dv, g) = (&cache.inv_sqrt[v].matrix, &cache.diag[v], &grad_norm_diag[v]);
        grad_diag[v] += s * g * s;
        grad_s[v] += g * s * dv + dv * s * g;
    }
    let mut grad_maps: Vec<[DMatrix<f64>; 2]> = vec![[DMatrix::zeros(d, d), DMatrix::zeros(d, d)]; structure.pairs.len()];
    for (k, &(v, w, c)) in structure.pairs.iter().enumerate() {
        let (sv, sw) = (&cache.inv_sqrt[v].matrix, &cache.inv_sqrt[w].matrix);
        let (l, g) = (&cache.off[k], &grad_norm_off[k]);
        let grad_l = sv * g * sw;
        grad_s[v] += g * sw * l.transpose();
        grad_s[w] += l.tr_mul(sv) * g;
        // L_vw = -2c F_v^T F_w
        let (fv, fw) = (&cache.pairs[k].sides[0].map, &cache.pairs[k].sides[1].map);
        grad_maps[k][0] += fw * grad_l.transpose() * (-2.0 * c);
        grad_maps[k][1] += fv * &grad_l * (-2.0 * c);
    }
    for v in 0..n {
        grad_diag[v] += cache.inv_sqrt[v].backward(&grad_s[v]);
    }

    let s_len = config.summary_dim();
    let mut grad_summary: Vec<DVector<f64>> = vec![DVector::zeros(s_len); n];
    for (k, &(v, w, c)) in structure.pairs.iter().enumerate() {
        let pc = &cache.pairs[k];
        let mut grad_feature = DVector::zeros(pc.feature.len());
        for (side_idx, node) in [(0, v), (1, w)] {
            let sc = &pc.sides[side_idx];
            // D_node += 2c F^T F
            let gd = &grad_diag[node];
            let grad_map = &grad_maps[k][side_idx] + &sc.map * (gd + gd.transpose()) * (2.0 * c);
            let grad_out = match config.sheaf_form {
                SheafForm::Diagonal => grad_map.diagonal(),
                SheafForm::General => DVector::from_fn(d * d, |idx, _| grad_map[(idx / d, idx % d)]),
            };
            let grad_pre = grad_out.component_mul(&sc.out.map(|m| 1.0 - m * m));
            grads.map_weight += &sc.input * grad_pre.transpose();
            grads.map_bias += grad_pre.transpose();
            let grad_input = &params.map_weight * grad_pre;
            grad_summary[node] += grad_input.rows(0, s_len);
            grad_feature += grad_input.rows(s_len, pc.feature.len());
        }
        let grad_z2 = grad_feature.component_mul(&pc.feature.map(|q| 1.0 - q * q));
        let hidden = pc.hidden_pre.map(|z| z.max(0.0));
        grads.learner_m += &hidden * grad_z2.transpose();
        let grad_hidden = (&params.learner_m * grad_z2)
            .zip_map(&pc.hidden_pre, |g, z| if z > 0.0 { g } else { 0.0 });
        grads.learner_w += &pc.product * grad_hidden.transpose();
        let grad_product = &params.learner_w * grad_hidden;
        let (xv, xw) = (&cache.summaries[v], &cache.summaries[w]);
        grad_summary[v] += grad_product.rows(0, s_len).component_mul(xw);
        grad_summary[w] += grad_product.rows(0, s_len).component_mul(xv);
    }

    for (v, gs) in grad_summary.iter().enumerate() {
        match config.node_summary {
            NodeSummary::ChannelMean => {
                for a in 0..d {
                    for c in 0..f {
                        grad_x[(v * d + a, c)] += gs[a] / f as f64;
                    }
                }
            }
            NodeSummary::Flatten => {
                for k in 0..d * f {
                    grad_x[(v * d + k / f, k % f)] += gs[k];
                }
            }
        }
    }
    grad_x
}

/// Mean cross-entropy over `mask` and its gradient for every parameter tensor.
pub fn loss_and_grad(
    params: &ModelParams,
    config: &ModelConfig,
    structure: &PairStructure,
    data: &Dataset,
    mask: &[usize],
) -> Result<(f64, ModelParams), NnError> {
    let fwd = forward(params, config, structure, &data.features)?;
    let (loss, grad_logits) = cross_entropy(&fwd.logits, &data.labels, mask)?;
    let (d, f) = (config.stalk_dim, config.channels);
    let mut grads = params.zeros_like();

    let flat = blocks_to_rows(fwd.states.last().unwrap(), d, f);
    grads.head_weight = flat.tr_mul(&grad_logits);
    grads.head_bias = DMatrix::from_fn(1, grad_logits.ncols(), |_, k| grad_logits.column(k).sum());
    let mut grad_x = rows_to_blocks(&(&grad_logits * params.head_weight.transpose()), d, f);

    for t in (0..params.layers.len()).rev() {
        let mut layer_grad = grads.layers[t].clone();
        grad_x = backward_layer(
            params,
            &params.layers[t],
            config,
            structure,
            &fwd.states[t],
            &fwd.caches[t],
            &grad_x,
            &mut grads,
            &mut layer_grad,
        );
        grads.layers[t] = layer_grad;
    }

    let grad_rows = blocks_to_rows(&grad_x, d, f);
    grads.input_weight = data.features.tr_mul(&grad_rows);
    grads.input_bias = DMatrix::from_fn(1, d * f, |_, k| grad_rows.column(k).sum());
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_block_dataset;
    use crate::laplacian::{assemble_diagonal, assemble_laplacian, normalize, DEFAULT_PINV_REL_TOL};
    use crate::oracle::finite_difference_grad;
    use crate::simplicial::build_skeleton;

    fn small_dataset() -> Dataset {
        let h = Hypergraph::parse("#nodes 6\n0 1 2\n1 2 3\n3 4\n4 5 0\n2 5").unwrap();
        let x = DMatrix::from_fn(6, 3, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.3 - 0.6);
        Dataset::new(h, x, vec![0, 1, 0, 1, 1, 0]).unwrap()
    }

    fn grad_check(config: &ModelConfig, data: &Dataset, seed: u64) {
        let params = ModelParams::random(config, data.raw_dim(), 2, 0.8, seed).unwrap();
        let structure = PairStructure::new(&data.hypergraph);
        let mask: Vec<usize> = (0..data.num_nodes()).collect();
        let (_, analytic) = loss_and_grad(&params, config, &structure, data, &mask).unwrap();
        let mut probe = params.clone();
        let fd = finite_difference_grad(
            |flat| {
                probe.set_flat(flat);
                masked_loss(&probe, config, &structure, data, &mask).unwrap()
            },
            &params.to_flat(),
            1e-5,
        )
        .unwrap();
        let mut numeric = params.clone();
        numeric.set_flat(&fd);
        for ((name, a), b) in params.tensor_names().iter().zip(analytic.tensors()).zip(numeric.tensors()) {
            let scale = a.norm().max(b.norm());
            let rel = if scale < 1e-10 { 0.0 } else { (a - b).norm() / scale };
            assert!(rel < 1e-5, "{name}: relative error {rel:e}\nanalytic {a}\nnumeric {b}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = small_dataset();
        for (i, activation) in [Activation::Identity, Activation::Tanh].into_iter().enumerate() {
            for form in [SheafForm::Diagonal, SheafForm::General] {
                for summary in [NodeSummary::ChannelMean, NodeSummary::Flatten] {
                    let config = ModelConfig {
                        stalk_dim: 2,
                        channels: 2,
                        layers: 2,
                        activation,
                        sheaf_form: form,
                        node_summary: summary,
                        pair_width: 3,
                        hidden_width: 4,
                        ..ModelConfig::default()
                    };
                    grad_check(&config, &data, 11 + i as u64);
                }
            }
        }
    }

    #[test]
    fn zero_learner_makes_diffusion_inert() {
        let data = small_dataset();
        let config = ModelConfig { stalk_dim: 2, channels: 3, layers: 2, ..ModelConfig::default() };
        let mut params = ModelParams::random(&config, data.raw_dim(), 2, 0.5, 4).unwrap();
        params.learner_w.fill(0.0);
        params.learner_m.fill(0.0);
        params.map_weight.fill(0.0);
        params.map_bias.fill(0.0);
        let structure = PairStructure::new(&data.hypergraph);
        let fwd = forward(&params, &config, &structure, &data.features).unwrap();
        assert!(fwd.states.windows(2).all(|w| w[0] == w[1]));
        let sheaf_maps = learn_pair_restrictions(&params, &config, &fwd.states[0], &data.hypergraph).unwrap();
        assert!(sheaf_maps.get(0, 0, 1).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fast_path_matches_generic_assembly() {
        let data = small_dataset();
        let sk = build_skeleton(&data.hypergraph, 1).unwrap();
        let structure = PairStructure::new(&data.hypergraph);
        for form in [SheafForm::Diagonal, SheafForm::General] {
            let config = ModelConfig { stalk_dim: 2, channels: 3, sheaf_form: form, ..ModelConfig::default() };
            let params = ModelParams::random(&config, data.raw_dim(), 2, 0.7, 9).unwrap();
            let x = forward(&params, &config, &structure, &data.features).unwrap().states[0].clone();
            let sheaf = learn_sheaf(&params, &config, &x, &data.hypergraph, &sk).unwrap();
            let l = assemble_laplacian(&sk, &sheaf, 0).unwrap();
            let dg = assemble_diagonal(&sk, &sheaf, 0).unwrap();
            let generic = normalize(&l, &dg, DEFAULT_PINV_REL_TOL).unwrap();
            let fast = layer_laplacian(&params, &config, &structure, &x);
            assert!(fast.max_abs_diff(&generic) < 1e-12);
        }
    }

    #[test]
    fn pair_feature_is_symmetric_and_maps_have_requested_shape() {
        let config = ModelConfig { stalk_dim: 2, pair_width: 3, ..ModelConfig::default() };
        let params = ModelParams::random(&config, 3, 2, 1.0, 2).unwrap();
        let (xv, xw) = (DVector::from_vec(vec![0.3, -1.2]), DVector::from_vec(vec![0.9, 0.4]));
        let a = learn_pair(&params, &config, &xv, &xw);
        let b = learn_pair(&params, &config, &xw, &xv);
        assert_eq!(a.feature, b.feature);
        assert_eq!(a.feature.len(), 3);
        assert_eq!(a.sides[0].map, b.sides[1].map);
        let m = &a.sides[0].map;
        assert_eq!(m.shape(), (2, 2));
        assert!(m[(0, 1)] == 0.0 && m[(1, 0)] == 0.0);
    }

    #[test]
    fn forward_is_equivariant() {
        let data = two_block_dataset(20, 3);
        let config = ModelConfig::default();
        let params = ModelParams::init(&config, data.raw_dim(), data.num_classes, 5).unwrap();
        let perm: Vec<usize> = (0..data.num_nodes()).map(|v| (v * 7 + 3) % data.num_nodes()).collect();
        let permuted = data.permute_nodes(&perm);
        let a = forward(&params, &config, &PairStructure::new(&data.hypergraph), &data.features).unwrap();
        let b = forward(&params, &config, &PairStructure::new(&permuted.hypergraph), &permuted.features).unwrap();
        for (v, &p) in perm.iter().enumerate() {
            assert!((a.logits.row(v) - b.logits.row(p)).amax() < 1e-10);
        }
    }

    #[test]
    fn head_bias_gradient_at_zero_weights() {
        let data = small_dataset();
        let config = ModelConfig::default();
        let params = ModelParams::init(&config, data.raw_dim(), 2, 1).unwrap().zeros_like();
        let structure = PairStructure::new(&data.hypergraph);
        let mask = vec![0, 1, 2];
        let (loss, g) = loss_and_grad(&params, &config, &structure, &data, &mask).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        // mean of softmax(0) - onehot over labels 0, 1, 0
        assert!((g.head_bias[(0, 0)] - (0.5 - 2.0 / 3.0)).abs() < 1e-15);
        assert!((g.head_bias[(0, 1)] - (0.5 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn isolated_unmasked_node_sends_no_gradient() {
        // Only isolated node 3 has a nonzero first feature, and it is left out of the loss.
        let h = Hypergraph::parse("#nodes 4\n0 1 2").unwrap();
        let mut x = DMatrix::from_fn(4, 2, |r, c| if c == 1 { r as f64 * 0.2 } else { 0.0 });
        x[(3, 0)] = 1.0;
        let data = Dataset::new(h, x, vec![0, 1, 0, 1]).unwrap();
        let config = ModelConfig { stalk_dim: 1, channels: 2, ..ModelConfig::default() };
        let params = ModelParams::random(&config, 2, 2, 0.5, 3).unwrap();
        let structure = PairStructure::new(&data.hypergraph);
        let (_, g) = loss_and_grad(&params, &config, &structure, &data, &[0, 1, 2]).unwrap();
        assert!(g.input_weight.row(0).iter().all(|&v| v == 0.0));
    }
}
