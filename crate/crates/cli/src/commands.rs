use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use hnsd_core::fixtures::two_block_dataset;
use hnsd_core::hypergraph::{clique_expansion_multigraph, labeled_equal, Hypergraph};
use hnsd_core::laplacian::{
    assemble_diagonal, assemble_laplacian, dirichlet_energy, graph_sheaf_laplacian, normalize, spectrum,
    BlockSparseMatrix, Cochain, Extreme, DEFAULT_PINV_REL_TOL,
};
use hnsd_core::nn::{gradient_check, metrics_csv, parse_labels, split_nodes, train_runs, Activation, ModelConfig, ModelParams, SheafForm};
use hnsd_core::sheaf::{
    check_compatibility, identity_sheaf, induce_from_graph_sheaf, random_compatible_sheaf, CellularSheaf, GraphSheaf,
    DEFAULT_COMPATIBILITY_TOL,
};
use hnsd_core::simplicial::{build_skeleton_with_cap, predicted_counts, Skeleton, SkeletonError, DEFAULT_SIMPLEX_CAP};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{read, write, TrainConfig};
use crate::{
    CheckArgs, CliError, DiffuseArgs, GradcheckArgs, InitKind, LaplacianArgs, ReconstructArgs, SheafArgs, SheafKind,
    StatsArgs, Status, TrainArgs,
};

/// Equalities that hold up to floating-point reassociation.
const EXACT_TOL: f64 = 1e-12;
const NORMALIZED_TOL: f64 = 1e-10;

fn emit(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::io(Path::new("<output>"), e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        emit($out, format_args!("{}\n", format_args!($($arg)*)))
    };
}

fn load_hypergraph(path: &Path) -> Result<Hypergraph, CliError> {
    Ok(Hypergraph::parse(&read(path)?)?)
}

/// Collects PASS / FAIL / SKIP lines.
struct Checklist<'a> {
    out: &'a mut dyn Write,
    failed: Vec<String>,
}

impl<'a> Checklist<'a> {
    fn record(&mut self, name: &str, ok: bool, detail: String) -> Result<(), CliError> {
        if ok {
            say!(self.out, "PASS {name}: {detail}")
        } else {
            self.failed.push(name.to_string());
            say!(self.out, "FAIL {name}: {detail}")
        }
    }

    fn skip(&mut self, name: &str, reason: impl std::fmt::Display) -> Result<(), CliError> {
        say!(self.out, "SKIP {name}: {reason}")
    }

    fn finish(self) -> Result<Status, CliError> {
        if self.failed.is_empty() {
            say!(self.out, "all checks passed")?;
            Ok(Status::Passed)
        } else {
            say!(self.out, "failed: {}", self.failed.join(", "))?;
            Ok(Status::Failed)
        }
    }
}

/// `2 (L_CE kron I_d)` built from co-membership counts.
fn doubled_clique_laplacian(h: &Hypergraph, d: usize) -> BlockSparseMatrix {
    let identity = DMatrix::<f64>::identity(d, d);
    let mut triplets = Vec::new();
    for ((v, w), c) in clique_expansion_multigraph(h).pairs() {
        let block = &identity * (2.0 * c as f64);
        triplets.push((v, w, -&block));
        triplets.push((w, v, -&block));
        triplets.push((v, v, block.clone()));
        triplets.push((w, w, block));
    }
    BlockSparseMatrix::from_triplets(h.num_nodes(), d, triplets)
}

fn smallest_eigenvalue(l: &BlockSparseMatrix) -> Result<f64, CliError> {
    if l.dim() == 0 {
        return Ok(0.0);
    }
    Ok(spectrum(l, 1, Extreme::Smallest)?[0])
}

fn largest_eigenvalue(l: &BlockSparseMatrix) -> Result<f64, CliError> {
    if l.dim() == 0 {
        return Ok(0.0);
    }
    Ok(spectrum(l, 1, Extreme::Largest)?[0])
}

pub fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let h = load_hypergraph(&args.hypergraph)?;
    let cap = args.cap.unwrap_or(DEFAULT_SIMPLEX_CAP);
    let d = args.stalk_dim.max(1);
    say!(out, "hypergraph: {} nodes, {} hyperedges", h.num_nodes(), h.num_edges())?;
    let mut list = Checklist { out, failed: Vec::new() };

    let depth = h.max_dimension().min(2);
    match build_skeleton_with_cap(&h, depth, cap) {
        Ok(sk) => {
            let predicted: Vec<u128> = predicted_counts(&h, depth);
            let found: Vec<u128> = sk.counts().into_iter().map(|c| c as u128).collect();
            list.record("count law", found == predicted, format!("counts {found:?}"))?;

            let sheaf = identity_sheaf(&sk, d, depth)?;
            let report = check_compatibility(&sheaf, &sk, DEFAULT_COMPATIBILITY_TOL);
            list.record("identity sheaf compatibility", report.is_compatible(), format!("degree {depth}"))?;
            for k in 0..=depth {
                let l = assemble_laplacian(&sk, &sheaf, k)?;
                list.record(
                    &format!("L{k} symmetric"),
                    l.is_symmetric(),
                    format!("max asymmetry {:e}", l.max_asymmetry()),
                )?;
                match smallest_eigenvalue(&l) {
                    Ok(min) => list.record(&format!("L{k} psd"), min >= -args.tol, format!("min eigenvalue {min:e}"))?,
                    Err(e) => list.record(&format!("L{k} psd"), false, e.to_string())?,
                }
                if k == 0 {
                    let gap = l.max_abs_diff(&doubled_clique_laplacian(&h, d));
                    list.record("L0 = 2 L_CE (x) I", gap == 0.0, format!("max difference {gap:e}"))?;
                }
            }
        }
        Err(e @ SkeletonError::CountGuard { .. }) => list.skip("skeleton checks", e)?,
        Err(e) => return Err(e.into()),
    }

    match build_skeleton_with_cap(&h, h.max_dimension(), cap) {
        Ok(sk) => {
            let rebuilt = sk.reconstruct_hypergraph()?;
            list.record("reconstruction", labeled_equal(&rebuilt, &h), format!("{} hyperedges", rebuilt.num_edges()))?;
        }
        Err(e @ SkeletonError::CountGuard { .. }) => list.skip("reconstruction", e)?,
        Err(e) => return Err(e.into()),
    }

    if h.is_graph() {
        let gs = GraphSheaf::random(&h, d, args.seed)?;
        let sk = build_skeleton_with_cap(&h, 1, cap)?;
        let sheaf = induce_from_graph_sheaf(&h, &gs, &sk)?;
        let reference = graph_sheaf_laplacian(&h, &gs)?;
        let l0 = assemble_laplacian(&sk, &sheaf, 0)?;
        let d0 = assemble_diagonal(&sk, &sheaf, 0)?;
        let gap_l = l0.max_abs_diff(&reference.laplacian.scaled(2.0));
        let gap_d = d0.max_abs_diff(&reference.diagonal.scaled(2.0));
        let gap_n = normalize(&l0, &d0, DEFAULT_PINV_REL_TOL)?.max_abs_diff(&reference.normalized);
        list.record(
            "L0=2L_F",
            gap_l <= EXACT_TOL && gap_d <= EXACT_TOL && gap_n <= NORMALIZED_TOL,
            format!("laplacian {gap_l:e}, diagonal {gap_d:e}, normalized {gap_n:e}"),
        )?;
    }
    list.finish()
}

pub fn stats(args: &StatsArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let h = load_hypergraph(&args.hypergraph)?;
    let avg = h.average_edge_size();
    let max = h.edges().iter().map(|e| e.size()).max().unwrap_or(0);
    say!(out, "nodes {}", h.num_nodes())?;
    say!(out, "hyperedges {}", h.num_edges())?;
    say!(out, "avg_hyperedge_size {avg:.16e}")?;
    say!(out, "avg_hyperedge_size_rounded {avg:.2}")?;
    say!(out, "max_hyperedge_size {max}")?;
    if let Some(path) = &args.labels {
        let labels = parse_labels(&read(path)?)?;
        if labels.len() != h.num_nodes() {
            return Err(CliError::Schema(format!("{} labels for {} nodes", labels.len(), h.num_nodes())));
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        say!(out, "classes {}", classes.len())?;
    }

    let mut status = Status::Passed;
    let mut expect = |what: &str, ok: bool, expected: String, found: String| -> Result<(), CliError> {
        if !ok {
            status = Status::Failed;
            say!(out, "FAIL {what}: expected {expected}, found {found}")?;
        }
        Ok(())
    };
    if let Some(n) = args.expect_nodes {
        expect("nodes", n == h.num_nodes(), n.to_string(), h.num_nodes().to_string())?;
    }
    if let Some(m) = args.expect_edges {
        expect("hyperedges", m == h.num_edges(), m.to_string(), h.num_edges().to_string())?;
    }
    if let Some(a) = args.expect_avg {
        expect("avg_hyperedge_size", format!("{a:.2}") == format!("{avg:.2}"), format!("{a:.2}"), format!("{avg:.2}"))?;
    }
    Ok(status)
}

/// Skeleton and sheaf for Laplacians up to degree `k`. Generated sheaves get degree `k + 1`
/// so that the upper term is present.
fn build_sheaf(h: &Hypergraph, args: &SheafArgs, k: usize, cap: Option<u128>) -> Result<(Skeleton, CellularSheaf), CliError> {
    let cap = cap.unwrap_or(DEFAULT_SIMPLEX_CAP);
    match args.sheaf {
        SheafKind::Identity | SheafKind::Random => {
            if args.stalk_dim == 0 {
                return Err(CliError::Validation("stalk dimension must be at least 1".into()));
            }
            let sk = build_skeleton_with_cap(h, k + 1, cap)?;
            let sheaf = if args.sheaf == SheafKind::Identity {
                identity_sheaf(&sk, args.stalk_dim, k + 1)?
            } else {
                random_compatible_sheaf(&sk, args.stalk_dim, k + 1, args.seed)?
            };
            Ok((sk, sheaf))
        }
        SheafKind::File => {
            let path = args
                .sheaf_file
                .as_ref()
                .ok_or_else(|| CliError::Schema("--sheaf file needs --sheaf-file".into()))?;
            let text = read(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let degree = value
                .get("degree")
                .and_then(serde_json::Value::as_u64)
                .ok_or_else(|| CliError::Schema(format!("{}: missing integer field `degree`", path.display())))?
                as usize;
            if degree < k {
                return Err(CliError::Validation(format!("sheaf degree {degree} is below the requested degree {k}")));
            }
            let sk = build_skeleton_with_cap(h, degree, cap)?;
            let sheaf = CellularSheaf::from_json(&text, &sk)?;
            Ok((sk, sheaf))
        }
    }
}

fn laplacian_csv(m: &BlockSparseMatrix) -> String {
    let mut csv = format!("# n_blocks={} d={}\nrow,col,value\n", m.n_blocks(), m.block_dim());
    for (r, c, v) in m.flat_triplets() {
        writeln!(csv, "{r},{c},{v:.16e}").unwrap();
    }
    csv
}

pub fn laplacian(args: &LaplacianArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status, CliError> {
    let h = load_hypergraph(&args.hypergraph)?;
    let (sk, sheaf) = build_sheaf(&h, &args.sheaf, args.degree, args.cap)?;
    let mut l = assemble_laplacian(&sk, &sheaf, args.degree)?;
    if args.normalized {
        l = normalize(&l, &assemble_diagonal(&sk, &sheaf, args.degree)?, args.tol)?;
    }
    let csv = laplacian_csv(&l);
    let summary: &mut dyn Write = match &args.out {
        Some(path) => {
            write(path, &csv)?;
            out
        }
        None => {
            emit(out, format_args!("{csv}"))?;
            err
        }
    };
    say!(summary, "n_blocks {}", l.n_blocks())?;
    say!(summary, "d {}", l.block_dim())?;
    say!(summary, "nnz {}", l.flat_triplets().len())?;
    if !args.no_spectrum {
        say!(summary, "lambda_min {:.16e}", smallest_eigenvalue(&l)?)?;
        say!(summary, "lambda_max {:.16e}", largest_eigenvalue(&l)?)?;
    }
    Ok(Status::Passed)
}

pub fn diffuse(args: &DiffuseArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status, CliError> {
    if !(args.step_size.is_finite() && args.step_size > 0.0) {
        return Err(CliError::Validation("step size must be positive".into()));
    }
    if args.channels == 0 {
        return Err(CliError::Validation("channels must be at least 1".into()));
    }
    let h = load_hypergraph(&args.hypergraph)?;
    let (sk, sheaf) = build_sheaf(&h, &args.sheaf, 0, args.cap)?;
    let mut l = assemble_laplacian(&sk, &sheaf, 0)?;
    if !args.unnormalized {
        l = normalize(&l, &assemble_diagonal(&sk, &sheaf, 0)?, DEFAULT_PINV_REL_TOL)?;
    }
    let lambda_max = largest_eigenvalue(&l)?;
    let bound = if lambda_max > 0.0 { 2.0 / lambda_max } else { f64::INFINITY };
    if args.step_size >= bound {
        say!(
            err,
            "warning: unstable step size {:.16e} >= 2/lambda_max = {bound:.16e}; energy may grow",
            args.step_size
        )?;
    }

    let d = l.block_dim();
    let mut x = match args.init {
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.sheaf.seed);
            DMatrix::from_fn(l.dim(), args.channels, |_, _| rng.gen_range(-1.0..1.0))
        }
        InitKind::Constant => DMatrix::from_element(l.dim(), args.channels, 1.0),
    };
    let energy = |x: &DMatrix<f64>| -> Result<f64, CliError> { Ok(dirichlet_energy(&l, &Cochain::new(d, x.clone())?)?) };
    let mut trace = vec![energy(&x)?];
    for _ in 0..args.steps {
        x -= l.mul_dense(&x) * args.step_size;
        trace.push(energy(&x)?);
    }

    let mut csv = String::from("step,energy\n");
    for (s, e) in trace.iter().enumerate() {
        writeln!(csv, "{s},{e:.16e}").unwrap();
    }
    match &args.out {
        Some(path) => write(path, &csv)?,
        None => emit(out, format_args!("{csv}"))?,
    }
    // Rises below the rounding floor of the initial energy are noise, not divergence.
    let slack = 1e-12 * trace[0].abs();
    let rise = trace.windows(2).position(|w| w[1] > w[0] + slack);
    if let Some(s) = rise {
        say!(err, "warning: divergence, energy increased at step {}", s + 1)?;
    }
    say!(err, "lambda_max {lambda_max:.16e}")?;
    say!(err, "stability_bound {bound:.16e}")?;
    say!(err, "monotone {}", rise.is_none())?;
    Ok(Status::Passed)
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let mut config = TrainConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.model.seed = seed;
    }
    if let Some(dir) = &args.out {
        config.metrics_dir = Some(dir.clone());
    }
    let data = config.dataset()?;
    let summary = train_runs(&data, &config.model, config.runs)?;
    if let Some(dir) = &config.metrics_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (r, run) in summary.runs.iter().enumerate() {
            write(&dir.join(format!("run_{r}.csv")), &metrics_csv(&run.trace))?;
        }
    }
    for (r, run) in summary.runs.iter().enumerate() {
        let b = &run.best;
        say!(
            out,
            "run {r} seed {} best_epoch {} train_acc {:.4} val_acc {:.4} test_acc {:.4}",
            config.model.seed.wrapping_add(r as u64),
            b.epoch,
            b.train_acc,
            b.val_acc,
            b.test_acc
        )?;
    }
    say!(out, "test_acc_mean {:.16e}", summary.mean)?;
    say!(out, "test_acc_std {:.16e}", summary.std)?;
    say!(out, "test accuracy {:.2}% +/- {:.2}% over {} runs", 100.0 * summary.mean, 100.0 * summary.std, config.runs)?;
    Ok(Status::Passed)
}

pub fn reconstruct(args: &ReconstructArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let h = load_hypergraph(&args.hypergraph)?;
    let sk = build_skeleton_with_cap(&h, h.max_dimension(), args.cap.unwrap_or(DEFAULT_SIMPLEX_CAP))?;
    let rebuilt = sk.reconstruct_hypergraph()?;
    let same = labeled_equal(&rebuilt, &h);
    let mut text = rebuilt.to_text().unwrap_or_else(|_| rebuilt.to_json());
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &args.out {
        Some(path) => {
            write(path, &text)?;
            say!(out, "labeled_equal {same}")?;
        }
        None => emit(out, format_args!("{text}# labeled_equal {same}\n"))?,
    }
    Ok(if same { Status::Passed } else { Status::Failed })
}

/// Small model used when no config is given: two layers, 2-dimensional stalks, general maps.
pub fn default_gradcheck_config(seed: u64) -> ModelConfig {
    ModelConfig {
        stalk_dim: 2,
        channels: 2,
        layers: 2,
        activation: Activation::Tanh,
        sheaf_form: SheafForm::General,
        pair_width: 3,
        hidden_width: 4,
        seed,
        ..ModelConfig::default()
    }
}

pub fn gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let (data, model) = match &args.config {
        Some(path) => {
            let config = TrainConfig::load(path)?;
            (config.dataset()?, config.model)
        }
        None => (two_block_dataset(12, args.seed), default_gradcheck_config(args.seed)),
    };
    let params = ModelParams::random(&model, data.raw_dim(), data.num_classes, 0.5, args.seed)?;
    let mask = split_nodes(&data.labels, args.seed)?.train;
    let checks = gradient_check(&params, &model, &data, &mask, args.step)?;
    let mut status = Status::Passed;
    for c in &checks {
        let ok = c.rel_error <= args.tol;
        if !ok {
            status = Status::Failed;
        }
        say!(out, "{} {} rel_error {:.3e} norm {:.3e}", if ok { "PASS" } else { "FAIL" }, c.name, c.rel_error, c.analytic_norm)?;
    }
    let worst = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    say!(out, "max_rel_error {worst:.3e}")?;
    Ok(status)
}
