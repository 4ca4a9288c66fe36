//! Training runs, evaluation and FNN-vs-CHN comparisons.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BatchPlan, Dataset, DatasetName};
use crate::error::{Error, Result};
use crate::layers::{GradMode, InitScheme, LayerKind};
use crate::matrix::Matrix;
use crate::network::{ArchSpec, Network};
use crate::optim::{OptState, OptimizerConfig};
use crate::presets::Preset;
use crate::scalar::Scalar;
use crate::stats::{mean_std, welch_t, SampleSet, TTestResult};

pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
const EVAL_CHUNK: usize = 2048;

/// Everything that determines one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetName,
    pub arch: ArchSpec,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grad_mode: GradMode,
    #[serde(default)]
    pub init_scheme: InitScheme,
    /// Skip optimizer updates of every CHN `W2`.
    #[serde(default)]
    pub freeze_w2: bool,
    /// Train on a seeded subset of this many samples.
    #[serde(default)]
    pub train_subset: Option<usize>,
    #[serde(default)]
    pub test_subset: Option<usize>,
    /// Seed for subset selection; independent of `seed` so all runs of a
    /// comparison see the same samples.
    #[serde(default)]
    pub subset_seed: u64,
    /// Architecture tag for file names; defaults to the width label.
    #[serde(default)]
    pub arch_tag: Option<String>,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_seed() -> u64 {
    DEFAULT_SEEDS[0]
}

impl RunConfig {
    pub fn from_preset(preset: &Preset, kind: LayerKind, seed: u64) -> Self {
        RunConfig {
            dataset: preset.dataset,
            arch: preset.arch(kind),
            optimizer: preset.optimizer,
            batch_size: preset.batch_size,
            epochs: DEFAULT_EPOCHS,
            seed,
            grad_mode: GradMode::Paper,
            init_scheme: InitScheme::Glorot,
            freeze_w2: false,
            train_subset: None,
            test_subset: None,
            subset_seed: 0,
            arch_tag: Some(preset.arch_tag.to_string()),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn model_name(&self) -> &'static str {
        model_name(self.arch.layer_kind)
    }

    pub fn arch_tag(&self) -> String {
        self.arch_tag.clone().unwrap_or_else(|| self.arch.label())
    }

    /// `{dataset}_{arch}_{model}_{seed}`.
    pub fn run_name(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.dataset,
            self.arch_tag(),
            self.model_name(),
            self.seed
        )
    }
}

pub fn model_name(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Dense => "fnn",
        LayerKind::Chn => "chnnet",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub epochs: Vec<EpochRecord>,
    pub param_count: u64,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn last(&self) -> &EpochRecord {
        self.epochs.last().expect("report has at least one epoch")
    }

    /// Per-epoch CSV: `epoch,train_loss,test_loss,test_accuracy`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.epochs {
            w.serialize(e)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `{run_name}.csv` into `dir` and returns its path.
    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.csv", self.config.run_name()));
        fs::write(&path, self.to_csv()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Mean cross-entropy and percent accuracy over the whole dataset.
pub fn evaluate<T: Scalar>(net: &Network<T>, ds: &Dataset<T>) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let floor = T::lit(crate::activation::PROB_FLOOR);
    let mut loss = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let x = ds.features.select_columns(chunk);
        let probs = net.predict(&x)?;
        for (col, &sample) in chunk.iter().enumerate() {
            let y = ds.labels.as_slice()[sample];
            loss -= probs.get(y, col).max(floor).ln().to_f64_lossy();
            if argmax_column(&probs, col) == y {
                correct += 1;
            }
        }
    }
    let n = ds.len() as f64;
    Ok((loss / n, 100.0 * correct as f64 / n))
}

fn argmax_column<T: Scalar>(m: &Matrix<T>, col: usize) -> usize {
    let mut best = 0;
    for i in 1..m.rows() {
        if m.get(i, col) > m.get(best, col) {
            best = i;
        }
    }
    best
}

/// Trains one network and evaluates it on `test` after every epoch.
pub fn train<T: Scalar>(
    cfg: &RunConfig,
    train: &Dataset<T>,
    test: &Dataset<T>,
) -> Result<(RunReport, Network<T>)> {
    cfg.validate()?;
    for (name, ds) in [("train", train), ("test", test)] {
        if ds.feature_width() != cfg.arch.input_width || ds.num_classes != cfg.arch.output_width {
            return Err(Error::InvalidArgument(format!(
                "{name} set has {} features / {} classes but architecture {} expects {} / {}",
                ds.feature_width(),
                ds.num_classes,
                cfg.arch,
                cfg.arch.input_width,
                cfg.arch.output_width
            )));
        }
        if ds.is_empty() {
            return Err(Error::InvalidArgument(format!("{name} set is empty")));
        }
    }
    let started = Instant::now();
    let mut net = Network::build(&cfg.arch, cfg.init_scheme, cfg.seed)?;
    let shapes: Vec<_> = net.params().iter().map(|m| m.shape()).collect();
    let mut opt = OptState::new(&cfg.optimizer, &shapes);
    let frozen = if cfg.freeze_w2 {
        net.w2_slots()
    } else {
        Vec::new()
    };
    let plan = BatchPlan::new(cfg.batch_size, cfg.seed);

    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches = plan.indices(train.len(), epoch as u64);
        let mut loss_sum = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let x = train.features.select_columns(idx);
            let y = train.labels.select(idx);
            let (loss, grads) = net.loss_and_grads(&x, &y, cfg.grad_mode)?;
            let loss = loss.to_f64_lossy();
            // The probability floor keeps the loss finite even when the
            // parameters are not, so the gradients are checked too.
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "training diverged at epoch {} batch {b} (loss {loss})",
                    epoch + 1
                )));
            }
            loss_sum += loss;
            for (slot, (param, grad)) in net.params_mut().into_iter().zip(&grads).enumerate() {
                if !frozen.contains(&slot) {
                    opt.step(slot, param, grad)?;
                }
            }
        }
        let (test_loss, test_accuracy) = evaluate(&net, test)?;
        if !test_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "test loss {test_loss} after epoch {}",
                epoch + 1
            )));
        }
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / batches.len() as f64,
            test_loss,
            test_accuracy,
        });
    }
    let report = RunReport {
        config: cfg.clone(),
        epochs,
        param_count: net.param_count(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((report, net))
}

/// Seed-aggregated results for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub arch: String,
    pub params: u64,
    pub seeds: Vec<u64>,
    pub final_test_loss: Vec<f64>,
    pub final_test_accuracy: Vec<f64>,
    pub mean_loss: f64,
    pub std_loss: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Seed-mean of each epoch's train loss.
    pub mean_train_loss_by_epoch: Vec<f64>,
    pub mean_test_loss_by_epoch: Vec<f64>,
}

impl ModelSummary {
    fn from_reports(reports: &[RunReport], ddof: usize) -> Result<Self> {
        let first = &reports[0];
        let losses: Vec<f64> = reports.iter().map(|r| r.last().test_loss).collect();
        let accs: Vec<f64> = reports.iter().map(|r| r.last().test_accuracy).collect();
        let (mean_loss, std_loss) = mean_std(&SampleSet::with_ddof(losses.clone(), ddof))?;
        let (mean_accuracy, std_accuracy) = mean_std(&SampleSet::with_ddof(accs.clone(), ddof))?;
        let n_epochs = reports.iter().map(|r| r.epochs.len()).min().unwrap_or(0);
        let curve = |f: fn(&EpochRecord) -> f64| -> Vec<f64> {
            (0..n_epochs)
                .map(|e| {
                    reports.iter().map(|r| f(&r.epochs[e])).sum::<f64>() / reports.len() as f64
                })
                .collect()
        };
        Ok(ModelSummary {
            model: first.config.model_name().to_string(),
            arch: first.config.arch.to_string(),
            params: first.param_count,
            seeds: reports.iter().map(|r| r.config.seed).collect(),
            final_test_loss: losses,
            final_test_accuracy: accs,
            mean_loss,
            std_loss,
            mean_accuracy,
            std_accuracy,
            mean_train_loss_by_epoch: curve(|e| e.train_loss),
            mean_test_loss_by_epoch: curve(|e| e.test_loss),
        })
    }
}

/// FNN vs CHNNet summary for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: DatasetName,
    pub arch_tag: String,
    pub fnn: ModelSummary,
    pub chn: ModelSummary,
    /// Welch test on final test accuracies, `t = (FNN − CHNNet) / se`;
    /// negative when CHNNet is more accurate.
    pub accuracy_ttest: TTestResult,
    pub std_ddof: usize,
    pub assumptions: Vec<String>,
}

impl Comparison {
    /// One row per model.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset",
            "arch",
            "model",
            "params",
            "mean_loss",
            "std_loss",
            "mean_accuracy",
            "std_accuracy",
            "t_statistic",
            "p_value",
            "df",
        ])?;
        for m in [&self.fnn, &self.chn] {
            w.write_record([
                self.dataset.to_string(),
                self.arch_tag.clone(),
                m.model.clone(),
                m.params.to_string(),
                m.mean_loss.to_string(),
                m.std_loss.to_string(),
                m.mean_accuracy.to_string(),
                m.std_accuracy.to_string(),
                self.accuracy_ttest.t_statistic.to_string(),
                self.accuracy_ttest.p_value.to_string(),
                self.accuracy_ttest.degrees_of_freedom.to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `{dataset}_{arch}_comparison.{json,csv}`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = format!("{}_{}_comparison", self.dataset, self.arch_tag);
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        fs::write(&csv, self.to_csv()?).map_err(|e| Error::io(&csv, e))?;
        Ok((json, csv))
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonOutput {
    pub comparison: Comparison,
    pub fnn_runs: Vec<RunReport>,
    pub chn_runs: Vec<RunReport>,
}

/// Runs every config (in parallel across runs) and summarises the two sides.
/// Seed `i` of one side is paired with seed `i` of the other.
pub fn compare<T: Scalar>(
    fnn: &[RunConfig],
    chn: &[RunConfig],
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
) -> Result<ComparisonOutput> {
    if fnn.len() != chn.len() {
        return Err(Error::InvalidArgument(format!(
            "{} FNN runs but {} CHNNet runs; seed counts must match",
            fnn.len(),
            chn.len()
        )));
    }
    if fnn.len() < 2 {
        return Err(Error::Stats(format!(
            "a t-test needs at least 2 seeds per model, got {}",
            fnn.len()
        )));
    }
    let all: Vec<&RunConfig> = fnn.iter().chain(chn).collect();
    let mut reports: Vec<RunReport> = all
        .par_iter()
        .map(|cfg| train(cfg, train_set, test_set).map(|(r, _)| r))
        .collect::<Result<_>>()?;
    let chn_runs = reports.split_off(fnn.len());
    let fnn_runs = reports;
    summarise(fnn_runs, chn_runs)
}

/// Builds the comparison from finished runs.
pub fn summarise(fnn_runs: Vec<RunReport>, chn_runs: Vec<RunReport>) -> Result<ComparisonOutput> {
    if fnn_runs.len() != chn_runs.len() || fnn_runs.is_empty() {
        return Err(Error::InvalidArgument(
            "need equal, nonzero run counts".into(),
        ));
    }
    let ddof = 1;
    let fnn = ModelSummary::from_reports(&fnn_runs, ddof)?;
    let chn = ModelSummary::from_reports(&chn_runs, ddof)?;
    let accuracy_ttest = welch_t(
        &SampleSet::new(fnn.final_test_accuracy.clone()),
        &SampleSet::new(chn.final_test_accuracy.clone()),
    )?;
    let cfg = &fnn_runs[0].config;
    let comparison = Comparison {
        dataset: cfg.dataset,
        arch_tag: cfg.arch_tag(),
        fnn,
        chn,
        accuracy_ttest,
        std_ddof: ddof,
        assumptions: vec![
            "mean loss is the final-epoch test loss averaged over seeds".into(),
            "t-test is Welch's unequal-variance test with Welch-Satterthwaite df, two-sided".into(),
            format!("standard deviations use ddof = {ddof}"),
            format!("{} epochs per run", cfg.epochs),
        ],
    };
    Ok(ComparisonOutput {
        comparison,
        fnn_runs,
        chn_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Labels;
    use crate::layers::Layer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, classes: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let features = Matrix::from_fn(6, n, |i, j| {
            let signal = if i % classes == labels[j] { 0.8 } else { 0.1 };
            (signal + rng.gen_range(0.0..0.2f64)).min(1.0)
        });
        Dataset::new(features, Labels::new(labels), classes).unwrap()
    }

    fn config(kind: LayerKind, seed: u64) -> RunConfig {
        RunConfig {
            dataset: DatasetName::Mnist,
            arch: ArchSpec::parse("8-8-3", 6, kind).unwrap(),
            optimizer: OptimizerConfig::rmsprop(1e-2),
            batch_size: 16,
            epochs: 4,
            seed,
            grad_mode: GradMode::Paper,
            init_scheme: InitScheme::Glorot,
            freeze_w2: false,
            train_subset: None,
            test_subset: None,
            subset_seed: 0,
            arch_tag: None,
        }
    }

    #[test]
    fn json_config_defaults() {
        let cfg = RunConfig::from_json(
            r#"{
                "dataset": "mnist",
                "arch": {"input_width": 784, "hidden_widths": [96, 96], "output_width": 10, "layer_kind": "chn"},
                "optimizer": {"kind": "rmsprop", "learning_rate": 0.0001},
                "batch_size": 512
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.epochs, DEFAULT_EPOCHS);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.grad_mode, GradMode::Paper);
        assert_eq!(cfg.run_name(), "mnist_96-96-10_chnnet_1");
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = config(LayerKind::Dense, 1);
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = config(LayerKind::Dense, 1);
        cfg.optimizer = OptimizerConfig::sgd(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn preset_names_files() {
        let p = Preset::get("mnist-arch-1").unwrap();
        let cfg = RunConfig::from_preset(p, LayerKind::Chn, 2);
        assert_eq!(cfg.run_name(), "mnist_arch-1_chnnet_2");
        assert_eq!(cfg.arch.param_count(), 141_130);
    }

    #[test]
    fn training_is_deterministic() {
        let (tr, te) = (synthetic(64, 3, 1), synthetic(32, 3, 2));
        let cfg = config(LayerKind::Chn, 5);
        let (a, na) = train(&cfg, &tr, &te).unwrap();
        let (b, nb) = train(&cfg, &tr, &te).unwrap();
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(na, nb);
        assert_eq!(a.epochs.len(), cfg.epochs);
        assert_eq!(a.param_count, cfg.arch.param_count());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        for e in &a.epochs {
            assert!(e.train_loss >= 0.0 && e.test_loss >= 0.0);
            assert!((0.0..=100.0).contains(&e.test_accuracy));
        }
    }

    #[test]
    fn memorises_single_sample() {
        let ds = synthetic(1, 3, 9);
        let mut cfg = config(LayerKind::Chn, 1);
        cfg.optimizer = OptimizerConfig::sgd(0.01);
        cfg.epochs = 3000;
        cfg.batch_size = 1;
        let (r, net) = train(&cfg, &ds, &ds).unwrap();
        assert!(r.last().train_loss < 0.01, "{}", r.last().train_loss);
        for w in r.epochs.windows(2) {
            assert!(w[1].train_loss < w[0].train_loss);
        }
        assert_eq!(evaluate(&net, &ds).unwrap().1, 100.0);
    }

    #[test]
    fn frozen_zero_w2_tracks_dense_run() {
        let (tr, te) = (synthetic(80, 3, 3), synthetic(40, 3, 4));
        let dense = config(LayerKind::Dense, 7);
        let chn = RunConfig {
            arch: dense.arch.with_kind(LayerKind::Chn),
            init_scheme: InitScheme::W2Zero,
            freeze_w2: true,
            ..dense.clone()
        };
        let (rd, nd) = train(&dense, &tr, &te).unwrap();
        for mode in [GradMode::Paper, GradMode::Exact] {
            let (rc, nc) = train(
                &RunConfig {
                    grad_mode: mode,
                    ..chn.clone()
                },
                &tr,
                &te,
            )
            .unwrap();
            for (a, b) in rd.epochs.iter().zip(&rc.epochs) {
                assert!((a.train_loss - b.train_loss).abs() <= 1e-12);
                assert!((a.test_loss - b.test_loss).abs() <= 1e-12);
            }
            let Layer::Chn(p) = &nc.hidden[0] else {
                panic!()
            };
            assert_eq!(p.w2, Matrix::zeros(8, 8));
            assert_eq!(nd.output, nc.output);
        }
    }

    #[test]
    fn evaluate_at_chance_when_untrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 2000;
        let labels: Vec<usize> = (0..n).map(|j| j % 10).collect();
        let ds = Dataset::new(
            Matrix::from_fn(20, n, |_, _| rng.gen_range(0.0..1.0)),
            Labels::new(labels),
            10,
        )
        .unwrap();
        let arch = ArchSpec::parse("16-10", 20, LayerKind::Chn).unwrap();
        let net = Network::<f64>::build(&arch, InitScheme::Glorot, 1).unwrap();
        let (loss, acc) = evaluate(&net, &ds).unwrap();
        assert!((acc - 10.0).abs() <= 5.0, "{acc}");
        assert!((loss - 10f64.ln()).abs() <= 0.5, "{loss}");
    }

    #[test]
    fn accuracy_invariant_under_output_relabelling() {
        let ds = synthetic(50, 3, 12);
        let (_, net) = train(&config(LayerKind::Chn, 3), &ds, &ds).unwrap();
        let perm = [2usize, 0, 1];
        let mut permuted = net.clone();
        for (old, &new) in perm.iter().enumerate() {
            for j in 0..net.output.w.cols() {
                permuted.output.w.set(new, j, net.output.w.get(old, j));
            }
            permuted.output.b.set(new, 0, net.output.b.get(old, 0));
        }
        let relabelled = Dataset::new(
            ds.features.clone(),
            Labels::new(ds.labels.as_slice().iter().map(|&y| perm[y]).collect()),
            3,
        )
        .unwrap();
        let (l1, a1) = evaluate(&net, &ds).unwrap();
        let (l2, a2) = evaluate(&permuted, &relabelled).unwrap();
        assert_eq!(a1, a2);
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn train_rejects_mismatched_data() {
        let ds = synthetic(10, 3, 0);
        let mut cfg = config(LayerKind::Dense, 1);
        cfg.arch = ArchSpec::parse("8-4", 6, LayerKind::Dense).unwrap();
        assert!(train(&cfg, &ds, &ds).is_err());
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let ds = synthetic(32, 3, 0);
        let mut cfg = config(LayerKind::Chn, 1);
        cfg.optimizer = OptimizerConfig::sgd(1e6);
        let err = train(&cfg, &ds, &ds).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)), "{err}");
        assert!(err.to_string().contains("epoch"));
    }

    #[test]
    fn compare_identical_sides_gives_zero_t() {
        let (tr, te) = (synthetic(48, 3, 1), synthetic(24, 3, 2));
        let cfgs: Vec<RunConfig> = [1, 2, 3]
            .iter()
            .map(|&s| config(LayerKind::Dense, s))
            .collect();
        let out = compare(&cfgs, &cfgs, &tr, &te).unwrap();
        assert_eq!(out.comparison.accuracy_ttest.t_statistic, 0.0);
        assert_eq!(out.comparison.accuracy_ttest.p_value, 1.0);
    }

    #[test]
    fn compare_preconditions() {
        let (tr, te) = (synthetic(16, 3, 1), synthetic(16, 3, 2));
        let one = vec![config(LayerKind::Dense, 1)];
        let two = vec![config(LayerKind::Chn, 1), config(LayerKind::Chn, 2)];
        assert!(matches!(
            compare(&one, &one, &tr, &te),
            Err(Error::Stats(_))
        ));
        assert!(compare(&one, &two, &tr, &te).is_err());
    }

    #[test]
    fn comparison_outputs() {
        let (tr, te) = (synthetic(48, 3, 1), synthetic(24, 3, 2));
        let fnn: Vec<_> = [1, 2]
            .iter()
            .map(|&s| config(LayerKind::Dense, s))
            .collect();
        let chn: Vec<_> = [1, 2].iter().map(|&s| config(LayerKind::Chn, s)).collect();
        let out = compare(&fnn, &chn, &tr, &te).unwrap();
        let c = &out.comparison;
        assert_eq!(c.fnn.params, fnn[0].arch.param_count());
        assert_eq!(c.chn.params, chn[0].arch.param_count());
        assert_eq!(c.fnn.mean_train_loss_by_epoch.len(), 4);
        let csv = c.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("dataset,arch,model,params"));
        let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert!(v["accuracy_ttest"]["p_value"].is_number());

        let dir = tempfile::tempdir().unwrap();
        let p = out.fnn_runs[0].write_csv(dir.path()).unwrap();
        assert!(p.ends_with("mnist_8-8-3_fnn_1.csv"));
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "epoch,train_loss,test_loss,test_accuracy"
        );
        assert_eq!(text.lines().count(), 5);
    }
}
