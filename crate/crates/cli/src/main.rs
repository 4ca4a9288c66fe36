//! `chnnet` command-line interface.
//!
//! Exit codes: 0 success, 1 check failed, 2 usage or input error,
//! 3 numeric failure (non-finite loss).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chnnet::data::Split;
use chnnet::gradcheck::{probe_batch, DEFAULT_EPS, DEFAULT_TOL};
use chnnet::network::param_count;
use chnnet::{
    check_network, compare, train, ArchSpec, CheckOptions, Dataset, DatasetName, GradMode,
    InitScheme, LayerKind, Net, OptimizerConfig, Preset, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "chnnet",
    version,
    about = "Train and compare dense and CHN networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its per-epoch CSV.
    Train(TrainArgs),
    /// Train FNN and CHNNet over several seeds and compare them.
    Compare(CompareArgs),
    /// Check analytic gradients of a random network against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the trainable parameter count of an architecture.
    Params(ParamsArgs),
    /// Print sample counts and label histograms of a dataset.
    InspectData(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Fnn,
    #[value(alias = "chnnet")]
    Chn,
}

impl From<Model> for LayerKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Fnn => LayerKind::Dense,
            Model::Chn => LayerKind::Chn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Paper,
    Exact,
}

impl From<Mode> for GradMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => GradMode::Paper,
            Mode::Exact => GradMode::Exact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Glorot,
    W2Zero,
}

impl From<Init> for InitScheme {
    fn from(i: Init) -> Self {
        match i {
            Init::Glorot => InitScheme::Glorot,
            Init::W2Zero => InitScheme::W2Zero,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding `<dataset>/<idx file>` (optionally `.gz`).
    #[arg(long, env = "CHNNET_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset, e.g. `mnist-arch-1`.
    #[arg(long)]
    preset: Option<String>,
    /// Which side of the preset to train.
    #[arg(long, value_enum, default_value = "chn")]
    model: Model,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Train on a seeded subset of this many samples.
    #[arg(long)]
    subset: Option<usize>,
    /// Evaluate on a seeded subset of the test split.
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long, value_enum)]
    grad_mode: Option<Mode>,
}

#[derive(Args)]
struct CompareArgs {
    /// Bundled preset supplying dataset, both architectures and optimizer.
    #[arg(long, required_unless_present_all = ["dataset", "fnn_arch", "chn_arch"])]
    preset: Option<String>,
    #[arg(long, conflicts_with = "preset")]
    dataset: Option<DatasetName>,
    /// FNN hidden and output widths, e.g. `96-96-10`.
    #[arg(long, conflicts_with = "preset")]
    fnn_arch: Option<String>,
    #[arg(long, conflicts_with = "preset")]
    chn_arch: Option<String>,
    #[arg(long, value_parser = ["sgd", "rmsprop"], default_value = "rmsprop", conflicts_with = "preset")]
    optimizer: String,
    #[arg(long, default_value_t = 1e-4, conflicts_with = "preset")]
    lr: f64,
    #[arg(long, default_value_t = 512, conflicts_with = "preset")]
    batch_size: usize,
    /// Number of paired seeds, run as 1..=n.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = chnnet::experiment::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long, value_enum, default_value = "paper")]
    grad_mode: Mode,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Hidden and output widths.
    #[arg(long, default_value = "6-5-3")]
    arch: String,
    #[arg(long, default_value_t = 5)]
    input: usize,
    #[arg(long, value_enum, default_value = "chn")]
    kind: Model,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "glorot")]
    init: Init,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Check a seeded sample when a matrix has more coordinates than this.
    #[arg(long, default_value_t = 2000)]
    max_coords: usize,
}

#[derive(Args)]
struct ParamsArgs {
    /// Hidden and output widths, e.g. `96-96-96-96-10`.
    arch: String,
    #[arg(long, value_enum)]
    kind: Model,
    #[arg(long, default_value_t = 784)]
    input: usize,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    dataset: DatasetName,
    #[command(flatten)]
    data: DataArgs,
}

/// Failure carrying its exit code.
struct Failure(u8, anyhow::Error);

type Outcome = std::result::Result<u8, Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    let e = e.into();
    let code = match e.downcast_ref::<chnnet::Error>() {
        Some(chnnet::Error::NonFinite(_)) => 3,
        _ => 2,
    };
    Failure(code, e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Params(a) => cmd_params(a),
        Command::InspectData(a) => cmd_inspect(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(code)
        }
    }
}

/// Joins the cause chain, skipping causes already quoted by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn load_split(
    dataset: DatasetName,
    dir: &Path,
    split: Split,
    subset: Option<(usize, u64)>,
) -> std::result::Result<Dataset<f64>, Failure> {
    dataset.load(dir, split, subset).map_err(input)
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => RunConfig::load(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(input)?,
        (None, Some(name)) => {
            let p = Preset::get(name).map_err(input)?;
            RunConfig::from_preset(p, a.model.into(), 1)
        }
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if a.subset.is_some() {
        cfg.train_subset = a.subset;
    }
    if a.test_subset.is_some() {
        cfg.test_subset = a.test_subset;
    }
    if let Some(m) = a.grad_mode {
        cfg.grad_mode = m.into();
    }
    cfg.validate().map_err(input)?;

    let dir = &a.data.data_dir;
    let tr = load_split(
        cfg.dataset,
        dir,
        Split::Train,
        cfg.train_subset.map(|n| (n, cfg.subset_seed)),
    )?;
    let te = load_split(
        cfg.dataset,
        dir,
        Split::Test,
        cfg.test_subset.map(|n| (n, cfg.subset_seed)),
    )?;
    let (report, _) = train(&cfg, &tr, &te).map_err(input)?;
    let path = report.write_csv(&a.out_dir).map_err(input)?;
    let last = report.last();
    println!(
        "{} epoch {} train_loss {:.6} test_loss {:.6} test_accuracy {:.2}% params {} -> {}",
        cfg.run_name(),
        last.epoch,
        last.train_loss,
        last.test_loss,
        last.test_accuracy,
        report.param_count,
        path.display()
    );
    Ok(0)
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    if a.seeds < 2 {
        return Err(Failure(
            2,
            anyhow!(
                "--seeds {}: the t-test needs at least 2 seeds per model",
                a.seeds
            ),
        ));
    }
    let base = |kind: LayerKind, seed: u64| -> anyhow::Result<RunConfig> {
        let mut cfg = if let Some(name) = &a.preset {
            RunConfig::from_preset(Preset::get(name)?, kind, seed)
        } else {
            let dataset = a
                .dataset
                .context("--dataset is required without --preset")?;
            let arch = match kind {
                LayerKind::Dense => a.fnn_arch.as_deref(),
                LayerKind::Chn => a.chn_arch.as_deref(),
            }
            .context("both --fnn-arch and --chn-arch are required without --preset")?;
            let optimizer = match a.optimizer.as_str() {
                "sgd" => OptimizerConfig::sgd(a.lr),
                _ => OptimizerConfig::rmsprop(a.lr),
            };
            RunConfig {
                dataset,
                arch: ArchSpec::parse(arch, dataset.input_width(), kind)?,
                optimizer,
                batch_size: a.batch_size,
                epochs: a.epochs,
                seed,
                grad_mode: GradMode::Paper,
                init_scheme: InitScheme::Glorot,
                freeze_w2: false,
                train_subset: None,
                test_subset: None,
                subset_seed: 0,
                arch_tag: None,
            }
        };
        cfg.epochs = a.epochs;
        cfg.grad_mode = a.grad_mode.into();
        cfg.train_subset = a.subset;
        cfg.test_subset = a.test_subset;
        cfg.validate()?;
        Ok(cfg)
    };
    let mut fnn = Vec::new();
    let mut chn = Vec::new();
    for seed in 1..=a.seeds {
        fnn.push(base(LayerKind::Dense, seed).map_err(input)?);
        chn.push(base(LayerKind::Chn, seed).map_err(input)?);
    }
    let c0 = &fnn[0];
    let dir = &a.data.data_dir;
    let tr = load_split(
        c0.dataset,
        dir,
        Split::Train,
        c0.train_subset.map(|n| (n, c0.subset_seed)),
    )?;
    let te = load_split(
        c0.dataset,
        dir,
        Split::Test,
        c0.test_subset.map(|n| (n, c0.subset_seed)),
    )?;
    let out = compare(&fnn, &chn, &tr, &te).map_err(input)?;
    for r in out.fnn_runs.iter().chain(&out.chn_runs) {
        r.write_csv(&a.out_dir).map_err(input)?;
    }
    let (json, csv) = out.comparison.write(&a.out_dir).map_err(input)?;
    let c = &out.comparison;
    for m in [&c.fnn, &c.chn] {
        println!(
            "{:<7} params {:>10}  loss {:.4} ± {:.4}  accuracy {:.2} ± {:.2}",
            m.model, m.params, m.mean_loss, m.std_loss, m.mean_accuracy, m.std_accuracy
        );
    }
    println!(
        "t {:.4}  df {:.2}  p {:.4}",
        c.accuracy_ttest.t_statistic, c.accuracy_ttest.degrees_of_freedom, c.accuracy_ttest.p_value
    );
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(0)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Outcome {
    let arch = ArchSpec::parse(&a.arch, a.input, a.kind.into()).map_err(input)?;
    if a.eps.is_nan() || a.eps <= 0.0 || a.tol.is_nan() || a.tol <= 0.0 || a.batch == 0 {
        return Err(input(anyhow!(
            "--eps and --tol must be positive and --batch nonzero"
        )));
    }
    let net = Net::build(&arch, a.init.into(), a.seed).map_err(input)?;
    let mut rng = chnnet::seed::stream(a.seed, chnnet::seed::Purpose::Probe, 0);
    let (x, y) = probe_batch(&net, a.batch, &mut rng).map_err(input)?;
    let opts = CheckOptions {
        eps: a.eps,
        tol: a.tol,
        max_coords: a.max_coords,
        sample_seed: a.seed,
    };
    let report = check_network(&net, &x, &y, a.mode.into(), &opts).map_err(input)?;
    println!("{report}");
    if report.passed() {
        Ok(0)
    } else {
        eprintln!("failing: {}", report.failing().join(", "));
        Ok(1)
    }
}

fn cmd_params(a: ParamsArgs) -> Outcome {
    let arch = ArchSpec::parse(&a.arch, a.input, a.kind.into()).map_err(input)?;
    println!("{}", param_count(&arch));
    Ok(0)
}

fn cmd_inspect(a: InspectArgs) -> Outcome {
    let dir = &a.data.data_dir;
    for split in [Split::Train, Split::Test] {
        let (images, labels) = a.dataset.load_raw(dir, split).map_err(input)?;
        if images.count != labels.len() {
            return Err(input(anyhow!(
                "{split:?}: {} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        let mut hist = vec![0usize; a.dataset.num_classes()];
        for &y in labels.as_slice() {
            hist[y] += 1;
        }
        println!(
            "{} {:?}: {} samples of {}x{}",
            a.dataset, split, images.count, images.rows, images.cols
        );
        println!("  labels: {hist:?}");
    }
    Ok(0)
}
