use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msmda::data::{
    generate_synthetic, write_dataset_dir, NormKind, NormOrder, Scenario, SynthConfig,
};
use msmda::harness::{
    dump_features, load_domains, prepare_tasks, run_experiment, verify, AblationMode, DataSource,
    ExperimentConfig, ExperimentOutcome, Method, Suite, VerifyOptions, DEFAULT_DUMP_ROWS,
};
use msmda::model::MsMdaModel;
use msmda::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "msmda",
    version,
    about = "Multi-source marginal distribution adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the multi-branch model on every fold and seed.
    Train(RunArgs),
    /// Train the single-branch baseline on concatenated sources.
    Baseline(RunArgs),
    /// Train with the loss terms selected by --ablate switched off.
    Ablate(RunArgs),
    /// Write a synthetic multi-domain dataset directory.
    GenSynth(GenSynthArgs),
    /// Write per-branch domain-specific features from a checkpoint.
    DumpFeatures(DumpArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    CrossSubject,
    CrossSession,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    None,
    Electrode,
    Sample,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblateArg {
    Mmd,
    Disc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Grad,
    #[value(alias = "mmd_oracle")]
    MmdOracle,
    Norm,
    Schedule,
    All,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset directory with session<k>/subject<j>.csv files.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic generator settings: a JSON file or an inline JSON object.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    /// Use every domain on the transfer axis as target in turn.
    #[arg(long)]
    loso: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Base experiment config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Discrepancy loss weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Fraction of training after which the discrepancy loss switches on.
    #[arg(long)]
    disc_start: Option<f64>,
    #[arg(long, value_enum)]
    ablate: Option<AblateArg>,
    /// Comma-separated seeds, or a half-open range such as 0..10.
    #[arg(long)]
    seeds: Option<String>,
    /// Iterations per epoch (default: one pass over the largest source).
    #[arg(long)]
    iterations: Option<usize>,
    /// Common extractor widths, comma-separated.
    #[arg(long)]
    cfe_dims: Option<String>,
    #[arg(long)]
    dsfe_dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_checkpoints: bool,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Fold to sample from (default: the first fold).
    #[arg(long)]
    fold: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DUMP_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    /// Offset added to every analytic gradient (sensitivity fixture).
    #[arg(long, default_value_t = 0.0, hide = true)]
    grad_perturbation: f64,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Usage(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_VALIDATION
            })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train(args) => {
            let cfg = build_config(&args, Method::MsMda)?;
            report(&run_experiment(&cfg)?, &cfg);
        }
        Command::Baseline(args) => {
            let cfg = build_config(&args, Method::SourceCombine)?;
            report(&run_experiment(&cfg)?, &cfg);
        }
        Command::Ablate(args) => {
            if args.ablate.is_none() {
                return Err(Failure::Usage(
                    "ablate requires --ablate {mmd, disc, both}".into(),
                ));
            }
            let cfg = build_config(&args, Method::MsMda)?;
            report(&run_experiment(&cfg)?, &cfg);
        }
        Command::GenSynth(args) => {
            let mut synth = match &args.synth {
                Some(s) => parse_synth(s)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = args.seed {
                synth.rng_seed = seed;
            }
            let domains = generate_synthetic(&synth)?;
            write_dataset_dir(&args.out, &domains)?;
            println!("wrote {} domains to {}", domains.len(), args.out.display());
        }
        Command::DumpFeatures(args) => dump(args)?,
        Command::Verify(args) => {
            let suite = match args.suite {
                SuiteArg::Grad => Suite::Grad,
                SuiteArg::MmdOracle => Suite::MmdOracle,
                SuiteArg::Norm => Suite::Norm,
                SuiteArg::Schedule => Suite::Schedule,
                SuiteArg::All => Suite::All,
            };
            let opts = VerifyOptions {
                grad_perturbation: args.grad_perturbation,
            };
            let report = verify(suite, &opts)?;
            print!("{report}");
            if !report.passed() {
                let names: Vec<&str> = report.failures().map(|i| i.name.as_str()).collect();
                return Err(Failure::Verify(names.join(", ")));
            }
        }
    }
    Ok(())
}

fn parse_synth(arg: &str) -> CliResult<SynthConfig> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid synth config: {e}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("invalid {what} entry {p:?}")))
        })
        .collect()
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("invalid seed range {s:?}")))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("invalid seed range {s:?}")))?;
        return Ok((a..b).collect());
    }
    parse_list(s, "seed")
}

fn data_source(args: &DataArgs) -> CliResult<Option<DataSource>> {
    Ok(match (&args.data, &args.synth) {
        (Some(path), _) => Some(DataSource::Dir { path: path.clone() }),
        (None, Some(s)) => Some(DataSource::Synth(parse_synth(s)?)),
        (None, None) => None,
    })
}

fn apply_data_args(cfg: &mut ExperimentConfig, args: &DataArgs) {
    if let Some(s) = args.scenario {
        cfg.scenario = match s {
            ScenarioArg::CrossSubject => Scenario::CrossSubject,
            ScenarioArg::CrossSession => Scenario::CrossSession,
        };
    }
    if let Some(n) = args.norm {
        cfg.normalization.kind = match n {
            NormArg::None => NormKind::None,
            NormArg::Electrode => NormKind::ElectrodeWise,
            NormArg::Sample => NormKind::SampleWise,
            NormArg::Global => NormKind::GlobalWise,
        };
    }
    if let Some(o) = args.order {
        cfg.normalization.order = match o {
            OrderArg::A => NormOrder::A,
            OrderArg::B => NormOrder::B,
        };
    }
    if args.loso {
        cfg.loso = true;
    }
}

fn base_config(config: Option<&Path>, data: &DataArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => {
            let Some(source) = data_source(data)? else {
                return Err(Failure::Usage(
                    "one of --data, --synth or --config is required".into(),
                ));
            };
            ExperimentConfig::new(source, Scenario::CrossSubject)
        }
    };
    if config.is_some() {
        if let Some(source) = data_source(data)? {
            cfg.data = source;
        }
    }
    apply_data_args(&mut cfg, data);
    Ok(cfg)
}

fn build_config(args: &RunArgs, method: Method) -> CliResult<ExperimentConfig> {
    let mut cfg = base_config(args.config.as_deref(), &args.data)?;
    cfg.method = method;
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.lr {
        t.lr = v;
    }
    if let Some(v) = args.beta {
        t.beta_weight = v;
    }
    if let Some(v) = args.disc_start {
        t.disc_start_fraction = v;
    }
    if let Some(v) = args.iterations {
        t.iterations_per_epoch = Some(v);
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(s) = &args.cfe_dims {
        cfg.model.cfe_dims = parse_list(s, "cfe width")?;
    }
    if let Some(v) = args.dsfe_dim {
        cfg.model.dsfe_dim = v;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if args.no_checkpoints {
        cfg.save_checkpoints = false;
    }
    if let Some(a) = args.ablate {
        cfg = cfg.with_ablation(match a {
            AblateArg::Mmd => AblationMode::NoMmd,
            AblateArg::Disc => AblationMode::NoDisc,
            AblateArg::Both => AblationMode::NoBoth,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(outcome: &ExperimentOutcome, cfg: &ExperimentConfig) {
    let s = &outcome.summary;
    for seed in &s.seeds {
        println!(
            "seed {}: {:.2}% +/- {:.2} over {} folds (best-epoch mean {:.2}%)",
            seed.seed,
            100.0 * seed.mean,
            100.0 * seed.std,
            seed.folds,
            100.0 * seed.best_mean
        );
    }
    println!(
        "{} {}{}: {:.2}% +/- {:.2} (std over seeds {:.2})",
        s.meta.method,
        s.meta.scenario,
        s.meta
            .ablation
            .map(|a| format!(" [{a}]"))
            .unwrap_or_default(),
        100.0 * s.mean,
        100.0 * s.fold_std,
        100.0 * s.seed_std
    );
    if !s.diverged_folds.is_empty() {
        println!("diverged: {}", s.diverged_folds.join(", "));
    }
    if let Some(dir) = &cfg.output_dir {
        println!("outputs in {}", dir.display());
    }
}

fn dump(args: DumpArgs) -> CliResult<()> {
    let model = MsMdaModel::load(&args.checkpoint)?;
    let mut cfg = base_config(None, &args.data)?;
    cfg.method = if model.num_branches() == 1 {
        Method::SourceCombine
    } else {
        Method::MsMda
    };
    let domains = load_domains(&cfg.data)?;
    let tasks = prepare_tasks(&cfg, &domains)?;
    let task = match &args.fold {
        Some(id) => tasks
            .iter()
            .find(|t| &t.fold_id == id)
            .ok_or_else(|| Failure::Usage(format!("no fold {id:?}")))?,
        None => tasks
            .first()
            .ok_or_else(|| Failure::Usage("no folds".into()))?,
    };
    if task.num_sources() != model.num_branches() {
        return Err(Failure::Usage(format!(
            "checkpoint has {} branches but fold {} has {} sources",
            model.num_branches(),
            task.fold_id,
            task.num_sources()
        )));
    }
    let mut selected = task.sources.clone();
    selected.push(task.target.clone());
    let paths = dump_features(&model, &selected, args.rows, args.seed, &args.out)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
