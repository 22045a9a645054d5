use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratsim::cli::{self, DataOptions, Figure, Settings};
use stratsim::engine::grid;
use stratsim::synth::{self, SynthConfig};
use stratsim::{Result, SimError};

/// Longitudinal simulator for recommendation strategies: consumer trust,
/// consumption probability, and provider profit over time.
#[derive(Parser)]
#[command(name = "stratsim", version, about)]
struct Cli {
    /// Worker threads for grid cells and replications (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration.
    Run(RunArgs),
    /// Run the Cartesian product of strategies x deltas x psis.
    Grid(RunArgs),
    /// Run a named figure preset (fig3, fig4, fig5, fig6, appendix).
    Reproduce(ReproduceArgs),
    /// Re-derive aggregate.csv from raw.csv in an output directory and diff.
    Verify {
        /// Directory holding raw.csv and aggregate.csv.
        out_dir: PathBuf,
    },
    /// Generate a MovieLens-shaped stand-in ratings file.
    SynthData(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// MovieLens-format ratings CSV (userId,movieId,rating,timestamp).
    #[arg(long)]
    dataset: PathBuf,

    /// Output directory for raw.csv, aggregate.csv, and figure data files.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Configuration file (key = value lines); flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Base seed; replication r uses base_seed + r.
    #[arg(long)]
    seed: Option<u64>,

    /// Import a pinned profit map (CSV `item_id,profit`, external ids).
    #[arg(long)]
    profits_in: Option<PathBuf>,

    /// Export the profit map in use.
    #[arg(long)]
    profits_out: Option<PathBuf>,

    /// Quick mode: subsample consumers and cap steps. NOT a reproduction.
    #[arg(long)]
    quick: bool,

    /// Consumer cap in quick mode.
    #[arg(long, default_value_t = 80)]
    quick_consumers: usize,

    /// Step cap in quick mode.
    #[arg(long, default_value_t = 120)]
    quick_steps: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Strategy for `run` (ignored by `grid`, which uses `strategies`).
    #[arg(long)]
    strategy: Option<String>,

    #[arg(long)]
    delta: Option<f64>,

    #[arg(long)]
    psi: Option<f64>,

    #[arg(long)]
    steps: Option<usize>,

    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Figure id: fig3, fig4, fig5, fig6, or appendix.
    figure: String,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Where to write the generated ratings CSV.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 1337)]
    seed: u64,

    #[arg(long, default_value_t = 610)]
    consumers: usize,

    #[arg(long, default_value_t = 9742)]
    items: usize,

    #[arg(long, default_value_t = 100_836)]
    ratings: usize,
}

fn resolve_settings(args: &RunArgs) -> Result<Settings> {
    let mut settings = match &args.common.config {
        Some(path) => Settings::parse_file(path)?,
        None => Settings::default(),
    };
    let mut overrides = String::new();
    for set in &args.common.sets {
        let (key, value) = set.split_once('=').ok_or_else(|| {
            SimError::validation(format!("--set expects KEY=VALUE, got `{set}`"))
        })?;
        overrides.push_str(&format!("{key} = {value}\n"));
    }
    if let Some(strategy) = &args.strategy {
        overrides.push_str(&format!("strategy = {strategy}\n"));
    }
    if let Some(delta) = args.delta {
        overrides.push_str(&format!("delta = {delta}\n"));
    }
    if let Some(psi) = args.psi {
        overrides.push_str(&format!("psi = {psi}\n"));
    }
    if let Some(steps) = args.steps {
        overrides.push_str(&format!("steps = {steps}\n"));
    }
    if let Some(replications) = args.replications {
        overrides.push_str(&format!("replications = {replications}\n"));
    }
    if let Some(seed) = args.common.seed {
        overrides.push_str(&format!("base_seed = {seed}\n"));
    }
    settings.apply_text(&overrides)?;
    Ok(settings)
}

fn data_options(common: &CommonArgs) -> DataOptions {
    DataOptions {
        dataset: common.dataset.clone(),
        profits_in: common.profits_in.clone(),
        profits_out: common.profits_out.clone(),
        quick: common
            .quick
            .then_some((common.quick_consumers, common.quick_steps)),
    }
}

fn echo_settings(settings: &Settings) {
    for line in settings.to_text().lines() {
        log::info!("config: {line}");
    }
}

fn cmd_run(args: &RunArgs, single: bool) -> Result<()> {
    let mut settings = resolve_settings(args)?;
    let opts = data_options(&args.common);
    cli::apply_quick(&mut settings, opts.quick);
    echo_settings(&settings);
    let data = cli::load_sim_data(&opts, &settings)?;
    let results = if single {
        let cfg = settings.run_config(settings.strategy);
        vec![stratsim::engine::run_experiment(&data, &cfg)?]
    } else {
        let template = settings.run_config(settings.strategy);
        let configs = grid(&settings.strategies, &settings.deltas, &settings.psis, &template)?;
        log::info!("grid: {} configurations", configs.len());
        cli::run_configs(&data, &configs)?
    };
    cli::emit_csv(&results, &args.common.out)?;
    cli::write_config_echo(&settings, &args.common.out)?;
    cli::print_headline(&results);
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    let figure: Figure = args.figure.parse()?;
    let run_args = RunArgs {
        common: CommonArgs {
            dataset: args.common.dataset.clone(),
            out: args.common.out.clone(),
            config: args.common.config.clone(),
            sets: args.common.sets.clone(),
            seed: args.common.seed,
            profits_in: args.common.profits_in.clone(),
            profits_out: args.common.profits_out.clone(),
            quick: args.common.quick,
            quick_consumers: args.common.quick_consumers,
            quick_steps: args.common.quick_steps,
        },
        strategy: None,
        delta: None,
        psi: None,
        steps: None,
        replications: None,
    };
    let mut settings = resolve_settings(&run_args)?;
    let opts = data_options(&args.common);
    cli::apply_quick(&mut settings, opts.quick);
    echo_settings(&settings);
    let data = cli::load_sim_data(&opts, &settings)?;
    cli::reproduce(figure, &data, &settings, &args.common.out)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        consumers: args.consumers,
        items: args.items,
        ratings: args.ratings,
        seed: args.seed,
        ..SynthConfig::default()
    };
    synth::write_dataset(&cfg, &args.out)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| SimError::Internal(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run(args) => cmd_run(args, true),
        Command::Grid(args) => cmd_run(args, false),
        Command::Reproduce(args) => cmd_reproduce(args),
        Command::Verify { out_dir } => cli::verify(out_dir),
        Command::SynthData(args) => cmd_synth(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
