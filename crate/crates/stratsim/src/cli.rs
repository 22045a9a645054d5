//! Configuration files, experiment selection, CSV emission, figure presets,
//! and output verification.
//!
//! The configuration format is plain `key = value` lines (`#` comments).
//! Command-line flags override file values; the fully resolved configuration
//! is echoed to the log and written next to the outputs as `run_config.txt`,
//! which parses back into the same settings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{
    load_ratings, sample_profits, subsample_consumers, ColumnSchema, ItemCatalog,
};
use crate::engine::{
    aggregate_steps, grid, run_experiment, AggregatePoint, RunConfig, RunResult, SimData,
    StepMetrics,
};
use crate::error::{Result, SimError};
use crate::predictor::TrainConfig;
use crate::strategy::{Strategy, StrategyConfig, ALL_STRATEGIES};

// Profits are drawn from a stream derived from the base seed alone, so every
// grid cell and replication of an experiment shares one profit draw.
const PROFIT_SALT: u64 = 0x70_72_6f_66;

/// Resolved simulation settings: Table-style static parameters plus the
/// experiment factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub strategy: Strategy,
    pub delta: f64,
    pub psi: f64,
    pub steps: usize,
    pub replications: usize,
    pub retrain_period: usize,
    pub list_len: usize,
    pub p_feed: f64,
    pub p_soc: f64,
    pub nu: u64,
    pub noise_sd: f64,
    pub post_scale: f64,
    pub base_seed: u64,
    pub factors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub init_sd: f64,
    pub strategies: Vec<Strategy>,
    pub deltas: Vec<f64>,
    pub psis: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            strategy: Strategy::ConsumerCentric,
            delta: 0.0,
            psi: 0.75,
            steps: 1_000,
            replications: 3,
            retrain_period: 100,
            list_len: 10,
            p_feed: 0.10,
            p_soc: 0.15,
            nu: 5_000,
            noise_sd: 0.3,
            post_scale: 1.0,
            base_seed: 42,
            factors: 100,
            epochs: 20,
            learning_rate: 0.005,
            regularization: 0.02,
            init_sd: 0.1,
            strategies: ALL_STRATEGIES.to_vec(),
            deltas: vec![0.0, 0.05, 0.1, 0.5],
            psis: vec![0.75, 0.85, 0.95],
        }
    }
}

pub const VALID_KEYS: [&str; 21] = [
    "strategy",
    "delta",
    "psi",
    "steps",
    "replications",
    "retrain_period",
    "list_len",
    "p_feed",
    "p_soc",
    "nu",
    "noise_sd",
    "post_scale",
    "base_seed",
    "factors",
    "epochs",
    "learning_rate",
    "regularization",
    "init_sd",
    "strategies",
    "deltas",
    "psis",
];

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| SimError::validation(format!("cannot parse {what} element `{s}`")))
        })
        .collect()
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| SimError::validation(format!("cannot parse `{value}` for key `{key}`")))
        }
        match key {
            "strategy" => self.strategy = value.parse()?,
            "delta" => self.delta = num(key, value)?,
            "psi" => self.psi = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "retrain_period" => self.retrain_period = num(key, value)?,
            "list_len" => self.list_len = num(key, value)?,
            "p_feed" => self.p_feed = num(key, value)?,
            "p_soc" => self.p_soc = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "noise_sd" => self.noise_sd = num(key, value)?,
            "post_scale" => self.post_scale = num(key, value)?,
            "base_seed" => self.base_seed = num(key, value)?,
            "factors" => self.factors = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "regularization" => self.regularization = num(key, value)?,
            "init_sd" => self.init_sd = num(key, value)?,
            "strategies" => {
                self.strategies = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "deltas" => self.deltas = parse_list(value, "deltas")?,
            "psis" => self.psis = parse_list(value, "psis")?,
            other => {
                return Err(SimError::validation(format!(
                    "unknown configuration key `{other}` (valid keys: {})",
                    VALID_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Settings> {
        let mut settings = Settings::default();
        settings.apply_text(text)?;
        Ok(settings)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::validation(format!(
                    "config line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn parse_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Settings::parse_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |name: &str, v: f64, lo: f64, hi: f64| -> Result<()> {
            if !(lo..=hi).contains(&v) {
                return Err(SimError::validation(format!(
                    "{name} = {v} outside the valid range [{lo}, {hi}]"
                )));
            }
            Ok(())
        };
        in_range("delta", self.delta, 0.0, 1.0)?;
        in_range("p_feed", self.p_feed, 0.0, 1.0)?;
        in_range("p_soc", self.p_soc, 0.0, 1.0)?;
        in_range("post_scale", self.post_scale, 0.0, 1.0)?;
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(SimError::validation(format!(
                "psi = {} outside the valid range (0, 1)",
                self.psi
            )));
        }
        for &psi in &self.psis {
            if !(psi > 0.0 && psi < 1.0) {
                return Err(SimError::validation(format!(
                    "psis entry {psi} outside the valid range (0, 1)"
                )));
            }
        }
        for &delta in &self.deltas {
            in_range("deltas entry", delta, 0.0, 1.0)?;
        }
        if self.replications == 0 {
            return Err(SimError::validation("replications must be >= 1"));
        }
        if self.retrain_period == 0 || self.list_len == 0 || self.nu == 0 {
            return Err(SimError::validation(
                "retrain_period, list_len, and nu must be >= 1",
            ));
        }
        if self.factors == 0 || self.epochs == 0 {
            return Err(SimError::validation("factors and epochs must be >= 1"));
        }
        if self.learning_rate <= 0.0 || self.regularization < 0.0 || self.init_sd < 0.0 {
            return Err(SimError::validation(
                "learning_rate must be > 0; regularization and init_sd must be >= 0",
            ));
        }
        if self.noise_sd < 0.0 {
            return Err(SimError::validation("noise_sd must be >= 0"));
        }
        Ok(())
    }

    /// Canonical echo; parses back into the same settings.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "strategy = {}", self.strategy);
        let _ = writeln!(out, "delta = {}", self.delta);
        let _ = writeln!(out, "psi = {}", self.psi);
        let _ = writeln!(out, "steps = {}", self.steps);
        let _ = writeln!(out, "replications = {}", self.replications);
        let _ = writeln!(out, "retrain_period = {}", self.retrain_period);
        let _ = writeln!(out, "list_len = {}", self.list_len);
        let _ = writeln!(out, "p_feed = {}", self.p_feed);
        let _ = writeln!(out, "p_soc = {}", self.p_soc);
        let _ = writeln!(out, "nu = {}", self.nu);
        let _ = writeln!(out, "noise_sd = {}", self.noise_sd);
        let _ = writeln!(out, "post_scale = {}", self.post_scale);
        let _ = writeln!(out, "base_seed = {}", self.base_seed);
        let _ = writeln!(out, "factors = {}", self.factors);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(out, "regularization = {}", self.regularization);
        let _ = writeln!(out, "init_sd = {}", self.init_sd);
        let strategies: Vec<&str> = self.strategies.iter().map(|s| s.name()).collect();
        let _ = writeln!(out, "strategies = {}", strategies.join(","));
        let _ = writeln!(out, "deltas = {}", join_f64(&self.deltas));
        let _ = writeln!(out, "psis = {}", join_f64(&self.psis));
        out
    }

    /// Engine configuration for one strategy cell.
    pub fn run_config(&self, kind: Strategy) -> RunConfig {
        RunConfig {
            strategy: StrategyConfig::new(kind, self.list_len),
            delta: self.delta,
            psi: self.psi,
            steps: self.steps,
            replications: self.replications,
            retrain_period: self.retrain_period,
            base_seed: self.base_seed,
            p_feed: self.p_feed,
            p_soc: self.p_soc,
            nu: self.nu,
            noise_sd: self.noise_sd,
            post_scale: self.post_scale,
            train: TrainConfig {
                factors: self.factors,
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                regularization: self.regularization,
                init_sd: self.init_sd,
            },
        }
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Dataset loading options.
#[derive(Debug, Clone, Default)]
pub struct DataOptions {
    pub dataset: PathBuf,
    pub profits_in: Option<PathBuf>,
    pub profits_out: Option<PathBuf>,
    /// Quick mode: (consumer cap, step cap). Not a reproduction.
    pub quick: Option<(usize, usize)>,
}

/// Loads the dataset, attaches profits (sampled from the base seed unless
/// imported), and prepares the shared simulation data.
pub fn load_sim_data(opts: &DataOptions, settings: &Settings) -> Result<SimData> {
    let mut ingest = load_ratings(&opts.dataset, &ColumnSchema::default())?;
    if let Some((consumer_cap, _)) = opts.quick {
        log::warn!(
            "quick mode: subsampling to {consumer_cap} consumers; results are NOT a reproduction"
        );
        ingest = subsample_consumers(&ingest, consumer_cap)?;
    }
    let catalog = match &opts.profits_in {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
            let catalog = ItemCatalog::from_profits_csv(&text, ingest.item_ids.clone())?;
            log::info!("imported profits for {} items from {}", catalog.item_count(), path.display());
            catalog
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.base_seed ^ PROFIT_SALT);
            let profits = sample_profits(ingest.store.item_count(), &mut rng)?;
            ItemCatalog::new(profits, ingest.item_ids.clone())?
        }
    };
    if let Some(path) = &opts.profits_out {
        std::fs::write(path, catalog.profits_csv()).map_err(|e| SimError::io(path, e))?;
        log::info!("wrote profit map to {}", path.display());
    }
    SimData::prepare(ingest, catalog)
}

/// Applies the quick-mode step cap to settings.
pub fn apply_quick(settings: &mut Settings, quick: Option<(usize, usize)>) {
    if let Some((_, step_cap)) = quick {
        settings.steps = settings.steps.min(step_cap);
    }
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

const RAW_HEADER: &str = "strategy,omega,delta,psi,replication,step,mean_trust,\
mean_consumption_prob,profit_step,cumulative_profit,s_plus,s_minus";
const AGGREGATE_HEADER: &str = "strategy,omega,delta,psi,step,metric,mean,ci_half_width";
const METRIC_NAMES: [&str; 4] = [
    "mean_trust",
    "mean_consumption_prob",
    "profit_step",
    "cumulative_profit",
];

fn omega_field(cfg: &RunConfig) -> String {
    match cfg.strategy.kind.omega() {
        Some(omega) => omega.to_string(),
        None => String::new(),
    }
}

fn raw_csv_text(results: &[RunResult]) -> String {
    let mut out = String::new();
    out.push_str(RAW_HEADER);
    out.push('\n');
    for result in results {
        let cfg = &result.config;
        let prefix = format!(
            "{},{},{},{}",
            cfg.strategy.kind.name(),
            omega_field(cfg),
            cfg.delta,
            cfg.psi
        );
        for (rep, metrics) in result.per_replication.iter().enumerate() {
            for m in metrics {
                let _ = writeln!(
                    out,
                    "{prefix},{rep},{},{},{},{},{},{},{}",
                    m.step,
                    m.mean_trust,
                    m.mean_consumption_prob,
                    m.profit_step,
                    m.cumulative_profit,
                    m.s_plus,
                    m.s_minus
                );
            }
        }
    }
    out
}

fn aggregate_rows(prefix: &str, aggregate: &[AggregatePoint], out: &mut String) {
    for point in aggregate {
        let cells = [
            (&point.mean_trust, METRIC_NAMES[0]),
            (&point.mean_consumption_prob, METRIC_NAMES[1]),
            (&point.profit_step, METRIC_NAMES[2]),
            (&point.cumulative_profit, METRIC_NAMES[3]),
        ];
        for (mc, name) in cells {
            let ci = mc.ci_half_width.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{prefix},{},{name},{},{ci}", point.step, mc.mean);
        }
    }
}

fn aggregate_csv_text(results: &[RunResult]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for result in results {
        let cfg = &result.config;
        let prefix = format!(
            "{},{},{},{}",
            cfg.strategy.kind.name(),
            omega_field(cfg),
            cfg.delta,
            cfg.psi
        );
        aggregate_rows(&prefix, &result.aggregate, &mut out);
    }
    out
}

/// Per-(delta, psi) figure data: one file per metric with a
/// `step,<strategy>_mean,<strategy>_ci,...` schema in a fixed strategy order.
fn figure_csv_files(results: &[RunResult]) -> Vec<(String, String)> {
    let mut slices: Vec<(String, String)> = Vec::new(); // (delta, psi) in first-seen order
    for r in results {
        let key = (r.config.delta.to_string(), r.config.psi.to_string());
        if !slices.iter().any(|s| s.0 == key.0 && s.1 == key.1) {
            slices.push(key);
        }
    }
    let mut files = Vec::new();
    for (delta_s, psi_s) in &slices {
        let members: Vec<&RunResult> = ALL_STRATEGIES
            .iter()
            .filter_map(|kind| {
                results.iter().find(|r| {
                    r.config.strategy.kind == *kind
                        && r.config.delta.to_string() == *delta_s
                        && r.config.psi.to_string() == *psi_s
                })
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let steps = members[0].aggregate.len();
        let extract: [(&str, fn(&AggregatePoint) -> &crate::engine::MeanCi); 3] = [
            ("consumption", |p| &p.mean_consumption_prob),
            ("profit_per_step", |p| &p.profit_step),
            ("cumulative_profit", |p| &p.cumulative_profit),
        ];
        for (metric, get) in extract {
            let mut text = String::from("step");
            for member in &members {
                let name = member.config.strategy.kind.name();
                let _ = write!(text, ",{name}_mean,{name}_ci");
            }
            text.push('\n');
            for s in 0..steps {
                let _ = write!(text, "{}", members[0].aggregate[s].step);
                for member in &members {
                    let mc = get(&member.aggregate[s]);
                    let ci = mc.ci_half_width.map(|v| v.to_string()).unwrap_or_default();
                    let _ = write!(text, ",{},{ci}", mc.mean);
                }
                text.push('\n');
            }
            files.push((format!("{metric}_delta{delta_s}_psi{psi_s}.csv"), text));
        }
    }
    files
}

/// Writes `raw.csv`, `aggregate.csv`, and the per-slice figure data files.
pub fn emit_csv(results: &[RunResult], out_dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(SimError::validation("no results to emit"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| SimError::io(&path, e))
    };
    write("raw.csv", &raw_csv_text(results))?;
    write("aggregate.csv", &aggregate_csv_text(results))?;
    for (name, text) in figure_csv_files(results) {
        write(&name, &text)?;
    }
    log::info!("wrote outputs to {}", out_dir.display());
    Ok(())
}

/// Writes the resolved configuration echo next to the outputs.
pub fn write_config_echo(settings: &Settings, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let path = out_dir.join("run_config.txt");
    std::fs::write(&path, settings.to_text()).map_err(|e| SimError::io(&path, e))
}

// ---------------------------------------------------------------------------
// Verification: re-derive aggregate.csv from raw.csv and diff
// ---------------------------------------------------------------------------

/// Recomputes `aggregate.csv` from `raw.csv` in `out_dir` and fails on any
/// difference.
pub fn verify(out_dir: &Path) -> Result<()> {
    let raw_path = out_dir.join("raw.csv");
    let raw = std::fs::read_to_string(&raw_path).map_err(|e| SimError::io(&raw_path, e))?;
    let mut lines = raw.lines();
    match lines.next() {
        Some(header) if header == RAW_HEADER => {}
        other => {
            return Err(SimError::validation(format!(
                "raw.csv header mismatch: {other:?}"
            )))
        }
    }

    // config prefix -> replication -> metrics, preserving first-seen order
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<Vec<StepMetrics>>> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(SimError::validation(format!(
                "raw.csv line {}: expected 12 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let prefix = fields[..4].join(",");
        let parse_f = |idx: usize| -> Result<f64> {
            fields[idx].parse().map_err(|_| {
                SimError::validation(format!(
                    "raw.csv line {}: bad number `{}`",
                    lineno + 2,
                    fields[idx]
                ))
            })
        };
        let parse_u = |idx: usize| -> Result<u64> {
            fields[idx].parse().map_err(|_| {
                SimError::validation(format!(
                    "raw.csv line {}: bad integer `{}`",
                    lineno + 2,
                    fields[idx]
                ))
            })
        };
        let replication = parse_u(4)? as usize;
        let metrics = StepMetrics {
            step: parse_u(5)? as usize,
            mean_trust: parse_f(6)?,
            mean_consumption_prob: parse_f(7)?,
            profit_step: parse_f(8)?,
            cumulative_profit: parse_f(9)?,
            s_plus: parse_u(10)?,
            s_minus: parse_u(11)?,
            consumption_count: 0, // not emitted; unused by aggregation
        };
        if !groups.contains_key(&prefix) {
            order.push(prefix.clone());
        }
        let reps = groups.entry(prefix).or_default();
        if reps.len() <= replication {
            reps.resize_with(replication + 1, Vec::new);
        }
        reps[replication].push(metrics);
    }

    let mut recomputed = String::new();
    recomputed.push_str(AGGREGATE_HEADER);
    recomputed.push('\n');
    for prefix in &order {
        let reps = &groups[prefix];
        let aggregate = aggregate_steps(reps)?;
        aggregate_rows(prefix, &aggregate, &mut recomputed);
    }

    let agg_path = out_dir.join("aggregate.csv");
    let existing = std::fs::read_to_string(&agg_path).map_err(|e| SimError::io(&agg_path, e))?;
    if existing != recomputed {
        let first_diff = existing
            .lines()
            .zip(recomputed.lines())
            .enumerate()
            .find(|(_, (a, b))| a != b)
            .map(|(i, _)| i + 1)
            .unwrap_or_else(|| existing.lines().count().min(recomputed.lines().count()) + 1);
        return Err(SimError::validation(format!(
            "aggregate.csv does not match the recomputation from raw.csv (first difference at line {first_diff})"
        )));
    }
    println!(
        "verify {}: aggregate.csv matches raw.csv ({} configurations)",
        out_dir.display(),
        order.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

/// Named experiment presets mirroring the report figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Five strategies without social media (delta 0, psi 0.75).
    Fig3,
    /// Consumption probabilities across social-reliance levels.
    Fig4,
    /// Profit per step across social-reliance levels.
    Fig5,
    /// Cumulative profit across social-reliance levels.
    Fig6,
    /// Expectation-quantile sweep without social media.
    Appendix,
}

pub const FIGURE_IDS: [&str; 5] = ["fig3", "fig4", "fig5", "fig6", "appendix"];

impl std::str::FromStr for Figure {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            "appendix" => Ok(Figure::Appendix),
            other => Err(SimError::validation(format!(
                "unknown figure id `{other}` (valid: {})",
                FIGURE_IDS.join(", ")
            ))),
        }
    }
}

impl Figure {
    /// The (deltas, psis) slice behind the figure; strategies are always all
    /// five.
    pub fn factors(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Figure::Fig3 => (vec![0.0], vec![0.75]),
            Figure::Fig4 | Figure::Fig5 | Figure::Fig6 => {
                (vec![0.0, 0.05, 0.1, 0.5], vec![0.75])
            }
            Figure::Appendix => (vec![0.0], vec![0.75, 0.85, 0.95]),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Appendix => "appendix",
        }
    }
}

/// Runs a list of configurations (grid cells in parallel) against shared data.
pub fn run_configs(data: &SimData, configs: &[RunConfig]) -> Result<Vec<RunResult>> {
    configs
        .par_iter()
        .map(|cfg| run_experiment(data, cfg))
        .collect()
}

/// Runs the grid slice behind a figure, emits its data files, and prints the
/// headline strategy comparisons.
pub fn reproduce(
    figure: Figure,
    data: &SimData,
    settings: &Settings,
    out_dir: &Path,
) -> Result<Vec<RunResult>> {
    let (deltas, psis) = figure.factors();
    let template = settings.run_config(Strategy::ConsumerCentric);
    let configs = grid(&ALL_STRATEGIES, &deltas, &psis, &template)?;
    log::info!(
        "reproduce {}: {} configurations x {} replications x {} steps",
        figure.id(),
        configs.len(),
        settings.replications,
        settings.steps
    );
    let results = run_configs(data, &configs)?;
    emit_csv(&results, out_dir)?;
    let mut echoed = settings.clone();
    echoed.deltas = deltas;
    echoed.psis = psis;
    echoed.strategies = ALL_STRATEGIES.to_vec();
    write_config_echo(&echoed, out_dir)?;
    print_headline(&results);
    Ok(results)
}

/// Prints final cumulative profit per strategy and the percentage gap to the
/// consumer-centric baseline, per (delta, psi) slice.
pub fn print_headline(results: &[RunResult]) {
    let mut slices: Vec<(String, String)> = Vec::new();
    for r in results {
        let key = (r.config.delta.to_string(), r.config.psi.to_string());
        if !slices.contains(&key) {
            slices.push(key);
        }
    }
    for (delta_s, psi_s) in slices {
        println!("delta={delta_s} psi={psi_s}: cumulative profit at the final step");
        let members: Vec<&RunResult> = results
            .iter()
            .filter(|r| {
                r.config.delta.to_string() == delta_s && r.config.psi.to_string() == psi_s
            })
            .collect();
        let baseline = members
            .iter()
            .find(|r| r.config.strategy.kind == Strategy::ConsumerCentric)
            .and_then(|r| r.aggregate.last())
            .map(|p| p.cumulative_profit.mean);
        for member in &members {
            let Some(last) = member.aggregate.last() else {
                continue;
            };
            let value = last.cumulative_profit.mean;
            match baseline {
                Some(base) if member.config.strategy.kind != Strategy::ConsumerCentric => {
                    println!(
                        "  {:<18} {:>14.1}  ({:+.1}% vs consumer_centric)",
                        member.config.strategy.kind.name(),
                        value,
                        (value / base - 1.0) * 100.0
                    );
                }
                _ => println!(
                    "  {:<18} {:>14.1}",
                    member.config.strategy.kind.name(),
                    value
                ),
            }
        }
    }
}
