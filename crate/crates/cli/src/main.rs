//! `divindex` command-line front end.

mod input;

use clap::{Args, Parser, Subcommand, ValueEnum};
use divindex::conditions::{check_conditions, ConditionSpec, Hypothesis};
use divindex::estimators::estimate;
use divindex::indices;
use divindex::montecarlo::{run_experiment_with_workers, ExperimentConfig};
use divindex::oracle::{exact_estimator_law, exact_kolmogorov};
use divindex::{DistConfig, Distribution, Estimator, EstimatorKind, IndexSpec};
use input::Format;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

const SEED_ENV: &str = "DIVINDEX_SEED";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Lib(#[from] divindex::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_infeasible() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser)]
#[command(name = "divindex", version, about = "Diversity index and entropy estimation with normal-approximation diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate an index from observed data.
    Estimate(EstimateArgs),
    /// Population value, variance and rate exponents of an index.
    Theta(ThetaArgs),
    /// Evaluate the hypotheses behind the convergence rates on a grid.
    Conditions(ConditionsArgs),
    /// Monte Carlo Kolmogorov distance across sample sizes.
    Rate(RateArgs),
    /// Exact law of an estimator on a small alphabet.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Common {
    /// JSON request or run manifest: a file path, or inline JSON starting with `{`.
    #[arg(long)]
    config: Option<String>,
    /// Write outputs and manifest.json here instead of stdout/stderr.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Csv,
}

fn parse_index(s: &str) -> std::result::Result<IndexSpec, String> {
    s.parse().map_err(|e: divindex::Error| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorKind, String> {
    s.parse().map_err(|e: divindex::Error| e.to_string())
}

fn parse_hypothesis(s: &str) -> std::result::Result<Hypothesis, String> {
    s.parse().map_err(|e: divindex::Error| e.to_string())
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Data file.
    #[arg(long)]
    input: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// shannon, simpson or power:MU,NU [default: shannon]
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexSpec>,
    /// plugin, mm or jk [default: plugin]
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    /// Confidence level of the interval [default: 0.95]
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    output: Output,
}

#[derive(Args)]
struct ThetaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexSpec>,
}

#[derive(Args)]
struct ConditionsArgs {
    #[command(flatten)]
    common: Common,
    /// smooth-moment, plugin-entropy, miller-madow or jackknife
    #[arg(long, value_parser = parse_hypothesis)]
    hypothesis: Option<Hypothesis>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Cutoff K(n), e.g. `ceil(ln n)` or `floor(n^0.3)`.
    #[arg(long)]
    k: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexSpec>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    common: Common,
    /// Master seed; falls back to the config, then to DIVINDEX_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexSpec>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    #[arg(long, value_enum, default_value = "json")]
    output: Output,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexSpec>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    #[arg(long, value_enum, default_value = "csv")]
    output: Output,
}

fn default_index() -> IndexSpec {
    IndexSpec::Shannon
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Plugin
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRequest {
    input: String,
    #[serde(default)]
    format: Format,
    #[serde(default = "default_index")]
    index: IndexSpec,
    #[serde(default = "default_estimator")]
    estimator: EstimatorKind,
    #[serde(default = "default_level")]
    level: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaRequest {
    distribution: DistConfig,
    #[serde(default = "default_index")]
    index: IndexSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionsRequest {
    distribution: DistConfig,
    #[serde(flatten)]
    spec: ConditionSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct RateRequest {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    workers: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleRequest {
    probs: Vec<f64>,
    n: u64,
    #[serde(default = "default_index")]
    index: IndexSpec,
    #[serde(default = "default_estimator")]
    estimator: EstimatorKind,
}

#[derive(Debug, Serialize)]
struct ThetaReport {
    distribution: DistConfig,
    index: IndexSpec,
    /// θ for power indices, H for Shannon.
    value: f64,
    sigma_sq: f64,
    degenerate: bool,
    beta: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Atom {
    value: f64,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct OracleReport {
    probs: Vec<f64>,
    n: u64,
    index: IndexSpec,
    estimator: EstimatorKind,
    target: f64,
    sigma_sq: f64,
    degenerate: bool,
    mean: f64,
    variance: f64,
    /// Absent when σ = 0.
    kolmogorov_distance: Option<f64>,
    atoms: Vec<Atom>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    subcommand: String,
    config: Value,
    seed: Option<u64>,
    version: String,
    started_at: String,
    finished_at: String,
    outputs: Vec<String>,
}

/// Read `--config` into a JSON object. A run manifest contributes its
/// resolved config after checking the subcommand.
fn load_config(arg: Option<&str>, subcommand: &str) -> Result<Map<String, Value>> {
    let Some(arg) = arg else {
        return Ok(Map::new());
    };
    let (text, origin) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), "inline config".to_string())
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| CliError::File {
            path: arg.to_string(),
            message: e.to_string(),
        })?;
        (text, arg.to_string())
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::File {
        path: origin.clone(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;
    let Value::Object(mut map) = value else {
        return Err(CliError::File {
            path: origin,
            message: "expected a JSON object".into(),
        });
    };
    if let Some(Value::String(sub)) = map.get("subcommand") {
        if sub != subcommand {
            return Err(input_err(format!("{origin} is a manifest for `{sub}`, not `{subcommand}`")));
        }
        return match map.remove("config") {
            Some(Value::Object(config)) => Ok(config),
            _ => Err(input_err(format!("{origin}: manifest has no config object"))),
        };
    }
    Ok(map)
}

fn set<T: Serialize>(map: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
    }
}

fn resolve<T: for<'de> Deserialize<'de>>(map: Map<String, Value>, what: &str) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| input_err(format!("{what} config: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(input_err)?;
    }
    let bytes = w.into_inner().map_err(input_err)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Where primary outputs go.
struct Sink {
    out_dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Sink {
    fn new(out_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).map_err(|e| CliError::File {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(Sink {
            out_dir,
            written: Vec::new(),
        })
    }

    fn write_file(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out_dir.as_deref().unwrap_or(Path::new(".")).join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    /// File in the output directory, else stdout.
    fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        if self.out_dir.is_some() {
            self.write_file(name, contents)
        } else {
            print!("{contents}");
            self.written.push("stdout".into());
            Ok(())
        }
    }

    /// Secondary output: only written when there is an output directory.
    fn emit_extra(&mut self, name: &str, contents: &str) -> Result<()> {
        if self.out_dir.is_some() {
            self.write_file(name, contents)?;
        }
        Ok(())
    }
}

struct Resolved {
    config: Value,
    seed: Option<u64>,
}

fn resolved<T: Serialize>(request: &T, seed: Option<u64>) -> Resolved {
    Resolved {
        config: serde_json::to_value(request).expect("requests serialize"),
        seed,
    }
}

fn cmd_estimate(args: EstimateArgs, sink: &mut Sink) -> Result<Resolved> {
    let mut map = load_config(args.common.config.as_deref(), "estimate")?;
    set(&mut map, "input", args.input);
    set(&mut map, "format", args.format);
    set(&mut map, "index", args.index);
    set(&mut map, "estimator", args.estimator);
    set(&mut map, "level", args.level);
    if !map.contains_key("input") {
        return Err(input_err("estimate needs --input"));
    }
    let req: EstimateRequest = resolve(map, "estimate")?;
    let text = std::fs::read_to_string(&req.input).map_err(|e| CliError::File {
        path: req.input.clone(),
        message: e.to_string(),
    })?;
    let counts = input::parse(&text, req.format).map_err(|e| CliError::File {
        path: req.input.clone(),
        message: e.to_string(),
    })?;
    let est = estimate(&counts, &req.index, req.estimator, req.level)?;
    match args.output {
        Output::Json => sink.emit("estimate.json", &to_json(&est))?,
        Output::Csv => sink.emit("estimate.csv", &to_csv([&est])?)?,
    }
    Ok(resolved(&req, None))
}

fn cmd_theta(args: ThetaArgs, sink: &mut Sink) -> Result<Resolved> {
    let mut map = load_config(args.common.config.as_deref(), "theta")?;
    // a bare distribution config is accepted as well as a full request
    if !map.is_empty() && !map.contains_key("distribution") {
        let dist = std::mem::take(&mut map);
        map.insert("distribution".into(), Value::Object(dist));
    }
    if !map.contains_key("distribution") {
        return Err(input_err("theta needs --config with a distribution"));
    }
    set(&mut map, "index", args.index);
    let req: ThetaRequest = resolve(map, "theta")?;
    let dist = req.distribution.build()?;
    let value = indices::theta(&dist, &req.index)?;
    let var = indices::sigma_sq(&dist, &req.index)?;
    let report = ThetaReport {
        distribution: req.distribution.clone(),
        index: req.index,
        value,
        sigma_sq: var.sigma_sq,
        degenerate: var.degenerate,
        beta: req.index.beta(),
        gamma: req.index.gamma(),
    };
    sink.emit("theta.json", &to_json(&report))?;
    Ok(resolved(&req, None))
}

fn cmd_conditions(args: ConditionsArgs, sink: &mut Sink) -> Result<Resolved> {
    let mut map = load_config(args.common.config.as_deref(), "conditions")?;
    set(&mut map, "hypothesis", args.hypothesis);
    set(&mut map, "delta", args.delta);
    set(&mut map, "epsilon", args.epsilon);
    set(&mut map, "k", args.k);
    set(&mut map, "n_grid", args.grid);
    set(&mut map, "index", args.index);
    let req: ConditionsRequest = resolve(map, "conditions")?;
    let report = check_conditions(&req.distribution, &req.spec)?;
    sink.emit("conditions.json", &to_json(&report))?;
    Ok(resolved(&req, None))
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| input_err(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn cmd_rate(args: RateArgs, sink: &mut Sink) -> Result<Resolved> {
    let mut map = load_config(args.common.config.as_deref(), "rate")?;
    set(&mut map, "master_seed", args.seed);
    if !map.contains_key("master_seed") {
        match env_seed()? {
            Some(seed) => set(&mut map, "master_seed", Some(seed)),
            None => return Err(input_err(format!("no seed: pass --seed, set master_seed or {SEED_ENV}"))),
        }
    }
    set(&mut map, "workers", args.workers);
    if !map.contains_key("workers") {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        set(&mut map, "workers", Some(n));
    }
    set(&mut map, "index", args.index);
    set(&mut map, "estimator", args.estimator);
    let req: RateRequest = resolve(map, "rate")?;
    let report = run_experiment_with_workers(&req.experiment, req.workers)?;
    let json = to_json(&report);
    let csv = to_csv(report.points.iter())?;
    match args.output {
        Output::Json => {
            sink.emit("rate.json", &json)?;
            sink.emit_extra("rate.csv", &csv)?;
        }
        Output::Csv => {
            sink.emit("rate.csv", &csv)?;
            sink.emit_extra("rate.json", &json)?;
        }
    }
    Ok(resolved(&req, Some(req.experiment.master_seed)))
}

fn cmd_oracle(args: OracleArgs, sink: &mut Sink) -> Result<Resolved> {
    let mut map = load_config(args.common.config.as_deref(), "oracle")?;
    set(&mut map, "probs", args.probs);
    set(&mut map, "n", args.n);
    set(&mut map, "index", args.index);
    set(&mut map, "estimator", args.estimator);
    let req: OracleRequest = resolve(map, "oracle")?;
    let estimator = Estimator::new(req.index, req.estimator)?;
    let dist = Distribution::finite(req.probs.clone())?;
    let law = exact_estimator_law(&req.probs, req.n, &estimator)?;
    let target = indices::theta(&dist, &req.index)?;
    let var = indices::sigma_sq(&dist, &req.index)?;
    let kolmogorov_distance = if var.degenerate {
        None
    } else {
        Some(exact_kolmogorov(&law, target, var.sigma() / (req.n as f64).sqrt())?)
    };
    let atoms: Vec<Atom> = law
        .atoms
        .iter()
        .map(|&(value, probability)| Atom { value, probability })
        .collect();
    let csv = to_csv(atoms.iter())?;
    let report = OracleReport {
        probs: req.probs.clone(),
        n: req.n,
        index: req.index,
        estimator: req.estimator,
        target,
        sigma_sq: var.sigma_sq,
        degenerate: var.degenerate,
        mean: law.mean(),
        variance: law.variance(),
        kolmogorov_distance,
        atoms,
    };
    let json = to_json(&report);
    match args.output {
        Output::Json => {
            sink.emit("oracle.json", &json)?;
            sink.emit_extra("oracle.csv", &csv)?;
        }
        Output::Csv => {
            sink.emit("oracle.csv", &csv)?;
            sink.emit_extra("oracle.json", &json)?;
            if sink.out_dir.is_none() {
                match kolmogorov_distance {
                    Some(d) => eprintln!("kolmogorov_distance: {d}"),
                    None => eprintln!("kolmogorov_distance: undefined (zero variance)"),
                }
            }
        }
    }
    Ok(resolved(&req, None))
}

fn timestamp(t: SystemTime) -> String {
    humantime::format_rfc3339_millis(t).to_string()
}

fn run(cli: Cli) -> Result<()> {
    let started = SystemTime::now();
    let (name, out_dir) = match &cli.command {
        Command::Estimate(a) => ("estimate", a.common.out_dir.clone()),
        Command::Theta(a) => ("theta", a.common.out_dir.clone()),
        Command::Conditions(a) => ("conditions", a.common.out_dir.clone()),
        Command::Rate(a) => ("rate", a.common.out_dir.clone()),
        Command::Oracle(a) => ("oracle", a.common.out_dir.clone()),
    };
    let mut sink = Sink::new(out_dir)?;
    let resolved = match cli.command {
        Command::Estimate(a) => cmd_estimate(a, &mut sink)?,
        Command::Theta(a) => cmd_theta(a, &mut sink)?,
        Command::Conditions(a) => cmd_conditions(a, &mut sink)?,
        Command::Rate(a) => cmd_rate(a, &mut sink)?,
        Command::Oracle(a) => cmd_oracle(a, &mut sink)?,
    };
    let mut manifest = RunManifest {
        subcommand: name.to_string(),
        config: resolved.config,
        seed: resolved.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: timestamp(started),
        finished_at: timestamp(SystemTime::now()),
        outputs: sink.written.clone(),
    };
    if sink.out_dir.is_some() {
        let path = sink.out_dir.as_ref().unwrap().join("manifest.json");
        manifest.outputs.push(path.display().to_string());
        sink.write_file("manifest.json", &to_json(&manifest))?;
    } else {
        eprint!("{}", to_json(&manifest));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
