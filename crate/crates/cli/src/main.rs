//! `rig`: exact calculators, bound tables and Monte Carlo distance
//! experiments for the edge count of `G(n, m, p)`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 budget refusal.

mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Config;
use output::{real, Table};
use rig_normal::bounds::{bound_report, BoundReport};
use rig_normal::contractions::{norm_table, NormMethod, NormTable};
use rig_normal::distance::{
    convergence_sweep, exact_distances, exact_pmf, mc_sample_distances, rate_slope, DistanceReport, SweepRow,
};
use rig_normal::moments::variance_edges;
use rig_normal::sampler::EdgeCountSampler;
use rig_normal::subgraphs::{
    fmt_set, parse_family, pi_complement, pi_cover_approx, pi_cover_exact, pi_subgraph, CoverSpec, SmallGraph,
};
use rig_normal::ModelParams;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rig", version, about = "Normal approximation experiments for random intersection graph edge counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean and exact variance of the edge count
    Moments(Common),
    /// Subgraph, complement or clique-cover probability of a small graph
    Prob(ProbArgs),
    /// Contraction norms of the edge kernel
    Norms(NormArgs),
    /// Distance-bound brackets and regime classification
    Bounds(Common),
    /// Exact law (n <= 6) and its distances to N(0,1)
    Exact(Common),
    /// Monte Carlo distances to N(0,1)
    Mc(Common),
    /// Monte Carlo distances along a parameter curve, joined with brackets
    Sweep(SweepArgs),
    /// Raw edge-count samples
    Sample(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Master seed; defaults to $RIG_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file supplying any flag not given on the command line
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ProbArgs {
    #[command(flatten)]
    common: Common,
    /// Graph as "h; u-v,u-v,..." with 0-based vertices
    #[arg(long)]
    graph: Option<String>,
    /// Probability that the graph lies in the complement
    #[arg(long)]
    complement: bool,
    /// Sets every one of which some attribute builds, e.g. "[0,1],[1,2]"
    #[arg(long)]
    plus: Option<String>,
    /// Sets no attribute builds
    #[arg(long)]
    minus: Option<String>,
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    common: Common,
    /// closed, alternating or brute; all available methods by default
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// File with one "n,m,p" point per line
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Budget(String),
    Io(String),
}

impl From<rig_normal::Error> for Failure {
    fn from(e: rig_normal::Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Flags merged with the config file and environment.
struct Settings {
    common: Common,
    config: Config,
}

impl Settings {
    fn new(common: Common) -> Outcome<Self> {
        let config = match &common.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        Ok(Settings { common, config })
    }

    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Outcome<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.config.get(key),
        }
    }

    fn require<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Outcome<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| Failure::Invalid(format!("missing --{key}")))
    }

    fn n(&self) -> Outcome<u64> {
        self.require(self.common.n, "n")
    }

    fn m(&self) -> Outcome<u64> {
        self.require(self.common.m, "m")
    }

    fn p(&self) -> Outcome<f64> {
        self.require(self.common.p, "p")
    }

    fn params(&self) -> Outcome<ModelParams> {
        Ok(ModelParams::new(self.n()?, self.m()?, self.p()?)?)
    }

    /// Checks `m` and `p` without a vertex count.
    fn attribute_params(&self) -> Outcome<(u64, f64)> {
        let (m, p) = (self.m()?, self.p()?);
        ModelParams::new(2, m, p)?;
        Ok((m, p))
    }

    fn samples(&self, default: u64) -> Outcome<u64> {
        Ok(self.pick(self.common.samples, "samples")?.unwrap_or(default))
    }

    fn seed(&self) -> Outcome<u64> {
        if let Some(seed) = self.pick(self.common.seed, "seed")? {
            return Ok(seed);
        }
        match std::env::var("RIG_SEED") {
            Ok(text) => text
                .trim()
                .parse()
                .map_err(|e| Failure::Invalid(format!("RIG_SEED {text:?}: {e}"))),
            Err(_) => Ok(0),
        }
    }

    fn threads(&self) -> Outcome<usize> {
        Ok(self.pick(self.common.threads, "threads")?.unwrap_or(0))
    }

    fn format(&self, default: Format) -> Outcome<Format> {
        Ok(self.pick(self.common.format, "format")?.unwrap_or(default))
    }

    fn out(&self) -> Outcome<Option<PathBuf>> {
        self.pick(self.common.out.clone(), "out")
    }

    fn text(&self, flag: Option<String>, key: &str) -> Outcome<Option<String>> {
        self.pick(flag, key)
    }
}

/// A command result in both output formats.
struct Rendered {
    json: Value,
    table: Table,
}

fn params_json(params: &ModelParams) -> Value {
    json!({ "n": params.n, "m": params.m, "p": params.p })
}

fn moments(s: &Settings) -> Outcome<Rendered> {
    let params = s.params()?;
    let v = variance_edges(&params);
    let mut json = params_json(&params);
    json["command"] = json!("moments");
    for (k, x) in [
        ("mean", v.mean),
        ("variance", v.variance),
        ("term_pairwise", v.term_pairwise),
        ("term_cherry", v.term_cherry),
        ("regime_mp3", v.regime_mp3),
    ] {
        json[k] = json!(x);
    }
    let mut table = Table::new(&["n", "m", "p", "mean", "variance", "term_pairwise", "term_cherry"]);
    table.push(vec![
        params.n.to_string(),
        params.m.to_string(),
        real(params.p),
        real(v.mean),
        real(v.variance),
        real(v.term_pairwise),
        real(v.term_cherry),
    ]);
    Ok(Rendered { json, table })
}

fn prob(s: &Settings, args: &ProbArgs) -> Outcome<Rendered> {
    let text = s
        .text(args.graph.clone(), "graph")?
        .ok_or_else(|| Failure::Invalid("missing --graph".into()))?;
    let graph = SmallGraph::parse(&text)?;
    let (m, p) = s.attribute_params()?;
    let plus = s.text(args.plus.clone(), "plus")?;
    let minus = s.text(args.minus.clone(), "minus")?;
    let complement = args.complement || s.pick(None::<bool>, "complement")?.unwrap_or(false);
    let (kind, probability, approximation, cover) = match (complement, plus) {
        (true, Some(_)) => return Err(Failure::Invalid("--complement cannot be combined with --plus".into())),
        (true, None) => ("complement", pi_complement(&graph, m, p), None, None),
        (false, None) => {
            if minus.is_some() {
                return Err(Failure::Invalid("--minus needs --plus".into()));
            }
            ("subgraph", pi_subgraph(&graph, m, p)?, None, None)
        }
        (false, Some(plus)) => {
            let spec = CoverSpec::new(parse_family(&plus)?, parse_family(minus.as_deref().unwrap_or(""))?);
            let exact = pi_cover_exact(&graph, &spec, m, p)?;
            let approx = pi_cover_approx(&graph, &spec, m, p).ok();
            ("cover", exact, approx, Some(spec))
        }
    };
    let family = |f: &[u32]| f.iter().map(|&c| fmt_set(c)).collect::<Vec<_>>();
    let json = json!({
        "command": "prob",
        "graph": graph.to_string(),
        "m": m,
        "p": p,
        "kind": kind,
        "plus": cover.as_ref().map(|c| family(&c.plus)),
        "minus": cover.as_ref().map(|c| family(&c.minus)),
        "probability": probability,
        "approximation": approximation,
    });
    let mut table = Table::new(&["graph", "m", "p", "kind", "probability"]);
    table.push(vec![graph.to_string(), m.to_string(), real(p), kind.into(), real(probability)]);
    Ok(Rendered { json, table })
}

fn norms(s: &Settings, args: &NormArgs) -> Outcome<Rendered> {
    let (m, p) = s.attribute_params()?;
    let rows: Vec<(NormMethod, NormTable)> = match s.text(args.method.clone(), "method")? {
        Some(name) => {
            let method: NormMethod = name.parse()?;
            vec![(method, norm_table(m, p, method)?)]
        }
        None => NormMethod::ALL
            .into_iter()
            .filter_map(|method| match norm_table(m, p, method) {
                Ok(t) => Some(Ok((method, t))),
                Err(e) if e.is_budget() => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_, _>>()?,
    };
    let mut table = Table::new(&["m", "p", "method", "n20", "n21", "n10", "n11", "n_mix"]);
    let mut list = Vec::new();
    for (method, t) in &rows {
        let mut row = vec![m.to_string(), real(p), method.name().to_string()];
        row.extend(t.entries().iter().map(|&x| real(x)));
        table.push(row);
        list.push(json!({
            "method": method.name(),
            "n20": t.n20, "n21": t.n21, "n10": t.n10, "n11": t.n11, "n_mix": t.n_mix,
        }));
    }
    let json = json!({ "command": "norms", "m": m, "p": p, "rows": list });
    Ok(Rendered { json, table })
}

const BOUND_COLUMNS: [&str; 12] = [
    "n",
    "m",
    "p",
    "bracket_main_quarter",
    "bracket_main_half",
    "bracket_k14",
    "bracket_dkw",
    "q_ratio",
    "regime",
    "necessary_stat",
    "threshold_ratio",
    "threshold",
];

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn threshold_name(r: &BoundReport) -> String {
    r.threshold.map(|t| t.describe().to_string()).unwrap_or_default()
}

fn bounds(s: &Settings) -> Outcome<Rendered> {
    let params = s.params()?;
    let report = bound_report(&params)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["command"] = json!("bounds");
    json["n"] = json!(params.n);
    json["m"] = json!(params.m);
    json["p"] = json!(params.p);
    let mut table = Table::new(&BOUND_COLUMNS);
    table.push(vec![
        params.n.to_string(),
        params.m.to_string(),
        real(params.p),
        real(report.bracket_main_quarter),
        opt(report.bracket_main_half),
        opt(report.bracket_k14),
        opt(report.bracket_dkw),
        opt(report.q_ratio),
        report.regime.name().to_string(),
        real(report.necessary_stat),
        real(report.threshold_ratio),
        threshold_name(&report),
    ]);
    Ok(Rendered { json, table })
}

const DISTANCE_COLUMNS: [&str; 9] = ["n", "m", "p", "d_K", "d_K_radius", "d_W", "d_W_radius", "N", "exact"];

fn distance_row(params: &ModelParams, d: &DistanceReport) -> Vec<String> {
    vec![
        params.n.to_string(),
        params.m.to_string(),
        real(params.p),
        real(d.d_k),
        real(d.d_k_radius),
        real(d.d_w),
        real(d.d_w_radius),
        d.n_samples.to_string(),
        d.exact.to_string(),
    ]
}

fn distance_json(command: &str, params: &ModelParams, d: &DistanceReport) -> Value {
    let mut json = serde_json::to_value(d).expect("report serializes");
    json["command"] = json!(command);
    json["n"] = json!(params.n);
    json["m"] = json!(params.m);
    json["p"] = json!(params.p);
    json
}

fn exact(s: &Settings) -> Outcome<Rendered> {
    let params = s.params()?;
    let pmf = exact_pmf(&params)?;
    let d = exact_distances(&pmf)?;
    let (mean, variance) = pmf.mean_variance();
    let mut json = distance_json("exact", &params, &d);
    json["mean"] = json!(mean);
    json["variance"] = json!(variance);
    json["pmf"] = json!(pmf.probs);
    let mut table = Table::new(&DISTANCE_COLUMNS);
    table.push(distance_row(&params, &d));
    Ok(Rendered { json, table })
}

fn mc(s: &Settings) -> Outcome<Rendered> {
    let params = s.params()?;
    let seed = s.seed()?;
    let d = mc_sample_distances(&params, s.samples(100_000)?, seed, s.threads()?)?;
    let mut json = distance_json("mc", &params, &d);
    json["seed"] = json!(seed);
    let mut table = Table::new(&DISTANCE_COLUMNS);
    table.push(distance_row(&params, &d));
    Ok(Rendered { json, table })
}

const SWEEP_COLUMNS: [&str; 14] = [
    "n",
    "m",
    "p",
    "d_K",
    "d_K_radius",
    "d_W",
    "d_W_radius",
    "bracket_quarter",
    "bracket_half",
    "bracket_k14",
    "bracket_dkw",
    "regime",
    "necessary_stat",
    "threshold_ratio",
];

fn sweep_row(r: &SweepRow) -> Vec<String> {
    let (p, d, b) = (&r.params, &r.distance, &r.bounds);
    vec![
        p.n.to_string(),
        p.m.to_string(),
        real(p.p),
        real(d.d_k),
        real(d.d_k_radius),
        real(d.d_w),
        real(d.d_w_radius),
        real(b.bracket_main_quarter),
        opt(b.bracket_main_half),
        opt(b.bracket_k14),
        opt(b.bracket_dkw),
        b.regime.name().to_string(),
        real(b.necessary_stat),
        real(b.threshold_ratio),
    ]
}

fn sweep(s: &Settings, args: &SweepArgs) -> Outcome<Rendered> {
    let path = s
        .pick(args.curve.clone(), "curve")?
        .ok_or_else(|| Failure::Invalid("missing --curve".into()))?;
    let curve = config::load_curve(&path)?;
    let samples = s.samples(100_000)?;
    let seed = s.seed()?;
    let rows = convergence_sweep(&curve, samples, seed, s.threads()?)?;
    let mut table = Table::new(&SWEEP_COLUMNS);
    let mut list = Vec::new();
    for r in &rows {
        let cells = sweep_row(r);
        list.push(Value::Object(
            SWEEP_COLUMNS
                .iter()
                .zip(&cells)
                .map(|(k, v)| (k.to_string(), cell_json(v)))
                .collect(),
        ));
        table.push(cells);
    }
    let json = json!({
        "command": "sweep",
        "samples": samples,
        "seed": seed,
        "slope": rate_slope(&rows),
        "rows": list,
    });
    Ok(Rendered { json, table })
}

/// Typed JSON value for a CSV cell: integers and reals become numbers,
/// empty cells null, anything else a string.
fn cell_json(v: &str) -> Value {
    if v.is_empty() {
        Value::Null
    } else if let Ok(i) = v.parse::<u64>() {
        json!(i)
    } else if let Ok(x) = v.parse::<f64>() {
        json!(x)
    } else {
        json!(v)
    }
}

fn sample(s: &Settings) -> Outcome<Rendered> {
    let params = s.params()?;
    let seed = s.seed()?;
    let samples = s.samples(10)?;
    let sampler = EdgeCountSampler::new(params)?;
    let counts: Vec<u64> = (0..samples).map(|r| sampler.sample(seed, r)).collect();
    let mut json = params_json(&params);
    json["command"] = json!("sample");
    json["seed"] = json!(seed);
    json["strategy"] = json!(sampler.strategy().name());
    json["edge_counts"] = json!(counts);
    let mut table = Table::new(&["replicate", "edge_count"]);
    for (r, c) in counts.iter().enumerate() {
        table.push(vec![r.to_string(), c.to_string()]);
    }
    Ok(Rendered { json, table })
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn run(cli: Cli) -> Outcome<()> {
    let (common, default_format) = match &cli.command {
        Command::Sweep(a) => (&a.common, Format::Csv),
        Command::Prob(a) => (&a.common, Format::Json),
        Command::Norms(a) => (&a.common, Format::Json),
        Command::Moments(c) | Command::Bounds(c) | Command::Exact(c) | Command::Mc(c) | Command::Sample(c) => {
            (c, Format::Json)
        }
    };
    let settings = Settings::new(common.clone())?;
    let format = settings.format(default_format)?;
    let s = &settings;
    let rendered = match &cli.command {
        Command::Mc(_) => mc(s)?,
        Command::Sweep(a) => sweep(s, a)?,
        Command::Moments(_) => single_threaded(|| moments(s))?,
        Command::Prob(a) => single_threaded(|| prob(s, a))?,
        Command::Norms(a) => single_threaded(|| norms(s, a))?,
        Command::Bounds(_) => single_threaded(|| bounds(s))?,
        Command::Exact(_) => single_threaded(|| exact(s))?,
        Command::Sample(_) => single_threaded(|| sample(s))?,
    };
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&rendered.json).expect("json serializes") + "\n",
        Format::Csv => rendered.table.to_csv()?,
    };
    output::write(settings.out()?.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, message) = match failure {
                Failure::Invalid(m) => (2, m),
                Failure::Budget(m) => (3, m),
                Failure::Io(m) => (1, m),
            };
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
