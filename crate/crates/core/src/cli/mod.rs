//! The `cbn` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 numeric (zero
//! probability evidence). Diagnostics go to stderr as `error[<kind>]: ...`.
//! Commands that write files also write a run manifest; `cbn replay` re-runs
//! one and checks every output digest.

mod manifest;
pub mod serve;

use std::ffi::OsString;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

pub use manifest::{schema_digest, sha256_hex, FileDigest, Recorder, RunManifest, MANIFEST_FORMAT};

use crate::bn::{BnError, CausalBayesianNetwork};
use crate::bootstrap::{
    average_graph, bootstrap_runs_with_progress, collect_runs, BootstrapConfig, ConfidenceMatrix,
};
use crate::data::{
    infer_variables, inject_missing, read_table_str, train_test_split, write_table_string, CohortSchema, DataError,
    Mechanism, MissingnessSpec,
};
use crate::eval::{
    baseline_auc, evaluate, grid_search, predict_risk, scatter_table, GridConfig, GridResult,
    DEFAULT_CI_RESAMPLES,
};
use crate::graph::{Constraints, Dag, GraphError, PriorKnowledge};
use crate::params::{em_fit, EmConfig, EmInit};
use crate::structure::{ScoreConfig, SemConfig};
use crate::{Dataset, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 3,
            ErrorKind::Validation => 4,
            ErrorKind::Numeric => 5,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ErrorKind::Io => "io",
            ErrorKind::Validation => "validation",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind.label(), self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = if e.is_numeric() {
            ErrorKind::Numeric
        } else if matches!(e, Error::Data(DataError::Io { .. })) {
            ErrorKind::Io
        } else {
            ErrorKind::Validation
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Error::from(e).into()
    }
}

impl From<BnError> for CliError {
    fn from(e: BnError) -> Self {
        Error::from(e).into()
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cbn", version, about = "Causal Bayesian network discovery and risk prediction")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bootstrap Structural EM, confidence matrix and averaged network.
    Discover(DiscoverArgs),
    /// EM parameters for a given graph.
    Fit(FitArgs),
    /// Posterior of the target for every record.
    Predict(PredictArgs),
    /// ROC/AUC report from scored records.
    Eval(EvalArgs),
    /// Train/test split and a grid of discovery settings.
    Gridsearch(GridArgs),
    /// Forward-sample a dataset and blank cells.
    Simulate(SimulateArgs),
    /// Write the built-in cohort schema, prior knowledge and reference model.
    Cohort(CohortArgs),
    /// Re-run a manifest and check that every output is byte-identical.
    Replay(ReplayArgs),
    /// Serve a model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV with a header row of variable names.
    #[arg(long)]
    data: PathBuf,
    /// Schema file fixing variables, states and tiers; inferred from the data otherwise.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Cell text meaning missing, in addition to the empty cell and `NA`.
    #[arg(long, default_value = "")]
    missing_token: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Uniform,
    SeededRandom,
}

#[derive(Debug, Args)]
struct EmArgs {
    /// Equivalent sample size of the Dirichlet prior for parameters.
    #[arg(long, default_value_t = 1.0)]
    ess: f64,
    #[arg(long, default_value_t = 100)]
    max_em_iter: usize,
    /// Relative log-likelihood change that stops EM.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    init: InitArg,
}

impl EmArgs {
    fn config(&self, seed: u64) -> EmConfig {
        EmConfig {
            max_iterations: self.max_em_iter,
            tolerance: self.tol,
            ess: self.ess,
            init: match self.init {
                InitArg::Uniform => EmInit::Uniform,
                InitArg::SeededRandom => EmInit::SeededRandom,
            },
            seed,
        }
    }
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Prior knowledge file; the schema's tiers apply when omitted.
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Number of bootstraps.
    #[arg(long)]
    n: usize,
    /// Records per bootstrap; defaults to the dataset size.
    #[arg(long)]
    m: Option<usize>,
    /// Confidence threshold for the averaged graph.
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, default_value_t = 20)]
    max_sem_iter: usize,
    /// Dirichlet smoothing inside the structure score.
    #[arg(long, default_value_t = 0.0)]
    score_ess: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Report bootstrap progress on stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Edge list, one `source -> target` per line.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "")]
    missing_token: String,
    #[arg(long)]
    target: String,
    /// Target state whose probability is the score.
    #[arg(long)]
    positive: String,
    /// Scores file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Scores file written by `predict`.
    #[arg(long)]
    scores: PathBuf,
    /// Label counted as positive.
    #[arg(long)]
    positive: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_CI_RESAMPLES)]
    ci_resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file to write.
    #[arg(long)]
    out: PathBuf,
    /// ROC curve file to write.
    #[arg(long)]
    roc: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Grid file (JSON): a list of configurations or an object of value lists.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    positive: String,
    /// Share of records in the training set.
    #[arg(long, default_value_t = 0.7)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Keep target-state proportions equal across the split.
    #[arg(long)]
    stratify: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Model to sample from.
    #[arg(long, conflicts_with = "reference_cohort", required_unless_present = "reference_cohort")]
    model: Option<PathBuf>,
    /// Sample from the built-in reference cohort network.
    #[arg(long)]
    reference_cohort: bool,
    /// Include the Hospital context variable in the reference cohort.
    #[arg(long, requires = "reference_cohort")]
    hospital: bool,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `mcar:RATE:VAR`, `mar:RATE:VAR:DRIVER` or `mnar:RATE:VAR`; VAR `*` means every unprotected variable.
    #[arg(long)]
    missing: Vec<String>,
    /// Variable never blanked by a `*` pattern.
    #[arg(long)]
    protect: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CohortArgs {
    #[arg(long)]
    hospital: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Confidence matrix from `discover`, for edge strengths.
    #[arg(long, requires = "bootstraps")]
    confidence: Option<PathBuf>,
    /// Bootstrap count behind `--confidence`.
    #[arg(long, requires = "confidence")]
    bootstraps: Option<usize>,
    #[arg(long)]
    target: String,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let raw: Option<Vec<String>> = args.iter().skip(1).map(|a| a.to_str().map(String::from)).collect();
    let Some(raw) = raw else {
        eprintln!("{}", CliError::validation("arguments must be valid UTF-8"));
        return ErrorKind::Validation.exit_code();
    };
    match run(cli, &raw) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.kind.exit_code()
        }
    }
}

fn run(cli: Cli, raw: &[String]) -> CliResult<()> {
    match cli.command {
        Command::Discover(a) => discover(a, raw),
        Command::Fit(a) => fit(a, raw),
        Command::Predict(a) => predict(a, raw),
        Command::Eval(a) => eval(a, raw),
        Command::Gridsearch(a) => gridsearch(a, raw),
        Command::Simulate(a) => simulate(a, raw),
        Command::Cohort(a) => cohort(a, raw),
        Command::Replay(a) => replay(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn load_data(rec: &mut Recorder, args: &DataArgs) -> CliResult<(Dataset, Option<CohortSchema>)> {
    let text = rec.read("data", &args.data)?;
    let schema = match &args.schema {
        Some(p) => Some(CohortSchema::parse(&rec.read("schema", p)?)?),
        None => None,
    };
    let variables = match &schema {
        Some(s) => s.variables().to_vec(),
        None => infer_variables(&text, &args.missing_token)?,
    };
    let data = read_table_str(&text, &variables, &args.missing_token)?;
    rec.schema(data.variables());
    Ok((data, schema))
}

fn load_knowledge(
    rec: &mut Recorder,
    path: Option<&Path>,
    schema: Option<&CohortSchema>,
    names: &[String],
) -> CliResult<(PriorKnowledge, Constraints)> {
    let k = match (path, schema) {
        (Some(p), _) => {
            let (mut k, contexts) = PriorKnowledge::parse(&rec.read("knowledge", p)?)?;
            for c in contexts {
                k = k.with_context_variable(&c, names)?;
            }
            k
        }
        (None, Some(s)) => s.prior_knowledge(),
        (None, None) => PriorKnowledge::none(),
    };
    let compiled = k.compile(names)?;
    Ok((k, compiled))
}

fn sem_config(em: &EmArgs, seed: u64, max_sem_iter: usize, score_ess: f64) -> SemConfig {
    SemConfig {
        em: em.config(seed),
        max_sem_iterations: max_sem_iter,
        score: ScoreConfig {
            ess: score_ess,
            ..ScoreConfig::default()
        },
    }
}

fn discover(a: DiscoverArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("discover", raw);
    let (data, schema) = load_data(&mut rec, &a.data)?;
    let names = data.names();
    let (knowledge, k) = load_knowledge(&mut rec, a.knowledge.as_deref(), schema.as_ref(), &names)?;
    if !(0.0..=1.0).contains(&a.lambda) {
        return Err(CliError::validation(format!("lambda {} outside [0, 1]", a.lambda)));
    }
    let cfg = BootstrapConfig {
        n: a.n,
        m: a.m,
        seed: a.seed,
        sem: sem_config(&a.em, a.seed, a.max_sem_iter, a.score_ess),
    };
    cfg.validate()?;
    rec.seed("bootstrap", a.seed);
    rec.config(json!({
        "bootstrap": cfg,
        "lambda": a.lambda,
        "knowledge": knowledge.to_text(),
    }));

    let total = a.n;
    let show = a.progress;
    let progress = move |done: usize| {
        if show {
            eprintln!("bootstrap {done}/{total}");
        }
    };
    let runs = bootstrap_runs_with_progress(&data, &k, &cfg, &progress)?;
    let graphs = collect_runs(&runs)?;
    let confidence = ConfidenceMatrix::from_graphs(names.clone(), &graphs)?;
    let (dag, report) = average_graph(&confidence, a.lambda, &k)?;
    let fit = em_fit(&dag, &data, &cfg.sem.em)?;

    let out = &a.out;
    rec.write("confidence", &out.join("confidence.tsv"), confidence.to_text().as_bytes())?;
    rec.write("strengths", &out.join("strengths.tsv"), confidence.strength_list().as_bytes())?;
    rec.write("graph", &out.join("graph.txt"), dag.to_edge_list().as_bytes())?;
    rec.write("model", &out.join("model.json"), fit.network.to_model_json().as_bytes())?;
    let summary = json!({
        "bootstraps": a.n,
        "lambda": a.lambda,
        "edges": dag.edge_count(),
        "averaging": report,
        "em": {
            "iterations": fit.iterations,
            "converged": fit.converged,
            "log_likelihood": fit.log_likelihood,
        },
    });
    rec.write("report", &out.join("report.json"), pretty(&summary).as_bytes())?;
    rec.save(&out.join("manifest.json"))?;
    println!(
        "{} edges at lambda {} from {} bootstraps; outputs in {}",
        dag.edge_count(),
        a.lambda,
        a.n,
        out.display()
    );
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn manifest_path(explicit: Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

fn fit(a: FitArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("fit", raw);
    let (data, _) = load_data(&mut rec, &a.data)?;
    let dag = Dag::from_edge_list(data.names(), &rec.read("graph", &a.graph)?)?;
    let cfg = a.em.config(a.seed);
    rec.seed("em", a.seed);
    rec.config(json!({ "em": cfg }));
    let fit = em_fit(&dag, &data, &cfg)?;
    rec.write("model", &a.out, fit.network.to_model_json().as_bytes())?;
    rec.save(&manifest_path(a.manifest, &a.out))?;
    println!(
        "EM: {} iterations, converged {}, log-likelihood {:.6}",
        fit.iterations, fit.converged, fit.log_likelihood
    );
    Ok(())
}

fn load_model(rec: &mut Recorder, path: &Path) -> CliResult<CausalBayesianNetwork> {
    Ok(CausalBayesianNetwork::from_model_json(&rec.read("model", path)?)?)
}

fn predict(a: PredictArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("predict", raw);
    let bn = load_model(&mut rec, &a.model)?;
    let text = rec.read("data", &a.data)?;
    let data = read_table_str(&text, bn.variables(), &a.missing_token)?;
    rec.schema(data.variables());
    rec.config(json!({ "target": a.target, "positive": a.positive }));
    let scores = predict_risk(&bn, &data, &a.target, &a.positive)?;
    let target = data.index_of(&a.target)?;
    let states = data.variables()[target].states();
    let mut out = String::from("record\tscore\tlabel\n");
    for (i, (s, r)) in scores.iter().zip(data.records()).enumerate() {
        let score = s.map_or_else(|| "undefined".to_string(), |x| format!("{x:?}"));
        let label = r[target].map_or("", |j| states[j].as_str());
        out.push_str(&format!("{i}\t{score}\t{label}\n"));
    }
    rec.write("scores", &a.out, out.as_bytes())?;
    rec.save(&manifest_path(a.manifest, &a.out))?;
    let undefined = scores.iter().filter(|s| s.is_none()).count();
    println!("scored {} records ({undefined} undefined)", scores.len());
    Ok(())
}

/// Scores and labels per record.
pub type ScoredRecords = (Vec<Option<f64>>, Vec<Option<bool>>);

/// Reads a `record\tscore\tlabel` file. `undefined` scores and empty labels
/// become `None`.
pub fn parse_scores(text: &str, positive: &str) -> CliResult<ScoredRecords> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.split('\t').collect::<Vec<_>>() == ["record", "score", "label"] => {}
        _ => return Err(CliError::validation("scores file must start with `record\\tscore\\tlabel`")),
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(CliError::validation(format!("scores line {}: expected 3 columns", n + 2)));
        }
        let score = match cols[1] {
            "undefined" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|x| (0.0..=1.0).contains(x))
                    .ok_or_else(|| CliError::validation(format!("scores line {}: bad score `{s}`", n + 2)))?,
            ),
        };
        scores.push(score);
        labels.push(if cols[2].is_empty() { None } else { Some(cols[2] == positive) });
    }
    Ok((scores, labels))
}

fn eval(a: EvalArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("eval", raw);
    let (scores, labels) = parse_scores(&rec.read("scores", &a.scores)?, &a.positive)?;
    rec.seed("ci", a.seed);
    rec.config(json!({ "thresholds": a.thresholds, "ci_resamples": a.ci_resamples, "positive": a.positive }));
    let report = evaluate(&scores, &labels, &a.thresholds, a.ci_resamples, a.seed)?;
    rec.write("report", &a.out, report.to_text().as_bytes())?;
    if let Some(roc) = &a.roc {
        rec.write("roc", roc, report.roc.to_text().as_bytes())?;
    }
    rec.save(&manifest_path(a.manifest, &a.out))?;
    match report.ci {
        Some((lo, hi)) => println!("AUC {:.4} (95% CI {lo:.4}-{hi:.4})", report.auc),
        None => println!("AUC {:.4}", report.auc),
    }
    Ok(())
}

/// Cartesian grid: every combination of `n`, `m` and `lambda`, in that
/// nesting order, sharing one seed and search setting.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    n: Vec<usize>,
    #[serde(default = "default_m")]
    m: Vec<Option<usize>>,
    lambda: Vec<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    sem: SemConfig,
}

fn default_m() -> Vec<Option<usize>> {
    vec![None]
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridFile {
    List(Vec<GridConfig>),
    Product(GridSpec),
}

/// Expands a grid file into configurations.
pub fn parse_grid(text: &str) -> CliResult<Vec<GridConfig>> {
    let file: GridFile = serde_json::from_str(text).map_err(|e| CliError::validation(format!("grid file: {e}")))?;
    Ok(match file {
        GridFile::List(v) => v,
        GridFile::Product(g) => {
            let mut out = Vec::new();
            for &n in &g.n {
                for &m in &g.m {
                    for &lambda in &g.lambda {
                        out.push(GridConfig {
                            n,
                            m,
                            lambda,
                            seed: g.seed,
                            sem: g.sem.clone(),
                        });
                    }
                }
            }
            out
        }
    })
}

fn results_table(results: &[GridResult]) -> String {
    let mut s = String::from("rank\tindex\tn\tm\tlambda\tseed\tin_sample_auc\tout_of_sample_auc\ttarget_parents\tstatus\n");
    for (rank, r) in results.iter().enumerate() {
        let c = &r.config;
        let m = c.m.map_or_else(|| "all".to_string(), |m| m.to_string());
        let (ins, oos, parents, status) = match &r.outcome {
            Ok(g) => (
                format!("{:.6}", g.in_sample_auc),
                format!("{:.6}", g.out_of_sample_auc),
                g.target_parents.join(","),
                "ok".to_string(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), format!("failed: {e}")),
        };
        s.push_str(&format!(
            "{}\t{}\t{}\t{m}\t{}\t{}\t{ins}\t{oos}\t{parents}\t{status}\n",
            rank + 1,
            r.index,
            c.n,
            c.lambda,
            c.seed
        ));
    }
    s
}

fn gridsearch(a: GridArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("gridsearch", raw);
    let (data, schema) = load_data(&mut rec, &a.data)?;
    let names = data.names();
    let (knowledge, k) = load_knowledge(&mut rec, a.knowledge.as_deref(), schema.as_ref(), &names)?;
    let grid = parse_grid(&rec.read("grid", &a.grid)?)?;
    let stratify = a.stratify.then_some(a.target.as_str());
    let (train, test) = train_test_split(&data, a.ratio, a.split_seed, stratify)?;
    rec.seed("split", a.split_seed);
    for (i, c) in grid.iter().enumerate() {
        rec.seed(&format!("grid.{i}"), c.seed);
    }
    rec.config(json!({
        "grid": grid,
        "ratio": a.ratio,
        "stratify": a.stratify,
        "target": a.target,
        "positive": a.positive,
        "knowledge": knowledge.to_text(),
    }));
    let results = grid_search(&train, &test, &k, &grid, &a.target, &a.positive)?;
    let baseline_em = grid.first().map(|c| c.sem.em.clone()).unwrap_or_default();
    let baseline = baseline_auc(&train, &test, &a.target, &a.positive, &baseline_em)?;

    let out = &a.out;
    rec.write("results", &out.join("results.tsv"), results_table(&results).as_bytes())?;
    rec.write("scatter", &out.join("scatter.tsv"), scatter_table(&results).as_bytes())?;
    let summary = json!({
        "train_records": train.len(),
        "test_records": test.len(),
        "baseline_auc": baseline,
        "results": results,
    });
    rec.write("summary", &out.join("results.json"), pretty(&summary).as_bytes())?;
    rec.save(&out.join("manifest.json"))?;
    let ok = results.iter().filter(|r| r.outcome.is_ok()).count();
    println!("{ok}/{} configurations completed; baseline AUC {baseline:.4}", results.len());
    if let Some(best) = results.first().and_then(|r| r.out_of_sample_auc().map(|x| (r, x))) {
        println!("best: n={} lambda={} out-of-sample AUC {:.4}", best.0.config.n, best.0.config.lambda, best.1);
    }
    Ok(())
}

/// One `--missing` pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingPattern {
    pub mechanism: Mechanism,
    pub rate: f64,
    /// `None` for `*`.
    pub variable: Option<String>,
}

pub fn parse_missing(text: &str) -> CliResult<MissingPattern> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::validation(format!("bad missingness pattern `{text}`"));
    let rate: f64 = parts.get(1).and_then(|r| r.parse().ok()).ok_or_else(bad)?;
    let mechanism = match (parts[0], parts.len()) {
        ("mcar", 3) => Mechanism::Mcar,
        ("mnar", 3) => Mechanism::Mnar,
        ("mar", 4) => Mechanism::Mar {
            driver: parts[3].to_string(),
        },
        _ => return Err(bad()),
    };
    let variable = match parts[2] {
        "*" => None,
        v => Some(v.to_string()),
    };
    Ok(MissingPattern {
        mechanism,
        rate,
        variable,
    })
}

/// Seed of pattern `p` on column `column`: `seed + 1 + p * width + column`
/// (wrapping). Sampling itself uses `seed`.
pub fn missing_seed(seed: u64, pattern: usize, width: usize, column: usize) -> u64 {
    seed.wrapping_add(1 + (pattern * width + column) as u64)
}

/// Applies the patterns in order. `*` skips protected variables, the MAR
/// driver and columns an earlier pattern already blanked.
pub fn apply_missing(data: &Dataset, patterns: &[MissingPattern], protect: &[String], seed: u64) -> CliResult<Dataset> {
    for p in protect {
        data.index_of(p)?;
    }
    let names = data.names();
    let mut touched = vec![false; names.len()];
    let mut out = data.clone();
    for (pi, p) in patterns.iter().enumerate() {
        let columns: Vec<usize> = match &p.variable {
            Some(v) => vec![data.index_of(v)?],
            None => (0..names.len())
                .filter(|&i| !touched[i] && !protect.contains(&names[i]))
                .filter(|&i| !matches!(&p.mechanism, Mechanism::Mar { driver } if *driver == names[i]))
                .collect(),
        };
        for c in columns {
            let spec = MissingnessSpec {
                mechanism: p.mechanism.clone(),
                rate: p.rate,
                target: names[c].clone(),
                seed: missing_seed(seed, pi, names.len(), c),
            };
            out = inject_missing(&out, &spec)?;
            touched[c] = true;
        }
    }
    Ok(out)
}

fn simulate(a: SimulateArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("simulate", raw);
    let bn = match &a.model {
        Some(p) => load_model(&mut rec, p)?,
        None => CohortSchema::endometrial(a.hospital).reference_network()?,
    };
    let patterns = a.missing.iter().map(|m| parse_missing(m)).collect::<CliResult<Vec<_>>>()?;
    rec.schema(bn.variables());
    rec.seed("sample", a.seed);
    rec.config(json!({
        "count": a.count,
        "reference_cohort": a.reference_cohort,
        "hospital": a.hospital,
        "missing": a.missing,
        "protect": a.protect,
    }));
    let complete = bn.sample(a.count, a.seed);
    let data = apply_missing(&complete, &patterns, &a.protect, a.seed)?;
    rec.write("data", &a.out, write_table_string(&data)?.as_bytes())?;
    rec.save(&manifest_path(a.manifest, &a.out))?;
    println!("{} records, {} missing cells", data.len(), data.missing_count());
    Ok(())
}

fn cohort(a: CohortArgs, raw: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("cohort", raw);
    let schema = CohortSchema::endometrial(a.hospital);
    rec.schema(schema.variables());
    rec.config(json!({ "hospital": a.hospital }));
    let out = &a.out;
    rec.write("schema", &out.join("schema.txt"), schema.to_text().as_bytes())?;
    rec.write("knowledge", &out.join("knowledge.txt"), schema.prior_knowledge().to_text().as_bytes())?;
    rec.write(
        "model",
        &out.join("reference.model.json"),
        schema.reference_network()?.to_model_json().as_bytes(),
    )?;
    rec.save(&out.join("manifest.json"))?;
    Ok(())
}

fn replay(a: ReplayArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
    let m = RunManifest::from_json(&text)?;
    if m.command == "replay" || m.command == "serve" {
        return Err(CliError::validation(format!("`{}` runs are not replayable", m.command)));
    }
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        return Err(CliError::validation(format!("inputs changed since the run: {}", paths(&changed))));
    }
    let argv = std::iter::once("cbn".to_string()).chain(m.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::validation(format!("manifest arguments: {e}")))?;
    run(cli, &m.args)?;
    let differing = m.changed_outputs()?;
    if !differing.is_empty() {
        return Err(CliError {
            kind: ErrorKind::Numeric,
            message: format!("outputs differ from the manifest: {}", paths(&differing)),
        });
    }
    println!("replay: {} outputs byte-identical", m.outputs.len());
    Ok(())
}

fn paths(p: &[PathBuf]) -> String {
    p.iter().map(|x| x.display().to_string()).collect::<Vec<_>>().join(", ")
}

fn serve_cmd(a: ServeArgs) -> CliResult<()> {
    let mut rec = Recorder::new("serve", &[]);
    let bn = load_model(&mut rec, &a.model)?;
    let confidence = match &a.confidence {
        Some(p) => {
            let text = rec.read("confidence", p)?;
            let n = a.bootstraps.expect("clap enforces --bootstraps");
            Some(ConfidenceMatrix::from_text(&text, n)?)
        }
        None => None,
    };
    let state = serve::ServeState::new(bn, &a.target, confidence)?;
    serve::run(state, a.addr).map_err(|e| CliError {
        kind: ErrorKind::Io,
        message: format!("{}: {e}", a.addr),
    })
}
