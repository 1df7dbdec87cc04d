//! Bootstrap edge confidence and the model-averaged network.
//!
//! Each bootstrap draws `m` records with replacement and runs Structural EM
//! on them; the confidence of an edge is the fraction of bootstrap graphs
//! containing it. The averaged graph keeps the required edges and then adds
//! edges whose confidence reaches a threshold, strongest first.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bn::CausalBayesianNetwork;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Constraints, Dag, GraphError};
use crate::params::{em_fit, EmConfig, EmFit};
use crate::structure::{structural_em, SemConfig};

/// `m` records drawn uniformly with replacement; missing cells are kept.
pub fn resample(data: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    if data.is_empty() {
        return Err(Error::Precondition("cannot resample an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..m).map(|_| rng.random_range(0..data.len())).collect();
    Ok(data.subset(&picks))
}

/// Seed of bootstrap `i`, used for both its resample and its EM init.
pub fn bootstrap_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstraps.
    pub n: usize,
    /// Records per bootstrap; `None` draws as many as the dataset holds.
    pub m: Option<usize>,
    pub seed: u64,
    pub sem: SemConfig,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Precondition("need at least one bootstrap".into()));
        }
        if self.m == Some(0) {
            return Err(Error::Precondition("bootstrap sample size must be positive".into()));
        }
        self.sem.validate()
    }
}

/// Edge inclusion counts over `n` bootstrap graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfidenceMatrix {
    nodes: Vec<String>,
    counts: Vec<usize>,
    n: usize,
}

impl ConfidenceMatrix {
    pub fn from_graphs(nodes: Vec<String>, graphs: &[Dag]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Precondition("confidence needs at least one graph".into()));
        }
        let size = nodes.len();
        let mut counts = vec![0usize; size * size];
        for g in graphs {
            if g.nodes() != nodes.as_slice() {
                return Err(Error::Precondition("bootstrap graph has a different node list".into()));
            }
            for (a, b) in g.edges() {
                counts[a * size + b] += 1;
            }
        }
        Ok(ConfidenceMatrix {
            nodes,
            counts,
            n: graphs.len(),
        })
    }

    /// Builds a matrix from explicit inclusion counts out of `n` graphs.
    pub fn from_counts(nodes: Vec<String>, counts: Vec<usize>, n: usize) -> Result<Self> {
        let size = nodes.len();
        if n == 0 || counts.len() != size * size {
            return Err(Error::Precondition("count matrix has the wrong shape".into()));
        }
        if counts.iter().any(|&c| c > n) || (0..size).any(|i| counts[i * size + i] != 0) {
            return Err(Error::Precondition("counts exceed the graph count or touch the diagonal".into()));
        }
        Ok(ConfidenceMatrix { nodes, counts, n })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of graphs the counts come from.
    pub fn graphs(&self) -> usize {
        self.n
    }

    pub fn count(&self, from: usize, to: usize) -> usize {
        self.counts[from * self.len() + to]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.count(from, to) as f64 / self.n as f64
    }

    pub fn max(&self) -> f64 {
        self.counts.iter().copied().max().unwrap_or(0) as f64 / self.n as f64
    }

    /// Tab-separated table with a node header row and column, six decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for name in &self.nodes {
            s.push('\t');
            s.push_str(name);
        }
        s.push('\n');
        for (i, name) in self.nodes.iter().enumerate() {
            s.push_str(name);
            for j in 0..self.len() {
                write!(s, "\t{:.6}", self.get(i, j)).expect("string write");
            }
            s.push('\n');
        }
        s
    }

    /// Reads [`to_text`](Self::to_text) output back, given the number of
    /// graphs behind it. Entries must be within rounding of a multiple of
    /// `1/n`.
    pub fn from_text(text: &str, n: usize) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Precondition(format!("confidence table line {line}: {what}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(1, "empty"))?
            .split('\t')
            .skip(1)
            .map(str::to_string)
            .collect();
        let size = header.len();
        let mut counts = Vec::with_capacity(size * size);
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split('\t').collect();
            if i >= size || cells.len() != size + 1 || cells[0] != header[i] {
                return Err(bad(i + 2, "row does not match the header"));
            }
            for cell in &cells[1..] {
                let v: f64 = cell.trim().parse().map_err(|_| bad(i + 2, "not a number"))?;
                let c = (v * n as f64).round();
                if !(0.0..=n as f64).contains(&c) || (c / n as f64 - v).abs() > 5e-6 {
                    return Err(bad(i + 2, "entry is not a multiple of 1/n"));
                }
                counts.push(c as usize);
            }
        }
        if counts.len() != size * size {
            return Err(bad(size + 1, "missing rows"));
        }
        ConfidenceMatrix::from_counts(header, counts, n)
    }

    /// Nonzero edges as `source\ttarget\tconfidence`, strongest first, ties
    /// in node order.
    pub fn strength_list(&self) -> String {
        let mut s = String::from("source\ttarget\tconfidence\n");
        for (a, b) in self.ranked_edges(|_, _| true) {
            writeln!(s, "{}\t{}\t{:.6}", self.nodes[a], self.nodes[b], self.get(a, b)).expect("string write");
        }
        s
    }

    /// Edges with nonzero count passing `keep`, by descending count, ties by
    /// `(from, to)`.
    fn ranked_edges(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
        let size = self.len();
        let mut edges: Vec<(usize, usize)> = (0..size)
            .flat_map(|a| (0..size).map(move |b| (a, b)))
            .filter(|&(a, b)| self.count(a, b) > 0 && keep(a, b))
            .collect();
        edges.sort_by(|x, y| self.count(y.0, y.1).cmp(&self.count(x.0, x.1)).then(x.cmp(y)));
        edges
    }
}

/// Structural EM on each bootstrap resample, in bootstrap order, keeping
/// every run's outcome.
pub fn bootstrap_runs(data: &Dataset, k: &Constraints, cfg: &BootstrapConfig) -> Result<Vec<Result<Dag>>> {
    bootstrap_runs_with_progress(data, k, cfg, &|_| {})
}

/// [`bootstrap_runs`], calling `progress` with the number of finished runs
/// after each one. Calls may arrive from worker threads.
pub fn bootstrap_runs_with_progress(
    data: &Dataset,
    k: &Constraints,
    cfg: &BootstrapConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<Vec<Result<Dag>>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Precondition("bootstrap needs a nonempty dataset".into()));
    }
    let m = cfg.m.unwrap_or(data.len());
    let done = AtomicUsize::new(0);
    Ok((0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let seed = bootstrap_seed(cfg.seed, i);
            let sample = resample(data, m, seed)?;
            let mut sem = cfg.sem.clone();
            sem.em.seed = seed;
            let out = structural_em(&sample, k, &sem).map(|o| o.dag);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1);
            out
        })
        .collect())
}

/// The first failure among bootstrap outcomes, tagged with its index.
pub fn collect_runs(runs: &[Result<Dag>]) -> Result<Vec<Dag>> {
    runs.iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok(d) => Ok(d.clone()),
            Err(e) => Err(Error::Bootstrap {
                index,
                source: Box::new(Error::Precondition(e.to_string())),
            }),
        })
        .collect()
}

/// Structural EM on each bootstrap resample, in bootstrap order.
pub fn bootstrap_graphs(data: &Dataset, k: &Constraints, cfg: &BootstrapConfig) -> Result<Vec<Dag>> {
    let runs = bootstrap_runs(data, k, cfg)?;
    let mut graphs = Vec::with_capacity(runs.len());
    for (index, r) in runs.into_iter().enumerate() {
        graphs.push(r.map_err(|e| Error::Bootstrap {
            index,
            source: Box::new(e),
        })?);
    }
    Ok(graphs)
}

/// Inclusion frequency of every edge across `cfg.n` bootstrap graphs.
pub fn confidence_matrix(data: &Dataset, k: &Constraints, cfg: &BootstrapConfig) -> Result<ConfidenceMatrix> {
    ConfidenceMatrix::from_graphs(data.names(), &bootstrap_graphs(data, k, cfg)?)
}

/// What the averaging step left out.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AverageReport {
    /// Antiparallel pairs above the threshold with equal confidence and no
    /// tier to orient them; neither direction is inserted.
    pub dropped_ties: Vec<(String, String)>,
    /// Candidates skipped because they would close a cycle.
    pub skipped_cycles: Vec<(String, String)>,
}

/// Averaged graph at threshold `lambda`: required edges, then every edge
/// with confidence at least `lambda` (and above zero), strongest first,
/// skipping forbidden edges and cycle-makers. Of two antiparallel
/// candidates only the stronger is considered; equal strengths are oriented
/// by tier or dropped.
pub fn average_graph(c: &ConfidenceMatrix, lambda: f64, k: &Constraints) -> Result<(Dag, AverageReport)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Precondition(format!("threshold {lambda} outside [0, 1]")));
    }
    if k.len() != c.len() {
        return Err(Error::Precondition("constraints and confidence matrix differ in size".into()));
    }
    let mut dag = k.seed_graph(c.nodes().to_vec()).map_err(|e| match e {
        GraphError::Cyclic(_) => Error::Graph(GraphError::InfeasibleKnowledge("required edges form a cycle".into())),
        other => Error::Graph(other),
    })?;
    let mut report = AverageReport::default();
    let passes = |a: usize, b: usize| c.get(a, b) >= lambda && !k.is_forbidden(a, b);
    let name = |a: usize| c.nodes()[a].clone();
    let candidates = c.ranked_edges(|a, b| {
        if !passes(a, b) || dag.has_edge(a, b) {
            return false;
        }
        if !passes(b, a) {
            return true;
        }
        match c.count(a, b).cmp(&c.count(b, a)) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match (k.tier(a), k.tier(b)) {
                (Some(ta), Some(tb)) if ta != tb => ta < tb,
                _ => false,
            },
        }
    });
    let size = c.len();
    for a in 0..size {
        for b in (a + 1)..size {
            let tied = passes(a, b)
                && passes(b, a)
                && c.count(a, b) == c.count(b, a)
                && c.count(a, b) > 0
                && !matches!((k.tier(a), k.tier(b)), (Some(ta), Some(tb)) if ta != tb)
                && !dag.has_edge(a, b)
                && !dag.has_edge(b, a);
            if tied {
                report.dropped_ties.push((name(a), name(b)));
            }
        }
    }
    for (a, b) in candidates {
        if dag.has_edge(b, a) || dag.reaches(b, a, None) {
            report.skipped_cycles.push((name(a), name(b)));
            continue;
        }
        dag = dag.apply_move(&crate::graph::EditMove::add(a, b), k)?;
    }
    Ok((dag, report))
}

#[derive(Debug, Clone)]
pub struct LearnedCbn {
    pub network: CausalBayesianNetwork,
    pub confidence: ConfidenceMatrix,
    pub report: AverageReport,
    pub em: EmFit,
}

/// Averages `confidence` at `lambda` and fits parameters on the full data.
pub fn fit_average(
    data: &Dataset,
    k: &Constraints,
    confidence: ConfidenceMatrix,
    lambda: f64,
    em: &EmConfig,
) -> Result<LearnedCbn> {
    let (dag, report) = average_graph(&confidence, lambda, k)?;
    let fit = em_fit(&dag, data, em)?;
    Ok(LearnedCbn {
        network: fit.network.clone(),
        confidence,
        report,
        em: fit,
    })
}

/// Confidence matrix, averaged graph at `lambda`, then EM parameters on the
/// full (incomplete) data.
pub fn learn_cbn(data: &Dataset, k: &Constraints, cfg: &BootstrapConfig, lambda: f64) -> Result<LearnedCbn> {
    let confidence = confidence_matrix(data, k, cfg)?;
    fit_average(data, k, confidence, lambda, &cfg.sem.em)
}
