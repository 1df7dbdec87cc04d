//! Score-based structure search: decomposable BIC, hill climbing under
//! prior-knowledge constraints, and Structural EM.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Constraints, Dag, EditMove, MoveKind};
use crate::params::{em_run, normalize_counts, EmConfig, ExpectedData};

/// Improvements at or below this are treated as ties with the current graph.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    /// Smoothing applied to the family parameters inside the likelihood term.
    pub ess: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            kind: ScoreKind::Bic,
            ess: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemConfig {
    pub em: EmConfig,
    pub max_sem_iterations: usize,
    pub score: ScoreConfig,
}

impl Default for SemConfig {
    fn default() -> Self {
        SemConfig {
            em: EmConfig::default(),
            max_sem_iterations: 20,
            score: ScoreConfig::default(),
        }
    }
}

impl SemConfig {
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        if self.max_sem_iterations < 1 {
            return Err(Error::Precondition("Structural EM needs at least one iteration".into()));
        }
        if !(self.score.ess >= 0.0 && self.score.ess.is_finite()) {
            return Err(Error::Precondition(format!("score ess {} must be nonnegative", self.score.ess)));
        }
        Ok(())
    }
}

/// BIC term of one family from its count table (CPT layout):
/// `Σ N_rk ln θ_rk − (ln n / 2)(card − 1) rows`.
pub fn bic_from_counts(counts: &[f64], card: usize, ess: f64, n_records: f64) -> f64 {
    let theta = normalize_counts(counts, card, ess);
    let ll: f64 = counts
        .iter()
        .zip(&theta)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, t)| n * t.ln())
        .sum();
    let rows = counts.len() / card;
    ll - 0.5 * n_records.ln() * ((card - 1) * rows) as f64
}

/// Score of the family `parents -> child` under frozen statistics.
pub fn family_score(
    child: usize,
    parents: &[usize],
    stats: &ExpectedData,
    score: &ScoreConfig,
    n_records: f64,
) -> Result<f64> {
    let width = stats.cardinalities().len();
    if child >= width || parents.iter().any(|&p| p >= width) {
        return Err(Error::Precondition("family refers to an unknown variable".into()));
    }
    if parents.contains(&child) {
        return Err(Error::Precondition("a variable cannot be its own parent".into()));
    }
    if !(n_records >= 1.0) {
        return Err(Error::Precondition(format!("record count {n_records} must be at least 1")));
    }
    let ScoreKind::Bic = score.kind;
    let counts = stats.family_counts(child, parents);
    Ok(bic_from_counts(&counts, stats.cardinalities()[child], score.ess, n_records))
}

/// Sum of family scores of `dag`.
pub fn total_score(dag: &Dag, stats: &ExpectedData, score: &ScoreConfig) -> Result<f64> {
    let n = stats.n_records().max(1.0);
    (0..dag.len())
        .map(|i| family_score(i, dag.parent_indices(i), stats, score, n))
        .sum()
}

struct FamilyCache<'a> {
    stats: &'a ExpectedData,
    score: &'a ScoreConfig,
    n: f64,
    scores: HashMap<(usize, Vec<usize>), f64>,
}

impl FamilyCache<'_> {
    fn get(&self, child: usize, parents: &[usize]) -> f64 {
        self.scores[&(child, parents.to_vec())]
    }

    fn fill(&mut self, wanted: Vec<(usize, Vec<usize>)>) {
        let mut missing: Vec<(usize, Vec<usize>)> =
            wanted.into_iter().filter(|key| !self.scores.contains_key(key)).collect();
        missing.sort_unstable();
        missing.dedup();
        let (stats, score, n) = (self.stats, self.score, self.n);
        let computed: Vec<f64> = missing
            .par_iter()
            .map(|(c, ps)| {
                let counts = stats.family_counts(*c, ps);
                bic_from_counts(&counts, stats.cardinalities()[*c], score.ess, n)
            })
            .collect();
        self.scores.extend(missing.into_iter().zip(computed));
    }
}

fn with_parent(parents: &[usize], p: usize) -> Vec<usize> {
    let mut v = parents.to_vec();
    if let Err(pos) = v.binary_search(&p) {
        v.insert(pos, p);
    }
    v
}

fn without_parent(parents: &[usize], p: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&q| q != p).collect()
}

/// Families whose parent sets change under `mv`, with their new parents.
fn changed_families(dag: &Dag, mv: &EditMove) -> Vec<(usize, Vec<usize>)> {
    let (a, b) = (mv.from, mv.to);
    match mv.kind {
        MoveKind::Add => vec![(b, with_parent(dag.parent_indices(b), a))],
        MoveKind::Delete => vec![(b, without_parent(dag.parent_indices(b), a))],
        MoveKind::Reverse => vec![
            (b, without_parent(dag.parent_indices(b), a)),
            (a, with_parent(dag.parent_indices(a), b)),
        ],
    }
}

/// Legal moves in search order: all adds, then deletes, then reversals,
/// each by `(from, to)` in node order.
fn candidate_moves(dag: &Dag, k: &Constraints) -> Vec<EditMove> {
    let n = dag.len();
    let mut moves = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && !dag.has_edge(a, b) {
                moves.push(EditMove::add(a, b));
            }
        }
    }
    let edges = dag.edges();
    moves.extend(edges.iter().map(|&(a, b)| EditMove::delete(a, b)));
    moves.extend(edges.iter().map(|&(a, b)| EditMove::reverse(a, b)));
    moves.retain(|mv| dag.check_move(mv, k).is_ok());
    moves
}

/// Best-improvement hill climbing from `start`. Stops when no legal move
/// raises the total score by more than [`MIN_IMPROVEMENT`]; ties between
/// moves go to the first in [`candidate_moves`] order.
pub fn hill_climb(stats: &ExpectedData, k: &Constraints, score: &ScoreConfig, start: Dag) -> Result<Dag> {
    if k.len() != start.len() || stats.cardinalities().len() != start.len() {
        return Err(Error::Precondition("graph, constraints and data disagree on the variable count".into()));
    }
    if !k.admits(&start) {
        return Err(Error::Precondition("start graph violates the prior knowledge".into()));
    }
    let mut cache = FamilyCache {
        stats,
        score,
        n: stats.n_records().max(1.0),
        scores: HashMap::new(),
    };
    let mut dag = start;
    cache.fill((0..dag.len()).map(|i| (i, dag.parent_indices(i).to_vec())).collect());
    loop {
        let moves = candidate_moves(&dag, k);
        let changes: Vec<Vec<(usize, Vec<usize>)>> = moves.iter().map(|mv| changed_families(&dag, mv)).collect();
        cache.fill(changes.iter().flatten().cloned().collect());
        let mut best: Option<(f64, usize)> = None;
        for (m, fams) in changes.iter().enumerate() {
            let delta: f64 = fams
                .iter()
                .map(|(c, ps)| cache.get(*c, ps) - cache.get(*c, dag.parent_indices(*c)))
                .sum();
            if best.is_none_or(|(d, _)| delta > d) {
                best = Some((delta, m));
            }
        }
        match best {
            Some((delta, m)) if delta > MIN_IMPROVEMENT => {
                dag = dag.apply_move(&moves[m], k)?;
            }
            _ => return Ok(dag),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemOutcome {
    pub dag: Dag,
    /// Structure-search rounds run.
    pub iterations: usize,
    /// Whether the last round left the graph unchanged.
    pub converged: bool,
}

/// Structural EM from the empty graph plus required edges: fit parameters
/// by EM, freeze the expected statistics, hill-climb from the current
/// graph, repeat until the graph stops changing.
pub fn structural_em(data: &Dataset, k: &Constraints, cfg: &SemConfig) -> Result<SemOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Precondition("Structural EM needs at least one record".into()));
    }
    if k.len() != data.width() {
        return Err(Error::Precondition("constraints and data disagree on the variable count".into()));
    }
    let mut dag = k.seed_graph(data.names())?;
    for it in 1..=cfg.max_sem_iterations {
        let stats = if data.is_complete() {
            ExpectedData::observed(data)?
        } else {
            em_run(&dag, data, &cfg.em)?.1
        };
        let next = hill_climb(&stats, k, &cfg.score, dag.clone())?;
        if next == dag {
            return Ok(SemOutcome {
                dag,
                iterations: it,
                converged: true,
            });
        }
        dag = next;
    }
    Ok(SemOutcome {
        dag,
        iterations: cfg.max_sem_iterations,
        converged: false,
    })
}
