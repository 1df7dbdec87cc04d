//! Prediction quality: confusion matrices, ROC/AUC with bootstrap intervals,
//! posterior risk scores and the hyperparameter grid search.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bn::{BnError, CausalBayesianNetwork};
use crate::bootstrap::{bootstrap_runs, collect_runs, fit_average, BootstrapConfig, ConfidenceMatrix};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Constraints, Dag};
use crate::params::{em_fit, EmConfig};
use crate::structure::SemConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Tabulates predictions `score >= threshold` against `labels`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMatrix> {
    if scores.len() != labels.len() {
        return Err(Error::Precondition(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// `tp / (tp + fn)`; `None` without positives.
pub fn sensitivity(cm: &ConfusionMatrix) -> Option<f64> {
    let d = cm.tp + cm.fn_;
    (d > 0).then(|| cm.tp as f64 / d as f64)
}

/// `tn / (tn + fp)`; `None` without negatives.
pub fn specificity(cm: &ConfusionMatrix) -> Option<f64> {
    let d = cm.tn + cm.fp;
    (d > 0).then(|| cm.tn as f64 / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    /// Records scoring at or above this are called positive. The first
    /// point uses `+inf`.
    pub threshold: f64,
    /// 1 - specificity.
    pub fpr: f64,
    /// Sensitivity.
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// ROC curve over the distinct scores (descending, after a `+inf`
/// threshold) and its trapezoid area. Ties count one half, so the area
/// equals the probability that a random positive outscores a random
/// negative.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Precondition(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Precondition("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Precondition("ROC needs at least one positive and one negative label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the number of concordant pairs, ties once
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok((RocCurve { points }, auc))
}

/// Percentile interval of the AUC over `resamples` bootstrap draws of the
/// scored records. Draws with a single class are skipped; `None` if every
/// draw was.
pub fn auc_interval(scores: &[f64], labels: &[bool], resamples: usize, level: f64, seed: u64) -> Option<(f64, f64)> {
    let n = scores.len();
    if n == 0 || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aucs = Vec::with_capacity(resamples);
    let (mut s, mut y) = (vec![0.0; n], vec![false; n]);
    for _ in 0..resamples {
        for j in 0..n {
            let k = rng.random_range(0..n);
            s[j] = scores[k];
            y[j] = labels[k];
        }
        if let Ok((_, a)) = roc_auc(&s, &y) {
            aucs.push(a);
        }
    }
    if aucs.is_empty() {
        return None;
    }
    aucs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Some((percentile(&aucs, tail), percentile(&aucs, 1.0 - tail)))
}

/// Linear interpolation between closest ranks of a sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior probability of `positive_state` of `target` per record, using
/// every observed cell except the target as evidence. Records whose
/// evidence has probability zero get `None`.
pub fn predict_risk(
    bn: &CausalBayesianNetwork,
    records: &Dataset,
    target: &str,
    positive_state: &str,
) -> Result<Vec<Option<f64>>> {
    bn.check_schema(records)?;
    let t = bn.index_of(target)?;
    let positive = positive_index(bn, t, positive_state)?;
    records
        .records()
        .par_iter()
        .map(|rec| {
            let mut ev = rec.clone();
            ev[t] = None;
            match bn.posterior(&ev, t) {
                Ok(p) => Ok(Some(p[positive])),
                Err(BnError::ZeroProbabilityEvidence) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

fn positive_index(bn: &CausalBayesianNetwork, t: usize, positive_state: &str) -> Result<usize> {
    let var = &bn.variables()[t];
    var.state_index(positive_state).ok_or_else(|| {
        Error::Bn(BnError::UnknownState {
            variable: var.name().into(),
            state: positive_state.into(),
        })
    })
}

/// Whether each record's target equals `positive_state`; `None` when the
/// target cell is missing.
pub fn target_labels(records: &Dataset, target: &str, positive_state: &str) -> Result<Vec<Option<bool>>> {
    let t = records.index_of(target)?;
    let var = &records.variables()[t];
    let positive = var.state_index(positive_state).ok_or_else(|| {
        Error::Bn(BnError::UnknownState {
            variable: var.name().into(),
            state: positive_state.into(),
        })
    })?;
    Ok(records.records().iter().map(|r| r[t].map(|s| s == positive)).collect())
}

/// Scores and labels of the records that have both.
pub fn scored_pairs(scores: &[Option<f64>], labels: &[Option<bool>]) -> (Vec<f64>, Vec<bool>) {
    scores
        .iter()
        .zip(labels)
        .filter_map(|(s, y)| Some(((*s)?, (*y)?)))
        .unzip()
}

/// AUC of `bn` on `records`, skipping unscorable or unlabeled records.
pub fn auc_on(bn: &CausalBayesianNetwork, records: &Dataset, target: &str, positive_state: &str) -> Result<f64> {
    let scores = predict_risk(bn, records, target, positive_state)?;
    let labels = target_labels(records, target, positive_state)?;
    let (s, y) = scored_pairs(&scores, &labels);
    Ok(roc_auc(&s, &y)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scored: usize,
    /// Records whose evidence had probability zero.
    pub undefined: usize,
    /// Records without a target label.
    pub unlabeled: usize,
    pub auc: f64,
    pub ci_level: f64,
    pub ci: Option<(f64, f64)>,
    pub thresholds: Vec<ThresholdRow>,
    pub roc: RocCurve,
}

pub const DEFAULT_CI_RESAMPLES: usize = 2000;

/// Full evaluation of precomputed scores.
pub fn evaluate(
    scores: &[Option<f64>],
    labels: &[Option<bool>],
    thresholds: &[f64],
    ci_resamples: usize,
    seed: u64,
) -> Result<EvalReport> {
    if scores.len() != labels.len() {
        return Err(Error::Precondition(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let undefined = scores.iter().filter(|s| s.is_none()).count();
    let unlabeled = labels.iter().filter(|y| y.is_none()).count();
    let (s, y) = scored_pairs(scores, labels);
    let (roc, auc) = roc_auc(&s, &y)?;
    let rows = thresholds
        .iter()
        .map(|&t| {
            let cm = confusion(&s, &y, t)?;
            Ok(ThresholdRow {
                threshold: t,
                confusion: cm,
                sensitivity: sensitivity(&cm),
                specificity: specificity(&cm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        scored: s.len(),
        undefined,
        unlabeled,
        auc,
        ci_level: 0.95,
        ci: auc_interval(&s, &y, ci_resamples, 0.95, seed),
        thresholds: rows,
        roc,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "scored\t{}", self.scored).unwrap();
        writeln!(s, "undefined\t{}", self.undefined).unwrap();
        writeln!(s, "unlabeled\t{}", self.unlabeled).unwrap();
        writeln!(s, "auc\t{:.6}", self.auc).unwrap();
        match self.ci {
            Some((lo, hi)) => writeln!(s, "ci{:.0}\t{lo:.6}\t{hi:.6}", self.ci_level * 100.0).unwrap(),
            None => writeln!(s, "ci{:.0}\tundefined", self.ci_level * 100.0).unwrap(),
        }
        s.push_str("\nthreshold\ttp\tfp\ttn\tfn\tsensitivity\tspecificity\n");
        for r in &self.thresholds {
            let c = r.confusion;
            writeln!(
                s,
                "{:.6}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.threshold,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                opt(r.sensitivity),
                opt(r.specificity)
            )
            .unwrap();
        }
        s
    }
}

impl RocCurve {
    /// `threshold\tfpr\ttpr` rows for plotting.
    pub fn to_text(&self) -> String {
        let mut s = String::from("threshold\tfpr\ttpr\n");
        for p in &self.points {
            writeln!(s, "{}\t{:.9}\t{:.9}", p.threshold, p.fpr, p.tpr).unwrap();
        }
        s
    }
}

/// One grid point: bootstrap count and size, threshold, seed and the
/// Structural EM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub m: Option<usize>,
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sem: SemConfig,
}

impl GridConfig {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n: self.n,
            m: self.m,
            seed: self.seed,
            sem: self.sem.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridScores {
    pub in_sample_auc: f64,
    pub out_of_sample_auc: f64,
    pub target_parents: Vec<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    /// Position in the submitted grid.
    pub index: usize,
    pub config: GridConfig,
    pub outcome: std::result::Result<GridScores, String>,
}

impl GridResult {
    pub fn out_of_sample_auc(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.out_of_sample_auc)
    }
}

/// Learns a network per grid point on `train` and scores it on `train` and
/// `test`. Grid points that differ only in `n` and `lambda` share bootstrap
/// runs, since bootstrap `i` depends only on the seed, `m` and the search
/// settings. Results come back sorted by out-of-sample AUC, best first,
/// failures last; ties keep grid order.
pub fn grid_search(
    train: &Dataset,
    test: &Dataset,
    k: &Constraints,
    grid: &[GridConfig],
    target: &str,
    positive_state: &str,
) -> Result<Vec<GridResult>> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty grid".into()));
    }
    let key = |c: &GridConfig| serde_json::to_string(&(c.m, c.seed, &c.sem)).expect("config serializes");
    let mut largest: Vec<(String, GridConfig)> = Vec::new();
    for c in grid {
        let kc = key(c);
        match largest.iter_mut().find(|(x, _)| *x == kc) {
            Some((_, best)) if best.n < c.n => *best = c.clone(),
            Some(_) => {}
            None => largest.push((kc, c.clone())),
        }
    }
    let mut runs: HashMap<String, std::result::Result<Vec<Result<Dag>>, String>> = HashMap::new();
    for (kc, c) in largest {
        runs.insert(kc, bootstrap_runs(train, k, &c.bootstrap()).map_err(|e| e.to_string()));
    }
    let mut results: Vec<GridResult> = grid
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let outcome = match &runs[&key(c)] {
                Err(e) => Err(e.clone()),
                Ok(all) => score_config(train, test, k, &all[..c.n], c, target, positive_state).map_err(|e| e.to_string()),
            };
            GridResult {
                index,
                config: c.clone(),
                outcome,
            }
        })
        .collect();
    results.sort_by(|a, b| match (a.out_of_sample_auc(), b.out_of_sample_auc()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(results)
}

fn score_config(
    train: &Dataset,
    test: &Dataset,
    k: &Constraints,
    runs: &[Result<Dag>],
    c: &GridConfig,
    target: &str,
    positive_state: &str,
) -> Result<GridScores> {
    let graphs = collect_runs(runs)?;
    let confidence = ConfidenceMatrix::from_graphs(train.names(), &graphs)?;
    let learned = fit_average(train, k, confidence, c.lambda, &c.sem.em)?;
    let bn = &learned.network;
    Ok(GridScores {
        in_sample_auc: auc_on(bn, train, target, positive_state)?,
        out_of_sample_auc: auc_on(bn, test, target, positive_state)?,
        target_parents: bn.dag().parents(target)?.into_iter().map(str::to_string).collect(),
        edges: bn.dag().named_edges(),
    })
}

/// AUC on `test` of the edgeless network fitted on `train`: every record
/// gets the target's marginal.
pub fn baseline_auc(train: &Dataset, test: &Dataset, target: &str, positive_state: &str, em: &EmConfig) -> Result<f64> {
    let dag = Dag::empty(train.names())?;
    let fit = em_fit(&dag, train, em)?;
    auc_on(&fit.network, test, target, positive_state)
}

/// Columnar scatter data, in-sample against out-of-sample AUC, one row per
/// successful grid point, grouped by the target's parent set. Groups are
/// numbered in order of first appearance in `results`.
pub fn scatter_table(results: &[GridResult]) -> String {
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut rows: Vec<(usize, &GridResult, &GridScores)> = Vec::new();
    for r in results {
        if let Ok(s) = &r.outcome {
            let g = match groups.iter().position(|p| *p == s.target_parents) {
                Some(g) => g,
                None => {
                    groups.push(s.target_parents.clone());
                    groups.len() - 1
                }
            };
            rows.push((g, r, s));
        }
    }
    rows.sort_by_key(|(g, _, _)| *g);
    let mut out = String::from("group\tparents\tn\tm\tlambda\tin_sample_auc\tout_of_sample_auc\n");
    for (g, r, s) in rows {
        let parents = if s.target_parents.is_empty() {
            "-".to_string()
        } else {
            s.target_parents.join(",")
        };
        let m = r.config.m.map_or_else(|| "all".to_string(), |m| m.to_string());
        writeln!(
            out,
            "{g}\t{parents}\t{}\t{m}\t{}\t{:.6}\t{:.6}",
            r.config.n, r.config.lambda, s.in_sample_auc, s.out_of_sample_auc
        )
        .unwrap();
    }
    out
}
