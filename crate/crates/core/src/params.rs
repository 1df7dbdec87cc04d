//! Parameter estimation: closed-form smoothed maximum likelihood on complete
//! data and EM on incomplete data.
//!
//! The E-step materializes each distinct record's posterior over its missing
//! cells as weighted completions. Family counts for any parent set can then
//! be read off the completions, which is what structure search needs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bn::{CausalBayesianNetwork, Cpt, Variable};
use crate::data::{Cell, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;

/// Records whose missing cells span more joint configurations than this are
/// not expanded; their family posteriors come from variable elimination.
pub const COMPLETION_LIMIT: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmInit {
    Uniform,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the relative change of the traced objective drops below this.
    pub tolerance: f64,
    /// Dirichlet equivalent sample size, spread evenly over each CPT.
    pub ess: f64,
    pub init: EmInit,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 100,
            tolerance: 1e-6,
            ess: 1.0,
            init: EmInit::Uniform,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Precondition("EM needs at least one iteration".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Precondition(format!("EM tolerance {} must be positive", self.tolerance)));
        }
        check_ess(self.ess)
    }
}

fn check_ess(ess: f64) -> Result<()> {
    if !(ess >= 0.0 && ess.is_finite()) {
        return Err(Error::Precondition(format!("ess {ess} must be finite and nonnegative")));
    }
    Ok(())
}

/// Per-node (expected) counts laid out like the node's CPT: row-major over
/// parent configurations, child state fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistics {
    counts: Vec<Vec<f64>>,
    n_records: f64,
}

impl SufficientStatistics {
    pub fn counts(&self, node: usize) -> &[f64] {
        &self.counts[node]
    }

    pub fn total(&self, node: usize) -> f64 {
        self.counts[node].iter().sum()
    }

    pub fn n_records(&self) -> f64 {
        self.n_records
    }

    /// Smoothed maximum-likelihood CPTs for `dag`.
    pub fn to_network(&self, dag: &Dag, variables: &[Variable], ess: f64) -> Result<CausalBayesianNetwork> {
        check_ess(ess)?;
        let cards: Vec<usize> = variables.iter().map(Variable::cardinality).collect();
        let cpts = (0..dag.len())
            .map(|i| {
                let parents = dag.parent_indices(i).to_vec();
                let pcards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
                let table = normalize_counts(&self.counts[i], cards[i], ess);
                Cpt::new(i, cards[i], parents, pcards, table)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(CausalBayesianNetwork::new(dag.clone(), variables.to_vec(), cpts)?)
    }
}

/// Row `r`, state `k`: `(N_rk + a) / (N_r + a * card)` with
/// `a = ess / (rows * card)`. A row with no mass and no prior is uniform.
pub fn normalize_counts(counts: &[f64], card: usize, ess: f64) -> Vec<f64> {
    let rows = counts.len() / card;
    let a = ess / (rows * card) as f64;
    let mut table = Vec::with_capacity(counts.len());
    for row in counts.chunks(card) {
        let denom: f64 = row.iter().sum::<f64>() + a * card as f64;
        if denom > 0.0 {
            table.extend(row.iter().map(|n| (n + a) / denom));
        } else {
            table.extend(std::iter::repeat_n(1.0 / card as f64, card));
        }
    }
    table
}

/// Distinct records with their multiplicities, in first-seen order.
fn distinct_records(data: &Dataset) -> Vec<(&[Cell], usize, usize)> {
    let mut slot: HashMap<&[Cell], usize> = HashMap::new();
    let mut out: Vec<(&[Cell], usize, usize)> = Vec::new();
    for (r, rec) in data.records().iter().enumerate() {
        match slot.get(rec.as_slice()) {
            Some(&i) => out[i].1 += 1,
            None => {
                slot.insert(rec.as_slice(), out.len());
                out.push((rec.as_slice(), 1, r));
            }
        }
    }
    out
}

/// Advances a mixed-radix counter, last digit fastest. Returns false after
/// the final configuration.
pub(crate) fn next_config(config: &mut [usize], cards: &[usize]) -> bool {
    for d in (0..config.len()).rev() {
        config[d] += 1;
        if config[d] < cards[d] {
            return true;
        }
        config[d] = 0;
    }
    false
}

/// A dataset with every missing cell replaced by its posterior under a
/// fixed network, stored as weighted complete records.
#[derive(Debug, Clone)]
pub struct ExpectedData {
    cards: Vec<usize>,
    n_records: f64,
    // flat completions, `cards.len()` states each
    rows: Vec<usize>,
    weights: Vec<f64>,
    deferred: Vec<(Vec<Cell>, f64)>,
    network: Option<CausalBayesianNetwork>,
    log_likelihood: Option<f64>,
}

impl ExpectedData {
    /// Tabulates a complete dataset without any network.
    pub fn observed(data: &Dataset) -> Result<Self> {
        if !data.is_complete() {
            return Err(Error::Precondition("observed counts need complete data".into()));
        }
        let mut out = ExpectedData::blank(data);
        for (rec, mult, _) in distinct_records(data) {
            out.rows.extend(rec.iter().map(|c| c.expect("complete")));
            out.weights.push(mult as f64);
        }
        Ok(out)
    }

    /// E-step: posterior completions of `data` under `bn`, plus the
    /// observed-data log-likelihood.
    pub fn new(bn: &CausalBayesianNetwork, data: &Dataset) -> Result<Self> {
        bn.check_schema(data)?;
        let mut out = ExpectedData::blank(data);
        let mut ll = 0.0;
        let mut full = vec![0usize; data.width()];
        let mut probs: Vec<f64> = Vec::new();
        for (rec, mult, first) in distinct_records(data) {
            let m = mult as f64;
            let missing: Vec<usize> = (0..rec.len()).filter(|&i| rec[i].is_none()).collect();
            let combos = missing
                .iter()
                .try_fold(1usize, |acc, &i| acc.checked_mul(out.cards[i]).filter(|&c| c <= COMPLETION_LIMIT));
            let Some(combos) = combos else {
                let z = bn.evidence_probability(rec)?;
                if z <= 0.0 {
                    return Err(Error::ZeroProbabilityRecord { record: first });
                }
                ll += m * z.ln();
                out.deferred.push((rec.to_vec(), m));
                continue;
            };
            for (slot, cell) in full.iter_mut().zip(rec) {
                *slot = cell.unwrap_or(0);
            }
            let miss_cards: Vec<usize> = missing.iter().map(|&i| out.cards[i]).collect();
            let mut config = vec![0usize; missing.len()];
            probs.clear();
            probs.reserve(combos);
            loop {
                for (&v, &s) in missing.iter().zip(&config) {
                    full[v] = s;
                }
                probs.push(bn.cpts().iter().map(|c| c.prob(&full)).product());
                if !next_config(&mut config, &miss_cards) {
                    break;
                }
            }
            let z: f64 = probs.iter().sum();
            if z <= 0.0 {
                return Err(Error::ZeroProbabilityRecord { record: first });
            }
            ll += m * z.ln();
            config.fill(0);
            for &p in &probs {
                if p > 0.0 {
                    for (&v, &s) in missing.iter().zip(&config) {
                        full[v] = s;
                    }
                    out.rows.extend_from_slice(&full);
                    out.weights.push(m * p / z);
                }
                next_config(&mut config, &miss_cards);
            }
        }
        if !out.deferred.is_empty() {
            out.network = Some(bn.clone());
        }
        out.log_likelihood = Some(ll);
        Ok(out)
    }

    fn blank(data: &Dataset) -> Self {
        ExpectedData {
            cards: data.cardinalities(),
            n_records: data.len() as f64,
            rows: Vec::new(),
            weights: Vec::new(),
            deferred: Vec::new(),
            network: None,
            log_likelihood: None,
        }
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn n_records(&self) -> f64 {
        self.n_records
    }

    /// Observed-data log-likelihood under the network used for the E-step;
    /// `None` for plain tabulations.
    pub fn log_likelihood(&self) -> Option<f64> {
        self.log_likelihood
    }

    /// Expected counts of `(parents, child)` configurations, CPT layout
    /// with `parents` as listed (first most significant).
    pub fn family_counts(&self, child: usize, parents: &[usize]) -> Vec<f64> {
        let width = self.cards.len();
        let card = self.cards[child];
        let rows: usize = parents.iter().map(|&p| self.cards[p]).product();
        let mut table = vec![0.0; rows * card];
        for (row, &w) in self.rows.chunks_exact(width).zip(&self.weights) {
            let r = parents.iter().fold(0, |acc, &p| acc * self.cards[p] + row[p]);
            table[r * card + row[child]] += w;
        }
        if let Some(bn) = &self.network {
            let family: Vec<usize> = parents.iter().copied().chain([child]).collect();
            for (rec, m) in &self.deferred {
                self.add_deferred(bn, rec, *m, &family, &mut table);
            }
        }
        table
    }

    fn add_deferred(&self, bn: &CausalBayesianNetwork, rec: &[Cell], m: f64, family: &[usize], table: &mut [f64]) {
        let card = self.cards[*family.last().expect("child")];
        let hidden: Vec<usize> = family.iter().copied().filter(|&v| rec[v].is_none()).collect();
        let hidden_cards: Vec<usize> = hidden.iter().map(|&v| self.cards[v]).collect();
        let post = if hidden.is_empty() {
            vec![1.0]
        } else {
            bn.joint_posterior(rec, &hidden)
                .expect("evidence probability was checked positive")
                .0
        };
        let mut full: Vec<usize> = rec.iter().map(|c| c.unwrap_or(0)).collect();
        let mut config = vec![0usize; hidden.len()];
        for p in post {
            for (&v, &s) in hidden.iter().zip(&config) {
                full[v] = s;
            }
            let (child, parents) = family.split_last().expect("child");
            let r = parents.iter().fold(0, |acc, &q| acc * self.cards[q] + full[q]);
            table[r * card + full[*child]] += m * p;
            next_config(&mut config, &hidden_cards);
        }
    }

    /// Counts for every family of `dag`.
    pub fn statistics(&self, dag: &Dag) -> SufficientStatistics {
        SufficientStatistics {
            counts: (0..dag.len())
                .map(|i| self.family_counts(i, dag.parent_indices(i)))
                .collect(),
            n_records: self.n_records,
        }
    }
}

/// Smoothed maximum-likelihood fit on complete data.
pub fn mle_fit(dag: &Dag, data: &Dataset, ess: f64) -> Result<CausalBayesianNetwork> {
    check_dag_matches(dag, data)?;
    ExpectedData::observed(data)?
        .statistics(dag)
        .to_network(dag, data.variables(), ess)
}

/// Expected sufficient statistics of `data` under `bn`, one table per family.
pub fn expected_counts(bn: &CausalBayesianNetwork, data: &Dataset) -> Result<SufficientStatistics> {
    Ok(ExpectedData::new(bn, data)?.statistics(bn.dag()))
}

fn check_dag_matches(dag: &Dag, data: &Dataset) -> Result<()> {
    if dag.nodes() != data.names().as_slice() {
        return Err(Error::Precondition("graph nodes differ from the dataset columns".into()));
    }
    Ok(())
}

/// Log Dirichlet prior density (up to a constant) matching the smoothing in
/// [`normalize_counts`].
pub fn log_prior(bn: &CausalBayesianNetwork, ess: f64) -> f64 {
    if ess == 0.0 {
        return 0.0;
    }
    bn.cpts()
        .iter()
        .map(|c| {
            let a = ess / c.table().len() as f64;
            c.table().iter().map(|t| a * t.ln()).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub network: CausalBayesianNetwork,
    /// Objective per iteration: observed-data log-likelihood plus the log
    /// Dirichlet prior. Equals the plain log-likelihood when `ess = 0`.
    pub trace: Vec<f64>,
    /// Observed-data log-likelihood of `network`.
    pub log_likelihood: f64,
    /// M-steps taken.
    pub iterations: usize,
    pub converged: bool,
}

fn initial_network(dag: &Dag, variables: &[Variable], cfg: &EmConfig) -> Result<CausalBayesianNetwork> {
    match cfg.init {
        EmInit::Uniform => Ok(CausalBayesianNetwork::uniform(dag.clone(), variables.to_vec())?),
        EmInit::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let counts = (0..dag.len())
                .map(|i| {
                    let rows: usize = dag.parent_indices(i).iter().map(|&p| variables[p].cardinality()).product();
                    (0..rows * variables[i].cardinality())
                        .map(|_| rng.random_range(0.5..1.5))
                        .collect()
                })
                .collect();
            SufficientStatistics { counts, n_records: 0.0 }.to_network(dag, variables, 0.0)
        }
    }
}

/// EM on `dag`. Returns the fit together with the E-step taken at the
/// returned parameters.
pub(crate) fn em_run(dag: &Dag, data: &Dataset, cfg: &EmConfig) -> Result<(EmFit, ExpectedData)> {
    cfg.validate()?;
    check_dag_matches(dag, data)?;
    if data.is_empty() {
        return Err(Error::Precondition("EM needs at least one record".into()));
    }
    if data.is_complete() {
        let observed = ExpectedData::observed(data)?;
        let network = observed.statistics(dag).to_network(dag, data.variables(), cfg.ess)?;
        let expected = ExpectedData::new(&network, data)?;
        let ll = expected.log_likelihood().expect("E-step");
        let fit = EmFit {
            trace: vec![ll + log_prior(&network, cfg.ess)],
            network,
            log_likelihood: ll,
            iterations: 1,
            converged: true,
        };
        return Ok((fit, expected));
    }
    let mut network = initial_network(dag, data.variables(), cfg)?;
    let mut expected = ExpectedData::new(&network, data)?;
    let mut ll = expected.log_likelihood().expect("E-step");
    let mut trace = vec![ll + log_prior(&network, cfg.ess)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        network = expected.statistics(dag).to_network(dag, data.variables(), cfg.ess)?;
        expected = ExpectedData::new(&network, data)?;
        ll = expected.log_likelihood().expect("E-step");
        iterations += 1;
        let prev = *trace.last().expect("nonempty");
        let cur = ll + log_prior(&network, cfg.ess);
        trace.push(cur);
        if ((cur - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let fit = EmFit {
        network,
        trace,
        log_likelihood: ll,
        iterations,
        converged,
    };
    Ok((fit, expected))
}

/// Parameters for `dag` from incomplete data by expectation maximization.
pub fn em_fit(dag: &Dag, data: &Dataset, cfg: &EmConfig) -> Result<EmFit> {
    em_run(dag, data, cfg).map(|(fit, _)| fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::testing::{all_assignments, binary, chain2, random_network};
    use crate::data::{inject_missing, Mechanism, MissingnessSpec};
    use proptest::prelude::*;

    fn mcar_all(data: &Dataset, rate: f64, seed: u64) -> Dataset {
        let mut d = data.clone();
        for (i, name) in data.names().iter().enumerate() {
            let spec = MissingnessSpec {
                mechanism: Mechanism::Mcar,
                rate,
                target: name.clone(),
                seed: seed.wrapping_add(i as u64),
            };
            d = inject_missing(&d, &spec).unwrap();
        }
        d
    }

    fn single_var(values: &[usize]) -> Dataset {
        Dataset::new(vec![binary("A")], values.iter().map(|&v| vec![Some(v)]).collect()).unwrap()
    }

    #[test]
    fn mle_counts_frequencies() {
        let d = single_var(&[1, 1, 1, 0]);
        let dag = Dag::empty(vec!["A".into()]).unwrap();
        let bn = mle_fit(&dag, &d, 0.0).unwrap();
        assert_eq!(bn.cpt(0).table(), &[0.25, 0.75]);
    }

    #[test]
    fn mle_without_data_is_uniform() {
        let d = Dataset::new(vec![binary("A"), binary("B")], vec![]).unwrap();
        let dag = Dag::new(vec!["A".into(), "B".into()], &[("A", "B")]).unwrap();
        for ess in [0.0, 1.0, 4.0] {
            let bn = mle_fit(&dag, &d, ess).unwrap();
            assert!(bn.cpts().iter().all(|c| c.table().iter().all(|&p| p == 0.5)));
        }
    }

    #[test]
    fn mle_matches_hand_smoothed_counts() {
        // independent count-and-normalize over A -> C <- B
        let bn = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let dag = Dag::new(vec!["A".into(), "B".into(), "C".into()], &[("A", "C"), ("B", "C")]).unwrap();
            let vars = vec![
                binary("A"),
                Variable::with_states("B", &["x", "y", "z"]).unwrap(),
                binary("C"),
            ];
            crate::bn::testing::random_cpts(&mut rng, dag, vars)
        };
        let d = bn.sample(30, 8);
        let fit = mle_fit(bn.dag(), &d, 1.0).unwrap();
        let c = fit.cpt(2);
        for a in 0..2 {
            for b in 0..3 {
                let n_ab = d.records().iter().filter(|r| r[0] == Some(a) && r[1] == Some(b)).count() as f64;
                for s in 0..2 {
                    let n = d
                        .records()
                        .iter()
                        .filter(|r| r[0] == Some(a) && r[1] == Some(b) && r[2] == Some(s))
                        .count() as f64;
                    let want = (n + 1.0 / 12.0) / (n_ab + 1.0 / 6.0);
                    assert!((c.row(a * 3 + b)[s] - want).abs() < 1e-15);
                }
            }
        }
        let n1 = d.records().iter().filter(|r| r[0] == Some(1)).count() as f64;
        assert!((fit.cpt(0).table()[1] - (n1 + 0.5) / 31.0).abs() < 1e-15);
    }

    #[test]
    fn complete_data_counts_are_integer_tabulation() {
        let bn = chain2(0.3, 0.2, 0.7);
        let d = bn.sample(200, 1);
        let stats = expected_counts(&bn, &d).unwrap();
        let want: Vec<f64> = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| d.records().iter().filter(|r| r[0] == Some(a) && r[1] == Some(b)).count() as f64)
            .collect();
        assert_eq!(stats.counts(1), want.as_slice());
        assert_eq!(stats.total(0), 200.0);
    }

    #[test]
    fn fully_missing_record_gives_family_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bn = random_network(&mut rng, 5, 3, 0.6);
        let d = Dataset::new(bn.variables().to_vec(), vec![vec![None; 5]]).unwrap();
        let stats = expected_counts(&bn, &d).unwrap();
        let cards = bn.cardinalities();
        for (i, cpt) in bn.cpts().iter().enumerate() {
            let mut want = vec![0.0; cpt.table().len()];
            for a in all_assignments(&cards) {
                let p: f64 = bn.cpts().iter().map(|c| c.prob(&a)).product();
                want[cpt.row_of(&a) * cards[i] + a[i]] += p;
            }
            for (x, y) in stats.counts(i).iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn child_only_record_splits_parent_by_bayes_rule() {
        let bn = chain2(0.3, 0.2, 0.7);
        let d = Dataset::new(bn.variables().to_vec(), vec![vec![None, Some(1)]]).unwrap();
        let stats = expected_counts(&bn, &d).unwrap();
        let p1 = 0.3 * 0.7 / (0.3 * 0.7 + 0.7 * 0.2);
        assert!((stats.counts(0)[1] - p1).abs() < 1e-15);
        assert!((stats.counts(0)[0] - (1.0 - p1)).abs() < 1e-15);
        assert_eq!(stats.counts(1)[0], 0.0);
        assert!((stats.counts(1)[3] - p1).abs() < 1e-15);
    }

    #[test]
    fn deferred_records_match_expanded_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bn = random_network(&mut rng, 6, 3, 0.5);
        let d = mcar_all(&bn.sample(40, 2), 0.4, 3);
        let a = ExpectedData::new(&bn, &d).unwrap();
        // force every incomplete record through elimination
        let mut b = ExpectedData::blank(&d);
        let mut ll = 0.0;
        for rec in d.records() {
            let z = bn.evidence_probability(rec).unwrap();
            ll += z.ln();
            b.deferred.push((rec.clone(), 1.0));
        }
        b.network = Some(bn.clone());
        assert!((a.log_likelihood().unwrap() - ll).abs() < 1e-9);
        for child in 0..6 {
            let parents: Vec<usize> = (0..6).filter(|&p| p != child).take(2).collect();
            let x = a.family_counts(child, &parents);
            let y = b.family_counts(child, &parents);
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_probability_record_is_reported() {
        let bn = chain2(0.0, 0.2, 0.7);
        let d = Dataset::new(bn.variables().to_vec(), vec![vec![Some(0), None], vec![Some(1), None]]).unwrap();
        assert!(matches!(
            expected_counts(&bn, &d),
            Err(Error::ZeroProbabilityRecord { record: 1 })
        ));
    }

    #[test]
    fn em_on_complete_data_is_mle() {
        let bn = chain2(0.3, 0.2, 0.7);
        let d = bn.sample(300, 4);
        for init in [EmInit::Uniform, EmInit::SeededRandom] {
            let cfg = EmConfig { init, ..EmConfig::default() };
            let fit = em_fit(bn.dag(), &d, &cfg).unwrap();
            assert_eq!(fit.network, mle_fit(bn.dag(), &d, 1.0).unwrap());
            assert_eq!(fit.trace.len(), 1);
            assert_eq!(fit.iterations, 1);
        }
    }

    #[test]
    fn em_recovers_two_node_cpts_under_mcar() {
        let truth = chain2(0.3, 0.2, 0.7);
        let d = truth.sample(5_000, 6);
        let spec = MissingnessSpec {
            mechanism: Mechanism::Mcar,
            rate: 0.3,
            target: "A".into(),
            seed: 1,
        };
        let d = inject_missing(&d, &spec).unwrap();
        let fit = em_fit(truth.dag(), &d, &EmConfig::default()).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.network.cpts().iter().zip(truth.cpts()) {
            for (x, y) in a.table().iter().zip(b.table()) {
                assert!((x - y).abs() < 0.05, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bn = random_network(&mut rng, 5, 3, 0.5);
        let d = mcar_all(&bn.sample(100, 1), 0.25, 2);
        let cfg = EmConfig {
            init: EmInit::SeededRandom,
            seed: 42,
            ..EmConfig::default()
        };
        let a = em_fit(bn.dag(), &d, &cfg).unwrap();
        let b = em_fit(bn.dag(), &d, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn config_validation() {
        let dag = Dag::empty(vec!["A".into()]).unwrap();
        let d = single_var(&[0, 1]);
        for cfg in [
            EmConfig { max_iterations: 0, ..EmConfig::default() },
            EmConfig { tolerance: 0.0, ..EmConfig::default() },
            EmConfig { ess: -1.0, ..EmConfig::default() },
        ] {
            assert!(matches!(em_fit(&dag, &d, &cfg), Err(Error::Precondition(_))));
        }
        assert!(em_fit(&dag, &single_var(&[]), &EmConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn em_trace_monotone_and_mass_conserved(seed in any::<u64>(), ess in prop_oneof![Just(0.0), Just(1.0)]) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bn = random_network(&mut rng, 5, 3, 0.5);
            let d = mcar_all(&bn.sample(60, seed), 0.2, seed);
            let cfg = EmConfig { ess, ..EmConfig::default() };
            let fit = em_fit(bn.dag(), &d, &cfg).unwrap();
            for w in fit.trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.trace);
            }
            let stats = expected_counts(&fit.network, &d).unwrap();
            for i in 0..5 {
                prop_assert!((stats.total(i) - 60.0).abs() < 1e-6);
            }
        }
    }
}
