//! Discrete causal Bayesian networks: variables, conditional probability
//! tables, exact inference by variable elimination and forward sampling.

mod factor;
mod inference;
mod model_file;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::graph::{Dag, GraphError};

pub use factor::Factor;
pub use inference::EliminationOrder;
pub use model_file::ModelFile;

/// Tolerance for CPT row normalization.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BnError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("state index {state} out of range for `{variable}`")]
    StateOutOfRange { variable: String, state: usize },
    #[error("invalid variable `{0}`: {1}")]
    InvalidVariable(String, String),
    #[error("invalid CPT for `{0}`: {1}")]
    InvalidCpt(String, String),
    #[error("assignment does not cover `{0}`")]
    IncompleteAssignment(String),
    #[error("target `{0}` is also part of the evidence")]
    TargetInEvidence(String),
    #[error("evidence has probability zero under the network")]
    ZeroProbabilityEvidence,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, BnError>;

/// Categorical variable with ordered state labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Result<Self> {
        let name = name.into();
        if states.len() < 2 {
            return Err(BnError::InvalidVariable(name, "needs at least two states".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(BnError::InvalidVariable(name, format!("duplicate state `{s}`")));
            }
        }
        Ok(Variable { name, states })
    }

    /// Convenience constructor from string slices.
    pub fn with_states(name: &str, states: &[&str]) -> Result<Self> {
        Variable::new(name, states.iter().map(|s| s.to_string()).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Conditional probability table `P(child | parents)`.
///
/// Rows enumerate parent configurations in mixed-radix order over `parents`
/// as listed, the first parent being the most significant digit. Each row is
/// a distribution over the child's states.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    child: usize,
    child_card: usize,
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    table: Vec<f64>,
}

impl Cpt {
    pub fn new(
        child: usize,
        child_card: usize,
        parents: Vec<usize>,
        parent_cards: Vec<usize>,
        table: Vec<f64>,
    ) -> Result<Self> {
        let label = format!("#{child}");
        if parents.len() != parent_cards.len() {
            return Err(BnError::InvalidCpt(label, "parent cardinalities do not match parents".into()));
        }
        let rows: usize = parent_cards.iter().product();
        if table.len() != rows * child_card {
            return Err(BnError::InvalidCpt(
                label,
                format!("expected {} entries, got {}", rows * child_card, table.len()),
            ));
        }
        for (r, row) in table.chunks(child_card).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(BnError::InvalidCpt(label, format!("row {r} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(BnError::InvalidCpt(label, format!("row {r} sums to {s}")));
            }
        }
        Ok(Cpt {
            child,
            child_card,
            parents,
            parent_cards,
            table,
        })
    }

    pub fn uniform(child: usize, child_card: usize, parents: Vec<usize>, parent_cards: Vec<usize>) -> Self {
        let rows: usize = parent_cards.iter().product();
        Cpt {
            child,
            child_card,
            parents,
            parent_cards,
            table: vec![1.0 / child_card as f64; rows * child_card],
        }
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn child_card(&self) -> usize {
        self.child_card
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn rows(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.table[r * self.child_card..(r + 1) * self.child_card]
    }

    /// Row index of the parent configuration found in a full assignment.
    pub fn row_of(&self, assignment: &[usize]) -> usize {
        self.parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &c)| acc * c + assignment[p])
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.table[self.row_of(assignment) * self.child_card + assignment[self.child]]
    }

    /// The table as a factor over `parents ∪ {child}` in ascending order.
    pub fn to_factor(&self) -> Factor {
        let scope: Vec<usize> = self.parents.iter().copied().chain([self.child]).collect();
        let cards: Vec<usize> = self.parent_cards.iter().copied().chain([self.child_card]).collect();
        Factor::new_unsorted(scope, cards, self.table.clone()).sorted()
    }
}

/// A DAG over named variables with one CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalBayesianNetwork {
    dag: Dag,
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl CausalBayesianNetwork {
    pub fn new(dag: Dag, variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        if dag.len() != variables.len() || cpts.len() != variables.len() {
            return Err(BnError::SchemaMismatch(format!(
                "{} nodes, {} variables, {} tables",
                dag.len(),
                variables.len(),
                cpts.len()
            )));
        }
        for (i, v) in variables.iter().enumerate() {
            if dag.name(i) != v.name() {
                return Err(BnError::SchemaMismatch(format!(
                    "node {i} is `{}` in the graph but `{}` in the variable list",
                    dag.name(i),
                    v.name()
                )));
            }
            let cpt = &cpts[i];
            if cpt.child != i || cpt.parents != dag.parent_indices(i) {
                return Err(BnError::InvalidCpt(v.name().into(), "parents differ from the graph".into()));
            }
            let expected: Vec<usize> = cpt.parents.iter().map(|&p| variables[p].cardinality()).collect();
            if cpt.parent_cards != expected || cpt.child_card != v.cardinality() {
                return Err(BnError::InvalidCpt(v.name().into(), "cardinalities differ from the variables".into()));
            }
        }
        Ok(CausalBayesianNetwork { dag, variables, cpts })
    }

    /// Uniform CPTs on `dag`.
    pub fn uniform(dag: Dag, variables: Vec<Variable>) -> Result<Self> {
        let cpts = (0..dag.len())
            .map(|i| {
                let ps = dag.parent_indices(i).to_vec();
                let cards = ps.iter().map(|&p| variables[p].cardinality()).collect();
                Cpt::uniform(i, variables[i].cardinality(), ps, cards)
            })
            .collect();
        CausalBayesianNetwork::new(dag, variables, cpts)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, i: usize) -> &Cpt {
        &self.cpts[i]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| BnError::UnknownVariable(name.to_string()))
    }

    /// Positional evidence from `variable -> state label` pairs.
    pub fn evidence_from_names(&self, named: &BTreeMap<String, String>) -> Result<Vec<Option<usize>>> {
        let mut ev = vec![None; self.len()];
        for (var, state) in named {
            let i = self.index_of(var)?;
            let s = self.variables[i].state_index(state).ok_or_else(|| BnError::UnknownState {
                variable: var.clone(),
                state: state.clone(),
            })?;
            ev[i] = Some(s);
        }
        Ok(ev)
    }

    pub(crate) fn check_evidence(&self, evidence: &[Option<usize>]) -> Result<()> {
        if evidence.len() != self.len() {
            return Err(BnError::SchemaMismatch(format!(
                "evidence has {} cells for {} variables",
                evidence.len(),
                self.len()
            )));
        }
        for (v, e) in self.variables.iter().zip(evidence) {
            if let Some(s) = *e {
                if s >= v.cardinality() {
                    return Err(BnError::StateOutOfRange {
                        variable: v.name().into(),
                        state: s,
                    });
                }
            }
        }
        Ok(())
    }

    /// Product of the matching CPT entries for a full assignment.
    pub fn joint_probability(&self, assignment: &[usize]) -> Result<f64> {
        if assignment.len() != self.len() {
            let missing = self.variables.get(assignment.len()).map(|v| v.name().to_string());
            return Err(BnError::IncompleteAssignment(missing.unwrap_or_default()));
        }
        for (v, &s) in self.variables.iter().zip(assignment) {
            if s >= v.cardinality() {
                return Err(BnError::StateOutOfRange {
                    variable: v.name().into(),
                    state: s,
                });
            }
        }
        Ok(self.cpts.iter().map(|c| c.prob(assignment)).product())
    }

    /// Same as [`joint_probability`](Self::joint_probability) with labels.
    pub fn joint_probability_named(&self, named: &BTreeMap<String, String>) -> Result<f64> {
        let ev = self.evidence_from_names(named)?;
        let mut full = Vec::with_capacity(ev.len());
        for (v, e) in self.variables.iter().zip(ev) {
            full.push(e.ok_or_else(|| BnError::IncompleteAssignment(v.name().into()))?);
        }
        self.joint_probability(&full)
    }

    /// Sum over records of the log joint probability. A record with
    /// probability zero makes the result `f64::NEG_INFINITY`.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        self.check_schema(data)?;
        let mut total = 0.0;
        let mut full = vec![0usize; self.len()];
        for (r, rec) in data.records().iter().enumerate() {
            for (slot, cell) in full.iter_mut().zip(rec) {
                *slot = cell.ok_or_else(|| {
                    BnError::SchemaMismatch(format!("record {r} has missing cells; log_likelihood needs complete data"))
                })?;
            }
            let p = self.joint_probability(&full)?;
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += p.ln();
        }
        Ok(total)
    }

    pub fn check_schema(&self, data: &Dataset) -> Result<()> {
        if data.variables() != self.variables.as_slice() {
            return Err(BnError::SchemaMismatch(
                "dataset variables differ from the network variables".into(),
            ));
        }
        Ok(())
    }

    /// Forward sampling in topological order; deterministic for a seed.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self.dag.topological_order();
        let mut records = Vec::with_capacity(count);
        let mut full = vec![0usize; self.len()];
        for _ in 0..count {
            for &v in &order {
                let cpt = &self.cpts[v];
                let row = cpt.row(cpt.row_of(&full));
                full[v] = draw(row, rng.random::<f64>());
            }
            records.push(full.iter().map(|&s| Some(s)).collect());
        }
        Dataset::new(self.variables.clone(), records).expect("sampled states are in range")
    }

    /// Posterior over `target` given positional evidence, by variable
    /// elimination with a min-fill ordering.
    pub fn posterior(&self, evidence: &[Option<usize>], target: usize) -> Result<Vec<f64>> {
        self.posterior_with_order(evidence, target, EliminationOrder::MinFill)
    }

    pub fn posterior_with_order(
        &self,
        evidence: &[Option<usize>],
        target: usize,
        order: EliminationOrder,
    ) -> Result<Vec<f64>> {
        self.check_evidence(evidence)?;
        if target >= self.len() {
            return Err(BnError::UnknownVariable(format!("#{target}")));
        }
        if evidence[target].is_some() {
            return Err(BnError::TargetInEvidence(self.variables[target].name().into()));
        }
        let (f, _) = inference::joint_marginal(self, evidence, &[target], &order)?;
        Ok(f.into_values())
    }

    pub fn posterior_named(&self, evidence: &BTreeMap<String, String>, target: &str) -> Result<Vec<f64>> {
        let t = self.index_of(target)?;
        if evidence.contains_key(target) {
            return Err(BnError::TargetInEvidence(target.to_string()));
        }
        self.posterior(&self.evidence_from_names(evidence)?, t)
    }

    /// Normalized joint posterior over `query` (values listed in `query`
    /// order, last variable fastest) and the probability of the evidence.
    pub fn joint_posterior(&self, evidence: &[Option<usize>], query: &[usize]) -> Result<(Vec<f64>, f64)> {
        self.check_evidence(evidence)?;
        for &q in query {
            if evidence.get(q).copied().flatten().is_some() {
                return Err(BnError::TargetInEvidence(self.variables[q].name().into()));
            }
        }
        let (f, z) = inference::joint_marginal(self, evidence, query, &EliminationOrder::MinFill)?;
        Ok((f.values_in_order(query), z))
    }

    /// Probability of a partial observation.
    pub fn evidence_probability(&self, evidence: &[Option<usize>]) -> Result<f64> {
        self.check_evidence(evidence)?;
        match inference::joint_marginal(self, evidence, &[], &EliminationOrder::MinFill) {
            Ok((_, z)) => Ok(z),
            Err(BnError::ZeroProbabilityEvidence) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn draw(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the accumulated mass: last state with mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

impl Factor {
    pub(crate) fn new_unsorted(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> UnsortedFactor {
        UnsortedFactor { vars, cards, values }
    }
}

/// Table whose scope is not yet in ascending order.
pub(crate) struct UnsortedFactor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl UnsortedFactor {
    pub(crate) fn sorted(self) -> Factor {
        let mut perm: Vec<usize> = (0..self.vars.len()).collect();
        perm.sort_by_key(|&p| self.vars[p]);
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Factor::new(self.vars, self.cards, self.values);
        }
        let vars: Vec<usize> = perm.iter().map(|&p| self.vars[p]).collect();
        let cards: Vec<usize> = perm.iter().map(|&p| self.cards[p]).collect();
        // strides of the listed layout
        let mut st = vec![1usize; self.vars.len()];
        for d in (0..self.vars.len().saturating_sub(1)).rev() {
            st[d] = st[d + 1] * self.cards[d + 1];
        }
        let src_strides: Vec<usize> = perm.iter().map(|&p| st[p]).collect();
        let size = self.values.len();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        let mut idx = 0usize;
        for _ in 0..size {
            values.push(self.values[idx]);
            for d in (0..vars.len()).rev() {
                assign[d] += 1;
                idx += src_strides[d];
                if assign[d] < cards[d] {
                    break;
                }
                idx -= src_strides[d] * cards[d];
                assign[d] = 0;
            }
        }
        Factor::new(vars, cards, values)
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn uniform_singleton_joint() {
        let dag = Dag::empty(vec!["X".into()]).unwrap();
        let bn = CausalBayesianNetwork::uniform(dag, vec![binary("X")]).unwrap();
        assert_eq!(bn.joint_probability(&[0]).unwrap(), 0.5);
    }

    #[test]
    fn two_factor_product() {
        let bn = chain2(0.3, 0.1, 0.8);
        assert!((bn.joint_probability(&[1, 1]).unwrap() - 0.24).abs() < 1e-15);
        let named: BTreeMap<String, String> = [("A".into(), "1".into()), ("B".into(), "1".into())].into();
        assert!((bn.joint_probability_named(&named).unwrap() - 0.24).abs() < 1e-15);
    }

    #[test]
    fn joint_rejects_bad_assignments() {
        let bn = chain2(0.3, 0.1, 0.8);
        assert!(matches!(bn.joint_probability(&[1]), Err(BnError::IncompleteAssignment(_))));
        assert!(matches!(bn.joint_probability(&[1, 2]), Err(BnError::StateOutOfRange { .. })));
    }

    #[test]
    fn joint_sums_to_one_by_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let bn = random_network(&mut rng, 4, 3, 0.5);
            let total: f64 = all_assignments(&bn.cardinalities())
                .iter()
                .map(|a| bn.joint_probability(a).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cpt_validation() {
        assert!(Cpt::new(0, 2, vec![], vec![], vec![0.5, 0.6]).is_err());
        assert!(Cpt::new(0, 2, vec![], vec![], vec![1.5, -0.5]).is_err());
        assert!(Cpt::new(0, 2, vec![1], vec![2], vec![0.5, 0.5]).is_err());
        assert!(Variable::with_states("V", &["a"]).is_err());
        assert!(Variable::with_states("V", &["a", "a"]).is_err());
    }

    #[test]
    fn cpt_rows_are_mixed_radix_first_parent_major() {
        let cpt = Cpt::uniform(2, 2, vec![0, 1], vec![3, 2]);
        assert_eq!(cpt.rows(), 6);
        assert_eq!(cpt.row_of(&[0, 0, 0]), 0);
        assert_eq!(cpt.row_of(&[0, 1, 0]), 1);
        assert_eq!(cpt.row_of(&[1, 0, 0]), 2);
        assert_eq!(cpt.row_of(&[2, 1, 0]), 5);
    }

    #[test]
    fn cpt_factor_layout() {
        // child 0 with parent 1: listed scope (1, 0) must be sorted to (0, 1)
        let cpt = Cpt::new(0, 2, vec![1], vec![3], vec![0.1, 0.9, 0.2, 0.8, 0.3, 0.7]).unwrap();
        let f = cpt.to_factor();
        assert_eq!(f.vars(), &[0, 1]);
        assert_eq!(f.values(), &[0.1, 0.2, 0.3, 0.9, 0.8, 0.7]);
    }

    #[test]
    fn empty_evidence_root_posterior_is_its_cpt() {
        let bn = chain2(0.3, 0.1, 0.8);
        let post = bn.posterior(&[None, None], 0).unwrap();
        assert!((post[1] - 0.3).abs() < 1e-15);
        assert!(matches!(bn.posterior(&[Some(1), None], 0), Err(BnError::TargetInEvidence(_))));
        let named: BTreeMap<String, String> = [("A".into(), "1".into())].into();
        assert!(matches!(bn.posterior_named(&named, "A"), Err(BnError::TargetInEvidence(_))));
    }

    #[test]
    fn zero_probability_evidence_is_an_error() {
        let bn = chain2(0.0, 0.5, 0.5);
        assert_eq!(bn.posterior(&[Some(1), None], 1), Err(BnError::ZeroProbabilityEvidence));
        assert_eq!(bn.evidence_probability(&[Some(1), None]).unwrap(), 0.0);
    }

    #[test]
    fn posterior_matches_enumeration_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let bn = random_network(&mut rng, 6, 3, 0.4);
            let target = rng.random_range(0..6);
            let mut ev = vec![None; 6];
            let mut placed = 0;
            while placed < 2 {
                let v = rng.random_range(0..6);
                if v != target && ev[v].is_none() {
                    ev[v] = Some(rng.random_range(0..bn.variables()[v].cardinality()));
                    placed += 1;
                }
            }
            let ve = bn.posterior(&ev, target).unwrap();
            let brute = enumerate_posterior(&bn, &ev, target);
            for (a, b) in ve.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-9, "{ve:?} vs {brute:?}");
            }
        }
    }

    #[test]
    fn elimination_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let bn = random_network(&mut rng, 7, 3, 0.4);
            let mut ev = vec![None; 7];
            ev[rng.random_range(1..7)] = Some(0);
            let a = bn.posterior(&ev, 0).unwrap();
            let mut order: Vec<usize> = (0..7).collect();
            for i in (1..7).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let b = bn.posterior_with_order(&ev, 0, EliminationOrder::Fixed(order)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_posterior_and_evidence_probability() {
        let bn = chain2(0.3, 0.1, 0.8);
        let (joint, z) = bn.joint_posterior(&[None, None], &[1, 0]).unwrap();
        // order (B, A), A fastest
        let expect = [0.7 * 0.9, 0.3 * 0.2, 0.7 * 0.1, 0.3 * 0.8];
        for (a, b) in joint.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((z - 1.0).abs() < 1e-15);
        let pb1 = bn.evidence_probability(&[None, Some(1)]).unwrap();
        assert!((pb1 - (0.07 + 0.24)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_network_samples_identical_records() {
        let bn = chain2(1.0, 0.0, 0.0);
        let d = bn.sample(50, 3);
        assert!(d.records().iter().all(|r| r == &vec![Some(1), Some(0)]));
    }

    #[test]
    fn sampling_is_seeded() {
        let bn = chain2(0.3, 0.1, 0.8);
        assert_eq!(bn.sample(100, 42), bn.sample(100, 42));
        assert_ne!(bn.sample(100, 42), bn.sample(100, 43));
    }

    #[test]
    fn sample_frequency_within_three_sigma() {
        let bn = chain2(0.3, 0.1, 0.8);
        let n = 50_000;
        let d = bn.sample(n, 9);
        let ones = d.records().iter().filter(|r| r[0] == Some(1)).count() as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.3).abs() < 3.0 * sigma);
        // conditional rows as well
        let a1: Vec<_> = d.records().iter().filter(|r| r[0] == Some(1)).collect();
        let b1 = a1.iter().filter(|r| r[1] == Some(1)).count() as f64 / a1.len() as f64;
        let sigma = (0.8f64 * 0.2 / a1.len() as f64).sqrt();
        assert!((b1 - 0.8).abs() < 3.0 * sigma);
    }

    #[test]
    fn log_likelihood_cases() {
        let dag = Dag::empty(vec!["X".into()]).unwrap();
        let bn = CausalBayesianNetwork::uniform(dag, vec![binary("X")]).unwrap();
        let d = Dataset::new(bn.variables().to_vec(), vec![vec![Some(0)]]).unwrap();
        assert!((bn.log_likelihood(&d).unwrap() - 0.5f64.ln()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bn = random_network(&mut rng, 4, 3, 0.5);
        let d = bn.sample(20, 1);
        let ll = bn.log_likelihood(&d).unwrap();
        let oracle: f64 = d
            .records()
            .iter()
            .map(|r| {
                let a: Vec<usize> = r.iter().map(|c| c.unwrap()).collect();
                bn.cpts().iter().map(|c| c.prob(&a)).product::<f64>().ln()
            })
            .sum();
        assert!((ll - oracle).abs() < 1e-9);
        let doubled = d.concat(&d).unwrap();
        assert_eq!(bn.log_likelihood(&doubled).unwrap(), {
            // same summation order: records then again
            let mut t = 0.0;
            for r in doubled.records() {
                let a: Vec<usize> = r.iter().map(|c| c.unwrap()).collect();
                t += bn.joint_probability(&a).unwrap().ln();
            }
            t
        });
        assert!((bn.log_likelihood(&doubled).unwrap() - 2.0 * ll).abs() < 1e-9);

        let impossible = chain2(0.0, 0.5, 0.5);
        let d = Dataset::new(impossible.variables().to_vec(), vec![vec![Some(1), Some(0)]]).unwrap();
        assert_eq!(impossible.log_likelihood(&d).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn draw_covers_rounding_tail() {
        assert_eq!(draw(&[0.5, 0.5], 0.0), 0);
        assert_eq!(draw(&[0.5, 0.5], 0.75), 1);
        assert_eq!(draw(&[0.3, 0.7, 0.0], 1.0 - 1e-18), 1);
    }
}
