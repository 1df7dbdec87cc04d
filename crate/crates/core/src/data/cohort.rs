//! Clinical cohort schema (three temporal tiers plus an optional hospital
//! context variable) and a stand-in reference network over it. The reference
//! network is synthetic: it only exists to generate structurally faithful
//! cohorts for tests and demos.

use super::{DataError, Result};
use crate::bn::{CausalBayesianNetwork, Cpt, Variable};
use crate::graph::{Dag, PriorKnowledge};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableRole {
    /// Member of temporal tier `n` (1 = earliest).
    Tier(usize),
    /// Context variable: may have children, never parents.
    Context,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSchema {
    variables: Vec<Variable>,
    roles: Vec<VariableRole>,
}

pub const HOSPITAL: &str = "Hospital";
pub const TARGET: &str = "LNM";

const PRE_OPERATIVE: [(&str, &[&str]); 10] = [
    ("ER", &["negative", "positive"]),
    ("PR", &["negative", "positive"]),
    ("L1CAM", &["negative", "positive"]),
    ("p53", &["wildtype", "mutant"]),
    ("CervicalCytology", &["benign", "malignant"]),
    ("Thrombocytosis", &["no", "yes"]),
    ("Lymphadenopathy", &["no", "yes"]),
    ("LVSI", &["no", "yes"]),
    ("CA125", &["normal", "elevated"]),
    ("PreoperativeGrade", &["G1", "G2", "G3"]),
];

const POST_OPERATIVE: [(&str, &[&str]); 3] = [
    ("Chemotherapy", &["no", "yes"]),
    ("Radiotherapy", &["no", "yes"]),
    ("PostoperativeGrade", &["G1", "G2", "G3"]),
];

const OUTCOMES: [(&str, &[&str]); 5] = [
    ("DSS1", &["alive", "dead"]),
    ("DSS3", &["alive", "dead"]),
    ("DSS5", &["alive", "dead"]),
    ("LNM", &["no", "yes"]),
    ("MyometrialInvasion", &["lt50", "ge50"]),
];

/// Reference edges with their logit weights.
const REFERENCE_EDGES: [(&str, &str, f64); 23] = [
    ("PreoperativeGrade", "p53", 1.6),
    ("PreoperativeGrade", "L1CAM", 1.4),
    ("PreoperativeGrade", "ER", -1.5),
    ("ER", "PR", 3.0),
    ("PreoperativeGrade", "LVSI", 1.2),
    ("Thrombocytosis", "CA125", 2.2),
    ("LVSI", "Lymphadenopathy", 2.4),
    ("PreoperativeGrade", "PostoperativeGrade", 2.5),
    ("LVSI", "Chemotherapy", 2.0),
    ("CervicalCytology", "Radiotherapy", 2.0),
    ("PostoperativeGrade", "Radiotherapy", 1.0),
    ("L1CAM", "LNM", 1.8),
    ("p53", "LNM", 1.5),
    ("LVSI", "LNM", 2.2),
    ("Lymphadenopathy", "LNM", 2.6),
    ("Chemotherapy", "LNM", 1.2),
    ("LNM", "MyometrialInvasion", 2.5),
    ("PostoperativeGrade", "MyometrialInvasion", 0.8),
    ("LNM", "DSS1", 2.0),
    ("CA125", "DSS1", 1.2),
    ("DSS1", "DSS3", 4.0),
    ("DSS3", "DSS5", 4.0),
    ("Radiotherapy", "DSS3", -1.0),
];

const HOSPITAL_EDGES: [(&str, &str, f64); 3] = [
    (HOSPITAL, "Chemotherapy", 1.5),
    (HOSPITAL, "Radiotherapy", 1.5),
    (HOSPITAL, "PostoperativeGrade", 1.0),
];

/// Logit intercepts; ternary variables use them as the slope origin.
fn bias(name: &str) -> f64 {
    match name {
        "ER" => 1.8,
        "PR" => -1.2,
        "L1CAM" => -2.5,
        "p53" => -2.6,
        "CervicalCytology" => -2.0,
        "Thrombocytosis" => -1.8,
        "Lymphadenopathy" => -3.0,
        "LVSI" => -2.0,
        "CA125" => -1.6,
        "PreoperativeGrade" => 0.0,
        "Chemotherapy" => -2.2,
        "Radiotherapy" => -1.8,
        "PostoperativeGrade" => -2.5,
        "DSS1" => -4.0,
        "DSS3" => -3.5,
        "DSS5" => -3.0,
        "LNM" => -4.2,
        "MyometrialInvasion" => -1.6,
        _ => 0.0,
    }
}

/// Hospital-specific effects, centred on zero.
const HOSPITAL_EFFECT: [f64; 10] = [-1.0, -0.6, -0.3, 0.0, 0.2, 0.4, 0.6, 0.9, -0.8, 0.5];
const HOSPITAL_SHARE: [f64; 10] = [0.16, 0.14, 0.12, 0.11, 0.10, 0.09, 0.08, 0.08, 0.07, 0.05];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl CohortSchema {
    pub fn new(variables: Vec<Variable>, roles: Vec<VariableRole>) -> Result<Self> {
        if variables.len() != roles.len() {
            return Err(DataError::Precondition("one role per variable".into()));
        }
        Ok(CohortSchema { variables, roles })
    }

    /// The eighteen clinical variables in tier order, optionally preceded by
    /// the ten-level hospital context variable.
    pub fn endometrial(with_hospital: bool) -> Self {
        let mut variables = Vec::new();
        let mut roles = Vec::new();
        if with_hospital {
            let states = (1..=10).map(|h| format!("H{h:02}")).collect();
            variables.push(Variable::new(HOSPITAL, states).expect("valid"));
            roles.push(VariableRole::Context);
        }
        for (tier, group) in [&PRE_OPERATIVE[..], &POST_OPERATIVE[..], &OUTCOMES[..]].iter().enumerate() {
            for (name, states) in group.iter() {
                variables.push(Variable::with_states(name, states).expect("valid"));
                roles.push(VariableRole::Tier(tier + 1));
            }
        }
        CohortSchema { variables, roles }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn roles(&self) -> &[VariableRole] {
        &self.roles
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name().to_string()).collect()
    }

    /// Tier ordering plus context-variable constraints.
    pub fn prior_knowledge(&self) -> PriorKnowledge {
        let max_tier = self
            .roles
            .iter()
            .filter_map(|r| match r {
                VariableRole::Tier(t) => Some(*t),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let tiers: Vec<Vec<String>> = (1..=max_tier)
            .map(|t| {
                self.variables
                    .iter()
                    .zip(&self.roles)
                    .filter(|(_, r)| **r == VariableRole::Tier(t))
                    .map(|(v, _)| v.name().to_string())
                    .collect::<Vec<_>>()
            })
            .filter(|t| !t.is_empty())
            .collect();
        let mut k = PriorKnowledge::new(vec![], vec![], tiers).expect("tiers partition the variables");
        let names = self.names();
        for (v, r) in self.variables.iter().zip(&self.roles) {
            if *r == VariableRole::Context {
                k = k.with_context_variable(v.name(), &names).expect("context placement is feasible");
            }
        }
        k
    }

    /// Schema text: `name | tier | state, state, ...` per line, where tier is
    /// a positive integer, `context` or `-`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# name | tier | states\n");
        for (v, r) in self.variables.iter().zip(&self.roles) {
            let tier = match r {
                VariableRole::Tier(t) => t.to_string(),
                VariableRole::Context => "context".into(),
                VariableRole::Unconstrained => "-".into(),
            };
            s.push_str(&format!("{} | {} | {}\n", v.name(), tier, v.states().join(", ")));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut variables = Vec::new();
        let mut roles = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| DataError::Schema { line: no + 1, message };
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(err("expected `name | tier | states`".into()));
            }
            let role = match parts[1] {
                "-" | "" => VariableRole::Unconstrained,
                "context" => VariableRole::Context,
                t => VariableRole::Tier(
                    t.parse::<usize>()
                        .ok()
                        .filter(|&t| t > 0)
                        .ok_or_else(|| err(format!("bad tier `{t}`")))?,
                ),
            };
            let states: Vec<String> = parts[2]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            variables.push(Variable::new(parts[0], states).map_err(|e| err(e.to_string()))?);
            roles.push(role);
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name() == v.name()) {
                return Err(DataError::Schema {
                    line: 0,
                    message: format!("duplicate variable `{}`", v.name()),
                });
            }
        }
        CohortSchema::new(variables, roles)
    }

    /// Stand-in ground truth over this schema. Only defined for the built-in
    /// endometrial schema.
    pub fn reference_network(&self) -> Result<CausalBayesianNetwork> {
        let names = self.names();
        let with_hospital = names.iter().any(|n| n == HOSPITAL);
        let mut edges: Vec<(&str, &str, f64)> = REFERENCE_EDGES.to_vec();
        if with_hospital {
            edges.extend(HOSPITAL_EDGES);
        }
        let pairs: Vec<(&str, &str)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
        let dag = Dag::new(names.clone(), &pairs).map_err(|e| DataError::Precondition(e.to_string()))?;
        let weight = |a: usize, b: usize| {
            edges
                .iter()
                .find(|(x, y, _)| *x == names[a] && *y == names[b])
                .map(|e| e.2)
                .unwrap_or(0.0)
        };
        let effect = |p: usize, s: usize| {
            if names[p] == HOSPITAL {
                HOSPITAL_EFFECT[s]
            } else {
                s as f64
            }
        };
        let mut cpts = Vec::with_capacity(names.len());
        for child in 0..names.len() {
            let parents = dag.parent_indices(child).to_vec();
            let cards: Vec<usize> = parents.iter().map(|&p| self.variables[p].cardinality()).collect();
            let k = self.variables[child].cardinality();
            let rows: usize = cards.iter().product();
            let mut table = Vec::with_capacity(rows * k);
            for r in 0..rows {
                // decode mixed radix, first parent most significant
                let mut rem = r;
                let mut states = vec![0usize; parents.len()];
                for d in (0..parents.len()).rev() {
                    states[d] = rem % cards[d];
                    rem /= cards[d];
                }
                let eta: f64 = parents
                    .iter()
                    .zip(&states)
                    .map(|(&p, &s)| weight(p, child) * effect(p, s))
                    .sum::<f64>();
                if names[child] == HOSPITAL {
                    table.extend_from_slice(&HOSPITAL_SHARE);
                } else if k == 2 {
                    let p = sigmoid(bias(&names[child]) + eta);
                    table.extend([1.0 - p, p]);
                } else {
                    // ordinal: logits j * eta + centred offsets
                    let logits: Vec<f64> = (0..k)
                        .map(|j| j as f64 * (eta + bias(&names[child])) - (j as f64 - (k - 1) as f64 / 2.0).powi(2) * 0.3)
                        .collect();
                    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                    let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                    let z: f64 = ex.iter().sum();
                    table.extend(ex.iter().map(|e| e / z));
                }
            }
            // re-normalize to kill rounding drift
            for row in table.chunks_mut(k) {
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= z);
            }
            cpts.push(Cpt::new(child, k, parents, cards, table)?);
        }
        Ok(CausalBayesianNetwork::new(dag, self.variables.clone(), cpts)?)
    }
}
