use serde::{Deserialize, Serialize};

use super::{BnError, CausalBayesianNetwork, Cpt, Result, Variable};
use crate::graph::Dag;

const FORMAT: &str = "cbn-model/1";

/// On-disk network: variables with ordered states, the edge list, and CPT
/// rows in mixed-radix parent order. Serialized as JSON; floats round-trip
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub variables: Vec<Variable>,
    pub edges: Vec<(String, String)>,
    pub cpts: Vec<CptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptEntry {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl From<&CausalBayesianNetwork> for ModelFile {
    fn from(bn: &CausalBayesianNetwork) -> Self {
        let name = |i: usize| bn.variables()[i].name().to_string();
        ModelFile {
            format: FORMAT.to_string(),
            variables: bn.variables().to_vec(),
            edges: bn.dag().named_edges(),
            cpts: bn
                .cpts()
                .iter()
                .map(|c| CptEntry {
                    child: name(c.child()),
                    parents: c.parents().iter().map(|&p| name(p)).collect(),
                    rows: (0..c.rows()).map(|r| c.row(r).to_vec()).collect(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    pub fn into_network(self) -> Result<CausalBayesianNetwork> {
        if self.format != FORMAT {
            return Err(BnError::ModelFile(format!("unsupported format `{}`", self.format)));
        }
        // serde bypasses the constructor checks
        for v in &self.variables {
            Variable::new(v.name(), v.states().to_vec())?;
        }
        let names: Vec<String> = self.variables.iter().map(|v| v.name().to_string()).collect();
        let dag = Dag::new(names, &self.edges)?;
        let mut slots: Vec<Option<Cpt>> = vec![None; dag.len()];
        for entry in self.cpts {
            let child = dag.index_of(&entry.child)?;
            let parents = entry
                .parents
                .iter()
                .map(|p| dag.index_of(p))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let cards = parents.iter().map(|&p| self.variables[p].cardinality()).collect();
            let table = entry.rows.into_iter().flatten().collect();
            if slots[child].is_some() {
                return Err(BnError::ModelFile(format!("two tables for `{}`", entry.child)));
            }
            slots[child] = Some(Cpt::new(child, self.variables[child].cardinality(), parents, cards, table)?);
        }
        let cpts = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| BnError::ModelFile(format!("no table for `{}`", dag.name(i)))))
            .collect::<Result<Vec<_>>>()?;
        CausalBayesianNetwork::new(dag, self.variables, cpts)
    }
}

impl CausalBayesianNetwork {
    pub fn to_model_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_model_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| BnError::ModelFile(e.to_string()))?;
        file.into_network()
    }
}
