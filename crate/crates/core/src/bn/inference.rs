use std::collections::BTreeSet;

use super::{BnError, CausalBayesianNetwork, Factor, Result};

/// Elimination ordering used by variable elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EliminationOrder {
    /// Greedy min-fill; ties go to fewer neighbours, then lower index.
    MinFill,
    /// Explicit order. Variables not listed are eliminated last, by index.
    Fixed(Vec<usize>),
}

/// Ancestral closure of `seeds`. Everything outside it is barren and sums
/// out to one.
fn ancestral_set(bn: &CausalBayesianNetwork, seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; bn.len()];
    let mut stack: Vec<usize> = seeds.collect();
    while let Some(v) = stack.pop() {
        if keep[v] {
            continue;
        }
        keep[v] = true;
        stack.extend(bn.dag().parent_indices(v).iter().copied().filter(|&p| !keep[p]));
    }
    keep
}

fn min_fill_order(scopes: &[Vec<usize>], eliminate: &[usize], n: usize) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for s in scopes {
        for &a in s {
            for &b in s {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = eliminate.iter().copied().collect();
    let mut order = Vec::with_capacity(eliminate.len());
    while !remaining.is_empty() {
        let best = remaining
            .iter()
            .copied()
            .min_by_key(|&v| {
                let nb: Vec<usize> = adj[v].iter().copied().collect();
                let mut fill = 0usize;
                for (i, &a) in nb.iter().enumerate() {
                    for &b in &nb[i + 1..] {
                        if !adj[a].contains(&b) {
                            fill += 1;
                        }
                    }
                }
                (fill, nb.len(), v)
            })
            .expect("nonempty");
        let nb: Vec<usize> = adj[best].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&best);
        }
        adj[best].clear();
        remaining.remove(&best);
        order.push(best);
    }
    order
}

/// Normalized joint over `query` (scope sorted ascending) given evidence,
/// together with the probability of the evidence.
pub(crate) fn joint_marginal(
    bn: &CausalBayesianNetwork,
    evidence: &[Option<usize>],
    query: &[usize],
    order: &EliminationOrder,
) -> Result<(Factor, f64)> {
    let observed = evidence.iter().enumerate().filter(|(_, e)| e.is_some()).map(|(i, _)| i);
    let relevant = ancestral_set(bn, query.iter().copied().chain(observed));

    let mut factors: Vec<Factor> = Vec::new();
    for v in (0..bn.len()).filter(|&v| relevant[v]) {
        let mut f = bn.cpt(v).to_factor();
        for &u in f.vars().to_vec().iter() {
            if let Some(s) = evidence[u] {
                f = f.reduce(u, s);
            }
        }
        factors.push(f);
    }

    let eliminable: Vec<usize> = (0..bn.len())
        .filter(|&v| relevant[v] && evidence[v].is_none() && !query.contains(&v))
        .collect();
    let elim_order = match order {
        EliminationOrder::MinFill => {
            let scopes: Vec<Vec<usize>> = factors.iter().map(|f| f.vars().to_vec()).collect();
            min_fill_order(&scopes, &eliminable, bn.len())
        }
        EliminationOrder::Fixed(list) => {
            let mut o: Vec<usize> = list.iter().copied().filter(|v| eliminable.contains(v)).collect();
            o.extend(eliminable.iter().copied().filter(|v| !list.contains(v)));
            o
        }
    };

    for var in elim_order {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        if let Some(prod) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(prod.sum_out(var));
        }
    }

    // scalars only scale the evidence probability; keeping them out of the
    // normalized joint makes equal posteriors bit-identical
    let (scalars, scoped): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars().is_empty());
    let scale: f64 = scalars.iter().map(Factor::total).product();
    let joint = scoped
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .unwrap_or_else(|| Factor::scalar(1.0));
    let local = joint.total();
    let z = local * scale;
    if !(z > 0.0) || !z.is_finite() {
        return Err(BnError::ZeroProbabilityEvidence);
    }
    let values = joint.values().iter().map(|v| v / local).collect();
    Ok((Factor::new(joint.vars().to_vec(), joint.cards().to_vec(), values), z))
}
