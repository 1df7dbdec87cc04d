//! Synthetic missingness: MCAR, MAR (driven by another column) and MNAR
//! (driven by the blanked column's own value).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mechanism {
    Mcar,
    Mar { driver: String },
    Mnar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub target: String,
    pub seed: u64,
}

/// Per-state blanking probabilities for MAR/MNAR.
///
/// State `j` of `J` gets weight `2j / (J - 1)`, so weights average one over
/// the states. Probabilities are `min(1, s * weight)` with the scale `s`
/// chosen so that their unweighted mean over states equals `rate`. State 0
/// is never blanked, which caps the reachable mean at `(J - 1) / J`; above
/// that every other state is blanked with certainty.
pub fn missing_probabilities(rate: f64, states: usize) -> Vec<f64> {
    let j_max = (states - 1) as f64;
    let weights: Vec<f64> = (0..states).map(|j| 2.0 * j as f64 / j_max).collect();
    let mean_at = |s: f64| weights.iter().map(|w| (s * w).min(1.0)).sum::<f64>() / states as f64;
    let cap = j_max / states as f64;
    if rate >= cap {
        return weights.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
    }
    let scale = if rate * 2.0 <= 1.0 {
        rate
    } else {
        let (mut lo, mut hi) = (rate, 1.0f64);
        while mean_at(hi) < rate {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    weights.iter().map(|w| (scale * w).min(1.0)).collect()
}

/// Blanks cells of `spec.target`. One uniform draw per record, in record
/// order, regardless of mechanism. Other columns are never touched.
pub fn inject_missing(data: &Dataset, spec: &MissingnessSpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.rate) {
        return Err(DataError::Precondition(format!("rate {} outside [0, 1]", spec.rate)));
    }
    let target = data.index_of(&spec.target)?;
    if data.records().iter().any(|r| r[target].is_none()) {
        return Err(DataError::Precondition(format!(
            "column `{}` already has missing cells",
            spec.target
        )));
    }
    let driver = match &spec.mechanism {
        Mechanism::Mar { driver } => {
            let d = data.index_of(driver)?;
            if d == target {
                return Err(DataError::Precondition("MAR driver must differ from the target".into()));
            }
            Some(d)
        }
        Mechanism::Mnar => Some(target),
        Mechanism::Mcar => None,
    };
    let per_state = driver.map(|d| missing_probabilities(spec.rate, data.variables()[d].cardinality()));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = data.records().to_vec();
    for rec in &mut records {
        let u: f64 = rng.random();
        let p = match (driver, &per_state) {
            (Some(d), Some(ps)) => rec[d].map(|s| ps[s]).unwrap_or(spec.rate),
            _ => spec.rate,
        };
        if u < p {
            rec[target] = None;
        }
    }
    data.with_records(records)
}
