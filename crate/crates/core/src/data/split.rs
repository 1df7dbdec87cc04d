use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, Result};

/// Seeded shuffle, then the first `floor(ratio * n)` records go to train.
///
/// With `stratify_on`, each state of that variable (records missing it form
/// one more group) contributes `floor(ratio * group)` records to train, and
/// the leftover quota goes to the groups with the largest remainders, so
/// per-state counts are within one record of proportional.
pub fn train_test_split(
    data: &Dataset,
    ratio: f64,
    seed: u64,
    stratify_on: Option<&str>,
) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::Precondition(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let quota = (ratio * n as f64).floor() as usize;

    let Some(var) = stratify_on else {
        let (train, test) = order.split_at(quota);
        return Ok((data.subset(train), data.subset(test)));
    };
    let col = data.index_of(var)?;
    let card = data.variables()[col].cardinality();
    // group index: state, or `card` for missing
    let group_of = |i: usize| data.records()[i][col].unwrap_or(card);
    let mut sizes = vec![0usize; card + 1];
    for &i in &order {
        sizes[group_of(i)] += 1;
    }
    let mut take: Vec<usize> = sizes.iter().map(|&s| (ratio * s as f64).floor() as usize).collect();
    let mut leftover = quota - take.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..=card).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = ratio * sizes[a] as f64 - take[a] as f64;
        let rb = ratio * sizes[b] as f64 - take[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for g in by_remainder {
        if leftover == 0 {
            break;
        }
        if take[g] < sizes[g] {
            take[g] += 1;
            leftover -= 1;
        }
    }
    let mut train = Vec::with_capacity(quota);
    let mut test = Vec::with_capacity(n - quota);
    for &i in &order {
        let g = group_of(i);
        if take[g] > 0 {
            take[g] -= 1;
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok((data.subset(&train), data.subset(&test)))
}
