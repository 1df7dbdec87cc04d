/// Nonnegative table over an ordered scope of variables (ascending indices),
/// row-major with the last scope variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(cards.iter().product::<usize>(), values.len());
        Factor { vars, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn strides(cards: &[usize]) -> Vec<usize> {
        let mut s = vec![1; cards.len()];
        for d in (0..cards.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * cards[d + 1];
        }
        s
    }

    /// Stride of each variable of `scope` inside `self` (0 when absent).
    fn strides_in(&self, scope: &[usize]) -> Vec<usize> {
        let own = Factor::strides(&self.cards);
        scope
            .iter()
            .map(|v| match self.vars.binary_search(v) {
                Ok(p) => own[p],
                Err(_) => 0,
            })
            .collect()
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = Vec::with_capacity(self.vars.len() + other.vars.len());
        let mut cards = Vec::with_capacity(vars.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.vars.len() || j < other.vars.len() {
            let take_self = j >= other.vars.len() || (i < self.vars.len() && self.vars[i] <= other.vars[j]);
            if take_self {
                if j < other.vars.len() && self.vars[i] == other.vars[j] {
                    j += 1;
                }
                vars.push(self.vars[i]);
                cards.push(self.cards[i]);
                i += 1;
            } else {
                vars.push(other.vars[j]);
                cards.push(other.cards[j]);
                j += 1;
            }
        }
        let sa = self.strides_in(&vars);
        let sb = other.strides_in(&vars);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..vars.len()).rev() {
                assign[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if assign[d] < cards[d] {
                    break;
                }
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
                assign[d] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    /// Sums `var` out of the factor.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(p) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        let target = Factor {
            vars,
            cards,
            values: Vec::new(),
        };
        let st = target.strides_in(&self.vars);
        let mut values = vec![0.0; target.cards.iter().product()];
        let mut assign = vec![0usize; self.vars.len()];
        let mut it = 0usize;
        for &v in &self.values {
            values[it] += v;
            for d in (0..self.vars.len()).rev() {
                assign[d] += 1;
                it += st[d];
                if assign[d] < self.cards[d] {
                    break;
                }
                it -= st[d] * self.cards[d];
                assign[d] = 0;
            }
        }
        Factor { values, ..target }
    }

    /// Fixes `var` to `state`, dropping it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Ok(p) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let strides = Factor::strides(&self.cards);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        let outer: usize = self.cards[..p].iter().product();
        let inner = strides[p];
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * self.cards[p] * inner + state * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        Factor { vars, cards, values }
    }

    /// Reorders values to match the given scope order (a permutation of
    /// `self.vars`), last listed variable fastest.
    pub fn values_in_order(&self, order: &[usize]) -> Vec<f64> {
        let strides = self.strides_in(order);
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.vars.binary_search(v).expect("variable in scope")])
            .collect();
        let size: usize = cards.iter().product();
        let mut out = Vec::with_capacity(size);
        let mut assign = vec![0usize; order.len()];
        let mut idx = 0usize;
        for _ in 0..size {
            out.push(self.values[idx]);
            for d in (0..order.len()).rev() {
                assign[d] += 1;
                idx += strides[d];
                if assign[d] < cards[d] {
                    break;
                }
                idx -= strides[d] * cards[d];
                assign[d] = 0;
            }
        }
        out
    }
}
