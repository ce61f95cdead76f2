//! Shared helpers for dense tables over joint discrete states.
//!
//! Tables are stored flat in row-major order with the *last* scope
//! variable fastest; the same layout is used by the model text format.

use crate::real::Real;

/// Strides for a row-major layout with the last variable fastest.
pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cards[k + 1];
    }
    s
}

pub(crate) fn table_len(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Visits every joint assignment in layout order.
pub(crate) fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let total = table_len(cards);
    let mut state = vec![0usize; cards.len()];
    for lin in 0..total {
        f(&state, lin);
        for k in (0..cards.len()).rev() {
            state[k] += 1;
            if state[k] < cards[k] {
                break;
            }
            state[k] = 0;
        }
    }
}

/// Stable log-sum-exp over a slice; empty input gives -inf.
pub(crate) fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let mut max = T::neg_infinity();
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = T::zero();
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator for one-pass enumeration.
pub(crate) struct OnlineLse<T: Real> {
    max: T,
    sum: T,
}

impl<T: Real> OnlineLse<T> {
    pub(crate) fn new() -> Self {
        OnlineLse {
            max: T::neg_infinity(),
            sum: T::zero(),
        }
    }

    pub(crate) fn push(&mut self, x: T) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            if self.max.is_finite() {
                self.sum = self.sum * (self.max - x).exp() + T::one();
            } else {
                self.sum = T::one();
            }
            self.max = x;
        }
    }

    pub(crate) fn value(&self) -> T {
        if self.max.is_finite() {
            self.max + self.sum.ln()
        } else {
            self.max
        }
    }
}

/// Shannon entropy in nats with the 0 log 0 = 0 convention.
pub(crate) fn shannon_entropy<T: Real>(probs: &[T]) -> T {
    let mut h = T::zero();
    for &p in probs {
        if p > T::zero() {
            h -= p * p.ln();
        }
    }
    h
}

/// Normalizes a log-space table in place (linear-space sum becomes one)
/// and returns the log normalizer.
pub(crate) fn normalize_log<T: Real>(table: &mut [T]) -> T {
    let z = log_sum_exp(table);
    if z.is_finite() {
        for x in table.iter_mut() {
            *x -= z;
        }
    }
    z
}
