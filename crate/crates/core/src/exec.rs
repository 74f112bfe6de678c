//! Deterministic data-parallel helpers.
//!
//! Reductions run over a fixed block partition: each block is summed
//! sequentially and the block sums are combined by an in-order pairwise tree.
//! The result is therefore independent of thread count and identical with the
//! `parallel` feature disabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const BLOCK: usize = 64;

/// Order-preserving map over `0..n`.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Blocked sum of `f(0) + ... + f(n-1)` with a fixed reduction order.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partial = |b: usize| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    let sums = map_indexed(blocks, partial);
    tree_sum(sums)
}

/// Blocked vector-accumulating sum: adds `f(i, acc)` contributions for each
/// `i` in `0..n` into a zero vector of length `len`, block order fixed.
pub fn sum_vectors<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partial = |b: usize| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let mut acc = vec![0.0; len];
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    };
    let mut parts = map_indexed(blocks, partial);
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_else(|| vec![0.0; len])
}

/// In-order pairwise tree sum.
pub fn tree_sum(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    while v.len() > 1 {
        let half = v.len().div_ceil(2);
        for i in 0..v.len() / 2 {
            v[i] = v[2 * i] + v[2 * i + 1];
        }
        if v.len() % 2 == 1 {
            v[half - 1] = v[v.len() - 1];
        }
        v.truncate(half);
    }
    v[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sum_matches_sequential_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(tree_sum(v), 500500.0);
    }

    #[test]
    fn sum_indexed_handles_empty_and_partial_blocks() {
        assert_eq!(sum_indexed(0, |_| 1.0), 0.0);
        assert_eq!(sum_indexed(1, |_| 2.5), 2.5);
        assert_eq!(sum_indexed(BLOCK + 3, |_| 1.0), (BLOCK + 3) as f64);
    }

    #[test]
    fn sum_vectors_accumulates_per_slot() {
        let out = sum_vectors(200, 3, |i, acc| {
            acc[i % 3] += 1.0;
        });
        assert_eq!(out.iter().sum::<f64>(), 200.0);
        assert_eq!(out[0], 67.0);
        assert_eq!(out[1], 67.0);
        assert_eq!(out[2], 66.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn reductions_are_thread_count_invariant() {
        let data: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let run = || sum_indexed(data.len(), |i| data[i] * data[i]);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(one.to_bits(), many.to_bits());
    }
}
