//! Convergence diagnostics: split-chain potential scale reduction factor.

use crate::error::{Error, Result};
use crate::real::{cv, cvu, Real};

fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &b| a + b) / cvu::<T>(xs.len())
}

fn sample_var<T: Real>(xs: &[T]) -> T {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).fold(T::zero(), |a, b| a + b) / cvu::<T>(xs.len() - 1)
}

/// Split-chain potential scale reduction factor on scalar traces.
///
/// Each trace is split in half (the middle draw of an odd-length trace is
/// dropped), then R̂ = sqrt((B/W + n − 1)/n) over the 2m half-chains.
/// Identical traces (bitwise, e.g. two runs with one seed) and constant
/// traces return exactly 1 by convention.
pub fn gelman_rubin<T: Real>(traces: &[Vec<T>]) -> Result<T> {
    if traces.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 traces, got {}",
            traces.len()
        )));
    }
    if traces[1..].iter().all(|t| t == &traces[0]) {
        return Ok(T::one());
    }
    let len = traces.iter().map(|t| t.len()).min().unwrap();
    if len < 10 {
        return Err(Error::InvalidArgument(format!("traces must have length >= 10, got {len}")));
    }
    if traces.iter().any(|t| t.len() != len) {
        return Err(Error::InvalidArgument("traces must have equal lengths".into()));
    }
    let half = len / 2;
    let mut chains: Vec<&[T]> = Vec::with_capacity(traces.len() * 2);
    for t in traces {
        chains.push(&t[..half]);
        chains.push(&t[len - half..]);
    }
    let means: Vec<T> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<T> = chains.iter().map(|c| sample_var(c)).collect();
    let n = cvu::<T>(half);
    let b = n * sample_var(&means);
    let w = mean(&vars);
    if b == T::zero() {
        return Ok(T::one());
    }
    if w == T::zero() {
        return Ok(cv::<T>(f64::INFINITY));
    }
    Ok(((b / w + n - T::one()) / n).sqrt())
}

/// Split R̂ of a single trace: its two halves treated as separate chains.
pub fn split_rhat<T: Real>(trace: &[T]) -> Result<T> {
    if trace.len() < 20 {
        return Err(Error::InvalidArgument("trace too short to split".into()));
    }
    let half = trace.len() / 2;
    gelman_rubin(&[trace[..half].to_vec(), trace[trace.len() - half..].to_vec()])
}

/// First iteration count n (scanned in steps of `step`, starting at
/// `min_len`) at which the chain looks converged: the first half of the
/// prefix is treated as warmup and the split R̂ of the second half must drop
/// below `threshold`.
pub fn iterations_to_converge<T: Real>(
    trace: &[T],
    threshold: T,
    min_len: usize,
    step: usize,
) -> Option<usize> {
    let mut n = min_len.max(40);
    while n <= trace.len() {
        if let Ok(r) = split_rhat(&trace[n / 2..n]) {
            if r < threshold {
                return Some(n);
            }
        }
        n += step.max(1);
    }
    None
}
