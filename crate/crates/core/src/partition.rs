//! Posterior partition summarization and clustering evaluation metrics:
//! posterior similarity matrix, Binder-loss point estimate, F-measure point
//! estimate, total F-measure, and the limited F-measure for small clusters.

use crate::error::{Error, Result};
use crate::real::{cv, cvu, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A partition of C items into clusters labeled 1..=K, every label occupied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<u32>,
    n_clusters: usize,
}

impl Partition {
    /// Validates that labels are exactly 1..=K with every label present.
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("partition must be non-empty".into()));
        }
        let k = *labels.iter().max().unwrap() as usize;
        let mut seen = vec![false; k + 1];
        for &l in &labels {
            if l == 0 {
                return Err(Error::InvalidArgument("labels must start at 1".into()));
            }
            seen[l as usize] = true;
        }
        if !seen[1..].iter().all(|&s| s) {
            return Err(Error::InvalidArgument(format!("labels 1..={k} must all occur")));
        }
        Ok(Self { labels, n_clusters: k })
    }

    /// Compacts arbitrary labels to 1..=K in order of first appearance.
    pub fn from_raw_labels<L: Copy + Eq + std::hash::Hash>(raw: &[L]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("partition must be non-empty".into()));
        }
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &l in raw {
            let next = map.len() as u32 + 1;
            labels.push(*map.entry(l).or_insert(next));
        }
        Ok(Self { n_clusters: map.len(), labels })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Member indices per cluster, index k−1 for label k.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize - 1].push(i);
        }
        out
    }
}

/// Posterior co-clustering probabilities: symmetric, unit diagonal, in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix<T: Real> {
    n: usize,
    entries: Vec<T>, // row-major n x n
}

impl<T: Real> SimilarityMatrix<T> {
    pub fn from_entries(n: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidArgument("similarity matrix size mismatch".into()));
        }
        let s = Self { n, entries };
        for i in 0..n {
            if (s.get(i, i) - T::one()).abs() > cv::<T>(1e-12) {
                return Err(Error::InvalidArgument("similarity diagonal must be 1".into()));
            }
            for j in 0..i {
                let x = s.get(i, j);
                if x < T::zero() || x > T::one() || (x - s.get(j, i)).abs() > cv::<T>(1e-12) {
                    return Err(Error::InvalidArgument(
                        "similarity must be symmetric with entries in [0,1]".into(),
                    ));
                }
            }
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

/// Average of co-clustering indicator matrices over the given partitions.
pub fn similarity_matrix<T: Real>(partitions: &[Partition]) -> Result<SimilarityMatrix<T>> {
    let n_draws = partitions.len();
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one partition".into()));
    }
    let n = partitions[0].len();
    if partitions.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument("partitions have different lengths".into()));
    }
    // Integer counts are exact, so the parallel reduction order is immaterial.
    let counts = partitions
        .par_iter()
        .map(|p| {
            let l = p.labels();
            let mut m = vec![0u32; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if l[i] == l[j] {
                        m[i * n + j] = 1;
                    }
                }
            }
            m
        })
        .reduce(
            || vec![0u32; n * n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let denom = cvu::<T>(n_draws);
    let mut entries = vec![T::zero(); n * n];
    for i in 0..n {
        entries[i * n + i] = T::one();
        for j in (i + 1)..n {
            let v = cvu::<T>(counts[i * n + j] as usize) / denom;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_entries(n, entries)
}

/// Binder loss of one partition against a similarity matrix:
/// Σ_{c<d} 2 (δ_{l_c l_d} − ζ_cd)².
pub fn binder_loss<T: Real>(partition: &Partition, zeta: &SimilarityMatrix<T>) -> Result<T> {
    let n = partition.len();
    if zeta.n() != n {
        return Err(Error::InvalidArgument("partition and similarity size mismatch".into()));
    }
    let l = partition.labels();
    let two = cv::<T>(2.0);
    let mut loss = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let ind = if l[i] == l[j] { T::one() } else { T::zero() };
            let diff = ind - zeta.get(i, j);
            loss += two * diff * diff;
        }
    }
    Ok(loss)
}

/// The sampled partition minimizing the Binder loss, with its loss.
/// Ties break toward the earliest index.
pub fn binder_point_estimate<T: Real>(
    partitions: &[Partition],
    zeta: &SimilarityMatrix<T>,
) -> Result<(Partition, T)> {
    if partitions.is_empty() {
        return Err(Error::InvalidArgument("need at least one partition".into()));
    }
    let losses: Vec<T> = partitions
        .par_iter()
        .map(|p| binder_loss(p, zeta))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0usize;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best] {
            best = i;
        }
    }
    Ok((partitions[best].clone(), losses[best]))
}

/// F-measure between one predicted cluster and one reference cluster, given
/// their intersection and sizes: harmonic mean of precision |g∩h|/|h| and
/// recall |g∩h|/|g|.
fn f_pair_from_counts<T: Real>(inter: usize, pred_size: usize, ref_size: usize) -> T {
    if inter == 0 {
        return T::zero();
    }
    let i = cvu::<T>(inter);
    let pr = i / cvu::<T>(pred_size);
    let re = i / cvu::<T>(ref_size);
    cv::<T>(2.0) * pr * re / (pr + re)
}

/// F-measure between a predicted cluster `h` and a reference cluster `g`,
/// given as sets of observation indices.
pub fn f_measure_pair<T: Real>(h: &[usize], g: &[usize]) -> Result<T> {
    if h.is_empty() || g.is_empty() {
        return Err(Error::InvalidArgument("clusters must be non-empty".into()));
    }
    let hs: std::collections::HashSet<_> = h.iter().collect();
    let inter = g.iter().filter(|x| hs.contains(x)).count();
    Ok(f_pair_from_counts(inter, h.len(), g.len()))
}

type Counts = std::collections::HashMap<u32, usize>;
type PairCounts = std::collections::HashMap<(u32, u32), usize>;

// Contingency counts between two label vectors restricted to `universe`
// (all indices when None). Returns (intersections, pred sizes, ref sizes).
fn contingency(
    pred: &[u32],
    refp: &[u32],
    universe: Option<&[usize]>,
) -> (PairCounts, Counts, Counts) {
    let mut inter = std::collections::HashMap::new();
    let mut hsz = std::collections::HashMap::new();
    let mut gsz = std::collections::HashMap::new();
    let mut visit = |i: usize| {
        *inter.entry((pred[i], refp[i])).or_insert(0) += 1;
        *hsz.entry(pred[i]).or_insert(0) += 1;
        *gsz.entry(refp[i]).or_insert(0) += 1;
    };
    match universe {
        Some(u) => u.iter().for_each(|&i| visit(i)),
        None => (0..pred.len()).for_each(visit),
    }
    (inter, hsz, gsz)
}

fn f_total_from_labels<T: Real>(pred: &[u32], refp: &[u32], universe: Option<&[usize]>) -> T {
    let (inter, hsz, gsz) = contingency(pred, refp, universe);
    // best-match F per reference cluster
    let mut best: std::collections::HashMap<u32, T> = std::collections::HashMap::new();
    for (&(h, g), &c) in &inter {
        let f = f_pair_from_counts::<T>(c, hsz[&h], gsz[&g]);
        let e = best.entry(g).or_insert(T::zero());
        if f > *e {
            *e = f;
        }
    }
    let total_ref: usize = gsz.values().sum();
    let mut acc = T::zero();
    // deterministic order
    let mut gs: Vec<_> = gsz.iter().collect();
    gs.sort_unstable_by_key(|(g, _)| **g);
    for (g, &sz) in gs {
        acc += cvu::<T>(sz) * *best.get(g).unwrap_or(&T::zero());
    }
    acc / cvu::<T>(total_ref)
}

/// Total F-measure of a predicted partition against a reference partition:
/// the reference-size-weighted sum of best-matched pair F-measures. Not
/// symmetric in its arguments.
pub fn f_measure_total<T: Real>(pred: &Partition, refp: &Partition) -> Result<T> {
    if pred.len() != refp.len() {
        return Err(Error::InvalidArgument(format!(
            "partition lengths differ: {} vs {}",
            pred.len(),
            refp.len()
        )));
    }
    Ok(f_total_from_labels(pred.labels(), refp.labels(), None))
}

/// The sampled partition maximizing its average total F-measure against all
/// other sampled partitions. Ties break toward the earliest index.
pub fn f_point_estimate(partitions: &[Partition]) -> Result<Partition> {
    let n = partitions.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two partitions".into()));
    }
    if partitions.iter().any(|p| p.len() != partitions[0].len()) {
        return Err(Error::InvalidArgument("partitions have different lengths".into()));
    }
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0f64;
            for j in 0..n {
                if j != i {
                    acc += f_total_from_labels::<f64>(
                        partitions[i].labels(),
                        partitions[j].labels(),
                        None,
                    );
                }
            }
            acc / n as f64
        })
        .collect();
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(partitions[best].clone())
}

/// F-measure limited to small reference clusters.
///
/// Reference clusters with fewer than `p` observations select the predicted
/// clusters containing any of their members; the total F-measure is then
/// computed between those predicted clusters and the reference partition
/// induced on their union.
pub fn limited_f_measure<T: Real>(
    pred: &Partition,
    refp: &Partition,
    p: usize,
) -> Result<T> {
    if pred.len() != refp.len() {
        return Err(Error::InvalidArgument("partition lengths differ".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("size limit must be positive".into()));
    }
    let ref_clusters = refp.clusters();
    let small: Vec<bool> = ref_clusters.iter().map(|c| c.len() < p).collect();
    if !small.iter().any(|&s| s) {
        return Err(Error::UndefinedMetric(format!(
            "no reference cluster has fewer than {p} observations"
        )));
    }
    // predicted clusters touching any small reference cluster
    let mut selected = vec![false; pred.n_clusters()];
    for (i, &l) in refp.labels().iter().enumerate() {
        if small[l as usize - 1] {
            selected[pred.labels()[i] as usize - 1] = true;
        }
    }
    let universe: Vec<usize> = (0..pred.len())
        .filter(|&i| selected[pred.labels()[i] as usize - 1])
        .collect();
    Ok(f_total_from_labels(pred.labels(), refp.labels(), Some(&universe)))
}
