//! Chain initialization: k-means style seeding of the starting partition.

use crate::model::DataMatrix;
use crate::real::{cv, Real};
use nalgebra::DVector;
use rand::Rng;

/// Lloyd iterations from randomly chosen data rows. Returns one label per
/// observation in 0..k; empty clusters keep their stale centers and simply
/// end up unused, the caller compacts labels afterwards.
pub fn kmeans_labels<T: Real, R: Rng + ?Sized>(
    data: &DataMatrix<T>,
    k: usize,
    n_iter: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = data.n_obs();
    let k = k.clamp(1, n);
    // sample k distinct rows as initial centers
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng.gen::<u64>() as usize) % (n - i);
        idx.swap(i, j);
    }
    let mut centers: Vec<DVector<T>> = idx[..k].iter().map(|&i| data.row(i)).collect();
    let mut labels = vec![0usize; n];
    for _ in 0..n_iter {
        for c in 0..n {
            let y = data.row(c);
            let mut best = 0usize;
            let mut best_d = cv::<T>(f64::INFINITY);
            for (j, ctr) in centers.iter().enumerate() {
                let d = (&y - ctr).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            labels[c] = best;
        }
        let mut sums = vec![DVector::<T>::zeros(data.dim()); k];
        let mut counts = vec![0usize; k];
        for c in 0..n {
            sums[labels[c]] += data.row(c);
            counts[labels[c]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = &sums[j] / cv::<T>(counts[j] as f64);
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn separates_two_blobs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            rows.push(if i < 10 { -10.0 + 0.01 * i as f64 } else { 10.0 + 0.01 * i as f64 });
        }
        let data =
            DataMatrix::new(DMatrix::from_column_slice(20, 1, &rows), vec!["m".into()]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let labels = kmeans_labels(&data, 2, 10, &mut rng);
        assert!(labels[..10].iter().all(|&l| l == labels[0]));
        assert!(labels[10..].iter().all(|&l| l == labels[10]));
        assert_ne!(labels[0], labels[10]);
    }

    #[test]
    fn k_larger_than_n_is_clamped() {
        let data = DataMatrix::new(
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]),
            vec!["m".into()],
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let labels = kmeans_labels(&data, 30, 5, &mut rng);
        assert_eq!(labels.len(), 3);
        assert!(labels.iter().all(|&l| l < 3));
    }
}
