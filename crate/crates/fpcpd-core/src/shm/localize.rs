use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Per-location anomaly scores from the location factor: `score[s]` is
/// the mean Euclidean distance from row `s` to its `k` nearest other
/// rows. A row far from every neighbour belongs to a location whose
/// response deviates from the rest of the structure.
pub fn localization_scores(b: &Matrix, k: usize) -> Result<Vec<f64>> {
    let rows = b.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if k >= rows {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must be smaller than the number of rows ({rows})"
        )));
    }
    let mut scores = Vec::with_capacity(rows);
    let mut dists = Vec::with_capacity(rows - 1);
    for s in 0..rows {
        dists.clear();
        for other in 0..rows {
            if other == s {
                continue;
            }
            let mut d2 = 0.0;
            for (a, b) in b.row(s).iter().zip(b.row(other).iter()) {
                let d = a - b;
                d2 += d * d;
            }
            dists.push(d2.sqrt());
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        scores.push(dists[..k].iter().sum::<f64>() / k as f64);
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rows_score_zero() {
        let b = Matrix::from_elem((6, 3), 1.25);
        let scores = localization_scores(&b, 2).unwrap();
        assert!(scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn outlier_row_scores_its_distance() {
        // Five rows in a tight cluster at the origin, one outlier at
        // distance 10: with k = 2 the outlier's score is about 10 and the
        // cluster rows stay near the intra-cluster spread.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b = Matrix::from_shape_fn((6, 2), |_| 0.01 * rng.gen::<f64>());
        b[[5, 0]] = 10.0;
        b[[5, 1]] = 0.0;
        let scores = localization_scores(&b, 2).unwrap();
        assert!((scores[5] - 10.0).abs() < 0.1, "outlier score {}", scores[5]);
        for s in &scores[..5] {
            assert!(*s < 0.05, "cluster score {s}");
        }
        let max_idx = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(max_idx, 5);
    }

    #[test]
    fn permuting_rows_permutes_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = Matrix::from_shape_fn((5, 3), |_| rng.gen::<f64>());
        let base = localization_scores(&b, 2).unwrap();
        let perm = [3usize, 0, 4, 1, 2];
        let mut permuted = Matrix::zeros((5, 3));
        for (dst, &src) in perm.iter().enumerate() {
            permuted.row_mut(dst).assign(&b.row(src));
        }
        let moved = localization_scores(&permuted, 2).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert!((moved[dst] - base[src]).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_under_orthogonal_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = Matrix::from_shape_fn((7, 2), |_| rng.gen::<f64>());
        // Rotate all rows by a fixed angle: distances are preserved.
        let theta: f64 = 0.83;
        let rot = ndarray::array![
            [theta.cos(), -theta.sin()],
            [theta.sin(), theta.cos()]
        ];
        let rotated = b.dot(&rot);
        let base = localization_scores(&b, 3).unwrap();
        let turned = localization_scores(&rotated, 3).unwrap();
        for (x, y) in base.iter().zip(&turned) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn k_bounds_are_enforced() {
        let b = Matrix::zeros((4, 2));
        assert!(localization_scores(&b, 0).is_err());
        assert!(localization_scores(&b, 4).is_err());
        assert!(localization_scores(&b, 3).is_ok());
    }
}
