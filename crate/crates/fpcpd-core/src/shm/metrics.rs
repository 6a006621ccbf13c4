/// F-score (harmonic mean of precision and recall) from confusion
/// counts. Degenerate inputs with no true positives score 0.
pub fn f_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}
