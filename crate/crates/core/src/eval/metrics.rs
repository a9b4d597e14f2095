//! Scalar metrics: ROC-AUC, average precision, and F1 aggregates.

/// Area under the ROC curve via the Mann–Whitney statistic: the fraction
/// of (positive, negative) pairs where the positive scores higher, ties
/// counting one half. Computed from average ranks in O(n log n).
///
/// Returns NaN when either side is empty — callers surface that as an
/// error before scoring.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut scored: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    // Sum of positive ranks with tie blocks averaged (1-based ranks).
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for entry in &scored[i..j] {
            if entry.1 {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// Average precision as the step-sum over the precision–recall curve,
/// `Σ (R_t − R_{t−1}) · P_t` with one step per distinct score threshold
/// (so tied scores enter as one block and the result is order-free).
///
/// Returns NaN when there are no positives.
pub fn average_precision(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() {
        return f64::NAN;
    }
    let mut scored: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));

    let n_pos = pos.len() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        let (mut tp_block, mut fp_block) = (0usize, 0usize);
        while j < scored.len() && scored[j].0 == scored[i].0 {
            if scored[j].1 {
                tp_block += 1;
            } else {
                fp_block += 1;
            }
            j += 1;
        }
        tp += tp_block;
        fp += fp_block;
        if tp_block > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += precision * tp_block as f64 / n_pos;
        }
        i = j;
    }
    ap
}

/// Macro- and micro-averaged F1 for single-label multiclass predictions.
///
/// Macro averages per-class F1 over all `n_classes` (a class with neither
/// true nor predicted members contributes 0). Micro pools true/false
/// positives globally, which for single-label prediction equals accuracy.
pub fn f1_scores(pred: &[usize], truth: &[usize], n_classes: usize) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len());
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fnc = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fnc[t] += 1;
        }
    }
    let mut macro_sum = 0.0;
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fnc[c];
        if denom > 0 {
            macro_sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    let total_tp: usize = tp.iter().sum();
    let total_fp: usize = fp.iter().sum();
    let total_fn: usize = fnc.iter().sum();
    let micro = if pred.is_empty() {
        0.0
    } else {
        2.0 * total_tp as f64 / (2 * total_tp + total_fp + total_fn) as f64
    };
    (macro_sum / n_classes as f64, micro)
}

/// Mean and population standard deviation of a sample of run scores.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
