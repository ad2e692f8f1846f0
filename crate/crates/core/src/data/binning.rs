use crate::error::{Result, StormError};

/// Discretises continuous targets into `K` ordered bins of (roughly) equal frequency.
///
/// Edge `i` sits at the empirical `i/K` quantile (the order statistic at position
/// `ceil(i N / K)`); a target equal to an edge goes to the lower bin. Edges are then
/// nudged onto distinct values so that every bin is non-empty.
pub fn equal_frequency_binning(targets: &[f64], k: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(StormError::arg(format!("K must be at least 2, got {k}")));
    }
    let n = targets.len();
    if n < k {
        return Err(StormError::arg(format!("need at least K={k} targets, got {n}")));
    }
    if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
        return Err(StormError::NonFinite { row: i, column: 0, value: targets[i] });
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let m = distinct.len();
    if m < k {
        return Err(StormError::TooFewDistinct { needed: k, found: m });
    }

    let mut edges = Vec::with_capacity(k - 1);
    let mut prev: Option<usize> = None;
    for i in 1..k {
        let pos = (i * n).div_ceil(k) - 1;
        let q = sorted[pos];
        let j = distinct.partition_point(|&v| v < q);
        let lo = prev.map_or(0, |p| p + 1);
        let hi = m - 1 - (k - i);
        let j = j.clamp(lo, hi);
        edges.push(distinct[j]);
        prev = Some(j);
    }

    Ok(targets.iter().map(|&t| 1 + edges.partition_point(|&e| e < t)).collect())
}
