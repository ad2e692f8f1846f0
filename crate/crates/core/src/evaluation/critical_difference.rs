use serde::{Deserialize, Serialize};

use crate::error::{Result, StormError};

/// Nemenyi critical values `q_α` (studentized range at infinite degrees of freedom,
/// divided by `√2`) for `m = 2..=10` models.
const Q_001: [f64; 9] = [2.576, 2.913, 3.113, 3.255, 3.364, 3.452, 3.526, 3.590, 3.646];
const Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_010: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

pub fn nemenyi_q(n_models: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&n_models) {
        return Err(StormError::arg(format!("Nemenyi table covers 2..=10 models, got {n_models}")));
    }
    let table = if (alpha - 0.01).abs() < 1e-12 {
        &Q_001
    } else if (alpha - 0.05).abs() < 1e-12 {
        &Q_005
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_010
    } else {
        return Err(StormError::arg(format!("no Nemenyi table for alpha={alpha} (use 0.01, 0.05 or 0.10)")));
    };
    Ok(table[n_models - 2])
}

/// `CD = q_α √(m (m + 1) / (6 N))`.
pub fn critical_difference(n_models: usize, n_datasets: usize, alpha: f64) -> Result<f64> {
    if n_datasets == 0 {
        return Err(StormError::arg("need at least one dataset"));
    }
    let q = nemenyi_q(n_models, alpha)?;
    let m = n_models as f64;
    Ok(q * (m * (m + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdResult {
    pub average_ranks: Vec<f64>,
    pub critical_difference: f64,
    pub alpha: f64,
    /// Model indices of each maximal run (in rank order) whose rank spread is below CD.
    pub groups: Vec<Vec<usize>>,
}

/// Groups models whose average ranks are not separated by the critical difference.
///
/// Models are sorted by rank; from each start the run is extended while the spread stays
/// below `cd`, and runs contained in an earlier run are discarded. Singletons are kept so
/// every model appears in at least one group.
pub fn cd_groups(ranks: &[f64], cd: f64, alpha: f64) -> Result<CdResult> {
    if ranks.len() < 2 {
        return Err(StormError::arg(format!("need at least 2 models, got {}", ranks.len())));
    }
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = None;
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && ranks[order[end + 1]] - ranks[order[start]] < cd {
            end += 1;
        }
        if last_end.is_some_and(|e| end <= e) {
            continue;
        }
        groups.push(order[start..=end].to_vec());
        last_end = Some(end);
    }
    Ok(CdResult { average_ranks: ranks.to_vec(), critical_difference: cd, alpha, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plug_in_value() {
        let cd = critical_difference(4, 8, 0.01).unwrap();
        assert!((cd - 3.113 * (20.0f64 / 48.0).sqrt()).abs() < 1e-12);
        assert!((cd - 2.0094).abs() < 1e-4);
        assert!(critical_difference(1, 8, 0.01).is_err());
        assert!(critical_difference(4, 8, 0.02).is_err());
    }

    #[test]
    fn grouping_examples() {
        assert_eq!(cd_groups(&[1.0, 1.1], 0.5, 0.01).unwrap().groups, vec![vec![0, 1]]);
        let g = cd_groups(&[1.0, 2.0, 3.0, 4.0], 0.9, 0.01).unwrap().groups;
        assert_eq!(g, vec![vec![0], vec![1], vec![2], vec![3]]);
        let g = cd_groups(&[3.0, 1.0, 1.5, 2.2], 1.0, 0.01).unwrap().groups;
        assert_eq!(g, vec![vec![1, 2], vec![2, 3], vec![3, 0]]);
    }
}
