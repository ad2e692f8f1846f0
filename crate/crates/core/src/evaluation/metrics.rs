use crate::error::{Result, StormError};

fn per_class_mean(y_true: &[usize], y_pred: &[usize], k: usize, loss: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(StormError::DimensionMismatch { expected: y_true.len(), got: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(StormError::arg("cannot score empty predictions"));
    }
    if let Some(&y) = y_true.iter().chain(y_pred).find(|&&y| y < 1 || y > k) {
        return Err(StormError::arg(format!("label {y} outside 1..={k}")));
    }
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        sums[t - 1] += loss(t, p);
        counts[t - 1] += 1;
    }
    let present: Vec<f64> = sums.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(s, &c)| s / c as f64).collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Per-class error rate averaged over the classes present in `y_true`.
pub fn macro_zero_one(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    per_class_mean(y_true, y_pred, k, |t, p| f64::from(u8::from(t != p)))
}

/// Per-class mean absolute label error averaged over the classes present in `y_true`.
pub fn macro_mae(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    per_class_mean(y_true, y_pred, k, |t, p| t.abs_diff(p) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(macro_zero_one(&[1, 2, 3], &[1, 2, 3], 3).unwrap(), 0.0);
        assert_eq!(macro_mae(&[1, 2, 3], &[1, 2, 3], 3).unwrap(), 0.0);
        assert_eq!(macro_zero_one(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap(), 0.25);
        assert_eq!(macro_mae(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap(), 0.25);
        assert_eq!(macro_mae(&[1, 5], &[5, 1], 5).unwrap(), 4.0);
    }

    #[test]
    fn absent_classes_are_excluded() {
        // class 2 never appears in y_true
        assert_eq!(macro_zero_one(&[1, 3, 3], &[2, 3, 3], 3).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(macro_mae(&[1], &[1, 2], 2).is_err());
        assert!(macro_mae(&[], &[], 2).is_err());
        assert!(macro_mae(&[3], &[1], 2).is_err());
    }
}
