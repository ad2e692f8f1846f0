use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OrdinalDataset;
use crate::error::{Result, StormError};

/// Counter-based seed derivation: SplitMix64 over `master ⊕ stream` advanced `counter`
/// steps. Any (stream, counter) cell can be regenerated without replaying the others.
pub fn derive_seed(master: u64, stream: u64, counter: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)
        ^ counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_size: usize,
    pub n_repetitions: usize,
    pub n_cv_folds: usize,
}

impl SplitSpec {
    pub fn new(seed: u64, train_size: usize, n_repetitions: usize) -> Result<Self> {
        let spec = Self { seed, train_size, n_repetitions, n_cv_folds: 5 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_size < self.n_cv_folds {
            return Err(StormError::arg(format!(
                "train_size {} smaller than the {} CV folds",
                self.train_size, self.n_cv_folds
            )));
        }
        Ok(())
    }
}

/// Train/test index partitions for each repetition; repetition `r` depends only on
/// `(spec.seed, r)`.
pub fn random_split_indices(n: usize, spec: &SplitSpec) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    spec.validate()?;
    if spec.train_size >= n {
        return Err(StormError::arg(format!("train_size {} leaves no test rows out of {n}", spec.train_size)));
    }
    Ok((0..spec.n_repetitions)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x5157, r as u64));
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let test = idx.split_off(spec.train_size);
            (idx, test)
        })
        .collect())
}

pub fn random_split(data: &OrdinalDataset, spec: &SplitSpec) -> Result<Vec<(OrdinalDataset, OrdinalDataset)>> {
    Ok(random_split_indices(data.len(), spec)?
        .into_iter()
        .map(|(tr, te)| (data.subset(&tr), data.subset(&te)))
        .collect())
}

/// Fold index for every row, plus whether stratification had to be abandoned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    pub folds: Vec<usize>,
    pub n_folds: usize,
    pub stratified: bool,
}

impl FoldAssignment {
    /// `(train, validation)` indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.folds.len()).partition(|&i| self.folds[i] != f)
    }
}

/// Stratified assignment: each class is shuffled and dealt round-robin, continuing
/// the deal across classes so fold sizes also stay within one of each other.
///
/// Falls back to [`unstratified_folds`] when a present class has fewer rows than folds.
pub fn stratified_folds(data: &OrdinalDataset, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    check_folds(data.len(), n_folds)?;
    let counts = data.class_counts();
    if counts.iter().any(|&c| c > 0 && c < n_folds) {
        return unstratified_folds(data.len(), n_folds, seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xF01D, 0));
    let mut folds = vec![0; data.len()];
    let mut next = 0usize;
    for class in 1..=data.k() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(FoldAssignment { folds, n_folds, stratified: true })
}

pub fn unstratified_folds(n: usize, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    check_folds(n, n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xF01D, 1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (pos, i) in order.into_iter().enumerate() {
        folds[i] = pos % n_folds;
    }
    Ok(FoldAssignment { folds, n_folds, stratified: false })
}

fn check_folds(n: usize, n_folds: usize) -> Result<()> {
    if n_folds < 2 {
        return Err(StormError::arg(format!("need at least 2 folds, got {n_folds}")));
    }
    if n < n_folds {
        return Err(StormError::arg(format!("{n} rows cannot fill {n_folds} folds")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};

    #[test]
    fn splits_cover_the_dataset_and_are_stable() {
        let spec = SplitSpec::new(42, 30, 4).unwrap();
        let a = random_split_indices(100, &spec).unwrap();
        let b = random_split_indices(100, &spec).unwrap();
        assert_eq!(a, b);
        for (tr, te) in &a {
            assert_eq!(tr.len(), 30);
            let mut all: Vec<usize> = tr.iter().chain(te).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
        assert_ne!(a[0], a[1]);
        // Repetition 2 alone, from a spec with fewer repetitions, matches.
        let short = random_split_indices(100, &SplitSpec::new(42, 30, 3).unwrap()).unwrap();
        assert_eq!(short[2], a[2]);
    }

    #[test]
    fn stratified_counts_within_one() {
        let d = make_synthetic(SyntheticKind::Sine, 97, 5, 0.05, 3).unwrap();
        let fa = stratified_folds(&d, 5, 8).unwrap();
        assert!(fa.stratified);
        for class in 1..=5 {
            let per_fold: Vec<usize> =
                (0..5).map(|f| (0..d.len()).filter(|&i| fa.folds[i] == f && d.labels()[i] == class).count()).collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            assert!(hi - lo <= 1, "class {class}: {per_fold:?}");
        }
    }

    #[test]
    fn tiny_classes_fall_back() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let mut labels = vec![1; 10];
        labels.extend([2, 2]);
        let d = OrdinalDataset::from_rows(&rows, labels, 2, "t").unwrap();
        let fa = stratified_folds(&d, 5, 0).unwrap();
        assert!(!fa.stratified);
        assert!(stratified_folds(&d.subset(&[0, 1]), 5, 0).is_err());
    }

    #[test]
    fn seeds_differ_by_counter() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(7, 3, 9), derive_seed(7, 3, 9));
    }
}
