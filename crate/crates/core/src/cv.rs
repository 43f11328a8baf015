use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Shuffled k-fold split of `0..n`. Returns `(train, test)` index pairs;
/// fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= folds <= n, got folds={k}, n={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = idx.iter().copied().skip(f).step_by(k).collect();
            let train: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % k != f)
                .map(|(_, &i)| i)
                .collect();
            (train, test)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_the_indices() {
        let folds = kfold_indices(10, 3, 7).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|(_, t)| t.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), 10);
            assert!(test.iter().all(|i| !train.contains(i)));
        }
        assert!(kfold_indices(3, 5, 0).is_err());
    }
}
