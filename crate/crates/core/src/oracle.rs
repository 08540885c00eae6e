//! Exhaustive enumeration of every selection vector, used as ground truth
//! for the annealer on small instances.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::functions::{Domain, FunctionSet, SelectionVector};
use crate::objective::{objective_value, ObjectiveWeights};

pub const DEFAULT_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// First minimizer in lexicographic order.
    pub best_xi: SelectionVector,
    pub best_z: f64,
    pub num_evaluated: u128,
    /// Number of vectors attaining `best_z` exactly.
    pub ties: u64,
}

pub fn exhaustive_search(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    w: &ObjectiveWeights,
    limit: u128,
) -> Result<OracleResult> {
    exhaustive_search_in(ds, fs, &Domain::full(fs), w, limit)
}

/// Enumerates `domain^N` in lexicographic order (class 1 most significant),
/// evaluating each vector with the plain full-recomputation objective.
pub fn exhaustive_search_in(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    domain: &Domain,
    w: &ObjectiveWeights,
    limit: u128,
) -> Result<OracleResult> {
    domain.validate(fs)?;
    w.validate()?;
    let n = ds.num_classes();
    let size = (domain.len() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if size > limit {
        return Err(Error::SearchSpaceTooLarge { size, limit });
    }

    let values = domain.as_slice();
    let mut digits = vec![0usize; n];
    let mut best: Option<(SelectionVector, f64)> = None;
    let mut ties = 0u64;
    let mut evaluated = 0u128;
    loop {
        let xi = SelectionVector::from_vec_unchecked(digits.iter().map(|&d| values[d]).collect());
        let z = objective_value(ds, fs, &xi, w)?;
        evaluated += 1;
        match &best {
            Some((_, bz)) if z > *bz => {}
            Some((_, bz)) if z == *bz => ties += 1,
            _ => {
                best = Some((xi, z));
                ties = 1;
            }
        }
        // Odometer increment, last class fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let (best_xi, best_z) = best.expect("at least one vector evaluated");
                return Ok(OracleResult {
                    best_xi,
                    best_z,
                    num_evaluated: evaluated,
                    ties,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < values.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TriangularMembership;

    fn small_catalog() -> FunctionSet {
        FunctionSet::new(
            vec![
                TriangularMembership::DONT_CHANGE,
                TriangularMembership {
                    a: 0.0,
                    b: 0.0,
                    c: 0.6,
                },
            ],
            2,
        )
        .unwrap()
    }

    fn toy() -> LabeledDataset {
        let rows = vec![
            vec![0.7, 0.3],
            vec![0.6, 0.4],
            vec![0.55, 0.45],
            vec![0.2, 0.8],
        ];
        LabeledDataset::new(
            (0..4).map(|i| i.to_string()).collect(),
            vec![1, 2, 2, 2],
            rows,
        )
        .unwrap()
    }

    #[test]
    fn counts_every_vector() {
        let fs = small_catalog();
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let r = exhaustive_search(&toy(), &fs, &w, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.num_evaluated, 16);
        assert!(r.ties >= 1);
        let baseline = objective_value(&toy(), &fs, &SelectionVector::uniform(1, 2), &w).unwrap();
        assert!(r.best_z <= baseline);
    }

    #[test]
    fn finds_known_minimum() {
        // Halving class 1 (index 3, factor 1/2) flips rows 2 and 3 to class 2
        // and keeps row 1: everything correct.
        let fs = small_catalog();
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let r = exhaustive_search(&toy(), &fs, &w, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.best_z, 0.0);
        let preds = crate::objective::predict(&toy(), &fs, &r.best_xi);
        assert_eq!(preds, vec![1, 2, 2, 2]);
    }

    #[test]
    fn limit_guard() {
        let fs = FunctionSet::default_set();
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let err = exhaustive_search(&toy(), &fs, &w, 100).unwrap_err();
        assert!(matches!(
            err,
            Error::SearchSpaceTooLarge {
                size: 2401,
                limit: 100
            }
        ));
    }

    #[test]
    fn single_present_class_needs_zero_beta() {
        let ds = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![1, 1],
            vec![vec![0.4, 0.6], vec![0.7, 0.3]],
        )
        .unwrap();
        let fs = small_catalog();
        let full = ObjectiveWeights::new(1.0, 0.0).unwrap();
        assert!(matches!(
            exhaustive_search(&ds, &fs, &full, DEFAULT_LIMIT),
            Err(Error::TooFewClasses { .. })
        ));
        let err_only = ObjectiveWeights::new(0.0, 0.0).unwrap();
        let r = exhaustive_search(&ds, &fs, &err_only, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.best_z, 0.0);
    }
}
