//! Predictions, per-class accuracies and the objective
//! `Z = Z_err + beta * Z_cobias + tau * Z_pmi`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::functions::{Domain, FunctionSet, SelectionVector};

/// Stand-in ratio for an undefined PMI term (class present but never hit).
pub const PMI_EPSILON: f64 = 1e-12;

/// 1-based argmax; ties go to the lowest class index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best + 1
}

pub fn raw_predictions(ds: &LabeledDataset) -> Vec<usize> {
    ds.rows().map(argmax).collect()
}

/// Corrects every row with `xi` and takes the argmax.
pub fn predict(ds: &LabeledDataset, fs: &FunctionSet, xi: &SelectionVector) -> Vec<usize> {
    ds.rows()
        .map(|row| argmax(&fs.apply_selection(xi, row)))
        .collect()
}

/// Per-class tallies that every objective term is computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub num_instances: usize,
    pub n_true: Vec<usize>,
    pub n_pred: Vec<usize>,
    pub n_correct: Vec<usize>,
}

impl ClassCounts {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_instances: 0,
            n_true: vec![0; num_classes],
            n_pred: vec![0; num_classes],
            n_correct: vec![0; num_classes],
        }
    }

    pub fn from_predictions(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                actual: preds.len(),
            });
        }
        let mut counts = Self::new(num_classes);
        for (&p, &y) in preds.iter().zip(labels) {
            if !(1..=num_classes).contains(&p) || !(1..=num_classes).contains(&y) {
                return Err(Error::InvalidDataset(format!(
                    "class {} outside 1..={num_classes}",
                    if (1..=num_classes).contains(&p) { y } else { p }
                )));
            }
            counts.record(p, y);
        }
        Ok(counts)
    }

    #[inline]
    pub(crate) fn record(&mut self, pred: usize, label: usize) {
        self.num_instances += 1;
        self.n_true[label - 1] += 1;
        self.n_pred[pred - 1] += 1;
        if pred == label {
            self.n_correct[label - 1] += 1;
        }
    }

    pub fn num_classes(&self) -> usize {
        self.n_true.len()
    }

    pub fn num_correct(&self) -> usize {
        self.n_correct.iter().sum()
    }

    pub fn error_rate(&self) -> f64 {
        (self.num_instances - self.num_correct()) as f64 / self.num_instances as f64
    }

    /// `None` for classes without labeled instances.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.n_true
            .iter()
            .zip(&self.n_correct)
            .map(|(&t, &c)| (t > 0).then(|| c as f64 / t as f64))
            .collect()
    }

    pub fn present_classes(&self) -> usize {
        self.n_true.iter().filter(|&&t| t > 0).count()
    }

    /// Mean absolute accuracy gap over all pairs of present classes.
    pub fn cobias(&self) -> Result<f64> {
        let accs: Vec<f64> = self.per_class_accuracy().into_iter().flatten().collect();
        if accs.len() < 2 {
            return Err(Error::TooFewClasses {
                present: accs.len(),
            });
        }
        let mut sum = 0.0;
        for i in 0..accs.len() {
            for j in i + 1..accs.len() {
                sum += (accs[i] - accs[j]).abs();
            }
        }
        let pairs = accs.len() * (accs.len() - 1) / 2;
        Ok(sum / pairs as f64)
    }

    /// Per-class PMI between "predicted j" and "labeled j"; `None` for classes
    /// without labeled instances.
    pub fn pmi(&self) -> Vec<Option<f64>> {
        let m = self.num_instances as f64;
        (0..self.num_classes())
            .map(|j| {
                if self.n_true[j] == 0 {
                    return None;
                }
                if self.n_correct[j] == 0 {
                    return Some(PMI_EPSILON.ln());
                }
                let joint = self.n_correct[j] as f64 / m;
                let pred = self.n_pred[j] as f64 / m;
                let truth = self.n_true[j] as f64 / m;
                Some((joint / (pred * truth)).ln())
            })
            .collect()
    }

    pub fn pmi_sum(&self) -> f64 {
        self.pmi().into_iter().flatten().sum()
    }

    pub fn terms(&self, w: &ObjectiveWeights) -> Result<ObjectiveTerms> {
        let z_err = w.enable_err.then(|| self.error_rate());
        let z_cobias = if w.cobias_active() {
            Some(self.cobias()?)
        } else {
            None
        };
        let z_pmi = w.pmi_active().then(|| -self.pmi_sum());
        Ok(ObjectiveTerms::combine(z_err, z_cobias, z_pmi, w))
    }
}

pub fn z_err(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::InvalidDataset("no predictions".into()));
    }
    let wrong = preds.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / preds.len() as f64)
}

pub fn per_class_accuracy(
    preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    Ok(ClassCounts::from_predictions(preds, labels, num_classes)?.per_class_accuracy())
}

pub fn z_cobias(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<f64> {
    ClassCounts::from_predictions(preds, labels, num_classes)?.cobias()
}

/// `-sum_j PMI_j` over classes with labeled instances (natural log).
pub fn z_pmi(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<f64> {
    Ok(-ClassCounts::from_predictions(preds, labels, num_classes)?.pmi_sum())
}

/// Which terms enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveMode {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "err")]
    Err,
    #[serde(rename = "err+pmi")]
    ErrPmi,
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ObjectiveMode::Full),
            "err" => Ok(ObjectiveMode::Err),
            "err+pmi" => Ok(ObjectiveMode::ErrPmi),
            other => Err(Error::InvalidConfig(format!(
                "unknown objective {other:?} (expected full, err or err+pmi)"
            ))),
        }
    }
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveMode::Full => "full",
            ObjectiveMode::Err => "err",
            ObjectiveMode::ErrPmi => "err+pmi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub beta: f64,
    pub tau: f64,
    pub enable_err: bool,
    pub enable_cobias: bool,
    pub enable_pmi: bool,
}

impl ObjectiveWeights {
    /// All three terms enabled.
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        Self::for_mode(ObjectiveMode::Full, beta, tau)
    }

    /// Disabled terms get their weight forced to zero.
    pub fn for_mode(mode: ObjectiveMode, beta: f64, tau: f64) -> Result<Self> {
        let w = match mode {
            ObjectiveMode::Full => Self {
                beta,
                tau,
                enable_err: true,
                enable_cobias: true,
                enable_pmi: true,
            },
            ObjectiveMode::Err => Self {
                beta: 0.0,
                tau: 0.0,
                enable_err: true,
                enable_cobias: false,
                enable_pmi: false,
            },
            ObjectiveMode::ErrPmi => Self {
                beta: 0.0,
                tau,
                enable_err: true,
                enable_cobias: false,
                enable_pmi: true,
            },
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite() && self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta and tau must be finite and nonnegative (beta={}, tau={})",
                self.beta, self.tau
            )));
        }
        if !(self.enable_err || self.enable_cobias || self.enable_pmi) {
            return Err(Error::InvalidConfig(
                "at least one objective term must be enabled".into(),
            ));
        }
        Ok(())
    }

    /// A term with zero weight is skipped entirely, so COBias is not
    /// required to be defined when `beta = 0`.
    pub fn cobias_active(&self) -> bool {
        self.enable_cobias && self.beta != 0.0
    }

    pub fn pmi_active(&self) -> bool {
        self.enable_pmi && self.tau != 0.0
    }
}

/// The evaluated terms and their weighted sum. Inactive terms are `None`
/// and contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub z_err: Option<f64>,
    pub z_cobias: Option<f64>,
    pub z_pmi: Option<f64>,
    pub z: f64,
}

impl ObjectiveTerms {
    pub fn combine(
        z_err: Option<f64>,
        z_cobias: Option<f64>,
        z_pmi: Option<f64>,
        w: &ObjectiveWeights,
    ) -> Self {
        let mut z = 0.0;
        if let Some(e) = z_err {
            z += e;
        }
        if let Some(c) = z_cobias {
            z += w.beta * c;
        }
        if let Some(p) = z_pmi {
            z += w.tau * p;
        }
        Self {
            z_err,
            z_cobias,
            z_pmi,
            z,
        }
    }
}

pub fn objective_terms(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    xi: &SelectionVector,
    w: &ObjectiveWeights,
) -> Result<ObjectiveTerms> {
    if xi.len() != ds.num_classes() {
        return Err(Error::LengthMismatch {
            expected: ds.num_classes(),
            actual: xi.len(),
        });
    }
    xi.validate(fs)?;
    let preds = predict(ds, fs, xi);
    ClassCounts::from_predictions(&preds, ds.labels(), ds.num_classes())?.terms(w)
}

/// Full recomputation of `Z` for one selection.
pub fn objective_value(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    xi: &SelectionVector,
    w: &ObjectiveWeights,
) -> Result<f64> {
    objective_terms(ds, fs, xi, w).map(|t| t.z)
}

/// Evaluates selections against one dataset using a precomputed table of
/// corrected columns, one per (class, catalog index) in the domain.
///
/// Produces bit-identical values to [`objective_value`]: the same scalar
/// corrections feed the same argmax and the same count-based terms.
pub struct Evaluator<'a> {
    ds: &'a LabeledDataset,
    weights: ObjectiveWeights,
    domain_size: usize,
    // columns[class][k - 1] is the corrected column, empty outside the domain.
    columns: Vec<Vec<Vec<f64>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        ds: &'a LabeledDataset,
        fs: &FunctionSet,
        domain: &Domain,
        weights: ObjectiveWeights,
    ) -> Result<Self> {
        weights.validate()?;
        domain.validate(fs)?;
        let n = ds.num_classes();
        let m = ds.num_instances();
        let mut columns = vec![vec![Vec::new(); fs.domain_size()]; n];
        for (j, per_class) in columns.iter_mut().enumerate() {
            for k in domain.iter() {
                let mut col = Vec::with_capacity(m);
                col.extend(ds.rows().map(|row| fs.correct(k, row[j])));
                per_class[k - 1] = col;
            }
        }
        Ok(Self {
            ds,
            weights,
            domain_size: fs.domain_size(),
            columns,
        })
    }

    pub fn weights(&self) -> &ObjectiveWeights {
        &self.weights
    }

    pub fn counts(&self, xi: &SelectionVector) -> ClassCounts {
        let n = self.ds.num_classes();
        assert_eq!(xi.len(), n, "selection length must equal class count");
        let cols: Vec<&[f64]> = xi
            .iter()
            .enumerate()
            .map(|(j, k)| {
                assert!(k >= 1 && k <= self.domain_size, "index {k} out of range");
                let c = &self.columns[j][k - 1];
                assert!(!c.is_empty(), "index {k} outside the search domain");
                c.as_slice()
            })
            .collect();
        let mut counts = ClassCounts::new(n);
        for (m, &y) in self.ds.labels().iter().enumerate() {
            let mut best = 0;
            let mut best_v = cols[0][m];
            for (j, col) in cols.iter().enumerate().skip(1) {
                if col[m] > best_v {
                    best = j;
                    best_v = col[m];
                }
            }
            counts.record(best + 1, y);
        }
        counts
    }

    pub fn terms(&self, xi: &SelectionVector) -> Result<ObjectiveTerms> {
        self.counts(xi).terms(&self.weights)
    }

    pub fn z(&self, xi: &SelectionVector) -> Result<f64> {
        self.terms(xi).map(|t| t.z)
    }
}
