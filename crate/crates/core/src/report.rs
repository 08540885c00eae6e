//! Evaluation reports: overall and per-class accuracy, COBias, PMI and the
//! objective terms, with the selected correction per class when a scheme is
//! attached.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::Result;
use crate::functions::{Correction, CorrectionKind, FunctionSet, SelectionVector};
use crate::objective::{ClassCounts, ObjectiveTerms, ObjectiveWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub n_true: usize,
    pub n_pred: usize,
    pub n_correct: usize,
    pub accuracy: Option<f64>,
    pub pmi: Option<f64>,
    pub catalog_index: Option<usize>,
    pub correction_kind: Option<CorrectionKind>,
    pub correction_params: Option<String>,
}

/// How many classes chose each kind of correction. Don't Change is counted
/// apart from the other memberships.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeTally {
    pub membership: usize,
    pub weight: usize,
    pub unchanged: usize,
}

impl SchemeTally {
    pub fn of(fs: &FunctionSet, xi: &SelectionVector) -> Result<Self> {
        let mut t = Self::default();
        for k in xi.iter() {
            if k == fs.dont_change_index() {
                t.unchanged += 1;
            } else {
                match fs.kind(k)? {
                    CorrectionKind::Membership => t.membership += 1,
                    CorrectionKind::Weight => t.weight += 1,
                }
            }
        }
        Ok(t)
    }

    /// Membership-to-weight ratio; `None` when no class uses a weight.
    pub fn ratio(&self) -> Option<f64> {
        (self.weight > 0).then(|| self.membership as f64 / self.weight as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_instances: usize,
    pub num_classes: usize,
    pub overall_accuracy: f64,
    pub classes: Vec<ClassReport>,
    /// `None` when fewer than two classes have labeled instances.
    pub cobias: Option<f64>,
    pub pmi_sum: f64,
    pub weights: ObjectiveWeights,
    /// `None` when an active term is undefined on this data.
    pub objective: Option<ObjectiveTerms>,
    pub tally: Option<SchemeTally>,
}

impl EvalReport {
    pub fn new(
        ds: &LabeledDataset,
        preds: &[usize],
        weights: &ObjectiveWeights,
        scheme: Option<(&FunctionSet, &SelectionVector)>,
    ) -> Result<Self> {
        let counts = ClassCounts::from_predictions(preds, ds.labels(), ds.num_classes())?;
        let accs = counts.per_class_accuracy();
        let pmis = counts.pmi();
        let mut classes = Vec::with_capacity(ds.num_classes());
        for j in 0..ds.num_classes() {
            let (catalog_index, correction_kind, correction_params) = match scheme {
                Some((fs, xi)) => {
                    let k = xi.as_slice()[j];
                    let c: Correction = fs.correction(k)?;
                    (Some(k), Some(c.kind()), Some(c.to_string()))
                }
                None => (None, None, None),
            };
            classes.push(ClassReport {
                class: j + 1,
                n_true: counts.n_true[j],
                n_pred: counts.n_pred[j],
                n_correct: counts.n_correct[j],
                accuracy: accs[j],
                pmi: pmis[j],
                catalog_index,
                correction_kind,
                correction_params,
            });
        }
        let tally = match scheme {
            Some((fs, xi)) => Some(SchemeTally::of(fs, xi)?),
            None => None,
        };
        Ok(Self {
            num_instances: ds.num_instances(),
            num_classes: ds.num_classes(),
            overall_accuracy: 1.0 - counts.error_rate(),
            classes,
            cobias: counts.cobias().ok(),
            pmi_sum: counts.pmi_sum(),
            weights: *weights,
            objective: counts.terms(weights).ok(),
            tally,
        })
    }

    /// Lowest-accuracy class among those with labeled instances; ties go to
    /// the lower class index.
    pub fn weakest_class(&self) -> Option<usize> {
        self.classes
            .iter()
            .filter_map(|c| c.accuracy.map(|a| (c.class, a)))
            .fold(None, |best: Option<(usize, f64)>, (c, a)| match best {
                Some((_, ba)) if ba <= a => best,
                _ => Some((c, a)),
            })
            .map(|(c, _)| c)
    }

    /// `class,n_true,accuracy,correction_kind,correction_params`; absent
    /// values are empty fields.
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "class",
            "n_true",
            "accuracy",
            "correction_kind",
            "correction_params",
        ])?;
        for c in &self.classes {
            wtr.write_record([
                c.class.to_string(),
                c.n_true.to_string(),
                c.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                c.correction_kind.map(|k| k.to_string()).unwrap_or_default(),
                c.correction_params.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()
    }
}
