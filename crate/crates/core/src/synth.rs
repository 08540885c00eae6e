//! Synthetic probability datasets with a prescribed per-class accuracy
//! profile.
//!
//! Each row is built around a chosen winner. With probability
//! `target_per_class_accuracy[y]` the winner is the true class `y`; otherwise
//! it is drawn from a per-class confusion distribution, a softmax over fixed
//! random logits scaled by `1 / confusion_temperature`.
//!
//! Errors are near misses: the true class is the runner-up with a score
//! uniform in `[0.55, 0.85)` of the winner's. On hits the runner-up is a
//! confusable class scoring in `[0.05, 0.5)` of the winner's, except that 30%
//! of hits are near ties at `[0.9, 0.99)`. A uniform rescaling of one class
//! cannot flip the middle band without also flipping the near ties, so
//! rescuing a weak class pays off only with a sample-level correction.
//! Remaining classes score below the runner-up. Rows are normalized to sum
//! to 1.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

const MISS_RATIO: (f64, f64) = (0.55, 0.85);
const HIT_RATIO: (f64, f64) = (0.05, 0.5);
const NEAR_TIE_RATIO: (f64, f64) = (0.9, 0.99);
const NEAR_TIE_SHARE: f64 = 0.3;
const OTHERS_SCALE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    pub num_classes: usize,
    pub class_priors: Vec<f64>,
    pub target_per_class_accuracy: Vec<f64>,
    pub confusion_temperature: f64,
    pub seed: u64,
}

impl BiasProfile {
    /// Uniform priors.
    pub fn uniform(
        target_per_class_accuracy: Vec<f64>,
        confusion_temperature: f64,
        seed: u64,
    ) -> Self {
        let n = target_per_class_accuracy.len();
        Self {
            num_classes: n,
            class_priors: vec![1.0 / n as f64; n],
            target_per_class_accuracy,
            confusion_temperature,
            seed,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let profile: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_classes;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if n < 2 {
            return bad(format!("profile needs at least 2 classes, got {n}"));
        }
        if self.class_priors.len() != n || self.target_per_class_accuracy.len() != n {
            return bad("prior and accuracy vectors must have num_classes entries".into());
        }
        if self
            .class_priors
            .iter()
            .any(|&p| !(p >= 0.0 && p.is_finite()))
        {
            return bad("class priors must be nonnegative".into());
        }
        let total: f64 = self.class_priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class priors sum to {total}, expected 1"));
        }
        if self
            .target_per_class_accuracy
            .iter()
            .any(|a| !(0.0..=1.0).contains(a))
        {
            return bad("target accuracies must lie in [0, 1]".into());
        }
        if !(self.confusion_temperature > 0.0 && self.confusion_temperature.is_finite()) {
            return bad("confusion temperature must be positive".into());
        }
        Ok(())
    }

    /// Row `y` holds the distribution of the wrong winner for true class
    /// `y + 1`; its diagonal entry is zero.
    pub fn confusion_matrix(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let n = self.num_classes;
        (0..n)
            .map(|y| {
                let logits: Vec<f64> = (0..n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) / self.confusion_temperature)
                    .collect();
                let max = (0..n)
                    .filter(|&j| j != y)
                    .map(|j| logits[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut row: Vec<f64> = (0..n)
                    .map(|j| if j == y { 0.0 } else { (logits[j] - max).exp() })
                    .collect();
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
                row
            })
            .collect()
    }
}

pub fn generate(profile: &BiasProfile, num_instances: usize) -> Result<LabeledDataset> {
    profile.validate()?;
    let n = profile.num_classes;
    if num_instances < n {
        return Err(Error::InvalidConfig(format!(
            "need at least {n} instances, got {num_instances}"
        )));
    }
    let priors = WeightedIndex::new(&profile.class_priors)
        .map_err(|e| Error::InvalidConfig(format!("class priors: {e}")))?;
    let confusion: Vec<WeightedIndex<f64>> = profile
        .confusion_matrix()
        .iter()
        .map(|row| WeightedIndex::new(row).expect("softmax row has positive mass"))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let width = num_instances.to_string().len();
    let mut ids = Vec::with_capacity(num_instances);
    let mut labels = Vec::with_capacity(num_instances);
    let mut rows = Vec::with_capacity(num_instances);
    for m in 0..num_instances {
        let y = priors.sample(&mut rng);
        let hit = rng.random::<f64>() < profile.target_per_class_accuracy[y];
        let (winner, runner_up) = if hit {
            (y, confusion[y].sample(&mut rng))
        } else {
            (confusion[y].sample(&mut rng), y)
        };
        let (lo, hi) = if !hit {
            MISS_RATIO
        } else if rng.random::<f64>() < NEAR_TIE_SHARE {
            NEAR_TIE_RATIO
        } else {
            HIT_RATIO
        };
        let ratio = rng.random_range(lo..hi);
        let mut scores = vec![0.0; n];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = if j == winner {
                1.0
            } else if j == runner_up {
                ratio
            } else {
                ratio * OTHERS_SCALE * rng.random::<f64>()
            };
        }
        let total: f64 = scores.iter().sum();
        scores.iter_mut().for_each(|s| *s /= total);
        ids.push(format!("s{m:0width$}"));
        labels.push(y + 1);
        rows.push(scores);
    }
    LabeledDataset::new(ids, labels, rows)
}

/// A named profile plus the number of rows to draw from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub profile: BiasProfile,
    pub num_instances: usize,
}

/// `P1`: three balanced classes, the middle one weak.
pub fn profile_p1() -> BiasProfile {
    BiasProfile::uniform(vec![0.95, 0.20, 0.90], 1.0, 0)
}

/// The five benchmark profiles.
///
/// | name | N | M | priors | target accuracies |
/// |------|---|---|--------|-------------------|
/// | P1 | 3 | 3000 | uniform | 0.95 0.20 0.90 |
/// | P2 | 4 | 6000 | 0.4 0.3 0.2 0.1 | 0.90 0.80 0.50 0.30 |
/// | P3 | 3 | 6000 | uniform | 0.90 0.02 0.85 (near-zero class) |
/// | P4 | 5 | 6000 | uniform | 0.85 0.60 0.90 0.40 0.75 |
/// | P5 | 2 | 6000 | 0.6 0.4 | 0.98 0.45 |
pub fn suite() -> Vec<SuiteEntry> {
    let entry = |name: &str, profile: BiasProfile, m| SuiteEntry {
        name: name.to_string(),
        profile,
        num_instances: m,
    };
    vec![
        entry("P1", profile_p1(), 3000),
        entry(
            "P2",
            BiasProfile {
                num_classes: 4,
                class_priors: vec![0.4, 0.3, 0.2, 0.1],
                target_per_class_accuracy: vec![0.90, 0.80, 0.50, 0.30],
                confusion_temperature: 1.0,
                seed: 1,
            },
            6000,
        ),
        entry(
            "P3",
            BiasProfile::uniform(vec![0.90, 0.02, 0.85], 0.5, 2),
            6000,
        ),
        entry(
            "P4",
            BiasProfile::uniform(vec![0.85, 0.60, 0.90, 0.40, 0.75], 0.5, 3),
            6000,
        ),
        entry(
            "P5",
            BiasProfile {
                num_classes: 2,
                class_priors: vec![0.6, 0.4],
                target_per_class_accuracy: vec![0.98, 0.45],
                confusion_temperature: 1.0,
                seed: 4,
            },
            6000,
        ),
    ]
}
