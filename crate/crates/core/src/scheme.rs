//! Persisted correction schemes.
//!
//! A scheme file carries its full catalog, so it can be applied without the
//! catalog that produced it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annealer::{AnnealConfig, SolveResult};
use crate::data::{DatasetFingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::functions::{CatalogFile, FunctionSet, SearchMode, SelectionVector};
use crate::objective::{predict, Evaluator, ObjectiveMode, ObjectiveTerms, ObjectiveWeights};

pub const SCHEME_VERSION: &str = "dcs-scheme/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFile {
    pub version: String,
    pub num_classes: usize,
    pub mode: SearchMode,
    pub catalog: CatalogFile,
    pub xi: SelectionVector,
    pub objective: ObjectiveMode,
    pub weights: ObjectiveWeights,
    pub anneal: AnnealConfig,
    pub best_z: f64,
    pub best_terms: ObjectiveTerms,
    /// The optimization set the scheme was fitted on.
    pub dataset: DatasetFingerprint,
}

impl SchemeFile {
    pub fn from_solve(
        fs: &FunctionSet,
        mode: SearchMode,
        objective: ObjectiveMode,
        weights: ObjectiveWeights,
        anneal: AnnealConfig,
        result: &SolveResult,
        optimization_set: &LabeledDataset,
    ) -> Self {
        Self {
            version: SCHEME_VERSION.to_string(),
            num_classes: result.num_classes,
            mode,
            catalog: fs.to_catalog(),
            xi: result.best_xi.clone(),
            objective,
            weights,
            anneal,
            best_z: result.best_z,
            best_terms: result.best_terms,
            dataset: optimization_set.fingerprint(),
        }
    }

    pub fn function_set(&self) -> Result<FunctionSet> {
        FunctionSet::from_catalog(self.catalog.clone())
    }

    /// Checks the version tag, the selection length and that every index
    /// resolves in the embedded catalog.
    pub fn validate(&self) -> Result<FunctionSet> {
        if self.version != SCHEME_VERSION {
            return Err(Error::Parse(format!(
                "unsupported scheme version {:?}",
                self.version
            )));
        }
        if self.xi.len() != self.num_classes {
            return Err(Error::LengthMismatch {
                expected: self.num_classes,
                actual: self.xi.len(),
            });
        }
        let fs = self.function_set()?;
        self.xi.validate(&fs)?;
        Ok(fs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let scheme: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn check_classes(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.num_classes() != self.num_classes {
            return Err(Error::InvalidDataset(format!(
                "scheme has {} classes, dataset has {}",
                self.num_classes,
                ds.num_classes()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, ds: &LabeledDataset) -> Result<Vec<usize>> {
        self.check_classes(ds)?;
        let fs = self.validate()?;
        Ok(predict(ds, &fs, &self.xi))
    }

    /// Objective terms of this scheme on `ds`, computed the same way the
    /// annealer computed them.
    pub fn evaluate(&self, ds: &LabeledDataset) -> Result<ObjectiveTerms> {
        self.check_classes(ds)?;
        let fs = self.validate()?;
        let domain = crate::functions::Domain::for_mode(&fs, self.mode);
        Evaluator::new(ds, &fs, &domain, self.weights)?.terms(&self.xi)
    }

    pub fn fitted_on(&self, ds: &LabeledDataset) -> bool {
        self.dataset == ds.fingerprint()
    }
}
