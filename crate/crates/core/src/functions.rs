//! The correction-function catalog: triangular membership functions
//! (sample-level) followed by weight coefficients (class-level), selected per
//! class through a pair of Heaviside gates.
//!
//! Catalog indices are 1-based. Indices `1..=D_F` address memberships and
//! `D_F+1..=D_F+D_W` address weights.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit step: 1 for `x >= 0`, else 0.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Triangle with feet at `a`, `c` and peak at `b`, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularMembership {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TriangularMembership {
    /// The identity map `(0, 1, 1)`.
    pub const DONT_CHANGE: Self = Self {
        a: 0.0,
        b: 1.0,
        c: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let f = Self { a, b, c };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let Self { a, b, c } = *self;
        if ![a, b, c].iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidCatalog(format!(
                "membership ({a}, {b}, {c}) has a parameter outside [0, 1]"
            )));
        }
        if !(a <= b && b <= c) {
            return Err(Error::InvalidCatalog(format!(
                "membership ({a}, {b}, {c}) must satisfy a <= b <= c"
            )));
        }
        if a == c {
            return Err(Error::InvalidCatalog(format!(
                "membership ({a}, {b}, {c}) is degenerate (a = b = c)"
            )));
        }
        Ok(())
    }

    pub fn is_dont_change(&self) -> bool {
        *self == Self::DONT_CHANGE
    }

    /// Evaluates the membership at `p`.
    ///
    /// Left shoulders (`a = b = 0`) give `(c - p) / c` on `[0, c]`; right
    /// shoulders (`b = c = 1`) give `(p - a) / (1 - a)` on `[a, 1]`. Otherwise
    /// the usual triangle with closed right edges on each segment.
    pub fn eval(&self, p: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
        let Self { a, b, c } = *self;
        if a == 0.0 && b == 0.0 {
            return if p <= c { (c - p) / c } else { 0.0 };
        }
        if b == 1.0 && c == 1.0 {
            return if p >= a { (p - a) / (1.0 - a) } else { 0.0 };
        }
        if p <= a {
            0.0
        } else if p <= b {
            (p - a) / (b - a)
        } else if p <= c {
            (c - p) / (c - b)
        } else {
            0.0
        }
    }
}

impl fmt::Display for TriangularMembership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={} b={} c={}", self.a, self.b, self.c)
    }
}

/// Weight correction `((k - D_F) / D_W) * p` for a weight index `k`.
pub fn eval_weight(k: usize, num_memberships: usize, num_weights: usize, p: f64) -> Result<f64> {
    if k <= num_memberships || k > num_memberships + num_weights {
        return Err(Error::InvalidSelection(format!(
            "index {k} is not a weight index (weights are {}..={})",
            num_memberships + 1,
            num_memberships + num_weights
        )));
    }
    Ok(weight_factor(k, num_memberships, num_weights) * p)
}

fn weight_factor(k: usize, num_memberships: usize, num_weights: usize) -> f64 {
    (k - num_memberships) as f64 / num_weights as f64
}

/// One resolved catalog entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    Membership(TriangularMembership),
    Weight { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionKind {
    Membership,
    Weight,
}

impl fmt::Display for CorrectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionKind::Membership => "membership",
            CorrectionKind::Weight => "weight",
        })
    }
}

impl Correction {
    pub fn kind(&self) -> CorrectionKind {
        match self {
            Correction::Membership(_) => CorrectionKind::Membership,
            Correction::Weight { .. } => CorrectionKind::Weight,
        }
    }

    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            Correction::Membership(f) => f.eval(p),
            Correction::Weight { factor } => factor * p,
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::Membership(m) => m.fmt(f),
            Correction::Weight { factor } => write!(f, "w={factor}"),
        }
    }
}

/// On-disk form of a catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub memberships: Vec<TriangularMembership>,
    pub num_weights: usize,
}

/// Ordered catalog of `D_F` memberships followed by `D_W` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSet {
    memberships: Vec<TriangularMembership>,
    num_weights: usize,
    dont_change: usize,
}

impl FunctionSet {
    /// Validates every membership and locates Don't Change by exact match.
    pub fn new(memberships: Vec<TriangularMembership>, num_weights: usize) -> Result<Self> {
        if num_weights == 0 {
            return Err(Error::InvalidCatalog("num_weights must be positive".into()));
        }
        for f in &memberships {
            f.validate()?;
        }
        let dont_change = memberships
            .iter()
            .position(TriangularMembership::is_dont_change)
            .ok_or_else(|| {
                Error::InvalidCatalog("catalog lacks the Don't Change membership (0, 1, 1)".into())
            })?
            + 1;
        Ok(Self {
            memberships,
            num_weights,
            dont_change,
        })
    }

    pub fn from_catalog(catalog: CatalogFile) -> Result<Self> {
        Self::new(catalog.memberships, catalog.num_weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let catalog: CatalogFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_catalog(catalog)
    }

    pub fn to_catalog(&self) -> CatalogFile {
        CatalogFile {
            memberships: self.memberships.clone(),
            num_weights: self.num_weights,
        }
    }

    pub fn memberships(&self) -> &[TriangularMembership] {
        &self.memberships
    }

    pub fn num_memberships(&self) -> usize {
        self.memberships.len()
    }

    pub fn num_weights(&self) -> usize {
        self.num_weights
    }

    /// 1-based index of the Don't Change membership.
    pub fn dont_change_index(&self) -> usize {
        self.dont_change
    }

    /// Number of choices per class, `D_F + D_W`.
    pub fn domain_size(&self) -> usize {
        self.memberships.len() + self.num_weights
    }

    /// `N * (D_F + D_W)`.
    pub fn search_space_size(&self, num_classes: usize) -> usize {
        num_classes * self.domain_size()
    }

    pub fn contains(&self, k: usize) -> bool {
        (1..=self.domain_size()).contains(&k)
    }

    pub fn correction(&self, k: usize) -> Result<Correction> {
        let d_f = self.num_memberships();
        if !self.contains(k) {
            return Err(Error::InvalidSelection(format!(
                "index {k} outside 1..={}",
                self.domain_size()
            )));
        }
        if heaviside(d_f as f64 - k as f64) == 1.0 {
            Ok(Correction::Membership(self.memberships[k - 1]))
        } else {
            Ok(Correction::Weight {
                factor: weight_factor(k, d_f, self.num_weights),
            })
        }
    }

    pub fn kind(&self, k: usize) -> Result<CorrectionKind> {
        self.correction(k).map(|c| c.kind())
    }

    /// Corrects one probability with catalog entry `k`:
    /// `mu_k(p) * H(D_F - k) + omega_k(p) * H(k - D_F - 1)`.
    ///
    /// Only the gated-in branch is evaluated; the other has no catalog entry.
    pub fn correct(&self, k: usize, p: f64) -> f64 {
        let d_f = self.num_memberships() as f64;
        let k_f = k as f64;
        let membership_gate = heaviside(d_f - k_f);
        let weight_gate = heaviside(k_f - d_f - 1.0);
        debug_assert_eq!(membership_gate + weight_gate, 1.0);
        if membership_gate == 1.0 {
            self.memberships[k - 1].eval(p)
        } else {
            weight_gate * weight_factor(k, self.num_memberships(), self.num_weights) * p
        }
    }

    /// Applies one correction per class to a probability row.
    pub fn apply_selection(&self, xi: &SelectionVector, row: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), row.len(), "selection and row lengths differ");
        xi.iter()
            .zip(row)
            .map(|(k, &p)| self.correct(k, p))
            .collect()
    }

    /// The 19-membership, 30-weight catalog.
    ///
    /// Memberships, in order: Don't Change; nine interior triangles peaking
    /// at 0.1..=0.9 with half-width 0.25 clipped to `[0, 1]`; five left
    /// shoulders with `c` in 0.2..=1.0; four right shoulders with `a` in
    /// 0.2..=0.8.
    pub fn default_set() -> Self {
        let mut memberships = vec![TriangularMembership::DONT_CHANGE];
        for i in 1..=9 {
            let b = i as f64 / 10.0;
            let a = ((i as f64 - 2.5) / 10.0).max(0.0);
            let c = ((i as f64 + 2.5) / 10.0).min(1.0);
            memberships.push(TriangularMembership { a, b, c });
        }
        for i in 1..=5 {
            let c = (2 * i) as f64 / 10.0;
            memberships.push(TriangularMembership { a: 0.0, b: 0.0, c });
        }
        for i in 1..=4 {
            let a = (2 * i) as f64 / 10.0;
            memberships.push(TriangularMembership { a, b: 1.0, c: 1.0 });
        }
        Self::new(memberships, DEFAULT_NUM_WEIGHTS).expect("default catalog is valid")
    }
}

pub const DEFAULT_NUM_WEIGHTS: usize = 30;

/// Which families of corrections a search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Memberships and weights.
    Dcs,
    /// Weights plus Don't Change.
    Dnip,
    /// Memberships only.
    Furud,
}

impl SearchMode {
    pub const ALL: [SearchMode; 3] = [SearchMode::Dcs, SearchMode::Dnip, SearchMode::Furud];
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dcs" => Ok(SearchMode::Dcs),
            "dnip" => Ok(SearchMode::Dnip),
            "furud" => Ok(SearchMode::Furud),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected dcs, dnip or furud)"
            ))),
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Dcs => "dcs",
            SearchMode::Dnip => "dnip",
            SearchMode::Furud => "furud",
        })
    }
}

/// Sorted set of catalog indices a class variable may take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Domain(Vec<usize>);

impl Domain {
    pub fn full(fs: &FunctionSet) -> Self {
        Self((1..=fs.domain_size()).collect())
    }

    pub fn for_mode(fs: &FunctionSet, mode: SearchMode) -> Self {
        let d_f = fs.num_memberships();
        match mode {
            SearchMode::Dcs => Self::full(fs),
            SearchMode::Dnip => Self(
                std::iter::once(fs.dont_change_index())
                    .chain(d_f + 1..=fs.domain_size())
                    .collect(),
            ),
            SearchMode::Furud => Self((1..=d_f).collect()),
        }
    }

    /// Sorts and deduplicates; every index must resolve in `fs`.
    pub fn new(mut indices: Vec<usize>, fs: &FunctionSet) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        let d = Self(indices);
        d.validate(fs)?;
        Ok(d)
    }

    pub fn validate(&self, fs: &FunctionSet) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidSelection("search domain is empty".into()));
        }
        if let Some(&k) = self.0.iter().find(|&&k| !fs.contains(k)) {
            return Err(Error::InvalidSelection(format!(
                "domain index {k} outside 1..={}",
                fs.domain_size()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// One catalog index per class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionVector(Vec<usize>);

impl SelectionVector {
    /// Checks every entry against the catalog.
    pub fn new(xi: Vec<usize>, fs: &FunctionSet) -> Result<Self> {
        let v = Self(xi);
        v.validate(fs)?;
        Ok(v)
    }

    pub fn uniform(k: usize, num_classes: usize) -> Self {
        Self(vec![k; num_classes])
    }

    pub fn validate(&self, fs: &FunctionSet) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidSelection("selection is empty".into()));
        }
        if let Some((i, &k)) = self.0.iter().enumerate().find(|(_, &k)| !fs.contains(k)) {
            return Err(Error::InvalidSelection(format!(
                "class {} selects index {k}, outside 1..={}",
                i + 1,
                fs.domain_size()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Entry for the 1-based class.
    pub fn get(&self, class: usize) -> usize {
        self.0[class - 1]
    }

    pub(crate) fn set(&mut self, class_idx: usize, k: usize) {
        self.0[class_idx] = k;
    }

    pub(crate) fn from_vec_unchecked(xi: Vec<usize>) -> Self {
        Self(xi)
    }
}

impl fmt::Display for SelectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}
