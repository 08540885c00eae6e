//! Simulated annealing over selection vectors.
//!
//! Two-level loop: at each temperature the inner loop proposes single-class
//! perturbations and accepts them by the Metropolis rule until either
//! `ceil(lambda1 * N)` moves were accepted or `ceil(lambda2 * N)` were
//! generated. The temperature then cools geometrically, `T_t = T_0 * alpha^t`,
//! and the outer loop stops below `min_temperature` or after
//! `max_outer_loops`.
//!
//! Randomness comes from three ChaCha8 streams derived from one seed:
//! stream 0 picks the class to perturb, stream 1 picks its new value and
//! stream 2 drives acceptance draws.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::functions::{Domain, FunctionSet, SelectionVector};
use crate::objective::{Evaluator, ObjectiveTerms, ObjectiveWeights};

pub const COORDINATE_STREAM: u64 = 0;
pub const VALUE_STREAM: u64 = 1;
pub const ACCEPT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    /// Accepted-move cap per temperature, as a multiple of the class count.
    pub lambda1: f64,
    /// Generated-move cap per temperature, as a multiple of the class count.
    pub lambda2: f64,
    pub min_temperature: f64,
    pub max_outer_loops: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 200_000.0,
            cooling_rate: 0.95,
            lambda1: 100.0,
            lambda2: 1000.0,
            min_temperature: 1e-2,
            max_outer_loops: 150,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return bad(format!(
                "initial temperature must be positive, got {}",
                self.initial_temperature
            ));
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad(format!(
                "cooling rate must lie in (0, 1), got {}",
                self.cooling_rate
            ));
        }
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return bad("lambda1 and lambda2 must be positive".into());
        }
        if self.lambda1 > self.lambda2 {
            return bad(format!(
                "lambda1 ({}) must not exceed lambda2 ({})",
                self.lambda1, self.lambda2
            ));
        }
        if !(self.min_temperature > 0.0 && self.min_temperature < self.initial_temperature) {
            return bad(format!(
                "min temperature must lie in (0, {}), got {}",
                self.initial_temperature, self.min_temperature
            ));
        }
        if self.max_outer_loops == 0 {
            return bad("max outer loops must be positive".into());
        }
        Ok(())
    }

    /// Temperature at outer loop `t` (0-based).
    pub fn temperature(&self, t: usize) -> f64 {
        self.initial_temperature * self.cooling_rate.powi(t as i32)
    }

    pub fn accepted_cap(&self, num_classes: usize) -> usize {
        (self.lambda1 * num_classes as f64).ceil() as usize
    }

    pub fn generated_cap(&self, num_classes: usize) -> usize {
        (self.lambda2 * num_classes as f64).ceil() as usize
    }
}

/// Per-outer-loop record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub outer_loop: usize,
    pub temperature: f64,
    pub best_z: f64,
    pub current_z: f64,
    pub generated: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best_xi: SelectionVector,
    pub best_z: f64,
    pub best_terms: ObjectiveTerms,
    /// Objective of the starting (all Don't Change) solution.
    pub initial_z: f64,
    pub trace: Vec<LoopRecord>,
    pub outer_loops_run: usize,
    pub evaluations: usize,
    pub num_classes: usize,
    pub domain_size: usize,
    pub seed: u64,
    pub wall_time: f64,
}

impl SolveResult {
    /// Best objective after each outer loop.
    pub fn z_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.best_z).collect()
    }

    /// `(generated, accepted)` per outer loop.
    pub fn acceptance_counts(&self) -> Vec<(usize, usize)> {
        self.trace
            .iter()
            .map(|r| (r.generated, r.accepted))
            .collect()
    }

    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

/// One proposal inside the inner loop, reported to observers.
#[derive(Debug, Clone)]
pub struct Step<'a> {
    pub outer_loop: usize,
    pub temperature: f64,
    pub candidate: &'a SelectionVector,
    pub candidate_z: f64,
    pub accepted: bool,
    /// Current solution after this step.
    pub current: &'a SelectionVector,
}

/// The three independent random streams used by one chain.
pub struct ChainRng {
    pub coordinate: ChaCha8Rng,
    pub value: ChaCha8Rng,
    pub accept: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        let stream = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Self {
            coordinate: stream(COORDINATE_STREAM),
            value: stream(VALUE_STREAM),
            accept: stream(ACCEPT_STREAM),
        }
    }
}

/// Every class starts at Don't Change.
pub fn initial_solution(fs: &FunctionSet, num_classes: usize) -> SelectionVector {
    SelectionVector::uniform(fs.dont_change_index(), num_classes)
}

/// Resamples one uniformly chosen class from the domain minus its current
/// value.
pub fn neighbor<C: Rng + ?Sized, V: Rng + ?Sized>(
    xi: &SelectionVector,
    domain: &Domain,
    coordinate_rng: &mut C,
    value_rng: &mut V,
) -> Result<SelectionVector> {
    if domain.len() < 2 {
        return Err(Error::DomainTooSmall(domain.len()));
    }
    let j = coordinate_rng.random_range(0..xi.len());
    let old = xi.as_slice()[j];
    let values = domain.as_slice();
    let new = match values.binary_search(&old) {
        Ok(pos) => {
            let r = value_rng.random_range(0..values.len() - 1);
            values[if r >= pos { r + 1 } else { r }]
        }
        Err(_) => values[value_rng.random_range(0..values.len())],
    };
    let mut out = xi.clone();
    out.set(j, new);
    Ok(out)
}

/// Metropolis rule: improvements always pass, otherwise accept when a
/// uniform draw in `[0, 1)` falls below `exp(-delta_z / T)`.
pub fn accept<R: Rng + ?Sized>(delta_z: f64, temperature: f64, rng: &mut R) -> bool {
    debug_assert!(temperature > 0.0);
    if delta_z < 0.0 {
        return true;
    }
    let r: f64 = rng.random();
    r < (-delta_z / temperature).exp()
}

pub fn anneal(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    w: &ObjectiveWeights,
    cfg: &AnnealConfig,
) -> Result<SolveResult> {
    anneal_in(ds, fs, &Domain::full(fs), w, cfg)
}

/// Anneals with every class variable restricted to `domain`, which must
/// contain Don't Change.
pub fn anneal_in(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    domain: &Domain,
    w: &ObjectiveWeights,
    cfg: &AnnealConfig,
) -> Result<SolveResult> {
    anneal_observed(ds, fs, domain, w, cfg, |_| {})
}

pub fn anneal_observed<F>(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    domain: &Domain,
    w: &ObjectiveWeights,
    cfg: &AnnealConfig,
    mut observe: F,
) -> Result<SolveResult>
where
    F: FnMut(&Step<'_>),
{
    let started = Instant::now();
    cfg.validate()?;
    if !domain.contains(fs.dont_change_index()) {
        return Err(Error::InvalidSelection(
            "search domain must contain Don't Change".into(),
        ));
    }
    if domain.len() < 2 {
        return Err(Error::DomainTooSmall(domain.len()));
    }
    let n = ds.num_classes();
    let evaluator = Evaluator::new(ds, fs, domain, *w)?;
    let mut rng = ChainRng::new(cfg.seed);

    let mut current = initial_solution(fs, n);
    let mut current_z = evaluator.z(&current)?;
    let initial_z = current_z;
    let mut best = current.clone();
    let mut best_z = current_z;
    let mut evaluations = 1;

    let accepted_cap = cfg.accepted_cap(n);
    let generated_cap = cfg.generated_cap(n);
    let mut trace = Vec::new();

    for t in 0..cfg.max_outer_loops {
        let temperature = cfg.temperature(t);
        if temperature < cfg.min_temperature {
            break;
        }
        let mut generated = 0;
        let mut accepted = 0;
        while accepted < accepted_cap && generated < generated_cap {
            let candidate = neighbor(&current, domain, &mut rng.coordinate, &mut rng.value)?;
            let z = evaluator.z(&candidate)?;
            generated += 1;
            evaluations += 1;
            if z < best_z {
                best = candidate.clone();
                best_z = z;
            }
            let ok = accept(z - current_z, temperature, &mut rng.accept);
            if ok {
                current = candidate.clone();
                current_z = z;
                accepted += 1;
            }
            observe(&Step {
                outer_loop: t,
                temperature,
                candidate: &candidate,
                candidate_z: z,
                accepted: ok,
                current: &current,
            });
        }
        trace.push(LoopRecord {
            outer_loop: t,
            temperature,
            best_z,
            current_z,
            generated,
            accepted,
        });
    }

    let best_terms = evaluator.terms(&best)?;
    Ok(SolveResult {
        best_xi: best,
        best_z,
        best_terms,
        initial_z,
        outer_loops_run: trace.len(),
        trace,
        evaluations,
        num_classes: n,
        domain_size: domain.len(),
        seed: cfg.seed,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Runs one independent chain per seed on separate threads and keeps the
/// lowest `best_z`; ties go to the earlier seed in `seeds`.
pub fn anneal_restarts(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    domain: &Domain,
    w: &ObjectiveWeights,
    cfg: &AnnealConfig,
    seeds: &[u64],
) -> Result<SolveResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let results: Vec<Result<SolveResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = AnnealConfig {
                    seed,
                    ..cfg.clone()
                };
                scope.spawn(move || anneal_in(ds, fs, domain, w, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("annealing thread panicked"))
            .collect()
    });
    let mut best: Option<SolveResult> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.best_z < b.best_z) {
            best = Some(r);
        }
    }
    Ok(best.expect("non-empty seeds"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TriangularMembership;
    use crate::objective::{objective_value, raw_predictions};

    fn toy() -> LabeledDataset {
        let rows = vec![
            vec![0.6, 0.4],
            vec![0.55, 0.45],
            vec![0.7, 0.3],
            vec![0.2, 0.8],
            vec![0.52, 0.48],
            vec![0.9, 0.1],
        ];
        let labels = vec![1, 2, 1, 2, 2, 1];
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        LabeledDataset::new(ids, labels, rows).unwrap()
    }

    #[test]
    fn initial_solution_is_dont_change() {
        let fs = FunctionSet::new(vec![TriangularMembership::DONT_CHANGE], 3).unwrap();
        assert_eq!(initial_solution(&fs, 3).as_slice(), &[1, 1, 1]);
        let ds = toy();
        let xi = initial_solution(&fs, 2);
        assert_eq!(
            crate::objective::predict(&ds, &fs, &xi),
            raw_predictions(&ds)
        );
    }

    #[test]
    fn neighbor_changes_exactly_one_coordinate() {
        let fs = FunctionSet::default_set();
        let domain = Domain::full(&fs);
        let xi = SelectionVector::new(vec![3, 7], &fs).unwrap();
        let mut rng = ChainRng::new(1);
        for _ in 0..1000 {
            let nb = neighbor(&xi, &domain, &mut rng.coordinate, &mut rng.value).unwrap();
            let diffs: Vec<_> = xi.iter().zip(nb.iter()).filter(|(a, b)| a != b).collect();
            assert_eq!(diffs.len(), 1);
            assert!(domain.contains(diffs[0].1));
        }
    }

    #[test]
    fn neighbor_needs_two_values() {
        let fs = FunctionSet::default_set();
        let domain = Domain::new(vec![1], &fs).unwrap();
        let mut rng = ChainRng::new(0);
        let xi = SelectionVector::uniform(1, 2);
        assert!(matches!(
            neighbor(&xi, &domain, &mut rng.coordinate, &mut rng.value),
            Err(Error::DomainTooSmall(1))
        ));
    }

    #[test]
    fn accept_boundaries() {
        let mut rng = ChainRng::new(3).accept;
        for _ in 0..10_000 {
            assert!(accept(-0.1, 1.0, &mut rng));
            assert!(accept(0.0, 1e-9, &mut rng));
        }
        assert!(!accept(1e6, 1.0, &mut rng));
    }

    #[test]
    fn config_validation() {
        assert!(AnnealConfig::default().validate().is_ok());
        let bad = [
            AnnealConfig {
                cooling_rate: 1.0,
                ..Default::default()
            },
            AnnealConfig {
                lambda1: 2000.0,
                ..Default::default()
            },
            AnnealConfig {
                min_temperature: 3e5,
                ..Default::default()
            },
            AnnealConfig {
                initial_temperature: -1.0,
                ..Default::default()
            },
            AnnealConfig {
                max_outer_loops: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn min_temperature_stops_early() {
        let ds = toy();
        let fs = FunctionSet::default_set();
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let cfg = AnnealConfig {
            initial_temperature: 1.0,
            cooling_rate: 0.5,
            min_temperature: 0.1,
            ..Default::default()
        };
        let r = anneal(&ds, &fs, &w, &cfg).unwrap();
        // 1, 0.5, 0.25, 0.125 pass; 0.0625 stops.
        assert_eq!(r.outer_loops_run, 4);
    }

    #[test]
    fn best_matches_recomputation_and_trace_is_monotone() {
        let ds = toy();
        let fs = FunctionSet::default_set();
        let w = ObjectiveWeights::new(1.0, 0.5).unwrap();
        let r = anneal(&ds, &fs, &w, &AnnealConfig::with_seed(5)).unwrap();
        assert_eq!(r.best_z, objective_value(&ds, &fs, &r.best_xi, &w).unwrap());
        assert!(r.best_z <= r.initial_z);
        assert!(r.z_trace().windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(r.outer_loops_run, 150);
    }

    #[test]
    fn observer_sees_single_moves() {
        let ds = toy();
        let fs = FunctionSet::default_set();
        let domain = Domain::full(&fs);
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let cfg = AnnealConfig {
            initial_temperature: 0.5,
            min_temperature: 1e-3,
            max_outer_loops: 40,
            ..AnnealConfig::with_seed(2)
        };
        let mut prev = initial_solution(&fs, 2);
        let mut steps = 0;
        anneal_observed(&ds, &fs, &domain, &w, &cfg, |s| {
            let moved = prev
                .iter()
                .zip(s.current.iter())
                .filter(|(a, b)| a != b)
                .count();
            assert!(moved <= 1);
            assert!(s.current.iter().all(|k| fs.contains(k)));
            prev = s.current.clone();
            steps += 1;
        })
        .unwrap();
        assert!(steps > 0);
    }

    #[test]
    fn restarts_pick_lowest() {
        let ds = toy();
        let fs = FunctionSet::default_set();
        let domain = Domain::full(&fs);
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        let cfg = AnnealConfig {
            max_outer_loops: 5,
            ..Default::default()
        };
        let best = anneal_restarts(&ds, &fs, &domain, &w, &cfg, &[0, 1, 2]).unwrap();
        for seed in 0..3 {
            let r = anneal_in(
                &ds,
                &fs,
                &domain,
                &w,
                &AnnealConfig {
                    seed,
                    ..cfg.clone()
                },
            )
            .unwrap();
            assert!(best.best_z <= r.best_z);
        }
        assert!(anneal_restarts(&ds, &fs, &domain, &w, &cfg, &[]).is_err());
    }

    #[test]
    fn domain_without_dont_change_rejected() {
        let ds = toy();
        let fs = FunctionSet::default_set();
        let domain = Domain::new(vec![20, 21], &fs).unwrap();
        let w = ObjectiveWeights::new(1.0, 0.0).unwrap();
        assert!(anneal_in(&ds, &fs, &domain, &w, &AnnealConfig::default()).is_err());
    }
}
