use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dcs_core::annealer::{anneal_in, AnnealConfig, SolveResult};
use dcs_core::data::{save_dataset, save_predictions};
use dcs_core::objective::raw_predictions;
use dcs_core::report::{EvalReport, SchemeTally};
use dcs_core::synth::{self, BiasProfile};
use dcs_core::{
    exhaustive_search_in, load_dataset, split_dataset, Domain, Error, Format, FunctionSet,
    LabeledDataset, ObjectiveMode, ObjectiveWeights, OracleResult, SchemeFile, SearchMode,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;

pub const SCHEME_FILE: &str = "scheme.json";
pub const SOLVE_FILE: &str = "solve.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const OPTIMIZATION_SET: &str = "optimization_set.json";
pub const DEV_SET: &str = "dev_set.json";

fn resolve_format(path: &Path, format: Option<Format>) -> Result<Format> {
    match format.or_else(|| Format::from_path(path)) {
        Some(f) => Ok(f),
        None => Err(Error::InvalidConfig(format!(
            "cannot infer the format of {}; pass --format",
            path.display()
        ))
        .into()),
    }
}

pub fn load_input(input: &InputArgs) -> Result<LabeledDataset> {
    let format = resolve_format(&input.input, input.format)?;
    Ok(load_dataset(&input.input, format)?)
}

fn load_catalog(path: Option<&Path>) -> Result<FunctionSet> {
    Ok(match path {
        Some(p) => FunctionSet::load(p)?,
        None => FunctionSet::default_set(),
    })
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::InvalidConfig("--seed is required".into()).into())
}

impl ScheduleArgs {
    pub fn config(&self, seed: u64) -> AnnealConfig {
        AnnealConfig {
            initial_temperature: self.init_temp,
            cooling_rate: self.alpha,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            min_temperature: self.min_temp,
            max_outer_loops: self.max_outer,
            seed,
        }
    }
}

impl Default for ScheduleArgs {
    fn default() -> Self {
        let d = AnnealConfig::default();
        Self {
            init_temp: d.initial_temperature,
            alpha: d.cooling_rate,
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            min_temp: d.min_temperature,
            max_outer: d.max_outer_loops,
        }
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io_err = |e: io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_reader(io::BufReader::new(file))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())).into())
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report)?;
    let path = dir.join(format!("{stem}.csv"));
    let file = File::create(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    report
        .write_csv(BufWriter::new(file))
        .map_err(|e| Error::Io { path, source: e })?;
    Ok(())
}

/// The problem one `optimize` run solves.
#[derive(Debug, Clone)]
pub struct OptimizeJob {
    pub mode: SearchMode,
    pub objective: ObjectiveMode,
    pub weights: ObjectiveWeights,
    pub anneal: AnnealConfig,
    pub dev_fraction: f64,
}

impl OptimizeJob {
    pub fn new(
        mode: SearchMode,
        objective: ObjectiveMode,
        beta: f64,
        tau: f64,
        anneal: AnnealConfig,
        dev_fraction: f64,
    ) -> Result<Self> {
        anneal.validate()?;
        Ok(Self {
            mode,
            objective,
            weights: ObjectiveWeights::for_mode(objective, beta, tau)?,
            anneal,
            dev_fraction,
        })
    }
}

/// Solve file: the annealing result plus what is needed to summarize it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveFile {
    pub task: String,
    pub mode: SearchMode,
    pub num_memberships: usize,
    pub num_weights: usize,
    pub result: SolveResult,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub scheme: SchemeFile,
    pub solve: SolveResult,
    pub optimization_set: LabeledDataset,
    pub dev_set: LabeledDataset,
    pub dev_baseline: EvalReport,
    pub dev_report: EvalReport,
    pub optimization_report: EvalReport,
}

/// Split, anneal on the optimization part, evaluate on both parts.
pub fn optimize_dataset(
    ds: &LabeledDataset,
    fs: &FunctionSet,
    job: &OptimizeJob,
) -> Result<OptimizeOutcome> {
    let split = split_dataset(ds, job.dev_fraction, job.anneal.seed)?;
    let domain = Domain::for_mode(fs, job.mode);
    let solve = anneal_in(
        &split.optimization_set,
        fs,
        &domain,
        &job.weights,
        &job.anneal,
    )?;
    let scheme = SchemeFile::from_solve(
        fs,
        job.mode,
        job.objective,
        job.weights,
        job.anneal.clone(),
        &solve,
        &split.optimization_set,
    );
    let attached = Some((fs, &solve.best_xi));
    let dev_preds = scheme.predict(&split.dev_set)?;
    let dev_report = EvalReport::new(&split.dev_set, &dev_preds, &job.weights, attached)?;
    let dev_baseline = EvalReport::new(
        &split.dev_set,
        &raw_predictions(&split.dev_set),
        &job.weights,
        None,
    )?;
    let opt_preds = scheme.predict(&split.optimization_set)?;
    let optimization_report =
        EvalReport::new(&split.optimization_set, &opt_preds, &job.weights, attached)?;
    Ok(OptimizeOutcome {
        scheme,
        solve,
        optimization_set: split.optimization_set,
        dev_set: split.dev_set,
        dev_baseline,
        dev_report,
        optimization_report,
    })
}

pub fn write_trace_csv(path: &Path, result: &SolveResult) -> Result<()> {
    let write = || -> io::Result<()> {
        let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        wtr.write_record([
            "outer_loop",
            "temperature",
            "best_z",
            "generated",
            "accepted",
        ])?;
        for r in &result.trace {
            wtr.write_record([
                r.outer_loop.to_string(),
                r.temperature.to_string(),
                r.best_z.to_string(),
                r.generated.to_string(),
                r.accepted.to_string(),
            ])?;
        }
        wtr.flush()
    };
    write().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

pub fn optimize(args: &OptimizeArgs) -> Result<OptimizeOutcome> {
    let seed = require_seed(args.seed)?;
    let ds = load_input(&args.input)?;
    let fs = load_catalog(args.objective.catalog.as_deref())?;
    let o = &args.objective;
    let job = OptimizeJob::new(
        o.mode,
        o.objective,
        o.beta,
        o.tau,
        args.schedule.config(seed),
        o.dev_fraction,
    )?;
    let outcome = optimize_dataset(&ds, &fs, &job)?;

    let out = &args.out;
    create_out_dir(out)?;
    outcome.scheme.save(out.join(SCHEME_FILE))?;
    let task = args.task.clone().unwrap_or_else(|| stem(&args.input.input));
    write_json(
        &out.join(SOLVE_FILE),
        &SolveFile {
            task,
            mode: job.mode,
            num_memberships: fs.num_memberships(),
            num_weights: fs.num_weights(),
            result: outcome.solve.clone(),
        },
    )?;
    write_trace_csv(&out.join(TRACE_CSV), &outcome.solve)?;
    save_dataset(
        &outcome.optimization_set,
        out.join(OPTIMIZATION_SET),
        Format::Json,
    )?;
    save_dataset(&outcome.dev_set, out.join(DEV_SET), Format::Json)?;
    write_report(out, "dev_report", &outcome.dev_report)?;
    write_report(out, "dev_baseline", &outcome.dev_baseline)?;
    write_report(out, "optimization_report", &outcome.optimization_report)?;
    Ok(outcome)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub predictions: Vec<usize>,
    pub report: EvalReport,
    /// Set when the dataset is the scheme's own optimization set.
    pub reproduced_z: Option<f64>,
}

pub fn apply(args: &ApplyArgs) -> Result<ApplyOutcome> {
    let scheme = SchemeFile::load(&args.scheme)?;
    let ds = load_input(&args.input)?;
    let fs = scheme.validate()?;
    let predictions = scheme.predict(&ds)?;
    let report = EvalReport::new(&ds, &predictions, &scheme.weights, Some((&fs, &scheme.xi)))?;
    let reproduced_z = if scheme.fitted_on(&ds) {
        Some(scheme.evaluate(&ds)?.z)
    } else {
        None
    };
    create_out_dir(&args.out)?;
    save_predictions(&ds, &predictions, args.out.join("predictions.csv"))?;
    write_report(&args.out, "report", &report)?;
    Ok(ApplyOutcome {
        predictions,
        report,
        reproduced_z,
    })
}

pub fn oracle(args: &OracleArgs) -> Result<OracleResult> {
    let ds = load_input(&args.input)?;
    let fs = load_catalog(args.objective.catalog.as_deref())?;
    let o = &args.objective;
    let weights = ObjectiveWeights::for_mode(o.objective, o.beta, o.tau)?;
    let split = split_dataset(&ds, o.dev_fraction, args.seed)?;
    let domain = Domain::for_mode(&fs, o.mode);
    let result = exhaustive_search_in(&split.optimization_set, &fs, &domain, &weights, args.limit)?;
    create_out_dir(&args.out)?;
    write_json(&args.out.join("oracle.json"), &result)?;
    Ok(result)
}

/// One cell of a comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub dataset: String,
    pub mode: SearchMode,
    pub beta: f64,
    pub tau: f64,
    pub seed: u64,
    pub baseline_accuracy: f64,
    pub baseline_cobias: Option<f64>,
    pub accuracy: f64,
    pub cobias: Option<f64>,
    pub best_z: f64,
    pub membership: usize,
    pub weight: usize,
    pub unchanged: usize,
    /// Lowest-accuracy class on the optimization set before correction.
    pub weakest_class: Option<usize>,
    pub weakest_kind: Option<String>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub dataset: String,
    pub mode: SearchMode,
    pub beta: f64,
    pub tau: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub cobias_mean: f64,
    pub cobias_std: f64,
    pub membership_mean: f64,
    pub weight_mean: f64,
    /// Membership-to-weight ratio of the mean counts.
    pub membership_weight_ratio: Option<f64>,
}

pub fn compare_row(
    name: &str,
    ds: &LabeledDataset,
    fs: &FunctionSet,
    job: &OptimizeJob,
) -> Result<CompareRow> {
    let o = optimize_dataset(ds, fs, job)?;
    let tally = SchemeTally::of(fs, &o.scheme.xi)?;
    let raw_opt = EvalReport::new(
        &o.optimization_set,
        &raw_predictions(&o.optimization_set),
        &job.weights,
        None,
    )?;
    let weakest_class = raw_opt.weakest_class();
    let weakest_kind = weakest_class.map(|c| {
        let k = o.scheme.xi.get(c);
        if k == fs.dont_change_index() {
            "unchanged".to_string()
        } else {
            fs.kind(k).map(|k| k.to_string()).unwrap_or_default()
        }
    });
    Ok(CompareRow {
        dataset: name.to_string(),
        mode: job.mode,
        beta: job.weights.beta,
        tau: job.weights.tau,
        seed: job.anneal.seed,
        baseline_accuracy: o.dev_baseline.overall_accuracy,
        baseline_cobias: o.dev_baseline.cobias,
        accuracy: o.dev_report.overall_accuracy,
        cobias: o.dev_report.cobias,
        best_z: o.solve.best_z,
        membership: tally.membership,
        weight: tally.weight,
        unchanged: tally.unchanged,
        weakest_class,
        weakest_kind,
        wall_time: o.solve.wall_time,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(rows: &[CompareRow]) -> Vec<CompareSummary> {
    let mut out: Vec<CompareSummary> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let key = |r: &CompareRow| (r.dataset.clone(), r.mode, r.beta.to_bits(), r.tau.to_bits());
        let k = key(&rows[i]);
        let group: Vec<&CompareRow> = rows[i..].iter().take_while(|r| key(r) == k).collect();
        let accs: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
        let cobs: Vec<f64> = group.iter().filter_map(|r| r.cobias).collect();
        let mems: Vec<f64> = group.iter().map(|r| r.membership as f64).collect();
        let wts: Vec<f64> = group.iter().map(|r| r.weight as f64).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&accs);
        let (cobias_mean, cobias_std) = mean_std(&cobs);
        let (membership_mean, _) = mean_std(&mems);
        let (weight_mean, _) = mean_std(&wts);
        out.push(CompareSummary {
            dataset: rows[i].dataset.clone(),
            mode: rows[i].mode,
            beta: rows[i].beta,
            tau: rows[i].tau,
            runs: group.len(),
            accuracy_mean,
            accuracy_std,
            cobias_mean,
            cobias_std,
            membership_mean,
            weight_mean,
            membership_weight_ratio: (weight_mean > 0.0).then(|| membership_mean / weight_mean),
        });
        i += group.len();
    }
    out
}

/// Worker count for grid runs: `DCS_THREADS` when set, else rayon's default.
pub fn grid_threads() -> Option<usize> {
    std::env::var("DCS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every (dataset, mode, beta, tau, seed) cell and returns rows sorted
/// by dataset name, mode, beta, tau and seed.
#[allow(clippy::too_many_arguments)]
pub fn compare_datasets(
    datasets: &[(String, LabeledDataset)],
    fs: &FunctionSet,
    modes: &[SearchMode],
    objective: ObjectiveMode,
    betas: &[f64],
    taus: &[f64],
    schedule: &ScheduleArgs,
    seeds: &[u64],
    dev_fraction: f64,
) -> Result<Vec<CompareRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("--seed is required".into()).into());
    }
    if modes.is_empty() || datasets.is_empty() {
        return Err(Error::InvalidConfig("need at least one dataset and one mode".into()).into());
    }
    let mut cells = Vec::new();
    for (d, _) in datasets.iter().enumerate() {
        for &mode in modes {
            for &beta in betas {
                for &tau in taus {
                    for &seed in seeds {
                        let job = OptimizeJob::new(
                            mode,
                            objective,
                            beta,
                            tau,
                            schedule.config(seed),
                            dev_fraction,
                        )?;
                        cells.push((d, job));
                    }
                }
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = grid_threads() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the worker pool")?;
    let mut rows = pool.install(|| {
        cells
            .par_iter()
            .map(|(d, job)| {
                let (name, ds) = &datasets[*d];
                compare_row(name, ds, fs, job)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| {
        (&a.dataset, a.mode)
            .cmp(&(&b.dataset, b.mode))
            .then(a.beta.total_cmp(&b.beta))
            .then(a.tau.total_cmp(&b.tau))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let write = || -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_path(path)?;
        for r in rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    };
    write().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e),
    })?;
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<(Vec<CompareRow>, Vec<CompareSummary>)> {
    if args.seed.is_empty() {
        return Err(Error::InvalidConfig("--seed is required".into()).into());
    }
    let fs = load_catalog(args.catalog.as_deref())?;
    let mut datasets = Vec::new();
    for path in &args.inputs {
        let input = InputArgs {
            input: path.clone(),
            format: args.format,
        };
        datasets.push((stem(path), load_input(&input)?));
    }
    let rows = compare_datasets(
        &datasets,
        &fs,
        &args.modes,
        args.objective,
        &args.beta,
        &args.tau,
        &args.schedule,
        &args.seed,
        args.dev_fraction,
    )?;
    let summary = summarize(&rows);
    create_out_dir(&args.out)?;
    write_csv_rows(&args.out.join("compare.csv"), &rows)?;
    write_csv_rows(&args.out.join("compare_summary.csv"), &summary)?;
    Ok((rows, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub task: String,
    #[serde(rename = "N")]
    pub num_classes: usize,
    pub search_space: usize,
    pub wall_time: f64,
    pub outer_loops: usize,
}

pub fn time_row(solve: &SolveFile) -> TimeRow {
    TimeRow {
        task: solve.task.clone(),
        num_classes: solve.result.num_classes,
        search_space: solve.result.num_classes * solve.result.domain_size,
        wall_time: solve.result.wall_time,
        outer_loops: solve.result.outer_loops_run,
    }
}

pub fn report(args: &ReportArgs) -> Result<Vec<TimeRow>> {
    let rows = args
        .traces
        .iter()
        .map(|p| read_json::<SolveFile>(p).map(|s| time_row(&s)))
        .collect::<Result<Vec<_>>>()?;
    match &args.out {
        Some(path) => write_csv_rows(path, &rows)?,
        None => {
            let mut wtr = csv::Writer::from_writer(io::stdout());
            for r in &rows {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
        }
    }
    Ok(rows)
}

pub fn synth(args: &SynthArgs) -> Result<LabeledDataset> {
    let (profile, default_m): (BiasProfile, usize) = match (&args.profile, &args.suite) {
        (Some(path), _) => (BiasProfile::load(path)?, 3000),
        (None, Some(name)) => {
            let entry = synth::suite()
                .into_iter()
                .find(|e| e.name.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::InvalidConfig(format!("no suite profile named {name:?}")))?;
            (entry.profile, entry.num_instances)
        }
        (None, None) => {
            return Err(Error::InvalidConfig("pass --profile or --suite".into()).into());
        }
    };
    let ds = synth::generate(&profile, args.num_instances.unwrap_or(default_m))?;
    let format = resolve_format(&args.out, args.format)?;
    save_dataset(&ds, &args.out, format)?;
    Ok(ds)
}

pub fn catalog(args: &CatalogArgs) -> Result<PathBuf> {
    write_json(&args.out, &FunctionSet::default_set().to_catalog())?;
    Ok(args.out.clone())
}
