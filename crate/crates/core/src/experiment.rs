//! Replicated comparison runs over a list of solver configurations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::GapProbes;
use crate::oracle::{Oracle, OracleConfig};
use crate::point::JointPoint;
use crate::problem::ViProblem;
use crate::rng::derive_seed;
use crate::solver::{run, Algorithm, LogOptions, SolverConfig, TraceRecord};

/// One labelled entry of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub replications: u64,
    pub log_every: u64,
    pub master_seed: u64,
    /// Random probe points for the gap lower bound; 0 disables the column.
    pub gap_probes: usize,
    pub record_wall_time: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub start: JointPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: u64,
    pub label: String,
    pub algorithm: Algorithm,
    pub replication: u64,
    pub record: TraceRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run_id: u64,
    pub label: String,
    pub replication: u64,
    pub error: Error,
}

/// Rows of every run in canonical `(entry, replication, k)` order, plus the
/// runs that failed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceTable {
    pub rows: Vec<TraceRow>,
    pub failures: Vec<RunFailure>,
}

impl TraceTable {
    /// Last logged row of each run.
    pub fn final_rows(&self) -> Vec<&TraceRow> {
        let mut out: Vec<&TraceRow> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some(last) if last.run_id == row.run_id => *last = row,
                _ => out.push(row),
            }
        }
        out
    }
}

/// Seed used by replication `r` of a batch.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    derive_seed(master, r)
}

pub fn run_experiment(
    problem: &ViProblem,
    specs: &[RunSpec],
    opts: &ExperimentOptions,
) -> Result<TraceTable> {
    if opts.replications == 0 {
        return Err(Error::config("replications must be at least 1"));
    }
    if opts.log_every == 0 {
        return Err(Error::config("log_every must be at least 1"));
    }
    let probes = if opts.gap_probes > 0 {
        Some(GapProbes::standard(
            problem,
            opts.gap_probes,
            derive_seed(opts.master_seed, u64::MAX),
        )?)
    } else {
        None
    };
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|e| (0..opts.replications).map(move |r| (e, r)))
        .collect();

    let run_one = |&(entry, r): &(usize, u64)| -> (u64, std::result::Result<Vec<TraceRecord>, Error>) {
        let spec = &specs[entry];
        let run_id = entry as u64 * opts.replications + r;
        let seed = replication_seed(opts.master_seed, r);
        let log = LogOptions {
            log_every: opts.log_every,
            gap_probes: probes.as_ref(),
            record_wall_time: opts.record_wall_time,
            residual: true,
        };
        let result = Oracle::new(OracleConfig { seed, ..spec.oracle }).and_then(|oracle| {
            let solver = spec.solver.clone().with_seed(seed);
            run(problem, &solver, &oracle, opts.start.clone(), &log).map(|out| out.trace)
        });
        (run_id, result)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(run_one).collect());

    let mut table = TraceTable::default();
    for ((entry, r), (run_id, result)) in jobs.iter().zip(results) {
        let spec = &specs[*entry];
        match result {
            Ok(trace) => table.rows.extend(trace.into_iter().map(|record| TraceRow {
                run_id,
                label: spec.label.clone(),
                algorithm: spec.solver.algorithm,
                replication: *r,
                record,
            })),
            Err(error) => table.failures.push(RunFailure {
                run_id,
                label: spec.label.clone(),
                replication: *r,
                error,
            }),
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{build_logistic, LogisticGameSpec};
    use crate::solver::Averaging;

    fn logistic_specs() -> (crate::benchmarks::Benchmark, Vec<RunSpec>) {
        let bench = build_logistic(&LogisticGameSpec::default()).unwrap();
        let specs = [Algorithm::Srfb, Algorithm::Eg]
            .into_iter()
            .map(|a| RunSpec {
                label: a.to_string(),
                solver: SolverConfig::new(a, 0.04, 100).with_averaging(Averaging::BatchMean),
                oracle: OracleConfig::exact(),
            })
            .collect();
        (bench, specs)
    }

    fn options(bench: &crate::benchmarks::Benchmark) -> ExperimentOptions {
        ExperimentOptions {
            replications: 2,
            log_every: 10,
            master_seed: 3,
            gap_probes: 8,
            record_wall_time: false,
            workers: 2,
            start: bench.default_start.clone(),
        }
    }

    #[test]
    fn rows_are_canonical_and_counted() {
        let (bench, specs) = logistic_specs();
        let table = run_experiment(&bench.problem, &specs, &options(&bench)).unwrap();
        assert!(table.failures.is_empty());
        assert_eq!(table.rows.len(), 2 * 2 * 10);
        assert!(table.rows.windows(2).all(|w| (w[0].run_id, w[0].record.k) < (w[1].run_id, w[1].record.k)));
        for row in &table.rows {
            let per = if row.algorithm == Algorithm::Eg { 2 } else { 1 };
            assert_eq!(row.record.counters.grad_evals, per * row.record.k);
        }
        assert_eq!(table.final_rows().len(), 4);
    }

    #[test]
    fn reruns_are_identical() {
        let (bench, specs) = logistic_specs();
        let a = run_experiment(&bench.problem, &specs, &options(&bench)).unwrap();
        let b = run_experiment(&bench.problem, &specs, &options(&bench)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_run_does_not_abort_batch() {
        let (bench, mut specs) = logistic_specs();
        specs[0].solver.lambda = -1.0;
        let table = run_experiment(&bench.problem, &specs, &options(&bench)).unwrap();
        assert_eq!(table.failures.len(), 2);
        assert_eq!(table.rows.len(), 2 * 10);
    }
}
