//! Monte Carlo sweep over (scenario, M, trial) work items.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::{generate_channel_set, watts_to_dbm, ChannelSet};
use crate::error::{Error, Result};
use crate::model::{energy_residual, Protocol};
use crate::protocols::{solve_protocols, ProtocolRun};

use super::config::{ScenarioKind, SweepConfig};
use super::records::{self, aggregate, AggregateRecord, TrialRecord};
use super::seeds::{channel_seed, search_seed};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STARSIM_THREADS";

/// Reads [`THREADS_ENV`]; unset or empty means "rayon default".
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Sorted by (protocol, scenario, M, trial).
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

impl SweepOutput {
    pub fn infeasible_count(&self) -> usize {
        self.trials.iter().filter(|r| !r.feasible).count()
    }

    /// One line per aggregate cell with infeasible trials.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} trial records, {} infeasible\n",
            self.trials.len(),
            self.infeasible_count()
        );
        for a in self.aggregates.iter().filter(|a| a.feasible < a.trials) {
            s.push_str(&format!(
                "  {} {} M={}: {}/{} infeasible\n",
                a.protocol,
                a.scenario,
                a.elements,
                a.trials - a.feasible,
                a.trials
            ));
        }
        s
    }
}

fn channels_for(config: &SweepConfig, elements: usize, trial: usize) -> Result<ChannelSet<f64>> {
    generate_channel_set(
        &config.geometry,
        &config.fading,
        elements,
        config.antennas,
        channel_seed(config.master_seed, elements, trial),
    )
}

fn record(
    config: &SweepConfig,
    kind: ScenarioKind,
    elements: usize,
    trial: usize,
    channel_hash: u64,
    run: ProtocolRun<f64>,
) -> TrialRecord {
    let scenario = config.scenario(kind);
    let mut r = TrialRecord {
        protocol: run.protocol,
        scenario: kind,
        elements,
        trial,
        seed: search_seed(config.master_seed, run.protocol, &scenario, elements, trial),
        channel_hash,
        feasible: false,
        power_w: f64::INFINITY,
        power_dbm: f64::INFINITY,
        sweeps: 0,
        inner_solves: 0,
        energy_residual: 0.0,
        admissible: true,
        trace_violations: 0,
        lambda: None,
        wall_ms: run.elapsed.as_secs_f64() * 1e3,
    };
    // solver failures of any kind are recorded as infeasible trials
    if let Ok(s) = run.result {
        r.feasible = s.power_w.is_finite();
        if r.feasible {
            r.power_w = s.power_w;
            r.power_dbm = watts_to_dbm(s.power_w);
        }
        r.sweeps = s.sweeps;
        r.inner_solves = s.inner_solves;
        r.energy_residual = s
            .configuration
            .coefficient_sets()
            .into_iter()
            .map(energy_residual)
            .fold(0.0, f64::max);
        r.admissible = s.configuration.satisfies(run.protocol);
        r.trace_violations = s.trace_violations();
        r.lambda = s.lambda;
    }
    r
}

/// All requested protocols on one channel realization.
fn run_group(
    config: &SweepConfig,
    protocols: &[Protocol],
    kind: ScenarioKind,
    elements: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let channels = channels_for(config, elements, trial)?;
    let hash = channels.content_hash();
    let scenario = config.scenario(kind);
    let seed_for = |p: Protocol| search_seed(config.master_seed, p, &scenario, elements, trial);
    let runs = solve_protocols(
        &channels,
        protocols,
        &scenario,
        &config.settings(),
        &seed_for,
    );
    Ok(runs
        .into_iter()
        .map(|run| record(config, kind, elements, trial, hash, run))
        .collect())
}

/// One protocol on one trial. Randomness is fixed by the config's master
/// seed and the arguments; the result does not depend on other trials.
pub fn run_trial(
    config: &SweepConfig,
    protocol: Protocol,
    scenario: ScenarioKind,
    elements: usize,
    trial: usize,
) -> Result<TrialRecord> {
    config.validate()?;
    if !protocol.supports_elements(elements) {
        return Err(Error::Config(format!(
            "{protocol} cannot use M = {elements}"
        )));
    }
    Ok(run_group(config, &[protocol], scenario, elements, trial)?.remove(0))
}

/// Runs the sweep with the worker count from [`THREADS_ENV`].
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    run_sweep_with_threads(config, threads_from_env()?)
}

/// Runs the full (scenario × M × trial) cross product for every protocol.
/// `threads = None` uses rayon's default pool size.
pub fn run_sweep_with_threads(config: &SweepConfig, threads: Option<usize>) -> Result<SweepOutput> {
    config.validate()?;
    let (elements, protocols, scenarios) = config.normalized();
    let mut items = Vec::new();
    for &kind in &scenarios {
        for &m in &elements {
            for trial in 0..config.trials {
                items.push((kind, m, trial));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let groups: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(kind, m, trial)| run_group(config, &protocols, kind, m, trial))
            .collect()
    });
    let mut trials = Vec::with_capacity(items.len() * protocols.len());
    for g in groups {
        trials.extend(g?);
    }
    trials.sort_by_key(|r| r.sort_key());
    let aggregates = aggregate(&trials);
    Ok(SweepOutput { trials, aggregates })
}

/// Writes `trials.csv`, `aggregate.csv`, `timings.csv` and the plot tables.
pub fn write_outputs(
    output: &SweepOutput,
    scenarios: &[ScenarioKind],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let path = dir.join("trials.csv");
    records::write_trials(&output.trials, records::create(&path)?, &path)?;
    written.push(path);
    let path = dir.join("aggregate.csv");
    records::write_aggregates(&output.aggregates, records::create(&path)?, &path)?;
    written.push(path);
    let path = dir.join("timings.csv");
    records::write_timings(&output.trials, records::create(&path)?, &path)?;
    written.push(path);
    written.extend(records::emit_plot_data(&output.aggregates, dir, scenarios)?);
    Ok(written)
}

/// Regenerates the plot tables from an existing `aggregate.csv`.
pub fn plot_from_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join("aggregate.csv");
    let aggregates = records::read_aggregates(records::open(&path)?, &path)?;
    let mut scenarios: Vec<ScenarioKind> = aggregates.iter().map(|a| a.scenario).collect();
    scenarios.sort();
    scenarios.dedup();
    if scenarios.is_empty() {
        scenarios = ScenarioKind::BOTH.to_vec();
    }
    records::emit_plot_data(&aggregates, dir, &scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::GridSpec;

    fn small() -> SweepConfig {
        SweepConfig {
            elements: vec![4],
            trials: 2,
            grids: GridSpec {
                restarts: 1,
                ..GridSpec::coarse()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn run_trial_is_deterministic_and_paired() {
        let c = small();
        let a = run_trial(&c, Protocol::EnergySplitting, ScenarioKind::Unicast, 4, 1).unwrap();
        let mut b = run_trial(&c, Protocol::EnergySplitting, ScenarioKind::Unicast, 4, 1).unwrap();
        b.wall_ms = a.wall_ms;
        assert_eq!(a, b);
        let ms = run_trial(&c, Protocol::ModeSwitching, ScenarioKind::Multicast, 4, 1).unwrap();
        assert_eq!(a.channel_hash, ms.channel_hash);
        let other = run_trial(&c, Protocol::EnergySplitting, ScenarioKind::Unicast, 4, 0).unwrap();
        assert_ne!(a.channel_hash, other.channel_hash);
        assert!((a.power_dbm - (10.0 * a.power_w.log10() + 30.0)).abs() < 1e-12);
    }

    #[test]
    fn es_never_worse_than_ms_at_ten_elements() {
        let c = SweepConfig {
            grids: GridSpec {
                restarts: 1,
                ..GridSpec::coarse()
            },
            ..SweepConfig::default()
        };
        let es = run_trial(&c, Protocol::EnergySplitting, ScenarioKind::Unicast, 10, 0).unwrap();
        let ms = run_trial(&c, Protocol::ModeSwitching, ScenarioKind::Unicast, 10, 0).unwrap();
        assert!(es.feasible && ms.feasible);
        assert!(es.power_w <= ms.power_w);
    }

    #[test]
    fn single_cell_sweep() {
        let c = SweepConfig {
            protocols: vec![Protocol::OmniCoupled],
            scenarios: vec![ScenarioKind::Unicast],
            trials: 1,
            ..small()
        };
        let out = run_sweep_with_threads(&c, Some(1)).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.aggregates.len(), 1);
        assert_eq!(out.aggregates[0].mean_power_w, out.trials[0].power_w);
    }

    #[test]
    fn sweep_records_match_individual_trials() {
        let c = small();
        let out = run_sweep_with_threads(&c, Some(2)).unwrap();
        assert_eq!(out.trials.len(), 5 * 2 * 2);
        let r = out
            .trials
            .iter()
            .find(|r| {
                r.protocol == Protocol::TimeSwitching
                    && r.scenario == ScenarioKind::Multicast
                    && r.trial == 1
            })
            .unwrap();
        let mut single =
            run_trial(&c, Protocol::TimeSwitching, ScenarioKind::Multicast, 4, 1).unwrap();
        single.wall_ms = r.wall_ms;
        assert_eq!(*r, single);
    }

    #[test]
    fn outputs_written_and_replotted() {
        let c = SweepConfig {
            protocols: vec![Protocol::EnergySplitting, Protocol::OmniCoupled],
            ..small()
        };
        let out = run_sweep_with_threads(&c, Some(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&out, &c.scenarios, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let plot = std::fs::read(dir.path().join("plot_unicast.csv")).unwrap();
        std::fs::remove_file(dir.path().join("plot_unicast.csv")).unwrap();
        plot_from_dir(dir.path()).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("plot_unicast.csv")).unwrap(),
            plot
        );
    }
}
