//! Trial/aggregate records and their CSV forms.
//!
//! Floating-point values are written with 9 significant digits (`{:.8e}`).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::channel::watts_to_dbm;
use crate::error::{Error, Result};
use crate::model::Protocol;

use super::config::ScenarioKind;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub protocol: Protocol,
    pub scenario: ScenarioKind,
    pub elements: usize,
    pub trial: usize,
    /// Restart seed of the protocol's search.
    pub seed: u64,
    /// Content hash of the channel realization (equal across protocols for a fixed `(M, trial)`).
    pub channel_hash: u64,
    pub feasible: bool,
    /// `+inf` when infeasible.
    pub power_w: f64,
    pub power_dbm: f64,
    pub sweeps: usize,
    pub inner_solves: u64,
    /// Largest `| |T|^2 + |R|^2 - 1 |` over the emitted coefficient sets.
    pub energy_residual: f64,
    /// Whether the emitted configuration lies in the protocol's feasible set.
    pub admissible: bool,
    pub trace_violations: usize,
    /// Time-switching split, when applicable.
    pub lambda: Option<f64>,
    /// Wall-clock time of this protocol's search. Not part of `trials.csv`,
    /// which must be reproducible byte for byte; see `timings.csv`.
    pub wall_ms: f64,
}

impl TrialRecord {
    pub(crate) fn sort_key(&self) -> (Protocol, ScenarioKind, usize, usize) {
        (self.protocol, self.scenario, self.elements, self.trial)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub protocol: Protocol,
    pub scenario: ScenarioKind,
    pub elements: usize,
    pub trials: usize,
    pub feasible: usize,
    /// Mean of the linear power over feasible trials (NaN if none).
    pub mean_power_w: f64,
    pub mean_power_dbm: f64,
    /// Upper 95% half-width of the mean, in dB: `10 log10(1 + 1.96 s / (sqrt(n) mean))`.
    pub ci95_db: f64,
    pub feasibility_rate: f64,
}

/// Formats a float with 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

/// Groups records by `(protocol, scenario, M)` after sorting by trial index.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRecord> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut out = Vec::new();
    let cell = |r: &TrialRecord| (r.protocol, r.scenario, r.elements);
    for group in sorted.chunk_by(|a, b| cell(a) == cell(b)) {
        out.push(aggregate_group(group));
    }
    out
}

fn aggregate_group(group: &[&TrialRecord]) -> AggregateRecord {
    let head = group[0];
    let powers: Vec<f64> = group
        .iter()
        .filter(|r| r.feasible)
        .map(|r| r.power_w)
        .collect();
    let n = powers.len();
    let (mean, ci) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = powers.iter().sum::<f64>() / n as f64;
        let ci = if n < 2 || mean <= 0.0 {
            0.0
        } else {
            let var = powers.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64;
            let half = 1.96 * (var / n as f64).sqrt();
            10.0 * (1.0 + half / mean).log10()
        };
        (mean, ci)
    };
    AggregateRecord {
        protocol: head.protocol,
        scenario: head.scenario,
        elements: head.elements,
        trials: group.len(),
        feasible: n,
        mean_power_w: mean,
        mean_power_dbm: if n == 0 { f64::NAN } else { watts_to_dbm(mean) },
        ci95_db: ci,
        feasibility_rate: n as f64 / group.len() as f64,
    }
}

const TRIAL_HEADER: [&str; 15] = [
    "protocol",
    "scenario",
    "M",
    "trial",
    "seed",
    "channel_hash",
    "feasible",
    "power_w",
    "power_dbm",
    "sweeps",
    "inner_solves",
    "energy_residual",
    "admissible",
    "trace_violations",
    "lambda",
];

const AGGREGATE_HEADER: [&str; 9] = [
    "protocol",
    "scenario",
    "M",
    "trials",
    "feasible",
    "mean_power_w",
    "mean_power_dbm",
    "ci95_db",
    "feasibility_rate",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `trials.csv` content. Records are emitted in sorted order.
pub fn write_trials<W: Write>(records: &[TrialRecord], out: W, path: &Path) -> Result<()> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut w = csv::Writer::from_writer(out);
    let e = csv_err(path);
    w.write_record(TRIAL_HEADER).map_err(&e)?;
    for r in sorted {
        w.write_record([
            r.protocol.short_name().to_string(),
            r.scenario.name().to_string(),
            r.elements.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            format!("{:016x}", r.channel_hash),
            r.feasible.to_string(),
            fmt9(r.power_w),
            fmt9(r.power_dbm),
            r.sweeps.to_string(),
            r.inner_solves.to_string(),
            fmt9(r.energy_residual),
            r.admissible.to_string(),
            r.trace_violations.to_string(),
            r.lambda.map(fmt9).unwrap_or_default(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `timings.csv`: wall-clock milliseconds per trial record.
pub fn write_timings<W: Write>(records: &[TrialRecord], out: W, path: &Path) -> Result<()> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut w = csv::Writer::from_writer(out);
    let e = csv_err(path);
    w.write_record(["protocol", "scenario", "M", "trial", "wall_ms"])
        .map_err(&e)?;
    for r in sorted {
        w.write_record([
            r.protocol.short_name().to_string(),
            r.scenario.name().to_string(),
            r.elements.to_string(),
            r.trial.to_string(),
            fmt9(r.wall_ms),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_aggregates<W: Write>(
    aggregates: &[AggregateRecord],
    out: W,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let e = csv_err(path);
    w.write_record(AGGREGATE_HEADER).map_err(&e)?;
    for a in aggregates {
        w.write_record([
            a.protocol.short_name().to_string(),
            a.scenario.name().to_string(),
            a.elements.to_string(),
            a.trials.to_string(),
            a.feasible.to_string(),
            fmt9(a.mean_power_w),
            fmt9(a.mean_power_dbm),
            fmt9(a.ci95_db),
            fmt9(a.feasibility_rate),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `aggregate.csv` content.
pub fn read_aggregates<R: Read>(input: R, path: &Path) -> Result<Vec<AggregateRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let e = csv_err(path);
    let header = rd.headers().map_err(&e)?.clone();
    if header.iter().ne(AGGREGATE_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected aggregate header",
            path.display()
        )));
    }
    let bad = |field: &str, row: usize| {
        Error::Config(format!(
            "{}: row {row}: bad value in column '{field}'",
            path.display()
        ))
    };
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(&e)?;
        let f = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| bad(AGGREGATE_HEADER[k], row + 1))
        };
        let u = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| bad(AGGREGATE_HEADER[k], row + 1))
        };
        out.push(AggregateRecord {
            protocol: rec[0].parse().map_err(|_| bad("protocol", row + 1))?,
            scenario: rec[1].parse().map_err(|_| bad("scenario", row + 1))?,
            elements: u(2)?,
            trials: u(3)?,
            feasible: u(4)?,
            mean_power_w: f(5)?,
            mean_power_dbm: f(6)?,
            ci95_db: f(7)?,
            feasibility_rate: f(8)?,
        });
    }
    Ok(out)
}

/// Writes the plot table of one scenario: column `M`, then `<P>_mean_dbm` and
/// `<P>_ci_db` for every protocol present. Missing cells are left empty.
pub fn write_plot<W: Write>(
    aggregates: &[AggregateRecord],
    scenario: ScenarioKind,
    out: W,
    path: &Path,
) -> Result<()> {
    let rows: Vec<&AggregateRecord> = aggregates
        .iter()
        .filter(|a| a.scenario == scenario)
        .collect();
    let mut protocols: Vec<Protocol> = rows.iter().map(|a| a.protocol).collect();
    protocols.sort();
    protocols.dedup();
    let mut ms: Vec<usize> = rows.iter().map(|a| a.elements).collect();
    ms.sort_unstable();
    ms.dedup();

    let mut w = csv::Writer::from_writer(out);
    let e = csv_err(path);
    let mut header = vec!["M".to_string()];
    for p in &protocols {
        header.push(format!("{}_mean_dbm", p.short_name()));
        header.push(format!("{}_ci_db", p.short_name()));
    }
    w.write_record(&header).map_err(&e)?;
    for m in ms {
        let mut line = vec![m.to_string()];
        for p in &protocols {
            match rows.iter().find(|a| a.protocol == *p && a.elements == m) {
                Some(a) => {
                    line.push(fmt9(a.mean_power_dbm));
                    line.push(fmt9(a.ci95_db));
                }
                None => line.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&line).map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn plot_file_name(scenario: ScenarioKind) -> String {
    format!("plot_{}.csv", scenario.name())
}

/// Writes `plot_<scenario>.csv` into `dir` for each scenario.
pub fn emit_plot_data(
    aggregates: &[AggregateRecord],
    dir: &Path,
    scenarios: &[ScenarioKind],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &s in scenarios {
        let path = dir.join(plot_file_name(s));
        write_plot(aggregates, s, create(&path)?, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub(crate) fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(protocol: Protocol, m: usize, trial: usize, power_w: f64) -> TrialRecord {
        TrialRecord {
            protocol,
            scenario: ScenarioKind::Unicast,
            elements: m,
            trial,
            seed: 7,
            channel_hash: 0xabc,
            feasible: power_w.is_finite(),
            power_w,
            power_dbm: watts_to_dbm(power_w),
            sweeps: 3,
            inner_solves: 99,
            energy_residual: 0.0,
            admissible: true,
            trace_violations: 0,
            lambda: None,
            wall_ms: 1.5,
        }
    }

    fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(1.0), "1.00000000e0");
        assert_eq!(fmt9(-1.234567891234e-5), "-1.23456789e-5");
        assert_eq!(fmt9(f64::INFINITY), "inf");
        let x = 0.1 + 0.2;
        let back: f64 = fmt9(x).parse().unwrap();
        assert!((back / x - 1.0).abs() < 5e-9);
    }

    #[test]
    fn single_trial_aggregate_equals_it() {
        let r = rec(Protocol::EnergySplitting, 10, 0, 2e-3);
        let a = aggregate(std::slice::from_ref(&r));
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].mean_power_w, r.power_w);
        assert_eq!(a[0].mean_power_dbm, r.power_dbm);
        assert_eq!(a[0].ci95_db, 0.0);
        assert_eq!(a[0].feasibility_rate, 1.0);
    }

    #[test]
    fn aggregate_is_order_independent_and_linear() {
        let mut rs = vec![
            rec(Protocol::ModeSwitching, 10, 1, 3e-3),
            rec(Protocol::ModeSwitching, 10, 0, 1e-3),
            rec(Protocol::ModeSwitching, 10, 2, f64::INFINITY),
            rec(Protocol::EnergySplitting, 20, 0, 1e-3),
        ];
        let a = aggregate(&rs);
        rs.reverse();
        assert_eq!(aggregate(&rs), a);
        assert_eq!(a[0].protocol, Protocol::EnergySplitting);
        let ms = &a[1];
        assert_eq!((ms.trials, ms.feasible), (3, 2));
        assert!((ms.mean_power_w - 2e-3).abs() < 1e-18);
        assert!((ms.mean_power_dbm - watts_to_dbm(2e-3)).abs() < 1e-12);
        assert!((ms.feasibility_rate - 2.0 / 3.0).abs() < 1e-15);
        // s = sqrt(2) mW, n = 2
        let half = 1.96 * (2e-6f64 / 2.0).sqrt();
        assert!((ms.ci95_db - 10.0 * (1.0 + half / 2e-3).log10()).abs() < 1e-12);
    }

    #[test]
    fn trials_csv_is_sorted_and_excludes_wall_time() {
        let rs = vec![
            rec(Protocol::OmniCoupled, 10, 0, 1e-3),
            rec(Protocol::EnergySplitting, 10, 0, 1e-3),
        ];
        let text = csv_string(|b| write_trials(&rs, b, Path::new("t.csv")));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("protocol,scenario,M,trial"));
        assert!(!lines[0].contains("wall"));
        assert!(lines[1].starts_with("ES,unicast,10,0,7,0000000000000abc,true,1.00000000e-3"));
        assert!(lines[2].starts_with("Omni,"));
    }

    #[test]
    fn empty_plot_is_header_only() {
        let text = csv_string(|b| write_plot(&[], ScenarioKind::Unicast, b, Path::new("p.csv")));
        assert_eq!(text, "M\n");
    }

    #[test]
    fn plot_shape() {
        let mut rs = Vec::new();
        for m in [10, 20, 30] {
            rs.push(rec(Protocol::EnergySplitting, m, 0, 1e-3 / m as f64));
            rs.push(rec(Protocol::TimeSwitching, m, 0, 2e-3 / m as f64));
        }
        let a = aggregate(&rs);
        let text = csv_string(|b| write_plot(&a, ScenarioKind::Unicast, b, Path::new("p.csv")));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "M,ES_mean_dbm,ES_ci_db,TS_mean_dbm,TS_ci_db");
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
        let other = csv_string(|b| write_plot(&a, ScenarioKind::Multicast, b, Path::new("p.csv")));
        assert_eq!(other, "M\n");
    }

    #[test]
    fn aggregate_round_trip_to_printed_precision() {
        let rs: Vec<TrialRecord> = (0..5)
            .map(|t| {
                rec(
                    Protocol::ConventionalSplit,
                    10,
                    t,
                    1.234567891234e-4 * (1.0 + t as f64 / 7.0),
                )
            })
            .collect();
        let a = aggregate(&rs);
        let text = csv_string(|b| write_aggregates(&a, b, Path::new("a.csv")));
        let back = read_aggregates(text.as_bytes(), Path::new("a.csv")).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(
            (back[0].protocol, back[0].elements, back[0].trials),
            (a[0].protocol, 10, 5)
        );
        for (x, y) in [
            (back[0].mean_power_w, a[0].mean_power_w),
            (back[0].mean_power_dbm, a[0].mean_power_dbm),
            (back[0].ci95_db, a[0].ci95_db),
        ] {
            assert_eq!(fmt9(x), fmt9(y));
            assert!((x / y - 1.0).abs() <= 5e-9);
        }
    }

    #[test]
    fn malformed_aggregate_is_rejected() {
        let e = read_aggregates("a,b\n1,2\n".as_bytes(), Path::new("a.csv")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
