//! Self-check suite behind `starsim validate`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::beamforming::{
    multicast_min_power, multicast_min_power_exact, unicast_min_power, UnicastOptions,
};
use crate::channel::{generate_channel_set, ChannelSet};
use crate::linalg::C;
use crate::model::{
    energy_residual, multicast_snrs, rate_to_sinr, unicast_sinrs, ElementResponse, Protocol,
    Scenario, StarCoefficients,
};
use crate::protocols::{
    exhaustive_oracle, solve_protocol, solve_protocols, GridSpec, SolveSettings,
};

use super::config::{ScenarioKind, SweepConfig};
use super::records::{write_aggregates, write_trials, TrialRecord};
use super::seeds::{channel_seed, derive_seed, search_seed};
use super::sweep::{run_sweep_with_threads, SweepOutput};

const SUITE_SEED: u64 = 0x005E_ED0F_57A2;

/// Deliberate defects used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Reflection energy fractions kept in a separate array that is never
    /// updated after the all-transmit initialization.
    IndependentReflection,
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub fault: Option<Fault>,
    /// Instances per randomized check.
    pub instances: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            fault: None,
            instances: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark}  {:width$}  {}", c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Coefficients with the reflection fraction stored independently of the
/// transmission fraction (the representation the fault hook emulates).
struct SeparateReflection<'a> {
    base: &'a StarCoefficients<f64>,
    beta_r: Vec<f64>,
}

impl ElementResponse<f64> for SeparateReflection<'_> {
    fn elements(&self) -> usize {
        self.base.len()
    }
    fn transmission_at(&self, m: usize) -> C<f64> {
        self.base.transmission(m)
    }
    fn reflection_at(&self, m: usize) -> C<f64> {
        C::from_polar(self.beta_r[m].sqrt(), self.base.theta_r()[m])
    }
}

fn residual_with_fault(coeffs: &StarCoefficients<f64>, fault: Option<Fault>) -> f64 {
    match fault {
        None => energy_residual(coeffs),
        Some(Fault::IndependentReflection) => energy_residual(&SeparateReflection {
            base: coeffs,
            beta_r: vec![0.0; coeffs.len()],
        }),
    }
}

fn random_channel(rng: &mut ChaCha8Rng, n: usize) -> Vec<C<f64>> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

fn unicast_plug_back(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SUITE_SEED, &[1]));
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..instances {
        let h_t = random_channel(&mut rng, 2);
        let h_r = random_channel(&mut rng, 2);
        let g_t = rate_to_sinr(rng.random_range(0.25..3.0)).unwrap();
        let g_r = rate_to_sinr(rng.random_range(0.25..3.0)).unwrap();
        match unicast_min_power(&h_t, &h_r, g_t, g_r, 1.0, &UnicastOptions::default())
            .and_then(|s| unicast_sinrs(&h_t, &h_r, &s.w_t, &s.w_r, 1.0))
        {
            Ok((s_t, s_r)) => {
                let e = ((s_t - g_t) / g_t).abs().max(((s_r - g_r) / g_r).abs());
                worst = worst.max(e);
                if e > 1e-6 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check {
        name: "unicast plug-back",
        passed: failures == 0,
        detail: format!(
            "{instances} instances, worst relative SINR gap {worst:.2e}, {failures} failures"
        ),
    }
}

fn multicast_plug_back(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SUITE_SEED, &[2]));
    let mut worst_tight = 0.0f64;
    let mut worst_db = 0.0f64;
    let mut failures = 0;
    for _ in 0..instances {
        let h_t = random_channel(&mut rng, 2);
        let h_r = random_channel(&mut rng, 2);
        let g = rate_to_sinr(rng.random_range(0.25..4.0)).unwrap();
        let res = multicast_min_power(&h_t, &h_r, g, 1.0, 64).and_then(|grid| {
            let exact = multicast_min_power_exact(&h_t, &h_r, g, 1.0)?;
            let snr = multicast_snrs(&h_t, &h_r, &grid.w, 1.0)?;
            Ok((grid.power_w, exact.power_w, snr))
        });
        match res {
            Ok((p_grid, p_exact, (s_t, s_r))) => {
                let low = s_t.min(s_r);
                let tight = (low - g).abs() / g;
                let db = 10.0 * (p_grid / p_exact).log10().abs();
                worst_tight = worst_tight.max(tight);
                worst_db = worst_db.max(db);
                if tight > 1e-6 || db > 0.02 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check {
        name: "multicast plug-back",
        passed: failures == 0,
        detail: format!(
            "{instances} instances, worst binding-SNR gap {worst_tight:.2e}, grid vs closed form {worst_db:.2e} dB"
        ),
    }
}

fn conservation(fault: Option<Fault>) -> Check {
    let cfg = SweepConfig::default();
    let settings = SolveSettings {
        grids: GridSpec::coarse(),
        ..SolveSettings::default()
    };
    let mut worst = 0.0f64;
    let mut sets = 0;
    for m in [4usize, 6] {
        let Ok(ch) = generate_channel_set::<f64>(
            &cfg.geometry,
            &cfg.fading,
            m,
            cfg.antennas,
            channel_seed(SUITE_SEED, m, 0),
        ) else {
            continue;
        };
        for kind in ScenarioKind::BOTH {
            let scenario = cfg.scenario(kind);
            let seed_for = |p: Protocol| search_seed(SUITE_SEED, p, &scenario, m, 0);
            for run in solve_protocols(&ch, &Protocol::ALL, &scenario, &settings, &seed_for) {
                if let Ok(s) = run.result {
                    for c in s.configuration.coefficient_sets() {
                        worst = worst.max(residual_with_fault(c, fault));
                        sets += 1;
                    }
                }
            }
        }
    }
    Check {
        name: "energy conservation",
        passed: sets > 0 && worst < 1e-12,
        detail: format!("{sets} coefficient sets, worst residual {worst:.2e}"),
    }
}

fn oracle_equivalence(instances: usize) -> Check {
    let cfg = SweepConfig::default();
    let settings = SolveSettings {
        grids: GridSpec::coarse(),
        ..SolveSettings::default()
    };
    let scenario = cfg.scenario(ScenarioKind::Unicast);
    let mut parts = Vec::new();
    let mut ok = true;
    for p in Protocol::ALL {
        let mut agree = 0;
        for k in 0..instances {
            let Ok(ch) = generate_channel_set::<f64>(
                &cfg.geometry,
                &cfg.fading,
                2,
                cfg.antennas,
                channel_seed(SUITE_SEED, 2, k),
            ) else {
                continue;
            };
            if oracle_agrees(&ch, p, &scenario, &settings, k) {
                agree += 1;
            }
        }
        ok &= agree * 100 >= 95 * instances;
        parts.push(format!("{p} {agree}/{instances}"));
    }
    Check {
        name: "oracle equivalence",
        passed: ok,
        detail: format!("M=2 coarse grids, within 0.1 dB: {}", parts.join(", ")),
    }
}

/// Coordinate descent within 0.1 dB of the exhaustive grid optimum.
pub(crate) fn oracle_agrees(
    ch: &ChannelSet<f64>,
    protocol: Protocol,
    scenario: &Scenario,
    settings: &SolveSettings,
    instance: usize,
) -> bool {
    let seed_for = |p: Protocol| search_seed(SUITE_SEED, p, scenario, 2, instance);
    let cd = solve_protocol(ch, protocol, scenario, settings, &seed_for).map(|s| s.power_w);
    let or = exhaustive_oracle(ch, protocol, scenario, &settings.grids).map(|s| s.power_w);
    match (cd, or) {
        (Ok(a), Ok(b)) => a <= b * 10f64.powf(0.01),
        (Err(a), Err(b)) => a.is_infeasible() && b.is_infeasible(),
        _ => false,
    }
}

fn small_sweep_config() -> SweepConfig {
    SweepConfig {
        elements: vec![4, 6],
        trials: 2,
        master_seed: SUITE_SEED,
        grids: GridSpec {
            restarts: 1,
            ..GridSpec::coarse()
        },
        ..SweepConfig::default()
    }
}

fn csv_bytes(out: &SweepOutput) -> (Vec<u8>, Vec<u8>) {
    let mut t = Vec::new();
    let mut a = Vec::new();
    write_trials(&out.trials, &mut t, Path::new("trials.csv")).expect("in-memory write");
    write_aggregates(&out.aggregates, &mut a, Path::new("aggregate.csv")).expect("in-memory write");
    (t, a)
}

fn determinism(first: &SweepOutput, cfg: &SweepConfig) -> Check {
    match run_sweep_with_threads(cfg, Some(3)) {
        Ok(second) => {
            let same = csv_bytes(first) == csv_bytes(&second);
            Check {
                name: "determinism",
                passed: same,
                detail: format!(
                    "{} records, 1 vs 3 workers: CSV output {}",
                    first.trials.len(),
                    if same { "byte-identical" } else { "differs" }
                ),
            }
        }
        Err(e) => Check {
            name: "determinism",
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Per-trial `P_ES <= P_MS <= P_Conventional` and `P_ES <= P_Omni`.
pub fn nesting_violations(records: &[TrialRecord]) -> Vec<String> {
    let mut out = Vec::new();
    let find = |r: &TrialRecord, p: Protocol| {
        records.iter().find(|o| {
            o.protocol == p
                && o.scenario == r.scenario
                && o.elements == r.elements
                && o.trial == r.trial
                && o.feasible
        })
    };
    for es in records
        .iter()
        .filter(|r| r.protocol == Protocol::EnergySplitting)
    {
        let chain = [
            (Protocol::EnergySplitting, Protocol::ModeSwitching),
            (Protocol::ModeSwitching, Protocol::ConventionalSplit),
            (Protocol::EnergySplitting, Protocol::OmniCoupled),
        ];
        for (inner, outer) in chain {
            if let (Some(a), Some(b)) = (find(es, inner), find(es, outer)) {
                if a.power_w > b.power_w {
                    out.push(format!(
                        "{} M={} trial {}: {inner} {:e} > {outer} {:e}",
                        es.scenario, es.elements, es.trial, a.power_w, b.power_w
                    ));
                }
            }
        }
    }
    out
}

fn nesting(out: &SweepOutput) -> Check {
    let v = nesting_violations(&out.trials);
    Check {
        name: "nesting",
        passed: v.is_empty(),
        detail: match v.first() {
            None => format!("{} records, 0 violations", out.trials.len()),
            Some(first) => format!("{} violations, first: {first}", v.len()),
        },
    }
}

fn monotone_descent(out: &SweepOutput) -> Check {
    let v: usize = out.trials.iter().map(|r| r.trace_violations).sum();
    Check {
        name: "monotone descent",
        passed: v == 0,
        detail: format!("{v} objective-trace increases"),
    }
}

fn paired_channels(out: &SweepOutput) -> Check {
    let bad = out
        .trials
        .iter()
        .filter(|r| {
            out.trials.iter().any(|o| {
                o.elements == r.elements && o.trial == r.trial && o.channel_hash != r.channel_hash
            })
        })
        .count();
    Check {
        name: "paired channels",
        passed: bad == 0,
        detail: format!("{bad} records with a mismatched channel hash"),
    }
}

/// Runs every check; never panics on solver failures.
pub fn validate(opts: &ValidateOptions) -> ValidationReport {
    let mut checks = vec![
        unicast_plug_back(opts.instances),
        multicast_plug_back(opts.instances),
        conservation(opts.fault),
        oracle_equivalence(opts.instances),
    ];
    let cfg = small_sweep_config();
    match run_sweep_with_threads(&cfg, Some(1)) {
        Ok(out) => {
            checks.push(determinism(&out, &cfg));
            checks.push(nesting(&out));
            checks.push(monotone_descent(&out));
            checks.push(paired_channels(&out));
        }
        Err(e) => checks.push(Check {
            name: "sweep",
            passed: false,
            detail: e.to_string(),
        }),
    }
    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_hook_breaks_conservation() {
        assert!(conservation(None).passed);
        let c = conservation(Some(Fault::IndependentReflection));
        assert!(!c.passed, "{c:?}");
    }

    #[test]
    fn quick_suite_passes() {
        let r = validate(&ValidateOptions {
            fault: None,
            instances: 10,
        });
        assert!(r.passed(), "{r}");
        assert!(r.to_string().contains("PASS  nesting"));
    }

    #[test]
    fn nesting_detector_flags_inversions() {
        let base = TrialRecord {
            protocol: Protocol::EnergySplitting,
            scenario: ScenarioKind::Unicast,
            elements: 4,
            trial: 0,
            seed: 0,
            channel_hash: 0,
            feasible: true,
            power_w: 2.0,
            power_dbm: 0.0,
            sweeps: 0,
            inner_solves: 0,
            energy_residual: 0.0,
            admissible: true,
            trace_violations: 0,
            lambda: None,
            wall_ms: 0.0,
        };
        let ms = TrialRecord {
            protocol: Protocol::ModeSwitching,
            power_w: 1.0,
            ..base.clone()
        };
        assert_eq!(nesting_violations(&[base.clone(), ms]).len(), 1);
        let ms = TrialRecord {
            protocol: Protocol::ModeSwitching,
            power_w: 2.0,
            ..base.clone()
        };
        assert!(nesting_violations(&[base, ms]).is_empty());
    }
}
