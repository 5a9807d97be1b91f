//! Outer optimization of surface coefficients for each operating protocol.
//!
//! Coefficients are searched element by element over finite phase and
//! amplitude grids; every candidate is scored by the exact inner beamforming
//! solver. Richer protocols are warm-started from the solutions of the
//! protocols they contain (Conventional -> MS -> ES, Omni -> ES), which makes
//! `P_ES <= P_MS <= P_Conventional` and `P_ES <= P_Omni` hold exactly.

mod descent;
mod oracle;
mod ts;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::beamforming::{
    multicast_min_power_exact, multicast_plan, unicast_min_power, unicast_power, Gram,
    MulticastSolution, PhaseSearch, UnicastOptions, UnicastSolution,
};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::C;
use crate::model::{rate_to_sinr, Protocol, Scenario, StarCoefficients};
use crate::scalar::Real;

pub use descent::optimize_coefficients;
pub use oracle::{exhaustive_oracle, ORACLE_LIMIT};
pub use ts::{optimize_ts, ts_time_allocation, ts_time_allocation_with, TsAllocation};

/// Discretization and stopping rules of the coordinate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_phase: usize,
    pub n_amplitude: usize,
    pub max_sweeps: usize,
    pub improve_tol_db: f64,
    pub restarts: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_phase: 64,
            n_amplitude: 21,
            max_sweeps: 30,
            improve_tol_db: 0.01,
            restarts: 4,
        }
    }
}

impl GridSpec {
    /// 8 phases, 5 amplitudes. Descents on this grid are cheap, so it uses
    /// more random restarts than the default.
    pub fn coarse() -> Self {
        Self {
            n_phase: 8,
            n_amplitude: 5,
            restarts: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phase < 4 {
            return Err(Error::Config(format!(
                "n_phase {} must be >= 4",
                self.n_phase
            )));
        }
        if self.n_amplitude < 2 {
            return Err(Error::Config(format!(
                "n_amplitude {} must be >= 2",
                self.n_amplitude
            )));
        }
        if !(self.improve_tol_db >= 0.0) {
            return Err(Error::Config("improve_tol_db must be >= 0".into()));
        }
        Ok(())
    }

    /// Phase grid `2 pi i / n_phase`.
    pub fn phases<T: Real>(&self) -> Vec<T> {
        (0..self.n_phase)
            .map(|i| T::TAU() * T::lit(i as f64) / T::lit(self.n_phase as f64))
            .collect()
    }

    /// Amplitude grid `i / (n_amplitude - 1)`, endpoints exact.
    pub fn amplitudes<T: Real>(&self) -> Vec<T> {
        let last = self.n_amplitude - 1;
        (0..self.n_amplitude)
            .map(|i| {
                if i == last {
                    T::one()
                } else {
                    T::lit(i as f64) / T::lit(last as f64)
                }
            })
            .collect()
    }
}

/// Time-switching figure of merit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsPowerMetric {
    /// `lambda p_t + (1 - lambda) p_r`
    #[default]
    Average,
    /// `max(p_t, p_r)`
    Peak,
}

/// Optimized surface configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Configuration<T> {
    Static(StarCoefficients<T>),
    /// Time switching: all-transmit set for the T period, all-reflect set for the R period.
    TimeSwitched {
        transmit: StarCoefficients<T>,
        reflect: StarCoefficients<T>,
    },
}

impl<T: Real> Configuration<T> {
    pub fn coefficient_sets(&self) -> Vec<&StarCoefficients<T>> {
        match self {
            Configuration::Static(c) => vec![c],
            Configuration::TimeSwitched { transmit, reflect } => vec![transmit, reflect],
        }
    }

    pub fn as_static(&self) -> Option<&StarCoefficients<T>> {
        match self {
            Configuration::Static(c) => Some(c),
            Configuration::TimeSwitched { .. } => None,
        }
    }

    /// Whether every set satisfies the protocol's structural constraint.
    pub fn satisfies(&self, protocol: Protocol) -> bool {
        match self {
            Configuration::Static(c) => protocol != Protocol::TimeSwitching && protocol.admits(c),
            Configuration::TimeSwitched { transmit, reflect } => {
                protocol == Protocol::TimeSwitching
                    && transmit.beta_t().iter().all(|b| *b == T::one())
                    && reflect.beta_t().iter().all(|b| *b == T::zero())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Beamformers<T> {
    Unicast(UnicastSolution<T>),
    Multicast(MulticastSolution<T>),
    /// Matched filters for each period plus the time allocation.
    TimeSwitched {
        w_t: Vec<C<T>>,
        w_r: Vec<C<T>>,
        allocation: TsAllocation<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub protocol: Protocol,
    pub configuration: Configuration<T>,
    /// Fraction of time in the T period (time switching only).
    pub lambda: Option<T>,
    pub beamformers: Beamformers<T>,
    /// Minimum transmit power, Watts (time-switching metric for TS).
    pub power_w: T,
    /// Objective after initialization and after every sweep of the winning start.
    pub objective_trace: Vec<T>,
    pub converged: bool,
    pub sweeps: usize,
    /// Inner evaluations spent over all starts.
    pub inner_solves: u64,
}

impl<T: Real> SolveResult<T> {
    pub fn trace_violations(&self) -> usize {
        self.objective_trace
            .windows(2)
            .filter(|w| !(w[1] <= w[0]))
            .count()
    }
}

/// Scores a pair of effective channels for one scenario.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluator<T> {
    pub scenario: Scenario,
    pub gamma_t: T,
    pub gamma_r: T,
    pub sigma2: T,
    pub unicast: UnicastOptions<T>,
}

impl<T: Real> Evaluator<T> {
    pub fn new(scenario: &Scenario, sigma2: T) -> Result<Self> {
        scenario.validate()?;
        let (rt, rr) = scenario.rates();
        Ok(Self {
            scenario: *scenario,
            gamma_t: rate_to_sinr(T::lit(rt))?,
            gamma_r: rate_to_sinr(T::lit(rr))?,
            sigma2,
            unicast: UnicastOptions::default(),
        })
    }

    /// Minimum power, `+inf` when the inner problem fails.
    #[inline]
    pub fn power(&self, h_t: &[C<T>], h_r: &[C<T>]) -> T {
        let g = Gram::new(h_t, h_r, self.sigma2);
        let p = match self.scenario {
            Scenario::Unicast { .. } => {
                unicast_power(&g, self.gamma_t, self.gamma_r, &self.unicast)
            }
            Scenario::Multicast { .. } => {
                multicast_plan(&g, self.gamma_t, PhaseSearch::Analytic).map(|p| p.power)
            }
        };
        match p {
            Ok(p) if p.is_finite() => p,
            _ => T::infinity(),
        }
    }

    pub fn beamformers(&self, h_t: &[C<T>], h_r: &[C<T>]) -> Result<Beamformers<T>> {
        match self.scenario {
            Scenario::Unicast { .. } => unicast_min_power(
                h_t,
                h_r,
                self.gamma_t,
                self.gamma_r,
                self.sigma2,
                &self.unicast,
            )
            .map(Beamformers::Unicast),
            Scenario::Multicast { .. } => {
                multicast_min_power_exact(h_t, h_r, self.gamma_t, self.sigma2)
                    .map(Beamformers::Multicast)
            }
        }
    }
}

/// Power of a static coefficient set evaluated from scratch.
pub fn evaluate_coefficients<T: Real>(
    channels: &ChannelSet<T>,
    coeffs: &StarCoefficients<T>,
    scenario: &Scenario,
) -> Result<T> {
    let eval = Evaluator::new(scenario, channels.sigma2)?;
    Ok(canonical_power(channels, coeffs, &eval))
}

pub(crate) fn canonical_power<T: Real>(
    channels: &ChannelSet<T>,
    coeffs: &StarCoefficients<T>,
    eval: &Evaluator<T>,
) -> T {
    match channels.effective(coeffs) {
        Ok(h) => eval.power(&h.h_t, &h.h_r),
        Err(_) => T::infinity(),
    }
}

/// Everything the protocol solvers need besides channels and seeds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveSettings {
    pub grids: GridSpec,
    pub ts_metric: TsPowerMetric,
}

/// Outcome of one protocol inside a warm-start chain.
#[derive(Debug)]
pub struct ProtocolRun<T> {
    pub protocol: Protocol,
    pub result: Result<SolveResult<T>>,
    /// Time spent on this protocol's own search (prerequisites excluded).
    pub elapsed: Duration,
}

fn prerequisites(p: Protocol) -> &'static [Protocol] {
    match p {
        Protocol::EnergySplitting => &[Protocol::ModeSwitching, Protocol::OmniCoupled],
        Protocol::ModeSwitching => &[Protocol::ConventionalSplit, Protocol::OmniCoupled],
        _ => &[],
    }
}

/// Solves `protocols` (deduplicated, first occurrence order) on one channel realization, running the warm-start
/// chain so nested protocols are computed once and shared.
///
/// `seed_for` supplies the restart seed of each protocol; a protocol's
/// result does not depend on which other protocols were requested.
pub fn solve_protocols<T: Real>(
    channels: &ChannelSet<T>,
    protocols: &[Protocol],
    scenario: &Scenario,
    settings: &SolveSettings,
    seed_for: &dyn Fn(Protocol) -> u64,
) -> Vec<ProtocolRun<T>> {
    let mut done: Vec<ProtocolRun<T>> = Vec::new();
    for &p in protocols {
        ensure(p, channels, scenario, settings, seed_for, &mut done);
    }
    let mut out = Vec::with_capacity(protocols.len());
    for (k, p) in protocols.iter().enumerate() {
        if protocols[..k].contains(p) {
            continue;
        }
        let i = done.iter().position(|r| r.protocol == *p).expect("solved");
        out.push(done.swap_remove(i));
    }
    out
}

/// Solves a single protocol, including its warm-start prerequisites.
pub fn solve_protocol<T: Real>(
    channels: &ChannelSet<T>,
    protocol: Protocol,
    scenario: &Scenario,
    settings: &SolveSettings,
    seed_for: &dyn Fn(Protocol) -> u64,
) -> Result<SolveResult<T>> {
    solve_protocols(channels, &[protocol], scenario, settings, seed_for)
        .pop()
        .expect("one run")
        .result
}

fn ensure<T: Real>(
    p: Protocol,
    channels: &ChannelSet<T>,
    scenario: &Scenario,
    settings: &SolveSettings,
    seed_for: &dyn Fn(Protocol) -> u64,
    done: &mut Vec<ProtocolRun<T>>,
) {
    if done.iter().any(|r| r.protocol == p) {
        return;
    }
    let m = channels.elements();
    let mut warm = Vec::new();
    for &pre in prerequisites(p) {
        if !pre.supports_elements(m) {
            continue;
        }
        ensure(pre, channels, scenario, settings, seed_for, done);
        let run = done
            .iter()
            .find(|r| r.protocol == pre)
            .expect("prerequisite solved");
        if let Ok(s) = &run.result {
            if let Some(c) = s.configuration.as_static() {
                warm.push(c.clone());
            }
        }
    }
    let start = Instant::now();
    let result = if p == Protocol::TimeSwitching {
        optimize_ts(
            channels,
            scenario,
            &settings.grids,
            seed_for(p),
            settings.ts_metric,
        )
    } else {
        optimize_coefficients(channels, p, scenario, &settings.grids, seed_for(p), &warm)
    };
    done.push(ProtocolRun {
        protocol: p,
        result,
        elapsed: start.elapsed(),
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_contain_exact_endpoints() {
        let g = GridSpec::default();
        let a: Vec<f64> = g.amplitudes();
        assert_eq!(a.len(), 21);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[20], 1.0);
        assert_eq!(a[10], 0.5);
        let p: Vec<f64> = g.phases();
        assert_eq!(p.len(), 64);
        assert_eq!(p[0], 0.0);
        assert!(p[63] < std::f64::consts::TAU);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::default().validate().is_ok());
        let bad = GridSpec {
            n_phase: 3,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridSpec {
            n_amplitude: 1,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ts_metric_serde_names() {
        assert_eq!(
            serde_json::to_string(&TsPowerMetric::Average).unwrap(),
            "\"average\""
        );
        assert_eq!(
            serde_json::from_str::<TsPowerMetric>("\"peak\"").unwrap(),
            TsPowerMetric::Peak
        );
    }
}
