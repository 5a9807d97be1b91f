//! Time switching: independent phase designs per period plus time allocation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Beamformers, Configuration, GridSpec, SolveResult, TsPowerMetric};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{axpy, cis, norm_sqr, scaled, zero, CMatrix, C};
use crate::model::{effective_channel, Protocol, Scenario, StarCoefficients};
use crate::scalar::Real;
use crate::search::golden_section;

const LAMBDA_EDGE: f64 = 1e-4;
const LAMBDA_TOL: f64 = 1e-6;

/// Optimized time split between the T and R periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsAllocation<T> {
    /// Fraction of time spent in the T period.
    pub lambda: T,
    pub p_t: T,
    pub p_r: T,
    /// `lambda p_t + (1 - lambda) p_r`
    pub p_avg: T,
}

impl<T: Real> TsAllocation<T> {
    pub fn metric(&self, metric: TsPowerMetric) -> T {
        match metric {
            TsPowerMetric::Average => self.p_avg,
            TsPowerMetric::Peak => self.p_t.max(self.p_r),
        }
    }
}

/// Power needed in a period of length `frac` to carry `rate` over gain `g`.
fn period_power<T: Real>(rate: T, frac: T, gain: T, sigma2: T) -> T {
    if rate == T::zero() {
        return T::zero();
    }
    ((rate / frac).exp2() - T::one()) * sigma2 / gain
}

fn allocation_at<T: Real>(lambda: T, rates: (T, T), g_t: T, g_r: T, sigma2: T) -> TsAllocation<T> {
    let p_t = period_power(rates.0, lambda, g_t, sigma2);
    let p_r = period_power(rates.1, T::one() - lambda, g_r, sigma2);
    TsAllocation {
        lambda,
        p_t,
        p_r,
        p_avg: lambda * p_t + (T::one() - lambda) * p_r,
    }
}

fn checked_rates<T: Real>(g_t: T, g_r: T, scenario: &Scenario, sigma2: T) -> Result<(T, T)> {
    scenario.validate()?;
    let (rt, rr) = scenario.rates();
    let rates = (T::lit(rt), T::lit(rr));
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    if (rates.0 > T::zero() && !(g_t > T::zero())) || (rates.1 > T::zero() && !(g_r > T::zero())) {
        return Err(Error::Infeasible(
            "zero cascaded gain with a positive rate".into(),
        ));
    }
    Ok(rates)
}

/// Time allocation minimizing the average power.
pub fn ts_time_allocation<T: Real>(
    g_t: T,
    g_r: T,
    scenario: &Scenario,
    sigma2: T,
) -> Result<TsAllocation<T>> {
    ts_time_allocation_with(g_t, g_r, scenario, sigma2, TsPowerMetric::Average)
}

/// Golden-section search over `lambda in (1e-4, 1 - 1e-4)` to 1e-6.
///
/// Both metrics are unimodal in `lambda`: the average is a sum of two
/// perspective functions (convex), the peak is the max of a decreasing and
/// an increasing function.
pub fn ts_time_allocation_with<T: Real>(
    g_t: T,
    g_r: T,
    scenario: &Scenario,
    sigma2: T,
    metric: TsPowerMetric,
) -> Result<TsAllocation<T>> {
    let rates = checked_rates(g_t, g_r, scenario, sigma2)?;
    let eps = T::lit(LAMBDA_EDGE);
    let best = golden_section(
        |l| allocation_at(l, rates, g_t, g_r, sigma2).metric(metric),
        eps,
        T::one() - eps,
        T::lit(LAMBDA_TOL),
    );
    Ok(allocation_at(best.x, rates, g_t, g_r, sigma2))
}

/// Coordinate ascent of `||sum_m e^{-j theta_m} rows[m]||^2` over grid phases.
struct GainSearch<'a, T> {
    rows: &'a CMatrix<T>,
    phase_values: Vec<T>,
    phasors: Vec<C<T>>,
    evaluations: u64,
}

struct GainRun<T> {
    phases: Vec<T>,
    trace: Vec<T>,
    converged: bool,
}

impl<'a, T: Real> GainSearch<'a, T> {
    fn canonical(&self, g: &CMatrix<T>, v: &[C<T>], phases: &[T]) -> T {
        let ones = vec![T::one(); phases.len()];
        effective_channel(g, v, &ones, phases).map_or(T::zero(), |h| norm_sqr(&h))
    }

    fn run(
        &mut self,
        g: &CMatrix<T>,
        v: &[C<T>],
        grids: &GridSpec,
        mut phases: Vec<T>,
    ) -> GainRun<T> {
        let m = phases.len();
        let n = self.rows.cols();
        let mut gain = self.canonical(g, v, &phases);
        let mut trace = vec![gain];
        let mut converged = false;
        let mut base = vec![zero(); n];
        let mut cand = vec![zero(); n];
        for _ in 0..grids.max_sweeps {
            let snapshot = phases.clone();
            for k in 0..m {
                base.iter_mut().for_each(|z| *z = zero());
                for j in (0..m).filter(|j| *j != k) {
                    axpy(cis(-phases[j]), self.rows.row(j), &mut base);
                }
                cand.copy_from_slice(&base);
                axpy(cis(-phases[k]), self.rows.row(k), &mut cand);
                let mut incumbent = norm_sqr(&cand);
                let mut pick = None;
                for (i, ph) in self.phasors.iter().enumerate() {
                    cand.copy_from_slice(&base);
                    axpy(*ph, self.rows.row(k), &mut cand);
                    self.evaluations += 1;
                    let val = norm_sqr(&cand);
                    if val > incumbent {
                        incumbent = val;
                        pick = Some(i);
                    }
                }
                if let Some(i) = pick {
                    phases[k] = self.phase_values[i];
                }
            }
            let next = self.canonical(g, v, &phases);
            if !(next >= gain) {
                phases = snapshot;
                converged = true;
                break;
            }
            let gain_db = if next == gain {
                0.0
            } else if gain == T::zero() {
                f64::INFINITY
            } else {
                10.0 * (next / gain).to_f64_lossy().log10()
            };
            trace.push(next);
            gain = next;
            if gain_db < grids.improve_tol_db {
                converged = true;
                break;
            }
        }
        GainRun {
            phases,
            trace,
            converged,
        }
    }
}

fn best_gain_phases<T: Real>(
    rows: &CMatrix<T>,
    g: &CMatrix<T>,
    v: &[C<T>],
    grids: &GridSpec,
    rng: &mut ChaCha8Rng,
    evaluations: &mut u64,
) -> GainRun<T> {
    let mut search = GainSearch {
        rows,
        phase_values: grids.phases(),
        phasors: grids.phases::<T>().iter().map(|p| cis(-*p)).collect(),
        evaluations: 0,
    };
    let m = rows.rows();
    let mut best: Option<GainRun<T>> = None;
    for _ in 0..grids.restarts.max(1) {
        let init: Vec<T> = (0..m)
            .map(|_| search.phase_values[rng.random_range(0..search.phase_values.len())])
            .collect();
        let run = search.run(g, v, grids, init);
        let better = best
            .as_ref()
            .is_none_or(|b| run.trace.last() > b.trace.last());
        if better {
            best = Some(run);
        }
    }
    *evaluations += search.evaluations;
    best.expect("at least one start")
}

/// Time-switching optimizer: per-period gain maximization, then time allocation.
pub fn optimize_ts<T: Real>(
    channels: &ChannelSet<T>,
    scenario: &Scenario,
    grids: &GridSpec,
    seed: u64,
    metric: TsPowerMetric,
) -> Result<SolveResult<T>> {
    grids.validate()?;
    scenario.validate()?;
    let m = channels.elements();
    let (casc_t, casc_r) = channels.cascades();
    let (rate_t, rate_r) = scenario.rates();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = 0u64;

    let idle = || GainRun {
        phases: vec![T::zero(); m],
        trace: Vec::new(),
        converged: true,
    };
    let mut t_run = if rate_t > 0.0 {
        best_gain_phases(
            &casc_t,
            &channels.g,
            &channels.v_t,
            grids,
            &mut rng,
            &mut evaluations,
        )
    } else {
        idle()
    };
    let mut r_run = if rate_r > 0.0 {
        best_gain_phases(
            &casc_r,
            &channels.g,
            &channels.v_r,
            grids,
            &mut rng,
            &mut evaluations,
        )
    } else {
        idle()
    };

    let transmit =
        StarCoefficients::new(vec![T::one(); m], t_run.phases.clone(), vec![T::zero(); m])?;
    let reflect =
        StarCoefficients::new(vec![T::zero(); m], vec![T::zero(); m], r_run.phases.clone())?;
    let h_t = effective_channel(
        &channels.g,
        &channels.v_t,
        transmit.beta_t(),
        transmit.theta_t(),
    )?;
    let h_r = effective_channel(
        &channels.g,
        &channels.v_r,
        &reflect.beta_r_vec(),
        reflect.theta_r(),
    )?;
    let (g_t, g_r) = (norm_sqr(&h_t), norm_sqr(&h_r));
    for (run, g) in [(&mut t_run, g_t), (&mut r_run, g_r)] {
        if run.trace.is_empty() {
            run.trace.push(g);
        }
    }

    // Objective per sweep; the previous lambda is re-tried so rounding in the
    // golden-section search cannot make the trace increase.
    let sweeps = t_run.trace.len().max(r_run.trace.len());
    let rates = checked_rates(g_t, g_r, scenario, channels.sigma2)?;
    let mut trace = Vec::with_capacity(sweeps);
    let mut alloc: Option<TsAllocation<T>> = None;
    for s in 0..sweeps {
        let gt = t_run.trace[s.min(t_run.trace.len() - 1)];
        let gr = r_run.trace[s.min(r_run.trace.len() - 1)];
        let fresh = match ts_time_allocation_with(gt, gr, scenario, channels.sigma2, metric) {
            Ok(a) => a,
            Err(_) => {
                trace.push(T::infinity());
                continue;
            }
        };
        let chosen = match alloc {
            Some(prev) => {
                let again = allocation_at(prev.lambda, rates, gt, gr, channels.sigma2);
                if again.metric(metric) < fresh.metric(metric) {
                    again
                } else {
                    fresh
                }
            }
            None => fresh,
        };
        trace.push(chosen.metric(metric));
        alloc = Some(chosen);
    }
    let allocation = alloc.ok_or_else(|| Error::Infeasible("time switching infeasible".into()))?;
    let power_w = *trace.last().expect("non-empty trace");
    if !power_w.is_finite() {
        return Err(Error::Infeasible(
            "time switching power is not finite".into(),
        ));
    }

    let matched = |h: &[C<T>], p: T| {
        let g = norm_sqr(h);
        if g > T::zero() {
            scaled(C::new((p / g).sqrt(), T::zero()), h)
        } else {
            vec![zero(); h.len()]
        }
    };
    Ok(SolveResult {
        protocol: Protocol::TimeSwitching,
        configuration: Configuration::TimeSwitched { transmit, reflect },
        lambda: Some(allocation.lambda),
        beamformers: Beamformers::TimeSwitched {
            w_t: matched(&h_t, allocation.p_t),
            w_r: matched(&h_r, allocation.p_r),
            allocation,
        },
        power_w,
        objective_trace: trace,
        converged: t_run.converged && r_run.converged,
        sweeps: sweeps - 1,
        inner_solves: evaluations,
    })
}
