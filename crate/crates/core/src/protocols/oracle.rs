//! Brute-force enumeration of a protocol's grid feasible set.

use super::{
    canonical_power, ts_time_allocation_with, Beamformers, Configuration, Evaluator, GridSpec,
    SolveResult,
};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, scaled, zero, C};
use crate::model::{effective_channel, Protocol, Scenario, StarCoefficients};
use crate::scalar::Real;

/// Maximum number of inner evaluations the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

/// Per-element choice count of the protocol on `grids`.
fn choices(protocol: Protocol, grids: &GridSpec) -> u128 {
    let np = grids.n_phase as u128;
    match protocol {
        Protocol::EnergySplitting => np * np * grids.n_amplitude as u128,
        Protocol::ModeSwitching => 2 * np,
        Protocol::ConventionalSplit | Protocol::OmniCoupled | Protocol::TimeSwitching => np,
    }
}

/// Decodes a per-element choice index into `(beta_t, theta_t, theta_r)`.
fn decode<T: Real>(
    protocol: Protocol,
    m: usize,
    elements: usize,
    idx: usize,
    phases: &[T],
    amps: &[T],
) -> (T, T, T) {
    let np = phases.len();
    match protocol {
        Protocol::EnergySplitting => {
            let (t, rest) = (idx % np, idx / np);
            let (r, a) = (rest % np, rest / np);
            (amps[a], phases[t], phases[r])
        }
        Protocol::ModeSwitching => {
            if idx < np {
                (T::one(), phases[idx], T::zero())
            } else {
                (T::zero(), T::zero(), phases[idx - np])
            }
        }
        Protocol::ConventionalSplit => {
            if m < elements / 2 {
                (T::zero(), T::zero(), phases[idx])
            } else {
                (T::one(), phases[idx], T::zero())
            }
        }
        Protocol::OmniCoupled => (T::lit(0.5), phases[idx], phases[idx]),
        Protocol::TimeSwitching => unreachable!(),
    }
}

/// Visits every index tuple in `[0, radix)^len`, first coordinate fastest.
fn for_each_tuple(len: usize, radix: usize, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; len];
    loop {
        f(&digits);
        let mut k = 0;
        loop {
            if k == len {
                return;
            }
            digits[k] += 1;
            if digits[k] < radix {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Global optimum over the protocol's grid points, scored by the same inner
/// solvers as the coordinate descent. Ties keep the first point enumerated.
pub fn exhaustive_oracle<T: Real>(
    channels: &ChannelSet<T>,
    protocol: Protocol,
    scenario: &Scenario,
    grids: &GridSpec,
) -> Result<SolveResult<T>> {
    grids.validate()?;
    let m = channels.elements();
    if !protocol.supports_elements(m) {
        return Err(Error::Domain(format!("{protocol} cannot use M = {m}")));
    }
    let per = choices(protocol, grids);
    let mut requested = per.checked_pow(m as u32).unwrap_or(u128::MAX);
    if protocol == Protocol::TimeSwitching {
        requested = requested.saturating_mul(2);
    }
    if requested > ORACLE_LIMIT {
        return Err(Error::RefusedSize {
            requested,
            limit: ORACLE_LIMIT,
        });
    }
    let phases: Vec<T> = grids.phases();
    let amps: Vec<T> = grids.amplitudes();

    if protocol == Protocol::TimeSwitching {
        return ts_oracle(channels, scenario, &phases);
    }

    let eval = Evaluator::new(scenario, channels.sigma2)?;
    let mut solves = 0u64;
    let mut best: Option<(T, StarCoefficients<T>)> = None;
    for_each_tuple(m, per as usize, |digits| {
        let mut beta = Vec::with_capacity(m);
        let mut tt = Vec::with_capacity(m);
        let mut tr = Vec::with_capacity(m);
        for (k, &d) in digits.iter().enumerate() {
            let (b, t, r) = decode(protocol, k, m, d, &phases, &amps);
            beta.push(b);
            tt.push(t);
            tr.push(r);
        }
        let coeffs = StarCoefficients::new(beta, tt, tr).expect("grid point is valid");
        let p = canonical_power(channels, &coeffs, &eval);
        solves += 1;
        if best.as_ref().is_none_or(|(bp, _)| p < *bp) {
            best = Some((p, coeffs));
        }
    });
    let (power, coeffs) = best.expect("non-empty grid");
    if !power.is_finite() {
        return Err(Error::Infeasible(format!(
            "{protocol}: no feasible grid point"
        )));
    }
    let h = channels.effective(&coeffs)?;
    Ok(SolveResult {
        protocol,
        beamformers: eval.beamformers(&h.h_t, &h.h_r)?,
        configuration: Configuration::Static(coeffs),
        lambda: None,
        power_w: power,
        objective_trace: vec![power],
        converged: true,
        sweeps: 0,
        inner_solves: solves,
    })
}

fn ts_oracle<T: Real>(
    channels: &ChannelSet<T>,
    scenario: &Scenario,
    phases: &[T],
) -> Result<SolveResult<T>> {
    let m = channels.elements();
    let ones = vec![T::one(); m];
    let mut solves = 0u64;
    let mut best_phases = |v: &[C<T>]| -> Result<(Vec<T>, T)> {
        let mut best = (vec![T::zero(); m], T::neg_infinity());
        let mut err = None;
        for_each_tuple(m, phases.len(), |digits| {
            let th: Vec<T> = digits.iter().map(|d| phases[*d]).collect();
            match effective_channel(&channels.g, v, &ones, &th) {
                Ok(h) => {
                    solves += 1;
                    let g = norm_sqr(&h);
                    if g > best.1 {
                        best = (th, g);
                    }
                }
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(best),
        }
    };
    let (t_phases, g_t) = best_phases(&channels.v_t)?;
    let (r_phases, g_r) = best_phases(&channels.v_r)?;
    let alloc = ts_time_allocation_with(
        g_t,
        g_r,
        scenario,
        channels.sigma2,
        super::TsPowerMetric::Average,
    )?;
    let transmit = StarCoefficients::new(vec![T::one(); m], t_phases, vec![T::zero(); m])?;
    let reflect = StarCoefficients::new(vec![T::zero(); m], vec![T::zero(); m], r_phases)?;
    let h_t = channels.effective(&transmit)?.h_t;
    let h_r = channels.effective(&reflect)?.h_r;
    let mf = |h: &[C<T>], p: T| {
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
        lambda: Some(alloc.lambda),
        beamformers: Beamformers::TimeSwitched {
            w_t: mf(&h_t, alloc.p_t),
            w_r: mf(&h_r, alloc.p_r),
            allocation: alloc,
        },
        power_w: alloc.p_avg,
        objective_trace: vec![alloc.p_avg],
        converged: true,
        sweeps: 0,
        inner_solves: solves,
    })
}
