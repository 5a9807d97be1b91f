//! Element-wise coordinate descent for the static protocols (ES, MS,
//! Conventional, Omni).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonical_power, Configuration, Evaluator, GridSpec, SolveResult};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{axpy, cis, zero, CMatrix, C};
use crate::model::{Protocol, Scenario, StarCoefficients};
use crate::scalar::Real;

/// Mutable coefficient state; phasors cache `e^{-j theta}`.
#[derive(Debug, Clone)]
struct State<T> {
    beta: Vec<T>,
    theta_t: Vec<T>,
    theta_r: Vec<T>,
}

impl<T: Real> State<T> {
    fn from_coefficients(c: &StarCoefficients<T>) -> Self {
        Self {
            beta: c.beta_t().to_vec(),
            theta_t: c.theta_t().to_vec(),
            theta_r: c.theta_r().to_vec(),
        }
    }

    /// Swaps the roles of transmission and reflection on every element.
    fn mirrored(&self) -> Self {
        Self {
            beta: self.beta.iter().map(|b| T::one() - *b).collect(),
            theta_t: self.theta_r.clone(),
            theta_r: self.theta_t.clone(),
        }
    }

    /// Nearest mode-switched point: each element keeps its dominant side
    /// (even-indexed elements transmit on an exact tie) and that side's phase.
    fn rounded_modes(&self) -> Self {
        let half = T::lit(0.5);
        let mut out = self.clone();
        for k in 0..self.beta.len() {
            let b = self.beta[k];
            let transmit = b > half || (b == half && k % 2 == 0);
            if transmit {
                out.beta[k] = T::one();
                out.theta_r[k] = T::zero();
            } else {
                out.beta[k] = T::zero();
                out.theta_t[k] = T::zero();
            }
        }
        out
    }

    fn to_coefficients(&self) -> StarCoefficients<T> {
        StarCoefficients::new(
            self.beta.clone(),
            self.theta_t.clone(),
            self.theta_r.clone(),
        )
        .expect("descent keeps coefficients valid")
    }

    fn contribution_t(&self, m: usize) -> C<T> {
        cis(-self.theta_t[m]) * self.beta[m].sqrt()
    }

    fn contribution_r(&self, m: usize) -> C<T> {
        cis(-self.theta_r[m]) * (T::one() - self.beta[m]).sqrt()
    }
}

struct Search<'a, T> {
    protocol: Protocol,
    casc_t: CMatrix<T>,
    casc_r: CMatrix<T>,
    eval: &'a Evaluator<T>,
    phase_values: Vec<T>,
    phasors: Vec<C<T>>,
    amplitudes: Vec<T>,
    solves: u64,
    // scratch
    base_t: Vec<C<T>>,
    base_r: Vec<C<T>>,
    cand_t: Vec<C<T>>,
    cand_r: Vec<C<T>>,
}

impl<'a, T: Real> Search<'a, T> {
    fn new(
        channels: &ChannelSet<T>,
        protocol: Protocol,
        eval: &'a Evaluator<T>,
        grids: &GridSpec,
    ) -> Self {
        let (casc_t, casc_r) = channels.cascades();
        let phase_values: Vec<T> = grids.phases();
        let phasors = phase_values.iter().map(|p| cis(-*p)).collect();
        let n = channels.antennas();
        Self {
            protocol,
            casc_t,
            casc_r,
            eval,
            phase_values,
            phasors,
            amplitudes: grids.amplitudes(),
            solves: 0,
            base_t: vec![zero(); n],
            base_r: vec![zero(); n],
            cand_t: vec![zero(); n],
            cand_r: vec![zero(); n],
        }
    }

    /// Effective channels with element `m` removed.
    fn load_base(&mut self, s: &State<T>, m: usize) {
        self.base_t.iter_mut().for_each(|z| *z = zero());
        self.base_r.iter_mut().for_each(|z| *z = zero());
        for j in 0..s.beta.len() {
            if j == m {
                continue;
            }
            axpy(s.contribution_t(j), self.casc_t.row(j), &mut self.base_t);
            axpy(s.contribution_r(j), self.casc_r.row(j), &mut self.base_r);
        }
    }

    /// Power with element `m` contributing `ut` / `ur` on top of the base.
    #[inline]
    fn score(&mut self, m: usize, ut: C<T>, ur: C<T>) -> T {
        self.cand_t.copy_from_slice(&self.base_t);
        self.cand_r.copy_from_slice(&self.base_r);
        axpy(ut, self.casc_t.row(m), &mut self.cand_t);
        axpy(ur, self.casc_r.row(m), &mut self.cand_r);
        self.solves += 1;
        self.eval.power(&self.cand_t, &self.cand_r)
    }

    /// Scans `count` candidates; returns the first strictly better index.
    fn scan(
        &mut self,
        m: usize,
        incumbent: &mut T,
        count: usize,
        mut candidate: impl FnMut(&Self, usize) -> (C<T>, C<T>),
    ) -> Option<usize> {
        let mut best = None;
        for i in 0..count {
            let (ut, ur) = candidate(self, i);
            let p = self.score(m, ut, ur);
            if p < *incumbent {
                *incumbent = p;
                best = Some(i);
            }
        }
        best
    }

    /// Energy-splitting move that changes an element's amplitude together
    /// with one of its phases: `(beta, theta_t)` jointly, then `(beta, theta_r)`.
    fn visit_joint(&mut self, s: &mut State<T>, m: usize) {
        self.load_base(s, m);
        let mut incumbent = self.score(m, s.contribution_t(m), s.contribution_r(m));
        let (np, na) = (self.phasors.len(), self.amplitudes.len());
        let pr = cis(-s.theta_r[m]);
        if let Some(i) = self.scan(m, &mut incumbent, na * np, |me, i| {
            let a = me.amplitudes[i / np];
            (me.phasors[i % np] * a.sqrt(), pr * (T::one() - a).sqrt())
        }) {
            s.beta[m] = self.amplitudes[i / np];
            s.theta_t[m] = self.phase_values[i % np];
        }
        let pt = cis(-s.theta_t[m]);
        if let Some(i) = self.scan(m, &mut incumbent, na * np, |me, i| {
            let a = me.amplitudes[i / np];
            (pt * a.sqrt(), me.phasors[i % np] * (T::one() - a).sqrt())
        }) {
            s.beta[m] = self.amplitudes[i / np];
            s.theta_r[m] = self.phase_values[i % np];
        }
    }

    fn visit(&mut self, s: &mut State<T>, m: usize) {
        self.load_base(s, m);
        let half = T::lit(0.5);
        let np = self.phasors.len();
        let mut incumbent = self.score(m, s.contribution_t(m), s.contribution_r(m));
        match self.protocol {
            Protocol::EnergySplitting => {
                let amp_r = (T::one() - s.beta[m]).sqrt();
                let cur_r = s.contribution_r(m);
                let amp_t = s.beta[m].sqrt();
                if let Some(i) = self.scan(m, &mut incumbent, np, |me, i| {
                    (me.phasors[i] * amp_t, cur_r)
                }) {
                    s.theta_t[m] = self.phase_values[i];
                }
                let cur_t = s.contribution_t(m);
                if let Some(i) = self.scan(m, &mut incumbent, np, |me, i| {
                    (cur_t, me.phasors[i] * amp_r)
                }) {
                    s.theta_r[m] = self.phase_values[i];
                }
                let (pt, pr) = (cis(-s.theta_t[m]), cis(-s.theta_r[m]));
                let na = self.amplitudes.len();
                if let Some(i) = self.scan(m, &mut incumbent, na, |me, i| {
                    let a = me.amplitudes[i];
                    (pt * a.sqrt(), pr * (T::one() - a).sqrt())
                }) {
                    s.beta[m] = self.amplitudes[i];
                }
            }
            Protocol::ModeSwitching => {
                let z = zero();
                if let Some(i) = self.scan(m, &mut incumbent, 2 * np, |me, i| {
                    if i < np {
                        (me.phasors[i], z)
                    } else {
                        (z, me.phasors[i - np])
                    }
                }) {
                    if i < np {
                        s.beta[m] = T::one();
                        s.theta_t[m] = self.phase_values[i];
                    } else {
                        s.beta[m] = T::zero();
                        s.theta_r[m] = self.phase_values[i - np];
                    }
                }
            }
            Protocol::ConventionalSplit => {
                let z = zero();
                let reflecting = s.beta[m] == T::zero();
                if let Some(i) = self.scan(m, &mut incumbent, np, |me, i| {
                    if reflecting {
                        (z, me.phasors[i])
                    } else {
                        (me.phasors[i], z)
                    }
                }) {
                    if reflecting {
                        s.theta_r[m] = self.phase_values[i];
                    } else {
                        s.theta_t[m] = self.phase_values[i];
                    }
                }
            }
            Protocol::OmniCoupled => {
                let amp = half.sqrt();
                if let Some(i) = self.scan(m, &mut incumbent, np, |me, i| {
                    (me.phasors[i] * amp, me.phasors[i] * amp)
                }) {
                    s.theta_t[m] = self.phase_values[i];
                    s.theta_r[m] = self.phase_values[i];
                }
            }
            Protocol::TimeSwitching => unreachable!("time switching has its own optimizer"),
        }
    }
}

fn random_state<T: Real>(
    protocol: Protocol,
    m: usize,
    grids: &GridSpec,
    rng: &mut ChaCha8Rng,
) -> State<T> {
    let phases: Vec<T> = grids.phases();
    let amps: Vec<T> = grids.amplitudes();
    let pick = |rng: &mut ChaCha8Rng| phases[rng.random_range(0..phases.len())];
    let mut s = State {
        beta: vec![T::zero(); m],
        theta_t: Vec::with_capacity(m),
        theta_r: Vec::with_capacity(m),
    };
    for k in 0..m {
        let tt = pick(rng);
        let tr = pick(rng);
        s.theta_t.push(tt);
        s.theta_r.push(tr);
        s.beta[k] = match protocol {
            // interior amplitudes so both phase scans start out informative
            Protocol::EnergySplitting if amps.len() > 2 => {
                amps[rng.random_range(1..amps.len() - 1)]
            }
            Protocol::EnergySplitting => amps[rng.random_range(0..amps.len())],
            Protocol::ModeSwitching => {
                if rng.random_bool(0.5) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Protocol::ConventionalSplit => {
                if k < m / 2 {
                    T::zero()
                } else {
                    T::one()
                }
            }
            Protocol::OmniCoupled => T::lit(0.5),
            Protocol::TimeSwitching => unreachable!(),
        };
        if protocol == Protocol::OmniCoupled {
            s.theta_r[k] = tt;
        }
    }
    s
}

struct Run<T> {
    state: State<T>,
    power: T,
    trace: Vec<T>,
    sweeps: usize,
    converged: bool,
}

fn descend<T: Real>(
    search: &mut Search<'_, T>,
    channels: &ChannelSet<T>,
    grids: &GridSpec,
    mut state: State<T>,
    polish: bool,
) -> Run<T> {
    let canon =
        |s: &State<T>, eval: &Evaluator<T>| canonical_power(channels, &s.to_coefficients(), eval);
    let mut power = canon(&state, search.eval);
    let mut trace = vec![power];
    let mut converged = false;
    let m = state.beta.len();
    // when polishing, a stalled sweep is followed by one joint-move sweep
    let mut joint = false;
    for _ in 0..grids.max_sweeps {
        let snapshot = state.clone();
        for k in 0..m {
            if joint {
                search.visit_joint(&mut state, k);
            } else {
                search.visit(&mut state, k);
            }
        }
        let next = canon(&state, search.eval);
        if !(next <= power) {
            // only reachable through rounding in the incremental scores
            state = snapshot;
            converged = true;
            break;
        }
        let gain_db = if next == power {
            0.0
        } else if power.is_infinite() {
            f64::INFINITY
        } else {
            10.0 * (power / next).to_f64_lossy().log10()
        };
        trace.push(next);
        power = next;
        if gain_db < grids.improve_tol_db {
            if polish && !joint {
                joint = true;
                continue;
            }
            converged = true;
            break;
        }
        joint = false;
    }
    Run {
        sweeps: trace.len() - 1,
        state,
        power,
        trace,
        converged,
    }
}

/// Coordinate descent over the protocol's coefficients.
///
/// Starts from every admissible `warm_starts` entry (in order; mode switching
/// also uses the rounded form of inadmissible ones, and mirrored copies) and
/// from `grids.restarts` random grid points drawn from `seed`; returns the start
/// with the lowest final power (earliest start on ties). For energy splitting
/// the winner is then polished with joint amplitude/phase moves.
pub fn optimize_coefficients<T: Real>(
    channels: &ChannelSet<T>,
    protocol: Protocol,
    scenario: &Scenario,
    grids: &GridSpec,
    seed: u64,
    warm_starts: &[StarCoefficients<T>],
) -> Result<SolveResult<T>> {
    if protocol == Protocol::TimeSwitching {
        return Err(Error::Domain("use optimize_ts for time switching".into()));
    }
    grids.validate()?;
    let m = channels.elements();
    if !protocol.supports_elements(m) {
        return Err(Error::Domain(format!("{protocol} cannot use M = {m}")));
    }
    let eval = Evaluator::new(scenario, channels.sigma2)?;
    let mut search = Search::new(channels, protocol, &eval, grids);

    let mut starts: Vec<State<T>> = Vec::new();
    for c in warm_starts.iter().filter(|c| c.len() == m) {
        if protocol.admits(c) {
            starts.push(State::from_coefficients(c));
        } else if protocol == Protocol::ModeSwitching {
            starts.push(State::from_coefficients(c).rounded_modes());
        }
    }
    if protocol == Protocol::ModeSwitching {
        // Flipping one element between T and R can pass through an infeasible
        // point (a user left without any element), which descent never accepts.
        // The mode-mirrored start reaches the complementary assignment.
        let mirrored: Vec<State<T>> = starts.iter().map(State::mirrored).collect();
        starts.extend(mirrored);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..grids.restarts {
        starts.push(random_state(protocol, m, grids, &mut rng));
    }
    if starts.is_empty() {
        return Err(Error::Domain(
            "no starting points (restarts = 0 and no warm start)".into(),
        ));
    }

    let mut best: Option<Run<T>> = None;
    for start in starts {
        let run = descend(&mut search, channels, grids, start, false);
        if best.as_ref().is_none_or(|b| run.power < b.power) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    if protocol == Protocol::EnergySplitting && best.power.is_finite() {
        let polished = descend(&mut search, channels, grids, best.state.clone(), true);
        best.trace.extend_from_slice(&polished.trace[1..]);
        best.sweeps += polished.sweeps;
        best.converged = polished.converged;
        best.power = polished.power;
        best.state = polished.state;
    }
    if !best.power.is_finite() {
        return Err(Error::Infeasible(format!(
            "{protocol}: every start ended infeasible ({} inner solves)",
            search.solves
        )));
    }
    let coeffs = best.state.to_coefficients();
    let h = channels.effective(&coeffs)?;
    let beamformers = eval.beamformers(&h.h_t, &h.h_r)?;
    Ok(SolveResult {
        protocol,
        configuration: Configuration::Static(coeffs),
        lambda: None,
        beamformers,
        power_w: best.power,
        objective_trace: best.trace,
        converged: best.converged,
        sweeps: best.sweeps,
        inner_solves: search.solves,
    })
}
