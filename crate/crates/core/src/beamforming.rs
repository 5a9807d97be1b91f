//! Minimum-power AP beamforming for fixed effective channels.
//!
//! All solvers work on noise-normalized channels `h / sigma`, so the SINR
//! constraints read `|h^H w|^2 >= gamma * (interference + 1)` and powers keep
//! their physical units. For two users the optimal power depends on the
//! channels only through their Gram matrix, which is what the outer
//! coefficient search evaluates.

use crate::error::{Error, Result};
use crate::linalg::{cis, inner, norm_sqr, scaled, zero, C};
use crate::scalar::Real;
use crate::search::golden_section;

/// Gram matrix of the noise-normalized channel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gram<T> {
    /// `||h_t||^2 / sigma2`
    pub a_t: T,
    /// `||h_r||^2 / sigma2`
    pub a_r: T,
    /// `h_t^H h_r / sigma2`
    pub c: C<T>,
}

impl<T: Real> Gram<T> {
    pub fn new(h_t: &[C<T>], h_r: &[C<T>], sigma2: T) -> Self {
        let inv = T::one() / sigma2;
        Self {
            a_t: norm_sqr(h_t) * inv,
            a_r: norm_sqr(h_r) * inv,
            c: inner(h_t, h_r) * inv,
        }
    }

    /// `det(H^H H)`, clamped at zero.
    pub fn det(&self) -> T {
        (self.a_t * self.a_r - self.c.norm_sqr()).max(T::zero())
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.det() <= T::lit(T::RANK_TOL) * self.a_t * self.a_r
    }
}

fn check_inputs<T: Real>(h_t: &[C<T>], h_r: &[C<T>], gammas: &[T], sigma2: T) -> Result<()> {
    if h_t.len() != h_r.len() {
        return Err(Error::dim("beamforming channels", h_t.len(), h_r.len()));
    }
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    if gammas.iter().any(|g| !(*g >= T::zero()) || !g.is_finite()) {
        return Err(Error::Domain("SINR targets must be finite and >= 0".into()));
    }
    Ok(())
}

/// Matched-filter beamformer meeting `|h^H w|^2 / sigma2 = gamma` exactly.
pub fn single_user_min_power<T: Real>(h: &[C<T>], gamma: T, sigma2: T) -> Result<(Vec<C<T>>, T)> {
    check_inputs(h, h, &[gamma], sigma2)?;
    if gamma == T::zero() {
        return Ok((vec![zero(); h.len()], T::zero()));
    }
    let gain = norm_sqr(h);
    if !(gain > T::zero()) {
        return Err(Error::Infeasible(
            "zero channel with positive target".into(),
        ));
    }
    let power = gamma * sigma2 / gain;
    let w = scaled(C::new(power.sqrt() / gain.sqrt(), T::zero()), h);
    Ok((w, power))
}

#[derive(Debug, Clone, Copy)]
pub struct UnicastOptions<T> {
    /// Stop when the largest relative change of the dual powers drops below this.
    pub tol: T,
    pub max_iter: usize,
    /// Dual powers above this cap are reported as infeasible.
    pub q_cap: T,
    /// Seed the fixed point with the analytic two-user solution of its
    /// equations instead of zero.
    pub closed_form_start: bool,
}

impl<T: Real> Default for UnicastOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(T::SOLVER_TOL),
            max_iter: 500,
            q_cap: T::lit(1e12),
            closed_form_start: true,
        }
    }
}

/// Scalar outcome of the two-user unicast power minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicastPowers<T> {
    /// Downlink powers of the T and R streams.
    pub p_t: T,
    pub p_r: T,
    /// Converged virtual uplink powers.
    pub q_t: T,
    pub q_r: T,
    pub iterations: usize,
}

impl<T: Real> UnicastPowers<T> {
    pub fn total(&self) -> T {
        self.p_t + self.p_r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnicastSolution<T> {
    pub w_t: Vec<C<T>>,
    pub w_r: Vec<C<T>>,
    pub power_w: T,
    pub iterations: usize,
}

/// Positive root of the two-user fixed-point equations, solved for `q_r`.
///
/// Eliminating `q_t` from `q_k (a_k + q_j D) = gamma_k (1 + q_j a_j)` gives
/// `A q_r^2 + B q_r + C = 0` with `C <= 0`.
fn dual_closed_form<T: Real>(g: &Gram<T>, gamma_t: T, gamma_r: T) -> Option<(T, T)> {
    let one = T::one();
    let d = g.det();
    let qa = g.a_r * d * (one + gamma_t);
    let qb = g.a_r * g.a_t + d * gamma_t - gamma_r * d - gamma_r * gamma_t * g.a_t * g.a_r;
    let qc = -gamma_r * g.a_t * (one + gamma_t);
    let q_r = if qa > T::zero() {
        let disc = (qb * qb - T::lit(4.0) * qa * qc).max(T::zero()).sqrt();
        if qb >= T::zero() {
            -(qc + qc) / (qb + disc)
        } else {
            (disc - qb) / (qa + qa)
        }
    } else if qb > T::zero() {
        -qc / qb
    } else {
        return None;
    };
    let q_t = gamma_t * (one + q_r * g.a_r) / (g.a_t + q_r * d);
    (q_r.is_finite() && q_t.is_finite() && q_r >= T::zero() && q_t >= T::zero())
        .then_some((q_t, q_r))
}

/// `h_k^H (I + q_j h_j h_j^H)^{-1} h_k` via Sherman-Morrison.
#[inline]
fn interference_gain<T: Real>(a_k: T, a_j: T, c2: T, q_j: T) -> T {
    a_k - q_j * c2 / (T::one() + q_j * a_j)
}

/// Unicast powers from the Gram matrix; both targets must be positive.
pub fn unicast_powers<T: Real>(
    g: &Gram<T>,
    gamma_t: T,
    gamma_r: T,
    opts: &UnicastOptions<T>,
) -> Result<UnicastPowers<T>> {
    if !(g.a_t > T::zero()) || !(g.a_r > T::zero()) {
        return Err(Error::Infeasible(
            "a user has a zero effective channel".into(),
        ));
    }
    let one = T::one();
    let c2 = g.c.norm_sqr();
    let (mut q_t, mut q_r) = if opts.closed_form_start {
        dual_closed_form(g, gamma_t, gamma_r).unwrap_or((T::zero(), T::zero()))
    } else {
        (T::zero(), T::zero())
    };

    let mut iterations = 0;
    let mut change = T::infinity();
    while change >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                last_change: change.to_f64_lossy(),
            });
        }
        let new_t = gamma_t / interference_gain(g.a_t, g.a_r, c2, q_r);
        let new_r = gamma_r / interference_gain(g.a_r, g.a_t, c2, q_t);
        iterations += 1;
        if !(new_t >= T::zero() && new_r >= T::zero()) || new_t > opts.q_cap || new_r > opts.q_cap {
            return Err(Error::Infeasible(format!(
                "dual powers exceed cap after {iterations} iterations"
            )));
        }
        change = ((new_t - q_t).abs() / new_t).max((new_r - q_r).abs() / new_r);
        q_t = new_t;
        q_r = new_r;
    }

    // Unnormalized receive directions u_k = (I + q_j h_j h_j^H)^{-1} h_k and
    // the inner products the downlink system needs, all in Gram terms.
    let den_r = one + q_r * g.a_r;
    let den_t = one + q_t * g.a_t;
    let own_t = interference_gain(g.a_t, g.a_r, c2, q_r); // h_t^H u_t
    let own_r = interference_gain(g.a_r, g.a_t, c2, q_t);
    let norm_t = own_t - q_r * c2 / (den_r * den_r); // ||u_t||^2
    let norm_r = own_r - q_t * c2 / (den_t * den_t);
    let cross_rt = c2 / (den_r * den_r); // |h_r^H u_t|^2
    let cross_tr = c2 / (den_t * den_t); // |h_t^H u_r|^2

    let a_tt = own_t * own_t / (norm_t * gamma_t);
    let a_rr = own_r * own_r / (norm_r * gamma_r);
    let b_t = cross_tr / norm_r;
    let b_r = cross_rt / norm_t;
    let det = a_tt * a_rr - b_t * b_r;
    if !(det > T::zero()) {
        return Err(Error::Infeasible(
            "downlink power system is singular".into(),
        ));
    }
    let p_t = (a_rr + b_t) / det;
    let p_r = (a_tt + b_r) / det;
    if !(p_t >= T::zero() && p_r >= T::zero()) || !p_t.is_finite() || !p_r.is_finite() {
        return Err(Error::Infeasible("negative downlink powers".into()));
    }
    Ok(UnicastPowers {
        p_t,
        p_r,
        q_t,
        q_r,
        iterations,
    })
}

/// Minimum total power meeting both unicast SINR targets.
///
/// Only the scalar power is computed; use [`unicast_min_power`] for the
/// beamformers. Both functions return bit-identical powers.
pub fn unicast_power<T: Real>(
    g: &Gram<T>,
    gamma_t: T,
    gamma_r: T,
    opts: &UnicastOptions<T>,
) -> Result<T> {
    match (gamma_t > T::zero(), gamma_r > T::zero()) {
        (false, false) => Ok(T::zero()),
        (true, false) => single_user_power(g.a_t, gamma_t),
        (false, true) => single_user_power(g.a_r, gamma_r),
        (true, true) => unicast_powers(g, gamma_t, gamma_r, opts).map(|p| p.total()),
    }
}

fn single_user_power<T: Real>(a: T, gamma: T) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::Infeasible(
            "zero channel with positive target".into(),
        ));
    }
    Ok(gamma / a)
}

/// Two-user unicast power minimization via uplink-downlink duality.
pub fn unicast_min_power<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    gamma_t: T,
    gamma_r: T,
    sigma2: T,
    opts: &UnicastOptions<T>,
) -> Result<UnicastSolution<T>> {
    check_inputs(h_t, h_r, &[gamma_t, gamma_r], sigma2)?;
    let n = h_t.len();
    let g = Gram::new(h_t, h_r, sigma2);
    let none = || vec![zero(); n];
    match (gamma_t > T::zero(), gamma_r > T::zero()) {
        (false, false) => {
            return Ok(UnicastSolution {
                w_t: none(),
                w_r: none(),
                power_w: T::zero(),
                iterations: 0,
            })
        }
        (true, false) => {
            let (w_t, _) = single_user_min_power(h_t, gamma_t, sigma2)?;
            let power_w = single_user_power(g.a_t, gamma_t)?;
            return Ok(UnicastSolution {
                w_t,
                w_r: none(),
                power_w,
                iterations: 0,
            });
        }
        (false, true) => {
            let (w_r, _) = single_user_min_power(h_r, gamma_r, sigma2)?;
            let power_w = single_user_power(g.a_r, gamma_r)?;
            return Ok(UnicastSolution {
                w_t: none(),
                w_r,
                power_w,
                iterations: 0,
            });
        }
        (true, true) => {}
    }
    let p = unicast_powers(&g, gamma_t, gamma_r, opts)?;
    let inv_sigma = T::one() / sigma2.sqrt();
    let ht: Vec<C<T>> = scaled(C::new(inv_sigma, T::zero()), h_t);
    let hr: Vec<C<T>> = scaled(C::new(inv_sigma, T::zero()), h_r);
    let direction = |own: &[C<T>], other: &[C<T>], q_other: T, a_other: T, power: T| {
        let coef = inner(other, own) * (q_other / (T::one() + q_other * a_other));
        let u: Vec<C<T>> = own.iter().zip(other).map(|(x, y)| *x - coef * y).collect();
        let scale = (power / norm_sqr(&u)).sqrt();
        scaled(C::new(scale, T::zero()), &u)
    };
    Ok(UnicastSolution {
        w_t: direction(&ht, &hr, p.q_r, g.a_r, p.p_t),
        w_r: direction(&hr, &ht, p.q_t, g.a_t, p.p_r),
        power_w: p.total(),
        iterations: p.iterations,
    })
}

/// Which multicast candidate attained the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticastCandidate {
    Zero,
    MatchedT,
    MatchedR,
    BothActive,
    /// Parallel channels: matched filter to the weaker user.
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticastSolution<T> {
    pub w: Vec<C<T>>,
    pub power_w: T,
    pub candidate: MulticastCandidate,
}

/// How the common-phase offset of the both-active family is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSearch {
    /// Uniform grid followed by golden-section refinement to 1e-8 rad.
    Grid(usize),
    /// Closed-form minimizer of the sinusoidal power profile.
    Analytic,
}

/// Scalar multicast plan: candidate, power, and (for the both-active
/// family) the relative phase of the R user's constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulticastPlan<T> {
    pub power: T,
    pub candidate: MulticastCandidate,
    pub phi: T,
}

/// Power of the both-active family at relative phase `phi`:
/// `gamma * x^H (H^H H)^{-1} x` with `x = [1, e^{j phi}]`.
#[inline]
fn both_active_power<T: Real>(g: &Gram<T>, gamma: T, phi: T) -> T {
    // (H^H H)^{-1} = [[a_r, -c], [-c*, a_t]] / det
    let cross = (-g.c * cis(phi)).re;
    gamma * (g.a_t + g.a_r + cross + cross) / g.det()
}

pub fn multicast_plan<T: Real>(
    g: &Gram<T>,
    gamma: T,
    search: PhaseSearch,
) -> Result<MulticastPlan<T>> {
    if gamma == T::zero() {
        return Ok(MulticastPlan {
            power: T::zero(),
            candidate: MulticastCandidate::Zero,
            phi: T::zero(),
        });
    }
    if !(g.a_t > T::zero()) || !(g.a_r > T::zero()) {
        return Err(Error::Infeasible(
            "a user has a zero effective channel".into(),
        ));
    }
    if g.is_rank_deficient() {
        return Ok(MulticastPlan {
            power: gamma / g.a_t.min(g.a_r),
            candidate: MulticastCandidate::RankDeficient,
            phi: T::zero(),
        });
    }
    let c2 = g.c.norm_sqr();
    let mut best = MulticastPlan {
        power: T::infinity(),
        candidate: MulticastCandidate::BothActive,
        phi: T::zero(),
    };
    // Matched filter to h_t delivers SNR_r = gamma |c|^2 / a_t^2.
    if c2 >= g.a_t * g.a_t {
        best = MulticastPlan {
            power: gamma / g.a_t,
            candidate: MulticastCandidate::MatchedT,
            phi: T::zero(),
        };
    }
    if c2 >= g.a_r * g.a_r && gamma / g.a_r < best.power {
        best = MulticastPlan {
            power: gamma / g.a_r,
            candidate: MulticastCandidate::MatchedR,
            phi: T::zero(),
        };
    }
    let (phi, power) = match search {
        PhaseSearch::Analytic => {
            // minimized where -c e^{j phi} is real negative, i.e. phi = -arg(c)
            let phi = crate::scalar::wrap_phase(-g.c.arg());
            (phi, both_active_power(g, gamma, phi))
        }
        PhaseSearch::Grid(points) => {
            let points = points.max(1);
            let step = T::TAU() / T::lit(points as f64);
            let (mut bi, mut bv) = (0usize, T::infinity());
            for i in 0..points {
                let v = both_active_power(g, gamma, step * T::lit(i as f64));
                if v < bv {
                    bi = i;
                    bv = v;
                }
            }
            let center = step * T::lit(bi as f64);
            let refined = golden_section(
                |phi| both_active_power(g, gamma, phi),
                center - step,
                center + step,
                T::lit(1e-8),
            );
            if refined.value < bv {
                (crate::scalar::wrap_phase(refined.x), refined.value)
            } else {
                (center, bv)
            }
        }
    };
    if power < best.power {
        best = MulticastPlan {
            power,
            candidate: MulticastCandidate::BothActive,
            phi,
        };
    }
    Ok(best)
}

fn multicast_solution<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    gamma: T,
    sigma2: T,
    search: PhaseSearch,
) -> Result<MulticastSolution<T>> {
    check_inputs(h_t, h_r, &[gamma], sigma2)?;
    let g = Gram::new(h_t, h_r, sigma2);
    let plan = multicast_plan(&g, gamma, search)?;
    let matched = |h: &[C<T>], a: T| {
        // power gamma/a along h/||h||, in normalized units
        let scale = (plan.power / (a * sigma2)).sqrt();
        scaled(C::new(scale, T::zero()), h)
    };
    let w = match plan.candidate {
        MulticastCandidate::Zero => vec![zero(); h_t.len()],
        MulticastCandidate::MatchedT => matched(h_t, g.a_t),
        MulticastCandidate::MatchedR => matched(h_r, g.a_r),
        MulticastCandidate::RankDeficient => {
            if g.a_t <= g.a_r {
                matched(h_t, g.a_t)
            } else {
                matched(h_r, g.a_r)
            }
        }
        MulticastCandidate::BothActive => {
            // w = H_n (H_n^H H_n)^{-1} x sqrt(gamma), H_n = H / sigma
            let det = g.det();
            let x1 = C::new(gamma.sqrt(), T::zero());
            let x2 = cis(plan.phi) * gamma.sqrt();
            let y1 = (x1 * g.a_r - g.c * x2) / det;
            let y2 = (x2 * g.a_t - g.c.conj() * x1) / det;
            let inv_sigma = T::one() / sigma2.sqrt();
            h_t.iter()
                .zip(h_r)
                .map(|(a, b)| (*a * y1 + *b * y2) * inv_sigma)
                .collect()
        }
    };
    Ok(MulticastSolution {
        w,
        power_w: plan.power,
        candidate: plan.candidate,
    })
}

/// Two-user common-message power minimization with a gridded phase search.
pub fn multicast_min_power<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    gamma: T,
    sigma2: T,
    phase_grid: usize,
) -> Result<MulticastSolution<T>> {
    if phase_grid < 8 {
        return Err(Error::Domain(format!(
            "phase_grid {phase_grid} must be >= 8"
        )));
    }
    multicast_solution(h_t, h_r, gamma, sigma2, PhaseSearch::Grid(phase_grid))
}

/// Same problem as [`multicast_min_power`] with the phase offset solved in closed form.
pub fn multicast_min_power_exact<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    gamma: T,
    sigma2: T,
) -> Result<MulticastSolution<T>> {
    multicast_solution(h_t, h_r, gamma, sigma2, PhaseSearch::Analytic)
}
