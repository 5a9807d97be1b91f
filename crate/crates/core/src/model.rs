//! STAR element coefficients, operating protocols, scenarios, and the pure
//! maps from coefficients and channels to effective channels, SINRs, rates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, inner, CMatrix, C};
use crate::scalar::{wrap_phase, Real};

/// Per-element transmission/reflection coefficients of a STAR surface.
///
/// Only the transmitted energy fraction is stored; the reflected fraction is
/// `1 - beta_t[m]`, so every element conserves energy by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCoefficients<T> {
    beta_t: Vec<T>,
    theta_t: Vec<T>,
    theta_r: Vec<T>,
}

impl<T: Real> StarCoefficients<T> {
    /// Validates amplitudes and wraps phases to `[0, 2π)`.
    pub fn new(beta_t: Vec<T>, theta_t: Vec<T>, theta_r: Vec<T>) -> Result<Self> {
        let m = beta_t.len();
        if theta_t.len() != m {
            return Err(Error::dim("StarCoefficients theta_t", m, theta_t.len()));
        }
        if theta_r.len() != m {
            return Err(Error::dim("StarCoefficients theta_r", m, theta_r.len()));
        }
        if let Some((i, b)) = beta_t
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b >= T::zero() && **b <= T::one()))
        {
            return Err(Error::Domain(format!("beta_t[{i}] = {b} outside [0, 1]")));
        }
        if theta_t.iter().chain(&theta_r).any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite phase".into()));
        }
        Ok(Self {
            beta_t,
            theta_t: theta_t.into_iter().map(wrap_phase).collect(),
            theta_r: theta_r.into_iter().map(wrap_phase).collect(),
        })
    }

    /// Every element fully transmitting with zero phases.
    pub fn all_transmit(m: usize) -> Self {
        Self {
            beta_t: vec![T::one(); m],
            theta_t: vec![T::zero(); m],
            theta_r: vec![T::zero(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.beta_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_t.is_empty()
    }

    pub fn beta_t(&self) -> &[T] {
        &self.beta_t
    }

    pub fn beta_r(&self, m: usize) -> T {
        T::one() - self.beta_t[m]
    }

    pub fn beta_r_vec(&self) -> Vec<T> {
        self.beta_t.iter().map(|b| T::one() - *b).collect()
    }

    pub fn theta_t(&self) -> &[T] {
        &self.theta_t
    }

    pub fn theta_r(&self) -> &[T] {
        &self.theta_r
    }

    /// Transmission coefficient `sqrt(beta_t) e^{j theta_t}` of element `m`.
    pub fn transmission(&self, m: usize) -> C<T> {
        cis(self.theta_t[m]) * self.beta_t[m].sqrt()
    }

    /// Reflection coefficient `sqrt(1 - beta_t) e^{j theta_r}` of element `m`.
    pub fn reflection(&self, m: usize) -> C<T> {
        cis(self.theta_r[m]) * self.beta_r(m).sqrt()
    }
}

/// Anything exposing per-element transmission and reflection coefficients.
pub trait ElementResponse<T: Real> {
    fn elements(&self) -> usize;
    fn transmission_at(&self, m: usize) -> C<T>;
    fn reflection_at(&self, m: usize) -> C<T>;
}

impl<T: Real> ElementResponse<T> for StarCoefficients<T> {
    fn elements(&self) -> usize {
        self.len()
    }
    fn transmission_at(&self, m: usize) -> C<T> {
        self.transmission(m)
    }
    fn reflection_at(&self, m: usize) -> C<T> {
        self.reflection(m)
    }
}

/// `max_m | |T_m|^2 + |R_m|^2 - 1 |`
pub fn energy_residual<T: Real>(coeffs: &impl ElementResponse<T>) -> T {
    (0..coeffs.elements())
        .map(|m| {
            (coeffs.transmission_at(m).norm_sqr() + coeffs.reflection_at(m).norm_sqr() - T::one())
                .abs()
        })
        .fold(T::zero(), T::max)
}

/// Operating protocol (or baseline surface) whose coefficients are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "ES", alias = "EnergySplitting")]
    EnergySplitting,
    #[serde(rename = "MS", alias = "ModeSwitching")]
    ModeSwitching,
    #[serde(rename = "TS", alias = "TimeSwitching")]
    TimeSwitching,
    #[serde(rename = "Conventional", alias = "ConventionalSplit")]
    ConventionalSplit,
    #[serde(rename = "Omni", alias = "OmniCoupled")]
    OmniCoupled,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::EnergySplitting,
        Protocol::ModeSwitching,
        Protocol::TimeSwitching,
        Protocol::ConventionalSplit,
        Protocol::OmniCoupled,
    ];

    /// Stable numeric id used for seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Protocol::EnergySplitting => 0,
            Protocol::ModeSwitching => 1,
            Protocol::TimeSwitching => 2,
            Protocol::ConventionalSplit => 3,
            Protocol::OmniCoupled => 4,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Protocol::EnergySplitting => "ES",
            Protocol::ModeSwitching => "MS",
            Protocol::TimeSwitching => "TS",
            Protocol::ConventionalSplit => "Conventional",
            Protocol::OmniCoupled => "Omni",
        }
    }

    /// Whether the element count is admissible for this protocol.
    pub fn supports_elements(self, m: usize) -> bool {
        m >= 1 && (self != Protocol::ConventionalSplit || m.is_multiple_of(2))
    }

    /// Checks that a single coefficient set lies in this protocol's feasible set.
    ///
    /// For time switching a single set is admissible when it is all-transmit
    /// or all-reflect (one of the two periods).
    pub fn admits<T: Real>(self, coeffs: &StarCoefficients<T>) -> bool {
        let m = coeffs.len();
        let b = coeffs.beta_t();
        let binary = |x: T| x == T::zero() || x == T::one();
        match self {
            Protocol::EnergySplitting => true,
            Protocol::ModeSwitching => b.iter().all(|x| binary(*x)),
            Protocol::TimeSwitching => {
                b.iter().all(|x| *x == T::one()) || b.iter().all(|x| *x == T::zero())
            }
            Protocol::ConventionalSplit => {
                m.is_multiple_of(2)
                    && b.iter().enumerate().all(|(i, x)| {
                        if i < m / 2 {
                            *x == T::zero()
                        } else {
                            *x == T::one()
                        }
                    })
            }
            Protocol::OmniCoupled => {
                let half = T::lit(0.5);
                b.iter().all(|x| *x == half) && coeffs.theta_t() == coeffs.theta_r()
            }
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "es" | "energysplitting" => Ok(Protocol::EnergySplitting),
            "ms" | "modeswitching" => Ok(Protocol::ModeSwitching),
            "ts" | "timeswitching" => Ok(Protocol::TimeSwitching),
            "conventional" | "conventionalsplit" | "conv" => Ok(Protocol::ConventionalSplit),
            "omni" | "omnicoupled" => Ok(Protocol::OmniCoupled),
            other => Err(Error::Config(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Service targets in bit/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    Unicast { rate_t: f64, rate_r: f64 },
    Multicast { rate: f64 },
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r.is_finite() && r >= 0.0;
        match *self {
            Scenario::Unicast { rate_t, rate_r } if ok(rate_t) && ok(rate_r) => Ok(()),
            Scenario::Multicast { rate } if ok(rate) => Ok(()),
            _ => Err(Error::Domain(format!("invalid rates in {self:?}"))),
        }
    }

    pub fn id(&self) -> u64 {
        match self {
            Scenario::Unicast { .. } => 0,
            Scenario::Multicast { .. } => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Scenario::Unicast { .. } => "unicast",
            Scenario::Multicast { .. } => "multicast",
        }
    }

    /// Rates demanded of the T and R users.
    pub fn rates(&self) -> (f64, f64) {
        match *self {
            Scenario::Unicast { rate_t, rate_r } => (rate_t, rate_r),
            Scenario::Multicast { rate } => (rate, rate),
        }
    }
}

/// Effective (cascaded) AP-to-user channels for one coefficient set.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels<T> {
    pub h_t: Vec<C<T>>,
    pub h_r: Vec<C<T>>,
}

/// Cascaded channel `h = G^H diag(u)^H v` with `u[m] = sqrt(amp[m]) e^{j phase[m]}`.
pub fn effective_channel<T: Real>(
    g: &CMatrix<T>,
    v: &[C<T>],
    amp: &[T],
    phase: &[T],
) -> Result<Vec<C<T>>> {
    let m = g.rows();
    if v.len() != m {
        return Err(Error::dim("effective_channel v", m, v.len()));
    }
    if amp.len() != m {
        return Err(Error::dim("effective_channel amplitudes", m, amp.len()));
    }
    if phase.len() != m {
        return Err(Error::dim("effective_channel phases", m, phase.len()));
    }
    if let Some(a) = amp.iter().find(|a| !(**a >= T::zero() && **a <= T::one())) {
        return Err(Error::Domain(format!("amplitude {a} outside [0, 1]")));
    }
    let mut h = vec![crate::linalg::zero(); g.cols()];
    for row in 0..m {
        let coeff = cis(-phase[row]) * amp[row].sqrt() * v[row].conj();
        for (hn, gmn) in h.iter_mut().zip(g.row(row)) {
            *hn = *hn + gmn.conj() * coeff;
        }
    }
    Ok(h)
}

/// Linear SINR target `2^rate - 1`.
pub fn rate_to_sinr<T: Real>(rate: T) -> Result<T> {
    if !(rate >= T::zero()) || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "rate {rate} must be finite and >= 0"
        )));
    }
    Ok(rate.exp2() - T::one())
}

fn check_pair<T>(a: &[C<T>], b: &[C<T>], context: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(context, a.len(), b.len()));
    }
    Ok(())
}

/// Per-user SINRs of two-user unicast with precoders `w_t`, `w_r`.
pub fn unicast_sinrs<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    w_t: &[C<T>],
    w_r: &[C<T>],
    sigma2: T,
) -> Result<(T, T)> {
    check_pair(h_t, h_r, "unicast_sinrs h_r")?;
    check_pair(h_t, w_t, "unicast_sinrs w_t")?;
    check_pair(h_t, w_r, "unicast_sinrs w_r")?;
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    let sinr_t = inner(h_t, w_t).norm_sqr() / (inner(h_t, w_r).norm_sqr() + sigma2);
    let sinr_r = inner(h_r, w_r).norm_sqr() / (inner(h_r, w_t).norm_sqr() + sigma2);
    Ok((sinr_t, sinr_r))
}

/// Per-user SNRs of a common multicast precoder `w`.
pub fn multicast_snrs<T: Real>(
    h_t: &[C<T>],
    h_r: &[C<T>],
    w: &[C<T>],
    sigma2: T,
) -> Result<(T, T)> {
    check_pair(h_t, h_r, "multicast_snrs h_r")?;
    check_pair(h_t, w, "multicast_snrs w")?;
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    Ok((
        inner(h_t, w).norm_sqr() / sigma2,
        inner(h_r, w).norm_sqr() / sigma2,
    ))
}
