//! Link geometry, path loss, and seeded Rician fading for the AP -> surface
//! -> user links. Direct AP -> user links are blocked and never generated.
//!
//! Randomness: a `ChaCha20Rng` seeded with `seed_from_u64(seed)` drives all
//! draws. Entries are produced in the order G (row-major, `m` then `n`),
//! then `v_t`, then `v_r`; each scattered entry takes two `StandardNormal`
//! samples (real, imaginary) scaled by `1/sqrt(2)`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_finite_vec, CMatrix, C};
use crate::model::{EffectiveChannels, StarCoefficients};
use crate::scalar::Real;

/// Rician K at or above this value is treated as pure line of sight.
pub const LOS_ONLY_K: f64 = 1e12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Planar node placement in meters. The surface plane is the vertical line
/// `x = ris[0]`; the T user sits at larger `x`, the R user at smaller `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub ap: [f64; 2],
    pub ris: [f64; 2],
    pub user_t: [f64; 2],
    pub user_r: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            ap: [0.0, 0.0],
            ris: [50.0, 0.0],
            user_t: [53.0, 0.0],
            user_r: [47.0, 2.0],
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let pts = [self.ap, self.ris, self.user_t, self.user_r];
        if pts.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Config("geometry has non-finite coordinates".into()));
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if !(dist(pts[i], pts[j]) > 0.0) {
                    return Err(Error::Config(format!(
                        "geometry points {i} and {j} coincide"
                    )));
                }
            }
        }
        let side_t = self.user_t[0] - self.ris[0];
        let side_r = self.user_r[0] - self.ris[0];
        if !(side_t * side_r < 0.0) {
            return Err(Error::Config(
                "T and R users must lie on opposite sides of the surface".into(),
            ));
        }
        Ok(())
    }

    pub fn ap_to_ris(&self) -> f64 {
        dist(self.ap, self.ris)
    }

    pub fn ris_to_t(&self) -> f64 {
        dist(self.ris, self.user_t)
    }

    pub fn ris_to_r(&self) -> f64 {
        dist(self.ris, self.user_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingParams {
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub c0_db: f64,
    /// Linear Rician K-factor.
    pub rician_k: f64,
    pub noise_dbm: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            pathloss_exponent: 2.2,
            c0_db: -30.0,
            rician_k: 2.0,
            noise_dbm: -90.0,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::Config("pathloss_exponent must be > 0".into()));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::Config("rician_k must be >= 0".into()));
        }
        if !self.c0_db.is_finite() || !self.noise_dbm.is_finite() {
            return Err(Error::Config("c0_db and noise_dbm must be finite".into()));
        }
        Ok(())
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }
}

/// Large-scale power gain `10^{c0/10} d^{-alpha}`.
pub fn path_loss_linear(distance: f64, params: &FadingParams) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!(
            "distance {distance} must be positive"
        )));
    }
    Ok(10f64.powf(params.c0_db / 10.0) * distance.powf(-params.pathloss_exponent))
}

/// One fading realization: AP -> surface matrix and surface -> user vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    /// `M x N`, row `m` holds the channel from the AP antennas to element `m`.
    pub g: CMatrix<T>,
    pub v_t: Vec<C<T>>,
    pub v_r: Vec<C<T>>,
    pub sigma2: T,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(g: CMatrix<T>, v_t: Vec<C<T>>, v_r: Vec<C<T>>, sigma2: T) -> Result<Self> {
        if v_t.len() != g.rows() {
            return Err(Error::dim("ChannelSet v_t", g.rows(), v_t.len()));
        }
        if v_r.len() != g.rows() {
            return Err(Error::dim("ChannelSet v_r", g.rows(), v_r.len()));
        }
        if !g.is_finite() || !is_finite_vec(&v_t) || !is_finite_vec(&v_r) {
            return Err(Error::Domain("channel entries must be finite".into()));
        }
        if !(sigma2 > T::zero()) {
            return Err(Error::Domain("noise power must be positive".into()));
        }
        Ok(Self {
            g,
            v_t,
            v_r,
            sigma2,
        })
    }

    pub fn elements(&self) -> usize {
        self.g.rows()
    }

    pub fn antennas(&self) -> usize {
        self.g.cols()
    }

    /// Per-element cascade rows `conj(G[m,:]) conj(v[m])` for both users.
    ///
    /// The effective channel is `sum_m sqrt(amp_m) e^{-j phase_m} rows[m]`.
    pub fn cascades(&self) -> (CMatrix<T>, CMatrix<T>) {
        let (m, n) = (self.elements(), self.antennas());
        let t = CMatrix::from_fn(m, n, |r, k| self.g.get(r, k).conj() * self.v_t[r].conj());
        let rr = CMatrix::from_fn(m, n, |r, k| self.g.get(r, k).conj() * self.v_r[r].conj());
        (t, rr)
    }

    /// Effective channels of both users under `coeffs`.
    pub fn effective(&self, coeffs: &StarCoefficients<T>) -> Result<EffectiveChannels<T>> {
        if coeffs.len() != self.elements() {
            return Err(Error::dim(
                "ChannelSet::effective",
                self.elements(),
                coeffs.len(),
            ));
        }
        let h_t =
            crate::model::effective_channel(&self.g, &self.v_t, coeffs.beta_t(), coeffs.theta_t())?;
        let h_r = crate::model::effective_channel(
            &self.g,
            &self.v_r,
            &coeffs.beta_r_vec(),
            coeffs.theta_r(),
        )?;
        Ok(EffectiveChannels { h_t, h_r })
    }

    /// FNV-1a hash over the bit patterns of every entry and the noise power.
    pub fn content_hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |x: f64| {
            for byte in x.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(self.elements() as f64);
        eat(self.antennas() as f64);
        for z in self.g.as_slice().iter().chain(&self.v_t).chain(&self.v_r) {
            eat(z.re.to_f64_lossy());
            eat(z.im.to_f64_lossy());
        }
        eat(self.sigma2.to_f64_lossy());
        h
    }
}

struct RicianLink {
    los: f64,
    nlos: f64,
}

impl RicianLink {
    fn new(gain: f64, k: f64) -> Self {
        if k >= LOS_ONLY_K {
            Self {
                los: gain.sqrt(),
                nlos: 0.0,
            }
        } else {
            Self {
                los: (gain * k / (k + 1.0)).sqrt(),
                nlos: (gain / (k + 1.0)).sqrt(),
            }
        }
    }

    fn draw<T: Real>(&self, rng: &mut ChaCha20Rng) -> C<T> {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let s = self.nlos * std::f64::consts::FRAC_1_SQRT_2;
        C::new(T::lit(self.los + s * re), T::lit(s * im))
    }
}

/// Draws one Rician realization. Line-of-sight components are all ones.
pub fn generate_channel_set<T: Real>(
    geometry: &Geometry,
    params: &FadingParams,
    elements: usize,
    antennas: usize,
    seed: u64,
) -> Result<ChannelSet<T>> {
    geometry.validate()?;
    params.validate()?;
    if elements == 0 || antennas == 0 {
        return Err(Error::Domain(
            "need at least one element and one antenna".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = params.rician_k;
    let ap_link = RicianLink::new(path_loss_linear(geometry.ap_to_ris(), params)?, k);
    let t_link = RicianLink::new(path_loss_linear(geometry.ris_to_t(), params)?, k);
    let r_link = RicianLink::new(path_loss_linear(geometry.ris_to_r(), params)?, k);

    let g = CMatrix::from_fn(elements, antennas, |_, _| ap_link.draw(&mut rng));
    let v_t = (0..elements).map(|_| t_link.draw(&mut rng)).collect();
    let v_r = (0..elements).map(|_| r_link.draw(&mut rng)).collect();
    ChannelSet::new(g, v_t, v_r, T::lit(params.noise_watts()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FadingParams {
        FadingParams::default()
    }

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_linear(1.0, &params()).unwrap() - 1e-3).abs() < 1e-18);
        let g10 = path_loss_linear(10.0, &params()).unwrap();
        assert!((g10 / 10f64.powf(-5.2) - 1.0).abs() < 1e-12);
        // dB-domain recomputation at 50 m
        let g50 = path_loss_linear(50.0, &params()).unwrap();
        let db = -30.0 - 22.0 * 50f64.log10();
        assert!((10.0 * g50.log10() - db).abs() < 1e-10);
        assert!(path_loss_linear(0.0, &params()).is_err());
        assert!(path_loss_linear(-3.0, &params()).is_err());
    }

    #[test]
    fn los_limit_has_exact_magnitudes() {
        let p = FadingParams {
            rician_k: 1e12,
            ..params()
        };
        let geo = Geometry::default();
        let ch: ChannelSet<f64> = generate_channel_set(&geo, &p, 6, 2, 9).unwrap();
        let gain = path_loss_linear(geo.ap_to_ris(), &p).unwrap().sqrt();
        assert!(ch.g.as_slice().iter().all(|z| z.norm() == gain));
        let gt = path_loss_linear(geo.ris_to_t(), &p).unwrap().sqrt();
        assert!(ch.v_t.iter().all(|z| z.norm() == gt));
    }

    #[test]
    fn same_seed_same_channels() {
        let geo = Geometry::default();
        let a: ChannelSet<f64> = generate_channel_set(&geo, &params(), 10, 2, 77).unwrap();
        let b: ChannelSet<f64> = generate_channel_set(&geo, &params(), 10, 2, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        let c: ChannelSet<f64> = generate_channel_set(&geo, &params(), 10, 2, 78).unwrap();
        assert_ne!(a, c);
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn rayleigh_second_moment_matches_gain() {
        let p = FadingParams {
            rician_k: 0.0,
            ..params()
        };
        let geo = Geometry::default();
        let gain = path_loss_linear(geo.ap_to_ris(), &p).unwrap();
        // 1e5 samples of the first G entry, one realization per seed
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|s| {
                let ch: ChannelSet<f64> = generate_channel_set(&geo, &p, 1, 1, s).unwrap();
                ch.g.get(0, 0).norm_sqr()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - gain).abs() < 3.0 * se,
            "mean {mean} gain {gain} se {se}"
        );
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::default().validate().is_ok());
        let same_side = Geometry {
            user_r: [52.0, 1.0],
            ..Geometry::default()
        };
        assert!(same_side.validate().is_err());
        let coincide = Geometry {
            user_t: [50.0, 0.0],
            ..Geometry::default()
        };
        assert!(coincide.validate().is_err());
    }

    #[test]
    fn noise_round_trip() {
        let w = params().noise_watts();
        assert!((w / 1e-12 - 1.0).abs() < 1e-12);
        assert!((watts_to_dbm(w) + 90.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_generation() {
        let ch: ChannelSet<f32> =
            generate_channel_set(&Geometry::default(), &params(), 4, 2, 3).unwrap();
        assert!(ch.g.is_finite());
        assert!(ch.sigma2 > 0.0);
    }
}
