//! Reference solvers that share no code with the library's inner solvers.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, TAU};

pub fn random_channel<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) / 2f64.sqrt()
        })
        .collect()
}

/// `a^H b`
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn energy(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn sinrs(h_t: &[C64], h_r: &[C64], w_t: &[C64], w_r: &[C64], sigma2: f64) -> (f64, f64) {
    (
        dot(h_t, w_t).norm_sqr() / (dot(h_t, w_r).norm_sqr() + sigma2),
        dot(h_r, w_r).norm_sqr() / (dot(h_r, w_t).norm_sqr() + sigma2),
    )
}

/// Orthonormal basis of span{h_t, h_r} (Gram-Schmidt).
fn span_basis(h_t: &[C64], h_r: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let e1: Vec<C64> = h_t.iter().map(|x| x / energy(h_t).sqrt()).collect();
    let proj = dot(&e1, h_r);
    let rest: Vec<C64> = h_r.iter().zip(&e1).map(|(r, e)| r - e * proj).collect();
    let e2: Vec<C64> = rest.iter().map(|x| x / energy(&rest).sqrt()).collect();
    (e1, e2)
}

/// Unicast minimum power by direct search over beam directions in
/// span{h_t, h_r}. For fixed unit directions the tight SINR constraints are a
/// 2x2 linear system in the stream powers. Directions are parametrized as
/// `cos(a) e1 + sin(a) e^{jb} e2`; a coarse grid is followed by a halving
/// pattern search. Returns `None` if no direction pair is feasible.
pub fn unicast_span_oracle(
    h_t: &[C64],
    h_r: &[C64],
    g_t: f64,
    g_r: f64,
    sigma2: f64,
) -> Option<f64> {
    let (e1, e2) = span_basis(h_t, h_r);
    // projections of the channels onto the basis
    let (t1, t2) = (dot(h_t, &e1), dot(h_t, &e2));
    let (r1, r2) = (dot(h_r, &e1), dot(h_r, &e2));
    let gain = |c1: C64, c2: C64, a: f64, b: f64| {
        (c1 * a.cos() + c2 * C64::from_polar(a.sin(), b)).norm_sqr()
    };
    let power = |x: [f64; 4]| -> f64 {
        let [at, bt, ar, br] = x;
        let g_tt = gain(t1, t2, at, bt);
        let g_tr = gain(t1, t2, ar, br);
        let g_rr = gain(r1, r2, ar, br);
        let g_rt = gain(r1, r2, at, bt);
        let det = g_tt * g_rr - g_t * g_r * g_tr * g_rt;
        if det <= 0.0 {
            return f64::INFINITY;
        }
        let p_t = (g_t * sigma2 * g_rr + g_t * g_tr * g_r * sigma2) / det;
        let p_r = (g_r * sigma2 * g_tt + g_r * g_rt * g_t * sigma2) / det;
        if p_t < 0.0 || p_r < 0.0 {
            f64::INFINITY
        } else {
            p_t + p_r
        }
    };
    let (na, nb) = (17usize, 24usize);
    let a_of = |i: usize| FRAC_PI_2 * i as f64 / (na - 1) as f64;
    let b_of = |j: usize| TAU * j as f64 / nb as f64;
    let mut best = ([0.0; 4], f64::INFINITY);
    for i in 0..na {
        for j in 0..nb {
            for k in 0..na {
                for l in 0..nb {
                    let x = [a_of(i), b_of(j), a_of(k), b_of(l)];
                    let p = power(x);
                    if p < best.1 {
                        best = (x, p);
                    }
                }
            }
        }
    }
    if !best.1.is_finite() {
        return None;
    }
    let mut step = [
        FRAC_PI_2 / (na - 1) as f64,
        TAU / nb as f64,
        FRAC_PI_2 / (na - 1) as f64,
        TAU / nb as f64,
    ];
    while step.iter().any(|s| *s > 1e-12) {
        let mut moved = false;
        for d in 0..4 {
            for sign in [1.0, -1.0] {
                let mut x = best.0;
                x[d] += sign * step[d];
                let p = power(x);
                if p < best.1 {
                    best = (x, p);
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Some(best.1)
}

/// Minimum-norm `w` with `H^H w = d` for `H = [h_t h_r]`; returns (w, ||w||^2).
fn min_norm(h_t: &[C64], h_r: &[C64], d: [C64; 2]) -> Option<(Vec<C64>, f64)> {
    let (k11, k22, k12) = (energy(h_t), energy(h_r), dot(h_t, h_r));
    let det = k11 * k22 - k12.norm_sqr();
    if det <= 1e-14 * k11 * k22 {
        return None;
    }
    // x = K^{-1} d, K = [[k11, k12], [conj(k12), k22]]
    let x1 = (d[0] * k22 - k12 * d[1]) / det;
    let x2 = (d[1] * k11 - k12.conj() * d[0]) / det;
    let w: Vec<C64> = h_t.iter().zip(h_r).map(|(a, b)| a * x1 + b * x2).collect();
    let p = energy(&w);
    Some((w, p))
}

/// Multicast minimum power: the better of the two single-user matched
/// filters (when they also serve the other user) and the both-constraints-
/// tight family sampled at `points` uniformly spaced relative phases.
pub fn multicast_phi_oracle(
    h_t: &[C64],
    h_r: &[C64],
    gamma: f64,
    sigma2: f64,
    points: usize,
) -> f64 {
    let need = gamma * sigma2;
    let mut best = f64::INFINITY;
    for (h, other) in [(h_t, h_r), (h_r, h_t)] {
        let p = need / energy(h);
        let w: Vec<C64> = h
            .iter()
            .map(|x| x * (p.sqrt() / energy(h).sqrt()))
            .collect();
        if dot(other, &w).norm_sqr() >= need * (1.0 - 1e-12) {
            best = best.min(p);
        }
    }
    for k in 0..points {
        let phi = TAU * k as f64 / points as f64;
        let s = C64::new(need.sqrt(), 0.0);
        if let Some((_, p)) = min_norm(h_t, h_r, [s, s * C64::from_polar(1.0, phi)]) {
            best = best.min(p);
        }
    }
    best
}

/// `||w - P w|| / ||w||` with `P` the projector onto span{h_t, h_r}.
pub fn span_residual(w: &[C64], h_t: &[C64], h_r: &[C64]) -> f64 {
    let (e1, e2) = span_basis(h_t, h_r);
    let (c1, c2) = (dot(&e1, w), dot(&e2, w));
    let rest: Vec<C64> = w
        .iter()
        .zip(e1.iter().zip(&e2))
        .map(|(x, (a, b))| x - a * c1 - b * c2)
        .collect();
    (energy(&rest) / energy(w)).sqrt()
}
