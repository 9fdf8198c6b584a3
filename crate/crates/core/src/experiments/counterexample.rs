//! The sharpness construction: pair the `ℝ^{2d}` Bochner–Riesz kernel with
//! `χ_{A_R} ⊗ χ_{B_R} e^{−2πi|z|}` and read off the growth in `R`.
//!
//! `A_R` is an annulus of radius `∼ R^{1/2}` in `y`, `B_R` a truncated cone
//! of radius `∼ R` around `e_d` in `z`. Both sets and the modulation are
//! radial in their own variable, so the `2d`-dimensional integral reduces
//! exactly to a two-dimensional one in `(s, r) = (|y|, |z|)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bessel::kernel_closed_form;
use super::{fit_power_law, ScalingFit};
use crate::error::{domain, Result};
use crate::exponents::{necessary_alpha, Lp};
use crate::io::{fmt_g12, write_csv};
use crate::par;
use crate::spectral::C64;

/// Flag threshold on `stderr / |value|`.
pub const RELIABLE_REL_ERR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub d: u32,
    pub alpha: f64,
    /// Cone aperture `ε₀`.
    pub eps0: f64,
    pub r_list: Vec<f64>,
}

impl CounterexampleConfig {
    /// `ε₀ = 1/4`, `R = 2^10, …, 2^16`.
    pub fn new(d: u32, alpha: f64) -> CounterexampleConfig {
        CounterexampleConfig {
            d,
            alpha,
            eps0: 0.25,
            r_list: (10..=16).map(|k| 2f64.powi(k)).collect(),
        }
    }

    /// Smallest admissible `R`: `64/ε₀²`.
    pub fn r_min(&self) -> f64 {
        64.0 / (self.eps0 * self.eps0)
    }

    pub fn validate(&self, r: f64) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return domain(format!("d = {} outside 1..=3", self.d));
        }
        if !(self.alpha >= 0.0) {
            return domain(format!("α = {} must be non-negative", self.alpha));
        }
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0) {
            return domain(format!("ε₀ = {} outside (0, 1]", self.eps0));
        }
        if !(r >= self.r_min()) {
            return domain(format!("R = {r} below 64/ε₀² = {}", self.r_min()));
        }
        Ok(())
    }

    /// `|y|` range of `A_R` (half-open).
    pub fn a_radii(&self, r: f64) -> (f64, f64) {
        (self.eps0 / 10.0 * r.sqrt(), self.eps0 / 5.0 * r.sqrt())
    }

    /// `|z|` range of `B_R`.
    pub fn b_radii(&self, r: f64) -> (f64, f64) {
        (self.eps0 / 10.0 * r, self.eps0 / 5.0 * r)
    }

    /// Half-angle of the cone `|z'| ≤ (ε₀/10) z_d`.
    pub fn cone_angle(&self) -> f64 {
        (self.eps0 / 10.0).atan()
    }

    /// Surface measure of the directions in `B_R`.
    pub fn cap_measure(&self) -> f64 {
        let d = self.d;
        if d == 1 {
            return 1.0;
        }
        let theta = self.cone_angle();
        let sphere = sphere_area(d - 1);
        if d == 2 {
            return sphere * theta;
        }
        // d = 3: |S¹| ∫₀^θ sin t dt
        sphere * (1.0 - theta.cos())
    }

    /// `(|A_R|, |B_R|)`.
    pub fn set_measures(&self, r: f64) -> (f64, f64) {
        let d = self.d as f64;
        let (a1, a2) = self.a_radii(r);
        let (b1, b2) = self.b_radii(r);
        let a = sphere_area(self.d) / d * (a2.powf(d) - a1.powf(d));
        let b = self.cap_measure() / d * (b2.powf(d) - b1.powf(d));
        (a, b)
    }

    /// `‖χ_{A_R}‖_p ‖χ_{B_R}‖_q`.
    pub fn holder_bound(&self, r: f64, p: Lp, q: Lp) -> f64 {
        let (a, b) = self.set_measures(r);
        a.powf(p.inv()) * b.powf(q.inv())
    }

    /// Largest `|y|² + |z'|²` over `ε₀² z_d²` on `A_R × B_R`; at most 1 inside the cone.
    pub fn cone_ratio(&self, r: f64) -> f64 {
        let (_, a2) = self.a_radii(r);
        let (b1, _) = self.b_radii(r);
        let t = self.cone_angle();
        // worst point: largest |y|, smallest |z| at the rim of the cone
        let zd = b1 * t.cos();
        let zp = b1 * t.sin();
        (a2 * a2 + zp * zp) / (self.eps0 * self.eps0 * zd * zd)
    }
}

/// `|S^{n−1}| = 2π^{n/2}/Γ(n/2)`.
fn sphere_area(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PairingMethod {
    /// Stratified Monte Carlo over the `(|y|, |z|)` rectangle.
    MonteCarlo { samples: usize, seed: u64 },
    /// Composite Gauss–Legendre; the error column compares two panel widths.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub r: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    /// Monte-Carlo standard error, or the quadrature error estimate.
    pub stderr: f64,
    pub reliable: bool,
}

/// `ρ(s, r)`: the reduced integrand, measure factors included.
fn integrand(cfg: &CounterexampleConfig, s: f64, r: f64) -> C64 {
    let d = cfg.d as i32;
    let w = (s * s + r * r).sqrt();
    let k = kernel_closed_form(w, cfg.alpha, cfg.d);
    let weight = sphere_area(cfg.d) * s.powi(d - 1) * cfg.cap_measure() * r.powi(d - 1);
    C64::from_polar(k * weight, -2.0 * PI * r)
}

/// `∬_{A_R × B_R} K^α(|(y, z)|) e^{−2πi|z|} dy dz`.
pub fn counterexample_pairing(cfg: &CounterexampleConfig, r: f64, method: PairingMethod) -> Result<Pairing> {
    cfg.validate(r)?;
    let (value, err) = match method {
        PairingMethod::MonteCarlo { samples, seed } => monte_carlo(cfg, r, samples, seed)?,
        PairingMethod::Quadrature => {
            let fine = quadrature(cfg, r, 0.125);
            let coarse = quadrature(cfg, r, 0.25);
            (fine, (fine - coarse).norm())
        }
    };
    let abs = value.norm();
    Ok(Pairing {
        r,
        re: value.re,
        im: value.im,
        abs,
        stderr: err,
        reliable: err <= RELIABLE_REL_ERR * abs,
    })
}

/// Strata per `s` column and samples per stratum.
const MC_S_STRATA: usize = 2;
const MC_PER_CELL: usize = 4;

fn monte_carlo(cfg: &CounterexampleConfig, r: f64, samples: usize, seed: u64) -> Result<(C64, f64)> {
    if samples < 1_000_000 {
        return domain(format!("{samples} Monte-Carlo samples, need at least 10⁶"));
    }
    let (a1, a2) = cfg.a_radii(r);
    let (b1, b2) = cfg.b_radii(r);
    let nr = samples.div_ceil(MC_S_STRATA * MC_PER_CELL);
    let ws = (a2 - a1) / MC_S_STRATA as f64;
    let wr = (b2 - b1) / nr as f64;
    let cell = ws * wr;
    // one stream per r stratum, so the sum does not depend on scheduling
    let rows = par::map_range(nr, |ir| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ir as u64);
        let mut est = C64::new(0.0, 0.0);
        let mut var = 0.0;
        for is in 0..MC_S_STRATA {
            let mut sum = C64::new(0.0, 0.0);
            let mut sq = 0.0;
            for _ in 0..MC_PER_CELL {
                let s = a1 + (is as f64 + rng.random::<f64>()) * ws;
                let z = b1 + (ir as f64 + rng.random::<f64>()) * wr;
                let v = integrand(cfg, s, z);
                sum += v;
                sq += v.norm_sqr();
            }
            let m = MC_PER_CELL as f64;
            let mean = sum / m;
            est += mean * cell;
            let sample_var = (sq - m * mean.norm_sqr()) / (m - 1.0);
            var += cell * cell * sample_var.max(0.0) / m;
        }
        (est, var)
    });
    let mut total = C64::new(0.0, 0.0);
    let mut var = 0.0;
    for (e, v) in rows {
        total += e;
        var += v;
    }
    Ok((total, var.sqrt()))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton's method.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite rule: `panel`-wide Gauss panels in `|z|` (the modulated
/// integrand oscillates at period 1/2), 16 nodes across the `|y|` range.
fn quadrature(cfg: &CounterexampleConfig, r: f64, panel: f64) -> C64 {
    let (a1, a2) = cfg.a_radii(r);
    let (b1, b2) = cfg.b_radii(r);
    let gs = gauss_legendre(16);
    let gr = gauss_legendre(8);
    let np = ((b2 - b1) / panel).ceil() as usize;
    let w = (b2 - b1) / np as f64;
    let rows = par::map_range(np, |ip| {
        let lo = b1 + ip as f64 * w;
        let mut acc = C64::new(0.0, 0.0);
        for &(xr, wr_) in &gr {
            let z = lo + 0.5 * w * (xr + 1.0);
            for &(xs, ws_) in &gs {
                let s = a1 + 0.5 * (a2 - a1) * (xs + 1.0);
                acc += integrand(cfg, s, z) * (wr_ * ws_);
            }
        }
        acc * (0.5 * w * 0.5 * (a2 - a1))
    });
    rows.into_iter().sum()
}

/// Pairings over the configured `R` list and the log–log fit of `|pairing|`.
pub fn pairing_scan(cfg: &CounterexampleConfig, method: PairingMethod) -> Result<(Vec<Pairing>, ScalingFit)> {
    let pairs = cfg
        .r_list
        .iter()
        .map(|&r| counterexample_pairing(cfg, r, method))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = pairs.iter().map(|p| (p.r.ln(), p.abs.ln())).collect();
    let mut fit = fit_power_law(&pts)?;
    fit.reliable = pairs.iter().all(|p| p.reliable);
    Ok((pairs, fit))
}

/// CSV columns `R, abs_pairing, stderr`.
pub fn write_pairing_csv(pairs: &[Pairing], path: &std::path::Path, preamble: &[String]) -> Result<()> {
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| vec![fmt_g12(p.r), fmt_g12(p.abs), fmt_g12(p.stderr)])
        .collect();
    write_csv(path, preamble, &["R", "abs_pairing", "stderr"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryFit {
    pub d: u32,
    pub alpha: f64,
    pub p: Lp,
    pub q: Lp,
    /// Fitted growth exponent of `|pairing|` in `R`.
    pub slope: f64,
    /// `d/(2p) + d/q`, read off the set measures.
    pub holder_exponent: f64,
    /// Same with the roles of `f` and `g` exchanged.
    pub holder_exponent_swapped: f64,
    /// Smallest α compatible with boundedness, one per role assignment.
    pub implied_alpha: f64,
    pub implied_alpha_swapped: f64,
    /// `max(implied, implied_swapped, 0)`.
    pub constraint: f64,
    /// Closed-form necessary condition for comparison.
    pub theory: f64,
    pub reliable: bool,
}

/// Turn a pairing fit into a lower bound on α: boundedness forces
/// `|pairing| ≲ ‖f‖_p ‖g‖_q`, and the pairing exponent moves one-for-one with α.
pub fn necessary_exponent_fit(cfg: &CounterexampleConfig, fit: &ScalingFit, p: Lp, q: Lp) -> Result<NecessaryFit> {
    let (r0, r1) = match (cfg.r_list.first(), cfg.r_list.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => return domain("R list needs two distinct values"),
    };
    let holder_exp = |pp: Lp, qq: Lp| (cfg.holder_bound(r1, pp, qq) / cfg.holder_bound(r0, pp, qq)).ln() / (r1 / r0).ln();
    let h = holder_exp(p, q);
    let hs = holder_exp(q, p);
    let implied = cfg.alpha + fit.slope - h;
    let implied_s = cfg.alpha + fit.slope - hs;
    Ok(NecessaryFit {
        d: cfg.d,
        alpha: cfg.alpha,
        p,
        q,
        slope: fit.slope,
        holder_exponent: h,
        holder_exponent_swapped: hs,
        implied_alpha: implied,
        implied_alpha_swapped: implied_s,
        constraint: implied.max(implied_s).max(0.0),
        theory: necessary_alpha(p, q, cfg.d),
        reliable: fit.reliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sets_sit_inside_the_cone() {
        let c = CounterexampleConfig::new(2, 0.2);
        for &r in &c.r_list {
            assert!(c.cone_ratio(r) <= 1.0, "R = {r}: {}", c.cone_ratio(r));
        }
        assert!(c.validate(c.r_min() / 2.0).is_err());
    }

    #[test]
    fn measures_scale_exactly() {
        for d in 1..=3 {
            let c = CounterexampleConfig::new(d, 0.5);
            let (a1, b1) = c.set_measures(1024.0);
            let (a2, b2) = c.set_measures(4096.0);
            let df = d as f64;
            assert_relative_eq!((a2 / a1).log(4.0), df / 2.0, epsilon = 1e-12);
            assert_relative_eq!((b2 / b1).log(4.0), df, epsilon = 1e-12);
            let h = (c.holder_bound(4096.0, Lp::Finite(3.0), Lp::Finite(1.5)) / c.holder_bound(1024.0, Lp::Finite(3.0), Lp::Finite(1.5))).log(4.0);
            assert_relative_eq!(h, df / 6.0 + df / 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn cap_measure_matches_direct_count() {
        // fraction of S² within the cone angle, by a fine θ sum
        let c = CounterexampleConfig::new(3, 0.2);
        let t = c.cone_angle();
        let n = 100_000;
        let h = t / n as f64;
        let direct: f64 = (0..n).map(|i| 2.0 * PI * ((i as f64 + 0.5) * h).sin() * h).sum();
        assert_relative_eq!(c.cap_measure(), direct, max_relative = 1e-8);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let g = gauss_legendre(8);
        let s: f64 = g.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
        assert_relative_eq!(g.iter().map(|p| p.1).sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let c = CounterexampleConfig::new(2, 0.2);
        let r = 2048.0;
        let mc = counterexample_pairing(&c, r, PairingMethod::MonteCarlo { samples: 1_000_000, seed: 7 }).unwrap();
        let qd = counterexample_pairing(&c, r, PairingMethod::Quadrature).unwrap();
        assert!(mc.reliable && qd.reliable);
        let diff = C64::new(mc.re - qd.re, mc.im - qd.im).norm();
        assert!(diff <= 4.0 * mc.stderr + 1e-6 * qd.abs, "{mc:?} {qd:?}");
        assert!(qd.stderr < 1e-6 * qd.abs);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let c = CounterexampleConfig::new(2, 0.5);
        let m = PairingMethod::MonteCarlo { samples: 1_000_000, seed: 3 };
        let a = counterexample_pairing(&c, 1024.0, m).unwrap();
        let b = par::sequential(|| counterexample_pairing(&c, 1024.0, m).unwrap());
        assert_eq!(a, b);
        assert!(counterexample_pairing(&c, 1024.0, PairingMethod::MonteCarlo { samples: 10, seed: 3 }).is_err());
    }
}
