//! Smooth compactly supported cutoffs with exact high-order derivatives.
//!
//! Every profile is a closed form built from `h(x) = exp(−1/x)` (for
//! `x > 0`) and evaluated either on `f64` or on a [`Jet`], so the k-th
//! derivative comes from the same expression as the value.

pub mod jet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
pub use jet::{Jet, Real, JET_CAP};

/// Largest derivative order handed out by the public API.
pub const N_MAX: usize = 20;

/// Samples used for sup-norm estimates.
pub const SUP_SAMPLES: usize = 4096;

fn h<R: Real>(x: R) -> R {
    if x.val() <= 0.0 {
        x.lift(0.0)
    } else {
        (-(x.lift(1.0) / x)).exp()
    }
}

/// Smooth monotone step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step<R: Real>(x: R) -> R {
    let v = x.val();
    if v <= 0.0 {
        x.lift(0.0)
    } else if v >= 1.0 {
        x.lift(1.0)
    } else {
        let a = h(x);
        let b = h(x.lift(1.0) - x);
        a / (a + b)
    }
}

fn standard<R: Real>(t: R, a: f64, b: f64) -> R {
    let s = (t.scale(2.0).shift(-(a + b))).scale(1.0 / (b - a));
    if s.val().abs() >= 1.0 {
        return t.lift(0.0);
    }
    let one = t.lift(1.0);
    (one - one / (one - s * s)).exp()
}

/// `η(s) = Θ(s) − Θ(2s)` with `Θ = 1` on `s ≤ 1` and `0` on `s ≥ 2`.
fn dyadic_eta<R: Real>(s: R) -> R {
    smooth_step(s.scale(2.0).shift(-1.0)) - smooth_step(s.shift(-1.0))
}

fn dyadic_psi_closed<R: Real>(s: R, alpha: f64) -> R {
    let v = s.val();
    if v <= 0.5 || v >= 2.0 {
        return s.lift(0.0);
    }
    s.powf(alpha) * dyadic_eta(s)
}

/// `(1−t)^α (1 − Θ(2(1−t)))`, i.e. `(1−t)^α · step(1 − 2t)` on `[0,1)`.
fn psi_zero_closed<R: Real>(t: R, alpha: f64) -> R {
    let v = t.val();
    if !(0.0..0.5).contains(&v) {
        return t.lift(0.0);
    }
    let u = t.lift(1.0) - t;
    u.powf(alpha) * smooth_step(t.lift(1.0) - t.scale(2.0))
}

/// Step for the partition: 0 for `s ≤ −1/4`, 1 for `s ≥ 1/4`.
fn partition_step<R: Real>(s: R) -> R {
    smooth_step(s.scale(2.0).shift(0.5))
}

fn partition_phi_closed<R: Real>(t: R) -> R {
    if t.val().abs() >= 0.625 {
        return t.lift(0.0);
    }
    partition_step(t.scale(2.0).shift(1.0)) - partition_step(t.scale(2.0).shift(-1.0))
}

/// Serializable description of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum BumpKind {
    /// `exp(1 − 1/(1 − s²))` with `s = (2t − a − b)/(b − a)`.
    Standard { a: f64, b: f64 },
    DyadicPsi { alpha: f64 },
    PsiZero { alpha: f64 },
    PartitionPhi,
    /// `t^β · base(t)`.
    Moment { beta: u32, base: Box<BumpKind> },
    /// `base^{(order)}(t)`.
    Derivative { order: u32, base: Box<BumpKind> },
}

impl BumpKind {
    fn support(&self) -> (f64, f64) {
        match self {
            BumpKind::Standard { a, b } => (*a, *b),
            BumpKind::DyadicPsi { .. } => (0.5, 2.0),
            BumpKind::PsiZero { .. } => (0.0, 0.5),
            BumpKind::PartitionPhi => (-0.625, 0.625),
            BumpKind::Moment { base, .. } | BumpKind::Derivative { base, .. } => base.support(),
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self {
            BumpKind::Standard { a, b } => standard(t, *a, *b),
            BumpKind::DyadicPsi { alpha } => dyadic_psi_closed(t, *alpha),
            BumpKind::PsiZero { alpha } => psi_zero_closed(t, *alpha),
            BumpKind::PartitionPhi => partition_phi_closed(t),
            BumpKind::Moment { beta, base } => t.powi(*beta as i32) * base.value(t),
            BumpKind::Derivative { order, base } => {
                base.jet(t, *order as usize).derivative(*order as usize)
            }
        }
    }

    /// Carried order plus the extra orders nested derivatives need.
    fn depth(&self) -> usize {
        match self {
            BumpKind::Moment { base, .. } => base.depth(),
            BumpKind::Derivative { order, base } => *order as usize + base.depth(),
            _ => 0,
        }
    }

    fn jet(&self, t: f64, order: usize) -> Jet {
        match self {
            BumpKind::Standard { a, b } => standard(Jet::variable(t, order), *a, *b),
            BumpKind::DyadicPsi { alpha } => dyadic_psi_closed(Jet::variable(t, order), *alpha),
            BumpKind::PsiZero { alpha } => psi_zero_closed(Jet::variable(t, order), *alpha),
            BumpKind::PartitionPhi => partition_phi_closed(Jet::variable(t, order)),
            BumpKind::Moment { beta, base } => {
                Jet::variable(t, order).powi(*beta) * base.jet(t, order)
            }
            BumpKind::Derivative { order: m, base } => {
                let m = *m as usize;
                base.jet(t, order + m).differentiate(m)
            }
        }
    }
}

/// A profile together with a constant factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothBump {
    pub kind: BumpKind,
    pub scale: f64,
}

impl SmoothBump {
    fn new(kind: BumpKind) -> SmoothBump {
        SmoothBump { kind, scale: 1.0 }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        self.kind.support()
    }

    pub fn n_max(&self) -> usize {
        N_MAX
    }

    pub fn value(&self, t: f64) -> f64 {
        self.scale * self.kind.value(t)
    }

    /// Jet of the given order (up to `JET_CAP − 1` minus nesting depth).
    pub fn jet(&self, t: f64, order: usize) -> Result<Jet> {
        let cap = JET_CAP - 1 - self.kind.depth();
        if order > cap {
            return Err(Error::OrderExceeded {
                requested: order,
                max: cap,
            });
        }
        Ok(self.kind.jet(t, order) * self.scale)
    }

    /// `k`-th derivative at `t`, `k ≤ N_MAX`.
    pub fn derivative(&self, t: f64, k: usize) -> Result<f64> {
        if k > N_MAX {
            return Err(Error::OrderExceeded {
                requested: k,
                max: N_MAX,
            });
        }
        Ok(self.jet(t, k)?.derivative(k))
    }

    /// `base'`, `base''`, ... as a profile of its own.
    pub fn derivative_profile(&self, order: u32) -> SmoothBump {
        SmoothBump {
            kind: BumpKind::Derivative {
                order,
                base: Box::new(self.kind.clone()),
            },
            scale: self.scale,
        }
    }

    /// The same profile multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SmoothBump {
        SmoothBump {
            kind: self.kind.clone(),
            scale: self.scale * c,
        }
    }

    /// Sampled sup of `|f|` over the support.
    pub fn sup_abs(&self) -> f64 {
        let (a, b) = self.support();
        (0..=SUP_SAMPLES)
            .map(|i| self.value(a + (b - a) * i as f64 / SUP_SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

pub fn standard_bump(a: f64, b: f64) -> Result<SmoothBump> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return domain(format!("degenerate interval [{a}, {b}]"));
    }
    Ok(SmoothBump::new(BumpKind::Standard { a, b }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnCertificate {
    pub n: usize,
    pub sup_norms: Vec<f64>,
}

/// Scale `bump` so that its first `n` derivatives are bounded by one.
pub fn cn_normalize(bump: &SmoothBump, n: usize) -> Result<(SmoothBump, CnCertificate)> {
    if n > N_MAX {
        return Err(Error::OrderExceeded {
            requested: n,
            max: N_MAX,
        });
    }
    if bump.scale == 0.0 {
        return Err(Error::DegenerateBump);
    }
    let sups = sup_norms(bump, n)?;
    let m = sups.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 || !m.is_finite() {
        return Err(Error::DegenerateBump);
    }
    let c = if m <= 1.0 { 1.0 } else { 1.0 / m };
    let out = bump.scaled(c);
    Ok((
        out,
        CnCertificate {
            n,
            sup_norms: sups.iter().map(|s| s * c).collect(),
        },
    ))
}

/// `sup |f^{(k)}|` for `k = 0..=n`: dense sampling, then Newton steps on
/// `f^{(k+1)}` from the best sample.
pub fn sup_norms(bump: &SmoothBump, n: usize) -> Result<Vec<f64>> {
    let (a, b) = bump.support();
    let m = SUP_SAMPLES;
    let dt = (b - a) / m as f64;
    let jets: Vec<Jet> = crate::par::map_range(m + 1, |i| {
        bump.jet(a + dt * i as f64, n + 2).unwrap_or(Jet::constant(0.0, n + 2))
    });
    let mut sups = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (mut best_i, mut best) = (0, 0.0);
        for (i, j) in jets.iter().enumerate() {
            let v = j.derivative(k).abs();
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let (lo, hi) = (a + dt * best_i.saturating_sub(1) as f64, (a + dt * (best_i + 1) as f64).min(b));
        let mut t = a + dt * best_i as f64;
        for _ in 0..4 {
            let j = bump.jet(t, k + 2)?;
            let (g, dg) = (j.derivative(k + 1), j.derivative(k + 2));
            if dg == 0.0 {
                break;
            }
            let tn = t - g / dg;
            if !(lo..=hi).contains(&tn) {
                break;
            }
            t = tn;
            best = best.max(bump.derivative(t, k)?.abs());
        }
        sups.push(best);
    }
    Ok(sups)
}

/// `ψ(s) = s^α η(s)` with `Σ_j η(2^j s) = 1`, so `Σ_δ δ^α ψ(t/δ) = t^α`.
pub fn dyadic_psi(alpha: f64) -> Result<SmoothBump> {
    if !(alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    Ok(SmoothBump::new(BumpKind::DyadicPsi { alpha }))
}

/// The coarse remainder `ψ0(t) = (1−t)^α_+ − Σ_{δ ≤ 1/2} δ^α ψ((1−t)/δ)`.
pub fn psi_zero(alpha: f64, psi: &SmoothBump) -> Result<SmoothBump> {
    match psi.kind {
        BumpKind::DyadicPsi { alpha: a } if a == alpha && psi.scale == 1.0 => {
            Ok(SmoothBump::new(BumpKind::PsiZero { alpha }))
        }
        _ => domain("psi_zero needs the unscaled dyadic psi of the same alpha"),
    }
}

/// Partition profile with `Σ_k φ(t + k) = 1`, supported in `(−5/8, 5/8)`.
pub fn partition_phi() -> SmoothBump {
    SmoothBump::new(BumpKind::PartitionPhi)
}

/// `φ_β(t) = t^β φ(t)`.
pub fn moment_bump(phi: &SmoothBump, beta: i64) -> Result<SmoothBump> {
    if beta < 0 {
        return domain(format!("beta must be non-negative, got {beta}"));
    }
    if beta as usize > N_MAX {
        return Err(Error::OrderExceeded {
            requested: beta as usize,
            max: N_MAX,
        });
    }
    if beta == 0 {
        return Ok(phi.clone());
    }
    Ok(SmoothBump {
        kind: BumpKind::Moment {
            beta: beta as u32,
            base: Box::new(phi.kind.clone()),
        },
        scale: phi.scale,
    })
}

/// Dyadic scales `2^k` for `k` in `lo..=hi`.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

/// `sup_t |Σ_δ δ^α ψ(t/δ) − t^α|` over `n` log-spaced `t` in `[t_lo, t_hi]`,
/// with `δ` over `2^k`, `k_lo ≤ k ≤ k_hi`.
pub fn calibration_sup_error(alpha: f64, t_lo: f64, t_hi: f64, k_lo: i32, k_hi: i32, n: usize) -> Result<f64> {
    let psi = dyadic_psi(alpha)?;
    let deltas = dyadic_scales(k_lo, k_hi);
    let (l0, l1) = (t_lo.ln(), t_hi.ln());
    let errs = crate::par::map_range(n, |i| {
        let t = (l0 + (l1 - l0) * i as f64 / (n - 1).max(1) as f64).exp();
        let s: f64 = deltas.iter().map(|&d| d.powf(alpha) * psi.value(t / d)).sum();
        (s - t.powf(alpha)).abs()
    });
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// `sup |Σ_{|k| ≤ 11} φ(t + k) − 1|` over the given points.
pub fn partition_sup_error(points: &[f64]) -> f64 {
    let phi = partition_phi();
    points
        .iter()
        .map(|&t| {
            let s: f64 = (-11..=11).map(|k| phi.value(t + k as f64)).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// `E(z) = e^z − Σ_{n ≤ N} z^n / n!` and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorRemainder {
    pub n: usize,
}

/// Measured `C_k = sup |E^{(k)}(iu)| / |u|^{N−k}` over `0 < |u| ≤ T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderConstants {
    pub n: usize,
    pub t_max: f64,
    pub c: Vec<f64>,
}

pub fn taylor_remainder(n: usize) -> Result<TaylorRemainder> {
    if n < 1 {
        return domain("taylor remainder needs N >= 1");
    }
    Ok(TaylorRemainder { n })
}

impl TaylorRemainder {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.derivative(z, 0)
    }

    /// `E^{(k)}(z) = e^z − Σ_{m ≤ N−k} z^m/m!` (just `e^z` once `k > N`).
    pub fn derivative(&self, z: Complex64, k: usize) -> Complex64 {
        if k > self.n {
            return z.exp();
        }
        let top = self.n - k;
        if z.norm() < 30.0 {
            // Tail series, no cancellation.
            let mut term = Complex64::new(1.0, 0.0);
            for m in 1..=top {
                term = term * z / m as f64;
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut m = top;
            loop {
                m += 1;
                term = term * z / m as f64;
                sum += term;
                if term.norm() <= 1e-18 * sum.norm() || m > top + 400 {
                    break;
                }
            }
            if z.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            sum
        } else {
            let mut term = Complex64::new(1.0, 0.0);
            let mut partial = term;
            for m in 1..=top {
                term = term * z / m as f64;
                partial += term;
            }
            z.exp() - partial
        }
    }

    /// Measured constants on the imaginary axis, `samples` points per sign.
    pub fn measured_constants(&self, t_max: f64, samples: usize) -> RemainderConstants {
        let mut c = vec![0.0f64; self.n + 1];
        for i in 1..=samples {
            let u = t_max * i as f64 / samples as f64;
            for s in [-1.0, 1.0] {
                let z = Complex64::new(0.0, s * u);
                for (k, ck) in c.iter_mut().enumerate() {
                    let r = self.derivative(z, k).norm() / u.powi((self.n - k) as i32);
                    *ck = ck.max(r);
                }
            }
        }
        RemainderConstants {
            n: self.n,
            t_max,
            c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn all_bumps() -> Vec<SmoothBump> {
        let phi = partition_phi();
        vec![
            standard_bump(-1.0, 1.0).unwrap(),
            standard_bump(0.3, 2.0).unwrap(),
            dyadic_psi(0.25).unwrap(),
            dyadic_psi(1.0).unwrap(),
            dyadic_psi(2.5).unwrap(),
            psi_zero(1.0, &dyadic_psi(1.0).unwrap()).unwrap(),
            phi.clone(),
            moment_bump(&phi, 3).unwrap(),
            phi.derivative_profile(1),
            cn_normalize(&standard_bump(-1.0, 1.0).unwrap(), 4).unwrap().0,
        ]
    }

    /// Richardson-extrapolated central difference of `f^{(k−1)}`.
    fn fd(b: &SmoothBump, t: f64, k: usize, hstep: f64) -> f64 {
        let g = |x: f64| b.derivative(x, k - 1).unwrap();
        let c = |h: f64| (g(t + h) - g(t - h)) / (2.0 * h);
        let r = |h: f64| (4.0 * c(h / 2.0) - c(h)) / 3.0;
        (16.0 * r(hstep / 2.0) - r(hstep)) / 15.0
    }

    #[test]
    fn standard_examples() {
        let b = standard_bump(-1.0, 1.0).unwrap();
        assert_eq!(b.value(0.0), 1.0);
        assert_eq!(b.value(1.0), 0.0);
        assert_eq!(b.value(-1.0), 0.0);
        for k in 0..=N_MAX {
            assert_eq!(b.derivative(1.0001, k).unwrap(), 0.0);
            assert_eq!(b.derivative(-1.0001, k).unwrap(), 0.0);
        }
        assert_eq!(b.derivative(0.0, 1).unwrap(), 0.0);
        assert!(b.value(0.999) > 0.0);
        assert!(standard_bump(1.0, 1.0).is_err());
        assert!(b.derivative(0.0, N_MAX + 1).is_err());
    }

    #[test]
    fn cn_examples() {
        let b = standard_bump(-1.0, 1.0).unwrap();
        let (same, cert) = cn_normalize(&b, 0).unwrap();
        assert_eq!(same.scale, 1.0);
        assert_eq!(cert.sup_norms.len(), 1);

        let (nb, cert) = cn_normalize(&b, 4).unwrap();
        assert!(nb.scale < 1.0);
        assert!(cert.sup_norms.iter().all(|&s| s <= 1.0 + 1e-12));
        assert!(cert.sup_norms[0] < 1.0);

        assert!(matches!(cn_normalize(&b.scaled(0.0), 3), Err(Error::DegenerateBump)));
        assert!(cn_normalize(&b, N_MAX + 1).is_err());
    }

    #[test]
    fn certificate_is_recomputable() {
        for n in [2usize, 6, 12] {
            let (nb, cert) = cn_normalize(&partition_phi(), n).unwrap();
            let again = sup_norms(&nb, n).unwrap();
            for (a, b) in cert.sup_norms.iter().zip(&again) {
                assert!(*b <= 1.0 + 1e-12);
                assert_relative_eq!(*a, *b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn psi_examples() {
        let psi = dyadic_psi(1.0).unwrap();
        let s: f64 = dyadic_scales(-20, 1).iter().map(|&d| d * psi.value(0.7 / d)).sum();
        assert_abs_diff_eq!(s, 0.7, epsilon = 1e-12);
        assert_eq!(psi.value(0.4), 0.0);
        assert_eq!(psi.value(2.1), 0.0);
        let psi2 = dyadic_psi(2.0).unwrap();
        let s: f64 = dyadic_scales(-20, 1).iter().map(|&d| d * d * psi2.value(1.0 / d)).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert!(dyadic_psi(0.0).is_err());
    }

    #[test]
    fn psi_zero_examples() {
        let psi = dyadic_psi(1.0).unwrap();
        let p0 = psi_zero(1.0, &psi).unwrap();
        assert_eq!(p0.value(0.8), 0.0);
        assert_eq!(p0.value(-0.1), 0.0);
        let s: f64 = dyadic_scales(-40, -1).iter().map(|&d| d * psi.value(0.1 / d)).sum();
        assert_abs_diff_eq!(p0.value(0.9) + s, 0.1, epsilon = 1e-10);
        assert!(psi_zero(2.0, &psi).is_err());
    }

    #[test]
    fn psi_zero_is_coarse_remainder() {
        // ψ0(t) = (1−t)^α − Σ_{δ ≤ 1/2} δ^α ψ((1−t)/δ) on [0, 1).
        for &alpha in &[0.25, 1.0, 2.5] {
            let psi = dyadic_psi(alpha).unwrap();
            let p0 = psi_zero(alpha, &psi).unwrap();
            for i in 0..200 {
                let t = i as f64 / 200.0;
                let s: f64 = dyadic_scales(-50, -1)
                    .iter()
                    .map(|&d| d.powf(alpha) * psi.value((1.0 - t) / d))
                    .sum();
                assert_abs_diff_eq!(p0.value(t), (1.0 - t).powf(alpha) - s, epsilon = 1e-12);
                assert_abs_diff_eq!(p0.value(t), psi.value(1.0 - t), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_examples() {
        let phi = partition_phi();
        let s: f64 = (-3..=3).map(|k| phi.value(0.37 + k as f64)).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert_eq!(phi.value(0.9), 0.0);
        assert_eq!(phi.value(0.0), 1.0);
        assert_eq!(phi.value(0.3), 1.0);
    }

    #[test]
    fn partition_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..100_000).map(|_| rng.random_range(-10.0..10.0)).collect();
        assert!(partition_sup_error(&pts) <= 1e-12);
    }

    #[test]
    fn moment_examples() {
        let phi = partition_phi();
        let m0 = moment_bump(&phi, 0).unwrap();
        assert_eq!(m0, phi);
        let m1 = moment_bump(&phi, 1).unwrap();
        assert_eq!(m1.value(0.0), 0.0);
        let m2 = moment_bump(&phi, 2).unwrap();
        assert!(m2.sup_abs() <= phi.sup_abs());
        assert!(moment_bump(&phi, -1).is_err());
        // Leibniz: (t φ)' = φ + t φ'
        let t = 0.41;
        let lhs = m1.derivative(t, 1).unwrap();
        let rhs = phi.value(t) + t * phi.derivative(t, 1).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }

    #[test]
    fn calibration_invariant() {
        for &alpha in &[0.25, 1.0, 2.5] {
            let e = calibration_sup_error(alpha, 2f64.powi(-18), 1.0, -24, 1, 4000).unwrap();
            assert!(e <= 1e-10, "alpha {alpha}: {e}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for b in all_bumps() {
            let (a, c) = b.support();
            let w = c - a;
            let sups = sup_norms(&b, 8).unwrap();
            for i in 0..256 {
                let t = a + w * (0.1 + 0.8 * (i as f64 + 0.5) / 256.0);
                for k in 1..=8 {
                    let d = b.derivative(t, k).unwrap();
                    let f = fd(&b, t, k, 1e-3 * w);
                    // discretisation error estimated from a second step size
                    let est = (f - fd(&b, t, k, 5e-4 * w)).abs();
                    let tol = 1e-6 * d.abs().max(1e-3 * sups[k]) + 4.0 * est;
                    assert!(
                        (d - f).abs() <= tol,
                        "{:?} t={t} k={k}: jet {d} fd {f}",
                        b.kind
                    );
                }
            }
        }
    }

    #[test]
    fn everything_vanishes_outside_support() {
        for b in all_bumps() {
            let (a, c) = b.support();
            for k in 0..=N_MAX - 1 {
                assert_eq!(b.derivative(a - 1e-9, k).unwrap(), 0.0);
                assert_eq!(b.derivative(c + 1e-9, k).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        for b in all_bumps() {
            let s = b.to_json();
            let back: SmoothBump = serde_json::from_str(&s).unwrap();
            assert_eq!(back, b);
        }
        let s = standard_bump(-1.0, 1.0).unwrap().to_json();
        assert!(s.contains(r#""kind":"standard""#));
        assert!(s.contains(r#""parameters""#));
    }

    #[test]
    fn remainder_examples() {
        let e = taylor_remainder(4).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        for k in 0..=4 {
            assert_eq!(e.derivative(zero, k).norm(), 0.0);
        }
        let t = Complex64::new(0.0, 0.5);
        assert!(e.eval(t).norm() <= 0.5f64.powi(5) / 120.0 * 0.5f64.exp());

        let e6 = taylor_remainder(6).unwrap();
        let c = e6.measured_constants(1.0, 2000);
        assert!(c.c[0].is_finite());
        assert!(c.c[0] <= std::f64::consts::E / 5040.0 * 7.0);
        assert!(taylor_remainder(0).is_err());
    }

    #[test]
    fn remainder_branches_agree() {
        // Tail sum and subtraction agree where both are accurate.
        let e = taylor_remainder(5).unwrap();
        for &y in &[29.0, 31.0] {
            let z = Complex64::new(0.0, y);
            let direct = {
                let mut term = Complex64::new(1.0, 0.0);
                let mut p = term;
                for m in 1..=5 {
                    term = term * z / m as f64;
                    p += term;
                }
                z.exp() - p
            };
            assert_relative_eq!(e.eval(z).re, direct.re, max_relative = 1e-9);
            assert_relative_eq!(e.eval(z).im, direct.im, max_relative = 1e-9);
        }
    }

    #[test]
    fn remainder_growth_bounded() {
        for n in [2usize, 4, 8] {
            let e = taylor_remainder(n).unwrap();
            let c = e.measured_constants(2.0, 4000);
            for (k, ck) in c.c.iter().enumerate() {
                // Lagrange: |E^{(k)}(iu)| ≤ |u|^{N−k+1}/(N−k+1)!
                let mut f = 1.0;
                for i in 2..=(n - k + 1) {
                    f *= i as f64;
                }
                assert!(*ck <= 2.0 / f + 1e-12, "n={n} k={k} c={ck}");
            }
        }
    }

    proptest! {
        #[test]
        fn partition_sums_to_one(t in -10.0..10.0f64) {
            let phi = partition_phi();
            let s: f64 = (-11..=11).map(|k| phi.value(t + k as f64)).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn step_is_monotone(x in -0.5..1.5f64, dx in 0.0..0.1f64) {
            prop_assert!(smooth_step(x) <= smooth_step(x + dx));
        }

        #[test]
        fn calibration_pointwise(t in 1e-5..1.0f64, ai in 0usize..3) {
            let alpha = [0.25, 1.0, 2.5][ai];
            let psi = dyadic_psi(alpha).unwrap();
            let s: f64 = dyadic_scales(-24, 1).iter().map(|&d| d.powf(alpha) * psi.value(t / d)).sum();
            prop_assert!((s - t.powf(alpha)).abs() <= 1e-10);
        }
    }
}
