//! Bessel functions of the first kind and the Bochner–Riesz kernel in `ℝ^{2d}`.

use std::f64::consts::PI;

/// Above this argument the series gives way to the large-argument expansion.
const SERIES_CUTOFF: f64 = 16.0;

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `Σ_k (−1)^k (x/2)^{2k} / (k! Γ(k+ν+1))`, i.e. `J_ν(x) / (x/2)^ν`.
fn scaled_series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (-ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..400 {
        let kf = k as f64;
        term *= -q / (kf * (kf + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && kf > q.sqrt() {
            break;
        }
    }
    sum
}

fn series(nu: f64, x: f64) -> f64 {
    if nu == 0.0 {
        return scaled_series(0.0, x);
    }
    // (x/2)^ν folded in through logs so large orders do not overflow
    let lead = nu * (0.5 * x).ln();
    let s = scaled_series(nu, x);
    s.signum() * (lead + s.abs().ln()).exp()
}

/// Hankel's expansion, `0 ≤ ν < 2`, `x > 16`.
fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        t *= (mu - odd * odd) / (8.0 * kf * x);
        if t == 0.0 {
            break;
        }
        if k >= 6 && t.abs() > last {
            break;
        }
        last = t.abs();
        match k % 4 {
            0 => p += t,
            1 => q += t,
            2 => p -= t,
            _ => q -= t,
        }
        if t.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_ν(x)` for `ν ≥ 0`, `x ≥ 0`.
///
/// Series for `x ≤ 16`; beyond that Hankel's expansion at the two lowest
/// orders `ν₀ = ν − ⌊ν⌋` and `ν₀ + 1`, carried to `ν` by forward recurrence
/// while `ν < x` and by normalized backward recurrence otherwise.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x >= 0.0, "bessel_j needs ν ≥ 0 and x ≥ 0, got ν = {nu}, x = {x}");
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_CUTOFF {
        return series(nu, x);
    }
    let steps = nu.floor() as usize;
    let nu0 = nu - steps as f64;
    let j0 = hankel(nu0, x);
    if steps == 0 {
        return j0;
    }
    let j1 = hankel(nu0 + 1.0, x);
    if nu < x {
        let (mut a, mut b) = (j0, j1);
        for k in 1..steps {
            let c = 2.0 * (nu0 + k as f64) / x * b - a;
            a = b;
            b = c;
        }
        return b;
    }
    // Miller: recur down from well above the turning point
    let top = steps + (x as usize) + 40;
    let mut hi = 0.0;
    let mut cur = 1e-300;
    let mut at_nu = 0.0;
    let mut at0 = 0.0;
    let mut at1 = 0.0;
    for k in (1..=top).rev() {
        // cur = J_{ν₀+k}, hi = J_{ν₀+k+1}
        if k == steps {
            at_nu = cur;
        }
        if k == 1 {
            at1 = cur;
        }
        let lo = 2.0 * (nu0 + k as f64) / x * cur - hi;
        hi = cur;
        cur = lo;
        if cur.abs() > 1e250 {
            hi *= 1e-250;
            cur *= 1e-250;
            at_nu *= 1e-250;
            at1 *= 1e-250;
        }
        if k == 1 {
            at0 = cur;
        }
    }
    if j0.abs() >= j1.abs() {
        at_nu * j0 / at0
    } else {
        at_nu * j1 / at1
    }
}

/// Kernel of `(1 − |ζ|²)^α_+` on `ℝ^{2d}` at `|w|`:
/// `Γ(α+1) π^{−α} |w|^{−(d+α)} J_{d+α}(2π|w|)`.
pub fn kernel_closed_form(w_norm: f64, alpha: f64, d: u32) -> f64 {
    assert!(w_norm >= 0.0, "|w| must be non-negative");
    let nu = d as f64 + alpha;
    let pre = (ln_gamma(alpha + 1.0) - alpha * PI.ln()).exp();
    let x = 2.0 * PI * w_norm;
    if x <= SERIES_CUTOFF {
        // |w|^{−ν} J_ν(2π|w|) = π^ν · J_ν(x)/(x/2)^ν
        return pre * PI.powf(nu) * scaled_series(nu, x);
    }
    pre * w_norm.powf(-nu) * bessel_j(nu, x)
}

/// `lim_{w→0}` of [`kernel_closed_form`]: `Γ(α+1) π^d / Γ(d+α+1)`.
pub fn kernel_at_origin(alpha: f64, d: u32) -> f64 {
    (ln_gamma(alpha + 1.0) + d as f64 * PI.ln() - ln_gamma(d as f64 + alpha + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn j_half(x: f64) -> f64 {
        (2.0 / (PI * x)).sqrt() * x.sin()
    }

    fn j_three_halves(x: f64) -> f64 {
        (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos())
    }

    #[test]
    fn trivial_values() {
        assert_eq!(bessel_j(0.0, 0.0), 1.0);
        assert_eq!(bessel_j(1.3, 0.0), 0.0);
    }

    #[test]
    fn half_integer_closed_forms() {
        for x in [0.3, 1.0, 10.0, 15.9, 16.1, 100.0, 2500.0] {
            assert_abs_diff_eq!(bessel_j(0.5, x), j_half(x), epsilon = 1e-10);
            assert_abs_diff_eq!(bessel_j(1.5, x), j_three_halves(x), epsilon = 1e-10);
        }
        // J_{7/2} by the upward recurrence of the closed forms
        for x in [20.0, 3.0, 60.0] {
            let j52 = 3.0 / x * j_three_halves(x) - j_half(x);
            let j72 = 5.0 / x * j52 - j_three_halves(x);
            assert_abs_diff_eq!(bessel_j(3.5, x), j72, epsilon = 1e-10);
        }
    }

    #[test]
    fn miller_branch_matches_series_at_the_seam() {
        // ν ≥ x > 16 runs the backward recurrence; x just below 16 the series
        let a = bessel_j(20.25, 16.0 + 1e-9);
        let b = series(20.25, 16.0 + 1e-9);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        // well past the turning point the series has no cancellation to speak of
        assert_abs_diff_eq!(bessel_j(30.5, 20.0), series(30.5, 20.0), epsilon = 1e-12);
    }

    #[test]
    fn kernel_origin_limit() {
        for (alpha, d) in [(0.5, 1), (0.2, 2), (2.5, 2)] {
            let k0 = kernel_closed_form(0.0, alpha, d);
            assert_abs_diff_eq!(k0, kernel_at_origin(alpha, d), epsilon = 1e-14);
            let near = kernel_closed_form(1e-5, alpha, d);
            assert!((near - k0).abs() < 1e-8 * k0);
        }
    }

    #[test]
    fn kernel_branches_agree() {
        // series form just below the cutoff against the J form just above
        let w = SERIES_CUTOFF / (2.0 * PI);
        let a = kernel_closed_form(w * (1.0 - 1e-12), 0.7, 2);
        let nu = 2.7;
        let b = (ln_gamma(1.7) - 0.7 * PI.ln()).exp() * w.powf(-nu) * series(nu, 2.0 * PI * w);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn kernel_envelope_bounded() {
        // |K(w)| |w|^{(2d+1)/2+α} stays bounded on [10, 10⁴]
        for (alpha, d) in [(0.2, 2), (0.5, 1)] {
            let e = (2 * d + 1) as f64 / 2.0 + alpha;
            let mut top: f64 = 0.0;
            let mut w = 10.0;
            while w < 1e4 {
                top = top.max(kernel_closed_form(w, alpha, d).abs() * w.powf(e));
                w *= 1.013;
            }
            assert!(top.is_finite() && top < 1.0, "{top}");
        }
    }

    proptest! {
        #[test]
        fn three_term_recurrence(nu in 1.0f64..8.0, x in 0.5f64..300.0) {
            let l = bessel_j(nu - 1.0, x);
            let m = bessel_j(nu, x);
            let h = bessel_j(nu + 1.0, x);
            prop_assert!((l + h - 2.0 * nu / x * m).abs() < 1e-10 * (1.0 + 2.0 * nu / x));
        }

        #[test]
        fn derivative_identity(nu in 0.0f64..6.0, x in 17.0f64..200.0) {
            // J_{ν+1}' = J_ν − ((ν+1)/x) J_{ν+1}, against a 4-point difference
            let h = 1e-3;
            let j = |t: f64| bessel_j(nu + 1.0, t);
            let fd = (8.0 * (j(x + h) - j(x - h)) - (j(x + 2.0 * h) - j(x - 2.0 * h))) / (12.0 * h);
            let id = bessel_j(nu, x) - (nu + 1.0) / x * bessel_j(nu + 1.0, x);
            prop_assert!((fd - id).abs() < 1e-9);
        }
    }
}
