//! Oracles shared by the integration tests. Nothing here calls the library
//! routine it is used to check.

#![allow(dead_code)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    // start from panels no wider than one oscillation of typical integrands
    let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| rec(f, a + i as f64 * w, a + (i + 1) as f64 * w, tol / panels as f64, 0))
        .sum()
}

/// Schläfli's integral for `J_ν(x)`.
pub fn bessel_j_oracle(nu: f64, x: f64) -> f64 {
    let first = integrate(&|t: f64| (nu * t - x * t.sin()).cos(), 0.0, PI, 1e-13) / PI;
    let s = (nu * PI).sin();
    if s.abs() < 1e-15 {
        return first;
    }
    // e^{−x sinh t − νt}: cut where the exponent passes 60
    let mut top = 1.0;
    while x * f64::sinh(top) + nu * top < 60.0 {
        top *= 1.5;
    }
    let second = integrate(&|t: f64| (-x * t.sinh() - nu * t).exp(), 0.0, top, 1e-13);
    first - s / PI * second
}

/// `(ν, x)` pairs covering both branches and the seam between them.
pub fn bessel_cases() -> Vec<(f64, f64)> {
    let nus = [0.0, 0.5, 1.0, 1.7, 2.5, 3.2, 4.0, 5.5, 7.3, 9.0];
    let xs = [0.4, 7.5, 15.99, 16.01, 50.0];
    let mut out = Vec::new();
    for (i, &nu) in nus.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            // stretch the large argument with ν so the far range is sampled too
            let x = if j == 4 { x * (1.0 + i as f64) } else { x };
            out.push((nu, x));
        }
    }
    out.push((2.7, 50.0));
    out
}

/// `∫_{ℝ²} (1 − |ξ|²)^α_+ e^{2πi r ξ₁} dξ` as a Riemann sum over the lattice
/// `ℤ²/L`, i.e. the 2-D transform evaluated directly at the point `(r, 0)`.
pub fn radial_transform_2d(alpha: f64, r: f64, l: usize) -> f64 {
    let lf = l as f64;
    let mut total = 0.0;
    for k1 in -(l as i64)..=(l as i64) {
        let a = (k1 * k1) as f64 / (lf * lf);
        let mut col = 0.0;
        let top = ((1.0 - a).max(0.0).sqrt() * lf) as i64 + 1;
        for k2 in -top..=top {
            let s = 1.0 - a - (k2 * k2) as f64 / (lf * lf);
            if s > 0.0 {
                col += s.powf(alpha);
            }
        }
        total += col * (2.0 * PI * r * k1 as f64 / lf).cos();
    }
    total / (lf * lf)
}
