//! Linear multipliers: Bochner–Riesz means, shell operators and
//! projections, their kernels, and the square functions built from them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bump::SmoothBump;
use crate::error::{domain, Error, Result};
use crate::io::{fmt_g12, write_csv, write_json};
use crate::par;
use crate::spectral::{
    inverse_in_place, lp_norm, transform_inverse, Field, FrequencySymbol, RadialIndex, Rep, TorusGrid, C64,
};

/// Shells with `ρ ≥ ISO_REGIME_C·δ` use the large-ρ envelope.
pub const ISO_REGIME_C: f64 = 8.0;

/// Shell `φ((|ξ|² − ρ)/δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub rho: f64,
    pub delta: f64,
    pub profile: SmoothBump,
}

impl ShellSpec {
    pub fn new(rho: f64, delta: f64, profile: SmoothBump) -> Result<ShellSpec> {
        if !(0.0..=2.0).contains(&rho) {
            return domain(format!("shell centre {rho} outside [0, 2]"));
        }
        if !(delta > 0.0 && delta <= 0.125) {
            return domain(format!("shell width {delta} outside (0, 1/8]"));
        }
        Ok(ShellSpec { rho, delta, profile })
    }

    pub fn value(&self, xi2: f64) -> f64 {
        self.profile.value((xi2 - self.rho) / self.delta)
    }

    /// `[lo, hi]` in `|ξ|²` outside which the symbol vanishes.
    pub fn band(&self) -> (f64, f64) {
        let (a, b) = self.profile.support();
        (self.rho + a * self.delta, self.rho + b * self.delta)
    }

    pub fn symbol(&self) -> FrequencySymbol {
        let s = self.clone();
        FrequencySymbol::radial(move |xi2| s.value(xi2))
    }
}

/// Real values on the grid (square functions and other pointwise outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Pointwise {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl Pointwise {
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let f = Field {
            grid: self.grid,
            data: self.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
            rep: Rep::Spatial,
        };
        lp_norm(&f, p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `(1 − |ξ|²/t²)^α_+` applied to `f`; spatial result.
pub fn bochner_riesz(f: &Field, alpha: f64, t: f64) -> Result<Field> {
    if !(t > 0.0) || !(alpha >= 0.0) {
        return domain(format!("need t > 0 and α ≥ 0, got t = {t}, α = {alpha}"));
    }
    let t2 = t * t;
    let sym = FrequencySymbol::radial(move |xi2| br_symbol(xi2, t2, alpha));
    Ok(crate::spectral::apply_symbol(f, &sym, true))
}

fn br_symbol(xi2: f64, t2: f64, alpha: f64) -> f64 {
    let s = 1.0 - xi2 / t2;
    if s <= 0.0 {
        0.0
    } else if alpha == 0.0 {
        1.0
    } else {
        s.powf(alpha)
    }
}

/// Spectrum of `S f` restricted to the shell band.
fn shell_spectrum(spec_f: &Field, spec: &ShellSpec, out: &mut [C64]) {
    let g = spec_f.grid;
    let ri = RadialIndex::get(&g);
    let (lo, hi) = spec.band();
    for &i in ri.band(&g, lo, hi) {
        let i = i as usize;
        let v = spec_f.data[i];
        if v != zero() {
            out[i] = v * spec.value(g.xi2(i));
        }
    }
}

/// `S_{ρ,δ}^φ f`; spectral unless `to_spatial`.
pub fn shell_op(f: &Field, spec: &ShellSpec, to_spatial: bool) -> Field {
    let sf = f.to_spectral();
    let mut out = Field::zeros(sf.grid, Rep::Spectral);
    shell_spectrum(&sf, spec, &mut out.data);
    if to_spatial {
        out.into_spatial()
    } else {
        out
    }
}

/// Sharp projection onto `ρ − δ ≤ |ξ|² < ρ + δ`.
pub fn shell_projection(f: &Field, rho: f64, delta: f64, to_spatial: bool) -> Field {
    let sf = f.to_spectral();
    let g = sf.grid;
    let ri = RadialIndex::get(&g);
    let mut out = Field::zeros(g, Rep::Spectral);
    for &i in ri.band_half_open(&g, rho - delta, rho + delta) {
        out.data[i as usize] = sf.data[i as usize];
    }
    if to_spatial {
        out.into_spatial()
    } else {
        out
    }
}

/// `Σ_j w_j |F^{-1}(spectrum_j)|²` with spectra produced by `fill`.
/// Items are grouped in fixed blocks so the sum order never depends on the
/// thread count.
fn sum_sq_spatial<F>(grid: TorusGrid, items: usize, weight: impl Fn(usize) -> f64 + Sync, fill: F) -> Vec<f64>
where
    F: Fn(usize, &mut [C64]) + Sync,
{
    const BLOCK: usize = 8;
    let blocks = items.div_ceil(BLOCK);
    let partial: Vec<Vec<f64>> = par::map_range(blocks, |b| {
        let mut acc = vec![0.0; grid.len()];
        let mut buf = vec![zero(); grid.len()];
        for j in (b * BLOCK)..((b + 1) * BLOCK).min(items) {
            buf.iter_mut().for_each(|z| *z = zero());
            fill(j, &mut buf);
            if buf.iter().all(|z| *z == zero()) {
                continue;
            }
            par::sequential(|| inverse_in_place(&mut buf, grid));
            let w = weight(j);
            for (a, z) in acc.iter_mut().zip(&buf) {
                *a += w * z.norm_sqr();
            }
        }
        acc
    });
    let mut total = vec![0.0; grid.len()];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Shell centres `δℤ ∩ [lo, hi]`.
pub fn shell_centres(delta: f64, lo: f64, hi: f64) -> Vec<f64> {
    let a = (lo / delta - 1e-9).ceil() as i64;
    let b = (hi / delta + 1e-9).floor() as i64;
    (a..=b).map(|k| k as f64 * delta).collect()
}

/// `𝔇_δ^φ f = (Σ_{ρ ∈ δℤ ∩ [lo, hi]} |S_{ρ,δ}^φ f|²)^{1/2}`.
pub fn square_discrete(f: &Field, delta: f64, profile: &SmoothBump, range: (f64, f64)) -> Result<Pointwise> {
    let sf = f.to_spectral();
    let rhos = shell_centres(delta, range.0, range.1);
    let specs = rhos
        .iter()
        .map(|&r| ShellSpec::new(r, delta, profile.clone()))
        .collect::<Result<Vec<_>>>()?;
    let s = sum_sq_spatial(sf.grid, specs.len(), |_| 1.0, |j, buf| shell_spectrum(&sf, &specs[j], buf));
    Ok(Pointwise {
        grid: sf.grid,
        values: s.into_iter().map(f64::sqrt).collect(),
    })
}

/// Midpoint nodes on `[a, b]`.
fn midpoints(a: f64, b: f64, nodes: usize) -> (Vec<f64>, f64) {
    let h = (b - a) / nodes as f64;
    ((0..nodes).map(|j| a + (j as f64 + 0.5) * h).collect(), h)
}

#[derive(Debug, Clone)]
pub struct ContinuousSquare {
    pub values: Pointwise,
    pub nodes: usize,
    /// `max|𝔖(2n) − 𝔖(n)| / max 𝔖(2n)` when requested.
    pub doubling_change: Option<f64>,
}

/// `𝔖_δ^φ f = (∫_a^b |S_{t,δ}^φ f|² dt)^{1/2}` by the midpoint rule.
pub fn square_continuous(
    f: &Field,
    delta: f64,
    profile: &SmoothBump,
    t_interval: (f64, f64),
    nodes: usize,
    check_doubling: bool,
) -> Result<ContinuousSquare> {
    let floor = (8.0 / delta).ceil() as usize;
    if nodes < floor {
        return Err(Error::Resolution { nodes, floor });
    }
    let sf = f.to_spectral();
    let run = |n: usize| -> Pointwise {
        let (ts, h) = midpoints(t_interval.0, t_interval.1, n);
        let s = sum_sq_spatial(
            sf.grid,
            ts.len(),
            |_| h,
            |j, buf| {
                let spec = ShellSpec {
                    rho: ts[j],
                    delta,
                    profile: profile.clone(),
                };
                shell_spectrum(&sf, &spec, buf)
            },
        );
        Pointwise {
            grid: sf.grid,
            values: s.into_iter().map(f64::sqrt).collect(),
        }
    };
    let values = run(nodes);
    let doubling_change = if check_doubling {
        let fine = run(2 * nodes);
        let num = fine
            .values
            .iter()
            .zip(&values.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let den = fine.max();
        Some(if den > 0.0 { num / den } else { num })
    } else {
        None
    };
    Ok(ContinuousSquare {
        values,
        nodes,
        doubling_change,
    })
}

/// `t`-derivative of the Bochner–Riesz symbol, bounded for `α > 1`.
pub fn stein_derivative_symbol(xi2: f64, t: f64, alpha: f64) -> f64 {
    let s = 1.0 - xi2 / (t * t);
    if s <= 0.0 {
        0.0
    } else {
        2.0 * alpha * xi2 / (t * t * t) * s.powf(alpha - 1.0)
    }
}

/// `(∫_a^b |∂_t R_t^α f|² t dt)^{1/2}`.
pub fn stein_square(f: &Field, alpha: f64, t_interval: (f64, f64), nodes: usize) -> Result<Pointwise> {
    if !(alpha > 1.0) {
        return domain(format!(
            "α = {alpha}: the t-derivative of (1 − |ξ|²/t²)^α_+ is unbounded at |ξ| = t unless α > 1"
        ));
    }
    let (a, b) = t_interval;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return domain(format!("bad t interval [{a}, {b}]"));
    }
    if nodes == 0 {
        return Err(Error::Resolution { nodes, floor: 1 });
    }
    let sf = f.to_spectral();
    let g = sf.grid;
    let ri = RadialIndex::get(&g);
    let (ts, h) = midpoints(a, b, nodes);
    let s = sum_sq_spatial(
        g,
        ts.len(),
        |j| h * ts[j],
        |j, buf| {
            let t = ts[j];
            for &i in ri.band(&g, 0.0, t * t) {
                let i = i as usize;
                buf[i] = sf.data[i] * stein_derivative_symbol(g.xi2(i), t, alpha);
            }
        },
    );
    Ok(Pointwise {
        grid: g,
        values: s.into_iter().map(f64::sqrt).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// `max(lhs − rhs)` over the grid.
    pub max_violation: f64,
    pub slack: f64,
    /// `max lhs/rhs` over points with `rhs > 0`.
    pub max_ratio: f64,
    pub scale: f64,
    pub holds: bool,
}

/// Compare `𝔇_δ^φ f` with `δ^{−1/2}(𝔖_δ^φ f + 𝔖_δ^{φ'} f)` at every grid point.
pub fn lemma23_pointwise(f: &Field, delta: f64, profile: &SmoothBump, nodes: usize) -> Result<PointwiseReport> {
    let floor = (32.0 / delta).ceil() as usize;
    if nodes < floor {
        return Err(Error::Resolution { nodes, floor });
    }
    let dphi = profile.derivative_profile(1);
    let lhs = square_discrete(f, delta, profile, (0.5, 1.0))?;
    let s0 = square_continuous(f, delta, profile, (0.5, 2.0), nodes, false)?.values;
    let s1 = square_continuous(f, delta, &dphi, (0.5, 2.0), nodes, false)?.values;
    let k = delta.powf(-0.5);
    let rhs: Vec<f64> = s0.values.iter().zip(&s1.values).map(|(a, b)| k * (a + b)).collect();
    let scale = rhs.iter().cloned().fold(0.0, f64::max).max(lhs.max());
    let slack = 1e-6 * scale;
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_ratio: f64 = 0.0;
    for (l, r) in lhs.values.iter().zip(&rhs) {
        max_violation = max_violation.max(l - r);
        if *r > 0.0 {
            max_ratio = max_ratio.max(l / r);
        }
    }
    if lhs.values.is_empty() {
        max_violation = 0.0;
    }
    Ok(PointwiseReport {
        max_violation,
        slack,
        max_ratio,
        scale,
        holds: max_violation <= slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Decay exponent of the envelope.
    pub n_decay: u32,
    /// Largest ℓ¹ fraction of the kernel allowed within two cells of the
    /// torus boundary.
    pub wrap_limit: f64,
    /// Points closer than this many cells to the origin are not fitted.
    pub min_cells: f64,
}

impl KernelOptions {
    pub fn new(d: usize) -> KernelOptions {
        KernelOptions {
            n_decay: d as u32 + 2,
            wrap_limit: DEFAULT_WRAP_LIMIT,
            min_cells: 4.0,
        }
    }
}

pub const DEFAULT_WRAP_LIMIT: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEnvelope {
    /// `isotropic` or `anisotropic`.
    pub lemma: String,
    pub d: usize,
    pub rho: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: u32,
    /// `max |K| / envelope`.
    pub constant: f64,
    pub max_ratio_location: [f64; 2],
    pub wrap_fraction: f64,
    pub warning: Option<String>,
}

impl KernelEnvelope {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// ℓ¹ share of `k` within two cells of the boundary.
pub fn wrap_fraction(k: &Field) -> f64 {
    let g = k.grid;
    let edge = g.n as i64 / 2 - 2;
    let mut total = 0.0;
    let mut rim = 0.0;
    for (i, z) in k.data.iter().enumerate() {
        let m = g.multi_index(i);
        let a = z.norm();
        total += a;
        if m[0].abs() >= edge || (g.d == 2 && m[1].abs() >= edge) {
            rim += a;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        rim / total
    }
}

fn fit_envelope(k: &Field, opts: &KernelOptions, env: impl Fn([f64; 2]) -> f64) -> (f64, [f64; 2]) {
    let g = k.grid;
    let r0 = opts.min_cells * g.dx();
    let mut best = (0.0, [0.0, 0.0]);
    for (i, z) in k.data.iter().enumerate() {
        let x = g.position(i);
        if (x[0] * x[0] + x[1] * x[1]).sqrt() < r0 {
            continue;
        }
        let r = z.norm() / env(x);
        if r > best.0 {
            best = (r, x);
        }
    }
    best
}

/// Isotropic envelope for the shell kernel.
pub fn iso_envelope(x: [f64; 2], d: usize, rho: f64, delta: f64, n: u32) -> f64 {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if rho >= ISO_REGIME_C * delta {
        rho.powf((d as f64 - 2.0) / 2.0) * delta * (1.0 + delta * r / rho.sqrt()).powi(-(n as i32))
    } else {
        delta.powf(d as f64 / 2.0) * (1.0 + delta.sqrt() * r).powi(-(n as i32))
    }
}

/// Anisotropic envelope with axis `ω`.
pub fn aniso_envelope(x: [f64; 2], omega: [f64; 2], rho: f64, delta: f64, n: u32) -> f64 {
    let along = x[0] * omega[0] + x[1] * omega[1];
    let perp = ((x[0] - along * omega[0]).powi(2) + (x[1] - along * omega[1]).powi(2)).sqrt();
    rho.powf(-0.5)
        * delta.powf(1.5)
        * (1.0 + delta.sqrt() * perp + delta / rho.sqrt() * along.abs()).powi(-(n as i32))
}

/// Spatial kernel of a radial-band symbol, evaluated only on its band.
fn band_kernel(grid: TorusGrid, lo: f64, hi: f64, sym: impl Fn(usize) -> f64) -> Field {
    let ri = RadialIndex::get(&grid);
    let mut out = Field::zeros(grid, Rep::Spectral);
    for &i in ri.band(&grid, lo, hi) {
        out.data[i as usize] = C64::new(sym(i as usize), 0.0);
    }
    out.into_spatial()
}

fn check_wrap(k: &Field, opts: &KernelOptions) -> Result<f64> {
    let w = wrap_fraction(k);
    if w > opts.wrap_limit {
        return Err(Error::Wraparound {
            fraction: w,
            limit: opts.wrap_limit,
        });
    }
    Ok(w)
}

/// `K = F^{-1}[φ((|ξ|² − ρ)/δ)]` with its fitted isotropic envelope.
pub fn shell_kernel(spec: &ShellSpec, grid: TorusGrid, opts: &KernelOptions) -> Result<(Field, KernelEnvelope)> {
    if grid.l < 8.0 / spec.delta - 1e-9 {
        return domain(format!("period {} below 8/δ = {}", grid.l, 8.0 / spec.delta));
    }
    let (lo, hi) = spec.band();
    let k = band_kernel(grid, lo, hi, |i| spec.value(grid.xi2(i)));
    let wrap = check_wrap(&k, opts)?;
    let (d, rho, delta, n) = (grid.d, spec.rho, spec.delta, opts.n_decay);
    let (constant, loc) = fit_envelope(&k, opts, |x| iso_envelope(x, d, rho, delta, n));
    Ok((
        k,
        KernelEnvelope {
            lemma: "isotropic".into(),
            d,
            rho,
            delta,
            n,
            constant,
            max_ratio_location: loc,
            wrap_fraction: wrap,
            warning: None,
        },
    ))
}

/// Homogeneous angular partition of unity on the circle with `m` pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularPartition {
    pub m: usize,
}

impl AngularPartition {
    /// Finest partition with spacing at most `l`; `m` is a multiple of 4 so
    /// quarter turns permute the pieces.
    pub fn with_spacing(l: f64) -> Result<AngularPartition> {
        if !(l > 0.0 && l <= std::f64::consts::FRAC_PI_2) {
            return domain(format!("angular spacing {l} outside (0, π/2]"));
        }
        let m = 4 * (2.0 * std::f64::consts::PI / (4.0 * l)).ceil() as usize;
        Ok(AngularPartition { m })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.m as f64
    }

    pub fn direction(&self, j: usize) -> [f64; 2] {
        let th = j as f64 * self.spacing();
        [th.cos(), th.sin()]
    }

    /// `χ_j(ξ)`; depends on the direction of `ξ` only.
    pub fn chi(&self, phi: &SmoothBump, j: usize, xi: [f64; 2]) -> f64 {
        let th = xi[1].atan2(xi[0]);
        let m = self.m as f64;
        let t = (th / self.spacing() - j as f64).rem_euclid(m);
        let t = if t >= m / 2.0 { t - m } else { t };
        phi.value(t)
    }
}

/// Kernel of `φ((|ξ|² − ρ)/δ) χ_j(ξ)` with the anisotropic envelope
/// about `ω_j`.
pub fn angular_shell_kernel(
    spec: &ShellSpec,
    grid: TorusGrid,
    part: &AngularPartition,
    j: usize,
    angular_profile: &SmoothBump,
    opts: &KernelOptions,
) -> Result<(Field, KernelEnvelope)> {
    if grid.d != 2 {
        return domain("angular kernels are two-dimensional");
    }
    let (lo, hi) = spec.band();
    let k = band_kernel(grid, lo, hi, |i| {
        spec.value(grid.xi2(i)) * part.chi(angular_profile, j, grid.frequency(i))
    });
    let wrap = check_wrap(&k, opts)?;
    let omega = part.direction(j);
    let (rho, delta, n) = (spec.rho, spec.delta, opts.n_decay);
    let (constant, loc) = fit_envelope(&k, opts, |x| aniso_envelope(x, omega, rho, delta, n));
    let natural = (delta / rho).sqrt();
    let l = part.spacing();
    let warning = if l > 4.0 * natural || l < natural / 4.0 {
        Some(format!("angular spacing {l} not within a factor 4 of (δ/ρ)^(1/2) = {natural}"))
    } else {
        None
    };
    Ok((
        k,
        KernelEnvelope {
            lemma: "anisotropic".into(),
            d: 2,
            rho,
            delta,
            n,
            constant,
            max_ratio_location: loc,
            wrap_fraction: wrap,
            warning,
        },
    ))
}

/// Second-moment decay length of `|K|` along the line `s ↦ s·u`
/// (`u` a lattice axis direction, given in whole cells).
pub fn slice_decay_length(k: &Field, u: [i64; 2]) -> f64 {
    let g = k.grid;
    let half = g.n as i64 / 2;
    let step = g.dx() * ((u[0] * u[0] + u[1] * u[1]) as f64).sqrt();
    let mut m0 = 0.0;
    let mut m2 = 0.0;
    for s in -half..half {
        let idx = [s * u[0], s * u[1]];
        if idx[0].abs() >= half || idx[1].abs() >= half {
            continue;
        }
        let a = k.data[g.flat_index(idx)].norm_sqr();
        let x = s as f64 * step;
        m0 += a;
        m2 += a * x * x;
    }
    if m0 == 0.0 {
        0.0
    } else {
        (m2 / m0).sqrt()
    }
}

/// `(x, |K|, envelope)` along the first axis, `x ≥ 0`.
pub fn write_kernel_slice(k: &Field, env: &KernelEnvelope, path: &Path, preamble: &[String]) -> Result<()> {
    let g = k.grid;
    let mut rows = Vec::new();
    for s in 0..(g.n as i64 / 2) {
        let x = [s as f64 * g.dx(), 0.0];
        let e = match env.lemma.as_str() {
            "anisotropic" => aniso_envelope(x, [1.0, 0.0], env.rho, env.delta, env.n),
            _ => iso_envelope(x, g.d, env.rho, env.delta, env.n),
        };
        rows.push(vec![
            fmt_g12(x[0]),
            fmt_g12(k.data[g.flat_index([s, 0])].norm()),
            fmt_g12(env.constant * e),
        ]);
    }
    write_csv(path, preamble, &["x", "abs_K", "envelope"], &rows)
}

/// Spatial field from an explicit spectrum function (used by tests and
/// experiments that build witnesses directly in frequency).
pub fn from_spectrum(grid: TorusGrid, f: impl Fn(usize) -> C64 + Sync + Send) -> Field {
    let data = par::map_range(grid.len(), f);
    transform_inverse(&Field {
        grid,
        data,
        rep: Rep::Spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::{partition_phi, standard_bump};
    use crate::spectral::{apply_symbol, random_bandlimited, random_on, spectral_l2, Freq};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn bump() -> SmoothBump {
        standard_bump(-1.0, 1.0).unwrap()
    }

    /// Gauss–Legendre nodes and weights on [−1, 1].
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
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
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    #[test]
    fn bochner_riesz_matches_quadrature() {
        let g = TorusGrid::new(1, 512.0, 4096).unwrap();
        let f = Field::from_fn_spatial(g, |x| C64::new((-PI * x[0] * x[0]).exp(), 0.0));
        let out = bochner_riesz(&f, 1.0, 1.0).unwrap();
        let gl = gauss_legendre(20);
        let panels = 40;
        for s in 0..16 {
            let j = s * 4;
            let x = g.position(j)[0];
            let mut acc = 0.0;
            for p in 0..panels {
                let a = -1.0 + 2.0 * p as f64 / panels as f64;
                let h = 1.0 / panels as f64;
                for &(t, w) in &gl {
                    let xi = a + h * (t + 1.0);
                    acc += w * h * (1.0 - xi * xi) * (-PI * xi * xi).exp() * (2.0 * PI * x * xi).cos();
                }
            }
            assert!((out.data[j].re - acc).abs() < 1e-6, "x={x}: {} vs {acc}", out.data[j].re);
            assert!(out.data[j].im.abs() < 1e-9);
        }
    }

    #[test]
    fn bochner_riesz_trivia() {
        let g = TorusGrid::new(2, 16.0, 64).unwrap();
        let outer = random_on(g, 1, |q| q.xi2 >= 1.0).unwrap();
        assert!(bochner_riesz(&outer, 0.7, 1.0).unwrap().max_abs() == 0.0);
        let inner = random_on(g, 2, |q| q.xi2 < 0.8).unwrap();
        let same = bochner_riesz(&inner, 0.0, 1.0).unwrap();
        assert!(same.rel_diff(&inner.to_spatial()) < 1e-14);
        assert!(bochner_riesz(&inner, 1.0, 0.0).is_err());
    }

    #[test]
    fn shell_support_and_composition() {
        let g = TorusGrid::for_delta(2, 1.0 / 16.0, 2.0).unwrap();
        let f = random_bandlimited(g, 1.4, 3).unwrap();
        let spec = ShellSpec::new(1.0, 1.0 / 16.0, bump()).unwrap();
        let s = shell_op(&f, &spec, false);
        for i in 0..g.len() {
            if (g.xi2(i) - 1.0).abs() > 1.0 / 16.0 {
                assert_eq!(s.data[i], zero());
            }
        }
        let other = ShellSpec::new(1.0 + 3.0 / 16.0, 1.0 / 16.0, bump()).unwrap();
        assert!(shell_op(&s, &other, true).max_abs() == 0.0);
        let away = random_on(g, 4, |q| q.xi2 < 0.5).unwrap();
        assert!(shell_op(&away, &spec, true).max_abs() == 0.0);
    }

    #[test]
    fn shell_of_flat_spectrum_is_kernel() {
        let g = TorusGrid::for_delta(1, 1.0 / 8.0, 2.0).unwrap();
        let one = Field {
            grid: g,
            data: vec![C64::new(1.0, 0.0); g.len()],
            rep: Rep::Spectral,
        };
        let spec = ShellSpec::new(0.75, 0.125, bump()).unwrap();
        let a = shell_op(&one, &spec, true);
        let (k, _) = shell_kernel(&spec, g, &KernelOptions::new(1)).unwrap();
        assert!(a.rel_diff(&k) < 1e-14);
    }

    #[test]
    fn projection_properties() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
        let f = random_bandlimited(g, 1.2, 5).unwrap();
        let p = shell_projection(&f, 0.75, delta, false);
        assert_eq!(shell_projection(&p, 0.75, delta, false), p);
        // S P = S for profiles supported in [−1, 1]
        let spec = ShellSpec::new(0.75, delta, bump()).unwrap();
        let a = shell_op(&p, &spec, false);
        let b = shell_op(&f, &spec, false);
        assert!(a.rel_diff(&b) == 0.0);
    }

    #[test]
    fn overlap_bound_hits_boundary_lattice_points() {
        // L = 8/δ puts lattice points exactly on shell edges.
        let delta = 1.0 / 8.0;
        let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
        let f = random_bandlimited(g, 1.1, 6).unwrap();
        let total: f64 = shell_centres(delta, 0.5, 1.0)
            .iter()
            .map(|&r| spectral_l2(&shell_projection(&f, r, delta, false)).powi(2))
            .sum();
        assert!(total <= 2.0 * spectral_l2(&f).powi(2));
    }

    #[test]
    fn scaling_identity_on_lattice() {
        let g = TorusGrid::new(2, 64.0, 256).unwrap();
        let phi = bump();
        let (rho, delta) = (0.8, 1.0 / 16.0);
        for lambda in [0.5, 2f64.sqrt(), 3.0] {
            let l2 = lambda * lambda;
            for i in 0..g.len() {
                let xi2 = g.xi2(i);
                let a = phi.value((xi2 - rho) / delta);
                let b = phi.value((l2 * xi2 - l2 * rho) / (l2 * delta));
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn kernel_basics() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
        let spec = ShellSpec::new(1.0, delta, bump()).unwrap();
        let (k, env) = shell_kernel(&spec, g, &KernelOptions::new(2)).unwrap();
        // symbol vanishes at the origin frequency
        let integral: C64 = k.data.iter().sum::<C64>() * g.cell_volume();
        assert!(integral.norm() < 1e-12);
        for i in 0..g.len() {
            let m = g.multi_index(i);
            let j = g.flat_index([-m[0], -m[1]]);
            assert!((k.data[i] - k.data[j]).norm() <= 1e-12 * env.constant.max(1.0));
        }
        assert!(env.constant.is_finite() && env.constant > 0.0);
        let short = TorusGrid::new(2, 32.0, 256).unwrap();
        assert!(shell_kernel(&spec, short, &KernelOptions::new(2)).is_err());
    }

    #[test]
    fn isotropic_constant_is_stable() {
        let opts = KernelOptions::new(2);
        let c = |delta: f64| {
            let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
            let spec = ShellSpec::new(1.0, delta, bump()).unwrap();
            shell_kernel(&spec, g, &opts).unwrap().1.constant
        };
        let (a, b) = (c(1.0 / 16.0), c(1.0 / 32.0));
        assert!(a / b <= 2.0 && b / a <= 2.0, "{a} {b}");
    }

    #[test]
    fn wraparound_is_detected() {
        // L well below 8/δ with a sharp profile leaves mass at the rim.
        let g = TorusGrid::new(1, 64.0, 512).unwrap();
        let spec = ShellSpec::new(1.0, 1.0 / 64.0, bump()).unwrap();
        let k = band_kernel(g, spec.band().0, spec.band().1, |i| spec.value(g.xi2(i)));
        assert!(check_wrap(&k, &KernelOptions::new(1)).is_err());
    }

    #[test]
    fn angular_partition_reconstructs_shell() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
        let spec = ShellSpec::new(1.0, delta, bump()).unwrap();
        let part = AngularPartition::with_spacing(delta.sqrt()).unwrap();
        let phi = partition_phi();
        let mut opts = KernelOptions::new(2);
        opts.wrap_limit = 1.0;
        let (full, _) = shell_kernel(&spec, g, &opts).unwrap();
        let mut sum = Field::zeros(g, Rep::Spatial);
        for j in 0..part.m {
            let (k, env) = angular_shell_kernel(&spec, g, &part, j, &phi, &opts).unwrap();
            assert!(env.warning.is_none());
            for (s, v) in sum.data.iter_mut().zip(&k.data) {
                *s += v;
            }
        }
        assert!(sum.rel_diff(&full) < 1e-8);
    }

    #[test]
    fn quarter_turn_covariance() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
        let spec = ShellSpec::new(1.0, delta, bump()).unwrap();
        let part = AngularPartition::with_spacing(delta.sqrt()).unwrap();
        let phi = partition_phi();
        let mut opts = KernelOptions::new(2);
        opts.wrap_limit = 1.0;
        let (k0, _) = angular_shell_kernel(&spec, g, &part, 1, &phi, &opts).unwrap();
        let (k1, _) = angular_shell_kernel(&spec, g, &part, 1 + part.m / 4, &phi, &opts).unwrap();
        // R(x0, x1) = (−x1, x0)
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let m = g.multi_index(i);
            let j = g.flat_index([-m[1], m[0]]);
            worst = worst.max((k1.data[j] - k0.data[i]).norm());
        }
        assert!(worst <= 1e-8 * k0.max_abs());
    }

    #[test]
    fn anisotropy_ratio() {
        let delta = 1.0 / 64.0;
        let g = TorusGrid::for_delta(2, delta, 1.0).unwrap();
        let spec = ShellSpec::new(1.0, delta, bump()).unwrap();
        let part = AngularPartition::with_spacing(delta.sqrt()).unwrap();
        let phi = partition_phi();
        let mut opts = KernelOptions::new(2);
        opts.wrap_limit = 1.0;
        let (k, _) = angular_shell_kernel(&spec, g, &part, 0, &phi, &opts).unwrap();
        let along = slice_decay_length(&k, [1, 0]);
        let across = slice_decay_length(&k, [0, 1]);
        let want = delta.powf(-0.5);
        let ratio = along / across;
        assert!(ratio <= 4.0 * want && ratio >= want / 4.0, "{ratio} vs {want}");
    }

    #[test]
    fn discrete_square_examples() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(1, delta, 2.0).unwrap();
        // narrow profile: neighbouring shells at ρ ± δ do not reach the spectrum
        let phi = partition_phi();
        let f = random_on(g, 7, |q: &Freq| (q.xi2 - 0.75).abs() < 0.25 * delta).unwrap();
        let d = square_discrete(&f, delta, &phi, (0.5, 1.0)).unwrap();
        let single = shell_op(&f, &ShellSpec::new(0.75, delta, phi.clone()).unwrap(), true);
        for (a, z) in d.values.iter().zip(&single.data) {
            assert!((a - z.norm()).abs() <= 1e-14 * single.max_abs());
        }

        let r = random_bandlimited(g, 1.3, 8).unwrap();
        let half = square_discrete(&r, delta, &phi, (0.5, 1.0)).unwrap();
        let full = square_discrete(&r, delta, &phi, (0.0, 1.0)).unwrap();
        assert!(half.values.iter().zip(&full.values).all(|(a, b)| a <= b));
        let lhs = half.lp_norm(2.0).unwrap().powi(2);
        let sup = phi.sup_abs();
        assert!(lhs <= 2.0 * sup * sup * lp_norm(&r, 2.0).unwrap().powi(2) * (1.0 + 1e-12));
    }

    #[test]
    fn continuous_square_examples() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(1, delta, 2.0).unwrap();
        let phi = bump();
        let low = random_on(g, 1, |q| q.xi2 < 0.3).unwrap();
        let z = square_continuous(&low, delta, &phi, (0.5, 2.0), 128, false).unwrap();
        assert_eq!(z.values.max(), 0.0);
        assert!(square_continuous(&low, delta, &phi, (0.5, 2.0), 100, false).is_err());
        // spectrum well inside the t-window
        let mid = random_on(g, 2, |q| (q.xi2 - 1.2).abs() < 0.2).unwrap();
        let s = square_continuous(&mid, delta, &phi, (0.5, 2.0), (16.0 / delta) as usize, true).unwrap();
        assert!(s.doubling_change.unwrap() <= 1e-4);
        // single frequency pair: 𝔖² = δ ∫φ² · |f̂|² contribution
        let one = random_on(g, 3, |q| q.xi[0] == 1.0).unwrap();
        let s1 = square_continuous(&one, delta, &phi, (0.5, 2.0), 512, false).unwrap();
        let x = one.to_spatial();
        let int_phi2: f64 = (0..20000)
            .map(|i| {
                let t = -1.0 + 2.0 * (i as f64 + 0.5) / 20000.0;
                phi.value(t).powi(2)
            })
            .sum::<f64>()
            * 2.0
            / 20000.0;
        for j in [0usize, 17, 300] {
            let want = (delta * int_phi2).sqrt() * x.data[j].norm();
            assert_relative_eq!(s1.values.values[j], want, max_relative = 0.2);
        }
    }

    #[test]
    fn l2_square_function_bound() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(1, delta, 2.0).unwrap();
        let phi = bump();
        for seed in 0..4 {
            let f = random_bandlimited(g, 1.5, seed).unwrap();
            let s = square_continuous(&f, delta, &phi, (0.5, 2.0), 256, false).unwrap();
            let c = s.values.lp_norm(2.0).unwrap() / (delta.sqrt() * lp_norm(&f, 2.0).unwrap());
            assert!(c <= 4.0, "{c}");
        }
    }

    #[test]
    fn stein_square_examples() {
        let g = TorusGrid::new(1, 64.0, 512).unwrap();
        let hi = random_on(g, 1, |q| q.xi2 > 4.0 && q.xi2 < 9.0).unwrap();
        assert_eq!(stein_square(&hi, 1.5, (0.5, 2.0), 64).unwrap().max(), 0.0);
        assert!(stein_square(&hi, 1.0, (0.5, 2.0), 64).is_err());
        // derivative symbol vs finite differences of the means
        let f = random_bandlimited(g, 1.8, 2).unwrap();
        let (alpha, t, h) = (1.5, 1.3, 1e-4);
        let up = bochner_riesz(&f, alpha, t + h).unwrap();
        let dn = bochner_riesz(&f, alpha, t - h).unwrap();
        let sym = FrequencySymbol::radial(move |xi2| stein_derivative_symbol(xi2, t, alpha));
        let exact = apply_symbol(&f, &sym, true);
        let mut fd = up.clone();
        for (o, (a, b)) in fd.data.iter_mut().zip(up.data.iter().zip(&dn.data)) {
            *o = (a - b) / (2.0 * h);
        }
        assert!(fd.rel_diff(&exact) <= 1e-4);
    }

    #[test]
    fn stein_symbol_scaling() {
        // ∂_t m(|λξ|, λt)·λ = ∂_t m(|ξ|, t)
        let lambda2: f64 = 2.0;
        let lambda = lambda2.sqrt();
        let g = TorusGrid::new(2, 32.0, 128).unwrap();
        for i in 0..g.len() {
            let xi2 = g.xi2(i);
            for t in [0.6, 1.1, 1.9] {
                let a = stein_derivative_symbol(xi2, t, 1.7);
                let b = lambda * stein_derivative_symbol(lambda2 * xi2, lambda * t, 1.7);
                assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn lemma23_examples() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(1, delta, 2.0).unwrap();
        let phi = bump();
        let zero_f = Field::zeros(g, Rep::Spectral);
        let r = lemma23_pointwise(&zero_f, delta, &phi, 512).unwrap();
        assert!(r.holds && r.scale == 0.0);
        let one = random_on(g, 3, |q| (q.xi2 - 0.75).abs() < 0.01).unwrap();
        let r = lemma23_pointwise(&one, delta, &phi, 512).unwrap();
        assert!(r.holds && r.max_ratio <= 1.0);
        assert!(lemma23_pointwise(&one, delta, &phi, 100).is_err());
    }

    #[test]
    fn sequential_matches_parallel() {
        let delta = 1.0 / 16.0;
        let g = TorusGrid::for_delta(1, delta, 2.0).unwrap();
        let f = random_bandlimited(g, 1.5, 9).unwrap();
        let a = square_discrete(&f, delta, &bump(), (0.0, 1.0)).unwrap();
        let b = par::sequential(|| square_discrete(&f, delta, &bump(), (0.0, 1.0)).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn overlap_bound(seed in 0u64..10_000, radius in 0.5..1.4f64) {
            let delta = 1.0 / 16.0;
            let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
            let f = random_bandlimited(g, radius, seed).unwrap();
            let total: f64 = shell_centres(delta, 0.5, 1.0)
                .iter()
                .map(|&r| spectral_l2(&shell_projection(&f, r, delta, false)).powi(2))
                .sum();
            prop_assert!(total <= 2.0 * spectral_l2(&f).powi(2));
        }

        #[test]
        fn shell_output_stays_in_shell(seed in 0u64..10_000, rho in 0.2..1.8f64) {
            let delta = 1.0 / 8.0;
            let g = TorusGrid::for_delta(2, delta, 2.0).unwrap();
            let f = random_bandlimited(g, 1.9, seed).unwrap();
            let s = shell_op(&f, &ShellSpec::new(rho, delta, bump()).unwrap(), false);
            for i in 0..g.len() {
                if (g.xi2(i) - rho).abs() > delta {
                    prop_assert_eq!(s.data[i], zero());
                }
            }
        }
    }
}
