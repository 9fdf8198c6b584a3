//! Lower bounds on `L^p × L^q → L^r` norms of the dyadic bilinear pieces.
//!
//! Every witness is a pair of finitely supported spectra on the lattice
//! `ℤ^d / L`, `L = 8/δ`. `T(f, g)` is summed exactly over support pairs. The
//! three fields are then sampled on a small "window" torus: each spectrum is
//! shifted to the origin first. A shift only multiplies a field by a
//! character, so every `L^p` norm is unchanged. A witness with `n` spectral
//! points therefore costs `n_f n_g` pair operations plus three FFTs of the
//! window size, however small δ is.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{fit_power_law, ScalingFit};
use crate::bump::{dyadic_psi, partition_phi, smooth_step, SmoothBump};
use crate::error::{domain, Error, Result};
use crate::exponents::{alpha_nu, Lp};
use crate::io::{fmt_g12, write_csv, write_json};
use crate::linear::shell_centres;
use crate::par;
use crate::spectral::{lp_norm, Field, Rep, TorusGrid, C64};

/// Torus length for shell width δ.
pub fn period_for(delta: f64) -> f64 {
    8.0 / delta
}

/// Largest window side for `d = 2`.
pub const WINDOW_CAP_2D: usize = 2048;
/// Largest window side for `d = 1`.
pub const WINDOW_CAP_1D: usize = 1 << 20;
/// Pair operations allowed for one witness evaluation.
pub const WITNESS_PAIR_BUDGET: u128 = 1 << 31;
/// Random restarts of the local search family.
pub const RESTARTS: usize = 32;
/// Consecutive rejected moves after which the local search stops early.
const STALL: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum BilinearOp {
    /// `ψ((1 − |ξ|² − |η|²)/δ)`.
    Btilde { delta: f64, psi: SmoothBump },
    /// `Σ_{ρ ∈ δℤ∩[0,1]} φ1((|ξ|² − ρ)/δ) φ2((|η|² − (ϱ − ρ))/δ)`.
    ShellProduct {
        delta: f64,
        varrho: f64,
        phi1: SmoothBump,
        phi2: SmoothBump,
    },
    /// Symbol identically zero.
    Null { delta: f64 },
}

impl BilinearOp {
    /// `B̃_δ` built from the dyadic ψ of order α.
    pub fn btilde(delta: f64, alpha: f64) -> Result<BilinearOp> {
        check_delta(delta)?;
        Ok(BilinearOp::Btilde {
            delta,
            psi: dyadic_psi(alpha)?,
        })
    }

    /// `B_{δ,ϱ}` with `φ1 = φ2 =` the partition profile.
    pub fn shell_product(delta: f64, varrho: f64) -> Result<BilinearOp> {
        check_delta(delta)?;
        if !(0.5..=2.0).contains(&varrho) {
            return domain(format!("ϱ = {varrho} outside [1/2, 2]"));
        }
        Ok(BilinearOp::ShellProduct {
            delta,
            varrho,
            phi1: partition_phi(),
            phi2: partition_phi(),
        })
    }

    pub fn delta(&self) -> f64 {
        match self {
            BilinearOp::Btilde { delta, .. } | BilinearOp::ShellProduct { delta, .. } | BilinearOp::Null { delta } => *delta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BilinearOp::Btilde { .. } => "btilde_delta",
            BilinearOp::ShellProduct { .. } => "bilinear_shell_product",
            BilinearOp::Null { .. } => "null",
        }
    }

    /// Centre of the symbol support in `|ξ|² + |η|²`.
    pub fn target_sum(&self) -> f64 {
        match self {
            BilinearOp::Btilde { delta, psi } => {
                let (a, b) = psi.support();
                1.0 - 0.5 * (a + b) * delta
            }
            BilinearOp::ShellProduct { varrho, .. } => *varrho,
            BilinearOp::Null { .. } => 1.0,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.125) {
        return domain(format!("δ = {delta} outside (0, 1/8]"));
    }
    Ok(())
}

/// An exponent triple `(p, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub p: Lp,
    pub q: Lp,
    pub r: Lp,
}

impl Triple {
    pub fn new(p: Lp, q: Lp, r: Lp) -> Triple {
        Triple { p, q, r }
    }

    /// `(p, q)` with the Hölder exponent `1/r = 1/p + 1/q`.
    pub fn holder(p: Lp, q: Lp) -> Triple {
        Triple {
            p,
            q,
            r: Lp::from_inv(p.inv() + q.inv()),
        }
    }

    pub fn label(&self) -> String {
        format!("({},{},{})", self.p, self.q, self.r)
    }
}

fn as_f64(p: Lp) -> f64 {
    match p {
        Lp::Finite(v) => v,
        Lp::Inf => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub op: String,
    pub d: usize,
    pub delta: f64,
    pub exponents: Triple,
    /// Best ratio `‖T(f,g)‖_r / (‖f‖_p ‖g‖_q)` found; a lower bound on the norm.
    pub value: f64,
    pub family: String,
    pub witness: String,
    pub seed: u64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// A finitely supported spectrum: lattice indices and coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sparse {
    pub pts: Vec<[i64; 2]>,
    pub coef: Vec<C64>,
}

impl Sparse {
    pub fn ones(pts: Vec<[i64; 2]>) -> Sparse {
        let coef = vec![C64::new(1.0, 0.0); pts.len()];
        Sparse { pts, coef }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    fn bounds(&self, d: usize) -> ([i64; 2], [i64; 2]) {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for k in &self.pts {
            for a in 0..d {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
        }
        if d == 1 {
            lo[1] = 0;
            hi[1] = 0;
        }
        (lo, hi)
    }
}

fn k2(k: &[i64; 2]) -> u64 {
    (k[0] * k[0] + k[1] * k[1]) as u64
}

/// Per-point slice of the shell sum: `values[t]` belongs to `ρ = (j0 + t) δ`.
#[derive(Debug, Clone)]
struct ShellPart {
    j0: i64,
    values: Vec<f64>,
}

fn shell_part(xi2: f64, delta: f64, jmax: i64, profile: &SmoothBump, centre_of: impl Fn(i64) -> f64, j_range: (f64, f64)) -> ShellPart {
    let lo = j_range.0.floor().max(0.0) as i64;
    let hi = (j_range.1.ceil() as i64).min(jmax);
    let mut values = Vec::new();
    let mut j0 = lo;
    for j in lo..=hi {
        let v = profile.value((xi2 - centre_of(j)) / delta);
        if values.is_empty() && v == 0.0 {
            j0 = j + 1;
            continue;
        }
        values.push(v);
    }
    while values.last() == Some(&0.0) {
        values.pop();
    }
    ShellPart { j0, values }
}

struct Entry {
    col: usize,
    val: C64,
    n: u64,
    part: Option<ShellPart>,
}

/// The three window fields of one witness.
pub struct Evaluated {
    pub f: Field,
    pub g: Field,
    pub t: Field,
}

impl Evaluated {
    pub fn ratio(&self, e: &Triple) -> Result<f64> {
        let nf = lp_norm(&self.f, as_f64(e.p))?;
        let ng = lp_norm(&self.g, as_f64(e.q))?;
        if nf == 0.0 || ng == 0.0 {
            return Ok(0.0);
        }
        Ok(lp_norm(&self.t, as_f64(e.r))? / (nf * ng))
    }
}

/// Window side for a support extent `ext`: twice oversampled when it fits.
fn window_side(ext: i64, d: usize) -> Result<usize> {
    let cap = if d == 1 { WINDOW_CAP_1D } else { WINDOW_CAP_2D };
    let need = (ext + 1) as usize;
    let m = (2 * need).next_power_of_two().max(16);
    if m <= cap {
        return Ok(m);
    }
    let m = need.next_power_of_two();
    if m <= cap {
        Ok(m)
    } else {
        domain(format!("witness support of extent {ext} needs a window above {cap}"))
    }
}

/// Exact `T(f, g)` for a sparse pair, sampled on a shifted window torus.
pub fn evaluate_witness(op: &BilinearOp, d: usize, f: &Sparse, g: &Sparse) -> Result<Evaluated> {
    if !(d == 1 || d == 2) {
        return domain(format!("d = {d} not supported"));
    }
    let l = period_for(op.delta());
    if f.is_empty() || g.is_empty() {
        return domain("witness with empty support");
    }
    let pairs = f.len() as u128 * g.len() as u128;
    if pairs > WITNESS_PAIR_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: pairs,
            budget: WITNESS_PAIR_BUDGET,
        });
    }
    let (flo, fhi) = f.bounds(d);
    let (glo, ghi) = g.bounds(d);
    let ext = (0..d).map(|a| (fhi[a] - flo[a]) + (ghi[a] - glo[a])).max().unwrap_or(0);
    let m = window_side(ext, d)?;
    let grid = TorusGrid::new(d, l, m)?;
    let cf = [(flo[0] + fhi[0]).div_euclid(2), (flo[1] + fhi[1]).div_euclid(2)];
    let cg = [(glo[0] + ghi[0]).div_euclid(2), (glo[1] + ghi[1]).div_euclid(2)];
    let mi = m as i64;
    let place = |k: &[i64; 2], c: &[i64; 2]| -> (usize, usize) {
        let r = (k[0] - c[0]).rem_euclid(mi) as usize;
        let col = if d == 1 { 0 } else { (k[1] - c[1]).rem_euclid(mi) as usize };
        (r, col)
    };
    let nc = if d == 1 { 1 } else { m };
    let window = |s: &Sparse, c: &[i64; 2]| -> Field {
        let mut fld = Field::zeros(grid, Rep::Spectral);
        for (k, v) in s.pts.iter().zip(&s.coef) {
            let (r, col) = place(k, c);
            fld.data[r * nc + col] += *v;
        }
        fld.into_spatial()
    };
    let fw = window(f, &cf);
    let gw = window(g, &cg);

    let zero = C64::new(0.0, 0.0);
    let mut acc = vec![zero; grid.len()];
    if !matches!(op, BilinearOp::Null { .. }) {
        let l2 = l * l;
        let delta = op.delta();
        let jmax = (1.0 / delta + 1e-9).floor() as i64;
        let build = |s: &Sparse, c: &[i64; 2], first: bool| -> Vec<Vec<Entry>> {
            let mut rows: Vec<Vec<Entry>> = (0..m).map(|_| Vec::new()).collect();
            for (k, v) in s.pts.iter().zip(&s.coef) {
                if *v == zero {
                    continue;
                }
                let (r, col) = place(k, c);
                let n = k2(k);
                let part = match op {
                    BilinearOp::ShellProduct { varrho, phi1, phi2, .. } => {
                        let a = n as f64 / l2;
                        Some(if first {
                            let (lo, hi) = phi1.support();
                            shell_part(a, delta, jmax, phi1, |j| j as f64 * delta, (a / delta - hi, a / delta - lo))
                        } else {
                            let (lo, hi) = phi2.support();
                            let u = (a - varrho) / delta;
                            shell_part(a, delta, jmax, phi2, |j| varrho - j as f64 * delta, (lo - u, hi - u))
                        })
                    }
                    _ => None,
                };
                rows[r].push(Entry { col, val: *v, n, part });
            }
            rows
        };
        let fr = build(f, &cf, true);
        let gr = build(g, &cg, false);
        let table: Vec<f64> = match op {
            BilinearOp::Btilde { delta, psi } => {
                let nmax = f.pts.iter().map(k2).max().unwrap_or(0) + g.pts.iter().map(k2).max().unwrap_or(0);
                (0..=nmax).map(|n| psi.value((1.0 - n as f64 / l2) / delta)).collect()
            }
            _ => Vec::new(),
        };
        let live: Vec<usize> = (0..m).filter(|&r| !fr[r].is_empty()).collect();
        par::for_chunks_mut(&mut acc, nc, |z0, row| {
            for &rf in &live {
                let rg = (z0 + m - rf) % m;
                let ys = &gr[rg];
                if ys.is_empty() {
                    continue;
                }
                for x in &fr[rf] {
                    for y in ys {
                        let s = match (&x.part, &y.part) {
                            (Some(a), Some(b)) => overlap(a, b),
                            _ => table[(x.n + y.n) as usize],
                        };
                        if s != 0.0 {
                            row[(x.col + y.col) % nc] += x.val * y.val * s;
                        }
                    }
                }
            }
        });
    }
    let w = grid.spectral_weight();
    acc.iter_mut().for_each(|z| *z *= w);
    let t = Field {
        grid,
        data: acc,
        rep: Rep::Spectral,
    }
    .into_spatial();
    Ok(Evaluated { f: fw, g: gw, t })
}

fn overlap(a: &ShellPart, b: &ShellPart) -> f64 {
    let lo = a.j0.max(b.j0);
    let hi = (a.j0 + a.values.len() as i64).min(b.j0 + b.values.len() as i64);
    let mut s = 0.0;
    for j in lo..hi {
        s += a.values[(j - a.j0) as usize] * b.values[(j - b.j0) as usize];
    }
    s
}

// ---------------------------------------------------------------- witnesses

/// Lattice points with `|k/L|² ∈ [a_lo, a_hi]`, optionally within
/// `half_angle` of the direction `dir`.
pub fn annular_sector(d: usize, l: f64, a_lo: f64, a_hi: f64, dir: [f64; 2], half_angle: Option<f64>) -> Vec<[i64; 2]> {
    let a_lo = a_lo.max(0.0);
    let r_hi = a_hi.max(0.0).sqrt() * l;
    let rr_lo = a_lo * l * l;
    let rr_hi = a_hi * l * l;
    let mut out = Vec::new();
    if d == 1 {
        let top = r_hi.ceil() as i64;
        for k in -top..=top {
            let kk = (k * k) as f64;
            if kk < rr_lo || kk > rr_hi {
                continue;
            }
            if half_angle.is_some() && (k as f64) * dir[0] <= 0.0 {
                continue;
            }
            out.push([k, 0]);
        }
        return out;
    }
    let (x0, x1, y0, y1) = match half_angle {
        None => (-r_hi, r_hi, -r_hi, r_hi),
        Some(h) => {
            // bounding box of the sector from its boundary
            let th = dir[1].atan2(dir[0]);
            let r_lo = a_lo.sqrt() * l;
            let mut b = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for i in 0..=64 {
                let t = th - h + 2.0 * h * i as f64 / 64.0;
                for r in [r_lo, r_hi] {
                    let (x, y) = (r * t.cos(), r * t.sin());
                    b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
                }
            }
            b
        }
    };
    let cos_h = half_angle.map(|h| h.cos());
    for kx in (x0.floor() as i64 - 1)..=(x1.ceil() as i64 + 1) {
        for ky in (y0.floor() as i64 - 1)..=(y1.ceil() as i64 + 1) {
            let kk = (kx * kx + ky * ky) as f64;
            if kk < rr_lo || kk > rr_hi || kk == 0.0 {
                continue;
            }
            if let Some(c) = cos_h {
                if (kx as f64 * dir[0] + ky as f64 * dir[1]) < c * kk.sqrt() {
                    continue;
                }
            }
            out.push([kx, ky]);
        }
    }
    out
}

/// Lattice points in the plate `|(ξ − ξ0)·ω| ≤ t/2`, `|(ξ − ξ0)·ω⊥| ≤ w/2`.
pub fn plate(d: usize, l: f64, centre: [f64; 2], dir: [f64; 2], t: f64, w: f64) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    let reach = (t + w) * l;
    let (cx, cy) = (centre[0] * l, centre[1] * l);
    let ys = if d == 1 { 0..=0 } else { (cy - reach).floor() as i64..=(cy + reach).ceil() as i64 };
    for kx in (cx - reach).floor() as i64..=(cx + reach).ceil() as i64 {
        for ky in ys.clone() {
            let (ux, uy) = (kx as f64 / l - centre[0], ky as f64 / l - centre[1]);
            let along = ux * dir[0] + uy * dir[1];
            let across = -ux * dir[1] + uy * dir[0];
            if along.abs() <= 0.5 * t && across.abs() <= 0.5 * w {
                out.push([kx, ky]);
            }
        }
    }
    out
}

fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn neg(v: [f64; 2]) -> [f64; 2] {
    [-v[0], -v[1]]
}

/// A named deterministic witness.
pub struct Witness {
    pub family: &'static str,
    pub label: String,
    pub f: Sparse,
    pub g: Sparse,
}

/// Directions used by the deterministic families (one lattice-aligned, one generic).
const ANGLES: [f64; 2] = [0.0, 0.3];

/// Antipodal caps: `f̂` on a cap around `ω`, `ĝ` on the cap around `−ω`, both
/// at `|ξ|² ≈ |η|² ≈ s*/2` so that `ξ = −η` meets the symbol support.
pub fn antipodal_caps(op: &BilinearOp, d: usize) -> Vec<Witness> {
    let delta = op.delta();
    let l = period_for(delta);
    let a0 = 0.5 * op.target_sum();
    let mut out = Vec::new();
    let angles: &[f64] = if d == 1 { &[0.0] } else { &ANGLES };
    for &th in angles {
        for wa in [0.5, 1.0, 2.0] {
            for wr in [0.25, 0.5, 1.0] {
                let h = 0.5 * wa * delta.sqrt();
                let (lo, hi) = (a0 - 0.5 * wr * delta, a0 + 0.5 * wr * delta);
                let f = annular_sector(d, l, lo, hi, unit(th), Some(h));
                let g = annular_sector(d, l, lo, hi, neg(unit(th)), Some(h));
                if f.is_empty() || g.is_empty() {
                    continue;
                }
                out.push(Witness {
                    family: "antipodal_caps",
                    label: format!("theta={th} width={wa}*sqrt(delta) thickness={wr}*delta"),
                    f: Sparse::ones(f),
                    g: Sparse::ones(g),
                });
                if d == 1 {
                    break;
                }
            }
        }
    }
    out
}

/// Full shells: `f̂ = 1` near `|ξ|² = s*/2`, `ĝ = 1` near `|η|² = s*/2`.
pub fn focusing_shells(op: &BilinearOp, d: usize) -> Vec<Witness> {
    let delta = op.delta();
    let l = period_for(delta);
    let a0 = 0.5 * op.target_sum();
    [0.25, 0.5]
        .iter()
        .filter_map(|&wr| {
            let (lo, hi) = (a0 - 0.5 * wr * delta, a0 + 0.5 * wr * delta);
            let f = annular_sector(d, l, lo, hi, [1.0, 0.0], None);
            let g = f.clone();
            if f.is_empty() {
                return None;
            }
            Some(Witness {
                family: "focusing",
                label: format!("full shell thickness={wr}*delta"),
                f: Sparse::ones(f),
                g: Sparse::ones(g),
            })
        })
        .collect()
}

/// Knapp plates `δ^{1/2} × δ` (scaled by `c`) at `±ξ0`, `|ξ0|² = s*/2`.
pub fn knapp_plates(op: &BilinearOp, d: usize) -> Vec<Witness> {
    let delta = op.delta();
    let l = period_for(delta);
    let r0 = (0.5 * op.target_sum()).sqrt();
    let mut out = Vec::new();
    let angles: &[f64] = if d == 1 { &[0.0] } else { &ANGLES };
    for &th in angles {
        for c in [0.5, 1.0, 2.0] {
            let w = unit(th);
            let xi0 = [r0 * w[0], r0 * w[1]];
            let t = c * delta;
            let wid = if d == 1 { 0.0 } else { c * delta.sqrt() };
            let f = plate(d, l, xi0, w, t, wid);
            let g = plate(d, l, neg(xi0), w, t, wid);
            if f.is_empty() || g.is_empty() {
                continue;
            }
            out.push(Witness {
                family: "knapp_plates",
                label: format!("theta={th} scale={c}"),
                f: Sparse::ones(f),
                g: Sparse::ones(g),
            });
        }
    }
    out
}

/// `splitmix64`, used to derive independent seeds from a master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random coefficients on a random annular window and a near-antipodal partner.
fn random_window(op: &BilinearOp, d: usize, rng: &mut ChaCha8Rng) -> Witness {
    let delta = op.delta();
    let l = period_for(delta);
    let s = op.target_sum();
    loop {
        let th = rng.random::<f64>() * std::f64::consts::TAU;
        let wa = 0.5 + 1.5 * rng.random::<f64>();
        let wr = 0.25 + 0.75 * rng.random::<f64>();
        let split = 0.35 + 0.3 * rng.random::<f64>();
        let tilt = (rng.random::<f64>() - 0.5) * delta.sqrt();
        let h = 0.5 * wa * delta.sqrt();
        let (a0, b0) = (split * s, (1.0 - split) * s);
        let fpts = annular_sector(d, l, a0 - 0.5 * wr * delta, a0 + 0.5 * wr * delta, unit(th), Some(h));
        let gpts = annular_sector(d, l, b0 - 0.5 * wr * delta, b0 + 0.5 * wr * delta, neg(unit(th + tilt)), Some(h));
        if fpts.is_empty() || gpts.is_empty() {
            continue;
        }
        let fc = fpts.iter().map(|_| gaussian(rng)).collect();
        let gc = gpts.iter().map(|_| gaussian(rng)).collect();
        return Witness {
            family: "random_windows",
            label: format!("theta={th:.4} width={wa:.3}*sqrt(delta) thickness={wr:.3}*delta split={split:.3}"),
            f: Sparse { pts: fpts, coef: fc },
            g: Sparse { pts: gpts, coef: gc },
        };
    }
}

// ---------------------------------------------------------------- estimates

struct Best {
    value: f64,
    family: String,
    witness: String,
}

impl Best {
    fn new() -> Best {
        Best {
            value: 0.0,
            family: "none".into(),
            witness: String::new(),
        }
    }

    fn offer(&mut self, v: f64, family: &str, witness: &str) {
        if v > self.value {
            self.value = v;
            self.family = family.into();
            self.witness = witness.into();
        }
    }
}

/// Random restarts followed by coordinate-wise phase moves on the best start.
/// Returns (ratio, label, evaluations, exhausted).
fn local_search(op: &BilinearOp, d: usize, e: &Triple, budget: usize, seed: u64) -> Result<(f64, String, usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evals = 0;
    let mut best: Option<(f64, Witness)> = None;
    for _ in 0..RESTARTS.min(budget) {
        let w = random_window(op, d, &mut rng);
        let v = evaluate_witness(op, d, &w.f, &w.g)?.ratio(e)?;
        evals += 1;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, w));
        }
    }
    let Some((mut value, mut w)) = best else {
        return Ok((0.0, String::new(), evals, true));
    };
    let mut stall = 0;
    let phases = [C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    while evals < budget && stall < STALL {
        let on_f = rng.random::<bool>();
        let side = if on_f { &mut w.f } else { &mut w.g };
        let i = rng.random_range(0..side.len());
        let ph = phases[rng.random_range(0..3)];
        let old = side.coef[i];
        side.coef[i] = old * ph;
        let v = evaluate_witness(op, d, &w.f, &w.g)?.ratio(e)?;
        evals += 1;
        if v > value {
            value = v;
            stall = 0;
        } else {
            let side = if on_f { &mut w.f } else { &mut w.g };
            side.coef[i] = old;
            stall += 1;
        }
    }
    Ok((value, w.label, evals, stall < STALL))
}

/// Norm estimates for several exponent triples at once; the deterministic
/// families are evaluated once and shared, the local search runs per triple.
pub fn estimate_bilinear_norms(op: &BilinearOp, d: usize, triples: &[Triple], budget: usize, seed: u64) -> Result<Vec<NormEstimate>> {
    let mut bests: Vec<Best> = triples.iter().map(|_| Best::new()).collect();
    let mut evals = 0;
    if !matches!(op, BilinearOp::Null { .. }) {
        let mut fixed = antipodal_caps(op, d);
        fixed.extend(knapp_plates(op, d));
        fixed.extend(focusing_shells(op, d));
        for w in &fixed {
            let ev = match evaluate_witness(op, d, &w.f, &w.g) {
                Ok(ev) => ev,
                // a support too large for the window is skipped, not fatal
                Err(Error::BudgetExceeded { .. }) | Err(Error::Domain(_)) => continue,
                Err(e) => return Err(e),
            };
            evals += 1;
            for (b, e) in bests.iter_mut().zip(triples) {
                b.offer(ev.ratio(e)?, w.family, &w.label);
            }
        }
        if let BilinearOp::ShellProduct { .. } = op {
            for (b, e) in bests.iter_mut().zip(triples) {
                if e.p.is_inf() && e.q.is_inf() && e.r.is_inf() {
                    let v = unimodular_focus_at_origin(op, d)?;
                    evals += 1;
                    b.offer(v, "focusing", "unimodular shell focus, |T(f,g)(0)|");
                }
            }
        }
    }
    let mut out = Vec::with_capacity(triples.len());
    for (i, (b, e)) in bests.into_iter().zip(triples).enumerate() {
        let mut b = b;
        let mut n = evals;
        let mut exhausted = false;
        if !matches!(op, BilinearOp::Null { .. }) && budget > 0 {
            let (v, label, k, ex) = local_search(op, d, e, budget, derive_seed(seed, i as u64))?;
            b.offer(v, "random_windows", &label);
            n += k;
            exhausted = ex;
        }
        out.push(NormEstimate {
            op: op.name().into(),
            d,
            delta: op.delta(),
            exponents: *e,
            value: b.value,
            family: b.family,
            witness: b.witness,
            seed,
            evaluations: n,
            budget_exhausted: exhausted,
        });
    }
    Ok(out)
}

pub fn estimate_bilinear_norm(op: &BilinearOp, d: usize, e: Triple, budget: usize, seed: u64) -> Result<NormEstimate> {
    Ok(estimate_bilinear_norms(op, d, &[e], budget, seed)?.remove(0))
}

/// `|B_{δ,ϱ}(f, g)(0)| / (‖f‖_∞ ‖g‖_∞)` for `f = F/|F|`, `F` the focus of
/// the shell `ρ0 = ϱ/2` (and likewise `g`). Sampled on the full `L = 8/δ` grid.
pub fn unimodular_focus_at_origin(op: &BilinearOp, d: usize) -> Result<f64> {
    let BilinearOp::ShellProduct { delta, varrho, phi1, phi2 } = op else {
        return domain("unimodular focus needs the shell product");
    };
    let (delta, varrho) = (*delta, *varrho);
    let grid = TorusGrid::for_delta(d, delta, varrho.sqrt() + 0.05)?;
    let rho0 = 0.5 * varrho;
    let unimodular = |phi: &SmoothBump| -> Field {
        let focus = Field::from_fn_spectral(grid, |xi| {
            let a = xi[0] * xi[0] + xi[1] * xi[1];
            C64::new(phi.value((a - rho0) / delta), 0.0)
        })
        .into_spatial();
        let mut u = focus;
        for z in u.data.iter_mut() {
            let m = z.norm();
            *z = if m > 0.0 { *z / m } else { C64::new(1.0, 0.0) };
        }
        u.to_spectral()
    };
    // radial sums: F[n] = Σ_{|k|² = n} f̂(k)
    let radial = |s: &Field| -> BTreeMap<u64, C64> {
        let mut m = BTreeMap::new();
        let top = ((varrho + 2.0 * delta) * grid.l * grid.l).ceil() as u64;
        for (i, v) in s.data.iter().enumerate() {
            let n = grid.k2(i);
            if n <= top {
                *m.entry(n).or_insert(C64::new(0.0, 0.0)) += v;
            }
        }
        m
    };
    let fr = radial(&unimodular(phi1));
    let gr = radial(&unimodular(phi2));
    let w = grid.spectral_weight();
    let l2 = grid.l * grid.l;
    let at0 = |rad: &BTreeMap<u64, C64>, phi: &SmoothBump, c: f64| -> C64 {
        let (lo, hi) = phi.support();
        let a = ((c + lo * delta).max(0.0) * l2).floor() as u64;
        let b = ((c + hi * delta) * l2).ceil() as u64;
        rad.range(a..=b).map(|(n, v)| v * phi.value((*n as f64 / l2 - c) / delta)).sum::<C64>() * w
    };
    let t0: C64 = shell_centres(delta, 0.0, 1.0)
        .into_iter()
        .map(|rho| at0(&fr, phi1, rho) * at0(&gr, phi2, varrho - rho))
        .sum();
    // |f| = |g| = 1 at every sample
    Ok(t0.norm())
}

// ------------------------------------------------------------- κ floor

/// Radial profile of the floor witness: 1 on `|ξ| ≤ 3`, 0 beyond 4.
fn floor_profile(r: f64) -> f64 {
    1.0 - smooth_step(r - 3.0)
}

/// `‖f‖₁` for `f̂ = floor_profile(|ξ|)`; `f` does not depend on δ.
pub fn floor_witness_l1(d: usize, l: f64) -> Result<f64> {
    let n = ((8.0 * l).ceil() as usize).next_power_of_two();
    let grid = TorusGrid::new(d, l, n)?;
    let f = Field::from_fn_spectral(grid, |xi| C64::new(floor_profile((xi[0] * xi[0] + xi[1] * xi[1]).sqrt()), 0.0));
    lp_norm(&f, 1.0)
}

/// Length of the torus used for `‖f‖₁` of the floor witness.
pub const FLOOR_L1_PERIOD: f64 = 64.0;

/// `L¹ × L¹ → L^∞` lower bound `|B_{δ,ϱ}(f, f)(0)| / ‖f‖₁²` with `f̂ = 1` on
/// the symbol support (the floor witness). `T(f,f)(0)` is the lattice sum of
/// the symbol on the `L = 8/δ` torus.
pub fn kappa_floor_estimate(op: &BilinearOp, d: usize) -> Result<NormEstimate> {
    let BilinearOp::ShellProduct { delta, varrho, phi1, phi2 } = op else {
        return domain("κ floor witness needs the shell product");
    };
    let (delta, varrho) = (*delta, *varrho);
    let l = period_for(delta);
    let l2 = l * l;
    let top = ((varrho + 2.0 * delta) * l2).ceil() as u64;
    // multiplicities of |k|² = n on the lattice
    let mut mult = vec![0u64; top as usize + 1];
    let kmax = (top as f64).sqrt().ceil() as i64;
    for kx in -kmax..=kmax {
        if d == 1 {
            let n = (kx * kx) as u64;
            if n <= top {
                mult[n as usize] += 1;
            }
            continue;
        }
        for ky in -kmax..=kmax {
            let n = (kx * kx + ky * ky) as u64;
            if n <= top {
                mult[n as usize] += 1;
            }
        }
    }
    let w = l.powi(-(d as i32));
    let shell_sum = |phi: &SmoothBump, c: f64| -> f64 {
        let (lo, hi) = phi.support();
        let a = ((c + lo * delta).max(0.0) * l2).floor() as usize;
        let b = (((c + hi * delta) * l2).ceil() as usize).min(top as usize);
        (a..=b)
            .map(|n| {
                let r = (n as f64 / l2).sqrt();
                mult[n] as f64 * phi.value((n as f64 / l2 - c) / delta) * floor_profile(r)
            })
            .sum::<f64>()
            * w
    };
    let t0: f64 = shell_centres(delta, 0.0, 1.0)
        .into_iter()
        .map(|rho| shell_sum(phi1, rho) * shell_sum(phi2, varrho - rho))
        .sum();
    let n1 = floor_witness_l1(d, FLOOR_L1_PERIOD)?;
    Ok(NormEstimate {
        op: op.name().into(),
        d,
        delta,
        exponents: Triple::new(Lp::Finite(1.0), Lp::Finite(1.0), Lp::Inf),
        value: t0.abs() / (n1 * n1),
        family: "floor".into(),
        witness: "f̂ = ĝ = 1 on B(0,3), smooth cutoff to B(0,4); evaluated at x = 0".into(),
        seed: 0,
        evaluations: 1,
        budget_exhausted: false,
    })
}

// ------------------------------------------------------------- scans

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OpFamily {
    /// `B̃_δ` with the dyadic ψ of order α.
    Btilde { alpha: f64 },
    /// `B_{δ,ϱ}` with the partition profile on both sides.
    ShellProduct { varrho: f64 },
}

impl OpFamily {
    pub fn at(&self, delta: f64) -> Result<BilinearOp> {
        match *self {
            OpFamily::Btilde { alpha } => BilinearOp::btilde(delta, alpha),
            OpFamily::ShellProduct { varrho } => BilinearOp::shell_product(delta, varrho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub exponents: Triple,
    pub estimates: Vec<NormEstimate>,
    /// Fit of `log estimate` against `log δ`; the slope is `−κ_emp`.
    pub fit: ScalingFit,
}

impl ScanOutcome {
    pub fn kappa_emp(&self) -> f64 {
        -self.fit.slope
    }
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.len() < super::MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: super::MIN_FIT_POINTS,
            got: deltas.len(),
        });
    }
    for &dl in deltas {
        let k = -dl.log2();
        if !(dl > 0.0) || (k - k.round()).abs() > 1e-12 {
            return domain(format!("δ = {dl} is not a power of 2"));
        }
        check_delta(dl)?;
    }
    Ok(())
}

/// Estimates for every δ and triple, then one log–log fit per triple.
pub fn delta_scaling_scan(family: OpFamily, d: usize, triples: &[Triple], deltas: &[f64], budget: usize, seed: u64) -> Result<Vec<ScanOutcome>> {
    check_deltas(deltas)?;
    let mut per_delta = Vec::with_capacity(deltas.len());
    for (i, &dl) in deltas.iter().enumerate() {
        let op = family.at(dl)?;
        per_delta.push(estimate_bilinear_norms(&op, d, triples, budget, derive_seed(seed, 1000 + i as u64))?);
    }
    let mut out = Vec::with_capacity(triples.len());
    for (j, e) in triples.iter().enumerate() {
        let estimates: Vec<NormEstimate> = per_delta.iter().map(|v| v[j].clone()).collect();
        let pts: Vec<(f64, f64)> = estimates.iter().map(|x| (x.delta.ln(), x.value.ln())).collect();
        let mut fit = fit_power_law(&pts)?;
        fit.reliable = estimates.iter().all(|x| x.value > 0.0);
        out.push(ScanOutcome {
            exponents: *e,
            estimates,
            fit,
        });
    }
    Ok(out)
}

/// Theorem ceiling on κ for a triple: `α_ν(1/p, 1/q)` at the default ν.
pub fn theory_kappa(e: &Triple, nu: f64, d: u32) -> Result<f64> {
    Ok(alpha_nu(e.p.inv(), e.q.inv(), nu, d)?.alpha)
}

/// CSV columns `delta, norm_estimate, family, seed`.
pub fn write_scan_csv(o: &ScanOutcome, path: &Path, preamble: &[String]) -> Result<()> {
    let rows: Vec<Vec<String>> = o
        .estimates
        .iter()
        .map(|e| vec![fmt_g12(e.delta), fmt_g12(e.value), e.family.clone(), e.seed.to_string()])
        .collect();
    write_csv(path, preamble, &["delta", "norm_estimate", "family", "seed"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub exponents: Triple,
    pub slope: f64,
    pub residual: f64,
    /// Ceiling on `κ = −slope`.
    pub theory_bound: f64,
    pub tolerance: f64,
    /// `−slope ≤ theory_bound + tolerance`; empirical norms only bound from below.
    pub verdict: bool,
    /// Estimates whose local search ran out of budget.
    pub budget_exhausted: usize,
    pub reliable: bool,
    pub config_sha256: String,
}

pub fn write_scan_json(s: &ScanSummary, path: &Path) -> Result<()> {
    write_json(path, s)
}
