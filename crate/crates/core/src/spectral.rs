//! Periodic grids, fields and Fourier transforms.
//!
//! Conventions: `f̂(ξ) = ∫ e^{−2πix·ξ} f(x) dx`. Samples are stored in FFT
//! order; position index `j` stands for `x = j·L/N` wrapped into
//! `[−L/2, L/2)`, frequency index `k` for `ξ = k/L` wrapped into
//! `[−N/(2L), N/(2L))`. The forward transform is `(L/N)^d` times the DFT,
//! the inverse is `L^{−d}` times the unnormalized inverse DFT, so spectral
//! samples approximate continuum integrals and Plancherel reads
//! `(L/N)^d Σ|f|² = L^{−d} Σ|f̂|²`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par;

pub type C64 = Complex64;

/// Periodic grid on `[−L/2, L/2)^d` with `N` samples per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub d: usize,
    pub l: f64,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, l: f64, n: usize) -> Result<TorusGrid> {
        if d != 1 && d != 2 {
            return domain(format!("dimension {d} not supported (1 or 2)"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return domain(format!("period must be positive, got {l}"));
        }
        if n < 2 || !n.is_power_of_two() {
            return domain(format!("samples per axis must be a power of two, got {n}"));
        }
        Ok(TorusGrid { d, l, n })
    }

    /// Grid for width-`δ` experiments: `L = 8/δ` (spacing `δ/8`) and
    /// Nyquist band at least `nyquist`.
    pub fn for_delta(d: usize, delta: f64, nyquist: f64) -> Result<TorusGrid> {
        let l = 8.0 / delta;
        let n = ((2.0 * nyquist * l).ceil() as usize).next_power_of_two();
        TorusGrid::new(d, l, n)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn dk(&self) -> f64 {
        1.0 / self.l
    }

    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.l)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// Weight of one frequency cell, `L^{−d}`.
    pub fn spectral_weight(&self) -> f64 {
        self.l.powi(-(self.d as i32))
    }

    /// Signed integer index for FFT position `j`.
    pub fn wrap(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j >= n / 2 {
            j - n
        } else {
            j
        }
    }

    /// FFT position of a signed integer index.
    pub fn unwrap_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Per-axis signed indices of flat index `i` (second entry 0 when d = 1).
    pub fn multi_index(&self, i: usize) -> [i64; 2] {
        if self.d == 1 {
            [self.wrap(i), 0]
        } else {
            [self.wrap(i / self.n), self.wrap(i % self.n)]
        }
    }

    pub fn flat_index(&self, k: [i64; 2]) -> usize {
        if self.d == 1 {
            self.unwrap_index(k[0])
        } else {
            self.unwrap_index(k[0]) * self.n + self.unwrap_index(k[1])
        }
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        let k = self.multi_index(i);
        [k[0] as f64 * self.dx(), k[1] as f64 * self.dx()]
    }

    pub fn frequency(&self, i: usize) -> [f64; 2] {
        let k = self.multi_index(i);
        [k[0] as f64 / self.l, k[1] as f64 / self.l]
    }

    /// `|k|²` for flat index `i`; `|ξ|² = |k|²/L²`.
    pub fn k2(&self, i: usize) -> u64 {
        let k = self.multi_index(i);
        (k[0] * k[0] + k[1] * k[1]) as u64
    }

    pub fn xi2(&self, i: usize) -> f64 {
        self.k2(i) as f64 / (self.l * self.l)
    }

    pub fn same_as(&self, o: &TorusGrid) -> Result<()> {
        if self != o {
            return Err(Error::GridMismatch(format!("{self:?} vs {o:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rep {
    Spatial,
    Spectral,
}

/// Complex samples on a grid, in one of the two representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: TorusGrid,
    pub data: Vec<C64>,
    pub rep: Rep,
}

impl Field {
    pub fn zeros(grid: TorusGrid, rep: Rep) -> Field {
        Field {
            grid,
            data: vec![C64::new(0.0, 0.0); grid.len()],
            rep,
        }
    }

    pub fn from_fn_spatial(grid: TorusGrid, f: impl Fn([f64; 2]) -> C64 + Sync + Send) -> Field {
        Field {
            grid,
            data: par::map_range(grid.len(), |i| f(grid.position(i))),
            rep: Rep::Spatial,
        }
    }

    pub fn from_fn_spectral(grid: TorusGrid, f: impl Fn([f64; 2]) -> C64 + Sync + Send) -> Field {
        Field {
            grid,
            data: par::map_range(grid.len(), |i| f(grid.frequency(i))),
            rep: Rep::Spectral,
        }
    }

    pub fn to_spectral(&self) -> Field {
        match self.rep {
            Rep::Spectral => self.clone(),
            Rep::Spatial => transform_forward(self),
        }
    }

    pub fn to_spatial(&self) -> Field {
        match self.rep {
            Rep::Spatial => self.clone(),
            Rep::Spectral => transform_inverse(self),
        }
    }

    pub fn into_spatial(self) -> Field {
        match self.rep {
            Rep::Spatial => self,
            Rep::Spectral => transform_inverse(&self),
        }
    }

    /// Cyclic shift by whole cells: `out(x) = self(x − s·dx)`.
    pub fn roll(&self, shift: [i64; 2]) -> Field {
        let g = self.grid;
        let data = par::map_range(g.len(), |i| {
            let k = g.multi_index(i);
            self.data[g.flat_index([k[0] - shift[0], k[1] - shift[1]])]
        });
        Field {
            grid: g,
            data,
            rep: self.rep,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Pointwise product of two spatial fields.
    pub fn mul_pointwise(&self, o: &Field) -> Result<Field> {
        self.grid.same_as(&o.grid)?;
        if self.rep != Rep::Spatial || o.rep != Rep::Spatial {
            return domain("pointwise product needs spatial fields");
        }
        Ok(Field {
            grid: self.grid,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a * b).collect(),
            rep: Rep::Spatial,
        })
    }

    /// Largest `|a − b|` relative to the largest `|b|`.
    pub fn rel_diff(&self, o: &Field) -> f64 {
        let num = self
            .data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let den = o.max_abs().max(self.max_abs());
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if forward {
        p.plan_fft_forward(n)
    } else {
        p.plan_fft_inverse(n)
    }
}

fn fft_rows(data: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    let rows = data.len() / n;
    let per_task = (rows / 64).max(1);
    par::for_chunks_mut(data, per_task * n, |_, chunk| {
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for row in chunk.chunks_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
    });
}

fn transpose(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Raw DFT in place (unscaled).
pub fn dft_in_place(data: &mut [C64], d: usize, n: usize, forward: bool) {
    let fft = plan(n, forward);
    fft_rows(data, n, &fft);
    if d == 2 {
        transpose(data, n);
        fft_rows(data, n, &fft);
        transpose(data, n);
    }
}

pub fn transform_forward(f: &Field) -> Field {
    let g = f.grid;
    let mut data = f.data.clone();
    dft_in_place(&mut data, g.d, g.n, true);
    let s = g.cell_volume();
    data.iter_mut().for_each(|z| *z *= s);
    Field {
        grid: g,
        data,
        rep: Rep::Spectral,
    }
}

pub fn transform_inverse(f: &Field) -> Field {
    let g = f.grid;
    let mut data = f.data.clone();
    inverse_in_place(&mut data, g);
    Field {
        grid: g,
        data,
        rep: Rep::Spatial,
    }
}

/// Spectral samples to spatial samples in place.
pub fn inverse_in_place(data: &mut [C64], g: TorusGrid) {
    dft_in_place(data, g.d, g.n, false);
    let s = g.spectral_weight();
    data.iter_mut().for_each(|z| *z *= s);
}

/// `(Σ_cells |f|^p dx^d)^{1/p}`, `p = ∞` for the max; `0 < p < 1` allowed.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("p must be positive, got {p}"));
    }
    let spatial;
    let f = if f.rep == Rep::Spatial {
        f
    } else {
        spatial = f.to_spatial();
        &spatial
    };
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    Ok((sum_abs_pow(&f.data, p) * f.grid.cell_volume()).powf(1.0 / p))
}

/// Deterministic `Σ |z|^p` (fixed blocks, pairwise combination).
pub fn sum_abs_pow(data: &[C64], p: f64) -> f64 {
    const BLOCK: usize = 4096;
    let nb = data.len().div_ceil(BLOCK);
    let parts = par::map_range(nb, |b| {
        let s = &data[b * BLOCK..((b + 1) * BLOCK).min(data.len())];
        if p == 2.0 {
            s.iter().map(|z| z.norm_sqr()).sum::<f64>()
        } else if p == 1.0 {
            s.iter().map(|z| z.norm()).sum::<f64>()
        } else {
            s.iter().map(|z| z.norm().powf(p)).sum::<f64>()
        }
    });
    par::pairwise_sum(&parts)
}

/// `‖f̂‖₂` with the lattice weight `L^{−d}`.
pub fn spectral_l2(f: &Field) -> f64 {
    let s = if f.rep == Rep::Spectral {
        sum_abs_pow(&f.data, 2.0)
    } else {
        sum_abs_pow(&f.to_spectral().data, 2.0)
    };
    (s * f.grid.spectral_weight()).sqrt()
}

/// Lattice frequency handed to symbol evaluators.
#[derive(Debug, Clone, Copy)]
pub struct Freq {
    pub xi: [f64; 2],
    pub xi2: f64,
}

type SymbolFn = dyn Fn(&Freq) -> C64 + Send + Sync;
type SupportFn = dyn Fn(&Freq) -> bool + Send + Sync;

/// A multiplier on the frequency lattice.
#[derive(Clone)]
pub struct FrequencySymbol {
    eval: Arc<SymbolFn>,
    support: Option<Arc<SupportFn>>,
}

impl std::fmt::Debug for FrequencySymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FrequencySymbol")
    }
}

impl FrequencySymbol {
    pub fn new(f: impl Fn(&Freq) -> C64 + Send + Sync + 'static) -> FrequencySymbol {
        FrequencySymbol {
            eval: Arc::new(f),
            support: None,
        }
    }

    /// Real symbol depending on `|ξ|²` only.
    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FrequencySymbol {
        FrequencySymbol::new(move |q: &Freq| C64::new(f(q.xi2), 0.0))
    }

    pub fn with_support(mut self, s: impl Fn(&Freq) -> bool + Send + Sync + 'static) -> FrequencySymbol {
        self.support = Some(Arc::new(s));
        self
    }

    pub fn one() -> FrequencySymbol {
        FrequencySymbol::radial(|_| 1.0)
    }

    pub fn eval(&self, q: &Freq) -> C64 {
        if let Some(s) = &self.support {
            if !s(q) {
                return C64::new(0.0, 0.0);
            }
        }
        (self.eval)(q)
    }

    pub fn at(&self, g: &TorusGrid, i: usize) -> C64 {
        self.eval(&Freq {
            xi: g.frequency(i),
            xi2: g.xi2(i),
        })
    }
}

/// Multiply the spectrum by `symbol`; the result is spectral unless
/// `to_spatial` is set.
pub fn apply_symbol(f: &Field, symbol: &FrequencySymbol, to_spatial: bool) -> Field {
    let spec = f.to_spectral();
    let g = spec.grid;
    let data = par::map_range(g.len(), |i| {
        let v = spec.data[i];
        if v == C64::new(0.0, 0.0) {
            v
        } else {
            v * symbol.at(&g, i)
        }
    });
    let out = Field {
        grid: g,
        data,
        rep: Rep::Spectral,
    };
    if to_spatial {
        out.into_spatial()
    } else {
        out
    }
}

/// I.i.d. standard complex Gaussian coefficients on `|ξ| ≤ radius`.
pub fn random_bandlimited(grid: TorusGrid, radius: f64, seed: u64) -> Result<Field> {
    if radius > grid.nyquist() {
        return domain(format!(
            "radius {radius} beyond the Nyquist band {}",
            grid.nyquist()
        ));
    }
    let r2 = radius * radius;
    random_on(grid, seed, |q| q.xi2 <= r2 * (1.0 + 1e-12))
}

/// I.i.d. standard complex Gaussian coefficients where `keep` holds.
pub fn random_on(grid: TorusGrid, seed: u64, keep: impl Fn(&Freq) -> bool) -> Result<Field> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(grid, Rep::Spectral);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..grid.len() {
        let q = Freq {
            xi: grid.frequency(i),
            xi2: grid.xi2(i),
        };
        if keep(&q) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            f.data[i] = C64::new(re * s, im * s);
        }
    }
    Ok(f)
}

/// Lattice points sorted by `|k|²`; depends on `(d, N)` only.
#[derive(Debug)]
pub struct RadialIndex {
    pub k2: Vec<u64>,
    pub idx: Vec<u32>,
}

impl RadialIndex {
    pub fn get(grid: &TorusGrid) -> Arc<RadialIndex> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<RadialIndex>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (grid.d, grid.n);
        if let Some(r) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return r.clone();
        }
        let mut pairs: Vec<(u64, u32)> = (0..grid.len()).map(|i| (grid.k2(i), i as u32)).collect();
        pairs.sort_unstable();
        let r = Arc::new(RadialIndex {
            k2: pairs.iter().map(|p| p.0).collect(),
            idx: pairs.iter().map(|p| p.1).collect(),
        });
        let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
        if c.len() > 6 {
            c.clear();
        }
        c.insert(key, r.clone());
        r
    }

    /// Flat indices with `lo ≤ |ξ|² ≤ hi` (given in `|ξ|²` units).
    pub fn band(&self, grid: &TorusGrid, lo: f64, hi: f64) -> &[u32] {
        let l2 = grid.l * grid.l;
        let klo = (lo * l2).ceil().max(0.0);
        let khi = (hi * l2).floor();
        if khi < klo {
            return &[];
        }
        let a = self.k2.partition_point(|&k| (k as f64) < klo);
        let b = self.k2.partition_point(|&k| (k as f64) <= khi);
        &self.idx[a..b]
    }

    /// Flat indices with `lo ≤ |ξ|² < hi`.
    pub fn band_half_open(&self, grid: &TorusGrid, lo: f64, hi: f64) -> &[u32] {
        let l2 = grid.l * grid.l;
        let klo = (lo * l2).ceil().max(0.0);
        let khi = hi * l2;
        let a = self.k2.partition_point(|&k| (k as f64) < klo);
        let b = self.k2.partition_point(|&k| (k as f64) < khi);
        if b < a {
            return &[];
        }
        &self.idx[a..b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub tag: String,
    pub seed: Option<u64>,
}

/// Little-endian complex64 (two `f32`) samples plus `<path>.json`.
pub fn write_snapshot(f: &Field, path: &Path, seed: Option<u64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(f.data.len() * 8);
    for z in &f.data {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let meta = SnapshotMeta {
        d: f.grid.d,
        l: f.grid.l,
        n: f.grid.n,
        tag: match f.rep {
            Rep::Spatial => "spatial".into(),
            Rep::Spectral => "spectral".into(),
        },
        seed,
    };
    crate::io::write_json(&sidecar(path), &meta)
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotMeta)> {
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|source| Error::Io {
        path: side.clone(),
        source,
    })?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|source| Error::Json { path: side, source })?;
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let grid = TorusGrid::new(meta.d, meta.l, meta.n)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::GridMismatch(format!(
            "{} bytes for {} samples",
            bytes.len(),
            grid.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(re as f64, im as f64)
        })
        .collect();
    let rep = if meta.tag == "spectral" {
        Rep::Spectral
    } else {
        Rep::Spatial
    };
    Ok((Field { grid, data, rep }, meta))
}
