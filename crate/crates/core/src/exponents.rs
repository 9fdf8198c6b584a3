//! Exponent functions and region maps.
//!
//! Everything here is closed-form arithmetic on reciprocal exponents
//! `u = 1/p`, `v = 1/q`. Infinite exponents are carried by [`Lp::Inf`],
//! whose reciprocal is exactly zero.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::{fmt_g12, write_text};

/// A Lebesgue exponent in `(0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lp {
    Finite(f64),
    Inf,
}

impl Lp {
    pub fn inv(self) -> f64 {
        match self {
            Lp::Finite(p) => 1.0 / p,
            Lp::Inf => 0.0,
        }
    }

    pub fn from_inv(u: f64) -> Lp {
        if u == 0.0 {
            Lp::Inf
        } else {
            Lp::Finite(1.0 / u)
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Lp::Inf)
    }
}

impl fmt::Display for Lp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lp::Finite(p) => write!(f, "{p}"),
            Lp::Inf => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Lp {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Lp::Inf),
            t => {
                let p: f64 = t.parse().map_err(|_| format!("bad exponent {t:?}"))?;
                if p > 0.0 && p.is_finite() {
                    Ok(Lp::Finite(p))
                } else if p == f64::INFINITY {
                    Ok(Lp::Inf)
                } else {
                    Err(format!("exponent must be positive, got {t}"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Delta1,
    Delta2,
    Delta3,
}

impl Region {
    pub fn tag(self) -> &'static str {
        match self {
            Region::Delta1 => "D1",
            Region::Delta2 => "D2",
            Region::Delta3 => "D3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    pub region: Region,
    pub alpha: f64,
    pub beta_u: f64,
    pub beta_v: f64,
}

/// `β_*(u) = (d−1)/2 − u d`.
pub fn beta_star(u: f64, d: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u = {u} outside [0,1]"));
    }
    if d < 1 {
        return domain("d must be at least 1");
    }
    Ok(beta_raw(u, d))
}

fn beta_raw(u: f64, d: u32) -> f64 {
    let d = d as f64;
    (d - 1.0) / 2.0 - u * d
}

fn check_square(u: f64, v: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&u) || !(0.0..=0.5).contains(&v) {
        return domain(format!("(u, v) = ({u}, {v}) outside [0,1/2]^2"));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu < 0.5) {
        return domain(format!("nu = {nu} outside (0, 1/2)"));
    }
    Ok(())
}

/// Region containing `(u, v)`. The corner `(ν, ν)` goes to `Delta1`.
pub fn classify_region(u: f64, v: f64, nu: f64) -> Result<Region> {
    check_square(u, v)?;
    check_nu(nu)?;
    Ok(if u <= nu && v <= nu {
        Region::Delta1
    } else if u >= nu && v >= nu {
        Region::Delta2
    } else {
        Region::Delta3
    })
}

pub fn alpha_nu(u: f64, v: f64, nu: f64, d: u32) -> Result<ExponentResult> {
    if d < 2 {
        return domain("alpha_nu needs d >= 2");
    }
    let region = classify_region(u, v, nu)?;
    let bu = beta_raw(u, d);
    let bv = beta_raw(v, d);
    let bn = beta_raw(nu, d);
    let alpha = match region {
        Region::Delta1 => (d as f64 - 1.0) - d as f64 * (u + v),
        Region::Delta2 => (2.0 - 2.0 * u - 2.0 * v) / (1.0 - 2.0 * nu) * bn,
        Region::Delta3 => {
            let w = ((1.0 - 2.0 * u) / (1.0 - 2.0 * nu)).min((1.0 - 2.0 * v) / (1.0 - 2.0 * nu));
            bu.max(bv) + bn * w
        }
    };
    Ok(ExponentResult {
        region,
        alpha,
        beta_u: bu,
        beta_v: bv,
    })
}

/// `(p_0(d), p_s(d))`. `p_0(2)` is `+∞`.
pub fn p_thresholds(d: u32) -> Result<(f64, f64)> {
    if d < 2 {
        return domain("p thresholds need d >= 2");
    }
    let k = (d % 3) as i64;
    let den = 4 * d as i64 - 6 - k;
    let p0 = if den == 0 {
        f64::INFINITY
    } else {
        2.0 + 12.0 / den as f64
    };
    let df = d as f64;
    Ok((p0, p0.min(2.0 * (df + 2.0) / df)))
}

/// `1/p_s(d)`, the default ν.
pub fn nu_default(d: u32) -> Result<f64> {
    Ok(1.0 / p_thresholds(d)?.1)
}

/// The sub-Hölder exponent `γ(p, q, r)`.
pub fn gamma_subcritical(p: Lp, q: Lp, r: Lp, d: u32) -> Result<f64> {
    if d < 2 {
        return domain("gamma needs d >= 2");
    }
    let (u, v, w) = (p.inv(), q.inv(), r.inv());
    if u > 0.5 || v > 0.5 {
        return domain("p, q must lie in [2, ∞]");
    }
    let df = d as f64;
    if u + v < w {
        return domain(format!("1/p + 1/q = {} < 1/r = {w}", u + v));
    }
    let inv_r1 = (df - 1.0) / (2.0 * (df + 1.0));
    let inv_r2 = (df - 2.0) / (2.0 * df);
    let base = beta_raw(u, d) + beta_raw(v, d);
    if w <= inv_r1 + inv_r2 {
        Ok(base)
    } else if w <= 2.0 * inv_r1 {
        Ok(base - (df * df - df - 1.0) / (2.0 * (df + 1.0)) + df * w / 2.0)
    } else {
        Err(Error::OutsideRange(format!(
            "1/r = {w} exceeds 2/r1 = {}",
            2.0 * inv_r1
        )))
    }
}

/// Lower bound on admissible α from the stationary-phase construction.
pub fn necessary_alpha(p: Lp, q: Lp, d: u32) -> f64 {
    let (u, v) = (p.inv(), q.inv());
    let df = d as f64;
    let a = (df - 1.0) / 2.0 - df * u - df * v / 2.0;
    let b = (df - 1.0) / 2.0 - df * v - df * u / 2.0;
    a.max(b).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub name: String,
    /// Boundedness fails for α at or below this value.
    pub value: f64,
}

/// The two earlier necessary conditions: (i) `d(1/r − 1) − 1/2`, and (ii)
/// `d|1/p − 1/2| − 1/2` (with the roles of p and q swapped when p = ∞),
/// which only applies when one exponent is ∞ or the pair is dual.
pub fn known_necessary_bgsy(p: Lp, q: Lp, r: Lp, d: u32) -> Result<Vec<Threshold>> {
    let (u, v, w) = (p.inv(), q.inv(), r.inv());
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return domain("p, q must lie in [1, ∞]");
    }
    if (u + v - w).abs() > 1e-12 {
        return domain("known_necessary_bgsy needs 1/r = 1/p + 1/q");
    }
    let df = d as f64;
    let mut out = vec![Threshold {
        name: "i".into(),
        value: df * (w - 1.0) - 0.5,
    }];
    let s = if q.is_inf() {
        Some(u)
    } else if p.is_inf() || (u + v - 1.0).abs() < 1e-12 {
        Some(v)
    } else {
        None
    };
    if let Some(s) = s {
        out.push(Threshold {
            name: "ii".into(),
            value: df * (s - 0.5).abs() - 0.5,
        });
    }
    Ok(out)
}

/// Older sufficient exponent on the diagonal `p = q`, `r = p/2`.
pub fn alpha_prop11_diagonal(inv_p: f64, d: u32) -> f64 {
    let df = d as f64;
    if inv_p >= 0.25 {
        (df - 1.0) * (1.0 - 2.0 * inv_p)
    } else {
        (df - 1.0) / 2.0 + df * (0.5 - 2.0 * inv_p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionRow {
    pub u: f64,
    pub v: f64,
    pub region: Region,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub inv_p: f64,
    pub alpha_thm: f64,
    pub alpha_prop11: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionData {
    pub d: u32,
    pub nu: f64,
    pub step: f64,
    pub rows: Vec<RegionRow>,
    pub diagonal: Vec<CurvePoint>,
}

/// Tabulate α_ν on the lattice `step·ℤ² ∩ [0,1/2]²` plus the diagonal curve.
pub fn emit_region_data(d: u32, nu: f64, step: f64) -> Result<RegionData> {
    if !(step > 0.0) {
        return domain("step must be positive");
    }
    let n = (0.5 / step).round();
    if n < 1.0 || ((n * step) - 0.5).abs() > 1e-12 {
        return domain(format!("step {step} does not divide 1/2"));
    }
    let n = n as usize;
    let mut rows = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            let (u, v) = (i as f64 * step, j as f64 * step);
            let r = alpha_nu(u, v, nu, d)?;
            rows.push(RegionRow {
                u,
                v,
                region: r.region,
                alpha: r.alpha,
            });
        }
    }
    let m = 200;
    let mut diagonal = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let x = 0.5 * i as f64 / m as f64;
        diagonal.push(CurvePoint {
            inv_p: x,
            alpha_thm: alpha_nu(x, x, nu, d)?.alpha,
            alpha_prop11: alpha_prop11_diagonal(x, d),
        });
    }
    Ok(RegionData {
        d,
        nu,
        step,
        rows,
        diagonal,
    })
}

impl RegionData {
    /// Region table; `preamble` lines are written first as `#` comments.
    pub fn write_region_csv(&self, path: &Path, preamble: &[String]) -> Result<()> {
        let mut s = String::new();
        for line in preamble {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str("u,v,region,alpha\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_g12(r.u),
                fmt_g12(r.v),
                r.region.tag(),
                fmt_g12(r.alpha)
            ));
        }
        write_text(path, &s)
    }

    pub fn write_curve_csv(&self, path: &Path, preamble: &[String]) -> Result<()> {
        let mut s = String::new();
        for line in preamble {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str("inv_p,alpha_thm,alpha_prop11\n");
        for c in &self.diagonal {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_g12(c.inv_p),
                fmt_g12(c.alpha_thm),
                fmt_g12(c.alpha_prop11)
            ));
        }
        write_text(path, &s)
    }

    /// Two panels: the region map over `[0,1/2]²` and the `(1/p, α)` diagram.
    pub fn render_svg(&self, comment: &str) -> String {
        let mut s = Vec::new();
        let (w, h) = (860.0, 420.0);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<!-- {} -->", comment.replace("--", "- -"));
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);

        // Left panel: regions.
        let (x0, y0, side) = (50.0, 30.0, 340.0);
        let cell = if self.step > 0.0 {
            side * self.step / 0.5
        } else {
            side
        };
        for r in &self.rows {
            let color = match r.region {
                Region::Delta1 => "#9ecae1",
                Region::Delta2 => "#fdae6b",
                Region::Delta3 => "#a1d99b",
            };
            let cx = x0 + r.u / 0.5 * side;
            let cy = y0 + side - r.v / 0.5 * side;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" stroke="none"><title>{} alpha={}</title></rect>"#,
                cx - cell / 2.0,
                cy - cell / 2.0,
                cell,
                cell,
                r.region.tag(),
                fmt_g12(r.alpha)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{y0}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
        );
        let nx = x0 + self.nu / 0.5 * side;
        let ny = y0 + side - self.nu / 0.5 * side;
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{ny:.2} H{nx:.2} V{:.2}" fill="none" stroke="black" stroke-dasharray="4 3"/>"#,
            y0 + side
        );
        let _ = writeln!(
            s,
            r#"<path d="M{nx:.2},{y0} V{ny:.2} H{:.2}" fill="none" stroke="black" stroke-dasharray="4 3"/>"#,
            x0 + side
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1/p</text><text x="{:.1}" y="{:.1}">1/q</text>"#,
            x0 + side / 2.0,
            y0 + side + 30.0,
            x0 - 40.0,
            y0 + side / 2.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle">regions, d={}, nu={}</text>"#,
            x0 + side / 2.0,
            self.d,
            fmt_g12(self.nu)
        );

        // Right panel: (1/p, alpha) on the diagonal.
        let (px, py, pw, ph) = (470.0, 30.0, 340.0, 340.0);
        let amax = self
            .diagonal
            .iter()
            .map(|c| c.alpha_thm.max(c.alpha_prop11))
            .fold(0.0_f64, f64::max)
            .max(1e-9);
        let to_xy = |ip: f64, a: f64| (px + ip / 0.5 * pw, py + ph - a / amax * ph);
        for (key, color) in [("thm", "#d62728"), ("prop11", "#1f77b4")] {
            let pts: Vec<String> = self
                .diagonal
                .iter()
                .map(|c| {
                    let a = if key == "thm" {
                        c.alpha_thm
                    } else {
                        c.alpha_prop11
                    };
                    let (x, y) = to_xy(c.inv_p, a.max(0.0));
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1/p</text><text x="{:.1}" y="{:.1}">alpha (max {})</text>"#,
            px + pw / 2.0,
            py + ph + 30.0,
            px,
            py - 8.0,
            fmt_g12(amax)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" fill="#d62728">new</text><text x="{:.1}" y="{:.1}" fill="#1f77b4">previous</text>"##,
            px + pw - 80.0,
            py + 20.0,
            px + pw - 80.0,
            py + 36.0
        );
        let _ = writeln!(s, "</svg>");
        String::from_utf8(s).unwrap_or_default()
    }
}
