//! Run configuration: JSON file plus flag overrides, resolved to concrete
//! values before anything runs, and hashed.

use std::path::Path;

use brlab_core::exponents::Lp;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

pub const SUITES: [&str; 6] = ["calibration", "partition", "kernels", "lemma23", "cauchy-schwarz", "reconstruct"];
pub const PRESETS: [&str; 4] = ["thm-main", "cor-sharp-d2", "remark32", "prop46"];

/// Everything a run depends on. Unset fields take per-command defaults in
/// [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub suite: Option<String>,
    pub preset: Option<String>,
    pub d: Option<u32>,
    pub nu: Option<f64>,
    pub step: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    /// `(p, q)` pairs as strings, `"inf"` allowed.
    pub exponents: Option<Vec<[String; 2]>>,
    pub alpha: Option<f64>,
    pub varrho: Option<f64>,
    pub epsilon: Option<f64>,
    pub orders: Option<Vec<usize>>,
    pub seed: Option<u64>,
    /// Random fields per suite, or Monte-Carlo samples for `prop46`.
    pub samples: Option<usize>,
    pub budget: Option<usize>,
    /// `mc` or `quadrature`.
    pub method: Option<String>,
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(command, suite, preset, d, nu, step, deltas, exponents, alpha, varrho, epsilon, orders, seed, samples, budget, method);
        self
    }

    /// Fills every default for the command and checks the values.
    pub fn resolve(mut self) -> Result<RunConfig, UsageError> {
        let cmd = self.command.clone().ok_or_else(|| usage("no command"))?;
        let all = || vec![0.125, 0.0625, 0.03125, 0.015625];
        match cmd.as_str() {
            "exponents" => {
                let d = *self.d.get_or_insert(2);
                if d < 2 {
                    return Err(usage("exponents needs d ≥ 2"));
                }
                if self.nu.is_none() {
                    self.nu = Some(brlab_core::exponents::nu_default(d).map_err(|e| usage(e.to_string()))?);
                }
                let nu = self.nu.unwrap();
                if !(nu > 0.0 && nu < 0.5) {
                    return Err(usage(format!("ν = {nu} must lie in (0, 1/2)")));
                }
                self.step.get_or_insert(1.0 / 64.0);
            }
            "verify" => {
                let suite = self.suite.clone().ok_or_else(|| usage("verify needs a suite"))?;
                if !SUITES.contains(&suite.as_str()) {
                    return Err(usage(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", "))));
                }
                self.seed.get_or_insert(1);
                match suite.as_str() {
                    "kernels" => {
                        self.d.get_or_insert(2);
                        self.deltas.get_or_insert_with(all);
                    }
                    "lemma23" => {
                        self.d.get_or_insert(1);
                        self.deltas.get_or_insert_with(|| vec![0.0625]);
                        self.samples.get_or_insert(20);
                    }
                    "cauchy-schwarz" => {
                        self.d.get_or_insert(2);
                        self.deltas.get_or_insert_with(|| vec![0.125, 0.0625]);
                        self.samples.get_or_insert(4);
                    }
                    "reconstruct" => {
                        self.deltas.get_or_insert_with(|| vec![0.03125]);
                        self.epsilon.get_or_insert(0.2);
                        self.alpha.get_or_insert(0.5);
                        self.orders.get_or_insert_with(|| vec![1, 2, 4, 8]);
                    }
                    _ => {}
                }
            }
            "scan" => {
                let preset = self.preset.clone().ok_or_else(|| usage("scan needs --preset"))?;
                if !PRESETS.contains(&preset.as_str()) {
                    return Err(usage(format!("unknown preset {preset:?}; expected one of {}", PRESETS.join(", "))));
                }
                self.seed.get_or_insert(20240611);
                let s = |p: &str, q: &str| [p.to_string(), q.to_string()];
                match preset.as_str() {
                    "thm-main" => {
                        self.d.get_or_insert(2);
                        self.varrho.get_or_insert(1.0);
                        self.deltas.get_or_insert_with(all);
                        self.budget.get_or_insert(100);
                        self.exponents
                            .get_or_insert_with(|| vec![s("2", "2"), s("4", "4"), s("inf", "inf"), s("2", "inf")]);
                    }
                    "cor-sharp-d2" => {
                        self.d.get_or_insert(2);
                        self.varrho.get_or_insert(1.0);
                        self.deltas.get_or_insert_with(all);
                        self.budget.get_or_insert(100);
                        self.exponents.get_or_insert_with(|| vec![s("4", "4")]);
                    }
                    "remark32" => {
                        self.d.get_or_insert(2);
                        self.alpha.get_or_insert(0.5);
                        self.deltas.get_or_insert_with(all);
                        self.budget.get_or_insert(100);
                        self.exponents.get_or_insert_with(|| vec![s("2", "2")]);
                    }
                    _ => {
                        self.d.get_or_insert(2);
                        self.alpha.get_or_insert(0.2);
                        self.method.get_or_insert_with(|| "mc".into());
                        self.samples.get_or_insert(1 << 20);
                        self.exponents.get_or_insert_with(|| vec![s("inf", "inf"), s("2", "2")]);
                    }
                }
                if preset != "prop46" {
                    let deltas = self.deltas.as_ref().unwrap();
                    if deltas.is_empty() {
                        return Err(usage("empty δ list"));
                    }
                    if !matches!(self.d, Some(1) | Some(2)) {
                        return Err(usage("norm scans run in d = 1 or 2"));
                    }
                } else if !matches!(self.method.as_deref(), Some("mc") | Some("quadrature")) {
                    return Err(usage("method must be mc or quadrature"));
                }
            }
            other => return Err(usage(format!("unknown command {other:?}"))),
        }
        if let Some(ds) = &self.deltas {
            if ds.is_empty() {
                return Err(usage("empty δ list"));
            }
            for &dl in ds {
                let k = -dl.log2();
                if !(dl > 0.0 && dl <= 0.125) || (k - k.round()).abs() > 1e-12 {
                    return Err(usage(format!("δ = {dl} must be a power of 2 at most 1/8")));
                }
            }
        }
        self.exponent_pairs()?;
        Ok(self)
    }

    pub fn exponent_pairs(&self) -> Result<Vec<(Lp, Lp)>, UsageError> {
        let Some(list) = &self.exponents else {
            return Ok(Vec::new());
        };
        list.iter()
            .map(|[p, q]| Ok((p.parse::<Lp>().map_err(usage)?, q.parse::<Lp>().map_err(usage)?)))
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON of the resolved config.
    pub fn sha256(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cmd(&self) -> &str {
        self.command.as_deref().unwrap_or("")
    }
}

/// Parses `1/8` or `0.125`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
        if b == 0.0 {
            return Err(format!("division by zero in {s:?}"));
        }
        return Ok(a / b);
    }
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

/// Parses `4,4;inf,inf` into pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<[String; 2]>, String> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (p, q) = t.split_once(',').ok_or_else(|| format!("expected p,q in {t:?}"))?;
            p.parse::<Lp>()?;
            q.parse::<Lp>()?;
            Ok([p.trim().to_string(), q.trim().to_string()])
        })
        .collect()
}
