//! `brlab verify <suite>`: identity and inequality checks with their
//! measured quantities, written to `verify_<suite>.json`.

use brlab_core::bilinear::{bilinear_shell_product, cauchy_schwarz_excess, lemma31_reconstruct, write_reconstruction_csv};
use brlab_core::bump::{calibration_sup_error, dyadic_psi, partition_phi, partition_sup_error, psi_zero, standard_bump};
use brlab_core::linear::{angular_shell_kernel, lemma23_pointwise, shell_kernel, AngularPartition, KernelOptions, ShellSpec};
use brlab_core::spectral::{random_bandlimited, TorusGrid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{CliError, Ctx, Status};

#[derive(Serialize)]
struct Report<'a> {
    suite: &'a str,
    pass: bool,
    measured: Value,
}

type Suite = Result<(bool, Value), CliError>;

pub fn run(ctx: &Ctx) -> Result<Status, CliError> {
    let suite = ctx.cfg.suite.as_deref().unwrap_or_default();
    let (pass, measured) = match suite {
        "calibration" => calibration(ctx),
        "partition" => partition(),
        "kernels" => kernels(ctx),
        "lemma23" => lemma23(ctx),
        "cauchy-schwarz" => cauchy_schwarz(ctx),
        _ => reconstruct(ctx),
    }?;
    let path = ctx.write_json(&format!("verify_{suite}.json"), &Report { suite, pass, measured })?;
    println!("{suite}: {}", if pass { "pass" } else { "FAIL" });
    Ok(if pass {
        Status::Pass
    } else {
        Status::Fail(format!("suite {suite}, see {}", path.display()))
    })
}

fn calibration(ctx: &Ctx) -> Suite {
    let alphas = match ctx.cfg.alpha {
        Some(a) => vec![a],
        None => vec![0.25, 1.0, 2.5],
    };
    let mut rows = Vec::new();
    let mut pass = true;
    for a in alphas {
        let e = calibration_sup_error(a, 2f64.powi(-18), 1.0, -20, 2, 100_000)?;
        pass &= e <= 1e-10;
        rows.push(json!({"alpha": a, "sup_error": e, "limit": 1e-10}));
    }
    Ok((pass, json!({ "t_range": [2f64.powi(-18), 1.0], "points": 100_000, "cases": rows })))
}

fn partition() -> Suite {
    let pts: Vec<f64> = (0..100_000).map(|i| -3.0 + 6.0 * i as f64 / 99_999.0).collect();
    let part = partition_sup_error(&pts);
    let mut tail: f64 = 0.0;
    for alpha in [0.25, 1.0, 2.5] {
        let psi = dyadic_psi(alpha)?;
        let p0 = psi_zero(alpha, &psi)?;
        for i in 1..=10_000 {
            tail = tail.max(p0.value(0.75 + 0.25 * i as f64 / 10_000.0).abs());
        }
    }
    Ok((
        part <= 1e-12 && tail <= 1e-12,
        json!({"partition_sup_error": part, "psi0_tail_sup": tail, "limit": 1e-12}),
    ))
}

fn kernels(ctx: &Ctx) -> Suite {
    let d = ctx.cfg.d.unwrap() as usize;
    let deltas = ctx.cfg.deltas.clone().unwrap();
    let bump = standard_bump(-2.0, 2.0)?;
    let mut iso = Vec::new();
    for &delta in &deltas {
        let g = TorusGrid::for_delta(d, delta, 1.2)?;
        let (_, env) = shell_kernel(&ShellSpec::new(1.0, delta, bump.clone())?, g, &KernelOptions::new(d))?;
        iso.push(env);
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
    let s_iso = spread(&iso.iter().map(|e| e.constant).collect::<Vec<_>>());
    let mut pass = s_iso <= 2.0;
    let mut aniso = Vec::new();
    if d == 2 {
        let phi = partition_phi();
        for &delta in &deltas {
            let g = TorusGrid::for_delta(2, delta, 1.2)?;
            let part = AngularPartition::with_spacing(delta.sqrt())?;
            let mut opts = KernelOptions::new(2);
            opts.wrap_limit = 1.0;
            let (_, env) = angular_shell_kernel(&ShellSpec::new(1.0, delta, bump.clone())?, g, &part, 0, &phi, &opts)?;
            aniso.push(env);
        }
        pass &= spread(&aniso.iter().map(|e| e.constant).collect::<Vec<_>>()) <= 2.0;
    }
    let s_aniso = if aniso.is_empty() {
        Value::Null
    } else {
        json!(spread(&aniso.iter().map(|e| e.constant).collect::<Vec<_>>()))
    };
    Ok((
        pass,
        json!({"isotropic": iso, "anisotropic": aniso, "isotropic_spread": s_iso, "anisotropic_spread": s_aniso, "limit": 2.0}),
    ))
}

fn lemma23(ctx: &Ctx) -> Suite {
    let d = ctx.cfg.d.unwrap() as usize;
    let seed = ctx.cfg.seed.unwrap();
    let phi = standard_bump(-1.0, 1.0)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for &delta in ctx.cfg.deltas.as_ref().unwrap() {
        let g = TorusGrid::for_delta(d, delta, 2.0)?;
        for i in 0..ctx.cfg.samples.unwrap() as u64 {
            let f = random_bandlimited(g, 0.6 + 0.05 * (i % 20) as f64, seed.wrapping_add(i))?;
            let r = lemma23_pointwise(&f, delta, &phi, 1024)?;
            pass &= r.holds;
            rows.push(json!({"delta": delta, "seed": seed.wrapping_add(i), "report": r}));
        }
    }
    Ok((pass, json!({ "d": d, "nodes": 1024, "cases": rows })))
}

fn cauchy_schwarz(ctx: &Ctx) -> Suite {
    let d = ctx.cfg.d.unwrap() as usize;
    let seed = ctx.cfg.seed.unwrap();
    let bump = standard_bump(-1.0, 1.0)?;
    let phi = partition_phi();
    let varrhos = match ctx.cfg.varrho {
        Some(v) => vec![v],
        None => vec![0.5, 1.0, 1.5, 2.0],
    };
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for &delta in ctx.cfg.deltas.as_ref().unwrap() {
        let g = TorusGrid::for_delta(d, delta, if d == 1 { 2.0 } else { 1.5 })?;
        for i in 0..ctx.cfg.samples.unwrap() as u64 {
            let s = seed.wrapping_add(2 * i);
            let f = random_bandlimited(g, 1.3, s)?;
            let h = random_bandlimited(g, 1.3, s + 1)?;
            for &v in &varrhos {
                for (p1, p2) in [(&bump, &phi), (&phi, &phi)] {
                    worst = worst.max(cauchy_schwarz_excess(&bilinear_shell_product(&f, &h, delta, v, p1, p2)?));
                    n += 1;
                }
            }
        }
    }
    Ok((worst <= 1e-12, json!({"configurations": n, "worst_relative_excess": worst, "limit": 1e-12})))
}

fn reconstruct(ctx: &Ctx) -> Suite {
    let c = &ctx.cfg;
    let (eps, alpha) = (c.epsilon.unwrap(), c.alpha.unwrap());
    let psi = dyadic_psi(alpha)?;
    let phi = partition_phi();
    let mut orders = c.orders.clone().unwrap();
    orders.sort_unstable();
    orders.dedup();
    let mut reports = Vec::new();
    for &delta in c.deltas.as_ref().unwrap() {
        for &n in &orders {
            reports.push(lemma31_reconstruct(delta, eps, n, &psi, &phi, 2)?);
        }
    }
    write_reconstruction_csv(&reports, &ctx.path("reconstruct.csv"), &ctx.preamble())?;
    // lowest against highest order, per δ
    let mut pass = true;
    let mut ratios = Vec::new();
    for chunk in reports.chunks(orders.len()) {
        let (lo, hi) = (&chunk[0], &chunk[chunk.len() - 1]);
        let ratio = lo.sup_error / hi.sup_error;
        pass &= chunk.len() > 1 && ratio >= 10.0;
        ratios.push(json!({"delta": lo.delta, "N_low": lo.n, "N_high": hi.n, "error_ratio": ratio, "need": 10.0}));
    }
    Ok((pass, json!({ "epsilon": eps, "alpha": alpha, "ratios": ratios, "reports": reports })))
}
