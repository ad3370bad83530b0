//! One pass/fail line per acceptance criterion.
//!
//! The default run covers every criterion that finishes in a few minutes.
//! `TME_ACCEPTANCE=full` adds the transition sweep and the N = 16 Monte
//! Carlo runs; use a release build for those.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use tme::chern::{power_law_fit, ChernParams, ChernSystem};
use tme::gauss::PathOptions;
use tme::kitaev::{EvalOptions, KitaevParams, KitaevSystem};
use tme::laughlin::{self, MCParams};
use tme::perm::{builtin_spec, topology_report, Family, MeasureSpec, Permutation};
use tme::predict::{self, AnyonModel, HallData, PhiPhase};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rel_err(num: f64, pred: f64) -> f64 {
    predict::wrap_phase(num - pred).abs() / pred.abs()
}

// π as a double-double, for the rational-multiple oracle
const PI_HI: f64 = 3.141592653589793;
const PI_LO: f64 = 1.2246467991473532e-16;

/// `π·p/q`, wrapped into (−π, π], evaluated from exact integers.
fn pi_rational(p: i64, q: i64) -> f64 {
    let m = 2 * q;
    let p = ((p % m) + m) % m;
    let p = if p > q { p - m } else { p };
    let x = p as f64 / q as f64;
    let err = (p as f64 - x * q as f64) / q as f64;
    x * PI_HI + (x * PI_LO + err * PI_HI)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    // arg J_n(c = 1/2) = −π n² / (12 (2n+1)(n+1))
    for n in 1..=5i64 {
        let want = pi_rational(-n * n, 12 * (2 * n + 1) * (n + 1));
        worst = worst.max((predict::arg_jn(0.5, n as usize).unwrap() - want).abs());
    }
    // arg K_n(c = 1/2) = π n(2n−1) / (24 (2n+1))
    for n in 1..=4i64 {
        let want = pi_rational(n * (2 * n - 1), 24 * (2 * n + 1));
        worst = worst.max((predict::arg_kn(0.5, n as usize).unwrap() - want).abs());
    }
    // Ising anyon sum: phase πr/8 for odd r, πr/16 for even r < 8;
    // framing −π(r² + 2)/(24 r)
    let ising = AnyonModel::ising();
    for r in 2..=5i64 {
        let (p, q) = if r % 2 == 1 { (r, 8) } else { (r, 16) };
        let (fp, fq) = (-(r * r + 2), 24 * r);
        let want = pi_rational(p * fq + fp * q, q * fq);
        let got = match predict::phi_r_phase(&ising, r as usize).unwrap() {
            PhiPhase::Phase(x) => x,
            PhiPhase::Vanishing => f64::NAN,
        };
        worst = worst.max((got - want).abs());
    }
    let z = predict::anyon_sum(&ising, 2) * C64::from_polar(1.0, (2.0 * PI * 0.5 / 24.0) * (-2.0 - 1.0));
    let im = z.im.abs() / z.norm();
    judge(worst < 1e-12 && im < 1e-12, format!("max deviation {worst:.2e}, Im Phi2 / |Phi2| = {im:.2e}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut specs = Vec::new();
    for k in 1..=6 {
        specs.push(builtin_spec(Family::Jn, k).unwrap());
        specs.push(builtin_spec(Family::Kn, k).unwrap());
        specs.push(builtin_spec(Family::Smun, k).unwrap());
        if k >= 2 {
            specs.push(builtin_spec(Family::Phir, k).unwrap());
        }
    }
    let bad: Vec<String> = specs.iter().filter(|s| !topology_report(s).is_manifold).map(|s| s.name.clone()).collect();
    let id = Permutation::identity(1);
    let genus = topology_report(&MeasureSpec::new("id", id.clone(), id.clone(), id).unwrap()).genus;
    let j1 = topology_report(&builtin_spec(Family::Jn, 1).unwrap()).ordered_cycle_sum();
    let t = start.elapsed().as_secs_f64();
    judge(
        bad.is_empty() && genus == 3 && j1 == 20 && t < 1.0,
        format!("{} specs, non-manifold {bad:?}, identity genus {genus}, J1 cycle sum {j1}, {t:.3}s", specs.len()),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (op, mag) = common::gaussian::worst_errors(200, 2024);
    let t = start.elapsed().as_secs_f64();
    judge(op < 1e-10 && mag < 1e-9 && t < 60.0, format!("operator {op:.2e}, magnitude {mag:.2e}, {t:.1}s"))
}

fn criterion_4() -> Outcome {
    let sys = KitaevSystem::new(KitaevParams::isotropic(0.3, 10)).unwrap();
    let ising = AnyonModel::ising();
    let cases = [
        (Family::Jn, 1, predict::arg_jn(0.5, 1).unwrap()),
        (Family::Jn, 2, predict::arg_jn(0.5, 2).unwrap()),
        (Family::Kn, 1, predict::arg_kn(0.5, 1).unwrap()),
        (Family::Phir, 2, predict::phi_r_phase(&ising, 2).unwrap().phase().unwrap()),
        (Family::Phir, 3, predict::phi_r_phase(&ising, 3).unwrap().phase().unwrap()),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (fam, k, pred) in cases {
        let spec = builtin_spec(fam, k).unwrap();
        let m = match sys.evaluate(&spec, &EvalOptions::default()) {
            Ok(m) => m,
            Err(e) => return Outcome::Fail(format!("{}: {e}", spec.name)),
        };
        // Φ_2 is predicted real; compare its phase absolutely
        let err = if pred.abs() < 1e-12 { m.phase.abs() } else { rel_err(m.phase, pred) };
        ok &= err < 0.02;
        parts.push(format!("{} {err:.4}", spec.name));
    }
    judge(ok, format!("n_s=10 errors: {}", parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let j1 = builtin_spec(Family::Jn, 1).unwrap();
    let plateau = -PI / 72.0;
    let grid: Vec<f64> = (2..=20).map(|k| k as f64 * 0.05).collect();
    let phases: Vec<std::result::Result<f64, String>> = grid
        .par_iter()
        .map(|&jx| {
            let p = KitaevParams { jx, jy: jx, jz: 1.0, k: 0.3, n_s: 10, gauge_pin: 1.0, sector: None };
            KitaevSystem::new(p).and_then(|s| s.evaluate(&j1, &EvalOptions::default())).map(|m| m.phase).map_err(|e| e.to_string())
        })
        .collect();
    let mut series = Vec::new();
    for (jx, p) in grid.iter().zip(phases) {
        match p {
            Ok(v) => series.push((*jx, v)),
            Err(e) => return Outcome::Fail(format!("J_x={jx}: {e}")),
        }
    }
    let tc_max = series.iter().filter(|(x, _)| *x <= 0.4 + 1e-9).map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let plat_err = series.iter().filter(|(x, _)| *x >= 0.8 - 1e-9).map(|(_, v)| (v / plateau - 1.0).abs()).fold(0.0, f64::max);
    // first J_x where |arg J_1| reaches half the plateau
    let mid = series.iter().find(|(_, v)| v.abs() >= 0.5 * plateau.abs()).map(|(x, _)| *x).unwrap_or(f64::NAN);
    judge(
        tc_max < 1e-3 && plat_err < 0.1 && (0.4..=0.6).contains(&mid),
        format!("max |arg| for J_x<=0.4: {tc_max:.2e}, plateau deviation {plat_err:.3}, half-height at J_x={mid:.2}"),
    )
}

fn criterion_6() -> Outcome {
    let sys = match ChernSystem::new(ChernParams::new(16, 1.0, 0.3)) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mus: Vec<f64> = (1..=6).map(|k| 0.2 * k as f64).collect();
    let points: Vec<(usize, f64)> = (1..=3).flat_map(|n| mus.iter().map(move |&m| (n, m))).collect();
    let results: Vec<std::result::Result<f64, String>> = points
        .par_iter()
        .map(|&(n, mu)| sys.evaluate(mu, n, &PathOptions::default()).map(|r| r.phase).map_err(|e| e.to_string()))
        .collect();
    let hall = HallData::chern_band();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut etas = Vec::new();
    for n in 1..=3 {
        let mut phases = Vec::new();
        for ((pn, mu), r) in points.iter().zip(&results) {
            if *pn != n {
                continue;
            }
            let phase = match r {
                Ok(p) => *p,
                Err(e) => return Outcome::Fail(format!("n={n} mu={mu}: {e}")),
            };
            let ratio = phase / predict::arg_smun(hall, *mu, n).unwrap();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            phases.push(phase);
        }
        etas.push(power_law_fit(&mus, &phases).map(|(_, eta)| eta).unwrap_or(f64::NAN));
    }
    let eta_ok = etas.iter().all(|e| (e - 2.0).abs() <= 0.05);
    judge(
        lo >= 0.9 && hi <= 1.1 && eta_ok,
        format!("normalized phase in [{lo:.4}, {hi:.4}], exponents {:.4}/{:.4}/{:.4}", etas[0], etas[1], etas[2]),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let sphere = laughlin::distribute_points(8, 1).unwrap();
    let mc = MCParams::default();
    let spec = builtin_spec(Family::Jn, 1).unwrap();
    let exact: Vec<C64> = laughlin::rotations(&mc)
        .iter()
        .map(|r| laughlin::exact_measure(&sphere, &laughlin::regions_on_sphere(&sphere, r), &spec).unwrap())
        .collect();
    let exact = exact.iter().sum::<C64>() / exact.len() as f64;
    let est = match laughlin::estimate(&sphere, &spec, &mc) {
        Ok(e) => e,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let sigmas = (est.mean - exact).norm() / est.stderr;
    let rel = est.stderr / est.mean.norm();
    let t = start.elapsed().as_secs_f64();
    judge(
        sigmas < 3.0 && rel < 0.05 && t < 600.0,
        format!("MC {:.5} vs exact {:.5}: {sigmas:.2} stderr apart, stderr/|mean| {rel:.4}, {t:.0}s", est.mean, exact),
    )
}

fn criterion_8() -> Outcome {
    let sphere = laughlin::distribute_points(16, 1).unwrap();
    let j1_mc = MCParams { sweeps: 1_000_000, n_rotations: 48, ..MCParams::default() };
    let j1 = match laughlin::estimate_j1(&sphere, &j1_mc) {
        Ok(e) => e,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let j1_err = rel_err(j1.phase(), -PI / 36.0);
    let s_mc = MCParams { sweeps: 1_000_000, n_rotations: 96, ..MCParams::default() };
    let mus = [0.5, 1.0, 1.5, 2.0];
    let s = match laughlin::estimate_smu1_grid(&mus, &sphere, &s_mc) {
        Ok(v) => v,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let phases: Vec<f64> = s.iter().map(|e| e.phase()).collect();
    let (amp, eta) = power_law_fit(&mus, &phases).unwrap_or((f64::NAN, f64::NAN));
    let a_err = (amp * 16.0 * PI - 1.0).abs();
    judge(
        (1.9..=2.15).contains(&eta) && a_err < 0.3 && j1_err < 0.15,
        format!("S fit A={amp:.5} (off by {a_err:.3}), eta={eta:.3}; arg J1 {:.5} ± {:.5}, error {j1_err:.3}", j1.phase(), j1.phase_stderr()),
    )
}

fn criterion_9() -> Outcome {
    use common::kitaev::*;
    let sys = system(1.0);
    let im = two_region_imaginary(&sys);
    let conj = conjugation_error(&sys);
    let pin = pin_phase_shift();
    let pruned = pruned_to_kept(&sys, &[builtin_spec(Family::Kn, 2).unwrap()]);
    judge(
        im < 1e-10 && conj < 1e-9 && pin < 1e-9 && pruned < 1e-10,
        format!("two-region Im {im:.1e}, conjugation {conj:.1e}, pin shift {pin:.1e}, pruned/kept {pruned:.1e}"),
    )
}

fn main() {
    let full = std::env::var("TME_ACCEPTANCE").is_ok_and(|v| v == "full");
    let skip = || Outcome::Skip("set TME_ACCEPTANCE=full".into());
    let criteria: [(usize, &str, fn() -> Outcome, bool); 9] = [
        (1, "prediction exactness", criterion_1, true),
        (2, "topology oracle", criterion_2, true),
        (3, "Gaussian vs Fock oracle", criterion_3, true),
        (4, "Kitaev Ising phases", criterion_4, true),
        (5, "TC to Ising transition", criterion_5, full),
        (6, "Chern insulator", criterion_6, true),
        (7, "Laughlin exact anchor", criterion_7, true),
        (8, "Laughlin N=16 targets", criterion_8, full),
        (9, "property suites", criterion_9, true),
    ];
    let mut failed = 0;
    for (k, name, f, run) in criteria {
        let start = Instant::now();
        let out = if run { f() } else { skip() };
        let t = start.elapsed().as_secs_f64();
        match out {
            Outcome::Pass(d) => println!("criterion {k} ({name}): PASS | {d} [{t:.1}s]"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("criterion {k} ({name}): FAIL | {d} [{t:.1}s]")
            }
            Outcome::Skip(d) => println!("criterion {k} ({name}): SKIP | {d}"),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
