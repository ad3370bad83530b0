use num_complex::Complex64 as C64;

use tme::kitaev::{prune, EvalOptions, GaugeSector, KitaevParams, KitaevSystem, Method};
use tme::perm::{builtin_spec, Family, MeasureSpec, Permutation};

pub fn system(pin: f64) -> KitaevSystem {
    let mut p = KitaevParams::isotropic(0.3, 4);
    p.gauge_pin = pin;
    KitaevSystem::new(p).unwrap()
}

pub fn specs() -> Vec<MeasureSpec> {
    vec![
        builtin_spec(Family::Jn, 1).unwrap(),
        builtin_spec(Family::Kn, 1).unwrap(),
        builtin_spec(Family::Phir, 2).unwrap(),
        builtin_spec(Family::Jn, 2).unwrap(),
    ]
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(a.norm())
}

/// Largest `|Im v| / |v|` over the specs with one region left unpermuted.
pub fn two_region_imaginary(sys: &KitaevSystem) -> f64 {
    let opts = EvalOptions::default();
    let mut worst: f64 = 0.0;
    for spec in specs() {
        let id = Permutation::identity(spec.replicas());
        let (a, b, c) = (spec.pi_a().clone(), spec.pi_b().clone(), spec.pi_c().clone());
        let variants = [
            MeasureSpec::new("BC", id.clone(), b.clone(), c.clone()).unwrap(),
            MeasureSpec::new("AB", a.clone(), b, id.clone()).unwrap(),
            MeasureSpec::new("AC", a, id, c).unwrap(),
        ];
        for v in variants {
            let m = sys.evaluate(&v, &opts).unwrap();
            worst = worst.max(m.value.im.abs() / m.magnitude);
        }
    }
    worst
}

/// Largest relative distance between the inverted-spec value and the conjugate.
pub fn conjugation_error(sys: &KitaevSystem) -> f64 {
    let opts = EvalOptions::default();
    specs()
        .iter()
        .map(|spec| {
            let v = sys.evaluate(spec, &opts).unwrap().value;
            let w = sys.evaluate(&spec.inverted(), &opts).unwrap().value;
            rel(w, v.conj())
        })
        .fold(0.0, f64::max)
}

/// Largest phase change when the dimer pinning strength moves from 1 to 2.5.
pub fn pin_phase_shift() -> f64 {
    let opts = EvalOptions { method: Method::Literal, ..EvalOptions::default() };
    let (a, b) = (system(1.0), system(2.5));
    [builtin_spec(Family::Jn, 1).unwrap(), builtin_spec(Family::Kn, 1).unwrap()]
        .iter()
        .map(|spec| {
            let pa = a.evaluate(spec, &opts).unwrap().phase;
            let pb = b.evaluate(spec, &opts).unwrap().phase;
            (pa - pb).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest ratio of a pruned sector value to the largest kept one.
pub fn pruned_to_kept(sys: &KitaevSystem, extra: &[MeasureSpec]) -> f64 {
    let opts = EvalOptions::default();
    let mut all = specs();
    all.extend_from_slice(extra);
    let mut worst: f64 = 0.0;
    for spec in all {
        let r = spec.replicas();
        let (mut kept, mut pruned) = (0.0f64, 0.0f64);
        for bits in 0..(1u64 << (3 * r)) {
            let sector = GaugeSector { bits, replicas: r };
            let v = sys.sector_value(&spec, sector, &opts).unwrap().norm();
            if prune(sector, &spec, sys.adjacency) {
                pruned = pruned.max(v);
            } else {
                kept = kept.max(v);
            }
        }
        assert!(kept > 0.0, "{}: every kept sector vanished", spec.name);
        worst = worst.max(pruned / kept);
    }
    worst
}
