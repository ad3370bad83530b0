use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tme::gauss::fock::{expect, FockSpace};
use tme::gauss::{expectation, gaussian_product, ground_basis, QuadraticForm, DEFAULT_GAP_TOL};

pub struct Instance {
    pub majoranas: usize,
    pub a: Mat<f64>,
    pub forms: Vec<QuadraticForm>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = 2 * rng.random_range(1..=6);
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    let k = rng.random_range(1..=4);
    let forms = (0..k)
        .map(|_| {
            let mut m = Mat::<C64>::zeros(n, n);
            let imag = rng.random_bool(0.5);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = C64::new(rng.random_range(-1.5..1.5), if imag { rng.random_range(-0.5..0.5) } else { 0.0 });
                    m[(i, j)] = v;
                    m[(j, i)] = -v;
                }
            }
            QuadraticForm::new(m).unwrap()
        })
        .collect();
    Instance { majoranas: n, a, forms }
}

/// Returns (operator error, magnitude error) relative to the oracle scale.
pub fn check(inst: &Instance) -> (f64, f64) {
    let n = inst.majoranas;
    let fs = FockSpace::new(n).unwrap();
    let e = gaussian_product(&inst.forms).unwrap();
    let mut op = Mat::<C64>::identity(fs.dim(), fs.dim());
    for f in &inst.forms {
        op = &op * fs.operator(f).unwrap();
    }
    // O γ_k = (Σ_j γ_j E_jk) O
    let scale = (0..fs.dim())
        .flat_map(|i| (0..fs.dim()).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(op[(i, j)].norm()));
    let mut op_err: f64 = 0.0;
    for k in 0..n {
        let lhs = &op * fs.gamma(k);
        let g = Mat::from_fn(fs.dim(), fs.dim(), |r, s| (0..n).map(|j| fs.gamma(j)[(r, s)] * e[(j, k)]).sum::<C64>());
        let rhs = g * &op;
        for i in 0..fs.dim() {
            for j in 0..fs.dim() {
                op_err = op_err.max((lhs[(i, j)] - rhs[(i, j)]).norm() / scale);
            }
        }
    }
    let basis = ground_basis(inst.a.as_ref(), DEFAULT_GAP_TOL).unwrap();
    let amp = expectation(&basis, e.as_ref()).unwrap().value;
    let psi = fs.ground_state(inst.a.as_ref()).unwrap();
    let want = expect(&psi, op.as_ref());
    let mag_err = (amp.norm() - want.norm()).abs() / want.norm().max(1.0);
    (op_err, mag_err)
}

/// Worst (operator, magnitude) errors over `count` seeded instances.
pub fn worst_errors(count: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_op, mut worst_mag) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let (o, m) = check(&random_instance(&mut rng));
        worst_op = worst_op.max(o);
        worst_mag = worst_mag.max(m);
    }
    (worst_op, worst_mag)
}
