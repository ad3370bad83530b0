//! Monte Carlo for the bosonic ν=1/2 Laughlin spin wavefunction on the
//! sphere.
//!
//! `Ψ(s) = δ_{Σs,0} Π_{n<m} (z_n − z_m)^{s_n s_m / 2}` with `z` the
//! stereographic images of points on the unit sphere. Pair logarithms are
//! taken once on the principal branch and reused, so every amplitude ratio
//! is evaluated at one fixed branch assignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::RegionMap;
use crate::perm::{MeasureSpec, Permutation, Region};

type C64 = Complex64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereConfig {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub z: Vec<C64>,
}

impl SphereConfig {
    pub fn from_angles(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::SizeMismatch { expected: theta.len(), got: phi.len() });
        }
        let z = theta
            .iter()
            .zip(&phi)
            .map(|(&t, &p)| C64::from_polar(t.sin() / (1.0 + t.cos()), p))
            .collect();
        Ok(SphereConfig { theta, phi, z })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Result<Self> {
        let mut theta = Vec::with_capacity(points.len());
        let mut phi = Vec::with_capacity(points.len());
        for p in points {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            theta.push((p[2] / r).clamp(-1.0, 1.0).acos());
            phi.push(p[1].atan2(p[0]).rem_euclid(2.0 * PI));
        }
        Self::from_angles(theta, phi)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.theta
            .iter()
            .zip(&self.phi)
            .map(|(&t, &p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
            .collect()
    }
}

fn repulsion(points: &[[f64; 3]]) -> (f64, Vec<[f64; 3]>) {
    let n = points.len();
    let mut e = 0.0;
    let mut g = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = [points[i][0] - points[j][0], points[i][1] - points[j][1], points[i][2] - points[j][2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            e += 1.0 / r;
            let f = 1.0 / (r2 * r);
            for k in 0..3 {
                g[i][k] -= f * d[k];
                g[j][k] += f * d[k];
            }
        }
    }
    // tangential part
    for (gi, p) in g.iter_mut().zip(points) {
        let dot = gi[0] * p[0] + gi[1] * p[1] + gi[2] * p[2];
        for k in 0..3 {
            gi[k] -= dot * p[k];
        }
    }
    (e, g)
}

fn grad_norm(g: &[[f64; 3]]) -> f64 {
    g.iter().flat_map(|v| v.iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes the `Σ 1/|r_i − r_j|` energy on the unit sphere by projected
/// gradient descent from a slightly jittered Fibonacci lattice.
pub fn distribute_points(n: usize, seed: u64) -> Result<SphereConfig> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("need an even N ≥ 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64 + 0.05 * rng.random::<f64>();
            [r * a.cos(), r * a.sin(), z]
        })
        .collect();
    // Barzilai–Borwein steps with renormalization as the retraction; the
    // energy is not used for acceptance since its differences drop below
    // rounding well before the gradient does.
    let retract = |pts: &[[f64; 3]], g: &[[f64; 3]], step: f64| -> Vec<[f64; 3]> {
        pts.iter()
            .zip(g)
            .map(|(p, d)| {
                let q = [p[0] - step * d[0], p[1] - step * d[1], p[2] - step * d[2]];
                let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
                [q[0] / r, q[1] / r, q[2] / r]
            })
            .collect()
    };
    let (_, mut g) = repulsion(&pts);
    let mut step = 0.01 / n as f64;
    const MAX_ITER: usize = 100_000;
    for _ in 0..MAX_ITER {
        if grad_norm(&g) < 1e-8 {
            return SphereConfig::from_points(&pts);
        }
        let next = retract(&pts, &g, step);
        let (_, gn) = repulsion(&next);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            for k in 0..3 {
                let sd = next[i][k] - pts[i][k];
                ss += sd * sd;
                sy += sd * (gn[i][k] - g[i][k]);
            }
        }
        step = if sy > 0.0 { (ss / sy).min(1.0) } else { 0.01 / n as f64 };
        pts = next;
        g = gn;
    }
    Err(Error::NoConvergence { iterations: MAX_ITER, residual: grad_norm(&g) })
}

/// Proper rotation stored as a row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation3 {
    pub m: [[f64; 3]; 3],
}

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3 { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// From a (not necessarily normalized) quaternion `w + xi + yj + zk`.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        Rotation3 {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    /// Haar-random rotation from a uniform unit quaternion.
    pub fn haar(rng: &mut impl Rng) -> Self {
        let q = [0; 4].map(|_| rng.sample::<f64, _>(StandardNormal));
        Self::from_quaternion(q)
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [0, 1, 2].map(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Rotation3) -> Rotation3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Rotation3 { m }
    }
}

/// Λ is the southern hemisphere after rotation; A, B, C split the northern
/// hemisphere into three longitudinal sectors of equal area, counterclockwise
/// about the north pole.
pub fn regions_on_sphere(sphere: &SphereConfig, rotation: &Rotation3) -> RegionMap {
    let labels = sphere
        .points()
        .into_iter()
        .map(|p| {
            let q = rotation.apply(p);
            if q[2] < 0.0 {
                return Region::Lambda;
            }
            let phi = q[1].atan2(q[0]).rem_euclid(2.0 * PI);
            match ((phi / (2.0 * PI / 3.0)) as usize).min(2) {
                0 => Region::A,
                1 => Region::B,
                _ => Region::C,
            }
        })
        .collect();
    RegionMap { labels }
}

/// Pair logarithms `L_nm = log(z_n − z_m)` for `n < m`, stored symmetric.
#[derive(Clone, Debug)]
pub struct LaughlinState {
    n: usize,
    logs: Vec<C64>,
}

impl LaughlinState {
    pub fn new(sphere: &SphereConfig) -> Result<Self> {
        let n = sphere.len();
        let mut logs = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = sphere.z[i] - sphere.z[j];
                if d.norm() < 1e-14 {
                    return Err(Error::Coincident(i, j));
                }
                let l = d.ln();
                logs[i * n + j] = l;
                logs[j * n + i] = l;
            }
        }
        Ok(LaughlinState { n, logs })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds `2πi` to a single pair's logarithm.
    pub fn shift_branch(&mut self, i: usize, j: usize) {
        let n = self.n;
        let d = C64::new(0.0, 2.0 * PI);
        self.logs[i * n + j] += d;
        self.logs[j * n + i] += d;
    }

    /// `Σ_{n<m} (s_n s_m / 2) log(z_n − z_m)`; `None` off the `Σs = 0` shell.
    pub fn log_amplitude(&self, s: &[i8]) -> Option<C64> {
        if s.iter().map(|&x| x as i32).sum::<i32>() != 0 {
            return None;
        }
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                acc += self.logs[i * n + j] * (0.5 * (s[i] * s[j]) as f64);
            }
        }
        Some(acc)
    }

    /// Change of `log Ψ` when spins `i` (+1) and `j` (−1) are exchanged.
    pub fn exchange_delta(&self, s: &[i8], i: usize, j: usize) -> C64 {
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..n {
            if m != i && m != j {
                acc += (self.logs[j * n + m] - self.logs[i * n + m]) * s[m] as f64;
            }
        }
        acc
    }
}

/// Metropolis acceptance probability `min(1, |Ψ_new/Ψ_old|²)`.
pub fn acceptance(delta_log: C64) -> f64 {
    (2.0 * delta_log.re).exp().min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCParams {
    pub burn_in: usize,
    pub sweeps: usize,
    pub bins: usize,
    pub n_rotations: usize,
    pub seed: u64,
}

impl Default for MCParams {
    fn default() -> Self {
        MCParams { burn_in: 10_000, sweeps: 100_000, bins: 64, n_rotations: 24, seed: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: C64,
    pub stderr: f64,
    pub samples: usize,
    pub acceptance_rate: f64,
    /// Per-bin means, in chain order (concatenated over chains).
    pub bins: Vec<C64>,
}

impl Estimate {
    pub fn phase(&self) -> f64 {
        self.mean.arg()
    }

    /// First-order standard error of `arg mean`.
    pub fn phase_stderr(&self) -> f64 {
        if self.mean.norm() == 0.0 {
            f64::INFINITY
        } else {
            self.stderr / self.mean.norm()
        }
    }

    fn from_bins(bins: Vec<C64>, samples: usize, acceptance_rate: f64) -> Self {
        let k = bins.len() as f64;
        let mean = bins.iter().sum::<C64>() / k;
        let var = if bins.len() > 1 { bins.iter().map(|b| (b - mean).norm_sqr()).sum::<f64>() / (k - 1.0) } else { 0.0 };
        Estimate { mean, stderr: (var / k).sqrt(), samples, acceptance_rate, bins }
    }

    /// Equal-weight average of independent estimates.
    pub fn combine(parts: &[Estimate]) -> Result<Estimate> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("nothing to combine".into()));
        }
        let k = parts.len() as f64;
        let mean = parts.iter().map(|e| e.mean).sum::<C64>() / k;
        let stderr = parts.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k;
        let samples = parts.iter().map(|e| e.samples).sum();
        let acceptance_rate = parts.iter().map(|e| e.acceptance_rate).sum::<f64>() / k;
        let bins = parts.iter().flat_map(|e| e.bins.iter().copied()).collect();
        Ok(Estimate { mean, stderr, samples, acceptance_rate, bins })
    }
}

/// Replica sources for the permuted configuration: replica `r` of the
/// permuted state takes region `g` from replica `π_g(r)`.
fn source_table(spec: &MeasureSpec, regions: &RegionMap) -> Vec<Vec<usize>> {
    let perms: Vec<Permutation> = Region::ALL.iter().map(|&g| spec.perm(g)).collect();
    (0..spec.replicas())
        .map(|r| regions.labels.iter().map(|g| perms[g.index()].apply(r)).collect())
        .collect()
}

fn charge_weight(spec: &MeasureSpec, regions: &RegionMap, x: &[Vec<i8>]) -> f64 {
    match &spec.charge {
        None => 1.0,
        Some(c) => {
            let q: f64 = regions
                .labels
                .iter()
                .zip(&x[c.replica])
                .filter(|(g, _)| matches!(g, Region::A | Region::C))
                .map(|(_, &s)| (s as f64 + 1.0) / 2.0)
                .sum();
            (c.mu * q).exp()
        }
    }
}

/// `e^{μQ(x)} Π_r Ψ(src_r)/Ψ(x_r)` for one replica configuration.
fn ratio(state: &LaughlinState, src: &[Vec<usize>], x: &[Vec<i8>], logs: &[C64], spec: &MeasureSpec, regions: &RegionMap) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut y = vec![0i8; state.len()];
    for (r, table) in src.iter().enumerate() {
        for (i, &from) in table.iter().enumerate() {
            y[i] = x[from][i];
        }
        match state.log_amplitude(&y) {
            Some(l) => acc += l - logs[r],
            None => return C64::new(0.0, 0.0),
        }
    }
    acc.exp() * charge_weight(spec, regions, x)
}

fn check_spec(spec: &MeasureSpec, state: &LaughlinState, regions: &RegionMap) -> Result<()> {
    if regions.labels.len() != state.len() {
        return Err(Error::SizeMismatch { expected: state.len(), got: regions.labels.len() });
    }
    if !spec.perm(Region::Lambda).is_identity() {
        return Err(Error::InvalidParameter("Λ must not be permuted".into()));
    }
    Ok(())
}

/// One Metropolis chain at fixed regions.
pub fn run_chain(state: &LaughlinState, regions: &RegionMap, spec: &MeasureSpec, mc: &MCParams, seed: u64) -> Result<Estimate> {
    let mut v = run_chain_multi(state, regions, std::slice::from_ref(spec), mc, seed)?;
    Ok(v.remove(0))
}

/// One chain measuring several specs on the same samples. The sampled
/// distribution depends only on the replica count, so all specs must agree
/// on it.
pub fn run_chain_multi(state: &LaughlinState, regions: &RegionMap, specs: &[MeasureSpec], mc: &MCParams, seed: u64) -> Result<Vec<Estimate>> {
    let Some(first) = specs.first() else {
        return Err(Error::InvalidParameter("no spec to measure".into()));
    };
    for spec in specs {
        check_spec(spec, state, regions)?;
        if spec.replicas() != first.replicas() {
            return Err(Error::SizeMismatch { expected: first.replicas(), got: spec.replicas() });
        }
    }
    if mc.bins == 0 || mc.sweeps < mc.bins {
        return Err(Error::InvalidParameter("need at least one sweep per bin".into()));
    }
    let n = state.len();
    let reps = first.replicas();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let mut x: Vec<Vec<i8>> = vec![start; reps];
    for c in x.iter_mut() {
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            c.swap(i, j);
        }
    }
    let mut logs: Vec<C64> = x.iter().map(|c| state.log_amplitude(c).expect("balanced start")).collect();
    let srcs: Vec<_> = specs.iter().map(|s| source_table(s, regions)).collect();
    let per_bin = mc.sweeps / mc.bins;
    let mut bins = vec![vec![C64::new(0.0, 0.0); mc.bins]; specs.len()];
    let (mut proposed, mut accepted) = (0usize, 0usize);
    let mut up = Vec::with_capacity(n);
    let mut down = Vec::with_capacity(n);
    for sweep in 0..mc.burn_in + per_bin * mc.bins {
        for r in 0..reps {
            for _ in 0..n {
                up.clear();
                down.clear();
                for (k, &s) in x[r].iter().enumerate() {
                    if s > 0 {
                        up.push(k)
                    } else {
                        down.push(k)
                    }
                }
                let i = up[rng.random_range(0..up.len())];
                let j = down[rng.random_range(0..down.len())];
                let d = state.exchange_delta(&x[r], i, j);
                proposed += 1;
                if rng.random::<f64>() < acceptance(d) {
                    x[r].swap(i, j);
                    logs[r] += d;
                    accepted += 1;
                }
            }
        }
        if sweep >= mc.burn_in {
            // refresh against accumulated rounding
            for r in 0..reps {
                logs[r] = state.log_amplitude(&x[r]).expect("moves conserve Σs");
            }
            let b = (sweep - mc.burn_in) / per_bin;
            for (k, spec) in specs.iter().enumerate() {
                bins[k][b] += ratio(state, &srcs[k], &x, &logs, spec, regions);
            }
        }
    }
    if accepted == 0 {
        return Err(Error::ZeroAcceptance);
    }
    let rate = accepted as f64 / proposed as f64;
    Ok(bins
        .into_iter()
        .map(|mut bs| {
            for b in bs.iter_mut() {
                *b /= per_bin as f64;
            }
            Estimate::from_bins(bs, per_bin * mc.bins, rate)
        })
        .collect())
}

/// Haar rotations used by [`estimate`]; deterministic in the seed.
pub fn rotations(mc: &MCParams) -> Vec<Rotation3> {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..mc.n_rotations.max(1))
        .map(|k| if mc.n_rotations == 0 && k == 0 { Rotation3::identity() } else { Rotation3::haar(&mut rng) })
        .collect()
}

/// Rotation-averaged estimate, one independent chain per rotation.
/// `n_rotations = 0` runs a single chain at the identity rotation.
pub fn estimate(sphere: &SphereConfig, spec: &MeasureSpec, mc: &MCParams) -> Result<Estimate> {
    let mut v = estimate_multi(sphere, std::slice::from_ref(spec), mc)?;
    Ok(v.remove(0))
}

/// [`estimate`] for several specs sharing each chain.
pub fn estimate_multi(sphere: &SphereConfig, specs: &[MeasureSpec], mc: &MCParams) -> Result<Vec<Estimate>> {
    let state = LaughlinState::new(sphere)?;
    let rots = rotations(mc);
    let parts: Vec<Vec<Estimate>> = rots
        .par_iter()
        .enumerate()
        .map(|(k, rot)| {
            let regions = regions_on_sphere(sphere, rot);
            run_chain_multi(&state, &regions, specs, mc, mc.seed.wrapping_mul(1_000_003).wrapping_add(k as u64))
        })
        .collect::<Result<_>>()?;
    (0..specs.len())
        .map(|s| Estimate::combine(&parts.iter().map(|p| p[s].clone()).collect::<Vec<_>>()))
        .collect()
}

pub fn estimate_j1(sphere: &SphereConfig, mc: &MCParams) -> Result<Estimate> {
    estimate(sphere, &crate::perm::builtin_spec(crate::perm::Family::Jn, 1)?, mc)
}

pub fn estimate_smu1(mu: f64, sphere: &SphereConfig, mc: &MCParams) -> Result<Estimate> {
    let mut v = estimate_smu1_grid(&[mu], sphere, mc)?;
    Ok(v.remove(0))
}

/// `S_{μ,1}` on a grid of μ, all values measured on the same chains.
pub fn estimate_smu1_grid(mus: &[f64], sphere: &SphereConfig, mc: &MCParams) -> Result<Vec<Estimate>> {
    let base = crate::perm::builtin_spec(crate::perm::Family::Smun, 1)?;
    let specs: Vec<MeasureSpec> = mus.iter().map(|&mu| base.clone().with_charge(0, mu)).collect::<Result<_>>()?;
    estimate_multi(sphere, &specs, mc)
}

/// Exact expectation by enumerating every balanced configuration of every
/// replica.
pub fn exact_measure(sphere: &SphereConfig, regions: &RegionMap, spec: &MeasureSpec) -> Result<C64> {
    let state = LaughlinState::new(sphere)?;
    check_spec(spec, &state, regions)?;
    let n = state.len();
    let reps = spec.replicas();
    if n > 16 {
        return Err(Error::TooLarge { dim: n, max: 16 });
    }
    let configs: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize * 2 == n).collect();
    let total = (configs.len() as u64).checked_pow(reps as u32).filter(|&t| t <= 1 << 32);
    let Some(total) = total else {
        return Err(Error::TooLarge { dim: usize::MAX, max: 1 << 32 });
    };
    let spins = |m: u32| -> Vec<i8> { (0..n).map(|i| if m >> i & 1 == 1 { 1 } else { -1 }).collect() };
    let mut amp = vec![C64::new(0.0, 0.0); 1 << n];
    let mut norm = 0.0;
    for &m in &configs {
        let a = state.log_amplitude(&spins(m)).expect("balanced").exp();
        amp[m as usize] = a;
        norm += a.norm_sqr();
    }
    // region g's site mask
    let mask: Vec<u32> = Region::ALL
        .iter()
        .map(|&g| (0..n).filter(|&i| regions.labels[i] == g).fold(0u32, |m, i| m | 1 << i))
        .collect();
    let perms: Vec<Permutation> = Region::ALL.iter().map(|&g| spec.perm(g)).collect();
    let k = configs.len() as u64;
    let sum: C64 = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut f = flat;
            let mut x = [0u32; 16];
            for slot in x.iter_mut().take(reps) {
                *slot = configs[(f % k) as usize];
                f /= k;
            }
            let mut term = C64::new(1.0, 0.0);
            for r in 0..reps {
                let y = (0..4).fold(0u32, |acc, g| acc | (x[perms[g].apply(r)] & mask[g]));
                term *= amp[x[r] as usize].conj() * amp[y as usize];
                if term == C64::new(0.0, 0.0) {
                    break;
                }
            }
            if let Some(c) = &spec.charge {
                let q = (x[c.replica] & (mask[Region::A.index()] | mask[Region::C.index()])).count_ones();
                term *= (c.mu * q as f64).exp();
            }
            term
        })
        .sum();
    Ok(sum / norm.powi(reps as i32))
}
