//! Fermionic Gaussian operators on Majorana modes.
//!
//! A form `M` (complex antisymmetric, 2m × 2m) stands for the operator
//! `exp(¼ Σ_ab M_ab γ_a γ_b)`. Products of such operators are again Gaussian
//! and are tracked through the single-particle matrices `exp(M)`, multiplied
//! in the same order as the operators. Ground states of
//! `H = (i/4) Σ A_ab γ_a γ_b` give expectation values
//! `⟨ψ| e^{¼γᵀMγ} |ψ⟩² = det(U₁† e^M U₁)`, `U₁` spanning the negative
//! eigenvectors of `iA`. The square root is fixed by continuation.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DEFAULT_GAP_TOL: f64 = 1e-9;
const ANTISYM_TOL: f64 = 1e-12;
/// Determinants below this magnitude count as exact zeros.
pub const ZERO_DET: f64 = 1e-300;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Complex antisymmetric generator of a Gaussian operator.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    m: Mat<C64>,
}

impl QuadraticForm {
    pub fn new(m: Mat<C64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::SizeMismatch { expected: n, got: m.ncols() });
        }
        if n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("odd number of Majorana modes: {n}")));
        }
        for i in 0..n {
            for j in 0..=i {
                if (m[(i, j)] + m[(j, i)]).norm() > ANTISYM_TOL {
                    return Err(Error::InvalidParameter(format!("form not antisymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(QuadraticForm { m })
    }

    pub fn from_real(a: MatRef<'_, f64>) -> Result<Self> {
        Self::new(Mat::from_fn(a.nrows(), a.ncols(), |i, j| c(a[(i, j)])))
    }

    pub fn zero(dim: usize) -> Self {
        QuadraticForm { m: Mat::zeros(dim, dim) }
    }

    /// `exp(θ/2 γ_a γ_b)`: the single pair rotation with `M_ab = θ`.
    pub fn rotation(dim: usize, a: usize, b: usize, theta: C64) -> Result<Self> {
        if a >= dim || b >= dim {
            return Err(Error::SizeMismatch { expected: dim, got: a.max(b) + 1 });
        }
        if a == b {
            return Err(Error::InvalidParameter("rotation needs two distinct modes".into()));
        }
        let mut m = Mat::zeros(dim, dim);
        m[(a, b)] = theta;
        m[(b, a)] = -theta;
        Ok(QuadraticForm { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.m.as_ref()
    }

    pub fn scaled(&self, s: C64) -> Self {
        QuadraticForm { m: Mat::from_fn(self.dim(), self.dim(), |i, j| self.m[(i, j)] * s) }
    }

    /// Form of the Hermitian adjoint operator, `−M̄`.
    pub fn adjoint(&self) -> Self {
        QuadraticForm { m: Mat::from_fn(self.dim(), self.dim(), |i, j| -self.m[(i, j)].conj()) }
    }

    /// Disjoint pairs `(a, b, M_ab)` if every mode couples to at most one
    /// other mode.
    fn as_pairs(&self) -> Option<Vec<(usize, usize, C64)>> {
        let n = self.dim();
        let mut partner = vec![usize::MAX; n];
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.m[(i, j)] != C64::new(0.0, 0.0) {
                    if partner[i] != usize::MAX || partner[j] != usize::MAX {
                        return None;
                    }
                    partner[i] = j;
                    partner[j] = i;
                    pairs.push((i, j, self.m[(i, j)]));
                }
            }
        }
        Some(pairs)
    }

    /// `exp(M)`, closed form for disjoint pair rotations, Padé otherwise.
    pub fn exp(&self) -> Mat<C64> {
        match self.as_pairs() {
            Some(pairs) => {
                let mut e = Mat::<C64>::identity(self.dim(), self.dim());
                for (a, b, th) in pairs {
                    let (co, si) = (th.cos(), th.sin());
                    e[(a, a)] = co;
                    e[(b, b)] = co;
                    e[(a, b)] = si;
                    e[(b, a)] = -si;
                }
                e
            }
            None => expm(self.m.as_ref()),
        }
    }
}

fn one_norm(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: MatRef<'_, C64>) -> Mat<C64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |cs: [f64; 4], m: [&Mat<C64>; 4]| -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| (0..4).map(|k| m[k][(i, j)] * cs[k]).sum())
    };
    let u_in = &a6 * lin([B[13], B[11], B[9], 0.0], [&a6, &a4, &a2, &id]);
    let u_in = Mat::from_fn(n, n, |i, j| {
        u_in[(i, j)] + a6[(i, j)] * B[7] + a4[(i, j)] * B[5] + a2[(i, j)] * B[3] + id[(i, j)] * B[1]
    });
    let u = &a * &u_in;
    let v_in = &a6 * lin([B[12], B[10], B[8], 0.0], [&a6, &a4, &a2, &id]);
    let v = Mat::from_fn(n, n, |i, j| {
        v_in[(i, j)] + a6[(i, j)] * B[6] + a4[(i, j)] * B[4] + a2[(i, j)] * B[2] + id[(i, j)] * B[0]
    });
    let p = Mat::from_fn(n, n, |i, j| v[(i, j)] + u[(i, j)]);
    let q = Mat::from_fn(n, n, |i, j| v[(i, j)] - u[(i, j)]);
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Single-particle matrix `Π_k exp(M_k)` of the operator product
/// `Π_k exp(¼ γᵀ M_k γ)`, in list order.
pub fn gaussian_product(forms: &[QuadraticForm]) -> Result<Mat<C64>> {
    let Some(first) = forms.first() else {
        return Err(Error::InvalidParameter("empty product".into()));
    };
    let n = first.dim();
    let mut e = Mat::<C64>::identity(n, n);
    for f in forms {
        if f.dim() != n {
            return Err(Error::SizeMismatch { expected: n, got: f.dim() });
        }
        e = &e * f.exp();
    }
    Ok(e)
}

/// Eigenbasis of `iA`, negative half first.
#[derive(Clone, Debug)]
pub struct GroundBasis {
    u: Mat<C64>,
    spectrum: Vec<f64>,
}

impl GroundBasis {
    pub fn u(&self) -> MatRef<'_, C64> {
        self.u.as_ref()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn modes(&self) -> usize {
        self.spectrum.len() / 2
    }

    pub fn negative_block(&self) -> MatRef<'_, C64> {
        self.u.as_ref().subcols(0, self.modes())
    }

    /// Ground-state energy `Σ (negative eigenvalues) / 2`.
    pub fn energy(&self) -> f64 {
        self.spectrum[..self.modes()].iter().sum::<f64>() / 2.0
    }

    /// `P = U₁U₁†`, the projector on the negative eigenspace.
    pub fn projector(&self) -> Mat<C64> {
        let u1 = self.negative_block();
        u1 * u1.adjoint()
    }
}

pub fn ground_basis(a: MatRef<'_, f64>, gap_tol: f64) -> Result<GroundBasis> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::SizeMismatch { expected: n, got: a.ncols() });
    }
    if n % 2 != 0 || n == 0 {
        return Err(Error::InvalidParameter(format!("need an even, nonzero number of modes, got {n}")));
    }
    for i in 0..n {
        for j in 0..=i {
            if (a[(i, j)] + a[(j, i)]).abs() > ANTISYM_TOL {
                return Err(Error::InvalidParameter(format!("A not antisymmetric at ({i}, {j})")));
            }
        }
    }
    let h = Mat::from_fn(n, n, |i, j| C64::new(0.0, a[(i, j)]));
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidParameter(format!("eigendecomposition failed: {e:?}")))?;
    let spectrum: Vec<f64> = (0..n).map(|k| eig.S()[k].re).collect();
    let min_abs = spectrum.iter().fold(f64::INFINITY, |m, &x| m.min(x.abs()));
    if min_abs < gap_tol {
        return Err(Error::Degenerate { min_abs, tol: gap_tol });
    }
    Ok(GroundBasis { u: eig.U().to_owned(), spectrum })
}

/// Amplitude with its sign bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedAmplitude {
    pub value: C64,
    pub branch_resolved: bool,
    pub path_steps: usize,
}

impl SignedAmplitude {
    pub fn zero() -> Self {
        SignedAmplitude { value: C64::new(0.0, 0.0), branch_resolved: true, path_steps: 0 }
    }
}

/// Logarithm of a nonzero complex number split as `ln|z|` and a unit phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: C64,
    /// Smallest LU pivot magnitude; tiny values flag structural zeros.
    pub min_pivot: f64,
}

impl LogDet {
    pub fn arg(&self) -> f64 {
        self.phase.arg()
    }

    pub fn value(&self) -> C64 {
        self.phase * self.ln_abs.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs < ZERO_DET.ln()
    }

    pub fn is_singular(&self, pivot_tol: f64) -> bool {
        self.is_zero() || self.min_pivot < pivot_tol
    }
}

/// Determinant of a square matrix as a [`LogDet`], from partial-pivot LU.
pub fn log_det(m: MatRef<'_, C64>) -> LogDet {
    let n = m.nrows();
    let lu = m.partial_piv_lu();
    let mut ln_abs = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    let mut min_pivot = f64::INFINITY;
    let u = lu.U();
    for i in 0..n {
        let d = u[(i, i)];
        let r = d.norm();
        min_pivot = min_pivot.min(r);
        if r == 0.0 {
            return LogDet { ln_abs: f64::NEG_INFINITY, phase: C64::new(1.0, 0.0), min_pivot };
        }
        ln_abs += r.ln();
        phase *= d / r;
    }
    let (fwd, _) = lu.P().arrays();
    if perm_is_odd(fwd) {
        phase = -phase;
    }
    LogDet { ln_abs, phase, min_pivot }
}

fn perm_is_odd(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    let mut odd = false;
    for s in 0..p.len() {
        let mut k = s;
        let mut len = 0;
        while !seen[k] {
            seen[k] = true;
            k = p[k];
            len += 1;
        }
        if len > 0 && len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}

/// Principal-branch square root with `arg ∈ (−π/2, π/2]`.
pub fn principal_sqrt(z: C64) -> C64 {
    let mut a = z.arg();
    if a <= -std::f64::consts::PI {
        a = std::f64::consts::PI;
    }
    C64::from_polar(z.norm().sqrt(), a / 2.0)
}

/// `⟨ψ| e^{¼γᵀMγ} |ψ⟩` from `E = e^M`, on the principal branch.
pub fn expectation(basis: &GroundBasis, e: MatRef<'_, C64>) -> Result<SignedAmplitude> {
    let n = basis.u.nrows();
    if e.nrows() != n || e.ncols() != n {
        return Err(Error::SizeMismatch { expected: n, got: e.nrows() });
    }
    let u1 = basis.negative_block();
    let block = u1.adjoint() * e * u1;
    let d = log_det(block.as_ref());
    if d.is_zero() {
        return Ok(SignedAmplitude::zero());
    }
    Ok(SignedAmplitude { value: principal_sqrt(d.value()), branch_resolved: false, path_steps: 0 })
}

/// Fixes the sign of a sampled amplitude path by continuity from `reference`
/// at `t = 0`.
///
/// `compute(t)` may return either sign. Samples are aligned to their
/// predecessor; if any aligned step still turns by more than π/4 the grid is
/// doubled, up to `steps · 2^10` samples.
pub fn sign_resolve(
    mut compute: impl FnMut(f64) -> Result<C64>,
    reference: C64,
    steps: usize,
) -> Result<SignedAmplitude> {
    const MAX_DOUBLINGS: u32 = 10;
    let steps = steps.max(1);
    let mut last_t = 0.0;
    for level in 0..=MAX_DOUBLINGS {
        let n = steps << level;
        let mut prev = reference;
        let mut ok = true;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let mut v = compute(t)?;
            if v.norm() == 0.0 {
                if k == n {
                    return Ok(SignedAmplitude { value: v, branch_resolved: true, path_steps: n });
                }
                continue;
            }
            if (v * prev.conj()).re < 0.0 {
                v = -v;
            }
            if prev.norm() > 0.0 && (v / prev).arg().abs() > std::f64::consts::FRAC_PI_4 {
                ok = false;
                last_t = t;
                break;
            }
            prev = v;
        }
        if ok {
            return Ok(SignedAmplitude { value: prev, branch_resolved: true, path_steps: n });
        }
    }
    Err(Error::Unresolved { t: last_t, steps: steps << MAX_DOUBLINGS })
}

/// Step control for [`track_sqrt`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    /// Imaginary bulge of the contour `s + i h s(1−s)`.
    pub bulge: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Per-step bounds on the deviation from the linear prediction.
    pub max_phase_error: f64,
    pub max_log_error: f64,
    /// An endpoint whose smallest LU pivot falls below this is an exact zero.
    pub singular_pivot: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            bulge: 0.3,
            initial_step: 1.0 / 16.0,
            min_step: 1e-9,
            max_phase_error: std::f64::consts::FRAC_PI_4,
            max_log_error: 0.5,
            singular_pivot: 1e-11,
        }
    }
}

/// Square root of `f(t(1))` continued along `t(s) = s + i h s(1−s)` from
/// `f(0) = 1` with root `+1`.
///
/// Each step predicts `log f` by linear extrapolation from the last two
/// accepted points and accepts the new sample only if both its phase and its
/// log-magnitude stay close to the prediction; otherwise the step is halved.
/// A vanishing endpoint returns exactly zero.
pub fn track_sqrt(
    mut f: impl FnMut(C64) -> Result<LogDet>,
    opts: &PathOptions,
) -> Result<SignedAmplitude> {
    let end = f(c(1.0))?;
    if end.is_singular(opts.singular_pivot) {
        return Ok(SignedAmplitude { value: C64::new(0.0, 0.0), branch_resolved: true, path_steps: 1 });
    }
    let t_of = |s: f64| C64::new(s, opts.bulge * s * (1.0 - s));
    // unwrapped (ln|f|, arg f) at the last two accepted points
    let mut s0 = 0.0;
    let mut l0 = (0.0, 0.0);
    let mut prev: Option<(f64, (f64, f64))> = None;
    let mut ds = opts.initial_step;
    let mut evals = 1;
    while s0 < 1.0 {
        let s1 = (s0 + ds).min(1.0);
        let v = if s1 == 1.0 { end } else { f(t_of(s1))? };
        evals += 1;
        let pred = match prev {
            Some((sp, lp)) => {
                let r = (s1 - s0) / (s0 - sp);
                (l0.0 + r * (l0.0 - lp.0), l0.1 + r * (l0.1 - lp.1))
            }
            None => l0,
        };
        let ok = !v.is_zero() && {
            let dphi = crate::predict::wrap_phase(v.arg() - pred.1);
            let dlog = v.ln_abs - pred.0;
            if dphi.abs() <= opts.max_phase_error && dlog.abs() <= opts.max_log_error {
                let l1 = (v.ln_abs, pred.1 + dphi);
                prev = Some((s0, l0));
                l0 = l1;
                s0 = s1;
                if dphi.abs() < 0.25 * opts.max_phase_error && dlog.abs() < 0.25 * opts.max_log_error {
                    ds *= 2.0;
                }
                true
            } else {
                false
            }
        };
        if !ok {
            ds *= 0.5;
            if ds < opts.min_step {
                return Err(Error::Unresolved { t: s0, steps: evals });
            }
        }
    }
    let value = C64::from_polar((0.5 * l0.0).exp(), 0.5 * l0.1);
    Ok(SignedAmplitude { value, branch_resolved: true, path_steps: evals })
}

/// Pair rotation `exp(θ/2 γ_a γ_b)` on local indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub a: usize,
    pub b: usize,
    pub angle: C64,
}

impl Rotation {
    pub fn new(a: usize, b: usize, angle: f64) -> Self {
        Rotation { a, b, angle: c(angle) }
    }

    /// Complex angle; `iμ` gives the Hermitian `exp((iμ/2) γ_a γ_b)`.
    pub fn complex(a: usize, b: usize, angle: C64) -> Self {
        Rotation { a, b, angle }
    }
}

/// Ground-state expectations of rotation products whose support is a fixed
/// index set.
///
/// With `F = e^M − 1` vanishing outside the support `S`,
/// `det(U₁† e^M U₁) = det(1 + F_SS P_SS)`, so only the support block of
/// the projector is kept.
#[derive(Clone, Debug)]
pub struct RestrictedExpectation {
    p: Mat<C64>,
}

impl RestrictedExpectation {
    /// From an already restricted projector block.
    pub fn new(p: Mat<C64>) -> Self {
        RestrictedExpectation { p }
    }

    pub fn from_basis(basis: &GroundBasis, support: &[usize]) -> Self {
        let full = basis.projector();
        let p = Mat::from_fn(support.len(), support.len(), |i, j| full[(support[i], support[j])]);
        RestrictedExpectation { p }
    }

    /// Block-diagonal copies of `p`, one per replica.
    pub fn replicated(p: MatRef<'_, C64>, replicas: usize) -> Self {
        let s = p.nrows();
        let mut out = Mat::zeros(s * replicas, s * replicas);
        for r in 0..replicas {
            for i in 0..s {
                for j in 0..s {
                    out[(r * s + i, r * s + j)] = p[(i, j)];
                }
            }
        }
        RestrictedExpectation { p: out }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn projector(&self) -> MatRef<'_, C64> {
        self.p.as_ref()
    }

    /// `det(1 + (E(t) − 1) P)` for the rotation product with every angle
    /// scaled by `t`.
    pub fn log_det_at(&self, rots: &[Rotation], t: C64) -> LogDet {
        self.log_det_weighted(rots, &vec![t; rots.len()])
    }

    /// As [`Self::log_det_at`] with a separate angle scale per rotation.
    pub fn log_det_weighted(&self, rots: &[Rotation], scale: &[C64]) -> LogDet {
        let n = self.dim();
        let blocks = RotationBlocks::new(n, rots, scale);
        let mut m = Mat::<C64>::identity(n, n);
        for blk in &blocks.blocks {
            let k = blk.idx.len();
            for (li, &i) in blk.idx.iter().enumerate() {
                for col in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for lk in 0..k {
                        let f = blk.f[li * k + lk];
                        if f != C64::new(0.0, 0.0) {
                            acc += f * self.p[(blk.idx[lk], col)];
                        }
                    }
                    m[(i, col)] += acc;
                }
            }
        }
        log_det(m.as_ref())
    }

    pub fn amplitude(&self, rots: &[Rotation], opts: &PathOptions) -> Result<SignedAmplitude> {
        for r in rots {
            if r.a >= self.dim() || r.b >= self.dim() {
                return Err(Error::SizeMismatch { expected: self.dim(), got: r.a.max(r.b) + 1 });
            }
        }
        track_sqrt(|t| Ok(self.log_det_at(rots, t)), opts)
    }
}

/// `E − 1` for a rotation product, stored per connected block of modes.
struct RotationBlocks {
    blocks: Vec<Block>,
}

struct Block {
    idx: Vec<usize>,
    /// Row-major `(E − 1)` restricted to `idx`.
    f: Vec<C64>,
}

impl RotationBlocks {
    fn new(n: usize, rots: &[Rotation], scale: &[C64]) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in rots {
            let (x, y) = (find(&mut parent, r.a), find(&mut parent, r.b));
            if x != y {
                parent[x] = y;
            }
        }
        let mut root_block = vec![usize::MAX; n];
        let mut local = vec![usize::MAX; n];
        let mut blocks: Vec<Block> = Vec::new();
        let mut touched = vec![false; n];
        for r in rots {
            touched[r.a] = true;
            touched[r.b] = true;
        }
        for i in 0..n {
            if !touched[i] {
                continue;
            }
            let root = find(&mut parent, i);
            if root_block[root] == usize::MAX {
                root_block[root] = blocks.len();
                blocks.push(Block { idx: Vec::new(), f: Vec::new() });
            }
            let b = &mut blocks[root_block[root]];
            local[i] = b.idx.len();
            b.idx.push(i);
        }
        for b in &mut blocks {
            let k = b.idx.len();
            b.f = vec![C64::new(0.0, 0.0); k * k];
            for d in 0..k {
                b.f[d * k + d] = c(1.0);
            }
        }
        // E ← E R, column rotation
        for (r, &t) in rots.iter().zip(scale) {
            let bi = root_block[find(&mut parent, r.a)];
            let b = &mut blocks[bi];
            let k = b.idx.len();
            let (ca, cb) = (local[r.a], local[r.b]);
            let th = t * r.angle;
            let (co, si) = (th.cos(), th.sin());
            for row in 0..k {
                let xa = b.f[row * k + ca];
                let xb = b.f[row * k + cb];
                b.f[row * k + ca] = co * xa - si * xb;
                b.f[row * k + cb] = si * xa + co * xb;
            }
        }
        for b in &mut blocks {
            let k = b.idx.len();
            for d in 0..k {
                b.f[d * k + d] -= c(1.0);
            }
        }
        RotationBlocks { blocks }
    }
}

/// Dense Fock-space representation for small mode counts.
pub mod fock {
    use super::*;

    pub const MAX_MAJORANAS: usize = 12;

    /// Jordan–Wigner Majorana matrices `γ_{2k} = Z^{⊗k} X`,
    /// `γ_{2k+1} = Z^{⊗k} Y`.
    #[derive(Clone, Debug)]
    pub struct FockSpace {
        gammas: Vec<Mat<C64>>,
    }

    fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
        Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
    }

    impl FockSpace {
        pub fn new(majoranas: usize) -> Result<Self> {
            if majoranas > MAX_MAJORANAS {
                return Err(Error::TooLarge { dim: majoranas, max: MAX_MAJORANAS });
            }
            if majoranas % 2 != 0 {
                return Err(Error::InvalidParameter("odd number of Majorana modes".into()));
            }
            let z = C64::new(0.0, 0.0);
            let o = c(1.0);
            let i = C64::new(0.0, 1.0);
            let px = Mat::from_fn(2, 2, |r, s| if r != s { o } else { z });
            let py = Mat::from_fn(2, 2, |r, s| match (r, s) {
                (0, 1) => -i,
                (1, 0) => i,
                _ => z,
            });
            let pz = Mat::from_fn(2, 2, |r, s| match (r, s) {
                (0, 0) => o,
                (1, 1) => -o,
                _ => z,
            });
            let id = Mat::<C64>::identity(2, 2);
            let m = majoranas / 2;
            let mut gammas = Vec::with_capacity(majoranas);
            for k in 0..m {
                for p in [&px, &py] {
                    let mut g = Mat::<C64>::identity(1, 1);
                    for q in 0..m {
                        let f = if q < k {
                            &pz
                        } else if q == k {
                            p
                        } else {
                            &id
                        };
                        g = kron(&g, f);
                    }
                    gammas.push(g);
                }
            }
            Ok(FockSpace { gammas })
        }

        pub fn majoranas(&self) -> usize {
            self.gammas.len()
        }

        pub fn dim(&self) -> usize {
            1 << (self.gammas.len() / 2)
        }

        pub fn gamma(&self, k: usize) -> &Mat<C64> {
            &self.gammas[k]
        }

        /// `¼ Σ M_jk γ_j γ_k`.
        pub fn quadratic(&self, m: MatRef<'_, C64>) -> Mat<C64> {
            let d = self.dim();
            let mut q = Mat::<C64>::zeros(d, d);
            for j in 0..self.gammas.len() {
                for k in 0..self.gammas.len() {
                    let w = m[(j, k)];
                    if w != C64::new(0.0, 0.0) {
                        let gg = &self.gammas[j] * &self.gammas[k];
                        q = Mat::from_fn(d, d, |r, s| q[(r, s)] + gg[(r, s)] * w * 0.25);
                    }
                }
            }
            q
        }

        pub fn operator(&self, form: &QuadraticForm) -> Result<Mat<C64>> {
            if form.dim() != self.majoranas() {
                return Err(Error::SizeMismatch { expected: self.majoranas(), got: form.dim() });
            }
            Ok(taylor_exp(self.quadratic(form.matrix()).as_ref()))
        }

        /// Lowest eigenvector of `(i/4) Σ A γγ`.
        pub fn ground_state(&self, a: MatRef<'_, f64>) -> Result<Vec<C64>> {
            let n = self.majoranas();
            let m = Mat::from_fn(n, n, |i, j| C64::new(0.0, a[(i, j)]));
            let h = self.quadratic(m.as_ref());
            let eig = h
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::InvalidParameter(format!("eigendecomposition failed: {e:?}")))?;
            let u = eig.U();
            Ok((0..self.dim()).map(|k| u[(k, 0)]).collect())
        }
    }

    /// Dense operator of the product of Gaussians, in list order.
    pub fn fock_oracle(forms: &[QuadraticForm], majoranas: usize) -> Result<Mat<C64>> {
        let fs = FockSpace::new(majoranas)?;
        let mut op = Mat::<C64>::identity(fs.dim(), fs.dim());
        for f in forms {
            op = &op * fs.operator(f)?;
        }
        Ok(op)
    }

    pub fn expect(psi: &[C64], op: MatRef<'_, C64>) -> C64 {
        let n = psi.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += op[(i, j)] * psi[j];
            }
            acc += psi[i].conj() * row;
        }
        acc
    }

    /// Exponential by Taylor series with scaling and squaring, kept apart
    /// from the Padé routine so the two can check each other.
    pub fn taylor_exp(a: MatRef<'_, C64>) -> Mat<C64> {
        let n = a.nrows();
        let norm = one_norm(a);
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let scale = 0.5f64.powi(s);
        let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
        let mut sum = Mat::<C64>::identity(n, n);
        let mut term = Mat::<C64>::identity(n, n);
        for k in 1..=30 {
            term = &term * &a;
            let inv = 1.0 / k as f64;
            term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
            sum = Mat::from_fn(n, n, |i, j| sum[(i, j)] + term[(i, j)]);
            if one_norm(term.as_ref()) < 1e-18 {
                break;
            }
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::fock::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_real_antisym(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        a
    }

    fn rand_form(n: usize, rng: &mut ChaCha8Rng, cplx: bool) -> QuadraticForm {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = C64::new(rng.random_range(-1.0..1.0), if cplx { rng.random_range(-1.0..1.0) } else { 0.0 });
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        QuadraticForm::new(m).unwrap()
    }

    fn max_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                d = d.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        d
    }

    #[test]
    fn two_mode_spectrum() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => 2.0,
            (1, 0) => -2.0,
            _ => 0.0,
        });
        let b = ground_basis(a.as_ref(), DEFAULT_GAP_TOL).unwrap();
        assert!((b.spectrum()[0] + 2.0).abs() < 1e-12);
        assert!((b.spectrum()[1] - 2.0).abs() < 1e-12);
        let z = Mat::<f64>::zeros(4, 4);
        assert!(matches!(ground_basis(z.as_ref(), DEFAULT_GAP_TOL), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn pair_identity() {
        // e^{(π/2)γ₁γ₂} = γ₁γ₂, i.e. M₁₂ = π
        let f = QuadraticForm::rotation(2, 0, 1, c(PI)).unwrap();
        let op = fock_oracle(&[f], 2).unwrap();
        let fs = FockSpace::new(2).unwrap();
        let gg = fs.gamma(0) * fs.gamma(1);
        assert!(max_diff(op.as_ref(), gg.as_ref()) < 1e-12);
        let empty = fock_oracle(&[], 4).unwrap();
        assert!(max_diff(empty.as_ref(), Mat::<C64>::identity(4, 4).as_ref()) < 1e-15);
    }

    #[test]
    fn pade_against_taylor_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = rand_form(8, &mut rng, true).scaled(c(3.0));
            let e1 = expm(f.matrix());
            let e2 = taylor_exp(f.matrix());
            assert!(max_diff(e1.as_ref(), e2.as_ref()) < 1e-10 * (1.0 + one_norm(e2.as_ref())));
            let r = rand_form(8, &mut rng, false).scaled(c(4.0));
            let e = r.exp();
            let ete = e.transpose() * &e;
            assert!(max_diff(ete.as_ref(), Mat::<C64>::identity(8, 8).as_ref()) < 1e-10);
        }
    }

    #[test]
    fn commuting_product() {
        let a = QuadraticForm::rotation(4, 0, 1, c(0.7)).unwrap();
        let b = QuadraticForm::rotation(4, 2, 3, c(-1.3)).unwrap();
        let sum = QuadraticForm::new(Mat::from_fn(4, 4, |i, j| a.matrix()[(i, j)] + b.matrix()[(i, j)])).unwrap();
        let p = gaussian_product(&[a, b]).unwrap();
        assert!(max_diff(p.as_ref(), expm(sum.matrix()).as_ref()) < 1e-13);
    }

    #[test]
    fn identity_and_thermal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_real_antisym(10, &mut rng);
        let basis = ground_basis(a.as_ref(), DEFAULT_GAP_TOL).unwrap();
        let id = Mat::<C64>::identity(10, 10);
        let v = expectation(&basis, id.as_ref()).unwrap().value;
        assert!((v - c(1.0)).norm() < 1e-12);
        let beta = 0.4;
        // iβA generates e^{βH}
        let f = QuadraticForm::from_real(a.as_ref()).unwrap().scaled(C64::new(0.0, beta));
        let amp = expectation(&basis, f.exp().as_ref()).unwrap().value;
        assert!(amp.im.abs() < 1e-10 && amp.re > 0.0);
        assert!((amp.re - (beta * basis.energy()).exp()).abs() < 1e-10);
        let fs = FockSpace::new(10).unwrap();
        let psi = fs.ground_state(a.as_ref()).unwrap();
        let op = fs.operator(&f).unwrap();
        let want = expect(&psi, op.as_ref());
        assert!((amp - want).norm() < 1e-9);
    }

    #[test]
    fn sign_resolve_paths() {
        let v0 = C64::new(0.3, 0.2);
        let r = sign_resolve(|_| Ok(-v0), v0, 8).unwrap();
        assert!((r.value - v0).norm() < 1e-15);
        let r = sign_resolve(|t| Ok(v0 * C64::from_polar(1.0, PI * t)), v0, 32).unwrap();
        assert!((r.value + v0).norm() < 1e-12);
    }

    #[test]
    fn track_sqrt_follows_phase() {
        // f(t) = e^{iωt}, root e^{iω/2}, past several turns
        let w = 9.0;
        let opts = PathOptions::default();
        let r = track_sqrt(|t| Ok(LogDet { ln_abs: -w * t.im, phase: C64::from_polar(1.0, w * t.re), min_pivot: 1.0 }), &opts)
            .unwrap();
        assert!((r.value - C64::from_polar(1.0, w / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn restricted_matches_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = rand_real_antisym(12, &mut rng);
        let basis = ground_basis(a.as_ref(), DEFAULT_GAP_TOL).unwrap();
        let support = [1usize, 4, 5, 9];
        let rx = RestrictedExpectation::from_basis(&basis, &support);
        let rots = [Rotation::new(0, 1, 1.1), Rotation::new(2, 3, PI), Rotation::new(1, 2, PI / 2.0)];
        let forms: Vec<_> = rots
            .iter()
            .map(|r| QuadraticForm::rotation(12, support[r.a], support[r.b], r.angle).unwrap())
            .collect();
        let e = gaussian_product(&forms).unwrap();
        let full = expectation(&basis, e.as_ref()).unwrap().value;
        let amp = rx.amplitude(&rots, &PathOptions::default()).unwrap().value;
        assert!((amp * amp - full * full).norm() < 1e-10);
        assert!((amp - full).norm() < 1e-10 || (amp + full).norm() < 1e-10);
        let op = fock_oracle(&forms, 12).unwrap();
        let psi = FockSpace::new(12).unwrap().ground_state(a.as_ref()).unwrap();
        let want = expect(&psi, op.as_ref());
        assert!((amp - want).norm() < 1e-9, "{amp} vs {want}");
    }

    #[test]
    fn log_det_sign() {
        let m = Mat::from_fn(3, 3, |i, j| if (i + 1) % 3 == j { c(2.0) } else { C64::new(0.0, 0.0) });
        let d = log_det(m.as_ref());
        assert!((d.value() - c(8.0)).norm() < 1e-12);
        let m = Mat::from_fn(2, 2, |i, j| if i != j { c(1.0) } else { C64::new(0.0, 0.0) });
        assert!((log_det(m.as_ref()).value() + c(1.0)).norm() < 1e-12);
    }
}
