//! Charged Rényi modular commutator on a two-copy Majorana Chern insulator.
//!
//! Each site carries one c Majorana per copy; the pair forms a complex
//! fermion `f = (c¹ + i c²)/2` with charge `Q = f†f − ½ = (i/2) c¹c²`.
//! Both copies share the c-sector Kitaev matrix at `u = +1` (with the torus
//! boundary signs of the chosen sector), so the doubled model has a U(1)
//! symmetry rotating the copies into each other.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{self, GroundBasis, LogDet, PathOptions, RestrictedExpectation, Rotation, C64};
use crate::kitaev::{c_matrix, link_signs, KitaevParams, TorusSector};
use crate::lattice::{default_regions, HoneycombLattice, RegionMap};
use crate::perm::{Permutation, Region};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernParams {
    pub n_s: usize,
    pub j: f64,
    pub k: f64,
    /// `None` takes the first gapped sector of [`TorusSector::ALL`].
    pub sector: Option<TorusSector>,
}

impl ChernParams {
    pub fn new(n_s: usize, j: f64, k: f64) -> Self {
        ChernParams { n_s, j, k, sector: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0.0 {
            return Err(Error::InvalidParameter("K = 0 leaves the Majorana model gapless".into()));
        }
        if self.j == 0.0 {
            return Err(Error::InvalidParameter("J must be nonzero".into()));
        }
        Ok(())
    }

    fn single_copy(&self) -> KitaevParams {
        KitaevParams { jx: self.j, jy: self.j, jz: self.j, ..KitaevParams::isotropic(self.k, self.n_s) }
    }
}

/// `μ` beyond `n_s / 4` is outside the regime where the phase is quadratic.
pub fn mu_in_window(mu: f64, n_s: usize) -> bool {
    mu.abs() <= n_s as f64 / 4.0
}

/// Majorana index of copy `copy` at `site` in the doubled model.
pub fn doubled_index(site: usize, copy: usize) -> usize {
    2 * site + copy
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChernResult {
    pub measure: String,
    pub mu: f64,
    pub n: usize,
    pub value: C64,
    pub magnitude: f64,
    pub phase: f64,
    pub path_steps: usize,
    pub params: ChernParams,
    pub in_window: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct ChernSystem {
    pub params: ChernParams,
    pub lattice: HoneycombLattice,
    pub regions: RegionMap,
    pub sector: TorusSector,
    single: Mat<f64>,
    basis: GroundBasis,
}

impl ChernSystem {
    pub fn new(params: ChernParams) -> Result<Self> {
        params.validate()?;
        let lattice = HoneycombLattice::build(params.n_s)?;
        let regions = default_regions(&lattice);
        Self::with_regions(params, lattice, regions)
    }

    pub fn with_regions(params: ChernParams, lattice: HoneycombLattice, regions: RegionMap) -> Result<Self> {
        params.validate()?;
        let kp = params.single_copy();
        let candidates: Vec<TorusSector> = match params.sector {
            Some(s) => vec![s],
            None => TorusSector::ALL.to_vec(),
        };
        let mut last = None;
        for s in candidates {
            let single = c_matrix(&kp, &lattice, &link_signs(&lattice, s));
            match gauss::ground_basis(single.as_ref(), gauss::DEFAULT_GAP_TOL) {
                Ok(basis) => return Ok(ChernSystem { params, lattice, regions, sector: s, single, basis }),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or(Error::InvalidParameter("no torus sector".into())))
    }

    /// Real antisymmetric matrix of the doubled model, copies interleaved
    /// per site as in [`doubled_index`].
    pub fn hamiltonian(&self) -> Mat<f64> {
        let n = self.single.nrows();
        Mat::from_fn(2 * n, 2 * n, |i, j| if i % 2 == j % 2 { self.single[(i / 2, j / 2)] } else { 0.0 })
    }

    /// Copy-rotation generator `Ω`, `exp(θ Ω)` mixing `c¹` and `c²` on every
    /// site.
    pub fn u1_generator(&self) -> Mat<f64> {
        let n = self.single.nrows();
        Mat::from_fn(2 * n, 2 * n, |i, j| {
            if i / 2 != j / 2 || i == j {
                0.0
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn single_copy_spectrum(&self) -> &[f64] {
        self.basis.spectrum()
    }

    /// `arg ⟨ψ^{⊗n+1}| e^{μ Q_AC} π_AB |ψ^{⊗n+1}⟩`, with `π_AB` the cycle
    /// `1 → 2 → … → n+1` and the charge on replica 1.
    pub fn evaluate(&self, mu: f64, n: usize, path: &PathOptions) -> Result<ChernResult> {
        if n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
        }
        let all: Vec<usize> = (0..=n).collect();
        let mut map = all.clone();
        for k in 0..all.len() {
            map[all[k]] = all[(k + 1) % all.len()];
        }
        let cycle = Permutation::from_images(map)?;
        self.evaluate_with(mu, &cycle, true, path)
            .map(|(value, steps, t)| self.result(format!("S{n}"), mu, n, value, steps, t))
    }

    fn result(&self, measure: String, mu: f64, n: usize, value: C64, path_steps: usize, t: f64) -> ChernResult {
        ChernResult {
            measure,
            mu,
            n,
            value,
            magnitude: value.norm(),
            phase: value.arg(),
            path_steps,
            params: self.params.clone(),
            in_window: mu_in_window(mu, self.params.n_s),
            wall_time_s: t,
        }
    }

    /// Expectation of `e^{μQ_AC} π` (`charge_first`) or `π e^{μQ_AC}`, for
    /// an arbitrary replica permutation `π` on region AB.
    ///
    /// The value at `μ = 0` is a moment of `ρ_AB` and is anchored real
    /// positive; the charge is then switched on along a complex detour.
    pub fn evaluate_with(&self, mu: f64, perm: &Permutation, charge_first: bool, path: &PathOptions) -> Result<(C64, usize, f64)> {
        let start = Instant::now();
        let r = perm.size();
        let support: Vec<usize> = (0..self.lattice.num_sites()).filter(|&i| self.regions.label(i) != Region::Lambda).collect();
        let s0 = 2 * support.len();
        let mut loc = vec![usize::MAX; self.lattice.num_sites()];
        for (k, &i) in support.iter().enumerate() {
            loc[i] = k;
        }
        let p1 = self.basis.projector();
        let block = Mat::from_fn(s0, s0, |a, b| {
            if a % 2 != b % 2 {
                C64::new(0.0, 0.0)
            } else {
                p1[(support[a / 2], support[b / 2])]
            }
        });
        let exp = RestrictedExpectation::replicated(block.as_ref(), r);

        let mut charge = Vec::new();
        for &i in &support {
            if matches!(self.regions.label(i), Region::A | Region::C) {
                let k = loc[i];
                charge.push(Rotation::complex(doubled_index(k, 0), doubled_index(k, 1), C64::new(0.0, mu)));
            }
        }
        let mut swaps = Vec::new();
        for (a, b) in perm.transpositions() {
            for &i in &support {
                if matches!(self.regions.label(i), Region::A | Region::B) {
                    for copy in 0..2 {
                        let k = doubled_index(loc[i], copy);
                        swaps.push(Rotation::new(a * s0 + k, b * s0 + k, FRAC_PI_2));
                    }
                }
            }
        }
        let (rots, is_charge): (Vec<Rotation>, Vec<bool>) = if charge_first {
            (charge.iter().chain(&swaps).copied().collect(), charge.iter().map(|_| true).chain(swaps.iter().map(|_| false)).collect())
        } else {
            (swaps.iter().chain(&charge).copied().collect(), swaps.iter().map(|_| false).chain(charge.iter().map(|_| true)).collect())
        };
        let at = |t: C64| -> LogDet {
            let scale: Vec<C64> = is_charge.iter().map(|&q| if q { t } else { C64::new(1.0, 0.0) }).collect();
            exp.log_det_weighted(&rots, &scale)
        };
        let base = at(C64::new(0.0, 0.0));
        if base.is_singular(path.singular_pivot) {
            return Ok((C64::new(0.0, 0.0), 1, start.elapsed().as_secs_f64()));
        }
        let amp = gauss::track_sqrt(
            |t| {
                let ld = at(t);
                Ok(LogDet { ln_abs: ld.ln_abs - base.ln_abs, phase: ld.phase / base.phase, min_pivot: ld.min_pivot })
            },
            path,
        )?;
        let value = amp.value * (0.5 * base.ln_abs).exp();
        Ok((value, amp.path_steps, start.elapsed().as_secs_f64()))
    }
}

/// Least-squares fit of `phase = A μ^η` on a log–log scale; points with
/// nonpositive phase or μ are skipped.
pub fn power_law_fit(mu: &[f64], phase: &[f64]) -> Result<(f64, f64)> {
    if mu.len() != phase.len() {
        return Err(Error::SizeMismatch { expected: mu.len(), got: phase.len() });
    }
    let pts: Vec<(f64, f64)> = mu.iter().zip(phase).filter(|(m, p)| **m > 0.0 && **p > 0.0).map(|(m, p)| (m.ln(), p.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("power-law fit needs two positive points".into()));
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs distinct μ".into()));
    }
    let eta = sxy / sxx;
    Ok(((my - eta * mx).exp(), eta))
}
