//! Kitaev honeycomb model in the Majorana representation and the gauge-sector
//! sum for permutation measures.
//!
//! Each site carries four Majoranas `b^x, b^y, b^z, c`, indexed `4i + α` and
//! `4i + 3`. The physical projection `Π_i (1 + D_i)/2` with
//! `D_i = b^x b^y b^z c` is expanded region by region, giving one Gaussian
//! summand per choice of applied gauge operators `G_{I,r}`. Summands that
//! vanish by the orbit-parity rule are skipped before evaluation.
//!
//! Two evaluators are provided. [`Method::Literal`] continues every summand
//! on the full b+c support. [`Method::Factorized`] uses that the reference
//! state is a product of a c-sector state and bond dimers: the b Majoranas
//! of a summand are normal-ordered bond by bond, each bond factor is a tiny
//! exact Fock computation, and only the c part needs a determinant. The two
//! agree whenever every region holds an even number of sites.

use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{self, GroundBasis, PathOptions, RestrictedExpectation, Rotation, C64};
use crate::lattice::{default_regions, BondLabel, HoneycombLattice, RegionMap, Sublattice};
use crate::perm::{MeasureSpec, Permutation, Region};

use std::f64::consts::{FRAC_PI_2, PI};

/// Boundary signs of the link variables on the torus.
///
/// `x` flips the bonds crossing the vertical seam, `y` those crossing the
/// horizontal seam. Only one of the four sectors has the physical
/// fermion parity for a given lattice and coupling set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusSector {
    pub x: bool,
    pub y: bool,
}

impl TorusSector {
    pub const ALL: [TorusSector; 4] = [
        TorusSector { x: true, y: false },
        TorusSector { x: false, y: true },
        TorusSector { x: true, y: true },
        TorusSector { x: false, y: false },
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KitaevParams {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub k: f64,
    pub n_s: usize,
    pub gauge_pin: f64,
    /// `None` picks the first sector of [`TorusSector::ALL`] with even
    /// global gauge parity.
    pub sector: Option<TorusSector>,
}

impl KitaevParams {
    pub fn isotropic(k: f64, n_s: usize) -> Self {
        KitaevParams { jx: 1.0, jy: 1.0, jz: 1.0, k, n_s, gauge_pin: 1.0, sector: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.jx == 0.0 && self.jy == 0.0 && self.jz == 0.0 {
            return Err(Error::InvalidParameter("all couplings vanish".into()));
        }
        if !(self.gauge_pin > 0.0) {
            return Err(Error::InvalidParameter(format!("gauge_pin must be positive, got {}", self.gauge_pin)));
        }
        Ok(())
    }

    pub fn coupling(&self, label: BondLabel) -> f64 {
        match label {
            BondLabel::X => self.jx,
            BondLabel::Y => self.jy,
            BondLabel::Z => self.jz,
        }
    }
}

/// Link variable `u` (even → odd) of every bond in a sector.
pub fn link_signs(lat: &HoneycombLattice, sector: TorusSector) -> Vec<f64> {
    lat.nn_bonds
        .iter()
        .map(|b| {
            let flip = (sector.x && b.wraps_x) ^ (sector.y && b.wraps_y);
            if flip {
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

/// `u_{pq}` seen from `p`: `+u` if `p` is even.
fn u_dir(lat: &HoneycombLattice, u: &[f64], p: usize, label: BondLabel) -> f64 {
    let b = lat.bond_of(p, label);
    if lat.sites[p].sub == Sublattice::Even {
        u[b]
    } else {
        -u[b]
    }
}

/// c-sector couplings: `A_eo = 2 J_α u` and, for each next-nearest pair
/// `i → j` through `k`, `A_ij = 2K · sign · u_ik u_kj`.
pub fn c_matrix(params: &KitaevParams, lat: &HoneycombLattice, u: &[f64]) -> Mat<f64> {
    let n = lat.num_sites();
    let mut a = Mat::<f64>::zeros(n, n);
    for (k, b) in lat.nn_bonds.iter().enumerate() {
        let v = 2.0 * params.coupling(b.label) * u[k];
        a[(b.even, b.odd)] += v;
        a[(b.odd, b.even)] -= v;
    }
    if params.k != 0.0 {
        for t in &lat.nnn_bonds {
            let li = label_between(lat, t.i, t.via);
            let lj = label_between(lat, t.via, t.j);
            let v = 2.0 * params.k * f64::from(t.sign) * u_dir(lat, u, t.i, li) * u_dir(lat, u, t.via, lj);
            a[(t.i, t.j)] += v;
            a[(t.j, t.i)] -= v;
        }
    }
    a
}

fn label_between(lat: &HoneycombLattice, p: usize, q: usize) -> BondLabel {
    BondLabel::ALL.into_iter().find(|&l| lat.neighbor(p, l) == q).expect("sites are not neighbours")
}

/// Full quadratic Hamiltonian on `4N` Majoranas: the c couplings plus the
/// pinning `A_{b_e^α b_o^α} = −2Δu` that fixes `⟨i b_e b_o⟩ = u`.
pub fn build_hamiltonian(params: &KitaevParams, lat: &HoneycombLattice, u: &[f64]) -> Mat<f64> {
    let n = lat.num_sites();
    let ac = c_matrix(params, lat, u);
    let mut a = Mat::<f64>::zeros(4 * n, 4 * n);
    for i in 0..n {
        for j in 0..n {
            a[(4 * i + 3, 4 * j + 3)] = ac[(i, j)];
        }
    }
    for (k, b) in lat.nn_bonds.iter().enumerate() {
        let al = b.label.index();
        let v = -2.0 * params.gauge_pin * u[k];
        a[(4 * b.even + al, 4 * b.odd + al)] += v;
        a[(4 * b.odd + al, 4 * b.even + al)] -= v;
    }
    a
}

/// Majorana index of `(site, flavour)` with flavour 0..3 = x, y, z, c.
pub fn majorana(site: usize, flavour: usize) -> usize {
    4 * site + flavour
}

/// Replica swaps of `π` on the sites of `region`, as pair rotations on the
/// replicated index `r · 4N + m`. Each transposition `(r q)` contributes
/// `exp(π/4 Σ_m γ_{r,m} γ_{q,m})` over the four Majoranas of every site.
pub fn permutation_operator(pi: &Permutation, sites: &[usize], n_sites: usize) -> Vec<Rotation> {
    let stride = 4 * n_sites;
    let mut rots = Vec::new();
    for (r, q) in pi.transpositions() {
        for &i in sites {
            for f in 0..4 {
                rots.push(Rotation::new(r * stride + majorana(i, f), q * stride + majorana(i, f), FRAC_PI_2));
            }
        }
    }
    rots
}

/// `Π_{i∈sites} D_i` on replica `r` as `exp(π/2 b^x b^y) exp(π/2 b^z c)` per
/// site.
pub fn gauge_operator(sites: &[usize], replica: usize, n_sites: usize) -> Vec<Rotation> {
    let base = replica * 4 * n_sites;
    let mut rots = Vec::with_capacity(2 * sites.len());
    for &i in sites {
        rots.push(Rotation::new(base + majorana(i, 0), base + majorana(i, 1), PI));
        rots.push(Rotation::new(base + majorana(i, 2), base + majorana(i, 3), PI));
    }
    rots
}

/// Applied gauge flags, bit `I·R + r` for region I ∈ {A, B, C}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GaugeSector {
    pub bits: u64,
    pub replicas: usize,
}

impl GaugeSector {
    pub fn applied(&self, region: Region, r: usize) -> bool {
        match region {
            Region::Lambda => false,
            _ => self.bits >> (region.index() * self.replicas + r) & 1 == 1,
        }
    }

    pub fn count_applied(&self) -> u32 {
        self.bits.count_ones()
    }
}

/// One orbit constraint: sectors whose overlap with `mask` has parity
/// different from `odd` vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParityMask {
    pub mask: u64,
    pub odd: bool,
}

impl ParityMask {
    pub fn admits(&self, bits: u64) -> bool {
        ((self.mask & bits).count_ones() % 2 == 1) == self.odd
    }
}

/// Region pairs joined by at least one nearest-neighbour bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacency(u16);

impl Adjacency {
    /// Every pair adjacent, as for the default layouts.
    pub const ALL: Adjacency = Adjacency(u16::MAX);

    pub fn of(lat: &HoneycombLattice, regions: &RegionMap) -> Self {
        let mut bits = 0u16;
        for b in &lat.nn_bonds {
            let (x, y) = (regions.label(b.even).index(), regions.label(b.odd).index());
            bits |= 1 << (4 * x + y) | 1 << (4 * y + x);
        }
        Adjacency(bits)
    }

    pub fn contains(self, a: Region, b: Region) -> bool {
        self.0 >> (4 * a.index() + b.index()) & 1 == 1
    }
}

/// Orbit constraints for every adjacent region pair `(I, J)`, one per orbit
/// of `π_I π_J⁻¹`. Pairs without a shared bond impose nothing.
///
/// The linear part counts gauge insertions on the orbit. The target parity
/// depends on the orientation of the fermionic transpositions, so it is read
/// off one nonzero word of a two-ended bond carrying `π_I` and `π_J`.
pub fn parity_masks(spec: &MeasureSpec, adj: Adjacency) -> Vec<ParityMask> {
    let r = spec.replicas();
    let mut masks = Vec::new();
    for (ia, a) in Region::ALL.iter().enumerate() {
        for b in Region::ALL[ia + 1..].iter().filter(|b| adj.contains(*a, **b)) {
            let q = spec.relative(*a, *b);
            let mut swaps: Vec<(u8, usize, usize)> = spec.perm(*a).transpositions().into_iter().map(|(x, y)| (0, x, y)).collect();
            swaps.extend(spec.perm(*b).transpositions().into_iter().map(|(x, y)| (1, x, y)));
            let witness = bond_witness(r, [*a, *b], &swaps);
            for cyc in q.cycles() {
                let mut m = 0u64;
                let mut odd = false;
                for &k in &cyc {
                    for (end, reg) in [*a, *b].into_iter().enumerate() {
                        if reg != Region::Lambda {
                            m ^= 1 << (reg.index() * r + k);
                            odd ^= witness >> (end * r + k) & 1 == 1;
                        }
                    }
                }
                if m != 0 {
                    masks.push(ParityMask { mask: m, odd });
                }
            }
        }
    }
    masks.sort_unstable();
    masks.dedup();
    masks
}

// Lowest word (end 0 bits low, end 1 bits high) with a nonzero bond factor.
fn bond_witness(r: usize, ends: [Region; 2], swaps: &[(u8, usize, usize)]) -> u64 {
    let free = |reg: Region| if reg == Region::Lambda { 0u64 } else { (1 << r) - 1 };
    let allowed = free(ends[0]) | free(ends[1]) << r;
    let mut w = 0u64;
    loop {
        let word: Vec<(usize, u8)> = (0..2 * r).filter(|&k| w >> k & 1 == 1).map(|k| (k % r, (k / r) as u8)).collect();
        if bond_expectation(r, 1.0, &word, swaps).norm() > 1e-12 {
            return w;
        }
        // next subset of the allowed bits
        w = (w.wrapping_sub(allowed)) & allowed;
        if w == 0 {
            return 0;
        }
    }
}

/// True iff the sector is removed by the orbit-parity rule.
pub fn prune(sector: GaugeSector, spec: &MeasureSpec, adj: Adjacency) -> bool {
    parity_masks(spec, adj).iter().any(|m| !m.admits(sector.bits))
}

/// All sectors surviving the parity rule, in increasing bit order.
pub fn surviving_sectors(spec: &MeasureSpec, adj: Adjacency) -> Vec<GaugeSector> {
    let r = spec.replicas();
    let masks = parity_masks(spec, adj);
    let total: u64 = 1 << (3 * r);
    (0..total)
        .filter(|&bits| masks.iter().all(|m| m.admits(bits)))
        .map(|bits| GaugeSector { bits, replicas: r })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[default]
    Factorized,
    Literal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalOptions {
    pub method: Method,
    pub prune: bool,
    pub gap_tol: f64,
    pub path: PathOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { method: Method::Factorized, prune: true, gap_tol: gauss::DEFAULT_GAP_TOL, path: PathOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureResult {
    pub measure: String,
    pub value: C64,
    pub magnitude: f64,
    pub phase: f64,
    pub sectors_evaluated: usize,
    pub sectors_pruned: usize,
    pub path_steps: usize,
    pub params: KitaevParams,
    pub wall_time_s: f64,
}

/// Lattice, regions and the chosen gauge background.
#[derive(Clone, Debug)]
pub struct KitaevSystem {
    pub params: KitaevParams,
    pub lattice: HoneycombLattice,
    pub regions: RegionMap,
    pub sector: TorusSector,
    pub u: Vec<f64>,
    pub adjacency: Adjacency,
    gap_tol: f64,
}

impl KitaevSystem {
    /// Torus of `params.n_s` with the default regions.
    pub fn new(params: KitaevParams) -> Result<Self> {
        let lattice = HoneycombLattice::build(params.n_s)?;
        let regions = default_regions(&lattice);
        Self::with_regions(params, lattice, regions)
    }

    pub fn with_regions(params: KitaevParams, lattice: HoneycombLattice, regions: RegionMap) -> Result<Self> {
        params.validate()?;
        if regions.labels.len() != lattice.num_sites() {
            return Err(Error::SizeMismatch { expected: lattice.num_sites(), got: regions.labels.len() });
        }
        let gap_tol = gauss::DEFAULT_GAP_TOL;
        let sector = match params.sector {
            Some(s) => s,
            None => select_sector(&params, &lattice, gap_tol)?,
        };
        let u = link_signs(&lattice, sector);
        let adjacency = Adjacency::of(&lattice, &regions);
        Ok(KitaevSystem { params, lattice, regions, sector, u, adjacency, gap_tol })
    }

    pub fn c_matrix(&self) -> Mat<f64> {
        c_matrix(&self.params, &self.lattice, &self.u)
    }

    pub fn hamiltonian(&self) -> Mat<f64> {
        build_hamiltonian(&self.params, &self.lattice, &self.u)
    }

    pub fn c_basis(&self) -> Result<GroundBasis> {
        gauss::ground_basis(self.c_matrix().as_ref(), self.gap_tol)
    }

    /// `⟨Π_i D_i⟩` over the whole lattice: ±1 for a gapped state, and the
    /// projected state vanishes unless it is +1.
    pub fn gauge_parity(&self) -> Result<f64> {
        gauge_parity(&self.params, &self.lattice, &self.u, self.gap_tol)
    }

    pub fn evaluate(&self, spec: &MeasureSpec, opts: &EvalOptions) -> Result<MeasureResult> {
        let start = Instant::now();
        let sectors = if opts.prune {
            surviving_sectors(spec, self.adjacency)
        } else {
            let r = spec.replicas();
            (0..1u64 << (3 * r)).map(|bits| GaugeSector { bits, replicas: r }).collect()
        };
        let total = 1usize << (3 * spec.replicas());
        let parts: Vec<(C64, usize)> = match opts.method {
            Method::Factorized => {
                let eng = FactorizedEngine::for_spec(self, spec, opts)?;
                sectors.par_iter().map(|s| eng.summand(*s)).collect::<Result<Vec<_>>>()?
            }
            Method::Literal => {
                let eng = LiteralEngine::for_spec(self, spec, opts)?;
                sectors.par_iter().map(|s| eng.summand(*s)).collect::<Result<Vec<_>>>()?
            }
        };
        // ordered reduction
        let mut value = C64::new(0.0, 0.0);
        let mut steps = 0;
        for (v, n) in parts {
            value += v;
            steps += n;
        }
        Ok(MeasureResult {
            measure: spec.name.clone(),
            value,
            magnitude: value.norm(),
            phase: value.arg(),
            sectors_evaluated: sectors.len(),
            sectors_pruned: total - sectors.len(),
            path_steps: steps,
            params: self.params.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    /// One summand, evaluated regardless of pruning.
    pub fn sector_value(&self, spec: &MeasureSpec, sector: GaugeSector, opts: &EvalOptions) -> Result<C64> {
        Ok(match opts.method {
            Method::Factorized => FactorizedEngine::for_spec(self, spec, opts)?.summand(sector)?.0,
            Method::Literal => LiteralEngine::for_spec(self, spec, opts)?.summand(sector)?.0,
        })
    }
}

/// First sector (in [`TorusSector::ALL`] order) with gauge parity +1.
pub fn select_sector(params: &KitaevParams, lat: &HoneycombLattice, gap_tol: f64) -> Result<TorusSector> {
    let mut last = None;
    for s in TorusSector::ALL {
        let u = link_signs(lat, s);
        match gauge_parity(params, lat, &u, gap_tol) {
            Ok(p) if p > 0.5 => return Ok(s),
            Ok(_) => {}
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::InvalidParameter("no torus sector with even gauge parity".into())))
}

fn gauge_parity(params: &KitaevParams, lat: &HoneycombLattice, u: &[f64], gap_tol: f64) -> Result<f64> {
    let all: Vec<usize> = (0..lat.num_sites()).collect();
    let basis = gauss::ground_basis(c_matrix(params, lat, u).as_ref(), gap_tol)?;
    let groups = vec![all.clone()];
    let labels = vec![0usize; lat.num_sites()];
    let eng = FactorizedEngine::build(lat, u, &basis, &all, &labels, groups, vec![Permutation::identity(1)], 1, PathOptions::default())?;
    let (v, _) = eng.summand_groups(&[(0, 0)])?;
    Ok(v.re)
}

/// Spec permutations per region, A, B, C.
fn region_perms(spec: &MeasureSpec) -> Vec<Permutation> {
    vec![spec.pi_a().clone(), spec.pi_b().clone(), spec.pi_c().clone()]
}

fn applied_groups(sector: GaugeSector) -> Vec<(usize, usize)> {
    let r = sector.replicas;
    let mut out = Vec::new();
    for g in 0..3 {
        for rep in 0..r {
            if sector.bits >> (g * r + rep) & 1 == 1 {
                out.push((g, rep));
            }
        }
    }
    out
}

/// b/c factorized evaluator.
struct FactorizedEngine {
    replicas: usize,
    /// Support-local index of each site, `usize::MAX` outside.
    loc: Vec<usize>,
    s0: usize,
    groups: Vec<Vec<usize>>,
    perms: Vec<Permutation>,
    cexp: RestrictedExpectation,
    prot: Vec<Rotation>,
    /// Bonds touching the support: (bond, even group, odd group, u).
    bonds: Vec<(usize, usize, usize, f64)>,
    /// Site → [bond per label].
    site_bonds: Vec<[usize; 3]>,
    site_even: Vec<bool>,
    path: PathOptions,
}

impl FactorizedEngine {
    fn for_spec(sys: &KitaevSystem, spec: &MeasureSpec, opts: &EvalOptions) -> Result<Self> {
        let basis = gauss::ground_basis(sys.c_matrix().as_ref(), opts.gap_tol)?;
        let support: Vec<usize> =
            (0..sys.lattice.num_sites()).filter(|&i| sys.regions.label(i) != Region::Lambda).collect();
        let groups: Vec<Vec<usize>> = [Region::A, Region::B, Region::C].iter().map(|&r| sys.regions.sites(r)).collect();
        for (g, sites) in groups.iter().enumerate() {
            if sites.len() % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "factorized evaluation needs even regions; {} has {} sites",
                    Region::from_index(g).symbol(),
                    sites.len()
                )));
            }
        }
        let labels: Vec<usize> = sys.regions.labels.iter().map(|r| r.index()).collect();
        Self::build(&sys.lattice, &sys.u, &basis, &support, &labels, groups, region_perms(spec), spec.replicas(), opts.path)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        lat: &HoneycombLattice,
        u: &[f64],
        basis: &GroundBasis,
        support: &[usize],
        labels: &[usize],
        groups: Vec<Vec<usize>>,
        perms: Vec<Permutation>,
        replicas: usize,
        path: PathOptions,
    ) -> Result<Self> {
        let n = lat.num_sites();
        let mut loc = vec![usize::MAX; n];
        for (k, &i) in support.iter().enumerate() {
            loc[i] = k;
        }
        let s0 = support.len();
        let full = basis.projector();
        let pc = Mat::from_fn(s0, s0, |i, j| full[(support[i], support[j])]);
        let cexp = RestrictedExpectation::replicated(pc.as_ref(), replicas);
        let mut prot = Vec::new();
        for (g, p) in perms.iter().enumerate() {
            for (r, q) in p.transpositions() {
                for &i in &groups[g] {
                    prot.push(Rotation::new(r * s0 + loc[i], q * s0 + loc[i], FRAC_PI_2));
                }
            }
        }
        let group_of: Vec<usize> = (0..n).map(|i| if loc[i] == usize::MAX { usize::MAX } else { labels[i] }).collect();
        let bonds = lat
            .nn_bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| loc[b.even] != usize::MAX || loc[b.odd] != usize::MAX)
            .map(|(k, b)| (k, group_of[b.even], group_of[b.odd], u[k]))
            .collect();
        let site_bonds = (0..n).map(|i| [0, 1, 2].map(|l| lat.bond_of(i, BondLabel::ALL[l]))).collect();
        let site_even = lat.sites.iter().map(|s| s.sub == Sublattice::Even).collect();
        Ok(FactorizedEngine { replicas, loc, s0, groups, perms, cexp, prot, bonds, site_bonds, site_even, path })
    }

    fn summand(&self, sector: GaugeSector) -> Result<(C64, usize)> {
        self.summand_groups(&applied_groups(sector))
    }

    /// Summand for the applied `(group, replica)` list, in that order.
    fn summand_groups(&self, applied: &[(usize, usize)]) -> Result<(C64, usize)> {
        let mut sigma = 1.0;
        let mut crot = Vec::new();
        // (bond, end, replica) in operator order
        let mut word: Vec<(usize, u8, usize)> = Vec::new();
        for &(g, r) in applied {
            let ss = &self.groups[g];
            let k = ss.len();
            if (k * (k.saturating_sub(1)) / 2) % 2 == 1 {
                sigma = -sigma;
            }
            for pair in ss.chunks(2) {
                if let [a, b] = *pair {
                    crot.push(Rotation::new(r * self.s0 + self.loc[a], r * self.s0 + self.loc[b], PI));
                }
            }
            for &i in ss {
                let end = if self.site_even[i] { 0 } else { 1 };
                for l in 0..3 {
                    word.push((self.site_bonds[i][l], end, r));
                }
            }
        }
        // stable sort by bond; the sign is the parity of the reordering
        let keys: Vec<usize> = word.iter().map(|w| w.0).collect();
        let odd = inversion_parity(&keys);
        let mut order: Vec<usize> = (0..word.len()).collect();
        order.sort_by_key(|&j| keys[j]);
        let mut per_bond: Vec<(usize, Vec<(usize, u8)>)> = Vec::new();
        for &j in &order {
            let (b, end, r) = word[j];
            match per_bond.last_mut() {
                Some((lb, v)) if *lb == b => v.push((r, end)),
                _ => per_bond.push((b, vec![(r, end)])),
            }
        }
        let mut bval = C64::new(if odd { -sigma } else { sigma }, 0.0);
        let mut cursor = 0;
        for &(k, ge, go, u) in &self.bonds {
            while cursor < per_bond.len() && per_bond[cursor].0 < k {
                // a word element on a bond outside the support cannot occur
                cursor += 1;
            }
            let w: &[(usize, u8)] = if cursor < per_bond.len() && per_bond[cursor].0 == k { &per_bond[cursor].1 } else { &[] };
            let mut pp: Vec<(u8, usize, usize)> = Vec::new();
            for (g, p) in self.perms.iter().enumerate() {
                for (r, q) in p.transpositions() {
                    if ge == g {
                        pp.push((0, r, q));
                    }
                    if go == g {
                        pp.push((1, r, q));
                    }
                }
            }
            if w.is_empty() && pp.is_empty() {
                continue;
            }
            bval *= bond_expectation(self.replicas, u, w, &pp);
            if bval == C64::new(0.0, 0.0) {
                return Ok((bval, 0));
            }
        }
        let mut rots = crot;
        rots.extend_from_slice(&self.prot);
        let amp = self.cexp.amplitude(&rots, &self.path)?;
        Ok((bval * amp.value, amp.path_steps))
    }
}

fn inversion_parity(keys: &[usize]) -> bool {
    fn sort_count(v: &mut [usize], tmp: &mut Vec<usize>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut c = sort_count(&mut v[..mid], tmp) + sort_count(&mut v[mid..], tmp);
        tmp.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[j] < v[i] {
                c += (mid - i) as u64;
                tmp.push(v[j]);
                j += 1;
            } else {
                tmp.push(v[i]);
                i += 1;
            }
        }
        tmp.extend_from_slice(&v[i..mid]);
        tmp.extend_from_slice(&v[j..n]);
        v.copy_from_slice(tmp);
        c
    }
    let mut v = keys.to_vec();
    let mut tmp = Vec::with_capacity(v.len());
    sort_count(&mut v, &mut tmp) % 2 == 1
}

/// Exact expectation on one bond's `2R` b Majoranas (index `2r + end`) in
/// the pinned dimer state: the word, in order, times the replica swaps.
fn bond_expectation(replicas: usize, u: f64, word: &[(usize, u8)], swaps: &[(u8, usize, usize)]) -> C64 {
    let dim = 1usize << replicas;
    // H_r = Δu Z_r, so the dimer ground state has occupation 1 iff u > 0
    let occ: usize = if u > 0.0 { dim - 1 } else { 0 };
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[occ] = C64::new(1.0, 0.0);
    let gamma = |k: usize, v: &[C64]| -> Vec<C64> {
        let q = k / 2;
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (x, &a) in v.iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let mut s = if (x & ((1 << q) - 1)).count_ones() % 2 == 1 { -a } else { a };
            if k % 2 == 1 {
                s *= if x >> q & 1 == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
            }
            out[x ^ (1 << q)] = s;
        }
        out
    };
    let mut v = psi.clone();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for &(end, r, q) in swaps.iter().rev() {
        let (a, b) = (2 * r + end as usize, 2 * q + end as usize);
        let gg = gamma(a, &gamma(b, &v));
        v = v.iter().zip(&gg).map(|(x, y)| (x + y) * h).collect();
    }
    for &(r, end) in word.iter().rev() {
        v = gamma(2 * r + end as usize, &v);
    }
    psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()
}

/// Full b+c evaluator, one continuation per summand on `4 |ABC| R` modes.
struct LiteralEngine {
    replicas: usize,
    stride: usize,
    loc: Vec<usize>,
    groups: Vec<Vec<usize>>,
    sexp: RestrictedExpectation,
    prot: Vec<Rotation>,
    path: PathOptions,
}

impl LiteralEngine {
    fn for_spec(sys: &KitaevSystem, spec: &MeasureSpec, opts: &EvalOptions) -> Result<Self> {
        let n = sys.lattice.num_sites();
        let basis = gauss::ground_basis(sys.hamiltonian().as_ref(), opts.gap_tol)?;
        let sites: Vec<usize> = (0..n).filter(|&i| sys.regions.label(i) != Region::Lambda).collect();
        let modes: Vec<usize> = sites.iter().flat_map(|&i| (0..4).map(move |f| majorana(i, f))).collect();
        let mut loc = vec![usize::MAX; 4 * n];
        for (k, &m) in modes.iter().enumerate() {
            loc[m] = k;
        }
        let full = basis.projector();
        let p = Mat::from_fn(modes.len(), modes.len(), |i, j| full[(modes[i], modes[j])]);
        let r = spec.replicas();
        let sexp = RestrictedExpectation::replicated(p.as_ref(), r);
        let groups: Vec<Vec<usize>> = [Region::A, Region::B, Region::C].iter().map(|&g| sys.regions.sites(g)).collect();
        let stride = modes.len();
        let mut prot = Vec::new();
        for (g, pi) in region_perms(spec).iter().enumerate() {
            for rot in permutation_operator(pi, &groups[g], n) {
                prot.push(Self::localize(rot, 4 * n, stride, &loc));
            }
        }
        Ok(LiteralEngine { replicas: r, stride, loc, groups, sexp, prot, path: opts.path })
    }

    fn localize(rot: Rotation, global_stride: usize, stride: usize, loc: &[usize]) -> Rotation {
        let map = |x: usize| (x / global_stride) * stride + loc[x % global_stride];
        Rotation::complex(map(rot.a), map(rot.b), rot.angle)
    }

    fn summand(&self, sector: GaugeSector) -> Result<(C64, usize)> {
        let _ = self.replicas;
        let n_global = self.loc.len();
        let mut rots = Vec::new();
        for (g, r) in applied_groups(sector) {
            for rot in gauge_operator(&self.groups[g], r, n_global / 4) {
                rots.push(Self::localize(rot, n_global, self.stride, &self.loc));
            }
        }
        rots.extend_from_slice(&self.prot);
        let amp = self.sexp.amplitude(&rots, &self.path)?;
        Ok((amp.value, amp.path_steps))
    }
}

/// Parameter to vary in [`scan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// `J_x = J_y` together.
    Jxy,
    Jx,
    Jy,
    Jz,
    K,
    GaugePin,
}

impl SweepParam {
    pub fn apply(self, p: &mut KitaevParams, v: f64) {
        match self {
            SweepParam::Jxy => {
                p.jx = v;
                p.jy = v;
            }
            SweepParam::Jx => p.jx = v,
            SweepParam::Jy => p.jy = v,
            SweepParam::Jz => p.jz = v,
            SweepParam::K => p.k = v,
            SweepParam::GaugePin => p.gauge_pin = v,
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "jxy" => SweepParam::Jxy,
            "jx" => SweepParam::Jx,
            "jy" => SweepParam::Jy,
            "jz" => SweepParam::Jz,
            "k" => SweepParam::K,
            "gauge_pin" | "delta" => SweepParam::GaugePin,
            _ => return Err(Error::Parse(format!("unknown sweep parameter '{s}'"))),
        })
    }
}

/// Evaluates `spec` along a monotone grid. Each point is continued from the
/// identity on its own, and the largest phase jump between neighbours is
/// reported alongside.
pub fn scan(
    spec: &MeasureSpec,
    base: &KitaevParams,
    sweep: SweepParam,
    grid: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<MeasureResult>> {
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidParameter("sweep grid must be strictly monotone".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &v in grid {
        let mut p = base.clone();
        sweep.apply(&mut p, v);
        let sys = KitaevSystem::new(p)?;
        out.push(sys.evaluate(spec, opts)?);
    }
    Ok(out)
}

/// Largest `|Δ arg|` between consecutive results.
pub fn max_phase_jump(series: &[MeasureResult]) -> f64 {
    series
        .windows(2)
        .map(|w| crate::predict::wrap_phase(w[1].phase - w[0].phase).abs())
        .fold(0.0, f64::max)
}

/// Dense spin-space reference for tiny tori (at most 8 sites).
///
/// The Gaussian ground state is built explicitly in the `2^{2N}` Fock space
/// of the `4N` Majoranas as `Π_k d_k |χ⟩` over the quasiparticle
/// annihilators, projected onto the physical subspace and expanded in the
/// `σ^z` basis. Permutation expectations are then plain tensor sums.
pub mod spin {
    use super::*;

    pub const MAX_SITES: usize = 8;

    /// Vector in the JW Fock space of `2 · modes` Majoranas.
    struct Fock {
        modes: usize,
    }

    impl Fock {
        fn gamma(&self, k: usize, v: &[C64]) -> Vec<C64> {
            let q = k / 2;
            // mode q is bit (modes-1-q) so the first mode is the most significant
            let bit = self.modes - 1 - q;
            let lower_mask: usize = !((1usize << (bit + 1)) - 1) & ((1usize << self.modes) - 1);
            let mut out = vec![C64::new(0.0, 0.0); v.len()];
            for (x, &a) in v.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut s = if (x & lower_mask).count_ones() % 2 == 1 { -a } else { a };
                if k % 2 == 1 {
                    s *= if x >> bit & 1 == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                }
                out[x ^ (1 << bit)] = s;
            }
            out
        }

        fn combo(&self, coeffs: &[C64], v: &[C64]) -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); v.len()];
            for (k, &c) in coeffs.iter().enumerate() {
                if c.norm() < 1e-15 {
                    continue;
                }
                let g = self.gamma(k, v);
                for (o, x) in out.iter_mut().zip(g) {
                    *o += c * x;
                }
            }
            out
        }
    }

    fn normalize(v: &mut [C64]) -> f64 {
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= n;
        }
        n
    }

    /// Ground state of the Kitaev system as a `2^N` spin vector
    /// (site 0 most significant, bit 1 = σ^z down).
    pub fn spin_ground_state(sys: &KitaevSystem) -> Result<Vec<C64>> {
        let n = sys.lattice.num_sites();
        if n > MAX_SITES {
            return Err(Error::TooLarge { dim: n, max: MAX_SITES });
        }
        let a = sys.hamiltonian();
        let basis = gauss::ground_basis(a.as_ref(), sys.gap_tol)?;
        let fk = Fock { modes: 2 * n };
        let dim = 1usize << (2 * n);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut psi: Vec<C64> = (0..dim).map(|_| C64::new(next(), next())).collect();
        // annihilators d_v = v†γ for positive eigenvalues
        let u = basis.u();
        for k in basis.modes()..2 * basis.modes() {
            let coeffs: Vec<C64> = (0..4 * n).map(|j| u[(j, k)].conj()).collect();
            psi = fk.combo(&coeffs, &psi);
            normalize(&mut psi);
        }
        let d_op = |i: usize, v: &[C64]| -> Vec<C64> {
            let mut w = fk.gamma(majorana(i, 3), v);
            for f in (0..3).rev() {
                w = fk.gamma(majorana(i, f), &w);
            }
            w
        };
        let sigma = |i: usize, f: usize, v: &[C64]| -> Vec<C64> {
            let w = fk.gamma(majorana(i, 3), v);
            fk.gamma(majorana(i, f), &w).into_iter().map(|x| x * C64::new(0.0, 1.0)).collect()
        };
        let project = |v: &mut Vec<C64>, op: &dyn Fn(&[C64]) -> Vec<C64>| {
            let w = op(v);
            for (x, y) in v.iter_mut().zip(w) {
                *x = (*x + y) * 0.5;
            }
        };
        let mut phys = psi.clone();
        for i in 0..n {
            project(&mut phys, &|v| d_op(i, v));
        }
        if normalize(&mut phys) < 1e-8 {
            return Err(Error::InvalidParameter("projected state vanishes; wrong torus sector".into()));
        }
        let mut reference: Vec<C64> = (0..dim).map(|_| C64::new(next(), next())).collect();
        for i in 0..n {
            project(&mut reference, &|v| d_op(i, v));
            project(&mut reference, &|v| sigma(i, 2, v));
        }
        normalize(&mut reference);
        let mut out = vec![C64::new(0.0, 0.0); 1 << n];
        for (s, o) in out.iter_mut().enumerate() {
            let mut st = reference.clone();
            for i in (0..n).rev() {
                if s >> (n - 1 - i) & 1 == 1 {
                    st = sigma(i, 0, &st);
                }
            }
            *o = st.iter().zip(&phys).map(|(a, b)| a.conj() * b).sum();
        }
        normalize(&mut out);
        Ok(out)
    }

    /// `⟨ψ^{⊗R}| Π_I P_{π_I} |ψ^{⊗R}⟩` for the permutation
    /// `P_π |x_1 … x_R⟩ = |y⟩`, `y_{π(r)} = x_r`, on each region.
    pub fn spin_measure(psi: &[C64], n_sites: usize, regions: &RegionMap, spec: &MeasureSpec) -> Result<C64> {
        let r = spec.replicas();
        let reg_sites: Vec<Vec<usize>> = Region::ALL.iter().map(|&g| regions.sites(g)).collect();
        let dims: Vec<usize> = reg_sites.iter().map(|s| 1 << s.len()).collect();
        let total: usize = dims.iter().map(|d| d.saturating_pow(r as u32)).fold(1, |a, b| a.saturating_mul(b));
        // amplitude table over (a, b, c, λ) region configurations
        let index = |cfg: [usize; 4]| -> usize {
            let mut s = 0usize;
            for (g, sites) in reg_sites.iter().enumerate() {
                for (k, &i) in sites.iter().enumerate() {
                    if cfg[g] >> (sites.len() - 1 - k) & 1 == 1 {
                        s |= 1 << (n_sites - 1 - i);
                    }
                }
            }
            s
        };
        let perms: Vec<Permutation> = Region::ALL.iter().map(|&g| spec.perm(g)).collect();
        if perms[3].is_identity() {
            return reduced_measure(psi, &dims, &index, &perms, r);
        }
        if total > 1 << 26 {
            return Err(Error::TooLarge { dim: total, max: 1 << 26 });
        }
        let mut acc = C64::new(0.0, 0.0);
        let mut cfg = vec![[0usize; 4]; r];
        for flat in 0..total {
            let mut f = flat;
            for rep in 0..r {
                for g in 0..4 {
                    cfg[rep][g] = f % dims[g];
                    f /= dims[g];
                }
            }
            let mut term = C64::new(1.0, 0.0);
            for rep in 0..r {
                term *= psi[index(cfg[rep])].conj();
                let src = [0, 1, 2, 3].map(|g| cfg[perms[g].apply(rep)][g]);
                term *= psi[index(src)];
                if term == C64::new(0.0, 0.0) {
                    break;
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    // Λ untouched: contract it into ρ_ABC first, then sum over (a, b, c)^R.
    fn reduced_measure(
        psi: &[C64],
        dims: &[usize],
        index: &dyn Fn([usize; 4]) -> usize,
        perms: &[Permutation],
        r: usize,
    ) -> Result<C64> {
        let d = dims[0] * dims[1] * dims[2];
        let total = d.checked_pow(r as u32).filter(|&t| t <= 1 << 28);
        let Some(total) = total else {
            return Err(Error::TooLarge { dim: usize::MAX, max: 1 << 28 });
        };
        let split = |x: usize| [x % dims[0], x / dims[0] % dims[1], x / (dims[0] * dims[1])];
        let mut rho = vec![C64::new(0.0, 0.0); d * d];
        for y in 0..d {
            let [ya, yb, yc] = split(y);
            for x in 0..d {
                let [xa, xb, xc] = split(x);
                rho[y * d + x] = (0..dims[3])
                    .map(|l| psi[index([ya, yb, yc, l])] * psi[index([xa, xb, xc, l])].conj())
                    .sum();
            }
        }
        let join = |c: [usize; 3]| c[0] + dims[0] * (c[1] + dims[1] * c[2]);
        let mut acc = C64::new(0.0, 0.0);
        let mut cfg = vec![[0usize; 3]; r];
        for flat in 0..total {
            let mut f = flat;
            for c in cfg.iter_mut() {
                *c = split(f % d);
                f /= d;
            }
            let mut term = C64::new(1.0, 0.0);
            for rep in 0..r {
                let src = [0, 1, 2].map(|g| cfg[perms[g].apply(rep)][g]);
                term *= rho[join(src) * d + join(cfg[rep])];
                if term == C64::new(0.0, 0.0) {
                    break;
                }
            }
            acc += term;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{builtin_spec, Family};

    #[test]
    fn hamiltonian_antisymmetric_and_gapped() {
        let p = KitaevParams::isotropic(0.3, 4);
        let sys = KitaevSystem::new(p).unwrap();
        let a = sys.hamiltonian();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert_eq!(a[(i, j)], -a[(j, i)]);
            }
        }
        assert!(gauss::ground_basis(a.as_ref(), 1e-9).is_ok());
        assert!((sys.gauge_parity().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn b_dimers_pinned() {
        for delta in [0.5, 1.0, 2.0] {
            let mut p = KitaevParams::isotropic(0.3, 4);
            p.gauge_pin = delta;
            let sys = KitaevSystem::new(p).unwrap();
            let basis = gauss::ground_basis(sys.hamiltonian().as_ref(), 1e-9).unwrap();
            let pr = basis.projector();
            for (k, b) in sys.lattice.nn_bonds.iter().enumerate() {
                let al = b.label.index();
                // ⟨γ_a γ_b⟩ = 2 P_ba for a ≠ b
                let (x, y) = (majorana(b.even, al), majorana(b.odd, al));
                let corr = (C64::new(0.0, 2.0) * pr[(y, x)]).re;
                assert!((corr - sys.u[k]).abs() < 1e-10, "bond {k}: {corr}");
            }
        }
    }

    #[test]
    fn gauge_operator_is_four_majorana_product() {
        let fock = gauss::fock::FockSpace::new(4).unwrap();
        let forms: Vec<_> = gauge_operator(&[0], 0, 1)
            .iter()
            .map(|r| gauss::QuadraticForm::rotation(4, r.a, r.b, r.angle).unwrap())
            .collect();
        let got = gauss::fock::fock_oracle(&forms, 4).unwrap();
        let want = fock.gamma(0) * fock.gamma(1) * fock.gamma(2) * fock.gamma(3);
        let reversed = gauss::fock::fock_oracle(&[forms[1].clone(), forms[0].clone()], 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((got[(i, j)] - want[(i, j)]).norm() < 1e-12);
                assert!((reversed[(i, j)] - want[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn default_regions_are_pairwise_adjacent() {
        for n_s in [4, 6, 10, 16] {
            let lat = HoneycombLattice::build(n_s).unwrap();
            let adj = Adjacency::of(&lat, &default_regions(&lat));
            for (i, a) in Region::ALL.iter().enumerate() {
                for b in &Region::ALL[i + 1..] {
                    assert!(adj.contains(*a, *b), "n_s = {n_s}: {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn empty_permutation_operator() {
        assert!(permutation_operator(&Permutation::identity(3), &[0, 1], 8).is_empty());
    }

    #[test]
    fn pruning_examples() {
        let j1 = builtin_spec(Family::Jn, 1).unwrap();
        assert!(!prune(GaugeSector { bits: 0, replicas: 3 }, &j1, Adjacency::ALL));
        assert!(prune(GaugeSector { bits: 1, replicas: 3 }, &j1, Adjacency::ALL));
        let n: Vec<usize> = [("J", 1), ("J", 2), ("K", 1)]
            .iter()
            .map(|&(f, k)| {
                let fam = if f == "J" { Family::Jn } else { Family::Kn };
                surviving_sectors(&builtin_spec(fam, k).unwrap(), Adjacency::ALL).len()
            })
            .collect();
        assert_eq!(n, vec![4, 16, 4]);
    }

    #[test]
    fn inversion_parity_small() {
        assert!(!inversion_parity(&[1, 2, 3]));
        assert!(inversion_parity(&[2, 1, 3]));
        assert!(!inversion_parity(&[3, 1, 2]));
        assert!(!inversion_parity(&[2, 2, 1, 1]));
    }
}
