//! Honeycomb torus with bond labels, next-nearest-neighbour orientation and
//! the four-region partition used for the lattice measures.
//!
//! Cells sit on the triangular lattice spanned by a₁ = (1, 0) and
//! a₂ = (1/2, √3/2). Each cell holds an even site at its origin and an odd
//! site 1/√3 above it, joined by the z bond. Even site (x, y) also binds to
//! odd (x, y−1) through an x bond and to odd (x+1, y−1) through a y bond.
//! Sites are indexed `2 (y n_s + x) + sublattice`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Region;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondLabel {
    X,
    Y,
    Z,
}

impl BondLabel {
    pub const ALL: [BondLabel; 3] = [BondLabel::X, BondLabel::Y, BondLabel::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
    pub sub: Sublattice,
}

/// Nearest-neighbour bond from an even to an odd site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub even: usize,
    pub odd: usize,
    pub label: BondLabel,
    /// Crosses the seam between cell columns n_s−1 and 0.
    pub wraps_x: bool,
    /// Crosses the seam between cell rows n_s−1 and 0.
    pub wraps_y: bool,
}

/// Next-nearest-neighbour pair `i → j` through the shared neighbour `via`.
///
/// With `sign = +1` the path i → j runs clockwise around `via`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnnBond {
    pub i: usize,
    pub j: usize,
    pub via: usize,
    pub sign: i8,
}

impl NnnBond {
    pub fn reversed(self) -> NnnBond {
        NnnBond { i: self.j, j: self.i, via: self.via, sign: -self.sign }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HoneycombLattice {
    pub n_s: usize,
    pub sites: Vec<Site>,
    pub nn_bonds: Vec<Bond>,
    pub nnn_bonds: Vec<NnnBond>,
    /// `neighbors[site][label]` = (neighbouring site, bond index).
    neighbors: Vec<[(usize, usize); 3]>,
}

impl HoneycombLattice {
    /// Periodic n_s × n_s lattice with the size and parity checks of the
    /// region builder.
    pub fn build(n_s: usize) -> Result<Self> {
        if n_s < 4 {
            return Err(Error::InvalidParameter(format!("n_s = {n_s} is too small (need at least 4)")));
        }
        if n_s % 2 != 0 {
            return Err(Error::InvalidParameter(format!("n_s = {n_s} must be even")));
        }
        Ok(Self::torus(n_s))
    }

    /// Any n_s ≥ 2, without the region-builder constraints. Small tori are
    /// used by the dense spin-space checks.
    pub fn torus(n_s: usize) -> Self {
        assert!(n_s >= 2, "torus needs n_s >= 2");
        let n = n_s;
        let idx = |x: usize, y: usize, sub: usize| 2 * (y * n + x) + sub;
        let mut sites = Vec::with_capacity(2 * n * n);
        for y in 0..n {
            for x in 0..n {
                sites.push(Site { x, y, sub: Sublattice::Even });
                sites.push(Site { x, y, sub: Sublattice::Odd });
            }
        }
        let mut nn_bonds = Vec::with_capacity(3 * n * n);
        let mut neighbors = vec![[(usize::MAX, usize::MAX); 3]; 2 * n * n];
        for y in 0..n {
            for x in 0..n {
                let e = idx(x, y, 0);
                let ym = (y + n - 1) % n;
                let xp = (x + 1) % n;
                let links = [
                    (BondLabel::X, idx(x, ym, 1), false, y == 0),
                    (BondLabel::Y, idx(xp, ym, 1), x == n - 1, y == 0),
                    (BondLabel::Z, idx(x, y, 1), false, false),
                ];
                for (label, o, wx, wy) in links {
                    let b = nn_bonds.len();
                    nn_bonds.push(Bond { even: e, odd: o, label, wraps_x: wx, wraps_y: wy });
                    neighbors[e][label.index()] = (o, b);
                    neighbors[o][label.index()] = (e, b);
                }
            }
        }
        // clockwise i → j around k for the cyclic label pairs (x,z), (z,y), (y,x)
        let pairs = [(BondLabel::X, BondLabel::Z), (BondLabel::Z, BondLabel::Y), (BondLabel::Y, BondLabel::X)];
        let mut nnn_bonds = Vec::with_capacity(6 * n * n);
        for k in 0..2 * n * n {
            for (a, g) in pairs {
                nnn_bonds.push(NnnBond {
                    i: neighbors[k][a.index()].0,
                    j: neighbors[k][g.index()].0,
                    via: k,
                    sign: 1,
                });
            }
        }
        HoneycombLattice { n_s, sites, nn_bonds, nnn_bonds, neighbors }
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site_index(&self, x: usize, y: usize, sub: Sublattice) -> usize {
        2 * (y * self.n_s + x) + usize::from(sub == Sublattice::Odd)
    }

    pub fn neighbor(&self, site: usize, label: BondLabel) -> usize {
        self.neighbors[site][label.index()].0
    }

    pub fn bond_of(&self, site: usize, label: BondLabel) -> usize {
        self.neighbors[site][label.index()].1
    }

    /// Real-space position of a site.
    pub fn position(&self, site: usize) -> (f64, f64) {
        let s = self.sites[site];
        let (x, y) = (s.x as f64, s.y as f64);
        let lift = if s.sub == Sublattice::Odd { 1.0 / 3f64.sqrt() } else { 0.0 };
        (x + 0.5 * y, 0.5 * 3f64.sqrt() * y + lift)
    }

    /// Mirror through the midpoints of the z bonds of cell row `row`.
    ///
    /// It fixes the row, maps row `row + d` to `row − d`, keeps the horizontal
    /// coordinate and exchanges the sublattices.
    pub fn mirror_site(&self, site: usize, row: usize) -> usize {
        let n = self.n_s as i64;
        let s = self.sites[site];
        let dy = s.y as i64 - row as i64;
        let y2 = (row as i64 - dy).rem_euclid(n);
        let x2 = (s.x as i64 + dy).rem_euclid(n);
        let sub = match s.sub {
            Sublattice::Even => Sublattice::Odd,
            Sublattice::Odd => Sublattice::Even,
        };
        self.site_index(x2 as usize, y2 as usize, sub)
    }
}

/// Region label per site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMap {
    pub labels: Vec<Region>,
}

impl RegionMap {
    pub fn sites(&self, region: Region) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &r)| r == region).map(|(i, _)| i).collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }

    pub fn label(&self, site: usize) -> Region {
        self.labels[site]
    }

    /// Bonds whose two ends carry different labels.
    pub fn boundary_bonds(&self, lat: &HoneycombLattice) -> Vec<usize> {
        lat.nn_bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| self.labels[b.even] != self.labels[b.odd])
            .map(|(k, _)| k)
            .collect()
    }

    /// Whether some bond joins the two regions.
    pub fn adjacent(&self, lat: &HoneycombLattice, a: Region, b: Region) -> bool {
        lat.nn_bonds.iter().any(|bd| {
            let (p, q) = (self.labels[bd.even], self.labels[bd.odd]);
            (p, q) == (a, b) || (p, q) == (b, a)
        })
    }

    /// CSV with columns `site,x,y,sublattice,region`.
    pub fn to_csv(&self, lat: &HoneycombLattice) -> String {
        let mut s = String::from("site,x,y,sublattice,region\n");
        for (i, site) in lat.sites.iter().enumerate() {
            let sub = if site.sub == Sublattice::Even { "even" } else { "odd" };
            let _ = writeln!(s, "{i},{},{},{sub},{}", site.x, site.y, self.labels[i].symbol());
        }
        s
    }

    /// Two-character-per-cell picture, top row first, rows shifted to follow
    /// the lattice skew.
    pub fn ascii(&self, lat: &HoneycombLattice) -> String {
        let n = lat.n_s;
        let mut s = String::new();
        for y in (0..n).rev() {
            s.push_str(&" ".repeat(y));
            for x in 0..n {
                let e = lat.site_index(x, y, Sublattice::Even);
                s.push_str(self.labels[e].symbol());
                s.push_str(self.labels[e + 1].symbol());
                s.push(' ');
            }
            s.push('\n');
        }
        s
    }
}

/// Geometry of the four-region partition.
///
/// The junction axis is the cell row `axis_row`. B lies below it and C above
/// it, both inside the horizontal window `[x0, x0 + width)`; A lies to the
/// left in `[x0 − a_width, x0)`; all three span the rows within `half_height`
/// of the axis. On the axis row the even (lower) site of a cell goes to B and
/// the odd (upper) site to C. Λ is the rest. Going counterclockwise around
/// the junction one meets A, B, C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PizzaLayout {
    pub axis_row: usize,
    pub half_height: usize,
    pub x0: f64,
    pub width: f64,
    pub a_width: f64,
}

impl PizzaLayout {
    /// Nominal layout: B and C about √3 n_s/4 wide, A filling half the rest.
    pub fn nominal(n_s: usize, width: f64) -> Self {
        let n = n_s as f64;
        let a_width = (n - width) / 2.0 + 0.5;
        let half_height = (n_s.saturating_sub(3) / 2).max(1);
        // centre the A+B window on the middle column
        let x0 = 0.5 * n + 0.5 * (a_width - width);
        PizzaLayout { axis_row: 0, half_height, x0, width, a_width }
    }

    /// Deterministic default: the nominal layout with the B/C width moved in
    /// half-cell steps until every region has an even site count.
    pub fn default_for(n_s: usize) -> Self {
        let w0 = 3f64.sqrt() / 4.0 * n_s as f64;
        let lat = HoneycombLattice::torus(n_s.max(2));
        for k in 0..(2 * n_s) {
            let off = if k % 2 == 0 { 0.5 * (k / 2) as f64 } else { -0.5 * ((k + 1) / 2) as f64 };
            let lay = Self::nominal(n_s, w0 + off);
            let reg = lay.assign(&lat);
            if Region::ALL.iter().all(|&r| reg.count(r) > 0 && reg.count(r) % 2 == 0) {
                return lay;
            }
        }
        Self::nominal(n_s, w0)
    }

    pub fn assign(&self, lat: &HoneycombLattice) -> RegionMap {
        let n = lat.n_s as i64;
        let nf = lat.n_s as f64;
        let mut labels = vec![Region::Lambda; lat.num_sites()];
        for (i, s) in lat.sites.iter().enumerate() {
            let dy = (s.y as i64 - self.axis_row as i64 + n / 2).rem_euclid(n) - n / 2;
            if dy.unsigned_abs() as usize > self.half_height {
                continue;
            }
            // skewed coordinate of the lift closest to the axis row
            let x_lift = s.x as f64 + 0.5 * (self.axis_row as f64 + dy as f64);
            let xr = (x_lift - self.x0 + 0.5 * nf + 1e-9).rem_euclid(nf) - 0.5 * nf;
            labels[i] = if xr >= -self.a_width && xr < 0.0 {
                Region::A
            } else if xr >= 0.0 && xr < self.width {
                match dy.cmp(&0) {
                    std::cmp::Ordering::Less => Region::B,
                    std::cmp::Ordering::Greater => Region::C,
                    std::cmp::Ordering::Equal => {
                        if s.sub == Sublattice::Even {
                            Region::B
                        } else {
                            Region::C
                        }
                    }
                }
            } else {
                Region::Lambda
            };
        }
        RegionMap { labels }
    }
}

/// Default partition: [`PizzaLayout::default_for`].
pub fn default_regions(lat: &HoneycombLattice) -> RegionMap {
    PizzaLayout::default_for(lat.n_s).assign(lat)
}

/// Bond set as unordered site pairs.
pub fn bond_pairs(lat: &HoneycombLattice, bonds: &[usize]) -> BTreeSet<(usize, usize)> {
    bonds
        .iter()
        .map(|&k| {
            let b = lat.nn_bonds[k];
            (b.even.min(b.odd), b.even.max(b.odd))
        })
        .collect()
}
