//! Replica permutations, measure specifications and the surface topology
//! of the permutation defects.
//!
//! Replicas are 0-based internally and printed 1-based in cycle notation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `{0..R}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(size: usize) -> Self {
        Permutation { map: (0..size).collect() }
    }

    /// Builds a permutation from its image array (0-based).
    pub fn from_images(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::NotBijective("empty image array".into()));
        }
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::NotBijective(format!("{map:?}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    /// Builds a permutation from 1-based cycles, e.g. `&[&[1, 2, 3]]` maps 1→2→3→1.
    pub fn from_cycles(size: usize, cycles: &[&[usize]]) -> Result<Self> {
        let owned: Vec<Vec<usize>> = cycles.iter().map(|c| c.to_vec()).collect();
        Self::from_cycle_vecs(size, &owned)
    }

    fn from_cycle_vecs(size: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut map: Vec<usize> = (0..size).collect();
        let mut touched = vec![false; size];
        for c in cycles {
            for (k, &a) in c.iter().enumerate() {
                if a == 0 || a > size {
                    return Err(Error::NotBijective(format!("index {a} outside 1..={size}")));
                }
                if touched[a - 1] {
                    return Err(Error::NotBijective(format!("index {a} repeated")));
                }
                touched[a - 1] = true;
                map[a - 1] = c[(k + 1) % c.len()] - 1;
            }
        }
        Permutation::from_images(map)
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `(self ∘ q)(x) = self(q(x))`.
    pub fn compose(&self, q: &Permutation) -> Result<Permutation> {
        if self.size() != q.size() {
            return Err(Error::SizeMismatch { expected: self.size(), got: q.size() });
        }
        Ok(Permutation { map: q.map.iter().map(|&x| self.map[x]).collect() })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.size()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// Disjoint cycles, each starting at its smallest element, fixed points included.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.size();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                cyc.push(j);
                j = self.map[j];
            }
            out.push(cyc);
        }
        out
    }

    /// Number of cycles, counting fixed points.
    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    /// Canonical transposition factorization: a cycle `(a1 a2 … ak)` becomes
    /// `(a1 a2)(a2 a3)…(a(k-1) ak)`, leftmost factor first. As operators the
    /// rightmost factor acts first.
    pub fn transpositions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in self.cycles() {
            for w in c.windows(2) {
                out.push((w[0], w[1]));
            }
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut any = false;
        for c in self.cycles().into_iter().filter(|c| c.len() > 1) {
            any = true;
            write!(f, "(")?;
            for (k, a) in c.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", a + 1)?;
            }
            write!(f, ")")?;
        }
        if !any {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// Parses cycle notation such as `(1 2 3)(4 5)` or `()` into a permutation of `size`.
pub fn parse_cycles(text: &str, size: usize) -> Result<Permutation> {
    let mut cycles = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let inner_end = rest
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parenthesis in {text:?}")))?;
        if !rest.starts_with('(') {
            return Err(Error::Parse(format!("expected '(' in {text:?}")));
        }
        let body = &rest[1..inner_end];
        let cyc: Vec<usize> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if !cyc.is_empty() {
            cycles.push(cyc);
        }
        rest = rest[inner_end + 1..].trim_start();
    }
    Permutation::from_cycle_vecs(size, &cycles)
}

/// Number of orbits of the group generated by `gens` acting on `{0..r}`.
pub fn orbit_count(gens: &[Permutation], r: usize) -> Result<usize> {
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for g in gens {
        if g.size() != r {
            return Err(Error::SizeMismatch { expected: r, got: g.size() });
        }
        for x in 0..r {
            let (a, b) = (find(&mut parent, x), find(&mut parent, g.apply(x)));
            if a != b {
                parent[a] = b;
            }
        }
    }
    Ok((0..r).filter(|&x| find(&mut parent, x) == x).count())
}

/// The four regions of the three-region junction plus its surroundings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    Lambda,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::A, Region::B, Region::C, Region::Lambda];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Region {
        Region::ALL[i]
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
            Region::Lambda => "L",
        }
    }
}

/// Insertion of `e^{mu Q_AC}` on a single replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeInsertion {
    pub replica: usize,
    pub mu: f64,
}

/// Three replica permutations acting on regions A, B, C (Λ is left alone).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub name: String,
    replicas: usize,
    perms: [Permutation; 3],
    pub charge: Option<ChargeInsertion>,
}

impl MeasureSpec {
    pub fn new(name: impl Into<String>, pi_a: Permutation, pi_b: Permutation, pi_c: Permutation) -> Result<Self> {
        let r = pi_a.size();
        for p in [&pi_b, &pi_c] {
            if p.size() != r {
                return Err(Error::SizeMismatch { expected: r, got: p.size() });
            }
        }
        Ok(MeasureSpec { name: name.into(), replicas: r, perms: [pi_a, pi_b, pi_c], charge: None })
    }

    pub fn with_charge(mut self, replica: usize, mu: f64) -> Result<Self> {
        if replica >= self.replicas {
            return Err(Error::InvalidParameter(format!("charge replica {replica} out of range")));
        }
        self.charge = Some(ChargeInsertion { replica, mu });
        Ok(self)
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn pi_a(&self) -> &Permutation {
        &self.perms[0]
    }

    pub fn pi_b(&self) -> &Permutation {
        &self.perms[1]
    }

    pub fn pi_c(&self) -> &Permutation {
        &self.perms[2]
    }

    /// Permutation on a region; Λ gets the identity.
    pub fn perm(&self, region: Region) -> Permutation {
        match region {
            Region::Lambda => Permutation::identity(self.replicas),
            r => self.perms[r.index()].clone(),
        }
    }

    /// `π_I π_J^{-1}`.
    pub fn relative(&self, i: Region, j: Region) -> Permutation {
        self.perm(i).compose(&self.perm(j).inverse()).expect("sizes agree by construction")
    }

    /// All three permutations inverted.
    pub fn inverted(&self) -> MeasureSpec {
        MeasureSpec {
            name: format!("{}-inv", self.name),
            replicas: self.replicas,
            perms: [self.perms[0].inverse(), self.perms[1].inverse(), self.perms[2].inverse()],
            charge: self.charge.clone(),
        }
    }

    /// Plain-text form: `replicas=R`, then `pi_A=…`, `pi_B=…`, `pi_C=…`, optional `charge_AC=<replica> <mu>`.
    pub fn to_text(&self) -> String {
        let mut s = format!("name={}\nreplicas={}\n", self.name, self.replicas);
        for (lab, p) in ["A", "B", "C"].iter().zip(&self.perms) {
            s.push_str(&format!("pi_{lab}={p}\n"));
        }
        if let Some(c) = &self.charge {
            s.push_str(&format!("charge_AC={} {}\n", c.replica + 1, c.mu));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<MeasureSpec> {
        let mut name = String::from("custom");
        let mut replicas: Option<usize> = None;
        let mut raw: [Option<String>; 3] = [None, None, None];
        let mut charge: Option<(usize, f64)> = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => name = value.to_string(),
                "replicas" => {
                    replicas = Some(value.parse().map_err(|e| Error::Parse(format!("replicas: {e}")))?)
                }
                "pi_A" => raw[0] = Some(value.to_string()),
                "pi_B" => raw[1] = Some(value.to_string()),
                "pi_C" => raw[2] = Some(value.to_string()),
                "charge_AC" => {
                    let mut it = value.split_whitespace();
                    let rep: usize = it
                        .next()
                        .ok_or_else(|| Error::Parse("charge_AC needs a replica".into()))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("charge replica: {e}")))?;
                    let mu: f64 = it
                        .next()
                        .ok_or_else(|| Error::Parse("charge_AC needs mu".into()))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("charge mu: {e}")))?;
                    if rep == 0 {
                        return Err(Error::Parse("charge replica is 1-based".into()));
                    }
                    charge = Some((rep - 1, mu));
                }
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        let r = match replicas {
            Some(r) => r,
            None => raw
                .iter()
                .flatten()
                .flat_map(|s| {
                    s.split(|c: char| !c.is_ascii_digit())
                        .filter_map(|t| t.parse::<usize>().ok())
                        .collect::<Vec<_>>()
                })
                .max()
                .unwrap_or(1),
        };
        let get = |k: usize| -> Result<Permutation> {
            match &raw[k] {
                Some(s) => parse_cycles(s, r),
                None => Ok(Permutation::identity(r)),
            }
        };
        let mut spec = MeasureSpec::new(name, get(0)?, get(1)?, get(2)?)?;
        if let Some((rep, mu)) = charge {
            spec = spec.with_charge(rep, mu)?;
        }
        Ok(spec)
    }
}

/// Built-in measure families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Jn,
    Phir,
    Kn,
    Smun,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jn" | "j" => Ok(Family::Jn),
            "phir" | "phi" => Ok(Family::Phir),
            "kn" | "k" => Ok(Family::Kn),
            "smun" | "s" => Ok(Family::Smun),
            _ => Err(Error::Parse(format!("unknown family {s:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Jn => "jn",
            Family::Phir => "phir",
            Family::Kn => "kn",
            Family::Smun => "smun",
        })
    }
}

fn cycle_on(size: usize, elems: &[usize]) -> Permutation {
    let mut map: Vec<usize> = (0..size).collect();
    for k in 0..elems.len() {
        map[elems[k]] = elems[(k + 1) % elems.len()];
    }
    Permutation { map }
}

/// Constructs the permutations of a built-in family.
///
/// * `Jn`: R = 2n+1, π_A = (1..2n+1), π_B = (n+1..2n+1), π_C = (1..n+1).
/// * `Phir`: R = 2r with replicas (s,t), s ∈ {1,2}, t mod r.
/// * `Kn`: R = 2n+1 with π_B, π_C products of n disjoint transpositions.
/// * `Smun`: R = n+1, π_A = π_B cyclic, π_C trivial, charge on replica 1 with μ = 0.
pub fn builtin_spec(family: Family, parameter: usize) -> Result<MeasureSpec> {
    let bad = |msg: &str| Err(Error::InvalidParameter(format!("{family}: {msg}")));
    match family {
        Family::Jn => {
            if parameter < 1 {
                return bad("n must be at least 1");
            }
            let n = parameter;
            let r = 2 * n + 1;
            let all: Vec<usize> = (0..r).collect();
            let pa = cycle_on(r, &all);
            let pb = cycle_on(r, &all[n..]);
            let pc = cycle_on(r, &all[..=n]);
            MeasureSpec::new(format!("J{n}"), pa, pb, pc)
        }
        Family::Phir => {
            if parameter < 2 {
                return bad("r must be at least 2");
            }
            let rr = parameter;
            let size = 2 * rr;
            let ix = |s: usize, t: i64| -> usize { (s % 2) * rr + t.rem_euclid(rr as i64) as usize };
            let (mut a, mut b, mut c) = (vec![0; size], vec![0; size], vec![0; size]);
            for t in 0..rr as i64 {
                a[ix(0, t)] = ix(0, t - 1);
                a[ix(1, t)] = ix(1, t + 1);
                for s in 0..2 {
                    b[ix(s, t)] = ix(s + 1, t);
                }
                c[ix(0, t)] = ix(1, t + 1);
                c[ix(1, t)] = ix(0, t - 1);
            }
            MeasureSpec::new(
                format!("Phi{rr}"),
                Permutation::from_images(a)?,
                Permutation::from_images(b)?,
                Permutation::from_images(c)?,
            )
        }
        Family::Kn => {
            if parameter < 1 {
                return bad("n must be at least 1");
            }
            let n = parameter;
            let r = 2 * n + 1;
            // (2, 4, …, 2n, 2n+1, 2n−1, …, 1) in 1-based labels
            let mut seq: Vec<usize> = (1..n + 1).map(|k| 2 * k - 1).collect();
            seq.push(2 * n);
            seq.extend((0..n).rev().map(|k| 2 * k));
            let pa = cycle_on(r, &seq);
            let mut b: Vec<usize> = (0..r).collect();
            let mut c: Vec<usize> = (0..r).collect();
            for k in 0..n {
                b.swap(2 * k, 2 * k + 1);
                c.swap(2 * k + 1, 2 * k + 2);
            }
            MeasureSpec::new(format!("K{n}"), pa, Permutation::from_images(b)?, Permutation::from_images(c)?)
        }
        Family::Smun => {
            if parameter < 1 {
                return bad("n must be at least 1");
            }
            let n = parameter;
            let r = n + 1;
            let all: Vec<usize> = (0..r).collect();
            let cyc = cycle_on(r, &all);
            MeasureSpec::new(format!("S{n}"), cyc.clone(), cyc, Permutation::identity(r))?.with_charge(0, 0.0)
        }
    }
}

/// Unordered region pairs in storage order.
pub const PAIRS: [(Region, Region); 6] = [
    (Region::A, Region::B),
    (Region::A, Region::C),
    (Region::B, Region::C),
    (Region::A, Region::Lambda),
    (Region::B, Region::Lambda),
    (Region::C, Region::Lambda),
];

/// Vertices of the junction: v1 = (A,B,C), v2 = (B,C,Λ), v3 = (A,C,Λ), v4 = (A,B,Λ).
pub const VERTICES: [[Region; 3]; 4] = [
    [Region::A, Region::B, Region::C],
    [Region::B, Region::C, Region::Lambda],
    [Region::A, Region::C, Region::Lambda],
    [Region::A, Region::B, Region::Lambda],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub replicas: usize,
    /// `|π_IJ|` for each unordered pair in [`PAIRS`] order.
    pub cycle_counts: [usize; 6],
    /// `o_IJK` for each vertex in [`VERTICES`] order.
    pub orbit_counts: [usize; 4],
    pub is_manifold: bool,
    pub genus: i64,
    /// Every vertex group acts transitively on the replicas.
    pub transitive: bool,
}

impl TopologyReport {
    pub fn pair_count(&self, i: Region, j: Region) -> usize {
        let k = PAIRS
            .iter()
            .position(|&(a, b)| (a, b) == (i, j) || (b, a) == (i, j))
            .expect("distinct regions");
        self.cycle_counts[k]
    }

    /// Sum over ordered pairs I ≠ J; equals 8 + 4R on a manifold.
    pub fn ordered_cycle_sum(&self) -> usize {
        2 * self.cycle_counts.iter().sum::<usize>()
    }

    /// Per-vertex sums `|π_IJ| + |π_JK| + |π_IK|`.
    pub fn vertex_sums(&self) -> [usize; 4] {
        VERTICES.map(|[i, j, k]| self.pair_count(i, j) + self.pair_count(j, k) + self.pair_count(i, k))
    }

    /// Euler characteristic of the neighbourhood of each vertex: 2R − 3R + vertex sum.
    pub fn vertex_euler(&self) -> [i64; 4] {
        let r = self.replicas as i64;
        self.vertex_sums().map(|s| 2 * r - 3 * r + s as i64)
    }
}

pub fn topology_report(spec: &MeasureSpec) -> TopologyReport {
    let r = spec.replicas();
    let cycle_counts = PAIRS.map(|(i, j)| spec.relative(i, j).cycle_count());
    let orbit_counts = VERTICES.map(|[i, j, k]| {
        orbit_count(&[spec.relative(i, j), spec.relative(j, k)], r).expect("sizes agree")
    });
    let mut rep = TopologyReport {
        replicas: r,
        cycle_counts,
        orbit_counts,
        is_manifold: false,
        genus: 0,
        transitive: orbit_counts.iter().all(|&o| o == 1),
    };
    rep.is_manifold = rep.vertex_sums().iter().all(|&s| s == 2 + r);
    rep.genus = cycle_counts.iter().sum::<usize>() as i64 - orbit_counts.iter().sum::<usize>() as i64 + 1;
    rep
}
