//! Nested reference nets and half-open dyadic cubes.
//!
//! Nets are built greedily in point-id order. Level `k` keeps a point only if
//! its distance to every point already kept exceeds `delta^k`, so every level
//! is `delta^k`-separated and every rejected point lies within `delta^k` of
//! the net. Cubes are assembled bottom-up: the finest level is the Voronoi
//! partition of the full net, and each coarser cube is the union of the
//! cubes whose centers chose it as their nearest coarse center.

use std::collections::{BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::FiniteSpace;

pub(crate) fn fingerprint(space: &FiniteSpace) -> u64 {
    let mut h = DefaultHasher::new();
    space.len().hash(&mut h);
    for d in space.distances() {
        d.to_bits().hash(&mut h);
    }
    for w in space.weights() {
        w.to_bits().hash(&mut h);
    }
    h.finish()
}

/// `δ^k`-separated nested nets `X^{k_min} ⊆ … ⊆ X^{k_max} = X`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetHierarchy {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    levels: Vec<Vec<usize>>,
    new_points: Vec<Vec<usize>>,
    /// Whether `12 A0^3 C0 δ <= c0` holds with `c0 = 1`, `C0 = 2 A0`.
    pub admissible: bool,
    fingerprint: u64,
}

impl NetHierarchy {
    /// Centers `X^k`, ascending ids.
    pub fn level(&self, k: i32) -> &[usize] {
        &self.levels[(k - self.k_min) as usize]
    }

    /// New points `Y^k = X^{k+1} \ X^k`, ascending ids. Empty at `k_max`.
    pub fn new_points(&self, k: i32) -> &[usize] {
        self.new_points
            .get((k - self.k_min) as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    pub fn scale(&self, k: i32) -> f64 {
        self.delta.powi(k)
    }

    pub fn n_points(&self) -> usize {
        self.levels.last().map_or(0, Vec::len)
    }
}

/// Returns whether `delta` satisfies the cube-construction hypothesis for the
/// given quasi-triangle constant with `c0 = 1` and `C0 = 2 A0`.
pub fn delta_admissible(a0: f64, delta: f64) -> bool {
    12.0 * a0.powi(3) * (2.0 * a0) * delta <= 1.0
}

fn greedy_extend(
    space: &FiniteSpace,
    keep: &[usize],
    candidates: &[usize],
    sep: f64,
) -> Vec<usize> {
    let mut net: Vec<usize> = keep.to_vec();
    let mut in_net = vec![false; space.len()];
    for &x in keep {
        in_net[x] = true;
    }
    for &c in candidates {
        if in_net[c] {
            continue;
        }
        let row = space.row(c);
        if net.iter().all(|&p| row[p] > sep) {
            net.push(c);
            in_net[c] = true;
        }
    }
    net.sort_unstable();
    net
}

/// Builds the nested nets from `k_min` up to the first level that contains
/// every point.
pub fn build_nets(space: &FiniteSpace, delta: f64, k_min: i32) -> Result<NetHierarchy> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if k_min > 0 {
        return Err(Error::InvalidLevelRange(k_min));
    }
    let n = space.len();
    let all: Vec<usize> = (0..n).collect();

    let x0 = greedy_extend(space, &[], &all, 1.0);

    let mut coarse = Vec::new();
    let mut current = x0.clone();
    for k in (k_min..0).rev() {
        current = greedy_extend(space, &[], &current, delta.powi(k));
        coarse.push(current.clone());
    }
    coarse.reverse();

    let mut levels = coarse;
    levels.push(x0.clone());
    let mut k = 0;
    let mut current = x0;
    while current.len() < n {
        k += 1;
        current = greedy_extend(space, &current, &all, delta.powi(k));
        levels.push(current.clone());
    }

    let new_points = levels
        .windows(2)
        .map(|w| {
            let coarse: HashSet<usize> = w[0].iter().copied().collect();
            w[1].iter()
                .copied()
                .filter(|x| !coarse.contains(x))
                .collect()
        })
        .collect();

    Ok(NetHierarchy {
        delta,
        k_min,
        k_max: k,
        levels,
        new_points,
        admissible: delta_admissible(space.a0(), delta),
        fingerprint: fingerprint(space),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeRef {
    pub k: i32,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub center: usize,
    /// Member ids, ascending.
    pub members: Vec<usize>,
    pub measure: f64,
    /// Index of the parent cube at level `k - 1`.
    pub parent: Option<usize>,
    /// Indices of the child cubes at level `k + 1`, ascending center id.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeConstants {
    pub c0: f64,
    #[serde(rename = "C0")]
    pub big_c0: f64,
    pub c1: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    /// Largest inner-ball constant `<= c1` that every cube satisfies.
    pub c1_effective: f64,
    /// Set when `c1_effective < c1`.
    pub c1_flagged: bool,
    /// Smallest outer-ball constant needed by the constructed cubes.
    pub big_c1_needed: f64,
}

/// Half-open dyadic cubes `Q_α^k` on a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSystem {
    nets: NetHierarchy,
    levels: Vec<Vec<Cube>>,
    owner: Vec<Vec<usize>>,
    pub constants: CubeConstants,
}

impl CubeSystem {
    pub fn nets(&self) -> &NetHierarchy {
        &self.nets
    }

    pub fn k_min(&self) -> i32 {
        self.nets.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.nets.k_max
    }

    pub fn delta(&self) -> f64 {
        self.nets.delta
    }

    pub fn n_points(&self) -> usize {
        self.owner[0].len()
    }

    pub fn cubes(&self, k: i32) -> &[Cube] {
        &self.levels[(k - self.k_min()) as usize]
    }

    pub fn cube(&self, r: CubeRef) -> &Cube {
        &self.cubes(r.k)[r.index]
    }

    /// Index of the level-`k` cube containing point `x`.
    pub fn owner(&self, k: i32, x: usize) -> usize {
        self.owner[(k - self.k_min()) as usize][x]
    }

    /// Index of the level-`k` cube centered at `center`, if any.
    pub fn index_of_center(&self, k: i32, center: usize) -> Option<usize> {
        self.nets.level(k).binary_search(&center).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CubeRef, &Cube)> {
        self.nets.levels().flat_map(move |k| {
            self.cubes(k)
                .iter()
                .enumerate()
                .map(move |(index, c)| (CubeRef { k, index }, c))
        })
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the cube system with the default constants `c0 = 1`, `C0 = 2 A0`.
pub fn build_cubes(space: &FiniteSpace, nets: &NetHierarchy) -> Result<CubeSystem> {
    build_cubes_with(space, nets, 1.0, 2.0 * space.a0())
}

pub fn build_cubes_with(
    space: &FiniteSpace,
    nets: &NetHierarchy,
    c0: f64,
    big_c0: f64,
) -> Result<CubeSystem> {
    if nets.fingerprint != fingerprint(space) || nets.n_points() != space.len() {
        return Err(Error::NetMismatch);
    }
    let n = space.len();
    let depth = (nets.k_max - nets.k_min + 1) as usize;
    let mut levels: Vec<Vec<Cube>> = Vec::with_capacity(depth);
    let mut owner = vec![vec![0usize; n]; depth];

    // Finest level: Voronoi cells, ties to the smaller id.
    let finest = nets.level(nets.k_max);
    let mut cubes: Vec<Cube> = finest
        .iter()
        .map(|&c| Cube {
            center: c,
            members: Vec::new(),
            measure: 0.0,
            parent: None,
            children: Vec::new(),
        })
        .collect();
    for x in 0..n {
        let row = space.row(x);
        let best = nearest(row, finest);
        cubes[best].members.push(x);
        owner[depth - 1][x] = best;
    }
    for c in &mut cubes {
        c.measure = space.volume(&c.members);
    }
    levels.push(cubes);

    for k in (nets.k_min..nets.k_max).rev() {
        let centers = nets.level(k);
        let fine = levels.last_mut().expect("finer level present");
        let mut coarse: Vec<Cube> = centers
            .iter()
            .map(|&c| Cube {
                center: c,
                members: Vec::new(),
                measure: 0.0,
                parent: None,
                children: Vec::new(),
            })
            .collect();
        for (ci, child) in fine.iter_mut().enumerate() {
            let p = nearest(space.row(child.center), centers);
            child.parent = Some(p);
            coarse[p].children.push(ci);
            coarse[p].members.extend_from_slice(&child.members);
        }
        let li = (k - nets.k_min) as usize;
        for (pi, c) in coarse.iter_mut().enumerate() {
            c.members.sort_unstable();
            c.measure = space.volume(&c.members);
            for &x in &c.members {
                owner[li][x] = pi;
            }
        }
        levels.push(coarse);
    }
    levels.reverse();

    let a0 = space.a0();
    let c1 = c0 / (3.0 * a0 * a0);
    let big_c1 = 2.0 * a0 * big_c0;
    let mut inner = f64::INFINITY;
    let mut outer = 0.0f64;
    for (li, level) in levels.iter().enumerate() {
        let scale = nets.delta.powi(nets.k_min + li as i32);
        for (ci, cube) in level.iter().enumerate() {
            let row = space.row(cube.center);
            for x in 0..n {
                let ratio = row[x] / scale;
                if owner[li][x] == ci {
                    outer = outer.max(ratio);
                } else {
                    inner = inner.min(ratio);
                }
            }
        }
    }
    let c1_effective = c1.min(inner);

    Ok(CubeSystem {
        nets: nets.clone(),
        levels,
        owner,
        constants: CubeConstants {
            c0,
            big_c0,
            c1,
            big_c1,
            c1_effective,
            c1_flagged: c1_effective < c1,
            big_c1_needed: outer,
        },
    })
}

fn nearest(row: &[f64], centers: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in centers.iter().enumerate().skip(1) {
        if row[c] < row[centers[best]] {
            best = i;
        }
    }
    best
}

/// Outcome of checking the cube axioms on a finished system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub separation: bool,
    pub covering: bool,
    pub disjoint_cover: bool,
    pub nesting: bool,
    pub center_membership: bool,
    pub sandwich_inner: bool,
    pub sandwich_outer: bool,
    pub c1: f64,
    pub c1_effective: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    #[serde(rename = "C1_needed")]
    pub big_c1_needed: f64,
    /// Largest `(d(x_β^{k+1}, x_α^k) + C1 δ^{k+1}) / (C1 δ^k)` over child/parent pairs.
    pub child_ball_ratio: f64,
    pub admissible_delta: bool,
}

impl AxiomReport {
    /// The axioms that must hold exactly for every system.
    pub fn exact_axioms_pass(&self) -> bool {
        self.separation
            && self.covering
            && self.disjoint_cover
            && self.nesting
            && self.center_membership
            && self.sandwich_inner
            && self.sandwich_outer
    }
}

/// Re-checks net and cube axioms from the member lists alone.
pub fn verify_cube_axioms(space: &FiniteSpace, cubes: &CubeSystem) -> AxiomReport {
    let n = space.len();
    let nets = cubes.nets();
    let a0 = space.a0();

    let mut separation = true;
    let mut covering = true;
    for k in nets.levels() {
        let centers = nets.level(k);
        let scale = nets.scale(k);
        for (i, &a) in centers.iter().enumerate() {
            for &b in &centers[i + 1..] {
                separation &= space.d(a, b) >= scale;
            }
        }
        for x in 0..n {
            let m = centers
                .iter()
                .map(|&c| space.d(x, c))
                .fold(f64::INFINITY, f64::min);
            covering &= m < 2.0 * a0 * scale;
        }
    }

    let mut disjoint_cover = true;
    let mut center_membership = true;
    let mut membership: Vec<Vec<Option<usize>>> = Vec::new();
    for k in nets.levels() {
        let mut who = vec![None; n];
        let mut count = 0usize;
        for (ci, cube) in cubes.cubes(k).iter().enumerate() {
            count += cube.members.len();
            for &x in &cube.members {
                if who[x].is_some() {
                    disjoint_cover = false;
                }
                who[x] = Some(ci);
            }
            center_membership &= cube.members.binary_search(&cube.center).is_ok();
        }
        disjoint_cover &= count == n && who.iter().all(Option::is_some);
        membership.push(who);
    }

    let mut nesting = disjoint_cover;
    if disjoint_cover {
        for (lk, k) in nets.levels().enumerate() {
            for l in k + 1..=nets.k_max {
                for cube in cubes.cubes(l) {
                    let first = membership[lk][cube.members[0]];
                    nesting &= cube.members.iter().all(|&x| membership[lk][x] == first);
                }
            }
        }
    }

    let c = cubes.constants;
    let mut sandwich_inner = c.c1_effective > 0.0;
    let mut sandwich_outer = true;
    let mut child_ball_ratio = 0.0f64;
    for k in nets.levels() {
        let scale = nets.scale(k);
        for cube in cubes.cubes(k) {
            let inside: BTreeSet<usize> = cube.members.iter().copied().collect();
            for x in 0..n {
                let d = space.d(cube.center, x);
                if d < c.c1_effective * scale && !inside.contains(&x) {
                    sandwich_inner = false;
                }
                if inside.contains(&x) && d >= c.big_c1 * scale {
                    sandwich_outer = false;
                }
            }
            if k < nets.k_max {
                for &child in &cube.children {
                    let ch = &cubes.cubes(k + 1)[child];
                    let ratio = (space.d(ch.center, cube.center) + c.big_c1 * nets.scale(k + 1))
                        / (c.big_c1 * scale);
                    child_ball_ratio = child_ball_ratio.max(ratio);
                }
            }
        }
    }

    AxiomReport {
        separation,
        covering,
        disjoint_cover,
        nesting,
        center_membership,
        sandwich_inner,
        sandwich_outer,
        c1: c.c1,
        c1_effective: c.c1_effective,
        big_c1: c.big_c1,
        big_c1_needed: c.big_c1_needed,
        child_ball_ratio,
        admissible_delta: nets.admissible,
    }
}

/// A deterministic family of candidate open sets built from dyadic cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicOpenSets {
    /// Distinct point sets, ids ascending, in generation order.
    pub sets: Vec<Vec<usize>>,
    /// Number of distinct single-cube sets at the head of `sets`.
    pub single_cubes: usize,
    pub truncated: bool,
}

/// Single cubes (coarse to fine), then unions of two cubes, then superlevel
/// sets `{x : f(x) >= v}` of each reference function, deduplicated and cut
/// off after `max_count` sets.
pub fn enumerate_dyadic_open_sets(
    cubes: &CubeSystem,
    max_count: usize,
    references: &[Vec<f64>],
) -> DyadicOpenSets {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut sets = Vec::new();
    let mut truncated = false;
    let mut push = |s: Vec<usize>, sets: &mut Vec<Vec<usize>>| -> bool {
        if s.is_empty() || seen.contains(&s) {
            return true;
        }
        if sets.len() >= max_count {
            truncated = true;
            return false;
        }
        seen.insert(s.clone());
        sets.push(s);
        true
    };

    let all: Vec<&Cube> = cubes.iter().map(|(_, c)| c).collect();
    let mut open = true;
    for c in &all {
        open = push(c.members.clone(), &mut sets);
        if !open {
            break;
        }
    }
    let single_cubes = sets.len();
    'pairs: for i in 0..all.len() {
        if !open {
            break;
        }
        for j in i + 1..all.len() {
            let mut u: Vec<usize> = all[i]
                .members
                .iter()
                .chain(&all[j].members)
                .copied()
                .collect();
            u.sort_unstable();
            u.dedup();
            if !push(u, &mut sets) {
                open = false;
                break 'pairs;
            }
        }
    }
    for f in references {
        if !open {
            break;
        }
        let mut values: Vec<f64> = f.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in values.iter().rev() {
            let s: Vec<usize> = (0..f.len()).filter(|&x| f[x] >= v).collect();
            if !push(s, &mut sets) {
                open = false;
                break;
            }
        }
    }

    DyadicOpenSets {
        sets,
        single_cubes,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn two_point_nets() {
        let a = fixtures::fix_a();
        let nets = build_nets(&a, 0.5, 0).unwrap();
        assert_eq!(nets.level(0), &[0]);
        assert_eq!(nets.level(1), &[0, 1]);
        assert_eq!(nets.new_points(0), &[1]);
        assert_eq!(nets.k_max, 1);
    }

    #[test]
    fn single_point_nets() {
        let s = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        let nets = build_nets(&s, 0.5, -2).unwrap();
        for k in nets.levels() {
            assert_eq!(nets.level(k), &[0]);
            assert!(nets.new_points(k).is_empty());
        }
        assert_eq!(nets.k_max, 0);
    }

    #[test]
    fn invalid_delta() {
        let a = fixtures::fix_a();
        assert_eq!(build_nets(&a, 1.5, 0), Err(Error::InvalidDelta(1.5)));
        assert_eq!(build_nets(&a, 0.0, 0), Err(Error::InvalidDelta(0.0)));
        assert_eq!(build_nets(&a, 0.5, 1), Err(Error::InvalidLevelRange(1)));
    }

    #[test]
    fn two_point_cubes() {
        let a = fixtures::fix_a();
        let nets = build_nets(&a, 0.5, 0).unwrap();
        let cubes = build_cubes(&a, &nets).unwrap();
        assert_eq!(cubes.cubes(0)[0].members, vec![0, 1]);
        assert_eq!(cubes.cubes(1)[0].members, vec![0]);
        assert_eq!(cubes.cubes(1)[1].members, vec![1]);
        assert_eq!(cubes.cubes(1)[0].parent, Some(0));
        assert_eq!(cubes.cubes(1)[1].parent, Some(0));
        assert_eq!(cubes.cubes(0)[0].children, vec![0, 1]);
        let rep = verify_cube_axioms(&a, &cubes);
        assert!(rep.exact_axioms_pass(), "{rep:?}");
    }

    #[test]
    fn default_constants_for_metric_spaces() {
        let a = fixtures::fix_a();
        let nets = build_nets(&a, 0.5, 0).unwrap();
        let cubes = build_cubes(&a, &nets).unwrap();
        assert!((cubes.constants.c1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cubes.constants.big_c1, 4.0);
        assert!(delta_admissible(1.0, 1e-3));
        assert!((12.0 * 2.0 * 1e-3f64 - 0.024).abs() < 1e-15);
        assert!(!delta_admissible(1.0, 0.5));
    }

    #[test]
    fn mismatched_space_is_rejected() {
        let a = fixtures::fix_a();
        let c = fixtures::fix_c();
        let nets = build_nets(&a, 0.5, 0).unwrap();
        assert_eq!(build_cubes(&c, &nets), Err(Error::NetMismatch));
    }

    #[test]
    fn single_level_system_nests_vacuously() {
        let s = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        let nets = build_nets(&s, 0.5, 0).unwrap();
        let cubes = build_cubes(&s, &nets).unwrap();
        let rep = verify_cube_axioms(&s, &cubes);
        assert!(rep.nesting && rep.exact_axioms_pass());
        let fam = enumerate_dyadic_open_sets(&cubes, 10, &[]);
        assert_eq!(fam.sets, vec![vec![0]]);
    }

    #[test]
    fn open_sets_on_two_points() {
        let a = fixtures::fix_a();
        let nets = build_nets(&a, 0.5, 0).unwrap();
        let cubes = build_cubes(&a, &nets).unwrap();
        let fam = enumerate_dyadic_open_sets(&cubes, 10, &[]);
        for s in [vec![0], vec![1], vec![0, 1]] {
            assert!(fam.sets.contains(&s));
        }
        assert!(!fam.truncated);
        let fam = enumerate_dyadic_open_sets(&cubes, 1, &[]);
        assert_eq!(fam.sets.len(), 1);
        assert!(fam.truncated);
    }

    #[test]
    fn eight_point_line() {
        let c = fixtures::fix_c();
        let nets = build_nets(&c, 0.5, 0).unwrap();
        assert_eq!(nets.level(0).len(), 1);
        assert_eq!(nets.level(1), &[0, 5]);
        // Strict greedy separation: 3/8 is exactly 0.25 from 5/8.
        assert_eq!(nets.level(2), &[0, 5]);
        assert_eq!(nets.level(3), &[0, 2, 5, 7]);
        assert_eq!(nets.level(4).len(), 8);
        assert_eq!(nets.k_max, 4);
        let cubes = build_cubes(&c, &nets).unwrap();
        let rep = verify_cube_axioms(&c, &cubes);
        assert!(rep.exact_axioms_pass(), "{rep:?}");
        for k in nets.levels() {
            let total: usize = cubes.cubes(k).iter().map(|q| q.members.len()).sum();
            assert_eq!(total, 8);
        }
    }
}
