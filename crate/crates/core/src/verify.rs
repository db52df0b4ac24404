//! Acceptance suite. Each check rebuilds what it needs from seeded fixtures,
//! recomputes the quantity by brute force where possible and reports a
//! single pass/fail outcome with its runtime.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::czd::cz_decompose;
use crate::dyadic::{build_cubes, build_nets, CubeSystem};
use crate::error::Result;
use crate::fixtures;
use crate::product::{
    cp_norm, cp_norm_over_rectangles, duality_pairing, hp_norm, lift, product_analyze,
    product_square_function, project, sp_norm, Factor, OmegaMode, ProductFrame, ProductSignal,
    RectSequence,
};
use crate::space::FiniteSpace;
use crate::spacefile::{
    gen_euclidean, gen_snowflake, gen_ultrametric_tree, SpaceFile, WeightScheme,
};
use crate::squares::{
    continuous_square_function, discrete_square_function, lp_norm, pp_quantities,
};
use crate::wavelets::{build_basis, inner, smooth_cutoff, WaveletBasis};

/// A named space from the fixture set.
#[derive(Debug, Clone)]
pub struct SpaceCase {
    pub name: String,
    pub space: FiniteSpace,
}

/// A named product frame.
#[derive(Debug, Clone)]
pub struct FrameCase {
    pub name: String,
    pub frame: ProductFrame,
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
    /// Measured quantities, keyed by name.
    pub metrics: BTreeMap<String, f64>,
    /// Human-readable descriptions of every violated check.
    pub failures: Vec<String>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {} ({:.2}s of {:.0}s)",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed_secs,
            self.budget_secs
        )
    }
}

struct Tally {
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            metrics: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 50 {
            self.failures.push(what());
        }
    }

    fn max(&mut self, key: &str, v: f64) {
        let e = self
            .metrics
            .entry(key.to_string())
            .or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    fn min(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.to_string()).or_insert(f64::INFINITY);
        *e = e.min(v);
    }

    fn set(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }
}

fn finish(id: u32, name: &str, budget: f64, start: Instant, r: Result<Tally>) -> CriterionOutcome {
    let elapsed_secs = start.elapsed().as_secs_f64();
    let (metrics, mut failures) = match r {
        Ok(t) => (t.metrics, t.failures),
        Err(e) => (BTreeMap::new(), vec![format!("error: {e}")]),
    };
    if elapsed_secs > budget {
        failures.push(format!("runtime {elapsed_secs:.2}s exceeds {budget}s"));
    }
    CriterionOutcome {
        id,
        name: name.to_string(),
        pass: failures.is_empty(),
        elapsed_secs,
        budget_secs: budget,
        metrics,
        failures,
    }
}

/// Seeded signals with entries uniform in `[-1, 1)`.
pub fn seeded_signals(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn seeded_product_signals(n1: usize, n2: usize, count: usize, seed: u64) -> Vec<ProductSignal> {
    seeded_signals(n1 * n2, count, seed)
        .into_iter()
        .map(|v| ProductSignal::from_row_major(n1, n2, &v).expect("sized"))
        .collect()
}

fn case(name: String, file: SpaceFile) -> SpaceCase {
    SpaceCase {
        name,
        space: file.to_space().expect("generated spaces are valid"),
    }
}

/// Twenty seeded spaces of at most 256 points: Euclidean clouds, ultrametric
/// trees and squared-distance snowflakes of Euclidean clouds.
pub fn standard_spaces() -> Vec<SpaceCase> {
    let scheme = |i: usize| {
        if i % 2 == 0 {
            WeightScheme::Uniform
        } else {
            WeightScheme::Random
        }
    };
    let mut out = Vec::new();
    for (i, &(n, dim)) in [
        (32, 1),
        (64, 2),
        (128, 2),
        (200, 3),
        (256, 2),
        (48, 1),
        (96, 3),
    ]
    .iter()
    .enumerate()
    {
        let seed = 100 + i as u64;
        out.push(case(
            format!("euclidean-n{n}-d{dim}-s{seed}"),
            gen_euclidean(n, dim, seed, scheme(i)),
        ));
    }
    for (i, &(b, depth, ratio)) in [
        (2, 5, 0.5),
        (2, 7, 0.5),
        (2, 8, 0.6),
        (3, 4, 0.5),
        (3, 5, 0.4),
        (4, 3, 0.5),
        (4, 4, 0.3),
    ]
    .iter()
    .enumerate()
    {
        let seed = 200 + i as u64;
        out.push(case(
            format!("tree-b{b}-h{depth}-r{ratio}-s{seed}"),
            gen_ultrametric_tree(b, depth, ratio, seed, scheme(i)),
        ));
    }
    for (i, &(n, dim)) in [(32, 1), (64, 2), (100, 2), (150, 1), (200, 2), (256, 3)]
        .iter()
        .enumerate()
    {
        let seed = 300 + i as u64;
        out.push(case(
            format!("snowflake2-n{n}-d{dim}-s{seed}"),
            gen_snowflake(gen_euclidean(n, dim, seed, scheme(i)), 2.0),
        ));
    }
    out
}

pub const DELTAS: [f64; 2] = [0.3, 0.5];
pub const K_MIN: i32 = -1;

/// A space with its nets, cubes and basis at one `δ`.
pub struct System {
    pub label: String,
    pub space: FiniteSpace,
    pub cubes: CubeSystem,
    pub basis: WaveletBasis,
}

pub fn build_systems(spaces: &[SpaceCase], deltas: &[f64]) -> Result<Vec<System>> {
    let mut out = Vec::new();
    for s in spaces {
        for &delta in deltas {
            let nets = build_nets(&s.space, delta, K_MIN)?;
            let cubes = build_cubes(&s.space, &nets)?;
            let basis = build_basis(&s.space, &cubes)?;
            out.push(System {
                label: format!("{} delta={delta}", s.name),
                space: s.space.clone(),
                cubes,
                basis,
            });
        }
    }
    Ok(out)
}

fn small_space(kind: usize, n: usize, seed: u64) -> FiniteSpace {
    let file = match kind {
        0 => gen_euclidean(n, 2, seed, WeightScheme::Random),
        1 => {
            let depth = n.trailing_zeros();
            gen_ultrametric_tree(2, depth, 0.5, seed, WeightScheme::Random)
        }
        _ => gen_snowflake(gen_euclidean(n, 1, seed, WeightScheme::Uniform), 2.0),
    };
    file.to_space().expect("generated spaces are valid")
}

fn frame_case(name: &str, a: FiniteSpace, b: FiniteSpace) -> Result<FrameCase> {
    Ok(FrameCase {
        name: name.to_string(),
        frame: ProductFrame::new(Factor::build(a, 0.5, 0)?, Factor::build(b, 0.5, 0)?),
    })
}

/// Product frames with `n1 * n2 <= 16`, small enough for exhaustive open-set search.
pub fn exact_frames() -> Result<Vec<FrameCase>> {
    Ok(vec![
        FrameCase {
            name: "two-point x two-point".into(),
            frame: fixtures::fix_p(),
        },
        frame_case(
            "euclid4 x euclid4",
            small_space(0, 4, 11),
            small_space(0, 4, 12),
        )?,
        frame_case(
            "tree4 x euclid4",
            small_space(1, 4, 13),
            small_space(0, 4, 14),
        )?,
        frame_case(
            "euclid2 x tree8",
            small_space(0, 2, 15),
            small_space(1, 8, 16),
        )?,
        frame_case(
            "tree8 x euclid2",
            small_space(1, 8, 17),
            small_space(0, 2, 18),
        )?,
        frame_case(
            "snow4 x euclid3",
            small_space(2, 4, 19),
            small_space(0, 3, 20),
        )?,
        frame_case(
            "euclid5 x snow3",
            small_space(0, 5, 21),
            small_space(2, 3, 22),
        )?,
    ])
}

/// Product frames with factors of at most 16 points.
pub fn product_frames() -> Result<Vec<FrameCase>> {
    let mut out = exact_frames()?;
    out.push(frame_case(
        "euclid16 x tree16",
        small_space(0, 16, 31),
        small_space(1, 16, 32),
    )?);
    out.push(frame_case(
        "snow12 x euclid16",
        small_space(2, 12, 33),
        small_space(0, 16, 34),
    )?);
    out.push(frame_case(
        "tree8 x snow8",
        small_space(1, 8, 35),
        small_space(2, 8, 36),
    )?);
    Ok(out)
}

/// Frame used for the decomposition checks.
pub fn czd_frame() -> Result<ProductFrame> {
    Ok(frame_case(
        "euclid8 x tree8",
        small_space(0, 8, 41),
        small_space(1, 8, 42),
    )?
    .frame)
}

/// Net separation and covering, brute force.
pub fn check_nets(systems: &[System]) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for s in systems {
            let nets = s.cubes.nets();
            let a0 = s.space.a0();
            let n = s.space.len();
            let mut levels = 0;
            for k in nets.levels() {
                levels += 1;
                let centers = nets.level(k);
                let scale = s.cubes.delta().powi(k);
                for (i, &a) in centers.iter().enumerate() {
                    for &b in &centers[i + 1..] {
                        t.check(s.space.d(a, b) >= scale, || {
                            format!("{}: separation fails at k={k} for ({a},{b})", s.label)
                        });
                    }
                }
                for x in 0..n {
                    let m = centers
                        .iter()
                        .map(|&c| s.space.d(x, c))
                        .fold(f64::INFINITY, f64::min);
                    t.max("max_covering_ratio", m / (2.0 * a0 * scale));
                    t.check(m < 2.0 * a0 * scale, || {
                        format!("{}: covering fails at k={k} for x={x}", s.label)
                    });
                }
            }
            t.max("max_levels", levels as f64);
        }
        t.set("systems", systems.len() as f64);
        Ok(t)
    })();
    finish(1, "net axioms", 10.0, start, r)
}

/// Disjoint cover, nesting and the ball sandwich, brute force.
pub fn check_cubes(systems: &[System]) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for s in systems {
            let c = &s.cubes;
            let n = s.space.len();
            let consts = c.constants;
            let a0 = s.space.a0();
            t.check(
                (consts.big_c1 - 2.0 * a0 * consts.big_c0).abs() <= 1e-12 * consts.big_c1,
                || format!("{}: C1 differs from 2 A0 C0", s.label),
            );
            t.check(consts.c1_effective > 0.0, || {
                format!("{}: c1' is not positive", s.label)
            });
            t.min("min_c1_effective", consts.c1_effective);
            let mut owner_prev: Option<Vec<usize>> = None;
            for k in c.k_min()..=c.k_max() {
                let mut owner = vec![usize::MAX; n];
                let scale = c.delta().powi(k);
                for (i, q) in c.cubes(k).iter().enumerate() {
                    let members: BTreeSet<usize> = q.members.iter().copied().collect();
                    for &x in &q.members {
                        t.check(owner[x] == usize::MAX, || {
                            format!("{}: point {x} in two cubes at k={k}", s.label)
                        });
                        owner[x] = i;
                    }
                    for x in 0..n {
                        let d = s.space.d(q.center, x);
                        if d < consts.c1_effective * scale {
                            t.check(members.contains(&x), || {
                                format!("{}: inner ball leaks at k={k}, x={x}", s.label)
                            });
                        }
                        if members.contains(&x) {
                            t.max("max_outer_ratio", d / (consts.big_c1 * scale));
                            t.check(d < consts.big_c1 * scale, || {
                                format!("{}: outer ball misses x={x} at k={k}", s.label)
                            });
                        }
                    }
                }
                t.check(owner.iter().all(|&o| o != usize::MAX), || {
                    format!("{}: level {k} does not cover", s.label)
                });
                if let Some(prev) = &owner_prev {
                    for q in c.cubes(k) {
                        let p = prev[q.members[0]];
                        t.check(q.members.iter().all(|&x| prev[x] == p), || {
                            format!("{}: a level-{k} cube straddles two parents", s.label)
                        });
                    }
                }
                owner_prev = Some(owner);
            }
        }
        Ok(t)
    })();
    finish(2, "cube axioms", 10.0, start, r)
}

/// Orthonormality, cancellation, support containment and reconstruction.
pub fn check_basis(systems: &[System], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for (si, s) in systems.iter().enumerate() {
            let b = &s.basis;
            let n = b.n();
            let w = b.weights();
            let m = b.matrix();
            let weighted = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * w[i]);
            let gram = m.transpose() * weighted;
            let gram_err = (gram - DMatrix::<f64>::identity(n, n)).amax();
            t.max("max_gram_error", gram_err);
            t.check(gram_err <= 1e-10, || {
                format!("{}: Gram error {gram_err:e}", s.label)
            });
            for psi in b.wavelets() {
                let mean: f64 = psi.values.iter().zip(w).map(|(v, m)| v * m).sum();
                t.max("max_cancellation", mean.abs());
                t.check(mean.abs() <= 1e-12, || {
                    format!(
                        "{}: wavelet ({},{}) mean {mean:e}",
                        s.label, psi.k, psi.alpha
                    )
                });
                let support: BTreeSet<usize> = s
                    .cubes
                    .cube(psi.support_cube)
                    .members
                    .iter()
                    .copied()
                    .collect();
                t.check(
                    (0..n).all(|x| psi.values[x] == 0.0 || support.contains(&x)),
                    || {
                        format!(
                            "{}: wavelet ({},{}) leaves its cube",
                            s.label, psi.k, psi.alpha
                        )
                    },
                );
            }
            for f in seeded_signals(n, 100, seed ^ (si as u64 * 7919)) {
                let back = b.synthesize(&b.analyze(&f)?, true)?;
                let err = back
                    .iter()
                    .zip(&f)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                t.max("max_roundtrip_error", err);
                t.check(err <= 1e-10, || {
                    format!("{}: round trip error {err:e}", s.label)
                });
            }
        }
        Ok(t)
    })();
    finish(3, "wavelet basis", 30.0, start, r)
}

/// `||S f||_2 = ||f - coarse f||_2` and its product analogue.
pub fn check_isometry(systems: &[System], frames: &[FrameCase], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for (si, s) in systems.iter().enumerate() {
            let b = &s.basis;
            for f in seeded_signals(b.n(), 100, seed ^ (si as u64 * 104729)) {
                let sf = discrete_square_function(b, &f)?;
                let coarse = b.coarse(&f)?;
                let osc: Vec<f64> = f.iter().zip(coarse.iter()).map(|(a, c)| a - c).collect();
                let lhs = lp_norm(b.weights(), &sf, 2.0)?;
                let rhs = inner(&osc, &osc, b.weights()).sqrt();
                let err = (lhs - rhs).abs();
                t.max("max_error", err);
                t.check(err <= 1e-10, || {
                    format!("{}: isometry error {err:e}", s.label)
                });
            }
        }
        for (fi, fc) in frames.iter().enumerate() {
            let fr = &fc.frame;
            let (n1, n2) = fr.shape();
            for f in seeded_product_signals(n1, n2, 100, seed ^ (fi as u64 * 15485863)) {
                let s = product_square_function(fr, &f)?;
                let pure = project(fr, &lift(fr, &f)?)?;
                let lhs = fr.lp_norm(&s, 2.0)?;
                let rhs = fr.lp_norm(&pure, 2.0)?;
                let err = (lhs - rhs).abs();
                t.max("max_product_error", err);
                t.check(err <= 1e-10, || {
                    format!("{}: product isometry error {err:e}", fc.name)
                });
            }
        }
        Ok(t)
    })();
    finish(4, "square-function isometry", 30.0, start, r)
}

/// Relative slack for comparing mathematically ordered floating quantities.
pub const ORDER_SLACK: f64 = 1e-12;

/// Plancherel–Pólya sandwich and stability of `||S||_p / ||S_c||_p`.
pub fn check_plancherel_polya(systems: &[System], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for (si, s) in systems.iter().enumerate() {
            let b = &s.basis;
            let w = b.weights();
            let signals = seeded_signals(b.n(), 50, seed ^ (si as u64 * 32452843));
            for &p in &[1.0, 2.0, 3.0] {
                let mut ratios = Vec::new();
                for f in &signals {
                    let sc = continuous_square_function(b, f)?;
                    let sd = discrete_square_function(b, f)?;
                    let nsc = lp_norm(w, &sc, p)?;
                    let nsd = lp_norm(w, &sd, p)?;
                    if nsc > 0.0 {
                        ratios.push(nsd / nsc);
                    }
                    for n_shift in 0..=2 {
                        let pp = pp_quantities(b, &s.cubes, f, n_shift, p)?;
                        let tol = ORDER_SLACK * nsc;
                        t.check(
                            pp.pp_inf_norm <= nsc + tol && nsc <= pp.pp_sup_norm + tol,
                            || {
                                format!(
                                    "{}: p={p} N={n_shift}: {} <= {nsc} <= {} fails",
                                    s.label, pp.pp_inf_norm, pp.pp_sup_norm
                                )
                            },
                        );
                    }
                }
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ratios.iter().copied().fold(0.0, f64::max);
                t.check(hi.is_finite() && lo > 0.0, || {
                    format!("{}: p={p} ratio degenerate", s.label)
                });
                let spread = hi / lo;
                t.max("max_ratio", hi);
                t.min("min_ratio", lo);
                t.max("max_within_space_spread", spread);
                t.check(spread < 10.0, || {
                    format!("{}: p={p} ratio spread {spread}", s.label)
                });
            }
        }
        Ok(t)
    })();
    finish(5, "Plancherel-Polya sandwich", 60.0, start, r)
}

/// Largest `μ(R)^{(1-2/p)/2} |t_R|`.
fn single_rectangle_bound(frame: &ProductFrame, t: &RectSequence, p: f64) -> f64 {
    let (w1, w2) = frame.rect_shape();
    let mut best = 0.0f64;
    for i1 in 0..w1 {
        for i2 in 0..w2 {
            let v = frame.rect_measure(i1, i2).powf((1.0 - 2.0 / p) / 2.0) * t.0[(i1, i2)].abs();
            best = best.max(v);
        }
    }
    best
}

/// Sup over rectangles of `μ(R)^{1-2/p} Σ_{R' ⊆ R} t_{R'}²`, from member lists.
fn rectangle_sup_oracle(frame: &ProductFrame, t: &RectSequence, p: f64) -> f64 {
    let (w1, w2) = frame.rect_shape();
    let sets = |f: &Factor| -> Vec<BTreeSet<usize>> {
        f.basis
            .wavelets()
            .iter()
            .map(|w| w.coeff_members.iter().copied().collect())
            .collect()
    };
    let s1 = sets(&frame.factor1);
    let s2 = sets(&frame.factor2);
    let mut best = 0.0f64;
    for i1 in 0..w1 {
        for i2 in 0..w2 {
            let mut e = 0.0;
            for j1 in 0..w1 {
                if !s1[j1].is_subset(&s1[i1]) {
                    continue;
                }
                for j2 in 0..w2 {
                    if s2[j2].is_subset(&s2[i2]) {
                        e += t.0[(j1, j2)].powi(2);
                    }
                }
            }
            best = best.max(frame.rect_measure(i1, i2).powf(1.0 - 2.0 / p) * e);
        }
    }
    best.sqrt()
}

/// Random coefficients on the level pair carrying the most rectangles.
fn antichain_sequence(frame: &ProductFrame, rng: &mut ChaCha8Rng) -> RectSequence {
    let (w1, w2) = frame.rect_shape();
    let levels = |f: &Factor| -> Vec<i32> { f.basis.wavelets().iter().map(|w| w.k).collect() };
    let l1 = levels(&frame.factor1);
    let l2 = levels(&frame.factor2);
    let count = |k: i32, l: &[i32]| l.iter().filter(|&&x| x == k).count();
    let k1 = *l1
        .iter()
        .max_by_key(|&&k| (count(k, &l1), -k))
        .expect("wavelets");
    let k2 = *l2
        .iter()
        .max_by_key(|&&k| (count(k, &l2), -k))
        .expect("wavelets");
    RectSequence(DMatrix::from_fn(w1, w2, |i, j| {
        if l1[i] == k1 && l2[j] == k2 {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    }))
}

/// Heuristic ≤ exact, and the single-rectangle reduction.
pub fn check_cmo(frames: &[FrameCase], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC30);
        for (fi, fc) in frames.iter().enumerate() {
            let fr = &fc.frame;
            let (n1, n2) = fr.shape();
            for f in seeded_product_signals(n1, n2, 20, seed ^ (fi as u64 * 49979687)) {
                let lf = lift(fr, &f)?;
                for &p in &[2.0 / 3.0, 1.0] {
                    let exact = cp_norm(fr, &lf, p, OmegaMode::Exact, &[])?.value;
                    let heur = cp_norm(fr, &lf, p, OmegaMode::Heuristic, &[])?.value;
                    t.max(
                        "max_heuristic_over_exact",
                        heur / exact.max(f64::MIN_POSITIVE),
                    );
                    t.check(heur <= exact * (1.0 + ORDER_SLACK), || {
                        format!("{}: p={p} heuristic {heur} > exact {exact}", fc.name)
                    });
                    let rect = cp_norm_over_rectangles(fr, &lf, p)?;
                    let oracle = rectangle_sup_oracle(fr, &lf, p);
                    let err = (rect - oracle).abs();
                    t.max("max_rectangle_oracle_error", err);
                    t.check(err <= 1e-12, || {
                        format!("{}: rectangle sup mismatch {err:e}", fc.name)
                    });
                    t.check(rect <= exact * (1.0 + ORDER_SLACK), || {
                        format!("{}: rectangle sup above exact sup", fc.name)
                    });
                }
            }
            for _ in 0..20 {
                let s = antichain_sequence(fr, &mut rng);
                for &p in &[2.0 / 3.0, 1.0] {
                    let rect = cp_norm_over_rectangles(fr, &s, p)?;
                    let single = single_rectangle_bound(fr, &s, p);
                    let err = (rect - single).abs();
                    t.max("max_single_rectangle_error", err);
                    t.check(err <= 1e-12, || {
                        format!(
                            "{}: p={p} single-rectangle identity off by {err:e}",
                            fc.name
                        )
                    });
                }
            }
        }
        Ok(t)
    })();
    finish(6, "CMO oracle", 120.0, start, r)
}

/// Pairing bound with a ratio fixed on one batch and re-tested on another.
pub fn check_duality(frames: &[FrameCase], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for (fi, fc) in frames.iter().enumerate() {
            let fr = &fc.frame;
            let (n1, n2) = fr.shape();
            for &p in &[2.0 / 3.0, 1.0] {
                let batch_max = |s: u64| -> Result<f64> {
                    let fs = seeded_product_signals(n1, n2, 100, s);
                    let gs = seeded_product_signals(n1, n2, 100, s ^ 0xD0A1);
                    let mut m = 0.0f64;
                    for (f, g) in fs.iter().zip(&gs) {
                        let d = duality_pairing(fr, f, g, p, OmegaMode::Exact)?;
                        if let Some(r) = d.ratio {
                            m = m.max(r);
                        }
                    }
                    Ok(m)
                };
                let base = seed ^ (fi as u64 * 86028121);
                let recorded = batch_max(base)?.max(1.0);
                let fresh = batch_max(base ^ 0x5EED_0001)?;
                let growth = fresh.max(recorded) / recorded;
                t.max("max_recorded_ratio", recorded);
                t.max("max_growth", growth);
                t.check(growth < 10.0, || {
                    format!("{}: p={p} ratio grew {growth}x on new seeds", fc.name)
                });
            }
        }
        Ok(t)
    })();
    finish(7, "duality", 60.0, start, r)
}

/// Lifting and projection are mutually inverse on the pure block.
pub fn check_lifting(frames: &[FrameCase], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1F7);
        for (fi, fc) in frames.iter().enumerate() {
            let fr = &fc.frame;
            let (n1, n2) = fr.shape();
            let (w1, w2) = fr.rect_shape();
            for f in seeded_product_signals(n1, n2, 20, seed ^ (fi as u64 * 122949829)) {
                let lf = lift(fr, &f)?;
                for &p in &[2.0 / 3.0, 1.0, 2.0, 3.0] {
                    let a = sp_norm(fr, &lf, p)?;
                    let b = hp_norm(fr, &f, p)?;
                    let err = (a - b).abs();
                    t.max("max_norm_error", err);
                    t.check(err <= 1e-12, || {
                        format!("{}: p={p} s^p vs H^p {err:e}", fc.name)
                    });
                }
                let pure = project(fr, &lf)?;
                let again = project(fr, &lift(fr, &pure)?)?;
                let err = pure.max_abs_diff(&again);
                t.max("max_tp_tl_error", err);
                t.check(err <= 1e-10, || {
                    format!("{}: T_P T_L error {err:e}", fc.name)
                });
                let c = product_analyze(fr, &pure)?;
                t.max("max_pure_leak", c.non_wavelet_energy().abs().sqrt());
            }
            for _ in 0..20 {
                let s = RectSequence(DMatrix::from_fn(w1, w2, |_, _| rng.random_range(-1.0..1.0)));
                let back = lift(fr, &project(fr, &s)?)?;
                let err = (back.0 - &s.0).amax();
                t.max("max_tl_tp_error", err);
                t.check(err <= 1e-12, || {
                    format!("{}: T_L T_P error {err:e}", fc.name)
                });
            }
        }
        Ok(t)
    })();
    finish(8, "lifting and projection", 10.0, start, r)
}

/// `α` multipliers applied to the median of `S̃(f)`.
pub const ALPHA_GRID: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

fn median_positive(v: &[f64]) -> Option<f64> {
    let mut pos: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.is_empty() {
        return None;
    }
    pos.sort_by(f64::total_cmp);
    Some(pos[pos.len() / 2])
}

fn spread(v: &[f64]) -> f64 {
    let nz: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    if nz.is_empty() {
        return 1.0;
    }
    let hi = nz.iter().copied().fold(0.0, f64::max);
    let lo = nz.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Decomposition reconstruction, class partition, monotonicity and constants.
pub fn check_czd(frame: &ProductFrame, seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        let (p, p1, p2) = (1.0, 2.0, 2.0 / 3.0);

        let fp = fixtures::fix_p();
        let psi = &fp.factor1.basis.wavelets()[0].values;
        let rank_one = ProductSignal::from_fn(2, 2, |a, b| psi[a] * psi[b]);
        let r = cz_decompose(&fp, &rank_one, 0.5, p, p1, p2)?;
        let cb = r.c_b.unwrap_or(f64::NAN);
        t.set("reference_c_b", cb);
        t.check((cb - 0.5f64.powf(1.0 / 3.0)).abs() <= 1e-10, || {
            format!("reference c_b = {cb}, expected 0.5^(1/3)")
        });

        let (n1, n2) = frame.shape();
        let mut all_g = Vec::new();
        let mut all_b = Vec::new();
        let mut peak_g = Vec::new();
        let mut peak_b = Vec::new();
        for (i, f) in seeded_product_signals(n1, n2, 50, seed ^ 0xC2D)
            .iter()
            .enumerate()
        {
            let s = product_square_function(frame, f)?.to_row_major();
            let Some(med) = median_positive(&s) else {
                continue;
            };
            let lf = lift(frame, f)?;
            let nonzero: BTreeSet<(usize, usize)> = (0..lf.0.nrows())
                .flat_map(|a| (0..lf.0.ncols()).map(move |b| (a, b)))
                .filter(|&(a, b)| lf.0[(a, b)] != 0.0)
                .collect();
            let mut prev_r0: Option<BTreeSet<(usize, usize)>> = None;
            let mut cg = Vec::new();
            let mut cb = Vec::new();
            for m in ALPHA_GRID {
                let r = cz_decompose(frame, f, m * med, p, p1, p2)?;
                t.max("max_reconstruction_error", r.reconstruction_error);
                t.check(r.reconstruction_error <= 1e-10, || {
                    format!(
                        "signal {i}: reconstruction error {:e}",
                        r.reconstruction_error
                    )
                });
                let mut union = BTreeSet::new();
                let mut total = 0;
                for class in &r.rect_classes {
                    total += class.len();
                    union.extend(class.iter().copied());
                }
                t.check(total == union.len() && union == nonzero, || {
                    format!("signal {i}: classes do not partition the support")
                });
                let r0: BTreeSet<(usize, usize)> = r.rect_classes[0].iter().copied().collect();
                if let Some(prev) = &prev_r0 {
                    t.check(prev.is_subset(&r0), || {
                        format!("signal {i}: R0 shrank as alpha grew")
                    });
                }
                prev_r0 = Some(r0);
                match (r.c_g, r.c_b) {
                    (Some(g), Some(b)) if g.is_finite() && b.is_finite() => {
                        cg.push(g);
                        cb.push(b);
                    }
                    _ => t.check(false, || format!("signal {i}: constants not finite")),
                }
            }
            let (sg, sb) = (spread(&cg), spread(&cb));
            t.max("max_spread_c_g", sg);
            t.max("max_spread_c_b", sb);
            t.check(sg < 100.0 && sb < 100.0, || {
                format!("signal {i}: constant spread c_g {sg}, c_b {sb}")
            });
            peak_g.push(cg.iter().copied().fold(0.0, f64::max));
            peak_b.push(cb.iter().copied().fold(0.0, f64::max));
            all_g.extend(cg);
            all_b.extend(cb);
        }
        t.set("batch_spread_c_g", spread(&all_g));
        t.set("batch_spread_c_b", spread(&all_b));
        t.set("spread_of_peak_c_g", spread(&peak_g));
        t.set("spread_of_peak_c_b", spread(&peak_b));
        t.set("max_c_g", all_g.iter().copied().fold(0.0, f64::max));
        t.set("max_c_b", all_b.iter().copied().fold(0.0, f64::max));
        Ok(t)
    })();
    finish(9, "CZ decomposition", 60.0, start, r)
}

/// Cut-off equals one near `x0`, vanishes beyond the outer radius, stays in `[0, 1]`.
pub fn check_cutoff(systems: &[System], seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let r = (|| {
        let mut t = Tally::new();
        for (si, s) in systems.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (si as u64 * 982451653));
            let n = s.space.len();
            let lo = s.space.min_positive_distance().ln();
            let hi = (2.0 * s.space.diameter()).ln();
            for _ in 0..20 {
                let x0 = rng.random_range(0..n);
                let r0 = rng
                    .random_range(lo..hi)
                    .exp()
                    .max(s.space.min_positive_distance());
                let c = smooth_cutoff(&s.space, &s.cubes, x0, r0, 1.0)?;
                t.max("max_support_over_outer", c.support_radius / c.outer_radius);
                for x in 0..n {
                    let h = c.values[x];
                    let d = s.space.d(x0, x);
                    t.check((0.0..=1.0).contains(&h), || {
                        format!("{}: h({x}) = {h}", s.label)
                    });
                    if d < c.inner_radius {
                        t.check(h == 1.0, || format!("{}: h({x}) = {h} inside", s.label));
                    }
                    if d >= c.outer_radius {
                        t.check(h == 0.0, || format!("{}: h({x}) = {h} outside", s.label));
                    }
                }
            }
        }
        Ok(t)
    })();
    finish(10, "smooth cut-off", 5.0, start, r)
}

/// Runs all ten checks on the standard fixtures.
pub fn run_all(seed: u64) -> Result<Vec<CriterionOutcome>> {
    let systems = build_systems(&standard_spaces(), &DELTAS)?;
    let exact = exact_frames()?;
    let frames = product_frames()?;
    let czd = czd_frame()?;
    Ok(vec![
        check_nets(&systems),
        check_cubes(&systems),
        check_basis(&systems, seed),
        check_isometry(&systems, &frames, seed),
        check_plancherel_polya(&systems, seed),
        check_cmo(&exact, seed),
        check_duality(&exact, seed),
        check_lifting(&frames, seed),
        check_czd(&czd, seed),
        check_cutoff(&systems, seed),
    ])
}

/// Runs the single-space checks on user-supplied spaces.
pub fn run_space_checks(
    spaces: &[SpaceCase],
    deltas: &[f64],
    seed: u64,
) -> Result<Vec<CriterionOutcome>> {
    let systems = build_systems(spaces, deltas)?;
    Ok(vec![
        check_nets(&systems),
        check_cubes(&systems),
        check_basis(&systems, seed),
        check_isometry(&systems, &[], seed),
        check_plancherel_polya(&systems, seed),
        check_cutoff(&systems, seed),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_sizes() {
        let spaces = standard_spaces();
        assert_eq!(spaces.len(), 20);
        assert!(spaces.iter().all(|s| s.space.len() <= 256));
        for fc in exact_frames().unwrap() {
            let (a, b) = fc.frame.shape();
            assert!(a * b <= 16, "{}", fc.name);
            assert!(fc.frame.n_rectangles() > 0, "{}", fc.name);
        }
        for fc in product_frames().unwrap() {
            let (a, b) = fc.frame.shape();
            assert!(a <= 16 && b <= 16);
        }
    }

    #[test]
    fn small_suite_passes_on_fixed_spaces() {
        let spaces = vec![
            SpaceCase {
                name: "two-point".into(),
                space: fixtures::fix_a(),
            },
            SpaceCase {
                name: "line8".into(),
                space: fixtures::fix_c(),
            },
        ];
        for o in run_space_checks(&spaces, &[0.5], 0).unwrap() {
            assert!(o.pass, "{}: {:?}", o.name, o.failures);
        }
    }

    #[test]
    fn oracles_agree_on_reference_frame() {
        let fp = fixtures::fix_p();
        let s = RectSequence(DMatrix::from_element(1, 1, 0.7));
        assert!((rectangle_sup_oracle(&fp, &s, 1.0) - 0.7).abs() < 1e-15);
        assert!((single_rectangle_bound(&fp, &s, 1.0) - 0.7).abs() < 1e-15);
    }
}
