use approx::assert_abs_diff_eq;
use dyadwave::czd::{cz_decompose, level_sets, strong_maximal};
use dyadwave::dyadic::{build_cubes, build_nets};
use dyadwave::product::{
    lift, product_square_function, project, Factor, ProductFrame, ProductSignal, RectSequence,
};
use dyadwave::space::geometry_report;
use dyadwave::spacefile::{gen_euclidean, gen_snowflake, gen_ultrametric_tree, WeightScheme};
use dyadwave::squares::{continuous_square_function, discrete_square_function, lp_norm};
use dyadwave::wavelets::{build_basis, inner};
use dyadwave::FiniteSpace;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn space_strategy() -> impl Strategy<Value = FiniteSpace> {
    (0usize..3, 2usize..24, any::<u64>(), any::<bool>()).prop_map(|(kind, n, seed, random)| {
        let scheme = if random {
            WeightScheme::Random
        } else {
            WeightScheme::Uniform
        };
        let file = match kind {
            0 => gen_euclidean(n, 2, seed, scheme),
            1 => gen_ultrametric_tree(
                2,
                (n as f64).log2().ceil().clamp(1.0, 4.0) as u32,
                0.5,
                seed,
                scheme,
            ),
            _ => gen_snowflake(gen_euclidean(n, 1, seed, scheme), 2.0),
        };
        file.to_space().unwrap()
    })
}

fn signal(n: usize, seed: u64) -> Vec<f64> {
    dyadwave::verify::seeded_signals(n, 1, seed).pop().unwrap()
}

fn brute_a0(s: &FiniteSpace) -> f64 {
    let n = s.len();
    let mut best = 1.0f64;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x != y {
                    best = best.max(s.d(x, y) / (s.d(x, z) + s.d(z, y)));
                }
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn a0_matches_triple_loop(s in space_strategy()) {
        prop_assert_eq!(s.a0(), brute_a0(&s));
    }

    #[test]
    fn doubling_matches_brute_force(s in space_strategy()) {
        let diam = s.diameter();
        let grid: Vec<f64> = (1..=8).map(|i| diam * i as f64 / 4.0).collect();
        let rep = geometry_report(&s, &grid).unwrap();
        let mut best = 1.0f64;
        for x in 0..s.len() {
            for &r in &grid {
                let v = |rad: f64| -> f64 {
                    (0..s.len()).filter(|&y| s.d(x, y) < rad).map(|y| s.weight(y)).sum()
                };
                best = best.max(v(2.0 * r) / v(r));
            }
        }
        prop_assert!((rep.doubling_constant - best).abs() <= 1e-12 * best);
    }

    #[test]
    fn basis_is_orthonormal_and_parseval(s in space_strategy(), half in any::<bool>(), seed in any::<u64>()) {
        let delta = if half { 0.5 } else { 0.3 };
        let nets = build_nets(&s, delta, -1).unwrap();
        let cubes = build_cubes(&s, &nets).unwrap();
        let b = build_basis(&s, &cubes).unwrap();
        let w = s.weights();
        let funcs: Vec<&[f64]> = b
            .wavelets()
            .iter()
            .map(|x| x.values.as_slice())
            .chain(b.scaling().iter().map(|x| x.values.as_slice()))
            .collect();
        prop_assert_eq!(funcs.len(), s.len());
        for (i, f) in funcs.iter().enumerate() {
            for (j, g) in funcs.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((inner(f, g, w) - want).abs() < 1e-10);
            }
        }
        let f = signal(s.len(), seed);
        let c = b.analyze(&f).unwrap();
        let energy: f64 = c.wavelet.iter().chain(&c.scaling).map(|v| v * v).sum();
        prop_assert!((energy - inner(&f, &f, w)).abs() < 1e-10);
        let back = b.synthesize(&c, true).unwrap();
        prop_assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn projections_are_idempotent(s in space_strategy(), seed in any::<u64>()) {
        let nets = build_nets(&s, 0.5, 0).unwrap();
        let cubes = build_cubes(&s, &nets).unwrap();
        let b = build_basis(&s, &cubes).unwrap();
        let f = signal(s.len(), seed);
        let mut total = vec![0.0; s.len()];
        for k in b.wavelet_levels() {
            let once = b.dk_apply(k, &f).unwrap();
            let twice = b.dk_apply(k, &once).unwrap();
            prop_assert!(once.max_abs_diff(&twice) < 1e-10);
            for (t, v) in total.iter_mut().zip(once.iter()) {
                *t += v;
            }
        }
        let coarse = b.coarse(&f).unwrap();
        for x in 0..s.len() {
            prop_assert!((total[x] + coarse[x] - f[x]).abs() < 1e-10);
        }
        let sd = discrete_square_function(&b, &f).unwrap();
        let sc = continuous_square_function(&b, &f).unwrap();
        let a = lp_norm(s.weights(), &sd, 2.0).unwrap();
        let c = lp_norm(s.weights(), &sc, 2.0).unwrap();
        prop_assert!((a - c).abs() < 1e-10);
    }

    #[test]
    fn cubes_partition_and_nest(s in space_strategy(), half in any::<bool>()) {
        let delta = if half { 0.5 } else { 0.3 };
        let nets = build_nets(&s, delta, -2).unwrap();
        for k in nets.k_min..nets.k_max {
            let coarse = nets.level(k);
            let fine = nets.level(k + 1);
            prop_assert!(coarse.iter().all(|c| fine.contains(c)));
        }
        let cubes = build_cubes(&s, &nets).unwrap();
        for k in cubes.k_min()..=cubes.k_max() {
            let mut seen = vec![0usize; s.len()];
            for q in cubes.cubes(k) {
                for &x in &q.members {
                    seen[x] += 1;
                }
                if k > cubes.k_min() {
                    let parent = &cubes.cubes(k - 1)[q.parent.unwrap()];
                    prop_assert!(q.members.iter().all(|x| parent.members.contains(x)));
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}

fn frame_strategy() -> impl Strategy<Value = ProductFrame> {
    (
        2usize..7,
        2usize..7,
        any::<u64>(),
        prop_oneof![Just(0), Just(-3)],
    )
        .prop_map(|(a, b, seed, k_min)| {
            let f1 = gen_euclidean(a, 2, seed, WeightScheme::Random)
                .to_space()
                .unwrap();
            let f2 = gen_euclidean(b, 1, seed ^ 1, WeightScheme::Random)
                .to_space()
                .unwrap();
            ProductFrame::new(
                Factor::build(f1, 0.5, k_min).unwrap(),
                Factor::build(f2, 0.5, k_min).unwrap(),
            )
        })
}

fn product_signal(frame: &ProductFrame, seed: u64) -> ProductSignal {
    let (n1, n2) = frame.shape();
    ProductSignal::from_row_major(n1, n2, &signal(n1 * n2, seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn product_isometry_and_lifting(frame in frame_strategy(), seed in any::<u64>()) {
        let f = product_signal(&frame, seed);
        let lf = lift(&frame, &f).unwrap();
        let pure = project(&frame, &lf).unwrap();
        let s = product_square_function(&frame, &f).unwrap();
        let lhs = frame.lp_norm(&s, 2.0).unwrap();
        let rhs = frame.lp_norm(&pure, 2.0).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
        prop_assert!((lhs - lf.0.norm()).abs() < 1e-10);
        let (w1, w2) = frame.rect_shape();
        let t = RectSequence(DMatrix::from_fn(w1, w2, |i, j| (i as f64 + 0.5) * (j as f64 - 1.0)));
        let back = lift(&frame, &project(&frame, &t).unwrap()).unwrap();
        prop_assert!((back.0 - &t.0).amax() < 1e-12);
    }

    #[test]
    fn maximal_function_dominates_global_average(frame in frame_strategy(), seed in any::<u64>()) {
        let f = product_signal(&frame, seed);
        let m = strong_maximal(&frame, &f).unwrap();
        let w = frame.point_weights();
        let top = |c: &dyadwave::dyadic::CubeSystem| c.cubes(c.k_min()).len() == 1;
        if top(&frame.factor1.cubes) && top(&frame.factor2.cubes) {
            let avg = f.0.abs().component_mul(w).sum() / frame.total_measure();
            prop_assert!(m.0.iter().all(|&v| v >= avg * (1.0 - 1e-12)));
        }
        let pointwise = f.0.abs();
        prop_assert!(m.0.iter().zip(pointwise.iter()).all(|(a, b)| *a >= b * (1.0 - 1e-12)));
    }

    #[test]
    fn decomposition_invariants(frame in frame_strategy(), seed in any::<u64>(), scale in 0.05f64..4.0) {
        let f = product_signal(&frame, seed);
        let ls = level_sets(&frame, &f, scale).unwrap();
        for pair in ls.omega.windows(2) {
            prop_assert!(pair[1].iter().zip(&pair[0]).all(|(a, b)| !*a || *b));
        }
        let r = cz_decompose(&frame, &f, scale, 1.0, 2.0, 0.5).unwrap();
        let rebuilt = &r.g.0 + &r.b.0 + &r.remainder.0;
        prop_assert!((rebuilt - &f.0).amax() < 1e-10);
        let twice = ProductSignal(&f.0 * 2.0);
        let r2 = cz_decompose(&frame, &twice, 2.0 * scale, 1.0, 2.0, 0.5).unwrap();
        prop_assert_eq!(&r.rect_classes, &r2.rect_classes);
        prop_assert!((&r2.g.0 - &r.g.0 * 2.0).amax() < 1e-10);
        prop_assert!((&r2.b.0 - &r.b.0 * 2.0).amax() < 1e-10);
    }
}

#[test]
fn reference_decomposition_constant() {
    let frame = dyadwave::fixtures::fix_p();
    let psi = &frame.factor1.basis.wavelets()[0].values;
    let f = ProductSignal::from_fn(2, 2, |a, b| psi[a] * psi[b]);
    let r = cz_decompose(&frame, &f, 0.5, 1.0, 2.0, 2.0 / 3.0).unwrap();
    assert_abs_diff_eq!(r.c_b.unwrap(), 0.5f64.powf(1.0 / 3.0), epsilon = 1e-10);
}
