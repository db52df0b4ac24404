//! Littlewood–Paley square functions and Plancherel–Pólya quantities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::CubeSystem;
use crate::error::{Error, Result};
use crate::space::FiniteSpace;
use crate::wavelets::{Signal, WaveletBasis};

/// `(Σ |f|^p μ)^{1/p}`.
pub fn lp_norm(weights: &[f64], f: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidP(p));
    }
    let s: f64 = f
        .iter()
        .zip(weights)
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Lower end `ω / (ω + η)` of the admissible exponent range.
pub fn p_lower_bound(upper_dimension: f64, eta: f64) -> f64 {
    upper_dimension / (upper_dimension + eta)
}

/// `S(f)(x) = (Σ_{k,α} |⟨ψ_α^k, f⟩|² χ_Q(x) / μ(Q))^{1/2}` with `Q` the
/// coefficient cube of each wavelet. Scaling coefficients are left out.
pub fn discrete_square_function(basis: &WaveletBasis, f: &[f64]) -> Result<Signal> {
    let coeffs = basis.analyze(f)?;
    let mut sq = vec![0.0; basis.n()];
    for (w, c) in basis.wavelets().iter().zip(&coeffs.wavelet) {
        let v = c * c / w.coeff_measure;
        for &x in &w.coeff_members {
            sq[x] += v;
        }
    }
    Ok(Signal(sq.into_iter().map(f64::sqrt).collect()))
}

/// `S_c(f)(x) = (Σ_k |D_k f(x)|²)^{1/2}`.
pub fn continuous_square_function(basis: &WaveletBasis, f: &[f64]) -> Result<Signal> {
    let mut sq = vec![0.0; basis.n()];
    for k in basis.wavelet_levels() {
        let d = basis.dk_apply(k, f)?;
        for (s, v) in sq.iter_mut().zip(d.iter()) {
            *s += v * v;
        }
    }
    Ok(Signal(sq.into_iter().map(f64::sqrt).collect()))
}

/// Sup and inf sampled square functions over the cubes of level `k' + N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlancherelPolya {
    pub n_shift: i32,
    pub p: f64,
    pub pp_sup_norm: f64,
    pub pp_inf_norm: f64,
    pub pp_sup: Signal,
    pub pp_inf: Signal,
    /// Levels `k'` for which `k' + N` exceeded `k_max` and was clamped.
    pub clamped_levels: Vec<i32>,
}

pub fn pp_quantities(
    basis: &WaveletBasis,
    cubes: &CubeSystem,
    f: &[f64],
    n_shift: i32,
    p: f64,
) -> Result<PlancherelPolya> {
    if n_shift < 0 {
        return Err(Error::InvalidParams(format!(
            "N must be >= 0, got {n_shift}"
        )));
    }
    lp_norm(&[], &[], p)?;
    let n = basis.n();
    let mut sup_sq = vec![0.0; n];
    let mut inf_sq = vec![0.0; n];
    let mut clamped_levels = Vec::new();
    for k in basis.wavelet_levels() {
        let d = basis.dk_apply(k, f)?;
        let level = if k + n_shift > cubes.k_max() {
            clamped_levels.push(k);
            cubes.k_max()
        } else {
            k + n_shift
        };
        for cube in cubes.cubes(level) {
            let (lo, hi) = cube
                .members
                .iter()
                .map(|&z| d[z] * d[z])
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            for &x in &cube.members {
                sup_sq[x] += hi;
                inf_sq[x] += lo;
            }
        }
    }
    let pp_sup = Signal(sup_sq.into_iter().map(f64::sqrt).collect());
    let pp_inf = Signal(inf_sq.into_iter().map(f64::sqrt).collect());
    Ok(PlancherelPolya {
        n_shift,
        p,
        pp_sup_norm: lp_norm(basis.weights(), &pp_sup, p)?,
        pp_inf_norm: lp_norm(basis.weights(), &pp_inf, p)?,
        pp_sup,
        pp_inf,
        clamped_levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostOrthogonality {
    pub k: i32,
    pub kprime: i32,
    pub n_shift: i32,
    pub gamma: f64,
    pub eta: f64,
    /// Largest ratio of the inner product to the right-hand envelope.
    pub constant: f64,
    pub evaluated: u64,
}

/// Measures the almost-orthogonality constant between the normalized
/// level-`k` wavelets and the columns `D_{k'}(·, z)` for `z` in the cubes of
/// level `k' + N`.
#[allow(clippy::too_many_arguments)]
pub fn almost_orthogonality_report(
    space: &FiniteSpace,
    basis: &WaveletBasis,
    cubes: &CubeSystem,
    k: i32,
    kprime: i32,
    n_shift: i32,
    gamma: f64,
    eta: f64,
) -> Result<AlmostOrthogonality> {
    let wavelets = basis.level(k)?;
    let kernel = basis.dk_kernel(kprime)?;
    let level = (kprime + n_shift).min(cubes.k_max());
    let m = k.min(kprime);
    let scale = basis.delta().powi(m);
    let decay = basis.delta().powf((k - kprime).abs() as f64 * eta);
    let weights = basis.weights();
    let mut constant = 0.0f64;
    let mut evaluated = 0u64;
    for w in wavelets {
        let amp = w.coeff_measure.sqrt();
        let xa = w.alpha;
        for cube in cubes.cubes(level) {
            let xb = cube.center;
            let d = space.d(xa, xb);
            let vol = space.v_r(xa, scale) + space.v_r(xb, scale) + space.v_between(xa, xb);
            let rhs = decay * (scale / (scale + d)).powf(gamma) / vol;
            for &z in &cube.members {
                let lhs: f64 = w
                    .support
                    .iter()
                    .map(|&x| w.values[x] * kernel[(x, z)] * weights[x])
                    .sum::<f64>()
                    .abs()
                    / amp;
                constant = constant.max(lhs / rhs);
                evaluated += 1;
            }
        }
    }
    Ok(AlmostOrthogonality {
        k,
        kprime,
        n_shift,
        gamma,
        eta,
        constant,
        evaluated,
    })
}

/// Per-signal square-function norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareFunctionReport {
    pub p: f64,
    pub n_shift: i32,
    pub norm_s: f64,
    pub norm_sc: f64,
    /// `norm_s / norm_sc`, `None` when `norm_sc` vanishes.
    pub ratio: Option<f64>,
    pub pp_sup_norm: f64,
    pub pp_inf_norm: f64,
    /// `||f - coarse(f)||_p`.
    pub norm_oscillation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceAggregate {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub equivalence_constant: f64,
    /// Extremes of `||S(f)||_p / ||f - coarse(f)||_p`.
    pub min_ratio_to_f: f64,
    pub max_ratio_to_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub p: f64,
    #[serde(rename = "N")]
    pub n_shift: i32,
    pub per_signal: Vec<SquareFunctionReport>,
    pub aggregate: EquivalenceAggregate,
}

pub fn square_function_report(
    basis: &WaveletBasis,
    cubes: &CubeSystem,
    f: &[f64],
    p: f64,
    n_shift: i32,
) -> Result<SquareFunctionReport> {
    let w = basis.weights();
    let s = discrete_square_function(basis, f)?;
    let sc = continuous_square_function(basis, f)?;
    let pp = pp_quantities(basis, cubes, f, n_shift, p)?;
    let coarse = basis.coarse(f)?;
    let osc: Vec<f64> = f.iter().zip(coarse.iter()).map(|(a, b)| a - b).collect();
    let norm_s = lp_norm(w, &s, p)?;
    let norm_sc = lp_norm(w, &sc, p)?;
    Ok(SquareFunctionReport {
        p,
        n_shift,
        norm_s,
        norm_sc,
        ratio: (norm_sc > 0.0).then(|| norm_s / norm_sc),
        pp_sup_norm: pp.pp_sup_norm,
        pp_inf_norm: pp.pp_inf_norm,
        norm_oscillation: lp_norm(w, &osc, p)?,
    })
}

/// Batch comparison of `||S f||_p`, `||S_c f||_p` and `||f - coarse f||_p`.
pub fn equivalence_report(
    basis: &WaveletBasis,
    cubes: &CubeSystem,
    signals: &[Signal],
    p: f64,
    n_shift: i32,
) -> Result<EquivalenceReport> {
    if signals.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_signal = signals
        .par_iter()
        .map(|f| square_function_report(basis, cubes, f, p, n_shift))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = per_signal.iter().filter_map(|r| r.ratio).collect();
    let to_f: Vec<f64> = per_signal
        .iter()
        .filter(|r| r.norm_oscillation > 0.0)
        .map(|r| r.norm_s / r.norm_oscillation)
        .collect();
    let (min_ratio, max_ratio) = extremes(&ratios);
    let (min_ratio_to_f, max_ratio_to_f) = extremes(&to_f);
    Ok(EquivalenceReport {
        p,
        n_shift,
        per_signal,
        aggregate: EquivalenceAggregate {
            min_ratio,
            max_ratio,
            equivalence_constant: max_ratio / min_ratio,
            min_ratio_to_f,
            max_ratio_to_f,
        },
    })
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Empirical constant of the inf-side Plancherel–Pólya inequality for each
/// `N` on a grid, and the first `N` after which it moves by less than 5%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpSweep {
    pub p: f64,
    /// `(N, max over the batch of ||S_c f||_p / pp_inf_norm)`.
    pub constants: Vec<(i32, f64)>,
    pub stable_n: Option<i32>,
}

pub fn pp_sweep(
    basis: &WaveletBasis,
    cubes: &CubeSystem,
    signals: &[Signal],
    p: f64,
    n_grid: &[i32],
) -> Result<PpSweep> {
    if signals.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut constants = Vec::with_capacity(n_grid.len());
    for &n_shift in n_grid {
        let mut c = 0.0f64;
        for f in signals {
            let sc = lp_norm(basis.weights(), &continuous_square_function(basis, f)?, p)?;
            let pp = pp_quantities(basis, cubes, f, n_shift, p)?;
            if pp.pp_inf_norm > 0.0 {
                c = c.max(sc / pp.pp_inf_norm);
            } else if sc > 0.0 {
                c = f64::INFINITY;
            }
        }
        constants.push((n_shift, c));
    }
    let stable_n = constants.windows(2).find_map(|w| {
        let (a, b) = (w[0].1, w[1].1);
        (a.is_finite() && b.is_finite() && (a - b).abs() <= 0.05 * a.max(b)).then_some(w[0].0)
    });
    Ok(PpSweep {
        p,
        constants,
        stable_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_cubes, build_nets};
    use crate::fixtures;
    use crate::wavelets::build_basis;
    use approx::assert_abs_diff_eq;

    fn pipeline(space: &FiniteSpace) -> (CubeSystem, WaveletBasis) {
        let nets = build_nets(space, 0.5, 0).unwrap();
        let cubes = build_cubes(space, &nets).unwrap();
        let basis = build_basis(space, &cubes).unwrap();
        (cubes, basis)
    }

    #[test]
    fn lp_examples() {
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(
            lp_norm(&[1.0, 1.0], &[1.0, -1.0], 2.0).unwrap(),
            s2,
            epsilon = 1e-15
        );
        assert_eq!(lp_norm(&[1.0, 1.0], &[1.0, 0.0], 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            lp_norm(&[0.125; 8], &[1.0; 8], 0.5).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(lp_norm(&[1.0], &[1.0], 0.0), Err(Error::InvalidP(0.0)));
        assert_eq!(lp_norm(&[1.0], &[1.0], -1.0), Err(Error::InvalidP(-1.0)));
    }

    #[test]
    fn two_point_square_functions() {
        let a = fixtures::fix_a();
        let (cubes, b) = pipeline(&a);
        let s2 = 2f64.sqrt();
        let s = discrete_square_function(&b, &[1.0, 1.0]).unwrap();
        assert!(s.iter().all(|&v| v.abs() < 1e-15));
        let s = discrete_square_function(&b, &[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], s2, epsilon = 1e-14);
        assert_abs_diff_eq!(lp_norm(b.weights(), &s, 2.0).unwrap(), s2, epsilon = 1e-14);

        let sc = continuous_square_function(&b, &[1.0, 1.0]).unwrap();
        assert!(sc.iter().all(|&v| v.abs() < 1e-15));
        let sc = continuous_square_function(&b, &[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(sc[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sc[1], 1.0, epsilon = 1e-14);

        let pp = pp_quantities(&b, &cubes, &[1.0, -1.0], 1, 2.0).unwrap();
        assert_abs_diff_eq!(pp.pp_sup_norm, s2, epsilon = 1e-14);
        assert_abs_diff_eq!(pp.pp_inf_norm, s2, epsilon = 1e-14);
        assert!(pp.clamped_levels.is_empty());
        let pp = pp_quantities(&b, &cubes, &[1.0, -1.0], 2, 2.0).unwrap();
        assert_eq!(pp.clamped_levels, vec![0]);
    }

    #[test]
    fn l4_norm_of_single_coefficient() {
        let a = fixtures::fix_a();
        let (cubes, b) = pipeline(&a);
        let r = square_function_report(&b, &cubes, &[1.0, -1.0], 4.0, 0).unwrap();
        assert_abs_diff_eq!(r.norm_s, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn continuous_square_function_of_a_wavelet() {
        let c = fixtures::fix_c();
        let (_, b) = pipeline(&c);
        for w in b.wavelets() {
            let sc = continuous_square_function(&b, &w.values).unwrap();
            for x in 0..8 {
                assert_abs_diff_eq!(sc[x], w.values[x].abs(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn finest_singleton_cubes_collapse_sup_and_inf() {
        let c = fixtures::fix_c();
        let (cubes, b) = pipeline(&c);
        let f: Vec<f64> = (0..8).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        // N large enough that every level samples the singleton cubes
        let pp = pp_quantities(&b, &cubes, &f, 10, 2.0).unwrap();
        assert_abs_diff_eq!(pp.pp_sup_norm, pp.pp_inf_norm, epsilon = 1e-14);
        let sc = continuous_square_function(&b, &f).unwrap();
        assert_abs_diff_eq!(
            pp.pp_sup_norm,
            lp_norm(b.weights(), &sc, 2.0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn almost_orthogonality_is_finite_and_order_independent() {
        let c = fixtures::fix_c();
        let (cubes, b) = pipeline(&c);
        let r = almost_orthogonality_report(&c, &b, &cubes, 0, 2, 0, 1.0, 1.0).unwrap();
        assert!(r.constant.is_finite());
        // across levels the projections are orthogonal
        assert!(r.constant < 1e-10);
        let same = almost_orthogonality_report(&c, &b, &cubes, 2, 2, 0, 1.0, 1.0).unwrap();
        assert!(same.constant.is_finite() && same.constant > 0.0);
    }

    #[test]
    fn empty_batch() {
        let a = fixtures::fix_a();
        let (cubes, b) = pipeline(&a);
        assert_eq!(
            equivalence_report(&b, &cubes, &[], 2.0, 0),
            Err(Error::EmptyBatch)
        );
    }
}
