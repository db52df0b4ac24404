//! Strong maximal function, square-function level sets and the
//! Calderón–Zygmund decomposition `f = g + b` on a product frame.
//!
//! The decomposition splits the wavelet × wavelet block of `f`. Whatever
//! involves a scaling function in either factor is returned as `remainder`,
//! so `g + b + remainder = f`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dyadic::CubeSystem;
use crate::error::{Error, Result};
use crate::product::{
    hp_norm, product_analyze, product_square_function, project, ProductFrame, ProductSignal,
    RectSequence,
};

fn level_indicators(cubes: &CubeSystem, k: i32) -> (DMatrix<f64>, Vec<f64>) {
    let list = cubes.cubes(k);
    let mut m = DMatrix::zeros(list.len(), cubes.n_points());
    for (i, c) in list.iter().enumerate() {
        for &x in &c.members {
            m[(i, x)] = 1.0;
        }
    }
    (m, list.iter().map(|c| c.measure).collect())
}

/// Dyadic strong maximal function: the largest average of `|f|` over cube
/// pairs `Q¹ × Q²` containing the point, all levels of both systems.
pub fn strong_maximal(frame: &ProductFrame, f: &ProductSignal) -> Result<ProductSignal> {
    frame.check_signal(f)?;
    let c1 = &frame.factor1.cubes;
    let c2 = &frame.factor2.cubes;
    let (n1, n2) = frame.shape();
    let mass = f.0.abs().component_mul(frame.point_weights());
    let lv2: Vec<_> = (c2.k_min()..=c2.k_max())
        .map(|k| (k, level_indicators(c2, k)))
        .collect();
    let mut out = DMatrix::zeros(n1, n2);
    for k1 in c1.k_min()..=c1.k_max() {
        let (i1, m1) = level_indicators(c1, k1);
        let left = &i1 * &mass;
        for (k2, (i2, m2)) in &lv2 {
            let sums = &left * i2.transpose();
            for a in 0..n1 {
                let q1 = c1.owner(k1, a);
                for b in 0..n2 {
                    let q2 = c2.owner(*k2, b);
                    let avg = sums[(q1, q2)] / (m1[q1] * m2[q2]);
                    if avg > out[(a, b)] {
                        out[(a, b)] = avg;
                    }
                }
            }
        }
    }
    Ok(ProductSignal(out))
}

/// Nested superlevel sets of `S̃(f)` and their maximal enlargements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSets {
    pub alpha: f64,
    /// `Ω_ℓ = {S̃(f) > α 2^ℓ}` as row-major indicators; the last one is empty.
    pub omega: Vec<Vec<bool>>,
    /// `Ω̃_ℓ = {M_s(χ_{Ω_ℓ}) > 1/(2A₀)}`.
    pub omega_tilde: Vec<Vec<bool>>,
    /// Index of the first empty `Ω_ℓ`.
    pub max_ell: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

pub fn level_sets(frame: &ProductFrame, f: &ProductSignal, alpha: f64) -> Result<LevelSets> {
    check_alpha(alpha)?;
    let s = product_square_function(frame, f)?.to_row_major();
    level_sets_of(frame, &s, alpha)
}

fn level_sets_of(frame: &ProductFrame, s: &[f64], alpha: f64) -> Result<LevelSets> {
    let (n1, n2) = frame.shape();
    let threshold = 1.0 / (2.0 * frame.a0());
    let mut omega = Vec::new();
    let mut omega_tilde = Vec::new();
    let mut ell = 0i32;
    loop {
        let h = alpha * 2f64.powi(ell);
        let set: Vec<bool> = s.iter().map(|&v| v > h).collect();
        let ind = ProductSignal::from_row_major(
            n1,
            n2,
            &set.iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )?;
        let m = strong_maximal(frame, &ind)?.to_row_major();
        omega_tilde.push(m.iter().map(|&v| v > threshold).collect());
        let empty = !set.iter().any(|&b| b);
        omega.push(set);
        if empty {
            break;
        }
        ell += 1;
    }
    let max_ell = omega.len() - 1;
    Ok(LevelSets {
        alpha,
        omega,
        omega_tilde,
        max_ell,
    })
}

/// Rectangle classes: `classes[ℓ]` lists `(i1, i2)` wavelet index pairs.
pub type RectClasses = Vec<Vec<(usize, usize)>>;

/// Puts every rectangle with a nonzero coefficient into the first class `ℓ`
/// with `μ(R ∩ Ω_ℓ) < μ(R) / (2A₀)`.
pub fn classify_rectangles(
    frame: &ProductFrame,
    coeffs: &RectSequence,
    omega: &[Vec<bool>],
) -> Result<RectClasses> {
    frame.check_sequence(coeffs)?;
    let threshold = 1.0 / (2.0 * frame.a0());
    let overlaps: Vec<DMatrix<f64>> = omega.iter().map(|o| frame.rect_overlap(o)).collect();
    let mut classes: RectClasses = vec![Vec::new(); omega.len().max(1)];
    let (w1, w2) = frame.rect_shape();
    for i1 in 0..w1 {
        for i2 in 0..w2 {
            if coeffs.0[(i1, i2)] == 0.0 {
                continue;
            }
            let bound = threshold * frame.rect_measure(i1, i2);
            let ell = overlaps
                .iter()
                .position(|o| o[(i1, i2)] < bound)
                .unwrap_or(omega.len().saturating_sub(1));
            classes[ell].push((i1, i2));
        }
    }
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzdResult {
    pub alpha: f64,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    pub g: ProductSignal,
    pub b: ProductSignal,
    /// Part of `f` carried by scaling functions in at least one factor.
    pub remainder: ProductSignal,
    pub level_sets: LevelSets,
    pub rect_classes: RectClasses,
    /// `||g||^{p1}_{H^{p1}} / (α^{p1-p} ||f||^p_{H^p})`; `None` when `||f||_{H^p}` is negligible.
    pub c_g: Option<f64>,
    /// `||b||^{p2}_{H^{p2}} / (α^{p2-p} ||f||^p_{H^p})`.
    pub c_b: Option<f64>,
    /// `max |g + b - T_P T_L f|`.
    pub reconstruction_error: f64,
}

/// Serializable digest of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzdSummary {
    pub alpha: f64,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    /// `ℓ → [(k1, alpha1, k2, alpha2)]`.
    pub classes: BTreeMap<usize, Vec<(i32, usize, i32, usize)>>,
    pub c_g: Option<f64>,
    pub c_b: Option<f64>,
    pub reconstruction_error: f64,
    pub max_ell: usize,
}

impl CzdResult {
    pub fn summary(&self, frame: &ProductFrame) -> CzdSummary {
        let classes = self
            .rect_classes
            .iter()
            .enumerate()
            .map(|(l, c)| {
                (
                    l,
                    c.iter().map(|&(i1, i2)| frame.rect_label(i1, i2)).collect(),
                )
            })
            .collect();
        CzdSummary {
            alpha: self.alpha,
            p: self.p,
            p1: self.p1,
            p2: self.p2,
            classes,
            c_g: self.c_g,
            c_b: self.c_b,
            reconstruction_error: self.reconstruction_error,
            max_ell: self.level_sets.max_ell,
        }
    }
}

fn check_exponents(p: f64, p1: f64, p2: f64) -> Result<()> {
    if p2 > 0.0 && p2 < p && p < p1 && p1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponents { p, p1, p2 })
    }
}

pub fn cz_decompose(
    frame: &ProductFrame,
    f: &ProductSignal,
    alpha: f64,
    p: f64,
    p1: f64,
    p2: f64,
) -> Result<CzdResult> {
    check_alpha(alpha)?;
    check_exponents(p, p1, p2)?;
    let coeffs = product_analyze(frame, f)?;
    let pure = coeffs.wavelet_block();
    let pure_signal = project(frame, &pure)?;
    let remainder = ProductSignal(&f.0 - &pure_signal.0);
    let s = product_square_function(frame, f)?.to_row_major();
    let level_sets = level_sets_of(frame, &s, alpha)?;
    let rect_classes = classify_rectangles(frame, &pure, &level_sets.omega)?;

    let (w1, w2) = frame.rect_shape();
    let mut good = DMatrix::zeros(w1, w2);
    let mut bad = DMatrix::zeros(w1, w2);
    for (ell, class) in rect_classes.iter().enumerate() {
        let target = if ell == 0 { &mut good } else { &mut bad };
        for &(i1, i2) in class {
            target[(i1, i2)] = pure.0[(i1, i2)];
        }
    }
    let g = project(frame, &RectSequence(good))?;
    let b = project(frame, &RectSequence(bad))?;
    let reconstruction_error = (&g.0 + &b.0 - &pure_signal.0).amax();

    let norm_f = hp_norm(frame, f, p)?;
    let denom = |q: f64| alpha.powf(q - p) * norm_f.powf(p);
    let (c_g, c_b) = if norm_f > ZERO_NORM_TOL * frame.lp_norm(f, 2.0)? {
        (
            Some(hp_norm(frame, &g, p1)?.powf(p1) / denom(p1)),
            Some(hp_norm(frame, &b, p2)?.powf(p2) / denom(p2)),
        )
    } else {
        (None, None)
    };
    Ok(CzdResult {
        alpha,
        p,
        p1,
        p2,
        g,
        b,
        remainder,
        level_sets,
        rect_classes,
        c_g,
        c_b,
        reconstruction_error,
    })
}

/// Relative size below which a Hardy norm counts as zero.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// Operator norms measured on a batch; an illustration, not a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    /// `max ||Tf||_p / ||f||_{H^p}`.
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    /// Signals with vanishing Hardy norm, left out of the ratios.
    pub skipped: usize,
    pub note: String,
}

/// Applies `t` (acting on row-major product vectors) to every signal of the
/// batch and records the largest `L^q / H^q` ratios for `q ∈ {p, p1, p2}`.
pub fn interpolation_harness(
    frame: &ProductFrame,
    t: &DMatrix<f64>,
    p1: f64,
    p2: f64,
    p: f64,
    batch: &[ProductSignal],
) -> Result<InterpolationReport> {
    check_exponents(p, p1, p2)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (n1, n2) = frame.shape();
    if t.shape() != (n1 * n2, n1 * n2) {
        return Err(Error::ShapeMismatch {
            expected: n1 * n2 * n1 * n2,
            found: t.len(),
        });
    }
    let mut ks = [0.0f64; 3];
    let mut skipped = 0;
    for f in batch {
        let tf = t * DVector::from_vec(f.to_row_major());
        let tf = ProductSignal::from_row_major(n1, n2, tf.as_slice())?;
        let norms = [p, p1, p2]
            .iter()
            .map(|&q| Ok((frame.lp_norm(&tf, q)?, hp_norm(frame, f, q)?)))
            .collect::<Result<Vec<_>>>()?;
        let scale = frame.lp_norm(f, 2.0)?;
        if norms.iter().any(|&(_, h)| h <= ZERO_NORM_TOL * scale) {
            skipped += 1;
            continue;
        }
        for (slot, (l, h)) in ks.iter_mut().zip(norms) {
            *slot = slot.max(l / h);
        }
    }
    Ok(InterpolationReport {
        p,
        p1,
        p2,
        k: ks[0],
        k1: ks[1],
        k2: ks[2],
        skipped,
        note: "empirical ratios over the supplied batch; not a certified operator bound".into(),
    })
}

/// `D_{k1} ⊗ D_{k2}` as a matrix on row-major product vectors.
pub fn tensor_projection(frame: &ProductFrame, k1: i32, k2: i32) -> Result<DMatrix<f64>> {
    let op = |factor: &crate::product::Factor, k: i32| -> Result<DMatrix<f64>> {
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(factor.space.weights()));
        Ok(factor.basis.dk_kernel(k)? * w)
    };
    Ok(op(&frame.factor1, k1)?.kronecker(&op(&frame.factor2, k2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix_p;
    use approx::assert_abs_diff_eq;

    fn rank_one(frame: &ProductFrame) -> ProductSignal {
        let psi = &frame.factor1.basis.wavelets()[0].values;
        ProductSignal::from_fn(2, 2, |a, b| psi[a] * psi[b])
    }

    #[test]
    fn maximal_examples() {
        let p = fix_p();
        let one = ProductSignal::from_fn(2, 2, |_, _| 1.0);
        let m = strong_maximal(&p, &one).unwrap();
        assert!(m.0.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let delta_bb =
            ProductSignal::from_fn(2, 2, |a, b| if a == 1 && b == 1 { 1.0 } else { 0.0 });
        let m = strong_maximal(&p, &delta_bb).unwrap();
        assert_abs_diff_eq!(m.0[(1, 1)], 1.0);
        assert_abs_diff_eq!(m.0[(0, 1)], 0.5);
        assert_abs_diff_eq!(m.0[(1, 0)], 0.5);
        assert_abs_diff_eq!(m.0[(0, 0)], 0.25);
    }

    #[test]
    fn rank_one_levels_and_classes() {
        let p = fix_p();
        let f = rank_one(&p);
        let ls = level_sets(&p, &f, 0.5).unwrap();
        assert_eq!(ls.max_ell, 1);
        assert_eq!(ls.omega[0], vec![false, false, false, true]);
        assert!(ls.omega[1].iter().all(|&b| !b));
        let r = cz_decompose(&p, &f, 0.5, 1.0, 2.0, 2.0 / 3.0).unwrap();
        assert_eq!(r.rect_classes, vec![vec![], vec![(0, 0)]]);
        assert!(r.g.0.amax() < 1e-15);
        assert!(r.b.max_abs_diff(&f) < 1e-14);
        assert_abs_diff_eq!(r.c_g.unwrap(), 0.0);
        assert_abs_diff_eq!(r.c_b.unwrap(), 0.5f64.powf(1.0 / 3.0), epsilon = 1e-10);
    }

    #[test]
    fn large_alpha_is_all_good() {
        let p = fix_p();
        let f = ProductSignal::from_fn(2, 2, |a, b| (1 + a + 3 * b + 5 * a * b) as f64);
        let r = cz_decompose(&p, &f, 100.0, 1.0, 2.0, 0.5).unwrap();
        assert_eq!(r.level_sets.max_ell, 0);
        assert!(r.b.0.amax() == 0.0);
        assert_eq!(r.c_b, Some(0.0));
        assert!((&r.g.0 + &r.remainder.0 - &f.0).amax() < 1e-13);
    }

    #[test]
    fn bad_parameters() {
        let p = fix_p();
        let f = rank_one(&p);
        assert!(matches!(
            level_sets(&p, &f, 0.0),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            cz_decompose(&p, &f, 1.0, 1.0, 0.5, 2.0),
            Err(Error::InvalidExponents { .. })
        ));
        let t = DMatrix::identity(4, 4);
        assert!(matches!(
            interpolation_harness(&p, &t, 2.0, 0.5, 1.0, &[]),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn harness_identity_and_zero() {
        let p = fix_p();
        let f = rank_one(&p);
        let c = ProductSignal::from_fn(2, 2, |_, _| 1.0);
        let id = DMatrix::identity(4, 4);
        let r = interpolation_harness(&p, &id, 2.0, 0.5, 1.0, &[f.clone(), c.clone()]).unwrap();
        assert_eq!(r.skipped, 1);
        assert_abs_diff_eq!(r.k, 2.0, epsilon = 1e-13);
        let r = interpolation_harness(&p, &DMatrix::zeros(4, 4), 2.0, 0.5, 1.0, &[f]).unwrap();
        assert_eq!((r.k, r.k1, r.k2), (0.0, 0.0, 0.0));
        let t = tensor_projection(&p, 0, 0).unwrap();
        let tf = &t * DVector::from_vec(rank_one(&p).to_row_major());
        assert_abs_diff_eq!(
            (tf - DVector::from_vec(rank_one(&p).to_row_major())).amax(),
            0.0,
            epsilon = 1e-14
        );
    }
}
