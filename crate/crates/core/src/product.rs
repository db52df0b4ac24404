//! Tensor products of two wavelet systems.
//!
//! Product signals are `n1 x n2` matrices `f(x1, x2)`. The dyadic rectangles
//! are the pairs of wavelet coefficient cubes `R = Q¹ × Q²`, one per pair of
//! wavelets, so rectangle sequences are `w1 x w2` matrices indexed by wavelet
//! position in each factor.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dyadic::{build_cubes, build_nets, CubeSystem};
use crate::error::{Error, Result};
use crate::space::FiniteSpace;
use crate::wavelets::{build_basis, WaveletBasis};

/// Largest product space (`n1 * n2`) for which every subset is enumerated.
pub const EXACT_LIMIT: usize = 16;

/// One factor of a product: a space with its cubes and wavelet basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub space: FiniteSpace,
    pub cubes: CubeSystem,
    pub basis: WaveletBasis,
}

impl Factor {
    pub fn build(space: FiniteSpace, delta: f64, k_min: i32) -> Result<Self> {
        let nets = build_nets(&space, delta, k_min)?;
        let cubes = build_cubes(&space, &nets)?;
        let basis = build_basis(&space, &cubes)?;
        Ok(Factor {
            space,
            cubes,
            basis,
        })
    }

    pub fn n(&self) -> usize {
        self.space.len()
    }

    pub fn n_wavelets(&self) -> usize {
        self.basis.wavelets().len()
    }
}

/// A function on `X1 x X2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSignal(pub DMatrix<f64>);

impl ProductSignal {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        ProductSignal(DMatrix::zeros(n1, n2))
    }

    pub fn from_fn(n1: usize, n2: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        ProductSignal(DMatrix::from_fn(n1, n2, f))
    }

    /// Values in the order `x1 * n2 + x2`.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (n1, n2) = self.0.shape();
        (0..n1 * n2).map(|i| self.0[(i / n2, i % n2)]).collect()
    }

    pub fn from_row_major(n1: usize, n2: usize, v: &[f64]) -> Result<Self> {
        if v.len() != n1 * n2 {
            return Err(Error::ShapeMismatch {
                expected: n1 * n2,
                found: v.len(),
            });
        }
        Ok(Self::from_fn(n1, n2, |a, b| v[a * n2 + b]))
    }

    pub fn max_abs_diff(&self, other: &ProductSignal) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

/// A sequence indexed by dyadic rectangles, stored as a `w1 x w2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSequence(pub DMatrix<f64>);

/// Coefficients of a product signal against the full tensor basis. Rows and
/// columns follow the factor basis order: wavelets first, then scaling
/// functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCoefficients {
    pub full: DMatrix<f64>,
    w1: usize,
    w2: usize,
}

impl ProductCoefficients {
    /// Wavelet × wavelet block.
    pub fn wavelet_block(&self) -> RectSequence {
        RectSequence(self.full.view((0, 0), (self.w1, self.w2)).into_owned())
    }

    /// Sum of squares outside the wavelet × wavelet block.
    pub fn non_wavelet_energy(&self) -> f64 {
        self.full.norm_squared() - self.full.view((0, 0), (self.w1, self.w2)).norm_squared()
    }
}

/// Two factors and the derived dense operators used by the product routines.
#[derive(Debug, Clone)]
pub struct ProductFrame {
    pub factor1: Factor,
    pub factor2: Factor,
    full1: DMatrix<f64>,
    full2: DMatrix<f64>,
    /// `χ_Q(x) / μ(Q)` for the coefficient cube of each wavelet.
    norm_ind1: DMatrix<f64>,
    norm_ind2: DMatrix<f64>,
    /// `χ_Q(x)` for the coefficient cube of each wavelet (`w x n`).
    ind1: DMatrix<f64>,
    ind2: DMatrix<f64>,
    weights: DMatrix<f64>,
}

fn indicator_rows(basis: &WaveletBasis, normalized: bool) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(basis.wavelets().len(), basis.n());
    for (i, w) in basis.wavelets().iter().enumerate() {
        let v = if normalized {
            1.0 / w.coeff_measure
        } else {
            1.0
        };
        for &x in &w.coeff_members {
            m[(i, x)] = v;
        }
    }
    m
}

impl ProductFrame {
    pub fn new(factor1: Factor, factor2: Factor) -> Self {
        let full1 = factor1.basis.matrix();
        let full2 = factor2.basis.matrix();
        let norm_ind1 = indicator_rows(&factor1.basis, true).transpose();
        let norm_ind2 = indicator_rows(&factor2.basis, true).transpose();
        let ind1 = indicator_rows(&factor1.basis, false);
        let ind2 = indicator_rows(&factor2.basis, false);
        let w1 = factor1.space.weights();
        let w2 = factor2.space.weights();
        let weights = DMatrix::from_fn(w1.len(), w2.len(), |a, b| w1[a] * w2[b]);
        ProductFrame {
            factor1,
            factor2,
            full1,
            full2,
            norm_ind1,
            norm_ind2,
            ind1,
            ind2,
            weights,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.factor1.n(), self.factor2.n())
    }

    pub fn rect_shape(&self) -> (usize, usize) {
        (self.factor1.n_wavelets(), self.factor2.n_wavelets())
    }

    pub fn n_rectangles(&self) -> usize {
        let (a, b) = self.rect_shape();
        a * b
    }

    /// `μ1(x1) μ2(x2)`.
    pub fn point_weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.sum()
    }

    /// Largest quasi-triangle constant of the two factors.
    pub fn a0(&self) -> f64 {
        self.factor1.space.a0().max(self.factor2.space.a0())
    }

    /// `μ(R) = μ1(Q¹) μ2(Q²)` for rectangle `(i1, i2)`.
    pub fn rect_measure(&self, i1: usize, i2: usize) -> f64 {
        self.factor1.basis.wavelets()[i1].coeff_measure
            * self.factor2.basis.wavelets()[i2].coeff_measure
    }

    /// `(k1, alpha1, k2, alpha2)` of rectangle `(i1, i2)`.
    pub fn rect_label(&self, i1: usize, i2: usize) -> (i32, usize, i32, usize) {
        let a = &self.factor1.basis.wavelets()[i1];
        let b = &self.factor2.basis.wavelets()[i2];
        (a.k, a.alpha, b.k, b.alpha)
    }

    /// Member points of rectangle `(i1, i2)` as row-major product indices.
    pub fn rect_points(&self, i1: usize, i2: usize) -> Vec<usize> {
        let n2 = self.factor2.n();
        let a = &self.factor1.basis.wavelets()[i1].coeff_members;
        let b = &self.factor2.basis.wavelets()[i2].coeff_members;
        let mut out = Vec::with_capacity(a.len() * b.len());
        for &x1 in a {
            for &x2 in b {
                out.push(x1 * n2 + x2);
            }
        }
        out
    }

    pub fn check_signal(&self, f: &ProductSignal) -> Result<()> {
        let (n1, n2) = self.shape();
        if f.0.shape() != (n1, n2) {
            return Err(Error::ShapeMismatch {
                expected: n1 * n2,
                found: f.0.len(),
            });
        }
        Ok(())
    }

    pub fn check_sequence(&self, s: &RectSequence) -> Result<()> {
        if s.0.shape() != self.rect_shape() {
            return Err(Error::UnknownRectangle {
                expected: self.rect_shape(),
                found: s.0.shape(),
            });
        }
        Ok(())
    }

    /// `μ(R ∩ Ω)` for every rectangle, with `Ω` a row-major indicator.
    pub fn rect_overlap(&self, omega: &[bool]) -> DMatrix<f64> {
        let (n1, n2) = self.shape();
        let masked = DMatrix::from_fn(n1, n2, |a, b| {
            if omega[a * n2 + b] {
                self.weights[(a, b)]
            } else {
                0.0
            }
        });
        &self.ind1 * masked * self.ind2.transpose()
    }

    pub fn lp_norm(&self, g: &ProductSignal, p: f64) -> Result<f64> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidP(p));
        }
        let s: f64 =
            g.0.iter()
                .zip(self.weights.iter())
                .map(|(v, w)| v.abs().powf(p) * w)
                .sum();
        Ok(s.powf(1.0 / p))
    }
}

/// Coefficients against the full tensor basis.
pub fn product_analyze(frame: &ProductFrame, f: &ProductSignal) -> Result<ProductCoefficients> {
    frame.check_signal(f)?;
    let weighted = f.0.component_mul(&frame.weights);
    let full = frame.full1.transpose() * weighted * &frame.full2;
    let (w1, w2) = frame.rect_shape();
    Ok(ProductCoefficients { full, w1, w2 })
}

pub fn product_synthesize(frame: &ProductFrame, c: &ProductCoefficients) -> ProductSignal {
    ProductSignal(&frame.full1 * &c.full * frame.full2.transpose())
}

/// `T_L`: the wavelet × wavelet coefficients.
pub fn lift(frame: &ProductFrame, f: &ProductSignal) -> Result<RectSequence> {
    Ok(product_analyze(frame, f)?.wavelet_block())
}

/// `T_P`: `Σ_R s_R ψ¹ ⊗ ψ²`.
pub fn project(frame: &ProductFrame, s: &RectSequence) -> Result<ProductSignal> {
    frame.check_sequence(s)?;
    let (w1, w2) = frame.rect_shape();
    let b1 = frame.full1.columns(0, w1);
    let b2 = frame.full2.columns(0, w2);
    Ok(ProductSignal(b1 * &s.0 * b2.transpose()))
}

/// `{Σ_R |s_R|² χ_R / μ(R)}^{1/2}` pointwise.
pub fn sequence_square_function(frame: &ProductFrame, s: &RectSequence) -> Result<ProductSignal> {
    frame.check_sequence(s)?;
    let sq = s.0.component_mul(&s.0);
    let m = &frame.norm_ind1 * sq * frame.norm_ind2.transpose();
    Ok(ProductSignal(m.map(|v| v.max(0.0).sqrt())))
}

/// Discrete product square function `S̃(f)`.
pub fn product_square_function(frame: &ProductFrame, f: &ProductSignal) -> Result<ProductSignal> {
    sequence_square_function(frame, &lift(frame, f)?)
}

/// Continuous product square function `{Σ_{k1,k2} |D_{k1} ⊗ D_{k2} f|²}^{1/2}`.
pub fn product_continuous_square_function(
    frame: &ProductFrame,
    f: &ProductSignal,
) -> Result<ProductSignal> {
    frame.check_signal(f)?;
    let ops = |factor: &Factor| -> Result<Vec<DMatrix<f64>>> {
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            factor.space.weights(),
        ));
        factor
            .basis
            .wavelet_levels()
            .map(|k| Ok(factor.basis.dk_kernel(k)? * &w))
            .collect()
    };
    let p1 = ops(&frame.factor1)?;
    let p2 = ops(&frame.factor2)?;
    let (n1, n2) = frame.shape();
    let mut sq = DMatrix::zeros(n1, n2);
    for a in &p1 {
        let left = a * &f.0;
        for b in &p2 {
            let t = &left * b.transpose();
            sq += t.component_mul(&t);
        }
    }
    Ok(ProductSignal(sq.map(f64::sqrt)))
}

/// `||f||_{H^p} = ||S̃(f)||_{L^p}`.
pub fn hp_norm(frame: &ProductFrame, f: &ProductSignal, p: f64) -> Result<f64> {
    frame.lp_norm(&product_square_function(frame, f)?, p)
}

/// `||s||_{s^p}`.
pub fn sp_norm(frame: &ProductFrame, s: &RectSequence, p: f64) -> Result<f64> {
    frame.lp_norm(&sequence_square_function(frame, s)?, p)
}

/// Lower end of the exponent range, `max_i ω_i / (ω_i + η_i)`.
pub fn exponent_floor(omega1: f64, eta1: f64, omega2: f64, eta2: f64) -> f64 {
    (omega1 / (omega1 + eta1)).max(omega2 / (omega2 + eta2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMode {
    /// Every nonempty subset of the product space.
    Exact,
    /// Rectangles, pairwise unions and superlevel sets.
    Heuristic,
}

impl std::str::FromStr for OmegaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(OmegaMode::Exact),
            "heuristic" => Ok(OmegaMode::Heuristic),
            other => Err(Error::InvalidParams(format!("unknown mode {other}"))),
        }
    }
}

/// Result of a sup over open sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub p: f64,
    pub mode: OmegaMode,
    pub value: f64,
    /// Number of candidate sets examined.
    pub family_size: usize,
    /// Maximizing set as `(x1, x2)` pairs; empty when the sup is zero.
    pub argmax: Vec<(usize, usize)>,
    /// Heuristic values are certified lower bounds of the exact sup.
    pub lower_bound: bool,
}

/// Evaluates `μ(Ω)^{1-2/p} Σ_{R ⊆ Ω} |t_R|²` over candidate sets.
struct OmegaSearch<'a> {
    frame: &'a ProductFrame,
    /// Rectangles with nonzero entries: (point list, squared entry).
    rects: Vec<(Vec<usize>, f64)>,
    weights: Vec<f64>,
    exponent: f64,
}

impl<'a> OmegaSearch<'a> {
    fn new(frame: &'a ProductFrame, t: &RectSequence, exponent: f64) -> Result<Self> {
        frame.check_sequence(t)?;
        let (w1, w2) = frame.rect_shape();
        let mut rects = Vec::new();
        for i1 in 0..w1 {
            for i2 in 0..w2 {
                let v = t.0[(i1, i2)];
                if v != 0.0 {
                    rects.push((frame.rect_points(i1, i2), v * v));
                }
            }
        }
        let n2 = frame.factor2.n();
        let weights = (0..frame.factor1.n() * n2)
            .map(|i| frame.weights[(i / n2, i % n2)])
            .collect();
        Ok(OmegaSearch {
            frame,
            rects,
            weights,
            exponent,
        })
    }

    fn n_points(&self) -> usize {
        self.weights.len()
    }

    fn value_of_set(&self, set: &[usize]) -> f64 {
        let mut member = vec![false; self.n_points()];
        for &x in set {
            member[x] = true;
        }
        let measure: f64 = set.iter().map(|&x| self.weights[x]).sum();
        let energy: f64 = self
            .rects
            .iter()
            .filter(|(pts, _)| pts.iter().all(|&x| member[x]))
            .map(|(_, e)| e)
            .sum();
        measure.powf(self.exponent) * energy
    }

    fn to_pairs(&self, set: &[usize]) -> Vec<(usize, usize)> {
        let n2 = self.frame.factor2.n();
        set.iter().map(|&x| (x / n2, x % n2)).collect()
    }

    fn exact(&self, keep: impl Fn(u32) -> bool) -> Result<(f64, u32, usize)> {
        let n = self.n_points();
        if n > EXACT_LIMIT {
            return Err(Error::TooLargeForExact {
                limit: EXACT_LIMIT,
                found: n,
            });
        }
        let masks: Vec<(u32, f64)> = self
            .rects
            .iter()
            .map(|(pts, e)| (pts.iter().fold(0u32, |m, &x| m | (1 << x)), *e))
            .collect();
        let total = 1u32 << n;
        let mut measure = vec![0.0f64; total as usize];
        let mut best = (0.0f64, 0u32);
        let mut examined = 0usize;
        for mask in 1..total {
            let low = mask.trailing_zeros() as usize;
            measure[mask as usize] = measure[(mask & (mask - 1)) as usize] + self.weights[low];
            if !keep(mask) {
                continue;
            }
            examined += 1;
            let energy: f64 = masks
                .iter()
                .filter(|(m, _)| mask & m == *m)
                .map(|(_, e)| e)
                .sum();
            if energy == 0.0 {
                continue;
            }
            let v = measure[mask as usize].powf(self.exponent) * energy;
            if v > best.0 {
                best = (v, mask);
            }
        }
        Ok((best.0, best.1, examined))
    }

    fn heuristic_family(&self, references: &[&ProductSignal]) -> Vec<Vec<usize>> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut family = Vec::new();
        let mut add = |mut s: Vec<usize>| {
            s.sort_unstable();
            s.dedup();
            if !s.is_empty() && seen.insert(s.clone()) {
                family.push(s);
            }
        };
        add((0..self.n_points()).collect());
        for (pts, _) in &self.rects {
            add(pts.clone());
        }
        for i in 0..self.rects.len() {
            for j in i + 1..self.rects.len() {
                add(self.rects[i]
                    .0
                    .iter()
                    .chain(&self.rects[j].0)
                    .copied()
                    .collect());
            }
        }
        for r in references {
            let v = r.to_row_major();
            let mut levels = v.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            for &t in levels.iter().rev() {
                add((0..v.len()).filter(|&x| v[x] >= t).collect());
            }
        }
        family
    }

    fn heuristic(
        &self,
        references: &[&ProductSignal],
        keep: impl Fn(&[usize]) -> bool,
    ) -> (f64, Vec<usize>, usize) {
        let family = self.heuristic_family(references);
        let mut best = (0.0f64, Vec::new());
        let mut examined = 0;
        for s in family.iter().filter(|s| keep(s)) {
            examined += 1;
            let v = self.value_of_set(s);
            if v > best.0 {
                best = (v, s.clone());
            }
        }
        (best.0, best.1, examined)
    }

    fn mask_to_set(mask: u32) -> Vec<usize> {
        (0..32).filter(|&i| mask & (1 << i) != 0).collect()
    }

    fn run(
        &self,
        p: f64,
        mode: OmegaMode,
        references: &[&ProductSignal],
        keep_mask: impl Fn(u32) -> bool,
        keep_set: impl Fn(&[usize]) -> bool,
    ) -> Result<CarlesonReport> {
        let (value, set, family_size) = match mode {
            OmegaMode::Exact => {
                let (v, mask, examined) = self.exact(keep_mask)?;
                (v, Self::mask_to_set(mask), examined)
            }
            OmegaMode::Heuristic => self.heuristic(references, keep_set),
        };
        Ok(CarlesonReport {
            p,
            mode,
            value: value.sqrt(),
            family_size,
            argmax: if value > 0.0 {
                self.to_pairs(&set)
            } else {
                Vec::new()
            },
            lower_bound: mode == OmegaMode::Heuristic,
        })
    }
}

/// `||t||_{c^p} = sup_Ω (μ(Ω)^{1-2/p} Σ_{R ⊆ Ω} |t_R|²)^{1/2}`.
pub fn cp_norm(
    frame: &ProductFrame,
    t: &RectSequence,
    p: f64,
    mode: OmegaMode,
    references: &[&ProductSignal],
) -> Result<CarlesonReport> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidP(p));
    }
    let search = OmegaSearch::new(frame, t, 1.0 - 2.0 / p)?;
    let sq = sequence_square_function(frame, t)?;
    let mut refs: Vec<&ProductSignal> = vec![&sq];
    refs.extend_from_slice(references);
    search.run(p, mode, &refs, |_| true, |_| true)
}

/// `𝒞_p(f)`; the BMO norm is the case `p = 1`.
pub fn cmo_norm(
    frame: &ProductFrame,
    f: &ProductSignal,
    p: f64,
    mode: OmegaMode,
) -> Result<CarlesonReport> {
    cp_norm(frame, &lift(frame, f)?, p, mode, &[])
}

/// Sup of `μ(R)^{1-2/p} Σ_{R' ⊆ R} |t_{R'}|²` over the rectangles `R`
/// themselves, evaluated through the open-set machinery.
pub fn cp_norm_over_rectangles(frame: &ProductFrame, t: &RectSequence, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidP(p));
    }
    let search = OmegaSearch::new(frame, t, 1.0 - 2.0 / p)?;
    let (w1, w2) = frame.rect_shape();
    let mut best = 0.0f64;
    for i1 in 0..w1 {
        for i2 in 0..w2 {
            best = best.max(search.value_of_set(&frame.rect_points(i1, i2)));
        }
    }
    Ok(best.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    /// `Σ_R T_L(f)_R T_L(g)_R`.
    pub pairing: f64,
    pub hp_norm_f: f64,
    pub cmo_g: f64,
    /// `||f||_{H^p} 𝒞_p(g)`.
    pub bound: f64,
    /// `|pairing| / bound`, `None` when the bound vanishes.
    pub ratio: Option<f64>,
}

pub fn duality_pairing(
    frame: &ProductFrame,
    f: &ProductSignal,
    g: &ProductSignal,
    p: f64,
    mode: OmegaMode,
) -> Result<DualityReport> {
    let lf = lift(frame, f)?;
    let lg = lift(frame, g)?;
    let pairing = lf.0.dot(&lg.0);
    let hp_norm_f = sp_norm(frame, &lf, p)?;
    let cmo_g = cp_norm(frame, &lg, p, mode, &[])?.value;
    let bound = hp_norm_f * cmo_g;
    Ok(DualityReport {
        p,
        pairing,
        hp_norm_f,
        cmo_g,
        bound,
        ratio: (bound > 0.0).then(|| pairing.abs() / bound),
    })
}

/// Vanishing-mean-oscillation curves at `p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmoProfile {
    pub mode: OmegaMode,
    /// Center `(x1, x2)` of the balls excluded in curve (c).
    pub reference: (usize, usize),
    /// `(δ, sup over μ(Ω) < δ)`.
    pub small_sets: Vec<(f64, f64)>,
    /// `(N, sup over diam(Ω) > N)`, with `diam` the larger factor-shadow diameter.
    pub large_sets: Vec<(f64, f64)>,
    /// `(N, sup over Ω ⊂ (B(x1,N) × B(x2,N))^c)`.
    pub far_sets: Vec<(f64, f64)>,
}

fn shadow_diameters(frame: &ProductFrame, set: &[usize]) -> f64 {
    let n2 = frame.factor2.n();
    let s1: Vec<usize> = {
        let mut v: Vec<usize> = set.iter().map(|&x| x / n2).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let s2: Vec<usize> = {
        let mut v: Vec<usize> = set.iter().map(|&x| x % n2).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let diam = |space: &FiniteSpace, s: &[usize]| -> f64 {
        let mut d = 0.0f64;
        for &a in s {
            for &b in s {
                d = d.max(space.d(a, b));
            }
        }
        d
    };
    diam(&frame.factor1.space, &s1).max(diam(&frame.factor2.space, &s2))
}

pub fn vmo_profile(
    frame: &ProductFrame,
    f: &ProductSignal,
    delta_grid: &[f64],
    n_grid: &[f64],
    reference: (usize, usize),
    mode: OmegaMode,
) -> Result<VmoProfile> {
    frame.factor1.space.check_point(reference.0)?;
    frame.factor2.space.check_point(reference.1)?;
    let t = lift(frame, f)?;
    let search = OmegaSearch::new(frame, &t, -1.0)?;
    let sq = sequence_square_function(frame, &t)?;
    let refs = [&sq];
    let n2 = frame.factor2.n();
    let npts = frame.factor1.n() * n2;
    let weights = search.weights.clone();
    let measure_mask = |m: u32| -> f64 {
        (0..npts)
            .filter(|&i| m & (1 << i) != 0)
            .map(|i| weights[i])
            .sum()
    };
    let measure_set = |s: &[usize]| -> f64 { s.iter().map(|&i| weights[i]).sum() };
    let near = |x: usize, n: f64| -> bool {
        frame.factor1.space.d(reference.0, x / n2) < n
            && frame.factor2.space.d(reference.1, x % n2) < n
    };

    let mut small_sets = Vec::new();
    for &delta in delta_grid {
        let r = search.run(
            1.0,
            mode,
            &refs,
            |m| measure_mask(m) < delta,
            |s| measure_set(s) < delta,
        )?;
        small_sets.push((delta, r.value));
    }
    let mut large_sets = Vec::new();
    let mut far_sets = Vec::new();
    for &n in n_grid {
        let r = search.run(
            1.0,
            mode,
            &refs,
            |m| shadow_diameters(frame, &OmegaSearch::mask_to_set(m)) > n,
            |s| shadow_diameters(frame, s) > n,
        )?;
        large_sets.push((n, r.value));
        let r = search.run(
            1.0,
            mode,
            &refs,
            |m| (0..npts).all(|i| m & (1 << i) == 0 || !near(i, n)),
            |s| s.iter().all(|&i| !near(i, n)),
        )?;
        far_sets.push((n, r.value));
    }
    Ok(VmoProfile {
        mode,
        reference,
        small_sets,
        large_sets,
        far_sets,
    })
}
