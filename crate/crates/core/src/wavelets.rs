//! Haar-type orthonormal wavelets attached to the new points of each level.
//!
//! Inside every parent cube `Q_α^k` the child indicators are orthogonalized
//! in `L²(μ)` against the parent indicator. Each new child center
//! `y ∈ Y^k` receives one zero-mean unit vector supported in the parent, so
//! the wavelets of all levels together with the normalized indicators of the
//! coarsest cubes form an orthonormal basis of `L²(μ)`.

use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeRef, CubeSystem};
use crate::error::{Error, Result};
use crate::space::FiniteSpace;

/// A real function on the points of one space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signal(pub Vec<f64>);

impl Signal {
    pub fn zeros(n: usize) -> Self {
        Signal(vec![0.0; n])
    }

    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for Signal {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for Signal {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for Signal {
    fn from(v: Vec<f64>) -> Self {
        Signal(v)
    }
}

/// `⟨f, g⟩_μ = Σ f(x) g(x) μ(x)`.
pub fn inner(f: &[f64], g: &[f64], weights: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(weights)
        .map(|((a, b), w)| a * b * w)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    pub k: i32,
    /// The new point `y_α^k` this wavelet is attached to.
    pub alpha: usize,
    pub values: Vec<f64>,
    /// Level-`k` cube containing the support.
    pub support_cube: CubeRef,
    pub support: Vec<usize>,
    /// Level-`k+1` cube centered at `alpha`, used for the normalized
    /// indicator in square functions.
    pub coeff_cube: CubeRef,
    pub coeff_members: Vec<usize>,
    pub coeff_measure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFunction {
    pub alpha: usize,
    pub cube: CubeRef,
    pub members: Vec<usize>,
    pub values: Vec<f64>,
}

/// Orthonormal basis of `L²(μ)`: wavelets for levels `k_min..k_max` followed
/// by the coarse scaling functions.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    weights: Vec<f64>,
    k_min: i32,
    k_max: i32,
    delta: f64,
    wavelets: Vec<Wavelet>,
    scaling: Vec<ScalingFunction>,
    level_start: Vec<usize>,
}

/// Wavelet and scaling coefficients in basis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub wavelet: Vec<f64>,
    pub scaling: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(basis: &WaveletBasis) -> Self {
        Coefficients {
            wavelet: vec![0.0; basis.wavelets.len()],
            scaling: vec![0.0; basis.scaling.len()],
        }
    }
}

/// Builds the wavelet basis of a cube system.
pub fn build_basis(space: &FiniteSpace, cubes: &CubeSystem) -> Result<WaveletBasis> {
    if cubes.n_points() != space.len() {
        return Err(Error::NetMismatch);
    }
    let n = space.len();
    let weights = space.weights().to_vec();
    let nets = cubes.nets();
    let mut wavelets = Vec::with_capacity(n);
    let mut level_start = Vec::new();

    for k in cubes.k_min()..cubes.k_max() {
        level_start.push(wavelets.len());
        let parents = cubes.cubes(k);
        let per_parent: Vec<Result<Vec<Wavelet>>> = parents
            .par_iter()
            .enumerate()
            .map(|(pi, parent)| {
                let children = &cubes.cubes(k + 1);
                if parent.children.is_empty() {
                    return Err(Error::EmptyChild);
                }
                let mut orth: Vec<Vec<f64>> = Vec::with_capacity(parent.children.len());
                let mut first = vec![0.0; n];
                let norm = parent.measure.sqrt();
                for &x in &parent.members {
                    first[x] = 1.0 / norm;
                }
                orth.push(first);
                let mut out = Vec::new();
                for &ci in &parent.children {
                    let child = &children[ci];
                    if child.center == parent.center {
                        continue;
                    }
                    if child.members.is_empty() {
                        return Err(Error::EmptyChild);
                    }
                    let mut v = vec![0.0; n];
                    for &x in &child.members {
                        v[x] = 1.0;
                    }
                    for _ in 0..2 {
                        for u in &orth {
                            let c = inner_on(&v, u, &weights, &parent.members);
                            for &x in &parent.members {
                                v[x] -= c * u[x];
                            }
                        }
                    }
                    let len = inner_on(&v, &v, &weights, &parent.members).sqrt();
                    for &x in &parent.members {
                        v[x] /= len;
                    }
                    let peak = parent
                        .members
                        .iter()
                        .map(|&x| v[x].abs())
                        .fold(0.0, f64::max);
                    let lead = parent
                        .members
                        .iter()
                        .map(|&x| v[x])
                        .find(|val| val.abs() > 1e-12 * peak)
                        .unwrap_or(0.0);
                    if lead < 0.0 {
                        for &x in &parent.members {
                            v[x] = -v[x];
                        }
                    }
                    orth.push(v.clone());
                    out.push(Wavelet {
                        k,
                        alpha: child.center,
                        values: v,
                        support_cube: CubeRef { k, index: pi },
                        support: parent.members.clone(),
                        coeff_cube: CubeRef {
                            k: k + 1,
                            index: ci,
                        },
                        coeff_members: child.members.clone(),
                        coeff_measure: child.measure,
                    });
                }
                Ok(out)
            })
            .collect();
        let mut level: Vec<Wavelet> = Vec::new();
        for w in per_parent {
            level.extend(w?);
        }
        level.sort_by_key(|w| w.alpha);
        debug_assert_eq!(
            level.iter().map(|w| w.alpha).collect::<Vec<_>>(),
            nets.new_points(k)
        );
        wavelets.extend(level);
    }
    level_start.push(wavelets.len());

    let scaling = cubes
        .cubes(cubes.k_min())
        .iter()
        .enumerate()
        .map(|(index, cube)| {
            let mut values = vec![0.0; n];
            let h = 1.0 / cube.measure.sqrt();
            for &x in &cube.members {
                values[x] = h;
            }
            ScalingFunction {
                alpha: cube.center,
                cube: CubeRef {
                    k: cubes.k_min(),
                    index,
                },
                members: cube.members.clone(),
                values,
            }
        })
        .collect();

    Ok(WaveletBasis {
        weights,
        k_min: cubes.k_min(),
        k_max: cubes.k_max(),
        delta: cubes.delta(),
        wavelets,
        scaling,
        level_start,
    })
}

fn inner_on(f: &[f64], g: &[f64], w: &[f64], on: &[usize]) -> f64 {
    on.iter().map(|&x| f[x] * g[x] * w[x]).sum()
}

impl WaveletBasis {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn wavelets(&self) -> &[Wavelet] {
        &self.wavelets
    }

    pub fn scaling(&self) -> &[ScalingFunction] {
        &self.scaling
    }

    /// Wavelets of level `k`, ordered by `alpha`.
    pub fn level(&self, k: i32) -> Result<&[Wavelet]> {
        let r = self.level_range(k)?;
        Ok(&self.wavelets[r])
    }

    pub fn level_range(&self, k: i32) -> Result<std::ops::Range<usize>> {
        if k < self.k_min || k >= self.k_max {
            return Err(Error::LevelOutOfRange(k));
        }
        let i = (k - self.k_min) as usize;
        Ok(self.level_start[i]..self.level_start[i + 1])
    }

    /// Wavelet levels `k_min..k_max`.
    pub fn wavelet_levels(&self) -> std::ops::Range<i32> {
        self.k_min..self.k_max
    }

    /// Position of `ψ_α^k` in [`Self::wavelets`].
    pub fn index_of(&self, k: i32, alpha: usize) -> Option<usize> {
        let r = self.level_range(k).ok()?;
        let start = r.start;
        self.wavelets[r]
            .binary_search_by_key(&alpha, |w| w.alpha)
            .ok()
            .map(|i| start + i)
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::SpaceMismatch {
                expected: self.n(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Dense matrix whose columns are the wavelets followed by the scaling
    /// functions.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let cols = self.wavelets.len() + self.scaling.len();
        DMatrix::from_fn(n, cols, |x, j| {
            if j < self.wavelets.len() {
                self.wavelets[j].values[x]
            } else {
                self.scaling[j - self.wavelets.len()].values[x]
            }
        })
    }

    /// `⟨f, ψ⟩_μ` for every wavelet and `⟨f, φ⟩_μ` for every scaling function.
    pub fn analyze(&self, f: &[f64]) -> Result<Coefficients> {
        self.check(f)?;
        let wavelet = self
            .wavelets
            .iter()
            .map(|w| inner_on(f, &w.values, &self.weights, &w.support))
            .collect();
        let scaling = self
            .scaling
            .iter()
            .map(|s| inner_on(f, &s.values, &self.weights, &s.members))
            .collect();
        Ok(Coefficients { wavelet, scaling })
    }

    /// `Σ c_ψ ψ (+ Σ c_φ φ)`.
    pub fn synthesize(&self, coeffs: &Coefficients, include_scaling: bool) -> Result<Signal> {
        if coeffs.wavelet.len() != self.wavelets.len() {
            return Err(Error::IncompleteCoefficients {
                expected: self.wavelets.len(),
                found: coeffs.wavelet.len(),
            });
        }
        if include_scaling && coeffs.scaling.len() != self.scaling.len() {
            return Err(Error::IncompleteCoefficients {
                expected: self.scaling.len(),
                found: coeffs.scaling.len(),
            });
        }
        let mut out = Signal::zeros(self.n());
        for (w, &c) in self.wavelets.iter().zip(&coeffs.wavelet) {
            if c != 0.0 {
                for &x in &w.support {
                    out[x] += c * w.values[x];
                }
            }
        }
        if include_scaling {
            for (s, &c) in self.scaling.iter().zip(&coeffs.scaling) {
                for &x in &s.members {
                    out[x] += c * s.values[x];
                }
            }
        }
        Ok(out)
    }

    /// Projection onto the span of the scaling functions.
    pub fn coarse(&self, f: &[f64]) -> Result<Signal> {
        self.check(f)?;
        let mut out = Signal::zeros(self.n());
        for s in &self.scaling {
            let c = inner_on(f, &s.values, &self.weights, &s.members);
            for &x in &s.members {
                out[x] += c * s.values[x];
            }
        }
        Ok(out)
    }

    /// Kernel `D_k(x, y) = Σ_{α ∈ Y^k} ψ_α^k(x) ψ_α^k(y)`.
    pub fn dk_kernel(&self, k: i32) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for w in self.level(k)? {
            for &x in &w.support {
                for &y in &w.support {
                    m[(x, y)] += w.values[x] * w.values[y];
                }
            }
        }
        Ok(m)
    }

    /// `D_k f(x) = Σ_y D_k(x, y) f(y) μ(y)`.
    pub fn dk_apply(&self, k: i32, f: &[f64]) -> Result<Signal> {
        self.check(f)?;
        let mut out = Signal::zeros(self.n());
        for w in self.level(k)? {
            let c = inner_on(f, &w.values, &self.weights, &w.support);
            for &x in &w.support {
                out[x] += c * w.values[x];
            }
        }
        Ok(out)
    }
}

/// Smallest constants making the decay, smoothness and double smoothness
/// estimates of `D_k` hold on this space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimates {
    pub k: i32,
    pub gamma: f64,
    pub eta: f64,
    pub decay: f64,
    pub smoothness: f64,
    /// `None` when the quadruple enumeration was skipped (`n > 64`).
    pub double_smoothness: Option<f64>,
    pub admissible_triples: u64,
    pub admissible_quadruples: u64,
}

/// Largest space for which the quadruple enumeration runs.
pub const DOUBLE_SMOOTHNESS_LIMIT: usize = 64;

pub fn kernel_estimate_report(
    space: &FiniteSpace,
    basis: &WaveletBasis,
    k: i32,
    gamma: f64,
    eta: f64,
) -> Result<KernelEstimates> {
    let kernel = basis.dk_kernel(k)?;
    let n = space.len();
    let scale = basis.delta().powi(k);
    let a0 = space.a0();
    // bound(x, y) = 1/(V_δ^k(x) + V(x, y)) · (δ^k / (δ^k + d(x, y)))^γ
    let mut vols = vec![0.0; n * n];
    let v_scale: Vec<f64> = (0..n).map(|x| space.v_r(x, scale)).collect();
    for x in 0..n {
        for y in 0..n {
            vols[x * n + y] = v_scale[x] + space.v_between(x, y);
        }
    }
    let bound = |x: usize, y: usize| -> f64 {
        let d = space.d(x, y);
        (scale / (scale + d)).powf(gamma) / vols[x * n + y]
    };

    let mut decay = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            decay = decay.max(kernel[(x, y)].abs() / bound(x, y));
        }
    }

    let mut smoothness = 0.0f64;
    let mut triples = 0u64;
    for x in 0..n {
        for y in 0..n {
            let rxy = scale + space.d(x, y);
            for yp in 0..n {
                if yp == y {
                    continue;
                }
                let dyy = space.d(y, yp);
                if dyy > rxy.max(scale + space.d(x, yp)) / (2.0 * a0) {
                    continue;
                }
                triples += 1;
                let rhs = (dyy / rxy).powf(eta) * bound(x, y);
                let lhs = (kernel[(x, y)] - kernel[(x, yp)]).abs();
                smoothness = smoothness.max(lhs / rhs);
            }
        }
    }

    let mut quads = 0u64;
    let double_smoothness = if n <= DOUBLE_SMOOTHNESS_LIMIT {
        let mut best = 0.0f64;
        for x in 0..n {
            for xp in 0..n {
                if xp == x {
                    continue;
                }
                let dxx = space.d(x, xp);
                for y in 0..n {
                    let rxy = scale + space.d(x, y);
                    if dxx > rxy.max(scale + space.d(xp, y)) / (2.0 * a0) {
                        continue;
                    }
                    for yp in 0..n {
                        if yp == y {
                            continue;
                        }
                        let dyy = space.d(y, yp);
                        if dyy > rxy.max(scale + space.d(x, yp)) / (2.0 * a0) {
                            continue;
                        }
                        quads += 1;
                        let lhs = (kernel[(x, y)] - kernel[(xp, y)] - kernel[(x, yp)]
                            + kernel[(xp, yp)])
                            .abs();
                        let rhs = (dxx / rxy).powf(eta) * (dyy / rxy).powf(eta) * bound(x, y);
                        best = best.max(lhs / rhs);
                    }
                }
            }
        }
        Some(best)
    } else {
        None
    };

    Ok(KernelEstimates {
        k,
        gamma,
        eta,
        decay,
        smoothness,
        double_smoothness,
        admissible_triples: triples,
        admissible_quadruples: quads,
    })
}

/// Largest Hölder ratio of the `L²`-normalized wavelets rescaled by
/// `√μ(Q)`, measured at exponent `eta` over pairs inside the regularity
/// window `d(x, y) < (2A0)^{-1}(δ^k + d(x, y_α))`.
pub fn wavelet_holder_constant(space: &FiniteSpace, basis: &WaveletBasis, eta: f64) -> f64 {
    let a0 = space.a0();
    basis
        .wavelets()
        .par_iter()
        .map(|w| {
            let scale = basis.delta().powi(w.k);
            let amp = w.coeff_measure.sqrt();
            let mut best = 0.0f64;
            for x in 0..space.len() {
                let window = (scale + space.d(x, w.alpha)) / (2.0 * a0);
                for y in 0..space.len() {
                    let d = space.d(x, y);
                    if y == x || d >= window {
                        continue;
                    }
                    let diff = amp * (w.values[x] - w.values[y]).abs();
                    best = best.max(diff / (d / scale).powf(eta));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn radius_floor(space: &FiniteSpace) -> f64 {
    if space.len() == 1 {
        0.0
    } else {
        space.min_positive_distance()
    }
}

/// Cut-off `h = Σ χ_Q` over level-`k0` cubes meeting `B(x0, R0/4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub values: Signal,
    pub x0: usize,
    pub r0: f64,
    pub k0: i32,
    /// `k0` before clamping into the level range.
    pub k0_unclamped: i32,
    pub inner_radius: f64,
    /// `h` vanishes outside `B(x0, outer_radius)`.
    pub outer_radius: f64,
    /// Largest `d(x0, x)` over the support of `h`.
    pub support_radius: f64,
    pub holder_constant: f64,
}

/// Picks `k0` with `8 A0^5 δ^{k0} <= R0/4 < 8 A0^5 δ^{k0-1}`.
pub fn cutoff_level(a0: f64, delta: f64, r0: f64) -> i32 {
    let c = 8.0 * a0.powi(5);
    let target = r0 / 4.0;
    let mut k = ((target / c).ln() / delta.ln()).ceil() as i32;
    while c * delta.powi(k) > target {
        k += 1;
    }
    while c * delta.powi(k - 1) <= target {
        k -= 1;
    }
    k
}

pub fn smooth_cutoff(
    space: &FiniteSpace,
    cubes: &CubeSystem,
    x0: usize,
    r0: f64,
    eta: f64,
) -> Result<Cutoff> {
    space.check_point(x0)?;
    let floor = radius_floor(space);
    if !(r0 > 0.0) || r0 < floor {
        return Err(Error::DegenerateRadius { radius: r0, floor });
    }
    let a0 = space.a0();
    let k0_unclamped = cutoff_level(a0, cubes.delta(), r0);
    let k0 = k0_unclamped.clamp(cubes.k_min(), cubes.k_max());
    let inner_radius = r0 / 4.0;
    let n = space.len();
    let mut values = Signal::zeros(n);
    for cube in cubes.cubes(k0) {
        if cube.members.iter().any(|&x| space.d(x0, x) < inner_radius) {
            for &x in &cube.members {
                values[x] = 1.0;
            }
        }
    }
    let big_c1 = cubes.constants.big_c1.max(cubes.constants.big_c1_needed);
    let scale = cubes.delta().powi(k0);
    let outer_radius = a0 * a0 * r0 * (big_c1 * scale * 4.0 / r0).max(1.0);
    let support_radius = (0..n)
        .filter(|&x| values[x] != 0.0)
        .map(|x| space.d(x0, x))
        .fold(0.0, f64::max);
    let mut holder_constant = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let ratio = (values[x] - values[y]).abs() / (space.d(x, y) / scale).powf(eta);
                holder_constant = holder_constant.max(ratio);
            }
        }
    }
    Ok(Cutoff {
        values,
        x0,
        r0,
        k0,
        k0_unclamped,
        inner_radius,
        outer_radius,
        support_radius,
        holder_constant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionNorm {
    pub x0: usize,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub size_constant: f64,
    pub holder_constant: f64,
    pub cancellation_defect: f64,
    /// `max(size, holder)` when the cancellation defect is at most `1e-10`.
    pub norm: Option<f64>,
}

/// Cancellation tolerance for [`test_function_norm`].
pub const CANCELLATION_TOL: f64 = 1e-10;

/// Smallest size and Hölder constants for which `f` is a test function of
/// type `(x0, r, beta, gamma)`.
pub fn test_function_norm(
    space: &FiniteSpace,
    f: &[f64],
    x0: usize,
    r: f64,
    beta: f64,
    gamma: f64,
) -> Result<TestFunctionNorm> {
    space.check_point(x0)?;
    if f.len() != space.len() {
        return Err(Error::SpaceMismatch {
            expected: space.len(),
            found: f.len(),
        });
    }
    let floor = radius_floor(space);
    if !(r > 0.0) || r < floor {
        return Err(Error::DegenerateRadius { radius: r, floor });
    }
    let n = space.len();
    let a0 = space.a0();
    let v0 = space.v_r(x0, r);
    let envelope = |x: usize| -> f64 {
        let d = space.d(x, x0);
        (r / (r + d)).powf(gamma) / (v0 + space.v_between(x, x0))
    };
    let mut size_constant = 0.0f64;
    let mut holder_constant = 0.0f64;
    for x in 0..n {
        let env = envelope(x);
        size_constant = size_constant.max(f[x].abs() / env);
        let reach = r + space.d(x, x0);
        for y in 0..n {
            let dxy = space.d(x, y);
            if y == x || dxy >= reach / (2.0 * a0) {
                continue;
            }
            let rhs = (dxy / reach).powf(beta) * env;
            holder_constant = holder_constant.max((f[x] - f[y]).abs() / rhs);
        }
    }
    let cancellation_defect = inner(f, &vec![1.0; n], space.weights()).abs();
    let norm =
        (cancellation_defect <= CANCELLATION_TOL).then(|| size_constant.max(holder_constant));
    Ok(TestFunctionNorm {
        x0,
        r,
        beta,
        gamma,
        size_constant,
        holder_constant,
        cancellation_defect,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_cubes, build_nets};
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn pipeline(space: &FiniteSpace) -> (CubeSystem, WaveletBasis) {
        let nets = build_nets(space, 0.5, 0).unwrap();
        let cubes = build_cubes(space, &nets).unwrap();
        let basis = build_basis(space, &cubes).unwrap();
        (cubes, basis)
    }

    #[test]
    fn two_point_wavelet() {
        let a = fixtures::fix_a();
        let (_, b) = pipeline(&a);
        assert_eq!(b.wavelets().len(), 1);
        assert_eq!(b.scaling().len(), 1);
        let w = &b.wavelets()[0];
        assert_eq!((w.k, w.alpha), (0, 1));
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(w.values[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(w.values[1], -h, epsilon = 1e-15);
        assert_eq!(w.coeff_members, vec![1]);
    }

    #[test]
    fn one_point_space() {
        let s = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        let (_, b) = pipeline(&s);
        assert!(b.wavelets().is_empty());
        assert_eq!(b.scaling()[0].values, vec![1.0]);
    }

    #[test]
    fn analysis_examples() {
        let a = fixtures::fix_a();
        let (_, b) = pipeline(&a);
        let s2 = 2f64.sqrt();
        let c = b.analyze(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(c.wavelet[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.scaling[0], s2, epsilon = 1e-15);
        let c = b.analyze(&[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(c.wavelet[0], s2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.scaling[0], 0.0, epsilon = 1e-15);
        let back = b
            .synthesize(&b.analyze(&[3.0, -5.0]).unwrap(), true)
            .unwrap();
        assert!(back.max_abs_diff(&Signal(vec![3.0, -5.0])) < 1e-14);
        assert_eq!(
            b.synthesize(&Coefficients::zeros(&b), true).unwrap(),
            Signal::zeros(2)
        );
        assert!(matches!(
            b.analyze(&[1.0]),
            Err(Error::SpaceMismatch { .. })
        ));
        assert!(matches!(
            b.synthesize(
                &Coefficients {
                    wavelet: vec![],
                    scaling: vec![1.0]
                },
                true
            ),
            Err(Error::IncompleteCoefficients { .. })
        ));
    }

    #[test]
    fn dk_on_two_points() {
        let a = fixtures::fix_a();
        let (_, b) = pipeline(&a);
        let d = b.dk_kernel(0).unwrap();
        assert_abs_diff_eq!(d[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[(0, 1)], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[(1, 1)], 0.5, epsilon = 1e-15);
        assert_eq!(b.dk_kernel(1), Err(Error::LevelOutOfRange(1)));
        assert_eq!(b.dk_kernel(-1), Err(Error::LevelOutOfRange(-1)));
    }

    #[test]
    fn wavelet_coefficient_of_itself() {
        let c = fixtures::fix_c();
        let (_, b) = pipeline(&c);
        assert_eq!(b.wavelets().len(), 7);
        for (i, w) in b.wavelets().iter().enumerate() {
            let coeffs = b.analyze(&w.values).unwrap();
            for (j, &v) in coeffs.wavelet.iter().enumerate() {
                assert_abs_diff_eq!(v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
            assert_eq!(b.index_of(w.k, w.alpha), Some(i));
        }
    }

    #[test]
    fn kernel_estimates_two_points() {
        let a = fixtures::fix_a();
        let (_, b) = pipeline(&a);
        let rep = kernel_estimate_report(&a, &b, 0, 1.0, 1.0).unwrap();
        assert!(rep.decay.is_finite() && rep.decay <= 4.0);
        assert_abs_diff_eq!(rep.decay, 2.0, epsilon = 1e-12);
        // diagonal term alone
        assert!(rep.decay >= 0.5 * a.v_r(0, 1.0));
    }

    #[test]
    fn kernel_decay_constant_is_weight_scale_invariant() {
        let c = fixtures::fix_c();
        let scaled = FiniteSpace::new(
            c.distances().to_vec(),
            c.weights().iter().map(|w| w * 7.5).collect(),
        )
        .unwrap();
        let (_, b1) = pipeline(&c);
        let (_, b2) = pipeline(&scaled);
        for k in b1.wavelet_levels() {
            if b1.level(k).unwrap().is_empty() {
                continue;
            }
            let r1 = kernel_estimate_report(&c, &b1, k, 1.0, 1.0).unwrap();
            let r2 = kernel_estimate_report(&scaled, &b2, k, 1.0, 1.0).unwrap();
            assert!((r1.decay - r2.decay).abs() <= 1e-10 * r1.decay.max(1.0));
        }
    }

    #[test]
    fn cutoff_examples() {
        let a = fixtures::fix_a();
        let (cubes, _) = pipeline(&a);
        let h = smooth_cutoff(&a, &cubes, 0, 1e6, 1.0).unwrap();
        assert_eq!(h.values.0, vec![1.0, 1.0]);
        assert!(matches!(
            smooth_cutoff(&a, &cubes, 0, 0.5, 1.0),
            Err(Error::DegenerateRadius { .. })
        ));

        let c = fixtures::fix_c();
        let (cubes, _) = pipeline(&c);
        let h = smooth_cutoff(&c, &cubes, 0, 0.6, 1.0).unwrap();
        for x in 0..8 {
            let v = h.values[x];
            assert!(v == 0.0 || v == 1.0);
            if c.d(0, x) < 0.15 {
                assert_eq!(v, 1.0);
            }
            if c.d(0, x) >= h.outer_radius {
                assert_eq!(v, 0.0);
            }
        }
        assert!(h.support_radius < h.outer_radius);
    }

    #[test]
    fn cutoff_level_brackets() {
        for &(a0, delta, r0) in &[(1.0, 0.5, 0.6), (1.3, 0.3, 10.0), (2.0, 0.5, 1e-3)] {
            let k = cutoff_level(a0, delta, r0);
            let c = 8.0 * f64::powi(a0, 5);
            assert!(c * delta.powi(k) <= r0 / 4.0);
            assert!(c * delta.powi(k - 1) > r0 / 4.0);
        }
    }

    #[test]
    fn test_function_examples() {
        let a = fixtures::fix_a();
        let (_, b) = pipeline(&a);
        let w = &b.wavelets()[0];
        let f: Vec<f64> = w
            .values
            .iter()
            .map(|v| v / w.coeff_measure.sqrt())
            .collect();
        let t = test_function_norm(&a, &f, 1, 1.0, 1.0, 1.0).unwrap();
        assert!(t.size_constant.is_finite() && t.holder_constant.is_finite());
        assert!(t.cancellation_defect < 1e-15);
        assert!(t.norm.is_some());

        let t = test_function_norm(&a, &[0.0, 0.0], 0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            (t.size_constant, t.holder_constant, t.cancellation_defect),
            (0.0, 0.0, 0.0)
        );

        let t = test_function_norm(&a, &[1.0, 1.0], 0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(t.cancellation_defect, 2.0);
        assert!(t.norm.is_none());

        assert!(matches!(
            test_function_norm(&a, &[1.0, 1.0], 0, 0.5, 1.0, 1.0),
            Err(Error::DegenerateRadius { .. })
        ));
    }
}
