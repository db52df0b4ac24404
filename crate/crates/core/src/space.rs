//! Finite quasi-metric measure spaces.
//!
//! A [`FiniteSpace`] is a dense symmetric distance matrix together with a
//! strictly positive weight per point. The quasi-triangle constant `A0` is
//! measured on construction and stored with the space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest space for which the quasi-triangle constant is computed by full
/// triple enumeration.
pub const EXACT_A0_LIMIT: usize = 2048;
/// Number of random triples drawn above [`EXACT_A0_LIMIT`].
pub const A0_SAMPLE_SIZE: usize = 20_000_000;
/// Seed of the triple sampler.
pub const A0_SAMPLE_SEED: u64 = 0;

/// How the quasi-triangle constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiTriangle {
    pub a0: f64,
    pub exact: bool,
    /// Number of triples examined.
    pub triples: u64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    n: usize,
    dist: Vec<f64>,
    weight: Vec<f64>,
    labels: Option<Vec<String>>,
    quasi: QuasiTriangle,
}

impl FiniteSpace {
    /// Builds a space from a row-major `n x n` distance matrix and weights.
    pub fn new(dist: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let n = weight.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if dist.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                found: dist.len(),
            });
        }
        for (i, &w) in weight.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight(i));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::InvalidDistance(i, j));
                }
                if d != dist[j * n + i] {
                    return Err(Error::NonSymmetricMetric(i, j));
                }
                if i == j && d != 0.0 {
                    return Err(Error::InvalidDistance(i, j));
                }
                if i != j && d == 0.0 {
                    return Err(Error::ZeroOffDiagonal(i, j));
                }
            }
        }
        let quasi = compute_quasi_triangle(n, &dist);
        Ok(Self {
            n,
            dist,
            weight,
            labels: None,
            quasi,
        })
    }

    /// Builds a space from nested rows.
    pub fn from_rows(rows: &[Vec<f64>], weight: Vec<f64>) -> Result<Self> {
        let n = weight.len();
        if rows.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        let mut dist = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            dist.extend_from_slice(row);
        }
        Self::new(dist, weight)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    /// Row `x` of the distance matrix.
    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn weight(&self, x: usize) -> f64 {
        self.weight[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn total_measure(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// The quasi-triangle constant `A0`.
    pub fn a0(&self) -> f64 {
        self.quasi.a0
    }

    pub fn quasi_triangle(&self) -> QuasiTriangle {
        self.quasi
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between distinct points, or infinity for a single point.
    pub fn min_positive_distance(&self) -> f64 {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::InvalidPoint(x))
        }
    }

    /// Open ball `{y : d(center, y) < radius}`, ids ascending.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Vec<usize>> {
        self.check_point(center)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(self.ball_unchecked(center, radius))
    }

    pub(crate) fn ball_unchecked(&self, center: usize, radius: f64) -> Vec<usize> {
        self.row(center)
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d < radius)
            .map(|(y, _)| y)
            .collect()
    }

    /// `μ` of a point set.
    pub fn volume(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.weight[x]).sum()
    }

    /// `V_r(x) = μ(B(x, r))`; zero for non-positive radii.
    pub fn v_r(&self, x: usize, r: f64) -> f64 {
        self.row(x)
            .iter()
            .zip(&self.weight)
            .filter(|&(&d, _)| d < r)
            .map(|(_, &w)| w)
            .sum()
    }

    /// `V(x, y) = μ(B(x, d(x, y)))`, which is zero when `x == y`.
    pub fn v_between(&self, x: usize, y: usize) -> f64 {
        self.v_r(x, self.d(x, y))
    }
}

fn compute_quasi_triangle(n: usize, dist: &[f64]) -> QuasiTriangle {
    if n <= EXACT_A0_LIMIT {
        let a0 = (0..n)
            .into_par_iter()
            .map(|x| {
                let rx = &dist[x * n..(x + 1) * n];
                let mut best = 1.0f64;
                for z in 0..n {
                    let dxz = rx[z];
                    let rz = &dist[z * n..(z + 1) * n];
                    for y in 0..n {
                        if y == x {
                            continue;
                        }
                        let ratio = rx[y] / (dxz + rz[y]);
                        if ratio > best {
                            best = ratio;
                        }
                    }
                }
                best
            })
            .reduce(|| 1.0, f64::max);
        QuasiTriangle {
            a0,
            exact: true,
            triples: (n as u64).pow(3),
            seed: None,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(A0_SAMPLE_SEED);
        let mut best = 1.0f64;
        for _ in 0..A0_SAMPLE_SIZE {
            let x = rng.random_range(0..n);
            let y = rng.random_range(0..n);
            let z = rng.random_range(0..n);
            if x == y {
                continue;
            }
            let ratio = dist[x * n + y] / (dist[x * n + z] + dist[z * n + y]);
            best = best.max(ratio);
        }
        QuasiTriangle {
            a0: best,
            exact: false,
            triples: A0_SAMPLE_SIZE as u64,
            seed: Some(A0_SAMPLE_SEED),
        }
    }
}

/// Quasi-triangle constant of a space: the largest ratio
/// `d(x,y) / (d(x,z) + d(z,y))`, clamped below at one.
pub fn quasi_triangle_constant(space: &FiniteSpace) -> f64 {
    space.a0()
}

/// Ball statistics at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallProfile {
    pub radius: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Measured geometric constants of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub a0: f64,
    pub a0_exact: bool,
    pub doubling_constant: f64,
    pub upper_dimension: f64,
    /// RMS residual of the dimension fit in log-measure units.
    pub dimension_residual: f64,
    pub ball_count_profile: Vec<BallProfile>,
}

/// Measures the doubling constant and upper dimension over a radius grid.
///
/// The doubling constant is the largest `μ(B(x,2r)) / μ(B(x,r))` over all
/// centers and grid radii. The upper dimension is the pooled least-squares
/// slope of `log μ(B(x,s))` against `log s` over `s ∈ grid ∪ 2·grid`, with a
/// separate intercept per center.
pub fn geometry_report(space: &FiniteSpace, radii: &[f64]) -> Result<GeometryReport> {
    if radii.is_empty() {
        return Err(Error::DegenerateGrid);
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidRadius(r));
    }
    let n = space.len();
    let quasi = space.quasi_triangle();
    let mut grid: Vec<f64> = radii.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let profile: Vec<BallProfile> = grid
        .iter()
        .map(|&r| {
            let mut vols: Vec<f64> = (0..n).map(|x| space.v_r(x, r)).collect();
            vols.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 {
                vols[n / 2]
            } else {
                0.5 * (vols[n / 2 - 1] + vols[n / 2])
            };
            BallProfile {
                radius: r,
                min: vols[0],
                median,
                max: vols[n - 1],
            }
        })
        .collect();

    if n == 1 {
        return Ok(GeometryReport {
            a0: quasi.a0,
            a0_exact: quasi.exact,
            doubling_constant: 1.0,
            upper_dimension: 0.0,
            dimension_residual: 0.0,
            ball_count_profile: profile,
        });
    }

    let all_singletons = grid
        .iter()
        .all(|&r| (0..n).all(|x| space.row(x).iter().filter(|&&d| d < r).count() == 1));
    if all_singletons {
        return Err(Error::DegenerateGrid);
    }

    let doubling_constant = (0..n)
        .into_par_iter()
        .map(|x| {
            grid.iter()
                .map(|&r| space.v_r(x, 2.0 * r) / space.v_r(x, r))
                .fold(1.0, f64::max)
        })
        .reduce(|| 1.0, f64::max);

    let mut fit_radii: Vec<f64> = grid.iter().flat_map(|&r| [r, 2.0 * r]).collect();
    fit_radii.sort_by(f64::total_cmp);
    fit_radii.dedup();
    let logs: Vec<f64> = fit_radii.iter().map(|r| r.ln()).collect();
    let mean_log_r = logs.iter().sum::<f64>() / logs.len() as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut centered = Vec::with_capacity(n);
    for x in 0..n {
        let ys: Vec<f64> = fit_radii.iter().map(|&r| space.v_r(x, r).ln()).collect();
        let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
        for (lx, y) in logs.iter().zip(&ys) {
            let dx = lx - mean_log_r;
            sxy += dx * (y - mean_y);
            sxx += dx * dx;
        }
        centered.push((ys, mean_y));
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut sq = 0.0;
    let mut count = 0usize;
    for (ys, mean_y) in &centered {
        for (lx, y) in logs.iter().zip(ys) {
            let pred = mean_y + slope * (lx - mean_log_r);
            sq += (y - pred).powi(2);
            count += 1;
        }
    }

    Ok(GeometryReport {
        a0: quasi.a0,
        a0_exact: quasi.exact,
        doubling_constant,
        upper_dimension: slope.max(0.0),
        dimension_residual: (sq / count as f64).sqrt(),
        ball_count_profile: profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(coords: &[f64], w: f64) -> FiniteSpace {
        let n = coords.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (coords[i] - coords[j]).abs();
            }
        }
        FiniteSpace::new(d, vec![w; n]).unwrap()
    }

    #[test]
    fn collinear_points_are_metric() {
        assert_eq!(line(&[0.0, 1.0, 2.0], 1.0).a0(), 1.0);
    }

    #[test]
    fn two_points_clamp_to_one() {
        assert_eq!(line(&[0.0, 1.0], 1.0).a0(), 1.0);
    }

    #[test]
    fn short_detour_gives_a0_two() {
        let s = FiniteSpace::from_rows(
            &[
                vec![0.0, 1.0, 0.25],
                vec![1.0, 0.0, 0.25],
                vec![0.25, 0.25, 0.0],
            ],
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(s.a0(), 2.0);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert_eq!(
            FiniteSpace::new(vec![0.0, 1.0, 2.0, 0.0], vec![1.0, 1.0]),
            Err(Error::NonSymmetricMetric(0, 1))
        );
        assert_eq!(
            FiniteSpace::new(vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 1.0]),
            Err(Error::ZeroOffDiagonal(0, 1))
        );
        assert_eq!(
            FiniteSpace::new(vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0]),
            Err(Error::InvalidWeight(1))
        );
        assert_eq!(FiniteSpace::new(vec![], vec![]), Err(Error::EmptySpace));
    }

    #[test]
    fn balls_are_strict() {
        let a = line(&[0.0, 1.0], 1.0);
        assert_eq!(a.ball(0, 0.5).unwrap(), vec![0]);
        assert_eq!(a.ball(0, 1.0).unwrap(), vec![0]);
        assert_eq!(a.ball(0, 1.5).unwrap(), vec![0, 1]);
        assert_eq!(a.v_r(0, 1.5), 2.0);
        assert_eq!(a.v_between(1, 1), 0.0);
        assert!(a.ball(0, 0.0).is_err());
        assert!(a.ball(2, 1.0).is_err());

        let coords: Vec<f64> = (0..8).map(|j| j as f64 / 8.0).collect();
        let c = line(&coords, 0.125);
        assert_eq!(c.ball(0, 0.3).unwrap(), vec![0, 1, 2]);
        assert!((c.v_r(0, 0.3) - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn geometry_on_fixtures() {
        let coords: Vec<f64> = (0..8).map(|j| j as f64 / 8.0).collect();
        let c = line(&coords, 0.125);
        let rep = geometry_report(&c, &[0.2, 0.4, 0.8]).unwrap();
        assert!(rep.doubling_constant <= 3.0);
        assert!(rep.doubling_constant >= 1.0);

        let one = FiniteSpace::new(vec![0.0], vec![2.0]).unwrap();
        let rep = geometry_report(&one, &[1.0]).unwrap();
        assert_eq!(rep.doubling_constant, 1.0);

        assert_eq!(geometry_report(&c, &[0.01]), Err(Error::DegenerateGrid));
    }

    #[test]
    fn cycle_dimension_is_near_one() {
        let n = 16;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i.abs_diff(j);
                d[i * n + j] = k.min(n - k) as f64;
            }
        }
        let s = FiniteSpace::new(d, vec![1.0; n]).unwrap();
        let rep = geometry_report(&s, &[1.5, 3.0]).unwrap();
        assert!(
            (rep.upper_dimension - 1.0).abs() < 0.2,
            "{}",
            rep.upper_dimension
        );
    }
}
