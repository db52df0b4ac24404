//! JSON space files and the fixture generators that produce them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::FiniteSpace;

/// How the distance matrix of a space file is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    /// Row-major lower triangle, with or without the zero diagonal.
    Matrix { lower: Vec<f64> },
    /// Euclidean distance between coordinate vectors.
    Euclidean { points: Vec<Vec<f64>> },
    /// Shortest-path distance over weighted undirected edges `(i, j, w)`.
    GraphGeodesic { edges: Vec<(usize, usize, f64)> },
    /// Leaves of a complete `branching`-ary tree of the given depth; two
    /// leaves whose deepest common ancestor sits at depth `l` are
    /// `ratio^l` apart.
    UltrametricTree {
        branching: usize,
        depth: u32,
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    /// `d' = d^theta` over a base metric. `theta <= 1` keeps a metric a
    /// metric; `theta > 1` yields a quasi-metric with `A0 <= 2^(theta-1)`.
    Snowflake { base: Box<MetricSpec>, theta: f64 },
}

fn default_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub n: usize,
    pub metric: MetricSpec,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl MetricSpec {
    /// Dense row-major distance matrix for `n` points.
    pub fn distances(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            MetricSpec::Matrix { lower } => {
                let strict = n * n.saturating_sub(1) / 2;
                let with_diag = n * (n + 1) / 2;
                let diag = if lower.len() == strict {
                    false
                } else if lower.len() == with_diag {
                    true
                } else {
                    return Err(Error::ShapeMismatch {
                        expected: strict,
                        found: lower.len(),
                    });
                };
                let mut d = vec![0.0; n * n];
                let mut it = lower.iter();
                for i in 0..n {
                    let upto = if diag { i + 1 } else { i };
                    for j in 0..upto {
                        let v = *it.next().expect("length checked");
                        if i == j {
                            if v != 0.0 {
                                return Err(Error::InvalidDistance(i, i));
                            }
                            continue;
                        }
                        d[i * n + j] = v;
                        d[j * n + i] = v;
                    }
                }
                Ok(d)
            }
            MetricSpec::Euclidean { points } => {
                if points.len() != n {
                    return Err(Error::ShapeMismatch {
                        expected: n,
                        found: points.len(),
                    });
                }
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        let v = points[i]
                            .iter()
                            .zip(&points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        d[i * n + j] = v;
                        d[j * n + i] = v;
                    }
                }
                Ok(d)
            }
            MetricSpec::GraphGeodesic { edges } => {
                let mut d = vec![f64::INFINITY; n * n];
                for i in 0..n {
                    d[i * n + i] = 0.0;
                }
                for &(i, j, w) in edges {
                    if i >= n || j >= n {
                        return Err(Error::InvalidPoint(i.max(j)));
                    }
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(Error::InvalidDistance(i, j));
                    }
                    if w < d[i * n + j] {
                        d[i * n + j] = w;
                        d[j * n + i] = w;
                    }
                }
                for k in 0..n {
                    for i in 0..n {
                        let dik = d[i * n + k];
                        if dik.is_infinite() {
                            continue;
                        }
                        for j in 0..n {
                            let cand = dik + d[k * n + j];
                            if cand < d[i * n + j] {
                                d[i * n + j] = cand;
                            }
                        }
                    }
                }
                if let Some(pos) = d.iter().position(|v| v.is_infinite()) {
                    return Err(Error::InvalidParams(format!(
                        "graph is disconnected between {} and {}",
                        pos / n,
                        pos % n
                    )));
                }
                Ok(d)
            }
            MetricSpec::UltrametricTree {
                branching,
                depth,
                ratio,
            } => {
                let leaves = branching
                    .checked_pow(*depth)
                    .ok_or_else(|| Error::InvalidParams("ultrametric tree too large".into()))?;
                if *branching < 2 || leaves != n {
                    return Err(Error::InvalidParams(format!(
                        "ultrametric tree with branching {branching} and depth {depth} has {leaves} leaves, file says {n}"
                    )));
                }
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidParams(format!("ratio {ratio} not in (0,1)")));
                }
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        // depth of the deepest common ancestor
                        let (mut a, mut b, mut level) = (i, j, *depth);
                        while a != b {
                            a /= branching;
                            b /= branching;
                            level -= 1;
                        }
                        let v = ratio.powi(level as i32);
                        d[i * n + j] = v;
                        d[j * n + i] = v;
                    }
                }
                Ok(d)
            }
            MetricSpec::Snowflake { base, theta } => {
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "theta {theta} must be positive"
                    )));
                }
                Ok(base
                    .distances(n)?
                    .into_iter()
                    .map(|v| v.powf(*theta))
                    .collect())
            }
        }
    }
}

impl SpaceFile {
    pub fn to_space(&self) -> Result<FiniteSpace> {
        if self.weights.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                found: self.weights.len(),
            });
        }
        let space = FiniteSpace::new(self.metric.distances(self.n)?, self.weights.clone())?;
        match &self.labels {
            Some(l) => space.with_labels(l.clone()),
            None => Ok(space),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space files always serialize")
    }
}

/// Weight scheme for generated fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// Every point weighs `1/n`.
    Uniform,
    /// Weights drawn from `[0.5, 1.5) / n`.
    Random,
}

fn weights(n: usize, scheme: WeightScheme, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match scheme {
        WeightScheme::Uniform => vec![1.0 / n as f64; n],
        WeightScheme::Random => (0..n)
            .map(|_| rng.random_range(0.5..1.5) / n as f64)
            .collect(),
    }
}

/// `n` uniform random points in `[0,1]^dim`.
pub fn gen_euclidean(n: usize, dim: usize, seed: u64, scheme: WeightScheme) -> SpaceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    SpaceFile {
        n,
        metric: MetricSpec::Euclidean { points },
        weights: weights(n, scheme, &mut rng),
        labels: None,
    }
}

/// Regular lattice `{0, 1/side, …}^dim`.
pub fn gen_grid(side: usize, dim: usize, seed: u64, scheme: WeightScheme) -> SpaceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = side.pow(dim as u32);
    let points = (0..n)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let c = idx % side;
                    idx /= side;
                    c as f64 / side as f64
                })
                .collect()
        })
        .collect();
    SpaceFile {
        n,
        metric: MetricSpec::Euclidean { points },
        weights: weights(n, scheme, &mut rng),
        labels: None,
    }
}

/// Unit-edge cycle graph on `n` vertices.
pub fn gen_cycle(n: usize, seed: u64, scheme: WeightScheme) -> SpaceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = if n < 2 {
        Vec::new()
    } else {
        (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect()
    };
    SpaceFile {
        n,
        metric: MetricSpec::GraphGeodesic { edges },
        weights: weights(n, scheme, &mut rng),
        labels: None,
    }
}

pub fn gen_ultrametric_tree(
    branching: usize,
    depth: u32,
    ratio: f64,
    seed: u64,
    scheme: WeightScheme,
) -> SpaceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = branching.pow(depth);
    SpaceFile {
        n,
        metric: MetricSpec::UltrametricTree {
            branching,
            depth,
            ratio,
        },
        weights: weights(n, scheme, &mut rng),
        labels: None,
    }
}

/// Wraps an existing space file's metric as `d^theta`.
pub fn gen_snowflake(base: SpaceFile, theta: f64) -> SpaceFile {
    SpaceFile {
        n: base.n,
        metric: MetricSpec::Snowflake {
            base: Box::new(base.metric),
            theta,
        },
        weights: base.weights,
        labels: base.labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_lower_triangle_with_and_without_diagonal() {
        let a = SpaceFile {
            n: 3,
            metric: MetricSpec::Matrix {
                lower: vec![1.0, 2.0, 1.5],
            },
            weights: vec![1.0; 3],
            labels: None,
        };
        let s = a.to_space().unwrap();
        assert_eq!(s.d(1, 0), 1.0);
        assert_eq!(s.d(2, 0), 2.0);
        assert_eq!(s.d(2, 1), 1.5);
        let b = SpaceFile {
            metric: MetricSpec::Matrix {
                lower: vec![0.0, 1.0, 0.0, 2.0, 1.5, 0.0],
            },
            ..a.clone()
        };
        assert_eq!(b.to_space().unwrap(), s);
    }

    #[test]
    fn json_round_trip() {
        let f = gen_snowflake(gen_euclidean(5, 2, 3, WeightScheme::Random), 0.5);
        let back = SpaceFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let text = r#"{"n":2,"metric":{"kind":"matrix","lower":[1.0]},"weights":[1,1],"labels":["a","b"]}"#;
        let s = SpaceFile::from_json(text).unwrap().to_space().unwrap();
        assert_eq!(s.labels().unwrap()[1], "b");
    }

    #[test]
    fn generated_metrics() {
        let e = gen_euclidean(8, 1, 0, WeightScheme::Uniform)
            .to_space()
            .unwrap();
        assert!((e.a0() - 1.0).abs() < 1e-12);
        let t = gen_ultrametric_tree(2, 3, 0.5, 0, WeightScheme::Uniform)
            .to_space()
            .unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.a0(), 1.0);
        assert_eq!(t.d(0, 1), 0.25);
        assert_eq!(t.d(0, 2), 0.5);
        assert_eq!(t.d(0, 7), 1.0);
        let c = gen_cycle(16, 0, WeightScheme::Uniform).to_space().unwrap();
        assert_eq!(c.d(0, 8), 8.0);
        assert_eq!(c.d(1, 15), 2.0);
        let s = gen_snowflake(gen_euclidean(8, 1, 0, WeightScheme::Uniform), 0.5)
            .to_space()
            .unwrap();
        assert!((s.a0() - 1.0).abs() < 1e-12);
        let q = gen_snowflake(gen_euclidean(8, 1, 0, WeightScheme::Uniform), 2.0)
            .to_space()
            .unwrap();
        assert!(q.a0() > 1.0 && q.a0() <= 2.0 + 1e-12);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let f = SpaceFile {
            n: 3,
            metric: MetricSpec::GraphGeodesic {
                edges: vec![(0, 1, 1.0)],
            },
            weights: vec![1.0; 3],
            labels: None,
        };
        assert!(matches!(f.to_space(), Err(Error::InvalidParams(_))));
    }
}
