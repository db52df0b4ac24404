//! Small named spaces used throughout the tests and the verification suite.

use crate::product::{Factor, ProductFrame};
use crate::space::FiniteSpace;

/// Two points at distance one, unit weights.
pub fn fix_a() -> FiniteSpace {
    FiniteSpace::new(vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0]).expect("valid fixture")
}

/// Eight points `j/8` on the line with weights `1/8`.
pub fn fix_c() -> FiniteSpace {
    line(&(0..8).map(|j| j as f64 / 8.0).collect::<Vec<_>>(), 0.125)
}

/// Points on the real line with the absolute-value metric and equal weights.
pub fn line(coords: &[f64], weight: f64) -> FiniteSpace {
    let n = coords.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (coords[i] - coords[j]).abs();
        }
    }
    FiniteSpace::new(d, vec![weight; n]).expect("distinct coordinates")
}

/// Unit-edge cycle graph with unit weights.
pub fn cycle(n: usize) -> FiniteSpace {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            d[i * n + j] = k.min(n - k) as f64;
        }
    }
    FiniteSpace::new(d, vec![1.0; n]).expect("valid cycle")
}

/// [`fix_a`] times itself, with `δ = 1/2` and `k_min = 0` on both factors.
pub fn fix_p() -> ProductFrame {
    let a = Factor::build(fix_a(), 0.5, 0).expect("valid fixture");
    ProductFrame::new(a.clone(), a)
}
