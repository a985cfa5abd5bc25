//! Small dense-vector helpers. Dimensions here are tiny (at most a handful of
//! coordinates), so plain slices beat pulling in a linear-algebra crate.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    if a.len() == 1 {
        return a[0].abs();
    }
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance. In one dimension this is exactly `|a - b|`, and in any
/// dimension the result is never below `|a[0] - b[0]|` as computed in floating
/// point, which the pruned nearest-neighbour scan relies on.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `u - t * g`
#[inline]
pub fn step(u: &[f64], t: f64, g: &[f64]) -> Vec<f64> {
    u.iter().zip(g).map(|(ui, gi)| ui - t * gi).collect()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}
