use crate::error::{Error, Result};

/// Mean over elements of `(a_i - b_i)^2`.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("mse over lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Shape("mse over empty vectors".into()));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.len() as f64)
}

/// Quadratic within `±delta`, linear outside.
pub fn huber(x: f64, delta: f64) -> f64 {
    let ax = x.abs();
    if ax <= delta {
        0.5 * x * x
    } else {
        delta * (ax - 0.5 * delta)
    }
}
