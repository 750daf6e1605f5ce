use super::tensor::{GradientStore, ParamTensor};
use crate::error::{Error, Result};

/// Largest relative disagreement between `analytic` and central differences
/// `(f(p + h) - f(p - h)) / 2h`, taken over every entry of every parameter.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)` with `floor = 1e-7`, so
/// entries where both gradients vanish compare as zero.
pub fn finite_difference_check<F>(
    mut loss: F,
    params: &mut [ParamTensor],
    analytic: &GradientStore,
    h: f64,
) -> Result<f64>
where
    F: FnMut(&[ParamTensor]) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for pi in 0..params.len() {
        let grad = analytic
            .get(params[pi].name())
            .ok_or_else(|| Error::Shape(format!("no analytic gradient for `{}`", params[pi].name())))?
            .to_vec();
        if grad.len() != params[pi].len() {
            return Err(Error::Shape(format!("gradient length for `{}`", params[pi].name())));
        }
        for (i, &a) in grad.iter().enumerate() {
            let orig = params[pi].values()[i];
            params[pi].values_mut()[i] = orig + h;
            let up = loss(params)?;
            params[pi].values_mut()[i] = orig - h;
            let down = loss(params)?;
            params[pi].values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
