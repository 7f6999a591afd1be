use super::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Gradient components smaller than this are compared absolutely: the
/// relative error denominator never drops below it.
pub const GRAD_FLOOR: f64 = 1e-4;

/// Largest relative error between the reverse-mode gradient of a scalar
/// function and central finite differences, over every input element.
///
/// The step for element `x` is `1e-6 * max(1, |x|)`; the error of one
/// component is `|analytic - numeric| / max(|analytic|, |numeric|, GRAD_FLOOR)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = values.iter().map(|v| tape.param(v.clone())).collect();
        let out = f(&tape, &vars)?;
        scalar_of(&out)
    };

    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|v| tape.param(v.clone())).collect();
    let out = f(&tape, &vars)?;
    scalar_of(&out)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (t, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let x = input.data()[i];
            let h = 1e-6 * x.abs().max(1.0);
            probe[t].data_mut()[i] = x + h;
            let up = eval(&probe)?;
            probe[t].data_mut()[i] = x - h;
            let down = eval(&probe)?;
            probe[t].data_mut()[i] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t].data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn scalar_of(v: &Var<'_, f64>) -> Result<f64> {
    let shape = v.shape();
    if shape.iter().product::<usize>() != 1 {
        return Err(Error::shape("grad_check output", &shape, &[1]));
    }
    Ok(v.item())
}
