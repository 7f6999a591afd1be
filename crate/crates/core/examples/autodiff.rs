//! Reverse-mode gradients on the tape, checked against finite differences.

use deinterleave::numerics::{grad_check, Tape, Tensor};

fn main() -> deinterleave::Result<()> {
    let tape = Tape::<f64>::new();
    let x = tape.param(Tensor::new([2, 3], vec![0.5, -1.0, 2.0, 0.1, 0.3, -0.7])?);
    let w = tape.param(Tensor::new([3, 2], vec![1.0, 0.0, -1.0, 0.5, 0.2, 0.3])?);
    let y = x
        .matmul(w)?
        .tanh()
        .softmax(1)?
        .layer_norm(1, 1e-5)?
        .mul(x.matmul(w)?)?
        .sum();
    let grads = tape.backward(y)?;
    println!("f = {:.6}", y.item());
    println!("df/dw = {:?}", grads.wrt(w).data());

    let err = grad_check(
        |_, v| {
            Ok(v[0]
                .matmul(v[1])?
                .tanh()
                .softmax(1)?
                .layer_norm(1, 1e-5)?
                .mul(v[0].matmul(v[1])?)?
                .sum())
        },
        &[x.value(), w.value()],
    )?;
    println!("largest relative error against central differences: {err:.2e}");
    Ok(())
}
