//! Dense matrix kernels on row-major slices.

use super::Scalar;

/// `c[m,n] += a[m,k] * b[k,n]`
pub(crate) fn matmul_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = *cv + av * bv;
            }
        }
    }
}

/// `c[m,k] += g[m,n] * b[k,n]^T`
pub(crate) fn matmul_nt_acc<T: Scalar>(g: &[T], b: &[T], c: &mut [T], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            c[i * k + p] = c[i * k + p] + dot(g_row, b_row);
        }
    }
}

/// `c[k,n] += a[m,k]^T * g[m,n]`
pub(crate) fn matmul_tn_acc<T: Scalar>(a: &[T], g: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &gv) in c_row.iter_mut().zip(g_row) {
                *cv = *cv + av * gv;
            }
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // Four partial sums so the loop vectorizes.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] = acc[l] + a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

pub(crate) fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_naive_products() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.71).cos()).collect();
        let mut c = vec![0.0; m * n];
        matmul_acc(&a, &b, &mut c, m, k, n);
        for i in 0..m {
            for j in 0..n {
                let e: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((c[i * n + j] - e).abs() < 1e-12);
            }
        }
        let mut back = vec![0.0; m * k];
        matmul_nt_acc(&c, &b, &mut back, m, n, k);
        for i in 0..m {
            for p in 0..k {
                let e: f64 = (0..n).map(|j| c[i * n + j] * b[p * n + j]).sum();
                assert!((back[i * k + p] - e).abs() < 1e-12);
            }
        }
        let mut gb = vec![0.0; k * n];
        matmul_tn_acc(&a, &c, &mut gb, m, k, n);
        for p in 0..k {
            for j in 0..n {
                let e: f64 = (0..m).map(|i| a[i * k + p] * c[i * n + j]).sum();
                assert!((gb[p * n + j] - e).abs() < 1e-12);
            }
        }
    }
}
