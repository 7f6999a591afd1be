use super::Scalar;
use crate::{Error, Result};

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("tensor", &shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![value; len],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    /// `rows x cols` matrix from `f64` values.
    pub fn from_f64(shape: impl Into<Vec<usize>>, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Leading dimension of a matrix.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Trailing dimension of a matrix.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.f64()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshaped(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, &shape));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Rows reordered so that `out[i] = self[order[i]]` (first axis).
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let c = self.len() / self.rows().max(1);
        let mut data = Vec::with_capacity(self.len());
        for &i in order {
            data.extend_from_slice(&self.data[i * c..(i + 1) * c]);
        }
        let mut shape = self.shape.clone();
        shape[0] = order.len();
        Self { shape, data }
    }
}

/// `(outer, dim, inner)` sizes around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Numpy-style broadcast of two shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// How an operand maps onto a broadcast output.
#[derive(Clone, Debug)]
pub(crate) enum BroadcastMap {
    Same,
    Scalar,
    /// Operand repeats with this period along the flat output: shapes like
    /// `[d]` or `[1, d]` against `[n, d]`.
    Tiled(usize),
    Indexed(Vec<usize>),
}

impl BroadcastMap {
    pub(crate) fn new(src: &[usize], out: &[usize]) -> Self {
        let src_len: usize = src.iter().product();
        let out_len: usize = out.iter().product();
        if src_len == out_len {
            return BroadcastMap::Same;
        }
        if src_len == 1 {
            return BroadcastMap::Scalar;
        }
        // Trailing-suffix match with only leading broadcast axes.
        let pad = out.len() - src.len();
        let first_real = src.iter().position(|&d| d != 1).unwrap_or(src.len());
        if src[first_real..] == out[pad + first_real..]
            && out[..pad + first_real].iter().product::<usize>() * src_len == out_len
        {
            return BroadcastMap::Tiled(src_len);
        }
        let mut strides = vec![0; out.len()];
        let mut s = 1;
        for i in (0..src.len()).rev() {
            strides[i + pad] = if src[i] == 1 { 0 } else { s };
            s *= src[i];
        }
        let mut map = Vec::with_capacity(out_len);
        let mut idx = vec![0; out.len()];
        for _ in 0..out_len {
            map.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
            for d in (0..out.len()).rev() {
                idx[d] += 1;
                if idx[d] < out[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        BroadcastMap::Indexed(map)
    }

    #[inline]
    pub(crate) fn index(&self, i: usize) -> usize {
        match self {
            BroadcastMap::Same => i,
            BroadcastMap::Scalar => 0,
            BroadcastMap::Tiled(p) => i % p,
            BroadcastMap::Indexed(m) => m[i],
        }
    }
}
