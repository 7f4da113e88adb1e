//! Dense multidimensional arrays of `f64` in row-major order.
//!
//! [`Tensor`] is the value type every other module computes on: immutable
//! after construction, with the flat buffer laid out so the last axis
//! varies fastest. A rank-0 tensor is a scalar (empty shape, one element).

use std::fmt;

/// Largest extent accepted by [`levi_civita`]; the symbol is stored dense
/// with `n^n` entries, so 6 (46656 entries) is the practical ceiling.
pub const MAX_LEVI_CIVITA_EXTENT: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Data length does not match the product of the shape extents.
    ShapeMismatch { expected: usize, actual: usize },
    /// A shape extent was zero; every axis must have extent at least one.
    ZeroExtent,
    /// Requested Levi-Civita extent above [`MAX_LEVI_CIVITA_EXTENT`].
    ExtentTooLarge { requested: usize, max: usize },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { expected, actual } => write!(
                f,
                "data length {actual} does not match shape volume {expected}"
            ),
            TensorError::ZeroExtent => write!(f, "shape extents must all be at least 1"),
            TensorError::ExtentTooLarge { requested, max } => {
                write!(f, "extent {requested} exceeds the supported maximum {max}")
            }
        }
    }
}

impl std::error::Error for TensorError {}

/// Dense row-major array of 64-bit floats with a fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and a flat row-major buffer.
    ///
    /// ```
    /// use tensorglm::Tensor;
    /// let t = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    /// assert_eq!(t.get(&[1, 1]), 1.0);
    /// ```
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroExtent);
        }
        let volume: usize = shape.iter().product();
        if data.len() != volume {
            return Err(TensorError::ShapeMismatch {
                expected: volume,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroExtent);
        }
        let volume: usize = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![0.0; volume],
        })
    }

    /// Rank-0 scalar.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of stored elements (1 for a rank-0 scalar).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // extents are >= 1, so there is always at least one element
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    /// Flat offset of a multi-index. Panics if the index rank or any
    /// component is out of range.
    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(
            index.len(),
            self.shape.len(),
            "index rank {} does not match tensor rank {}",
            index.len(),
            self.shape.len()
        );
        let mut off = 0;
        for (axis, (&i, &extent)) in index.iter().zip(&self.shape).enumerate() {
            assert!(i < extent, "index {i} out of range for axis {axis} (extent {extent})");
            off = off * extent + i;
        }
        off
    }

    /// Element at a multi-index. Panics on out-of-range indices.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for axis in (0..shape.len()).rev() {
        strides[axis] = acc;
        acc *= shape[axis];
    }
    strides
}

/// Advances a row-major odometer over `shape`; returns false after the last
/// index wraps back to all zeros.
pub(crate) fn advance_index(index: &mut [usize], shape: &[usize]) -> bool {
    for axis in (0..shape.len()).rev() {
        index[axis] += 1;
        if index[axis] < shape[axis] {
            return true;
        }
        index[axis] = 0;
    }
    false
}

/// Sign of the permutation written in `index`: +1/-1 by inversion parity,
/// 0 if any value repeats.
fn permutation_parity(index: &[usize]) -> f64 {
    let mut inversions = 0usize;
    for i in 0..index.len() {
        for j in (i + 1)..index.len() {
            if index[i] == index[j] {
                return 0.0;
            }
            if index[i] > index[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Totally antisymmetric Levi-Civita symbol of rank `n`.
///
/// Every axis has extent `n`; the entry at a permutation of `0..n` is the
/// permutation's sign and every entry with a repeated index is zero.
pub fn levi_civita(n: usize) -> Result<Tensor, TensorError> {
    if n == 0 {
        return Err(TensorError::ZeroExtent);
    }
    if n > MAX_LEVI_CIVITA_EXTENT {
        return Err(TensorError::ExtentTooLarge {
            requested: n,
            max: MAX_LEVI_CIVITA_EXTENT,
        });
    }
    let shape = vec![n; n];
    let volume: usize = shape.iter().product();
    let mut data = Vec::with_capacity(volume);
    let mut index = vec![0usize; n];
    loop {
        data.push(permutation_parity(&index));
        if !advance_index(&mut index, &shape) {
            break;
        }
    }
    Tensor::new(shape, data)
}
