//! Gram tensors, determinants, and inverses built from Levi-Civita
//! contractions, with a Gauss-Jordan elimination fallback.
//!
//! The determinant of a p-by-p matrix W is the full antisymmetric
//! contraction
//!
//! ```text
//! det W = (1/p!) * eps[a1..ap] * eps[b1..bp] * W[b1,a1] * ... * W[bp,ap]
//! ```
//!
//! and the inverse is the adjugate over the determinant,
//!
//! ```text
//! inv[z,u] = (1/((p-1)! * det W)) * eps[z,a2..ap] * eps[u,b2..bp]
//!            * W[b2,a2] * ... * W[bp,ap]
//! ```
//!
//! with both epsilon symbols taken from [`levi_civita`]. The sums run over
//! the nonzero epsilon entries only, enumerated in lexicographic index
//! order, so results are bit-reproducible. Beyond extent 6 the dense
//! symbol is impractical and [`invert_gram`] falls back to elimination.

use std::fmt;

use crate::count::OpCounter;
use crate::glm::DesignTensor;
use crate::tensor::{levi_civita, Tensor, MAX_LEVI_CIVITA_EXTENT};

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Operand is not a square rank-2 tensor.
    NotSquare { shape: Vec<usize> },
    /// Requested epsilon-contraction dimension above the supported cap.
    ExtentTooLarge { requested: usize, max: usize },
    /// Determinant (or pivot) below the scale-aware singularity threshold.
    SingularMatrix,
    /// One group's Gram slice is singular.
    SingularGram { group: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare { shape } => {
                write!(f, "expected a square matrix, got shape {shape:?}")
            }
            LinalgError::ExtentTooLarge { requested, max } => {
                write!(f, "dimension {requested} exceeds the epsilon-path maximum {max}")
            }
            LinalgError::SingularMatrix => write!(f, "matrix is singular"),
            LinalgError::SingularGram { group } => {
                write!(f, "Gram matrix for group {group} is singular")
            }
        }
    }
}

impl std::error::Error for LinalgError {}

/// Stack of per-group Gram matrices, shape `(p, p, groups)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramTensor {
    values: Tensor,
}

impl GramTensor {
    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn parameters(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn groups(&self) -> usize {
        self.values.shape()[2]
    }

    /// One group's `p x p` slice as a standalone matrix.
    pub fn group_slice(&self, group: usize) -> Tensor {
        let p = self.parameters();
        let groups = self.groups();
        let mut data = Vec::with_capacity(p * p);
        for row in 0..p {
            for col in 0..p {
                data.push(self.values.data()[(row * p + col) * groups + group]);
            }
        }
        Tensor::new(vec![p, p], data).expect("slice volume matches")
    }
}

/// Which inversion path served a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMethod {
    Epsilon,
    Elimination,
}

impl fmt::Display for InverseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InverseMethod::Epsilon => write!(f, "epsilon"),
            InverseMethod::Elimination => write!(f, "elimination"),
        }
    }
}

/// Per-group inverses plus the determinant and method used for each group.
#[derive(Debug, Clone)]
pub struct InverseReport {
    pub inverse: Tensor,
    pub determinants: Vec<f64>,
    pub methods: Vec<InverseMethod>,
}

/// Per-group Gram matrices `W[a,b,l] = sum_k X[k,a,l] * X[k,b,l]`, the
/// sample sum masked to each group's valid rows.
pub fn gram(x: &DesignTensor) -> GramTensor {
    gram_counted(x, &mut OpCounter::new())
}

pub fn gram_counted(x: &DesignTensor, counter: &mut OpCounter) -> GramTensor {
    let shape = x.values().shape();
    let (k_max, p, groups) = (shape[0], shape[1], shape[2]);
    let data = x.values().data();
    let mut out = Vec::with_capacity(p * p * groups);
    for a in 0..p {
        for b in 0..p {
            for l in 0..groups {
                let n = x.valid()[l];
                let mut acc = 0.0;
                for k in 0..n {
                    acc += data[(k * p + a) * groups + l] * data[(k * p + b) * groups + l];
                }
                counter.multiplies += n as u64;
                counter.adds += n as u64;
                out.push(acc);
            }
        }
    }
    debug_assert!(k_max >= x.valid().iter().copied().max().unwrap_or(0));
    GramTensor {
        values: Tensor::new(vec![p, p, groups], out).expect("gram volume matches"),
    }
}

/// All orderings of `items` in lexicographic order. `items` must be sorted.
fn lex_arrangements(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest: Vec<usize> = items.to_vec();
        rest.remove(i);
        for mut tail in lex_arrangements(&rest) {
            let mut arrangement = Vec::with_capacity(items.len());
            arrangement.push(head);
            arrangement.append(&mut tail);
            out.push(arrangement);
        }
    }
    out
}

fn require_square(w: &Tensor) -> Result<usize, LinalgError> {
    match w.shape() {
        [rows, cols] if rows == cols => Ok(*rows),
        other => Err(LinalgError::NotSquare {
            shape: other.to_vec(),
        }),
    }
}

fn require_epsilon_extent(p: usize) -> Result<(), LinalgError> {
    if p > MAX_LEVI_CIVITA_EXTENT {
        return Err(LinalgError::ExtentTooLarge {
            requested: p,
            max: MAX_LEVI_CIVITA_EXTENT,
        });
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

/// Max absolute row sum.
fn infinity_norm(w: &Tensor, p: usize) -> f64 {
    let mut norm: f64 = 0.0;
    for row in 0..p {
        let mut sum = 0.0;
        for col in 0..p {
            sum += w.data()[row * p + col].abs();
        }
        norm = norm.max(sum);
    }
    norm
}

/// Determinant via the double epsilon contraction, `(1/p!) eps eps W..W`.
pub fn epsilon_determinant(w: &Tensor) -> Result<f64, LinalgError> {
    epsilon_determinant_counted(w, &mut OpCounter::new())
}

pub fn epsilon_determinant_counted(
    w: &Tensor,
    counter: &mut OpCounter,
) -> Result<f64, LinalgError> {
    let p = require_square(w)?;
    require_epsilon_extent(p)?;
    let eps = levi_civita(p).expect("extent checked");
    let perms = lex_arrangements(&(0..p).collect::<Vec<_>>());
    Ok(epsilon_determinant_impl(w, p, &eps, &perms, counter))
}

fn epsilon_determinant_impl(
    w: &Tensor,
    p: usize,
    eps: &Tensor,
    perms: &[Vec<usize>],
    counter: &mut OpCounter,
) -> f64 {
    let data = w.data();
    let mut acc = 0.0;
    for cols in perms {
        let sign_cols = eps.get(cols);
        for rows in perms {
            let sign_rows = eps.get(rows);
            let mut term = sign_cols * sign_rows;
            for i in 0..p {
                term *= data[rows[i] * p + cols[i]];
            }
            acc += term;
            counter.multiplies += 1 + p as u64;
            counter.adds += 1;
        }
    }
    counter.divides += 1;
    acc / factorial(p)
}

/// Adjugate-over-determinant inverse built from two Levi-Civita symbols.
pub fn epsilon_inverse(w: &Tensor) -> Result<Tensor, LinalgError> {
    epsilon_inverse_counted(w, &mut OpCounter::new())
}

pub fn epsilon_inverse_counted(w: &Tensor, counter: &mut OpCounter) -> Result<Tensor, LinalgError> {
    epsilon_inverse_with_det(w, counter).map(|(inverse, _)| inverse)
}

pub(crate) fn epsilon_inverse_with_det(
    w: &Tensor,
    counter: &mut OpCounter,
) -> Result<(Tensor, f64), LinalgError> {
    let p = require_square(w)?;
    require_epsilon_extent(p)?;
    let eps = levi_civita(p).expect("extent checked");
    let all: Vec<usize> = (0..p).collect();
    let perms = lex_arrangements(&all);

    let det = epsilon_determinant_impl(w, p, &eps, &perms, counter);
    let norm = infinity_norm(w, p);
    counter.adds += (p * p) as u64;
    let mut scale = 1.0;
    for _ in 0..p {
        scale *= norm;
        counter.multiplies += 1;
    }
    counter.multiplies += 1;
    if det.abs() <= 1e-12 * scale.max(1.0) {
        return Err(LinalgError::SingularMatrix);
    }

    let data = w.data();
    let fact_pm1 = factorial(p - 1);
    let mut inverse = Vec::with_capacity(p * p);
    for zeta in 0..p {
        let complement_z: Vec<usize> = (0..p).filter(|&i| i != zeta).collect();
        let col_arrangements = lex_arrangements(&complement_z);
        for mu in 0..p {
            let complement_m: Vec<usize> = (0..p).filter(|&i| i != mu).collect();
            let row_arrangements = lex_arrangements(&complement_m);
            let mut acc = 0.0;
            let mut index = vec![0usize; p];
            for cols in &col_arrangements {
                index[0] = zeta;
                index[1..].copy_from_slice(cols);
                let sign_cols = eps.get(&index);
                for rows in &row_arrangements {
                    index[0] = mu;
                    index[1..].copy_from_slice(rows);
                    let sign_rows = eps.get(&index);
                    let mut term = sign_cols * sign_rows;
                    for i in 0..p - 1 {
                        term *= data[rows[i] * p + cols[i]];
                    }
                    acc += term;
                    counter.multiplies += p as u64;
                    counter.adds += 1;
                }
            }
            counter.divides += 2;
            inverse.push(acc / fact_pm1 / det);
        }
    }
    Ok((
        Tensor::new(vec![p, p], inverse).expect("inverse volume matches"),
        det,
    ))
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn elimination_inverse(w: &Tensor) -> Result<Tensor, LinalgError> {
    elimination_inverse_counted(w, &mut OpCounter::new())
}

pub fn elimination_inverse_counted(
    w: &Tensor,
    counter: &mut OpCounter,
) -> Result<Tensor, LinalgError> {
    elimination_inverse_with_det(w, counter).map(|(inverse, _)| inverse)
}

pub(crate) fn elimination_inverse_with_det(
    w: &Tensor,
    counter: &mut OpCounter,
) -> Result<(Tensor, f64), LinalgError> {
    let p = require_square(w)?;
    let norm = infinity_norm(w, p);
    counter.adds += (p * p) as u64;
    let pivot_floor = 1e-12 * norm.max(1.0);
    counter.multiplies += 1;

    let width = 2 * p;
    let mut aug = vec![0.0; p * width];
    for row in 0..p {
        for col in 0..p {
            aug[row * width + col] = w.data()[row * p + col];
        }
        aug[row * width + p + row] = 1.0;
    }

    let mut det = 1.0;
    for col in 0..p {
        let mut pivot_row = col;
        for row in (col + 1)..p {
            if aug[row * width + col].abs() > aug[pivot_row * width + col].abs() {
                pivot_row = row;
            }
        }
        let pivot = aug[pivot_row * width + col];
        if pivot.abs() <= pivot_floor {
            return Err(LinalgError::SingularMatrix);
        }
        if pivot_row != col {
            for j in 0..width {
                aug.swap(pivot_row * width + j, col * width + j);
            }
            det = -det;
        }
        det *= pivot;
        counter.multiplies += 1;
        for j in 0..width {
            aug[col * width + j] /= pivot;
        }
        counter.divides += width as u64;
        for row in 0..p {
            if row == col {
                continue;
            }
            let factor = aug[row * width + col];
            for j in 0..width {
                aug[row * width + j] -= factor * aug[col * width + j];
            }
        }
        counter.multiplies += ((p - 1) * width) as u64;
        counter.adds += ((p - 1) * width) as u64;
    }

    let mut inverse = Vec::with_capacity(p * p);
    for row in 0..p {
        for col in 0..p {
            inverse.push(aug[row * width + p + col]);
        }
    }
    Ok((
        Tensor::new(vec![p, p], inverse).expect("inverse volume matches"),
        det,
    ))
}

/// Determinant as the signed product of LU pivots (partial pivoting).
pub fn elimination_determinant(w: &Tensor) -> Result<f64, LinalgError> {
    let p = require_square(w)?;
    let mut m: Vec<f64> = w.data().to_vec();
    let mut det = 1.0;
    for col in 0..p {
        let mut pivot_row = col;
        for row in (col + 1)..p {
            if m[row * p + col].abs() > m[pivot_row * p + col].abs() {
                pivot_row = row;
            }
        }
        let pivot = m[pivot_row * p + col];
        if pivot == 0.0 {
            return Ok(0.0);
        }
        if pivot_row != col {
            for j in 0..p {
                m.swap(pivot_row * p + j, col * p + j);
            }
            det = -det;
        }
        det *= pivot;
        for row in (col + 1)..p {
            let factor = m[row * p + col] / pivot;
            for j in col..p {
                m[row * p + j] -= factor * m[col * p + j];
            }
        }
    }
    Ok(det)
}

/// Inverts every group slice of a Gram stack: the epsilon path up to
/// dimension 6, elimination beyond, recording method and determinant per
/// group.
pub fn invert_gram(w: &GramTensor) -> Result<InverseReport, LinalgError> {
    invert_gram_counted(w, &mut OpCounter::new())
}

pub fn invert_gram_counted(
    w: &GramTensor,
    counter: &mut OpCounter,
) -> Result<InverseReport, LinalgError> {
    let p = w.parameters();
    let groups = w.groups();
    let mut inverse = vec![0.0; p * p * groups];
    let mut determinants = Vec::with_capacity(groups);
    let mut methods = Vec::with_capacity(groups);
    for group in 0..groups {
        let slice = w.group_slice(group);
        let (inv, det, method) = if p <= MAX_LEVI_CIVITA_EXTENT {
            let (inv, det) = epsilon_inverse_with_det(&slice, counter)
                .map_err(|_| LinalgError::SingularGram { group })?;
            (inv, det, InverseMethod::Epsilon)
        } else {
            let (inv, det) = elimination_inverse_with_det(&slice, counter)
                .map_err(|_| LinalgError::SingularGram { group })?;
            (inv, det, InverseMethod::Elimination)
        };
        for row in 0..p {
            for col in 0..p {
                inverse[(row * p + col) * groups + group] = inv.data()[row * p + col];
            }
        }
        determinants.push(det);
        methods.push(method);
    }
    Ok(InverseReport {
        inverse: Tensor::new(vec![p, p, groups], inverse).expect("stack volume matches"),
        determinants,
        methods,
    })
}
