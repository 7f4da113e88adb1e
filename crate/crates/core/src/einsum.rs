//! Einstein-summation parsing and evaluation.
//!
//! A spec like `"kal,al->kl"` names one subscript string per operand and
//! one for the output, `->` separating the two sides. Classification is by
//! presence in the output, not by repetition: a label that appears in the
//! output is a free (batch) axis even when it occurs in several operands,
//! and every label absent from the output is summed over. That lets a
//! group axis ride along on both sides of a contraction without being
//! reduced, e.g. the batched matrix-vector product
//! `out[k,l] = sum_a x[k,a,l] * b[a,l]`.
//!
//! Evaluation runs one fused loop nest: row-major over the output labels,
//! then row-major over the summation labels (ordered by first appearance
//! across the operand subscripts). The summation order is therefore fixed
//! and results are bit-reproducible.
//!
//! ```
//! use tensorglm::{contract, EinsumSpec, Tensor};
//! let spec = EinsumSpec::parse("ij,jk->ik").unwrap();
//! let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
//! let b = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
//! assert_eq!(contract(&spec, &[&a, &b]).unwrap(), a);
//! ```

use std::fmt;

use crate::count::OpCounter;
use crate::tensor::{advance_index, row_major_strides, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum EinsumError {
    /// The spec text does not match the grammar
    /// `subscripts ("," subscripts)* "->" subscripts` with letter-only
    /// subscripts.
    ParseError(String),
    /// An output label does not appear in any operand subscript.
    InvalidOutputLabel(char),
    /// A label occurs more than once in the output subscript.
    DuplicateOutputLabel(char),
    /// The number of operands does not match the spec.
    OperandCountMismatch { expected: usize, actual: usize },
    /// An operand's rank does not match its subscript length.
    RankMismatch {
        operand: usize,
        subscript_len: usize,
        rank: usize,
    },
    /// The same label is bound to two different extents.
    ExtentMismatch {
        label: char,
        first: usize,
        second: usize,
    },
}

impl fmt::Display for EinsumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EinsumError::ParseError(msg) => write!(f, "malformed einsum spec: {msg}"),
            EinsumError::InvalidOutputLabel(c) => {
                write!(f, "output label '{c}' does not appear in any operand")
            }
            EinsumError::DuplicateOutputLabel(c) => {
                write!(f, "output label '{c}' appears more than once")
            }
            EinsumError::OperandCountMismatch { expected, actual } => {
                write!(f, "spec names {expected} operands but {actual} were supplied")
            }
            EinsumError::RankMismatch {
                operand,
                subscript_len,
                rank,
            } => write!(
                f,
                "operand {operand} has rank {rank} but its subscript names {subscript_len} axes"
            ),
            EinsumError::ExtentMismatch {
                label,
                first,
                second,
            } => write!(
                f,
                "label '{label}' is bound to extent {first} and extent {second}"
            ),
        }
    }
}

impl std::error::Error for EinsumError {}

/// A parsed einsum spec: one subscript list per operand, the output
/// subscripts, and the derived summation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EinsumSpec {
    operand_subscripts: Vec<Vec<char>>,
    output_subscripts: Vec<char>,
    summation_labels: Vec<char>,
}

impl EinsumSpec {
    /// Parses spec text. Whitespace is stripped before parsing; subscripts
    /// are ASCII letters only and the `->` separator is mandatory.
    pub fn parse(text: &str) -> Result<Self, EinsumError> {
        let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut sides = stripped.split("->");
        let lhs = sides
            .next()
            .ok_or_else(|| EinsumError::ParseError("empty spec".into()))?;
        let rhs = sides
            .next()
            .ok_or_else(|| EinsumError::ParseError("missing '->'".into()))?;
        if sides.next().is_some() {
            return Err(EinsumError::ParseError("more than one '->'".into()));
        }

        let parse_subscripts = |s: &str| -> Result<Vec<char>, EinsumError> {
            s.chars()
                .map(|c| {
                    if c.is_ascii_alphabetic() {
                        Ok(c)
                    } else {
                        Err(EinsumError::ParseError(format!(
                            "subscript character '{c}' is not an ASCII letter"
                        )))
                    }
                })
                .collect()
        };

        let operand_subscripts: Vec<Vec<char>> = lhs
            .split(',')
            .map(parse_subscripts)
            .collect::<Result<_, _>>()?;
        let output_subscripts = parse_subscripts(rhs)?;

        for (i, c) in output_subscripts.iter().enumerate() {
            if output_subscripts[..i].contains(c) {
                return Err(EinsumError::DuplicateOutputLabel(*c));
            }
            if !operand_subscripts.iter().any(|sub| sub.contains(c)) {
                return Err(EinsumError::InvalidOutputLabel(*c));
            }
        }

        // Summation labels: everything not in the output, ordered by first
        // appearance scanning the operand subscripts left to right.
        let mut summation_labels = Vec::new();
        for sub in &operand_subscripts {
            for c in sub {
                if !output_subscripts.contains(c) && !summation_labels.contains(c) {
                    summation_labels.push(*c);
                }
            }
        }

        Ok(Self {
            operand_subscripts,
            output_subscripts,
            summation_labels,
        })
    }

    pub fn operand_count(&self) -> usize {
        self.operand_subscripts.len()
    }

    pub fn operand_subscripts(&self) -> &[Vec<char>] {
        &self.operand_subscripts
    }

    pub fn output_subscripts(&self) -> &[char] {
        &self.output_subscripts
    }

    /// Labels summed over, in first-appearance order.
    pub fn summation_labels(&self) -> &[char] {
        &self.summation_labels
    }
}

/// A spec bound to concrete operand shapes: every label resolved to one
/// extent and every operand axis mapped to a stride contribution.
#[derive(Debug, Clone)]
pub struct ContractionPlan {
    spec: EinsumSpec,
    output_shape: Vec<usize>,
    summation_shape: Vec<usize>,
    /// Per operand, per output label: stride into the operand (0 when the
    /// label does not occur in it; summed when it occurs on several axes).
    output_strides: Vec<Vec<usize>>,
    /// Same, for the summation labels.
    summation_strides: Vec<Vec<usize>>,
}

impl ContractionPlan {
    pub fn new(spec: &EinsumSpec, shapes: &[&[usize]]) -> Result<Self, EinsumError> {
        if shapes.len() != spec.operand_count() {
            return Err(EinsumError::OperandCountMismatch {
                expected: spec.operand_count(),
                actual: shapes.len(),
            });
        }

        let mut bound: Vec<(char, usize)> = Vec::new();
        for (op, (subscript, shape)) in spec.operand_subscripts.iter().zip(shapes).enumerate() {
            if subscript.len() != shape.len() {
                return Err(EinsumError::RankMismatch {
                    operand: op,
                    subscript_len: subscript.len(),
                    rank: shape.len(),
                });
            }
            for (&label, &extent) in subscript.iter().zip(shape.iter()) {
                match bound.iter().find(|(c, _)| *c == label) {
                    Some(&(_, first)) if first != extent => {
                        return Err(EinsumError::ExtentMismatch {
                            label,
                            first,
                            second: extent,
                        });
                    }
                    Some(_) => {}
                    None => bound.push((label, extent)),
                }
            }
        }
        let extent_of = |label: char| -> usize {
            bound
                .iter()
                .find(|(c, _)| *c == label)
                .expect("parse guarantees every label is bound")
                .1
        };

        let output_shape: Vec<usize> = spec.output_subscripts.iter().map(|&c| extent_of(c)).collect();
        let summation_shape: Vec<usize> =
            spec.summation_labels.iter().map(|&c| extent_of(c)).collect();

        let strides_for = |labels: &[char]| -> Vec<Vec<usize>> {
            spec.operand_subscripts
                .iter()
                .zip(shapes)
                .map(|(subscript, shape)| {
                    let axis_strides = row_major_strides(shape);
                    labels
                        .iter()
                        .map(|&label| {
                            subscript
                                .iter()
                                .enumerate()
                                .filter(|(_, c)| **c == label)
                                .map(|(axis, _)| axis_strides[axis])
                                .sum()
                        })
                        .collect()
                })
                .collect()
        };

        Ok(Self {
            output_shape: output_shape.clone(),
            summation_shape,
            output_strides: strides_for(&spec.output_subscripts),
            summation_strides: strides_for(&spec.summation_labels),
            spec: spec.clone(),
        })
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn spec(&self) -> &EinsumSpec {
        &self.spec
    }
}

/// Contracts `operands` per `spec`, counting every scalar multiply and add
/// into `counter`.
///
/// Each output element accumulates, over the row-major scan of the
/// summation labels, the left-to-right product of the operand elements;
/// forming that product costs `operands.len() - 1` multiplies and each
/// accumulation costs one add.
pub fn contract_counted(
    spec: &EinsumSpec,
    operands: &[&Tensor],
    counter: &mut OpCounter,
) -> Result<Tensor, EinsumError> {
    let shapes: Vec<&[usize]> = operands.iter().map(|t| t.shape()).collect();
    let plan = ContractionPlan::new(spec, &shapes)?;
    Ok(execute_plan(&plan, operands, counter))
}

/// Contracts `operands` per `spec`. See [`contract_counted`] for the
/// evaluation order contract.
pub fn contract(spec: &EinsumSpec, operands: &[&Tensor]) -> Result<Tensor, EinsumError> {
    let mut scratch = OpCounter::new();
    contract_counted(spec, operands, &mut scratch)
}

fn execute_plan(plan: &ContractionPlan, operands: &[&Tensor], counter: &mut OpCounter) -> Tensor {
    let n_ops = operands.len();
    let out_volume: usize = plan.output_shape.iter().product();
    let sum_volume: usize = plan.summation_shape.iter().product();

    let mut data = Vec::with_capacity(out_volume);
    let mut out_index = vec![0usize; plan.output_shape.len()];
    let mut sum_index = vec![0usize; plan.summation_shape.len()];
    let mut bases = vec![0usize; n_ops];

    loop {
        for (op, base) in bases.iter_mut().enumerate() {
            *base = out_index
                .iter()
                .zip(&plan.output_strides[op])
                .map(|(&i, &s)| i * s)
                .sum();
        }

        let mut acc = 0.0;
        sum_index.iter_mut().for_each(|i| *i = 0);
        loop {
            let mut product = f64::NAN;
            for (op, operand) in operands.iter().enumerate() {
                let offset: usize = bases[op]
                    + sum_index
                        .iter()
                        .zip(&plan.summation_strides[op])
                        .map(|(&i, &s)| i * s)
                        .sum::<usize>();
                let value = operand.data()[offset];
                if op == 0 {
                    product = value;
                } else {
                    product *= value;
                }
            }
            acc += product;
            if !advance_index(&mut sum_index, &plan.summation_shape) {
                break;
            }
        }
        counter.multiplies += (sum_volume as u64) * (n_ops as u64 - 1);
        counter.adds += sum_volume as u64;

        data.push(acc);
        if !advance_index(&mut out_index, &plan.output_shape) {
            break;
        }
    }

    Tensor::new(plan.output_shape.clone(), data).expect("plan shape matches generated data")
}
