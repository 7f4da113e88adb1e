//! Grouped general linear model engine.
//!
//! This crate fits per-group linear regressions two ways and checks that the
//! two routes agree:
//!
//! * **Tensor backend** ([`glm`]): the design is a rank-3 array indexed by
//!   sample, parameter, and group. Normal equations are assembled with
//!   Einstein-summation contractions ([`einsum`]) and each group's Gram
//!   matrix is inverted with a Levi-Civita cofactor expansion ([`linalg`]).
//! * **Staggered backend** ([`staggered`]): the conventional flat design
//!   matrix in which every extra group pads the matrix with blocks of
//!   zeros. This is the baseline every benchmark and cross-check runs
//!   against.
//!
//! On top of the fit sit contrast-based hypothesis tests ([`hypothesis`]):
//! linear combinations of coefficients across groups, their t statistics,
//! joint F tests, and Student-t p-values.
//!
//! The [`bench`] module measures what the tensor layout buys: stored-element
//! counts, nonzero counts, and exact instrumented FLOP counts for both
//! backends across sweeps of group/regressor/sample counts.

pub mod bench;
pub mod count;
pub mod data;
pub mod einsum;
pub mod glm;
pub mod hypothesis;
pub mod linalg;
pub mod report;
pub mod staggered;
pub mod tensor;

pub use count::{FitCounts, OpCounter};
pub use einsum::{contract, EinsumSpec};
pub use glm::{BetaTensor, Dataset, DesignTensor, OutcomeTensor};
pub use tensor::{levi_civita, Tensor};
