//! Dense `f64` tensors with a tape-based reverse mode and Adam.
//!
//! Values are at most two-dimensional. The op set is the closure needed by
//! the model: products, elementwise arithmetic, `tanh`, row and segment
//! softmax, concatenation, index gathers and scatters, and reductions.
//! Index lists passed to gathers are forward-pass constants, so sorting
//! permutations carry gradient to the gathered entries only.

mod adam;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use params::{Param, ParamId, ParamStore};
pub use tape::{concat_cols, concat_rows, Gradients, Tape, Var};
pub use tensor::Tensor;
