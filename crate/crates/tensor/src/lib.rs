//! Dense `f32`/`f64` tensors with a tape-based reverse-mode autodiff engine.
//!
//! The tape records every operation of a forward pass; [`Tape::backward`]
//! replays it in reverse and returns the gradients of all leaves created with
//! [`Tape::param`]. Parameters live outside the tape, so clearing it between
//! training steps never touches parameter values.
//!
//! ```
//! use vfd_tensor::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.param(Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let loss = tape.sum(x);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
//! ```

mod error;
mod float;
pub mod kernels;
mod ops;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use float::Float;
pub use ops::{soft_threshold_value, BatchNormState};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
