//! Dense matrices, reverse-mode differentiation, optimizers and a
//! finite-difference gradient oracle.

pub mod gradcheck;
pub mod matrix;
pub mod optim;
pub mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::{cross_entropy, log_sum_exp, mean_squared_error, rowwise_softmax, Matrix};
pub use optim::{adam_update, sgd_step, sgd_update, Adam, Direction};
pub use tape::{Gradients, ParamId, ParamStore, Tape, Var};
