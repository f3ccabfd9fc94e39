//! Exact construction and sampled verification of semi-dynamical reflection
//! equation data: structure matrices, K-matrices, twists, R- and Q-matrices.

pub mod ansatz;
pub mod check;
pub mod diffop;
pub mod error;
pub mod expr;
pub mod ksol;
pub mod limit;
pub mod linalg;
pub mod matrix;
pub mod rational;
pub mod structure;
pub mod suite;
pub mod symbols;
pub mod tensor;
pub mod twist;
pub mod verify;

pub use check::{equal_on_samples, zero_weight_check, Ctx, ResidualReport, WeightKind};
pub use error::{Error, Result};
pub use expr::{DynScalar, Substitution};
pub use matrix::RatMatrix;
pub use rational::Rational;
pub use symbols::{elementary_symmetric, EvalPoint, Sampler, Symbol, SymbolTable};
pub use tensor::{Builder, TensorOp};
pub use ksol::KTag;
pub use structure::{FamilyName, GMode, StructureFamily};
pub use verify::Identity;
pub use twist::{TwistData, TwistName};
pub use diffop::DiffOperator;
