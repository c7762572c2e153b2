//! Finite-dimensional laboratory for quantum many-particle kinetics with
//! initial correlations.

pub mod error;
pub mod operator;
pub mod propagators;
pub mod cluster;
pub mod random;
pub mod ode;
pub mod quadrature;
pub mod dual_hierarchy;
pub mod state_functionals;
pub mod vlasov;
pub mod scaling;

pub use error::{Error, Result};
pub use operator::{ManyBodyOperator, NormWeight, OperatorSequence};
pub use propagators::{GeneratorKind, InteractionModel, Picture, Propagators};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type C64 = nalgebra::Complex<f64>;
