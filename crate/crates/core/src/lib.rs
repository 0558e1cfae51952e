//! Calculus of generalized (bracket) linear functions with exact number
//! theory underneath: symbolic expressions, torus representations,
//! Cesàro-average machinery, and ergodicity checkers for concrete
//! measure-preserving systems.

pub mod averaging;
pub mod dsl;
pub mod glf_ast;
pub mod indicator;
pub mod joint;
pub mod linalg;
pub mod spectral;
pub mod systems;
pub mod torus;
pub mod number_field;
pub mod runner;

pub use glf_ast::{GlfExpr, Interval};
pub use number_field::{NumberFieldError, Rat, Session, SymReal};
