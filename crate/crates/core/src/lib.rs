//! A desk-scale laboratory for finite difference fields `(GF(p^k), x ↦ x^{p^m})`.

pub mod error;
pub mod field;
pub mod formula;
pub mod count;
pub mod dimension;
pub mod coding;
pub mod diffalg;

pub use error::{ErrorKind, LabError, Result};
pub use field::{make_field, ArithOp, FieldCtx, GFElem, Operand};
