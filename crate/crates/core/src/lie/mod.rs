//! Control vector fields, Lie brackets and rank certificates.

mod certificate;
mod fields;
mod jet;

pub use certificate::*;
pub use fields::{
    fd_step, fields_1on1, fields_1on2, fields_1on2_reduced, lie_bracket, BracketExpr, DiffMode, VectorFieldSet,
};
