//! Numerical laboratory for contact forms and foliated Reeb dynamics.

pub mod calculus;
pub mod contact;
pub mod expr;
pub mod flow;
pub mod geodesics;
pub mod par;
pub mod sampling;
pub mod scenarios;
