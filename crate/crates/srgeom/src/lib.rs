//! Symbols, canonical gradings and connections of sub-Riemannian manifolds.

pub mod connection;
pub mod contact;
pub mod expr;
pub mod frame;
pub mod g235;
pub mod jet;
pub mod lie;
pub mod linalg;
pub mod manifold;
pub mod spencer;
