//! Affine multiplexing networks: exact evaluation, encodings into SMT and
//! mixed-integer programs, verification, training and Lyapunov synthesis.

pub mod formula;
pub mod io;
pub mod library;
pub mod lp;
pub mod lyapunov;
pub mod mip;
pub mod network;
pub mod optimize;
pub mod rational;
pub mod smt;
pub mod solver;
pub mod systems;
pub mod train;

pub use network::{Network, NetworkBuilder, NetworkError, Node, NodeId};
pub use rational::{Matrix, Rational};
