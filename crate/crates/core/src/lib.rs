//! Sigma-Pi-Sigma neural networks with an adaptively chosen product layer.
//!
//! The network computes `y = f(Σ_q w0_q ∏_{i∈Λ_q} σ_i)` with `σ = g(W x)`.
//! Instead of fixing the product layer to the multilinear monomials, training
//! starts from the complete basis of a given order, sparsifies the output
//! weights with a smoothed L1/2 penalty, keeps as many monomials as the
//! multilinear basis would have, and retrains the survivors.
//!
//! - [`basis`]: monomial enumeration, counting, evaluation and derivatives
//! - [`network`]: parameters and forward evaluation
//! - [`regularizer`]: L1/2 penalties behind the [`regularizer::Penalty`] trait
//! - [`trainer`]: gradient descent, structural optimization, refinement
//! - [`data`]: benchmark targets, CSV loading, scaling, k-fold splits
//! - [`model`]: trained networks and the `.spsnn` file format

pub mod basis;
pub mod data;
pub mod model;
pub mod network;
pub mod regularizer;
pub mod trainer;

pub use basis::{MonomialBasis, Multiset};
pub use data::Dataset;
pub use model::Model;
pub use network::{ActivationKind, NetworkParams};
pub use regularizer::{Penalty, SmoothingSpec};
pub use trainer::{PruneResult, Task, TrainConfig, TrainLog};
