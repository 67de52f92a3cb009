//! Deep surrogate docking: learn a fast graph-neural-network stand-in for a
//! docking oracle, screen a library with it, and re-dock only the top slice.
//!
//! Modules, bottom-up:
//! - [`molgraph`]: SMILES parsing/writing, ring perception, featurization,
//!   virtual nodes and random library generation.
//! - [`diffcore`]: tensors and reverse-mode differentiation.
//! - [`gnn`]: relational message-passing layers and the regression model.
//! - [`training`]: weighted loss, Adam, the training loop and checkpoints.
//! - [`metrics`]: top-fraction recall, RES surfaces, AURTC, AUROC/F1.
//! - [`screening`]: synthetic docking oracle and the end-to-end workflow.

pub mod diffcore;
pub mod gnn;
pub mod metrics;
pub mod molgraph;
pub mod screening;
pub mod training;
