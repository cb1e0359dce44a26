//! Learned sparsification of symmetric TSP instances.
//!
//! The pipeline reads or generates instances ([`tsplib`]), computes per-edge features from
//! weight ratios, the LP relaxation and successive spanning trees ([`features`]), labels
//! edges with every optimal tour ([`exact`]), trains a logistic-regression classifier and
//! prunes with it ([`sparsifier`]), and scores the result ([`eval`]).

pub mod error;
pub mod eval;
pub mod exact;
pub mod features;
pub mod graph;
pub mod lp;
pub mod sparsifier;
pub mod tsplib;

pub use error::{Error, Result};
pub use exact::{branch_and_cut, enumerate_optimal_tours, held_karp, BranchCutConfig, TourSet};
pub use features::{assemble_features, FeatureConfig, FeatureMatrix};
pub use graph::{double_tree_tours, Edge, Tour};
pub use sparsifier::{insert_tour_edges, mst_only_sparsify, predict_mask, prune_instance, train_model, Model, SparsifiedInstance, TrainConfig};
pub use tsplib::{generate_random_instance, parse_instance, Instance, Weight};
