//! Exact solvers: Held-Karp, branch-and-cut, and enumeration of all optimal tours.

mod branch_cut;
mod held_karp;
mod local_search;
mod mincut;

pub use branch_cut::{
    branch_and_cut, branch_and_cut_restricted, branch_and_cut_with, seed_tours, BranchCut, BranchCutConfig,
    BranchCutOutcome, BranchNode, MINCUT_TOL,
};
pub use held_karp::{held_karp, held_karp_with_cap, DEFAULT_HELD_KARP_CAP};
pub use local_search::{improve_tour, EdgeMask};
pub use mincut::{global_min_cut, stoer_wagner_phases, PhaseCut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Tour;
use crate::tsplib::{Instance, Weight};

pub const DEFAULT_ENUMERATION_CAP: usize = 32;

/// Every optimal tour found, all sharing `optimal_length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TourSet {
    pub tours: Vec<Tour>,
    pub optimal_length: Weight,
    /// The cap was hit (or a search ran out of budget) before the set was shown complete.
    pub truncated: bool,
}

/// Solves, then repeatedly forbids the tours found so far with tour-elimination rows
/// until no other tour of the optimal length remains or `cap` tours are collected.
pub fn enumerate_optimal_tours(inst: &Instance, cap: usize) -> Result<TourSet> {
    enumerate_optimal_tours_with(inst, cap, &BranchCutConfig::default())
}

pub fn enumerate_optimal_tours_with(inst: &Instance, cap: usize, config: &BranchCutConfig) -> Result<TourSet> {
    if cap == 0 {
        return Err(Error::Domain("enumeration cap must be at least 1".into()));
    }
    if inst.n() < 4 {
        return Err(Error::Domain(format!("enumeration needs n >= 4, got {}", inst.n())));
    }
    let mut bc = BranchCut::complete(inst, config.clone());
    let seeds = if config.heuristic { seed_tours(inst, &EdgeMask::complete(inst.n())) } else { Vec::new() };
    let first = bc.search(None, &seeds)?;
    let tour = match (first.tour, first.proven) {
        (Some(t), true) => t,
        _ => return Err(Error::Solver("optimal tour not proven within budget".into())),
    };
    let optimal_length = tour.length();
    let mut tours = vec![tour.canonical()];
    let truncated;
    loop {
        // fixings were derived against the incumbent and may cut off other optimal tours
        bc.reset_fixings();
        bc.model_mut().add_tour_elimination(tours.last().unwrap())?;
        let next = bc.search(Some(optimal_length), &[])?;
        match next.tour {
            Some(t) if t.length() == optimal_length => {
                if tours.len() == cap {
                    truncated = true;
                    break;
                }
                tours.push(t.canonical());
            }
            _ => {
                truncated = !next.proven;
                break;
            }
        }
    }
    Ok(TourSet { tours, optimal_length, truncated })
}
