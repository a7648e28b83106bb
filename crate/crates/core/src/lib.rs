//! Simulation toolkit for the contact process on the long-range percolation
//! graph over the integers, built around the machinery that yields a
//! subcritical phase for tail exponents above two: window sampling with
//! certified exterior bounds, cut-point decompositions, the graphical
//! representation, space-time renormalization with extinction certificates,
//! and crossing estimates on randomly stretched lattices.

pub mod contact;
pub mod cutpoints;
pub mod experiment;
pub mod exploration;
pub mod graph;
pub mod renorm;
pub mod rng;
pub mod series;
pub mod stretched;
pub mod suite;

pub use contact::{
    coupled_thinning, run_contact, run_contact_from, sample_rep, two_vertex_occupation,
    GraphicalRep, InfectionTrace,
};
pub use cutpoints::{
    cut_point_probability_lower_bound, decompose, edge_count_window, empirical_moment,
    find_x_plus_minus, scan_cut_points, select_strong_cut_points, strong_cut_points, CutPoints,
    Decomposition, MomentEstimate,
};
pub use exploration::{Convolution, ExplorationLaw};
pub use graph::{edge_open_probability, exterior_crossing_bound, GraphParams, GraphWindow};
pub use renorm::{
    block_length, classify_good, detect_semicircuit, good_probability_closed_form, p_of_t,
    recheck_grid, verify_confinement, ExtinctionCertificate, RenormGrid,
};
