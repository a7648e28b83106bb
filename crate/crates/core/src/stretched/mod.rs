//! Renewal environments, recursive scales, stretched-lattice bond
//! percolation and the site-to-bond comparison.

pub mod bond;
pub mod coupling;
pub mod renewal;
pub mod scales;

pub use bond::{
    check_fk, fk_blocks_escape, fk_rectangles, q_k_estimate, sample_bond_config, site_field_sample,
    BondConfig, BondError, Orientation, QkReport, Rect, SiteField,
};
pub use coupling::{coupling_inequality_check, site_bond_rho, CouplingError, CouplingReport};
pub use renewal::{
    sample_renewal, stationary_delay_pmf, DelayLaw, GapLaw, RenewalEnv, RenewalError, RenewalMode,
};
pub use scales::{
    build_scales, classify_intervals, density_coupling_check, p_k_estimate, IntervalClassification,
    PkEstimate, ScaleError, ScaleHierarchy, ScaleMode,
};
