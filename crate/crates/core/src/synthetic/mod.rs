//! Test systems: small analytic cases and the multi-area builds used for screening studies.

mod multiarea;
mod small;

pub use multiarea::{
    build_feeder_system, build_polish, build_recipe, polish_offset, Recipe, SyntheticBuild, FEEDER_LOAD_FACTOR, POLISH_TIES,
    SYN419_TIES, TIE_IMPEDANCE,
};
pub use small::{three_bus_pv_case, two_bus_case, two_bus_roots};
