//! Fixtures shared by the benchmarks.

use bistable_robin::{make_wolbachia_reaction, BoundaryEnv, ReactionModel, WolbachiaParams};

pub fn mosquito_model() -> ReactionModel {
    make_wolbachia_reaction(WolbachiaParams::table1()).expect("reference parameters are bistable")
}

/// Low exterior proportion: SD and non-monotone states appear as L grows.
pub fn low_exterior(l: f64) -> BoundaryEnv {
    BoundaryEnv::new(l, 0.05, 0.1).expect("valid environment")
}

/// High exterior proportion: SI states appear past the second threshold.
pub fn high_exterior(l: f64) -> BoundaryEnv {
    BoundaryEnv::new(l, 0.05, 0.8).expect("valid environment")
}
