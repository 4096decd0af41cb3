//! Level-set geometry, convexity, regularity integrals and radial oracles.

pub mod convexity;
pub mod level_set;
pub mod radial;
pub mod regularity;

pub use convexity::{convex_hull, convexity_score, polygon_area};
pub use level_set::{components, level_set, sublevel_area, LevelSetGeometry, Segment};
pub use radial::{annulus_exact_gradient, radial_oracle, RadialGrid, RadialProblem, RadialSolution};
pub use regularity::{regularity_integral, RegularityIntegral};
