//! Wind farm layout optimization: sectorized wind resource, Jensen wake
//! superposition, expected annual energy production and a multistart
//! constrained optimizer seeded by Delaunay-spread random layouts.

pub mod aep;
pub mod constraints;
pub mod delaunay;
pub mod driver;
pub mod error;
pub mod layout;
pub mod nlp;
pub mod replica;
pub mod report;
pub mod seeding;
pub mod turbine;
pub mod wake;
pub mod wind_resource;

pub use aep::{AepBreakdown, AepEvaluator};
pub use constraints::{FarmBoundary, FeasibleRegion};
pub use error::{Error, Result};
pub use layout::{Layout, Point};
pub use turbine::TurbineSpec;
pub use wind_resource::WindRose;
