//! Numerical laboratory for the kicked quantum standard map.

pub mod classical;
pub mod quantum;
pub mod semiclassics;
