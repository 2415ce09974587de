//! Boundary charts and the reflected double of a domain.
//!
//! Charts live on the half-plane `{y >= 0}` with coordinates `(y, z)`: index
//! 0 is the normal direction, index 1 the tangential one.

pub mod chart;
pub mod reflect;

pub use chart::*;
pub use reflect::*;
