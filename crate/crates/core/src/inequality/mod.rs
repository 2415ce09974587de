//! Observability constants, their growth in the cutoff, and the
//! time-domain arguments built on top of them.

pub mod constants;
pub mod fubini;
pub mod growth;
pub mod interpolation;
pub mod telescope;
pub mod times;

pub use constants::*;
pub use fubini::*;
pub use growth::*;
pub use interpolation::*;
pub use telescope::*;
pub use times::*;
