pub mod bifurcation;
pub mod error;
pub mod expr;
pub mod families;
pub mod integrator;
pub mod model;
pub mod monodromy;
pub mod numeric;
pub mod spectral;
pub mod sturm;
pub mod symplectic;
pub mod theorem;
pub mod winding;

pub use error::{Error, ErrorKind, Result};
