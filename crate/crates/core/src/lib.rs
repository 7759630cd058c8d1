//! Relegated normal forms for perturbed Hamiltonians with quantitative
//! error control.
//!
//! The library works with Hamiltonians of the shape
//! `H = omega . p + mu f0 + epsilon H1` on the product of an action-angle
//! domain and a Cartesian polydisc. A Lie-transform recursion pushes the
//! perturbation into a normal form whose remainder admits explicit bounds;
//! the same bounds yield certified stability times for the action drift.
//!
//! Module map:
//! - [`resonance`]: frequency vectors, resonance modules, small divisors
//! - [`series`]: sparse Poisson series and the bracket calculus
//! - [`textio`]: plain-text exchange format for series
//! - [`norms`]: weighted majorant norms and the Cauchy/bracket inequalities
//! - [`estimates`]: the quantitative pipeline up to stability times
//! - [`engine`]: the normal-form construction itself
//! - [`verify`]: numerical integration and a-posteriori checks

pub mod error;
pub mod resonance;
pub mod engine;
pub mod estimates;
pub mod norms;
pub mod series;
pub mod textio;
pub mod verify;

pub use error::{Error, Result};
pub use series::{Dims, PoissonSeries, RationalSeries, Series, TermKey};
