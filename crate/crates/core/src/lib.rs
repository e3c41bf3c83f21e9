//! Finite-difference laboratory for fully nonlinear dead-core systems
//!
//! ```text
//! F(D²u, x) = v₊ᵖ,   G(D²v, x) = u₊^q   in Ω,   u = φ, v = ψ on ∂Ω,
//! ```
//!
//! with `p, q ≥ 0`, `pq < 1` and uniformly elliptic `F`, `G`, together with
//! closed-form radial barriers and the measurement routines used to probe
//! growth, non-degeneracy, comparison, porosity and Liouville behaviour of
//! the computed free boundaries.

mod assembly;
pub mod free_boundary;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod ops;
pub mod radial;
pub mod scalar;
pub mod system;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
