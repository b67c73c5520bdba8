//! Finite-difference solvers for `Δu + f(u) = 0` on rectangular lattices.

pub mod banded;
pub mod bubble;
pub mod eigen;
pub mod grid;
pub mod lattice;
pub mod sliding;
pub mod solve;

pub use bubble::{bubble_energy, growth_scan, radial_bubble, BubbleEnergy, GrowthScan, RadialBubble};
pub use eigen::{dirichlet_eigenpair, Eigenpair};
pub use grid::{AxisBc, BoundarySpec, Certificate, EndBc, Field, Grid2D, MonotoneTrace};
pub use lattice::Lattice;
pub use sliding::{sliding_verify, SlideReport};
pub use solve::{monotone_iterate, newton_solve, residual_norm, solve, solve_half, solve_quarter, Method, SolverOptions};
