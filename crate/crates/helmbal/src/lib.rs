//! Partial balayage for the Helmholtz operator on rectangular grids.
//!
//! Given a compactly supported mass distribution `mu` and a bound density
//! `rho`, the sweep redistributes `mu` into the largest-potential
//! configuration whose density stays below `rho`, where potentials are taken
//! with respect to the fundamental solution of `Delta + k^2` in dimension 2
//! or 3. The result is a measure that equals `rho` on a saturated region and
//! agrees with `mu` outside it, together with the region itself and the
//! potential gap that drives it.
//!
//! The crate is organised bottom up:
//!
//! * [`specfun`]: cylinder functions `J_nu`, `Y_nu` and their positive zeros
//!   for the handful of orders the radial theory needs.
//! * [`radial`]: closed-form potentials, structure kernels `c_k`, `d_k`, and
//!   exact sweep solutions for radially symmetric data. These are the
//!   reference answers the grid code is tested against.
//! * [`grid`]: rectangular grids, measures, rasterization, potential
//!   evaluation (direct and FFT), and file import/export.
//! * [`balayage`]: the discrete sweep itself, an obstacle-problem solver with
//!   a monotone outer iteration, plus structure checks, a smallest-eigenvalue
//!   estimator, and feasibility scans.
//! * [`dirichlet`]: Helmholtz Dirichlet solves on saturated regions and the
//!   harmonic-measure potentials used by the evolution driver.
//! * [`heleshaw`]: injection-driven domain evolution built from repeated
//!   sweeps, with law verification against the single-sweep formulation.
//! * [`quadrature`]: a posteriori verification that swept regions reproduce
//!   exterior potentials and satisfy interior mean-value inequalities.
//! * [`cli`]: scenario files, artifact export, and the command-line driver.
//!
//! Unless stated otherwise, lengths are in grid units of the ambient space,
//! masses are plain integrals (no normalisation), and every routine that
//! takes a wavenumber `k` accepts `k = 0`, in which case the classical
//! Newtonian/logarithmic forms are used.

pub mod balayage;
pub mod cli;
pub mod dirichlet;
pub mod error;
pub mod grid;
pub mod heleshaw;
pub mod quadrature;
pub mod radial;
pub mod specfun;

pub use error::{Error, Result};
