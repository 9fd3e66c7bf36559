//! Rotating polytropic stellar equilibria and the spectral theory of their
//! linearized adiabatic oscillations: equilibrium construction (classical and
//! rotation-distorted Lane-Emden), Newtonian potential machinery, discretized
//! oscillation operators, quadratic-pencil spectra, certified time evolution,
//! and stability diagnostics.

pub mod evolution;
pub mod gravity;
pub mod interp;
pub mod io;
pub mod operators;
pub mod pencil;
pub mod polytrope;
pub mod quad;
pub mod stability;
pub mod stellar_model;
