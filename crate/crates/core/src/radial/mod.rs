//! Radial mode solutions: seeds, integration, Wronskians and asymptotic fits.

pub mod fit;
pub mod mode;
pub mod seeds;

pub use mode::{
    integrate_mode, phi_seed, psi_seed, solve_pair, wronskian, Boundary, ModePair, ModeSolution, PairConfig, Seed,
    WronskianReport,
};
pub use fit::{fit_asymptotics, AsymptoticFit, Coordinate, FitWindow};
pub use seeds::{seed_phi_infinity, seed_psi_horizon};
