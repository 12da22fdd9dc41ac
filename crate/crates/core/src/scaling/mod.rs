//! Rescaled field functionals, their variances and continuum limits.

pub mod bridge;
pub mod finite;
pub mod sobolev;
pub mod test_function;
pub mod variance;

pub use bridge::{
    bridge_covariance, dense_bridge_max_mean, green_interp_sup_distance_1d, increment_constant_1d,
    interpolate_path_1d, path_max_1d, PathFunction1d,
};
pub use finite::{dirichlet_energy_fd, limit_variance_finite};
pub use sobolev::{
    gff_series_draw, gff_series_sample, series_pairing, sobolev_norm_neg, sobolev_norm_pos_squared,
    EigenData, Mode, SobolevNorm,
};
pub use test_function::{Bump, TestFunction};
pub use variance::{
    besov_scaling_statistic, discrete_variance_fourier, discrete_variance_fourier_detailed,
    field_pairing, k_squared, lattice_fourier, limit_variance_infinite, variance_pairing_exact,
    DiscreteVariance, VarianceSource,
};
