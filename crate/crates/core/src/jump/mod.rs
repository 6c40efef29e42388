//! Spectrally one-sided jump processes: Lévy exponents and the American
//! put, and the Lévy-driven Ornstein–Uhlenbeck Green kernel with its
//! threshold problem.

mod gauss;
mod levy;
mod ou;

pub use gauss::gauss_legendre;
pub use levy::{american_put, levy_exponent, put_generator_density, AmericanPut, JumpSide, Jumps, LevyTriplet};
pub use ou::{
    find_threshold_jump, green_ratio_check, invert_green_dft, ode_residual, ou_green_hat, value_function_jump,
    DftParams, GreenRow, GridGreenKernel, JumpThreshold, LevyOUSpec, OuKernel, RatioReport, ValuePoint,
};
