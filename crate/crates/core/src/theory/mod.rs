//! The analytic optimal multi-task classifier: posterior estimate, boundary
//! probabilities, their inversion to distances and trilateration.

pub mod decode;
pub mod normal;
pub mod posterior;
pub mod r2;

pub use decode::{tanh_decode, trilaterate, Trilaterator};
pub use normal::{phi, phi_inv};
pub use posterior::{class_prob, prob_to_dist, running_mean, PosteriorEstimate, PROB_CLAMP};
pub use r2::{monte_carlo_optimal_r2, tanh_cdf_approx_gap, theoretical_r2};
