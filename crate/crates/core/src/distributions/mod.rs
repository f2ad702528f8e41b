//! Probability kernels, samplers, quadrature and seeded random streams.

mod pmf;
mod quadrature;
mod rng;
mod sampling;

pub use pmf::{ln_factorial, log_nb2_pmf, log_poisson_pmf, normal_two_sided_p, student_t_two_sided_p};
pub(crate) use pmf::{nb2_kernel, nb2_kernel_dk};
pub use quadrature::{gauss_hermite, QuadratureRule, DEFAULT_QUADRATURE_ORDER};
pub use rng::RngStream;
pub use sampling::{sample_bernoulli, sample_poisson, sample_std_normal};
