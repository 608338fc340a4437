//! Special functions, quadrature and root finding shared by the rest of the crate.

pub mod quadrature;
pub mod roots;
pub mod special;

pub use quadrature::{integrate, integrate_with_breaks, QuadratureConfig};
pub use roots::find_root_monotone;
pub use special::{
    chi_scaled_density, chi_scaled_mean, normal_critical_value, std_normal_cdf, std_normal_pdf,
    std_normal_quantile, student_t_cdf, student_t_quantile, t_critical_value,
};
