//! Special functions, quadrature, bisection and seeded random streams.

pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;

pub use quadrature::{integrate, Grid, Scheme};
pub use rng::RngStream;
pub use roots::find_root;
pub use special::{normal_cdf, normal_pdf, normal_quantile, normal_sf, t_cdf, t_sf};
