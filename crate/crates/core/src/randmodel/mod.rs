//! Signal and noise laws, synthetic data, and the quadrature engine.

pub mod data;
pub mod dist;
pub mod expect;
pub mod quadrature;

pub use data::{gen_data, Dataset};
pub use dist::{NoiseDist, SignalDist};
pub use expect::{
    expect_corr_pair, expect_theta_h, expect_theta_h_piecewise, NoiseIntegrator, NoiseQuadrature, QuadratureConfig,
    SignalIntegrator,
};
