//! Regret-optimal causal filtering for linear state-space models.
//!
//! Given a plant `x' = F x + G w`, `y = H x + v`, `s = L x`, this crate
//! constructs the causal filter minimizing the worst-case estimation-error
//! regret against the clairvoyant (noncausal) smoother, along with the H2
//! (Kalman) and central H-infinity baselines, frequency-domain norm
//! analysis and a time-domain simulation harness.
//!
//! ```
//! use regret_filter::{model_io, synthesis};
//!
//! let model = model_io::builtin_scalar();
//! let result = synthesis::synthesize(&model, 1e-6).unwrap();
//! assert!((result.gamma_star.powi(2) - 0.38).abs() < 0.02);
//! assert_eq!(result.filter.dim(), 3);
//! ```

pub mod analysis;
pub mod baselines;
pub mod error;
pub mod linalg;
pub mod model_io;
pub mod sim;
pub mod state_space;
pub mod synthesis;

pub use error::{Error, Result};
pub use state_space::{LtiFilter, StateSpaceModel};
pub use synthesis::{synthesize, SynthesisResult};
