//! Robust CUR completion for cross-concentrated samples.
//!
//! A low-rank matrix corrupted by sparse outliers is observed only on a few
//! entries inside selected rows `I` and columns `J`. [`solver::solve`]
//! recovers it as CUR factors `C U^+ R` without forming the full estimate.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use rcurc::{model::SyntheticProblem, sampling::ccs_sample, solver::{solve, SolverConfig}};
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let problem = SyntheticProblem::generate(120, 100, 2, 0.05, 5.0, &mut rng).unwrap();
//! let obs = ccs_sample(&problem.y, 0.4, 0.4, 0.5, 0.5, &mut rng).unwrap();
//! let report = solve(&obs, &SolverConfig::new(2)).unwrap();
//! assert!(report.final_error() <= 1e-4);
//! ```

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod sampling;
pub mod solver;

pub use error::{RcurcError, Result};
pub use linalg::{DenseMatrix, SvdR};
pub use sampling::{CcsObservation, IndexSet, Mask};
pub use solver::{CurFactors, SolveReport, SolverConfig, SparseCross, Termination};
