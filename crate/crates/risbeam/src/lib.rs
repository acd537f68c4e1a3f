//! Space-frequency beampattern synthesis for a RIS-fed radar
//! transmitter.
//!
//! A small illuminator feeds a passive reconfigurable intelligent
//! surface; the surface's per-element phase shifts and the illuminator's
//! baseband samples are optimized jointly so that the radiated amplitude
//! beampattern matches a desired shape over frequency and direction in
//! the weighted least-squares sense, under a total power budget. The
//! same machinery runs a conventional MIMO array (one waveform per
//! element) as an upper-bound comparison.
//!
//! The synthesis is a block-coordinate descent with exact block
//! minimizers: per-point auxiliary phases in closed form, the source
//! samples through a ball-constrained convex quadratic, and the surface
//! phases through a unit-modulus quadratic solved by coordinate descent.
//! See the `examples/` directory for runnable entry points, smallest
//! first.
//!
//! ```
//! use risbeam::operators::{OperatorOptions, Operators};
//! use risbeam::pattern::{build_desired, PatternBox};
//! use risbeam::scene::{build_sampling_grid, FeederLayout, Geometry, SceneConfig};
//! use risbeam::solver::{run_bcd, SolverOptions};
//!
//! let cfg = SceneConfig {
//!     ris_rows: 2,
//!     ris_cols: 2,
//!     element_spacing_m: 0.05,
//!     carrier_hz: 3.0e9,
//!     bandwidth_hz: 100.0e6,
//!     duration_s: 3.0e-8, // N = ⌊WT⌋ = 3 samples per source
//!     power_w: 1.0,
//!     feeder_layout: FeederLayout::OnAxis,
//!     feeder_standoff_m: 0.5,
//!     freq_points: 4,
//!     theta_points: 3,
//!     phi_points: 3,
//! };
//! let geom = Geometry::build(&cfg).unwrap();
//! let grid = build_sampling_grid(&cfg);
//! let ops = Operators::new_ris(&cfg, &geom, grid, &OperatorOptions::default()).unwrap();
//! let boxes = [PatternBox {
//!     theta: [-0.8, 0.0],
//!     phi: [-0.8, 0.0],
//!     freq: [-50.0e6, 0.0],
//!     level: 1.0,
//! }];
//! let desired = build_desired(&boxes, 0.01, ops.grid()).unwrap();
//! let opts = SolverOptions { max_cycles: 20, ..Default::default() };
//! let outcome = run_bcd(&ops, &desired, &opts).unwrap();
//! assert!(outcome.rse.unwrap() < 1.0);
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod oracle;
pub mod pattern;
pub mod scene;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
