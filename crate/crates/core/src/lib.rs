//! Piecewise linear hidden semi-Markov models.
//!
//! Each hidden state emits a segment of samples scattered with Gaussian noise
//! around a regression curve `w·φ(t)` over a fixed basis, and stays for an
//! explicitly modelled number of samples (a bounded discrete pmf or a
//! discretized Gamma density). The crate learns such a model from a single
//! exemplar with duration-explicit EM, samples from it, and scores long series
//! with a sliding window.

pub mod basis;
pub mod bench;
pub mod duration;
pub mod enumeration;
pub mod error;
pub mod generator;
pub mod io;
pub mod lattice;
pub mod logspace;
pub mod model;
pub mod recognizer;
pub mod regression;
pub mod special;
pub mod synth;
pub mod train;

pub use basis::{basis_eval, BasisConfig, BasisFamily, TimeConvention};
pub use bench::{run_bench, BenchMode, BenchReport, BenchSpec};
pub use duration::{
    DiscreteDuration, DurationFamily, DurationModel, DurationStats, GammaDuration, GammaUpdate,
};
pub use enumeration::brute_force_loglik;
pub use error::{Error, Result};
pub use generator::{sample, SamplePath, SampleRng};
pub use lattice::{
    backward, forward, forward_backward, log_likelihood, posteriors, viterbi, Lattice,
    PosteriorStats, Segment, Segmentation,
};
pub use model::{
    emission_log_density, segment_log_likelihood, EmissionParams, Model, Series, Violation,
};
pub use recognizer::{find_detections, score_windows, Detection, ScoreTrack};
pub use regression::{weighted_least_squares, RegressionFit};
pub use train::{em_step, fit, initialize, FitTrace, TrainConfig, TrainMode};
