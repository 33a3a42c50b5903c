//! Rollouts, state estimation, excitation schedules and synthetic data.

pub mod dataset;
pub mod excitation;
pub mod kalman;
pub mod rollout;
pub mod synth;

pub use dataset::{GroundTruth, TimeSeriesDataset};
pub use excitation::{generate_excitation, ExcitationOptions, ExcitationSchedule};
pub use kalman::{initial_state_guess, kalman_filter, smoothed_initial_state, KalmanConfig, KalmanEstimate};
pub use rollout::{output, rollout, simulate, step, zero_gains, Trajectory};
pub use synth::{synthesize_dataset, IgModel, Operation, ProportionalController, SynthesisOptions, WeatherModel};
