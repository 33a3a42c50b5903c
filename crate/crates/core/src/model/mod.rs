//! Thermal model: RC network, external heat flux submodels, continuous and
//! discrete bilinear state-space forms.

pub mod continuous;
pub mod discrete;
pub mod export;
pub mod flux;
pub mod network;

pub use continuous::{assemble_continuous, build_model, RcStateSpaceModel};
pub use discrete::{discretize, spectral_radius, DiscreteModel, DEFAULT_STEP_SECONDS};
pub use export::ModelArtifact;
pub use flux::{flux_rhs, hull_flux, hull_flux_scalar, hvac_flux, ig_flux, Disturbance};
pub use network::{build_rc_network, NetworkOptions, RcNetwork, StateRole};
