//! Digital-twin assisted ISAC beamforming: scene model, ray tracing, channel
//! synthesis, SDP-based beam design and Monte Carlo evaluation.

pub mod beamforming;
pub mod channel;
pub mod format;
pub mod geometry;
pub mod numerics;
pub mod raytracer;
pub mod scene;
pub mod sdp;
pub mod sim;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub use beamforming::{BeamSolution, Strategy};
pub use channel::{ArrayGeometry, ChannelSet, LinkMetrics};
pub use geometry::Vec3;
pub use numerics::{CMatrix, CVector};
pub use raytracer::{PartialPath, PropagationPath, RayTracer};
pub use scene::{Scene, ValidationReport};
pub use sdp::{IsacSdpProblem, SdpSolution};
pub use sim::{ExperimentConfig, MonteCarloOutput};
