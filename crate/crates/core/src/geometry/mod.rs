//! Ambient models, charts, induced metrics, curvature and volume.

pub mod chart;
pub mod curvature;
pub mod hypersurface;
pub mod models;
pub mod volume;

pub use chart::{ChartSpec, Domain, Exclusion, MetricChart, MetricJet, MetricModel, ModelSpec};
pub use curvature::{christoffel, curvature, riemann, CurvatureOptions, CurvatureReport, Riemann};
pub use hypersurface::{induced_metric, GraphHypersurface, PolarPullback};
pub use models::{klein_metric, AmbientKind, AmbientModel, Warping};
pub use volume::{cone_volume_oracle, hyperbolic_ball_volume, volume, Region, VolumeOptions};
