//! Modal slit fields, Kirchhoff far-field amplitudes, singles and coincidence
//! patterns for one- and two-slit photon diffraction.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod kirchhoff;
pub mod observables;
pub mod oracle;
pub mod vector;

pub use calibrate::{fit, FitParameter, FitResult, FitSpec, ParameterValues, ReferenceSeries};
pub use config::{
    DetectorDirection, IncidentWave, ModeVariant, SimConfig, SlitGeometry, SlitIndex,
    TruncationPolicy,
};
pub use error::{Error, Result};
pub use io::{RunConfig, RunManifest};
pub use kirchhoff::{FarField, FarFieldAmplitude};
pub use observables::{FringeMetrics, PatternKind, PatternSeries};
pub use oracle::QuadratureSpec;
pub use vector::ComplexVec3;
