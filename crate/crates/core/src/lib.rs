//! Tests and localization of structural breaks in the spectrum of a
//! locally stationary time series.

pub mod blocks;
pub mod config;
pub mod detect;
pub mod error;
pub mod grid;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod spectral;
pub mod stats;

pub use config::{LrvKernel, SmootherKernel, SpectralConfig, Taper, MIN_SAMPLE_LEN};
pub use detect::{algorithm1, algorithm1_with, ChangePoint, ChangePointSet, DetectOptions, ThetaSource};
pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use series::{TimeSeries, TrueBreak};
pub use simulate::{simulate, DgpSpec, Model};
pub use spectral::{LocalSpectrum, Side, SpectralEngine};
pub use stats::{Statistic, StatisticPanel, TestReport};
