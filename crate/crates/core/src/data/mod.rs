//! Data layer: session ingestion, hourly aggregation, covariate
//! construction, windowing, chronological splits, and scaling.
//!
//! Everything here works on `f64` directly; genericity over the scalar type
//! stops at the file boundary.

mod features;
mod frame;
mod scaling;
mod session;
mod split;
mod weather;
mod window;

pub use features::{
    build_features, calendar_features, parse_holidays, CovariateMatrix, CALENDAR_FEATURES,
    FEATURE_NAMES,
};
pub use frame::TimeSeriesFrame;
pub use scaling::MinMaxScaler;
pub use session::{aggregate_sessions, parse_sessions_csv, SessionRecord};
pub use split::{split_windows, SplitIndices, SplitSpec};
pub use weather::{fetch_http_csv, WeatherTable};
pub use window::{make_windows, make_windows_over, FeatureWindow};
