//! Sliding-window samples: context block, known-future calendar covariates,
//! and the horizon target.

use super::features::CovariateMatrix;
use super::frame::TimeSeriesFrame;
use crate::error::{Error, Result};
use chrono::NaiveDateTime;

#[derive(Debug, Clone)]
pub struct FeatureWindow {
    /// Timestamp of the first horizon step.
    pub origin: NaiveDateTime,
    /// context[t] = [target, covariates...] over the context block.
    pub context: Vec<Vec<f64>>,
    /// Calendar features per horizon step (weather is unknown there).
    pub future_covariates: Vec<Vec<f64>>,
    /// Horizon targets (length τ).
    pub horizon: Vec<f64>,
}

impl FeatureWindow {
    pub fn context_dim(&self) -> usize {
        self.context[0].len()
    }
}

/// Stride-1 sliding windows over one series; count = L − context − horizon + 1.
pub fn make_windows(
    frame: &TimeSeriesFrame,
    series_name: &str,
    covariates: &CovariateMatrix,
    context: usize,
    horizon: usize,
) -> Result<Vec<FeatureWindow>> {
    let series = frame
        .series(series_name)
        .ok_or_else(|| Error::Contract(format!("unknown series `{series_name}`")))?;
    make_windows_over(series, frame.start(), covariates, context, horizon)
}

/// Windowing over a bare series vector starting at `start` (hourly steps).
/// This is what the pipeline uses after per-series scaling.
pub fn make_windows_over(
    series: &[f64],
    start: NaiveDateTime,
    covariates: &CovariateMatrix,
    context: usize,
    horizon: usize,
) -> Result<Vec<FeatureWindow>> {
    if context == 0 || horizon == 0 {
        return Err(Error::Contract("context and horizon must be at least 1".into()));
    }
    let len = series.len();
    if covariates.rows.len() != len {
        return Err(Error::Contract(
            "covariate rows must match the series length".into(),
        ));
    }
    if len < context + horizon {
        return Err(Error::EmptyDataset(format!(
            "series length {len} is below context {context} + horizon {horizon}"
        )));
    }
    let count = len - context - horizon + 1;
    let mut out = Vec::with_capacity(count);
    for w_start in 0..count {
        let ctx: Vec<Vec<f64>> = (w_start..w_start + context)
            .map(|t| {
                let mut row = Vec::with_capacity(1 + covariates.width());
                row.push(series[t]);
                row.extend_from_slice(&covariates.rows[t]);
                row
            })
            .collect();
        let future: Vec<Vec<f64>> = (w_start + context..w_start + context + horizon)
            .map(|t| covariates.calendar_row(t))
            .collect();
        let target: Vec<f64> = series[w_start + context..w_start + context + horizon].to_vec();
        out.push(FeatureWindow {
            origin: start + chrono::Duration::hours((w_start + context) as i64),
            context: ctx,
            future_covariates: future,
            horizon: target,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::session::parse_timestamp;

    fn setup(len: usize) -> (TimeSeriesFrame, CovariateMatrix) {
        let series: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let frame = TimeSeriesFrame::from_columns(
            parse_timestamp("2024-01-01T00:00").unwrap(),
            vec!["a".into()],
            vec![series],
        )
        .unwrap();
        let rows = (0..len).map(|i| vec![i as f64; 9]).collect();
        (frame, CovariateMatrix { rows })
    }

    #[test]
    fn window_count_formula() {
        let (frame, cov) = setup(200);
        let ws = make_windows(&frame, "a", &cov, 168, 24).unwrap();
        assert_eq!(ws.len(), 9);
    }

    #[test]
    fn boundary_single_window() {
        let (frame, cov) = setup(192);
        let ws = make_windows(&frame, "a", &cov, 168, 24).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].context.len(), 168);
        assert_eq!(ws[0].horizon.len(), 24);
        assert_eq!(ws[0].future_covariates.len(), 24);
        assert_eq!(ws[0].context_dim(), 10);
    }

    #[test]
    fn insufficient_length_errors() {
        let (frame, cov) = setup(191);
        assert!(make_windows(&frame, "a", &cov, 168, 24).is_err());
    }

    #[test]
    fn horizon_concatenation_reconstructs_series() {
        let (frame, cov) = setup(40);
        let context = 8;
        let horizon = 4;
        let ws = make_windows(&frame, "a", &cov, context, horizon).unwrap();
        // stride = horizon over the window list reconstructs the tail
        let mut rebuilt = Vec::new();
        let mut idx = 0;
        while idx < ws.len() {
            rebuilt.extend_from_slice(&ws[idx].horizon);
            idx += horizon;
        }
        let original = frame.series("a").unwrap();
        let tail = &original[context..context + rebuilt.len()];
        assert_eq!(rebuilt.as_slice(), tail);
    }

    #[test]
    fn origin_is_first_horizon_step() {
        let (frame, cov) = setup(20);
        let ws = make_windows(&frame, "a", &cov, 5, 2).unwrap();
        assert_eq!(ws[0].origin, frame.timestamp(5));
        assert_eq!(ws[1].origin, frame.timestamp(6));
        // horizon values really are the series at the origin
        assert_eq!(ws[0].horizon, vec![5.0, 6.0]);
    }
}
