//! Min-max scaling to [0,1], fit on the training partition only; inverse
//! scaling restores kWh before metrics and export.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("cannot fit a scaler on no data".into()));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Ok(MinMaxScaler { min, max })
    }

    fn span(&self) -> f64 {
        let s = self.max - self.min;
        if s > 1e-12 {
            s
        } else {
            1.0 // constant series map to 0
        }
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.span() + self.min
    }

    pub fn transform_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.transform(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_training_extremes_to_unit_interval() {
        let s = MinMaxScaler::fit(&[2.0, 4.0, 10.0]).unwrap();
        assert_eq!(s.transform(2.0), 0.0);
        assert_eq!(s.transform(10.0), 1.0);
        assert!((s.transform(6.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trips() {
        let s = MinMaxScaler::fit(&[-3.0, 7.5]).unwrap();
        for v in [-3.0, 0.0, 2.2, 7.5, 12.0] {
            assert!((s.inverse(s.transform(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_maps_to_zero() {
        let s = MinMaxScaler::fit(&[5.0, 5.0]).unwrap();
        assert_eq!(s.transform(5.0), 0.0);
        assert_eq!(s.inverse(0.0), 5.0);
    }
}
