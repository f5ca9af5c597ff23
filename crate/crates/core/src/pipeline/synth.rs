//! Bundled synthetic data generator: charging sessions, weather, and
//! holidays with the spiky daily/weekly texture of workplace charging.
//! Real station data cannot ship with the repository, so every end-to-end
//! test runs on this.

use crate::error::Result;
use crate::numerics::rng::Rng;
use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub start: NaiveDate,
    pub days: usize,
    /// Per-station demand scale; length sets the station count.
    pub station_scales: Vec<f64>,
    /// Per-station noise level relative to scale.
    pub station_noise: Vec<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            days: 60,
            station_scales: vec![4.0, 9.0, 1.5],
            station_noise: vec![0.5, 0.15, 0.3],
            seed: 42,
        }
    }
}

/// Intended hourly demand for one station (before session discretization):
/// midday-peaked weekday profile with heteroscedastic noise and occasional
/// zero-demand hours.
fn demand_at(spec: &SynthSpec, station: usize, ts: NaiveDateTime, rng: &mut Rng) -> f64 {
    let scale = spec.station_scales[station];
    let noise = spec.station_noise[station];
    let hour = ts.time().hour() as f64;
    let day_curve = (-((hour - 12.5) / 3.5).powi(2)).exp() + 0.15;
    let week_factor = match ts.date().weekday() {
        chrono::Weekday::Sat | chrono::Weekday::Sun => 0.35,
        _ => 1.0,
    };
    let level = scale * day_curve * week_factor;
    let eps: f64 = rng.standard_normal();
    let value = level * (1.0 + noise * eps);
    if rng.open01::<f64>() < 0.04 {
        return 0.0;
    }
    value.max(0.0)
}

use chrono::Timelike;

#[derive(Debug)]
pub struct SynthFiles {
    pub sessions: String,
    pub weather: String,
    pub holidays: String,
}

/// Render the three input files. Mostly single-hour sessions; roughly every
/// tenth session spans into the next hour with minute jitter to exercise the
/// proration path.
pub fn generate(spec: &SynthSpec) -> SynthFiles {
    assert_eq!(spec.station_scales.len(), spec.station_noise.len());
    let mut rng = Rng::derive(spec.seed, "synth");
    let start = spec.start.and_hms_opt(0, 0, 0).unwrap();
    let hours = spec.days * 24;

    let mut sessions = String::from("station_id,connect_time,disconnect_time,energy_kwh\n");
    for st in 0..spec.station_scales.len() {
        let name = format!("station{}", st + 1);
        for h in 0..hours {
            let ts = start + Duration::hours(h as i64);
            let demand = demand_at(spec, st, ts, &mut rng);
            if demand <= 1e-9 {
                continue;
            }
            let spans_next = h + 1 < hours && rng.open01::<f64>() < 0.1;
            if spans_next {
                // session stretching into the next hour; its tail energy is
                // whatever proration assigns there
                let offset = 10 + (rng.next_u64() % 40) as i64;
                let connect = ts + Duration::minutes(offset);
                let disconnect = ts + Duration::minutes(60 + offset);
                sessions.push_str(&format!(
                    "{name},{},{},{:.6}\n",
                    connect.format("%Y-%m-%dT%H:%M"),
                    disconnect.format("%Y-%m-%dT%H:%M"),
                    demand
                ));
            } else {
                sessions.push_str(&format!(
                    "{name},{},{},{:.6}\n",
                    ts.format("%Y-%m-%dT%H:%M"),
                    (ts + Duration::hours(1)).format("%Y-%m-%dT%H:%M"),
                    demand
                ));
            }
        }
    }

    // weather spans one extra day on both ends so coverage always holds
    let mut weather = String::from("timestamp,temp_c,dewpoint_c,precip_mm\n");
    let w_start = start - Duration::hours(24);
    let w_hours = hours + 48;
    for h in 0..w_hours {
        let ts = w_start + Duration::hours(h as i64);
        let day_of_year = ts.date().ordinal0() as f64;
        let hod = ts.time().hour() as f64;
        let temp = 12.0 + 8.0 * (2.0 * std::f64::consts::PI * day_of_year / 365.0).sin()
            + 4.0 * (2.0 * std::f64::consts::PI * (hod - 14.0) / 24.0).cos()
            + rng.standard_normal::<f64>();
        let dew = temp - 5.0 + 0.5 * rng.standard_normal::<f64>();
        let precip = (rng.standard_normal::<f64>() - 1.8).max(0.0) * 2.0;
        // ~2% blank temperature cells exercise the interpolation path
        if rng.open01::<f64>() < 0.02 {
            weather.push_str(&format!(
                "{},,{:.3},{:.3}\n",
                ts.format("%Y-%m-%dT%H:%M"),
                dew,
                precip
            ));
        } else {
            weather.push_str(&format!(
                "{},{:.3},{:.3},{:.3}\n",
                ts.format("%Y-%m-%dT%H:%M"),
                temp,
                dew,
                precip
            ));
        }
    }

    let mut holidays = String::new();
    let mut d = spec.start;
    let end = spec.start + Duration::days(spec.days as i64);
    while d < end {
        // first day of each month plus day 15 of the first month
        if d.day() == 1 || (d.day() == 15 && d.month() == spec.start.month()) {
            holidays.push_str(&format!("{}\n", d.format("%Y-%m-%d")));
        }
        d += Duration::days(1);
    }

    SynthFiles {
        sessions,
        weather,
        holidays,
    }
}

/// Write the generated inputs under a directory as `sessions.csv`,
/// `weather.csv`, and `holidays.txt`.
pub fn write_to(spec: &SynthSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let files = generate(spec);
    std::fs::write(dir.join("sessions.csv"), files.sessions)?;
    std::fs::write(dir.join("weather.csv"), files.weather)?;
    std::fs::write(dir.join("holidays.txt"), files.holidays)?;
    Ok(())
}
