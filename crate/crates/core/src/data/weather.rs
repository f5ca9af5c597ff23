//! Weather table: CSV parsing, gap interpolation, and the optional plain-HTTP
//! provider that serves the same schema.

use crate::error::{Error, Result};
use chrono::{Duration, NaiveDateTime};
use std::io::{Read, Write};

#[derive(Debug, Clone)]
pub struct WeatherTable {
    start: NaiveDateTime,
    /// Column-major: [temp_c, dewpoint_c, precip_mm], gaps already filled.
    values: [Vec<f64>; 3],
}

fn parse_optional(field: &str) -> std::result::Result<Option<f64>, String> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("bad number `{t}`: {e}"))
}

/// Interior gaps by linear interpolation, leading/trailing by nearest value.
fn fill_gaps(raw: &[Option<f64>]) -> Result<Vec<f64>> {
    let known: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_some()).collect();
    if known.is_empty() {
        return Err(Error::Config("weather column has no known values".into()));
    }
    let mut out = vec![0.0; raw.len()];
    for i in 0..raw.len() {
        out[i] = match raw[i] {
            Some(v) => v,
            None => {
                let next = known.iter().find(|&&k| k > i);
                let prev = known.iter().rev().find(|&&k| k < i);
                match (prev, next) {
                    (Some(&p), Some(&n)) => {
                        let w = (i - p) as f64 / (n - p) as f64;
                        raw[p].unwrap() * (1.0 - w) + raw[n].unwrap() * w
                    }
                    (Some(&p), None) => raw[p].unwrap(),
                    (None, Some(&n)) => raw[n].unwrap(),
                    (None, None) => unreachable!("known is nonempty"),
                }
            }
        };
    }
    Ok(out)
}

impl WeatherTable {
    /// Parse `timestamp,temp_c,dewpoint_c,precip_mm`; blank cells allowed and
    /// interpolated. Rows must be contiguous hourly.
    pub fn parse_csv(content: &str, path: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("weather table empty".into()))?
            .1;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["timestamp", "temp_c", "dewpoint_c", "precip_mm"] {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("unexpected weather header `{header}`"),
            });
        }
        let mut start = None;
        let mut prev: Option<NaiveDateTime> = None;
        let mut raw: [Vec<Option<f64>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("expected 4 fields, got {}", parts.len()),
                });
            }
            let ts = super::session::parse_timestamp(parts[0]).map_err(|msg| Error::Parse {
                path: path.into(),
                line: lineno,
                msg,
            })?;
            if let Some(p) = prev {
                if ts != p + Duration::hours(1) {
                    return Err(Error::Invariant(format!(
                        "weather timestamps must be contiguous hourly; gap before {ts}"
                    )));
                }
            } else {
                start = Some(ts);
            }
            prev = Some(ts);
            for (k, slot) in raw.iter_mut().enumerate() {
                let v = parse_optional(parts[1 + k]).map_err(|msg| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg,
                })?;
                slot.push(v);
            }
        }
        let start = start.ok_or_else(|| Error::Config("weather table empty".into()))?;
        let values = [
            fill_gaps(&raw[0])?,
            fill_gaps(&raw[1])?,
            fill_gaps(&raw[2])?,
        ];
        Ok(WeatherTable { start, values })
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::hours(self.len() as i64)
    }

    /// [temp, dewpoint, precip] at an hour, if covered.
    pub fn at(&self, ts: NaiveDateTime) -> Option<[f64; 3]> {
        if ts < self.start {
            return None;
        }
        let idx = (ts - self.start).num_hours();
        if idx < 0 || idx as usize >= self.len() {
            return None;
        }
        let i = idx as usize;
        Some([self.values[0][i], self.values[1][i], self.values[2][i]])
    }
}

/// Minimal HTTP/1.1 GET for `http://host[:port]/path` URLs, returning the
/// response body. Covers the optional weather endpoint without pulling in a
/// TLS stack; non-`http` schemes are rejected.
pub fn fetch_http_csv(url: &str) -> Result<String> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| Error::Config(format!("only http:// URLs are supported, got `{url}`")))?;
    let (hostport, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    let addr = if hostport.contains(':') {
        hostport.to_string()
    } else {
        format!("{hostport}:80")
    };
    let mut stream = std::net::TcpStream::connect(&addr)
        .map_err(|e| Error::Config(format!("cannot reach weather endpoint {addr}: {e}")))?;
    let request =
        format!("GET {path} HTTP/1.1\r\nHost: {hostport}\r\nConnection: close\r\n\r\n");
    stream.write_all(request.as_bytes())?;
    let mut response = String::new();
    stream.read_to_string(&mut response)?;
    let (head, body) = response
        .split_once("\r\n\r\n")
        .ok_or_else(|| Error::Config("malformed HTTP response from weather endpoint".into()))?;
    let status = head.lines().next().unwrap_or_default();
    if !status.contains(" 200") {
        return Err(Error::Config(format!(
            "weather endpoint returned `{status}`"
        )));
    }
    Ok(body.to_string())
}
