//! Parameter grids: `"a,b,c"` lists or `"start:stop:count[:lin|log]"` ranges.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridError(String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GridError {}

fn number(s: &str) -> Result<f64, GridError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| GridError(format!("`{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(GridError(format!("`{}` is not finite", s.trim())));
    }
    Ok(v)
}

impl FromStr for Grid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(GridError("empty grid".into()));
        }
        if !s.contains(':') {
            return s.split(',').map(number).collect::<Result<_, _>>().map(Grid);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(GridError(format!("range `{s}` must be start:stop:count[:lin|log]")));
        }
        let start = number(parts[0])?;
        let stop = number(parts[1])?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| GridError(format!("count `{}` is not a positive integer", parts[2].trim())))?;
        if count == 0 {
            return Err(GridError("grid count must be positive".into()));
        }
        let log = match parts.get(3).map(|m| m.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(GridError(format!("spacing `{other}` must be lin or log"))),
        };
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(GridError("log spacing needs positive endpoints".into()));
        }
        if count == 1 {
            return Ok(Grid(vec![start]));
        }
        let last = (count - 1) as f64;
        let points = (0..count)
            .map(|i| {
                let f = i as f64 / last;
                if i == 0 {
                    start
                } else if i + 1 == count {
                    stop
                } else if log {
                    (start.ln() + f * (stop.ln() - start.ln())).exp()
                } else {
                    start + f * (stop - start)
                }
            })
            .collect();
        Ok(Grid(points))
    }
}

/// TOML accepts a number, an array of numbers, or a grid string.
impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(v) => Ok(Grid(vec![v])),
            Raw::Many(v) if v.is_empty() => Err(serde::de::Error::custom("empty grid")),
            Raw::Many(v) => Ok(Grid(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!("0.5".parse::<Grid>().unwrap(), Grid(vec![0.5]));
        assert_eq!("1, 2,3".parse::<Grid>().unwrap(), Grid(vec![1.0, 2.0, 3.0]));
        assert_eq!("0:1:3".parse::<Grid>().unwrap(), Grid(vec![0.0, 0.5, 1.0]));
        let log = "0.01:1:3:log".parse::<Grid>().unwrap();
        assert!((log.0[1] - 0.1).abs() < 1e-15);
        assert_eq!(log.0[0], 0.01);
        assert_eq!(log.0[2], 1.0);
    }

    #[test]
    fn malformed() {
        for bad in ["", "a,b", "1:2", "1:2:0", "1:2:3:cubic", "0:1:3:log", "1:2:x", "inf"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
    }
}
