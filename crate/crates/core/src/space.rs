//! Box-bounded configuration spaces and the unit-cube input map.
//!
//! Every optimizer and model in the crate works on `[0, 1]^D`. A
//! [`ConfigSpace`] owns the map between that cube and native units: dimensions
//! flagged `log` are transformed by the natural logarithm before the affine
//! rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named, bounded input dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(rename = "log", default)]
    pub log_scale: bool,
}

impl Dimension {
    pub fn linear(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Dimension {
            name: name.into(),
            lower,
            upper,
            log_scale: false,
        }
    }

    pub fn log(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Dimension {
            name: name.into(),
            lower,
            upper,
            log_scale: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) || self.lower >= self.upper {
            return Err(Error::schema(
                format!("space.dims.{}", self.name),
                format!("need finite lower < upper, got [{}, {}]", self.lower, self.upper),
            ));
        }
        if self.log_scale && self.lower <= 0.0 {
            return Err(Error::schema(
                format!("space.dims.{}", self.name),
                "log-scaled dimension needs lower > 0",
            ));
        }
        Ok(())
    }

    fn warped(&self, v: f64) -> f64 {
        if self.log_scale {
            v.ln()
        } else {
            v
        }
    }

    fn to_unit(&self, v: f64) -> f64 {
        let (lo, hi) = (self.warped(self.lower), self.warped(self.upper));
        ((self.warped(v) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = if self.log_scale {
            let (lo, hi) = (self.lower.ln(), self.upper.ln());
            (lo + u * (hi - lo)).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        v.clamp(self.lower, self.upper)
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

#[derive(Deserialize)]
struct RawSpace {
    dims: Vec<Dimension>,
}

/// Ordered list of bounded dimensions; D ≥ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ConfigSpace {
    dims: Vec<Dimension>,
}

impl TryFrom<RawSpace> for ConfigSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ConfigSpace::new(raw.dims)
    }
}

impl ConfigSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::schema("space.dims", "at least one dimension is required"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(ConfigSpace { dims })
    }

    /// `[0, 1]^dims` with dimensions named `x1..xD`.
    pub fn unit(dims: usize) -> Self {
        assert!(dims >= 1, "unit space needs at least one dimension");
        ConfigSpace {
            dims: (1..=dims)
                .map(|i| Dimension::linear(format!("x{i}"), 0.0, 1.0))
                .collect(),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dims.len()
            && self.dims.iter().zip(values).all(|(d, &v)| d.contains(v))
    }

    /// Checks length and bounds, naming the first offending dimension.
    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} values, space has {} dimensions",
                values.len(),
                self.dims.len()
            )));
        }
        for (d, &v) in self.dims.iter().zip(values) {
            if !d.contains(v) {
                return Err(Error::OutOfBounds {
                    name: d.name.clone(),
                    value: v,
                    lower: d.lower,
                    upper: d.upper,
                });
            }
        }
        Ok(())
    }

    /// Maps a native configuration into the unit cube.
    pub fn to_unit(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values)?;
        Ok(self.dims.iter().zip(values).map(|(d, &v)| d.to_unit(v)).collect())
    }

    /// Inverse of [`ConfigSpace::to_unit`]; inputs are clamped to `[0, 1]`.
    pub fn from_unit(&self, unit: &[f64]) -> Config {
        debug_assert_eq!(unit.len(), self.dims.len());
        Config(self.dims.iter().zip(unit).map(|(d, &u)| d.from_unit(u)).collect())
    }
}

/// A configuration in native units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(pub Vec<f64>);

impl Config {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for Config {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Config {
    fn from(v: Vec<f64>) -> Self {
        Config(v)
    }
}

/// Normalizes a batch of configurations into unit-cube rows.
pub fn normalize_inputs(space: &ConfigSpace, configs: &[Config]) -> Result<Vec<Vec<f64>>> {
    configs.iter().map(|c| space.to_unit(c)).collect()
}
