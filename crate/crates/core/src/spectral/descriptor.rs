//! JSON measure descriptors.
//!
//! ```json
//! {
//!   "atoms": [[-1.0, 0.5], [1.0, 0.5]],
//!   "density": {"builtin": "gaussian", "grid_min": -6, "grid_max": 6, "h": 0.00390625},
//!   "singular_flag": false,
//!   "delta": 1.0
//! }
//! ```
//!
//! A density is either a builtin (`gaussian`, `uniform`, `inv_sqrt`) or an
//! explicit `values` array on `[grid_min, grid_max]` with step `h`. Optional
//! `singularities` are `[location, exponent]` pairs and `tail` is
//! `{"kind": "gaussian" | "compact"}` or `{"kind": "exponential", "rate": r}`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Atom, GridDensity, Singularity, SpectralMeasure, TailClass, DEFAULT_GRID_STEP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Gaussian,
    Uniform,
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub singularities: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDescriptor {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityDescriptor>,
    #[serde(default)]
    pub singular_flag: bool,
    pub delta: f64,
    #[serde(default)]
    pub degenerate: bool,
}

impl DensityDescriptor {
    fn build(&self) -> Result<GridDensity> {
        let h = self.h.unwrap_or(DEFAULT_GRID_STEP);
        let mut density = match (self.builtin, &self.values) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidMeasure("density has both `builtin` and `values`".into()))
            }
            (None, None) => {
                return Err(Error::InvalidMeasure("density needs either `builtin` or `values`".into()))
            }
            (Some(b), None) => {
                let (lo, hi) = match b {
                    Builtin::Gaussian => (-6.0, 6.0),
                    Builtin::Uniform | Builtin::InvSqrt => (-1.0, 1.0),
                };
                let lo = self.grid_min.unwrap_or(lo);
                let hi = self.grid_max.unwrap_or(hi);
                match b {
                    Builtin::Gaussian => GridDensity::gaussian(lo, hi, h)?,
                    Builtin::Uniform => GridDensity::uniform(lo, hi, h)?,
                    Builtin::InvSqrt => GridDensity::inv_sqrt(lo, hi, h)?,
                }
            }
            (None, Some(values)) => {
                let (Some(lo), Some(hi), Some(h)) = (self.grid_min, self.grid_max, self.h) else {
                    return Err(Error::InvalidMeasure(
                        "explicit density values need grid_min, grid_max and h".into(),
                    ));
                };
                GridDensity::new(lo, hi, h, values.clone(), vec![], None)?
            }
        };
        let mut sing = density.singularities.clone();
        sing.extend(self.singularities.iter().map(|&[location, exponent]| Singularity { location, exponent }));
        let tail = self.tail.or(density.tail);
        density = GridDensity::from_parts(density.grid_min, density.h, density.values, sing, tail)?;
        Ok(density)
    }
}

impl MeasureDescriptor {
    pub fn build(&self) -> Result<SpectralMeasure> {
        let atoms = self.atoms.iter().map(|&[location, mass]| Atom { location, mass }).collect();
        let density = self.density.as_ref().map(|d| d.build()).transpose()?;
        SpectralMeasure::build(atoms, density, self.singular_flag, self.delta, self.degenerate)
    }

    /// Explicit descriptor (grid values written out) of a measure.
    pub fn from_measure(m: &SpectralMeasure) -> Self {
        Self {
            atoms: m.atoms().iter().map(|a| [a.location, a.mass]).collect(),
            density: m.density().map(|d| DensityDescriptor {
                builtin: None,
                grid_min: Some(d.grid_min()),
                grid_max: Some(d.grid_max()),
                h: Some(d.h()),
                values: Some(d.values().to_vec()),
                singularities: d.singularities().iter().map(|s| [s.location, s.exponent]).collect(),
                tail: d.tail(),
            }),
            singular_flag: m.singular_flag(),
            delta: m.delta(),
            degenerate: m.is_degenerate(),
        }
    }
}

pub fn parse_measure(json: &str) -> Result<SpectralMeasure> {
    let d: MeasureDescriptor = serde_json::from_str(json)?;
    d.build()
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<SpectralMeasure> {
    parse_measure(&std::fs::read_to_string(path)?)
}

/// Doubles with 17 significant digits, which round-trips every value bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_pairs(out: &mut String, pairs: impl Iterator<Item = (f64, f64)>) {
    out.push('[');
    for (i, (a, b)) in pairs.enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "[{}, {}]", fmt_f64(a), fmt_f64(b));
    }
    out.push(']');
}

/// Serializes a measure with every value written out explicitly.
pub fn measure_to_json(m: &SpectralMeasure) -> String {
    let mut s = String::from("{\n  \"atoms\": ");
    write_pairs(&mut s, m.atoms().iter().map(|a| (a.location, a.mass)));
    if let Some(d) = m.density() {
        let _ = write!(
            s,
            ",\n  \"density\": {{\n    \"grid_min\": {},\n    \"grid_max\": {},\n    \"h\": {},\n    \"singularities\": ",
            fmt_f64(d.grid_min()),
            fmt_f64(d.grid_max()),
            fmt_f64(d.h())
        );
        write_pairs(&mut s, d.singularities().iter().map(|x| (x.location, x.exponent)));
        match d.tail() {
            None => {}
            Some(TailClass::Gaussian) => s.push_str(",\n    \"tail\": {\"kind\": \"gaussian\"}"),
            Some(TailClass::Compact) => s.push_str(",\n    \"tail\": {\"kind\": \"compact\"}"),
            Some(TailClass::Exponential { rate }) => {
                let _ = write!(s, ",\n    \"tail\": {{\"kind\": \"exponential\", \"rate\": {}}}", fmt_f64(rate));
            }
        }
        s.push_str(",\n    \"values\": [");
        for (i, v) in d.values().iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&fmt_f64(*v));
        }
        s.push_str("]\n  }");
    }
    let _ = write!(
        s,
        ",\n  \"singular_flag\": {},\n  \"delta\": {},\n  \"degenerate\": {}\n}}\n",
        m.singular_flag(),
        fmt_f64(m.delta()),
        m.is_degenerate()
    );
    s
}

pub fn save_measure(m: &SpectralMeasure, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, measure_to_json(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_and_roundtrip() {
        let m = parse_measure(
            r#"{"atoms": [[0.25, 0.1], [-0.5, 0.2]],
                "density": {"builtin": "gaussian", "grid_min": -4, "grid_max": 4, "h": 0.0625},
                "delta": 1.0}"#,
        )
        .unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.density().unwrap().len(), 128);
        assert_eq!(m.density().unwrap().tail(), Some(TailClass::Gaussian));
        let back = parse_measure(&measure_to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn seventeen_digits_roundtrip_bit_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let y: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn inv_sqrt_builtin_carries_annotation() {
        let m = parse_measure(r#"{"density": {"builtin": "inv_sqrt"}, "delta": 0.5}"#).unwrap();
        let d = m.density().unwrap();
        assert_eq!(d.singularities(), &[Singularity { location: 0.0, exponent: 0.5 }]);
        assert_eq!(d.tail(), Some(TailClass::Compact));
    }

    #[test]
    fn explicit_values_and_errors() {
        let m = parse_measure(
            r#"{"density": {"grid_min": 0, "grid_max": 1, "h": 0.5, "values": [1, 1],
                "singularities": [[0.5, 0.3]], "tail": {"kind": "exponential", "rate": 20}},
                "delta": 1.0}"#,
        )
        .unwrap();
        assert_eq!(m.density().unwrap().tail(), Some(TailClass::Exponential { rate: 20.0 }));
        assert!(parse_measure(r#"{"atoms": [[0, 1]], "delta": 1}"#).is_err());
        assert!(parse_measure(r#"{"atoms": [[0, 1]], "delta": 1, "degenerate": true}"#).unwrap().is_degenerate());
        assert!(parse_measure(r#"{"density": {"values": [1]}, "delta": 1}"#).is_err());
        assert!(parse_measure(r#"{"delta": 1, "bogus": 3}"#).is_err());
        assert!(parse_measure(r#"{"singular_flag": true, "delta": 1}"#).unwrap().singular_flag());
    }
}
