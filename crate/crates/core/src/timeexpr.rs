//! Times written either as plain numbers or as multiples of `pi/omega`.
//!
//! Accepted strings: `"3/2 pi/omega"`, `"1.5 pi/omega"`, `"2pi/omega"`,
//! `"pi/omega"`. Output uses the `p/q pi/omega` form.

use std::f64::consts::PI;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeValue {
    Absolute(f64),
    Expr(String),
}

impl Default for TimeValue {
    fn default() -> Self {
        TimeValue::Absolute(0.0)
    }
}

impl TimeValue {
    pub fn resolve(&self, omega: f64) -> Result<f64, String> {
        match self {
            TimeValue::Absolute(t) => Ok(*t),
            TimeValue::Expr(s) => Ok(parse_units(s)? * PI / omega),
        }
    }
}

/// Parses a `x pi/omega` expression and returns `x`.
pub fn parse_units(s: &str) -> Result<f64, String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let coef = compact
        .strip_suffix("pi/omega")
        .ok_or_else(|| format!("expected `<x> pi/omega`, got {s:?}"))?;
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    if coef.is_empty() {
        return Ok(1.0);
    }
    if coef == "-" {
        return Ok(-1.0);
    }
    if let Some((num, den)) = coef.split_once('/') {
        let n: f64 = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: f64 = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d == 0.0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(n / d);
    }
    coef.parse().map_err(|_| format!("bad coefficient in {s:?}"))
}

/// Renders a rational multiple of `pi/omega`.
pub fn render_units(r: Rational64) -> String {
    if *r.denom() == 1 {
        format!("{} pi/omega", r.numer())
    } else {
        format!("{}/{} pi/omega", r.numer(), r.denom())
    }
}
