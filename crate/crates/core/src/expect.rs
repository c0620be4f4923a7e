//! Expectation tables checked by `verify`.
//!
//! One row per line, `window_start,window_end,quantity,expected,tolerance`.
//! Blank lines and lines starting with `#` are skipped, as is a leading header
//! row beginning with `window_start`.
//!
//! Quantities:
//!
//! | path                        | meaning                                   |
//! |-----------------------------|-------------------------------------------|
//! | `v_pcc.mean`                | mean bus voltage (V)                      |
//! | `v_pcc.max_dev`             | max \|v_pcc − v*_dc\| (V)                 |
//! | `sharing_error`             | max pairwise mean-current difference (A)  |
//! | `settling_time`             | time to stay within ±0.5 V of v*_dc (s)   |
//! | `load.i.mean`, `load.p.mean`| load current (A) / power (W)              |
//! | `converter.K.i.mean`        | mean feeder current of converter K (A)    |
//! | `converter.K.p.mean`        | mean terminal power (W)                   |
//! | `converter.K.v_term.mean`   | mean terminal voltage (V)                 |
//! | `converter.K.v_ref.mean`    | mean latched reference (V)                |
//! | `converter.K.comp.mean`     | mean local compensation voltage (V)       |
//!
//! Converter numbers are 1-based.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::{Metrics, Window, WindowMetrics};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpectationError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: quantity `{path}` does not resolve: {message}")]
    Unresolved {
        line: usize,
        path: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConverterField {
    Current,
    Power,
    TerminalVoltage,
    Reference,
    Compensation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    VPccMean,
    VPccMaxDeviation,
    SharingError,
    SettlingTime,
    LoadCurrentMean,
    LoadPowerMean,
    /// Zero-based converter index.
    Converter(usize, ConverterField),
}

impl Quantity {
    /// Highest zero-based converter index this quantity refers to.
    pub fn converter_index(&self) -> Option<usize> {
        match self {
            Quantity::Converter(k, _) => Some(*k),
            _ => None,
        }
    }

    /// Reads the quantity from one window. `None` when the value does not
    /// exist (unsettled window or missing converter).
    pub fn measure(&self, m: &WindowMetrics) -> Option<f64> {
        match *self {
            Quantity::VPccMean => Some(m.mean_v_pcc),
            Quantity::VPccMaxDeviation => Some(m.max_deviation),
            Quantity::SharingError => Some(m.sharing_error),
            Quantity::SettlingTime => m.settling_time,
            Quantity::LoadCurrentMean => Some(m.mean_i_load),
            Quantity::LoadPowerMean => Some(m.mean_p_load),
            Quantity::Converter(k, field) => {
                let c = m.converters.get(k)?;
                Some(match field {
                    ConverterField::Current => c.mean_current,
                    ConverterField::Power => c.mean_power,
                    ConverterField::TerminalVoltage => c.mean_v_term,
                    ConverterField::Reference => c.mean_v_ref,
                    ConverterField::Compensation => c.mean_comp,
                })
            }
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let q = match s {
            "v_pcc.mean" => Quantity::VPccMean,
            "v_pcc.max_dev" => Quantity::VPccMaxDeviation,
            "sharing_error" => Quantity::SharingError,
            "settling_time" => Quantity::SettlingTime,
            "load.i.mean" => Quantity::LoadCurrentMean,
            "load.p.mean" => Quantity::LoadPowerMean,
            _ => {
                let parts: Vec<&str> = s.split('.').collect();
                let ["converter", number, field, "mean"] = parts.as_slice() else {
                    return Err("unknown quantity path".into());
                };
                let number: usize = number.parse().map_err(|_| {
                    format!("converter number `{number}` is not a positive integer")
                })?;
                if number == 0 {
                    return Err("converters are numbered from 1".into());
                }
                let field = match *field {
                    "i" => ConverterField::Current,
                    "p" => ConverterField::Power,
                    "v_term" => ConverterField::TerminalVoltage,
                    "v_ref" => ConverterField::Reference,
                    "comp" => ConverterField::Compensation,
                    other => return Err(format!("unknown converter field `{other}`")),
                };
                Quantity::Converter(number - 1, field)
            }
        };
        Ok(q)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::VPccMean => f.write_str("v_pcc.mean"),
            Quantity::VPccMaxDeviation => f.write_str("v_pcc.max_dev"),
            Quantity::SharingError => f.write_str("sharing_error"),
            Quantity::SettlingTime => f.write_str("settling_time"),
            Quantity::LoadCurrentMean => f.write_str("load.i.mean"),
            Quantity::LoadPowerMean => f.write_str("load.p.mean"),
            Quantity::Converter(k, field) => {
                let name = match field {
                    ConverterField::Current => "i",
                    ConverterField::Power => "p",
                    ConverterField::TerminalVoltage => "v_term",
                    ConverterField::Reference => "v_ref",
                    ConverterField::Compensation => "comp",
                };
                write!(f, "converter.{}.{name}.mean", k + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    /// 1-based line in the source file.
    pub line: usize,
    pub window: Window,
    pub quantity: Quantity,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpectationTable {
    pub rows: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub row: Expectation,
    /// `None` when the quantity has no value in the window.
    pub measured: Option<f64>,
    pub pass: bool,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let measured = self
            .measured
            .map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
        write!(
            f,
            "{} [{}, {}] {} expected {} ± {} measured {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.row.window.start,
            self.row.window.end,
            self.row.quantity,
            self.row.expected,
            self.row.tolerance,
            measured
        )
    }
}

fn parse_number(field: &str, what: &str, line: usize) -> Result<f64, ExpectationError> {
    let v: f64 = field.parse().map_err(|_| ExpectationError::Parse {
        line,
        message: format!("{what} `{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(ExpectationError::Parse {
            line,
            message: format!("{what} must be finite"),
        });
    }
    Ok(v)
}

impl ExpectationTable {
    pub fn parse(text: &str) -> Result<Self, ExpectationError> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if rows.is_empty() && trimmed.starts_with("window_start") {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(ExpectationError::Parse {
                    line,
                    message: format!("expected 5 comma-separated fields, found {}", fields.len()),
                });
            }
            let start = parse_number(fields[0], "window_start", line)?;
            let end = parse_number(fields[1], "window_end", line)?;
            if !(start < end) {
                return Err(ExpectationError::Parse {
                    line,
                    message: format!("window [{start}, {end}] is empty"),
                });
            }
            let quantity: Quantity =
                fields[2]
                    .parse()
                    .map_err(|message| ExpectationError::Unresolved {
                        line,
                        path: fields[2].to_string(),
                        message,
                    })?;
            let expected = parse_number(fields[3], "expected", line)?;
            let tolerance = parse_number(fields[4], "tolerance", line)?;
            if !(tolerance > 0.0) {
                return Err(ExpectationError::Parse {
                    line,
                    message: format!("tolerance must be > 0 (got {tolerance})"),
                });
            }
            rows.push(Expectation {
                line,
                window: Window::new(start, end),
                quantity,
                expected,
                tolerance,
            });
        }
        Ok(Self { rows })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks every row against a scenario with `n_converters` converters.
    pub fn resolve(&self, n_converters: usize) -> Result<(), ExpectationError> {
        for row in &self.rows {
            if let Some(k) = row.quantity.converter_index() {
                if k >= n_converters {
                    return Err(ExpectationError::Unresolved {
                        line: row.line,
                        path: row.quantity.to_string(),
                        message: format!("the scenario has {n_converters} converters"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Distinct windows in first-appearance order.
    pub fn windows(&self) -> Vec<Window> {
        let mut out: Vec<Window> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.window) {
                out.push(row.window);
            }
        }
        out
    }

    /// Evaluates each row against metrics computed for [`Self::windows`].
    pub fn evaluate(&self, metrics: &Metrics) -> Vec<Outcome> {
        self.rows
            .iter()
            .map(|row| {
                let measured = metrics
                    .windows
                    .iter()
                    .find(|m| m.window == row.window)
                    .and_then(|m| row.quantity.measure(m));
                let pass = measured.is_some_and(|v| (v - row.expected).abs() <= row.tolerance);
                Outcome {
                    row: row.clone(),
                    measured,
                    pass,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_rows_comments_and_header() {
        let text = "window_start,window_end,quantity,expected,tolerance\n\
                    # centralized\n\
                    0.2,0.5,v_pcc.mean,400,0.5\n\
                    \n\
                    3.1, 3.5, converter.3.i.mean, 0, 0.05\n";
        let t = ExpectationTable::parse(text).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].quantity, Quantity::VPccMean);
        assert_eq!(
            t.rows[1].quantity,
            Quantity::Converter(2, ConverterField::Current)
        );
        assert_eq!(t.rows[1].line, 5);
        assert_eq!(t.windows().len(), 2);
        assert!(t.resolve(3).is_ok());
        assert!(matches!(
            t.resolve(2),
            Err(ExpectationError::Unresolved { line: 5, .. })
        ));
    }

    #[test]
    fn rejects_bad_rows() {
        for bad in [
            "0.2,0.5,v_pcc.mean,400",
            "0.5,0.2,v_pcc.mean,400,0.5",
            "0.2,0.5,v_pcc.mean,400,0",
            "0.2,0.5,v_pcc.mean,abc,0.5",
            "0.2,0.5,v_pcc.median,400,0.5",
            "0.2,0.5,converter.0.i.mean,1,0.5",
            "0.2,0.5,converter.1.q.mean,1,0.5",
        ] {
            assert!(ExpectationTable::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn empty_table() {
        let t = ExpectationTable::parse("# nothing here\n").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn quantity_paths_round_trip() {
        let paths = [
            "v_pcc.mean",
            "v_pcc.max_dev",
            "sharing_error",
            "settling_time",
            "load.i.mean",
            "load.p.mean",
            "converter.1.i.mean",
            "converter.12.p.mean",
            "converter.2.v_term.mean",
            "converter.2.v_ref.mean",
            "converter.3.comp.mean",
        ];
        for p in paths {
            assert_eq!(p.parse::<Quantity>().unwrap().to_string(), p);
        }
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC{0,200}") {
            let _ = ExpectationTable::parse(&text);
        }
    }
}
