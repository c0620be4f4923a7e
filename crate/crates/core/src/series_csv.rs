//! Flat CSV rendering of a [`TimeSeries`].
//!
//! Column order is fixed: `t,v_pcc,i_load,p_load,mode`, then for each
//! converter k (1-based) `vref_k,vterm_k,i_k,p_k,comp_k`. Numbers carry six
//! significant digits; `mode` is 0 = centralized, 1 = none, 2 = decentralized.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::engine::TimeSeries;

/// Bumped whenever the column layout changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn header(n_converters: usize) -> String {
    let mut h = String::from("t,v_pcc,i_load,p_load,mode");
    for k in 1..=n_converters {
        write!(h, ",vref_{k},vterm_{k},i_{k},p_{k},comp_{k}").unwrap();
    }
    h
}

/// Rounds to six significant digits and prints the shortest form of the result.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_csv<W: Write>(series: &TimeSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", header(series.n_converters))?;
    let mut line = String::new();
    for s in &series.samples {
        line.clear();
        write!(
            line,
            "{},{},{},{},{}",
            format_sig6(s.t),
            format_sig6(s.v_pcc),
            format_sig6(s.i_load),
            format_sig6(s.p_load),
            s.mode.code()
        )
        .unwrap();
        for c in &s.converters {
            write!(
                line,
                ",{},{},{},{},{}",
                format_sig6(c.v_ref),
                format_sig6(c.v_term),
                format_sig6(c.i_branch),
                format_sig6(c.p_term),
                format_sig6(c.comp)
            )
            .unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn to_csv_string(series: &TimeSeries) -> String {
    let mut buf = Vec::new();
    write_csv(series, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}
