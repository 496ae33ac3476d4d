//! Run-directory summary of the threshold, wavelength and uniformity tables.

use std::fmt::Write as _;
use std::path::Path;

use super::commands::{QE_VS_THRESHOLD, QE_VS_WAVELENGTH, UNIFORMITY};
use super::csv::{fmt_g, Table};
use crate::error::{Error, Result};

pub const REPORT: &str = "report.txt";
pub const SWEEP: &str = "sweep.csv";

fn num(t: &Table, row: &[String], col: &str) -> Result<f64> {
    let k = t
        .column(col)
        .ok_or_else(|| Error::Parse(format!("table has no {col:?} column")))?;
    match row[k].as_str() {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        s => s.parse().map_err(|_| Error::Parse(format!("{col} value {s:?} is not a number"))),
    }
}

/// One line per threshold of a calibration or sweep table.
pub fn threshold_summary(t: &Table) -> Result<String> {
    let mut s = String::new();
    if t.column("eta_corrected").is_some() {
        writeln!(s, "QE versus threshold (absolute, and relative rescaled at the anchor)").expect("string write");
        for r in &t.rows {
            writeln!(
                s,
                "  threshold {:>5}: eta = {} +/- {}, relative {}",
                r[0],
                fmt_g(num(t, r, "eta_corrected")?),
                fmt_g(num(t, r, "sigma_eta")?),
                fmt_g(num(t, r, "qe_relative")?)
            )
            .expect("string write");
        }
    } else {
        writeln!(s, "Click rates versus threshold (per pixel per frame)").expect("string write");
        for r in &t.rows {
            writeln!(
                s,
                "  threshold {:>5}: signal {}, noise {}, snr {}, relative qe {}",
                r[0],
                fmt_g(num(t, r, "signal_rate")?),
                fmt_g(num(t, r, "noise_rate")?),
                fmt_g(num(t, r, "snr")?),
                fmt_g(num(t, r, "qe_relative_unnormalized")?)
            )
            .expect("string write");
        }
    }
    Ok(s.trim_end().to_string())
}

pub fn wavelength_summary(t: &Table) -> Result<String> {
    let mut s = String::from("QE versus DUT wavelength\n");
    for r in &t.rows {
        writeln!(
            s,
            "  reference {} nm -> DUT {} nm: eta = {} +/- {} (configured {})",
            r[0],
            r[1],
            fmt_g(num(t, r, "eta_corrected")?),
            fmt_g(num(t, r, "sigma_eta")?),
            fmt_g(num(t, r, "true_qe")?)
        )
        .expect("string write");
    }
    Ok(s.trim_end().to_string())
}

pub fn uniformity_summary(t: &Table) -> Result<String> {
    let etas = t
        .rows
        .iter()
        .map(|r| num(t, r, "eta_corrected"))
        .collect::<Result<Vec<_>>>()?;
    let n = etas.len() as f64;
    let mean = etas.iter().sum::<f64>() / n;
    let sd = (etas.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = format!(
        "QE uniformity over {} pixels: mean {}, spread {} ({} of the mean)\n",
        etas.len(),
        fmt_g(mean),
        fmt_g(sd),
        fmt_g(sd / mean)
    );
    let mut outliers = 0;
    for r in &t.rows {
        if r[t.column("outlier").expect("uniformity schema")] == "1" {
            outliers += 1;
            writeln!(
                s,
                "  outlier at ({}, {}): eta = {}, z = {}",
                r[0],
                r[1],
                fmt_g(num(t, r, "eta_corrected")?),
                fmt_g(num(t, r, "z_score")?)
            )
            .expect("string write");
        }
    }
    if outliers == 0 {
        s.push_str("  no pixel deviates by more than 3 sigma\n");
    }
    Ok(s.trim_end().to_string())
}

fn section(out: &mut String, title: &str, body: std::result::Result<(String, String), String>) {
    writeln!(out, "== {title} ==").expect("string write");
    match body {
        Ok((file, text)) => writeln!(out, "source: {file}\n{text}\n").expect("string write"),
        Err(missing) => writeln!(out, "missing: {missing}\n").expect("string write"),
    }
}

/// Assemble `report.txt` in `dir` from whichever products are present. Fails,
/// naming all three, when none is.
pub fn report(dir: &Path) -> Result<String> {
    let load = |name: &str| -> Result<Option<Table>> {
        let p = dir.join(name);
        if p.is_file() {
            Table::read(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let threshold = match load(QE_VS_THRESHOLD)? {
        Some(t) => Some((QE_VS_THRESHOLD, t)),
        None => load(SWEEP)?.map(|t| (SWEEP, t)),
    };
    let wavelength = load(QE_VS_WAVELENGTH)?;
    let uniformity = load(UNIFORMITY)?;
    if threshold.is_none() && wavelength.is_none() && uniformity.is_none() {
        return Err(Error::MissingInputs(vec![
            format!("{QE_VS_THRESHOLD} (or {SWEEP})"),
            QE_VS_WAVELENGTH.into(),
            UNIFORMITY.into(),
        ]));
    }
    let mut out = format!("run report for {}\n\n", dir.display());
    section(
        &mut out,
        "QE versus threshold",
        match &threshold {
            Some((f, t)) => Ok((f.to_string(), threshold_summary(t)?)),
            None => Err(format!("{QE_VS_THRESHOLD} (or {SWEEP})")),
        },
    );
    section(
        &mut out,
        "QE versus wavelength",
        match &wavelength {
            Some(t) => Ok((QE_VS_WAVELENGTH.into(), wavelength_summary(t)?)),
            None => Err(QE_VS_WAVELENGTH.into()),
        },
    );
    section(
        &mut out,
        "QE uniformity",
        match &uniformity {
            Some(t) => Ok((UNIFORMITY.into(), uniformity_summary(t)?)),
            None => Err(UNIFORMITY.into()),
        },
    );
    let path = dir.join(REPORT);
    std::fs::write(&path, &out).map_err(|e| Error::io(&path, e))?;
    Ok(out)
}
