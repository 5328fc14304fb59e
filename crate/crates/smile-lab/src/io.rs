//! CSV input/output for return series and vol surfaces.
//!
//! Schemas (exact headers):
//! - returns: `date,close` (log-returns computed on load) or `date,return`
//! - surface: `date,maturity_days,moneyness,implied_vol`
//!
//! Lines starting with `#` before the header carry run metadata and are
//! skipped by the loaders. Numeric columns are written with 12 significant
//! digits; re-parsing and re-writing such a file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::estimators::{MaturitySlice, ReturnSeries, SurfaceSnapshot};

/// 12-significant-digit float formatting used by every emitted table.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.11e}")
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Parse { line, msg: format!("bad ISO-8601 date {s:?}: {e}") })
}

fn parse_f64(s: &str, what: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, msg: format!("bad {what} {s:?}: {e}") })
}

/// Split a CSV body into (header, data lines with original line numbers),
/// skipping `#` metadata lines.
fn csv_lines(content: &str) -> Result<(String, Vec<(usize, String)>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.to_string());
        } else {
            rows.push((line_no, line.to_string()));
        }
    }
    let header = header.ok_or(Error::Parse { line: 0, msg: "file has no header row".into() })?;
    Ok((header, rows))
}

/// Load a return series. `date,close` computes log-returns (the return at a
/// date is ln(close/previous close)); `date,return` takes them verbatim.
/// Duplicate or backwards dates are reported with their line numbers.
pub fn load_returns(path: &Path) -> Result<ReturnSeries> {
    let content = std::fs::read_to_string(path)?;
    let (header, rows) = csv_lines(&content)?;
    let mut dates = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let from_closes = match header.trim() {
        "date,close" => true,
        "date,return" => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header 'date,close' or 'date,return', got {other:?}"),
            })
        }
    };
    for (line, row) in &rows {
        let mut parts = row.split(',');
        let (Some(ds), Some(vs), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse { line: *line, msg: format!("expected 2 columns, got {row:?}") });
        };
        let date = parse_date(ds, *line)?;
        if let Some(prev) = dates.last() {
            if date == *prev {
                return Err(Error::Parse { line: *line, msg: format!("duplicate date {date}") });
            }
            if date < *prev {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("dates not increasing: {prev} then {date}"),
                });
            }
        }
        let v = parse_f64(vs, if from_closes { "close" } else { "return" }, *line)?;
        if from_closes && (!v.is_finite() || v <= 0.0) {
            return Err(Error::Parse { line: *line, msg: format!("close must be > 0, got {v}") });
        }
        dates.push(date);
        values.push(v);
    }
    if from_closes {
        if values.len() < 2 {
            return Err(Error::InsufficientData { required: 2, actual: values.len() });
        }
        let returns: Vec<f64> = values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let rdates = dates[1..].to_vec();
        ReturnSeries::new(rdates, returns, Some(values[1..].to_vec()))
    } else {
        ReturnSeries::new(dates, values, None)
    }
}

/// Write a return series as `date,return` with leading `#` metadata lines.
pub fn save_returns(series: &ReturnSeries, path: &Path, meta: &[String]) -> Result<()> {
    let mut out = String::new();
    for m in meta {
        writeln!(out, "# {m}").unwrap();
    }
    out.push_str("date,return\n");
    for (d, r) in series.dates().iter().zip(series.returns()) {
        writeln!(out, "{d},{}", fmt_g12(*r)).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a surface time series grouped by date and maturity. Rejects negative
/// vols (with the offending line), unsorted inputs and thin slices.
pub fn load_surface(path: &Path) -> Result<Vec<SurfaceSnapshot>> {
    let content = std::fs::read_to_string(path)?;
    let (header, rows) = csv_lines(&content)?;
    if header.trim() != "date,maturity_days,moneyness,implied_vol" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header 'date,maturity_days,moneyness,implied_vol', got {header:?}"),
        });
    }
    let mut snapshots: Vec<SurfaceSnapshot> = Vec::new();
    for (line, row) in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Parse { line: *line, msg: format!("expected 4 columns, got {row:?}") });
        }
        let date = parse_date(cols[0], *line)?;
        let maturity: u32 = cols[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse { line: *line, msg: format!("bad maturity {:?}: {e}", cols[1]) })?;
        let m = parse_f64(cols[2], "moneyness", *line)?;
        let vol = parse_f64(cols[3], "implied_vol", *line)?;
        if !vol.is_finite() || vol <= 0.0 {
            return Err(Error::Parse { line: *line, msg: format!("implied vol must be > 0, got {vol}") });
        }
        let snap = match snapshots.last_mut() {
            Some(s) if s.date == date => s,
            Some(s) if s.date > date => {
                return Err(Error::Parse { line: *line, msg: format!("dates not sorted at {date}") })
            }
            _ => {
                snapshots.push(SurfaceSnapshot { date, slices: Vec::new() });
                snapshots.last_mut().unwrap()
            }
        };
        match snap.slices.last_mut() {
            Some(sl) if sl.maturity_days == maturity => sl.points.push((m, vol)),
            Some(sl) if sl.maturity_days > maturity => {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("maturities not sorted at {date} T={maturity}"),
                })
            }
            _ => snap.slices.push(MaturitySlice { maturity_days: maturity, points: vec![(m, vol)] }),
        }
    }
    if snapshots.is_empty() {
        return Err(Error::Parse { line: 0, msg: "surface file has no data rows".into() });
    }
    for s in &snapshots {
        s.validate()?;
    }
    Ok(snapshots)
}

/// Write a surface time series in the loader's schema.
pub fn save_surface(snapshots: &[SurfaceSnapshot], path: &Path, meta: &[String]) -> Result<()> {
    let mut out = String::new();
    for m in meta {
        writeln!(out, "# {m}").unwrap();
    }
    out.push_str("date,maturity_days,moneyness,implied_vol\n");
    for s in snapshots {
        for sl in &s.slices {
            for (m, v) in &sl.points {
                writeln!(out, "{},{},{},{}", s.date, sl.maturity_days, fmt_g12(*m), fmt_g12(*v)).unwrap();
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("smile-lab-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn closes_become_log_returns() {
        let p = tmp("closes.csv");
        std::fs::write(&p, "date,close\n2020-01-01,100\n2020-01-02,101\n").unwrap();
        let s = load_returns(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.returns()[0] - (1.01f64).ln()).abs() < 1e-15);
        assert_eq!(s.dates()[0], NaiveDate::from_ymd_opt(2020, 1, 2).unwrap());
    }

    #[test]
    fn duplicate_date_is_named() {
        let p = tmp("dup.csv");
        std::fs::write(&p, "date,return\n2020-01-01,0.01\n2020-01-01,0.02\n").unwrap();
        match load_returns(&p) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("2020-01-01"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_dates_are_listed() {
        let p = tmp("mono.csv");
        std::fs::write(&p, "date,return\n2020-01-05,0.01\n2020-01-02,0.02\n").unwrap();
        assert!(matches!(load_returns(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let p1 = tmp("rt1.csv");
        let p2 = tmp("rt2.csv");
        let n = 20_000;
        let returns: Vec<f64> = (0..n).map(|i| 0.01 * ((i as f64 * 0.37).sin() + 1e-7 * i as f64)).collect();
        let s =
            ReturnSeries::from_returns(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), returns).unwrap();
        let meta = vec!["tool: test".to_string()];
        save_returns(&s, &p1, &meta).unwrap();
        let loaded = load_returns(&p1).unwrap();
        save_returns(&loaded, &p2, &meta).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn minimal_surface_round_trips() {
        let p = tmp("surf.csv");
        std::fs::write(
            &p,
            "date,maturity_days,moneyness,implied_vol\n\
             2020-01-01,30,-0.2,0.21\n2020-01-01,30,0,0.2\n2020-01-01,30,0.2,0.19\n",
        )
        .unwrap();
        let s = load_surface(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].slices.len(), 1);
        assert_eq!(s[0].slices[0].points.len(), 3);
        let p2 = tmp("surf2.csv");
        save_surface(&s, &p2, &[]).unwrap();
        let s2 = load_surface(&p2).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn negative_vol_is_rejected_with_row() {
        let p = tmp("negvol.csv");
        std::fs::write(
            &p,
            "date,maturity_days,moneyness,implied_vol\n\
             2020-01-01,30,-0.2,0.21\n2020-01-01,30,0,-0.1\n2020-01-01,30,0.2,0.19\n",
        )
        .unwrap();
        assert!(matches!(load_surface(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn thin_slice_is_rejected() {
        let p = tmp("thin.csv");
        std::fs::write(
            &p,
            "date,maturity_days,moneyness,implied_vol\n2020-01-01,30,0,0.2\n2020-01-01,30,0.1,0.2\n",
        )
        .unwrap();
        assert!(matches!(load_surface(&p), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn metadata_lines_are_skipped() {
        let p = tmp("meta.csv");
        std::fs::write(&p, "# tool: x\n# seed: 5\ndate,return\n2020-01-01,0.01\n2020-01-02,-0.02\n")
            .unwrap();
        assert_eq!(load_returns(&p).unwrap().len(), 2);
    }

    #[test]
    fn fmt_g12_is_parse_stable() {
        for &x in &[1.0, -0.0123456789, 3.14159e-7, 8.8e17, 0.01 * (0.37f64).sin()] {
            let s = fmt_g12(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(fmt_g12(y), s);
        }
    }

    #[test]
    fn wrong_header_is_an_error() {
        let p = tmp("hdr.csv");
        std::fs::write(&p, "date,price\n2020-01-01,100\n").unwrap();
        assert!(matches!(load_returns(&p), Err(Error::Parse { line: 1, .. })));
    }
}
