//! Trace CSV, key=value summaries and certificate files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::oracle::{OracleMethod, SaddleCertificate};
use crate::rapd::TraceRecord;

pub const CSV_COLUMNS: &str = "k,wall_s,i_k,sigma,theta,tau_min,tau_max,t,gap,dist_sq,dy";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Column header and one row per record. `wall_s` is written as 0 unless
/// `wall_clock` is set.
pub fn trace_csv_body(records: &[TraceRecord], wall_clock: bool) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_COLUMNS);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            if wall_clock { r.wall_s } else { 0.0 },
            r.i_k,
            r.sigma,
            r.theta,
            r.tau_min,
            r.tau_max,
            r.t,
            opt(r.gap),
            opt(r.dist_sq),
            opt(r.dy)
        );
    }
    s
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes a `#`-prefixed header (creation time and `header` lines) followed
/// by [`trace_csv_body`].
pub fn write_trace_csv(path: &Path, header: &[String], records: &[TraceRecord], wall_clock: bool) -> Result<()> {
    let mut s = format!("# created_unix = {}\n", unix_time());
    for h in header {
        let _ = writeln!(s, "# {h}");
    }
    s.push_str(&trace_csv_body(records, wall_clock));
    std::fs::write(path, s)?;
    Ok(())
}

/// Drops `#` comment lines.
pub fn strip_csv_header(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

pub fn summary_text(pairs: &[(String, String)]) -> String {
    pairs.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}={v}");
        s
    })
}

pub fn write_summary(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    std::fs::write(path, summary_text(pairs))?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

pub fn certificate_text(c: &SaddleCertificate) -> String {
    summary_text(&[
        ("method".into(), c.method.name().into()),
        ("certified".into(), c.certified.to_string()),
        ("kkt_residual".into(), c.kkt_residual.to_string()),
        ("tolerance".into(), c.tolerance.to_string()),
        ("iterations".into(), c.iterations.to_string()),
        ("x_star".into(), join(&c.x_star)),
        ("y_star".into(), join(&c.y_star)),
    ])
}

pub fn parse_certificate(text: &str) -> Result<SaddleCertificate> {
    let mut get = std::collections::HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("bad certificate line '{line}'")))?;
        get.insert(k.trim().to_string(), v.trim().to_string());
    }
    let field = |k: &str| {
        get.get(k)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("certificate lacks '{k}'")))
    };
    let num = |k: &str| -> Result<f64> {
        field(k)?
            .parse()
            .map_err(|_| Error::Validation(format!("certificate field '{k}' is not a number")))
    };
    let vec = |k: &str| -> Result<Vec<f64>> {
        let v = field(k)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|e| e.parse().map_err(|_| Error::Validation(format!("bad entry in '{k}'"))))
            .collect()
    };
    let method = match field("method")?.as_str() {
        "linear-solve" => OracleMethod::LinearSolve,
        "extragradient" => OracleMethod::Extragradient,
        other => return Err(Error::Validation(format!("unknown oracle method '{other}'"))),
    };
    Ok(SaddleCertificate {
        x_star: vec("x_star")?,
        y_star: vec("y_star")?,
        kkt_residual: num("kkt_residual")?,
        method,
        tolerance: num("tolerance")?,
        certified: field("certified")? == "true",
        iterations: num("iterations")? as usize,
    })
}

pub fn write_certificate(path: &Path, c: &SaddleCertificate) -> Result<()> {
    std::fs::write(path, certificate_text(c))?;
    Ok(())
}

pub fn read_certificate(path: &Path) -> Result<SaddleCertificate> {
    parse_certificate(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize) -> TraceRecord {
        TraceRecord {
            k,
            wall_s: 0.123,
            i_k: 2,
            sigma: 0.5,
            theta: 1.0,
            tau_min: 0.25,
            tau_max: 0.75,
            t: 1.0,
            tau_tilde: 0.0,
            gap: if k == 1 { Some(1e-3) } else { None },
            dist_sq: None,
            dy: Some(0.0),
            weighted_dist: None,
        }
    }

    #[test]
    fn csv_layout() {
        let body = trace_csv_body(&[rec(0), rec(1)], false);
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS);
        assert_eq!(lines[1], "0,0,2,0.5,1,0.25,0.75,1,,,0");
        assert_eq!(lines[2], "1,0,2,0.5,1,0.25,0.75,1,0.001,,0");
        assert!(trace_csv_body(&[rec(0)], true).contains(",0.123,"));
    }

    #[test]
    fn header_is_stripped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace_csv(&p, &["seed = 3".into()], &[rec(0)], false).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# created_unix = "));
        assert_eq!(strip_csv_header(&text), trace_csv_body(&[rec(0)], false));
    }

    #[test]
    fn certificate_round_trip_is_exact() {
        let c = SaddleCertificate {
            x_star: vec![0.1, -1.0 / 3.0, 1e-300],
            y_star: vec![2.0f64.sqrt()],
            kkt_residual: 3.5e-11,
            method: OracleMethod::Extragradient,
            tolerance: 1e-10,
            certified: true,
            iterations: 77,
        };
        let back = parse_certificate(&certificate_text(&c)).unwrap();
        assert_eq!(back.x_star, c.x_star);
        assert_eq!(back.y_star, c.y_star);
        assert_eq!((back.kkt_residual, back.iterations, back.certified), (3.5e-11, 77, true));
        assert!(parse_certificate("method=extragradient\n").is_err());
    }
}
