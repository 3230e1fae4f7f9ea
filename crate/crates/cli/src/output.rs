//! File emission. Every file is written to a temporary sibling and renamed
//! into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bkp_core::{PoleState, C64};
use serde::Serialize;

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> std::io::Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// 17 significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(samples: &[PoleState]) -> String {
    let n = samples.first().map_or(0, |s| s.n());
    let mut out = String::from("t");
    for (prefix, i) in ["x", "v"].iter().flat_map(|p| (1..=n).map(move |i| (p, i))) {
        let _ = write!(out, ",re_{prefix}{i},im_{prefix}{i}");
    }
    out.push('\n');
    for s in samples {
        out.push_str(&num(s.t));
        for z in s.x.iter().chain(&s.v) {
            let _ = write!(out, ",{},{}", num(z.re), num(z.im));
        }
        out.push('\n');
    }
    out
}

/// Rows `t, re_lambda, im_lambda, k, re_R, im_R`.
pub fn spectral_csv(rows: &[(f64, C64, usize, C64)]) -> String {
    let mut out = String::from("t,re_lambda,im_lambda,k,re_R,im_R\n");
    for (t, lambda, k, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{k},{},{}",
            num(*t),
            num(lambda.re),
            num(lambda.im),
            num(r.re),
            num(r.im)
        );
    }
    out
}

/// Rows `t, kind, re_lambda, im_lambda, residual`.
pub fn residuals_csv(rows: &[(f64, &str, C64, f64)]) -> String {
    let mut out = String::from("t,kind,re_lambda,im_lambda,residual\n");
    for (t, kind, lambda, r) in rows {
        let _ = writeln!(
            out,
            "{},{kind},{},{},{}",
            num(*t),
            num(lambda.re),
            num(lambda.im),
            num(*r)
        );
    }
    out
}
