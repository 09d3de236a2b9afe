//! Deterministic, atomically written output files.

use std::fs;
use std::io;
use std::path::Path;

use tdosc_core::nalgebra::{Matrix4, Vector4};

/// 17 significant digits: parsing the text reproduces the double exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header shared by every trajectory file.
pub const TRAJECTORY_HEADER: &str = "t,mu_x1,mu_x2,mu_p1,mu_p2,\
sig_x1x1,sig_x1x2,sig_x1p1,sig_x1p2,sig_x2x2,sig_x2p1,sig_x2p2,sig_p1p1,sig_p1p2,sig_p2p2";

/// One CSV row: time, four means, ten upper-triangle covariance entries
/// in row-major order.
pub fn trajectory_row(t: f64, mu: &Vector4<f64>, sigma: &Matrix4<f64>) -> String {
    let mut fields = Vec::with_capacity(15);
    fields.push(fmt_f64(t));
    for i in 0..4 {
        fields.push(fmt_f64(mu[i]));
    }
    for i in 0..4 {
        for j in i..4 {
            fields.push(fmt_f64(sigma[(i, j)]));
        }
    }
    fields.join(",")
}

pub fn trajectory_csv<'a>(
    rows: impl Iterator<Item = (f64, &'a Vector4<f64>, &'a Matrix4<f64>)>,
) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (t, mu, sigma) in rows {
        out.push_str(&trajectory_row(t, mu, sigma));
        out.push('\n');
    }
    out
}

/// Write via a sibling temp file and rename, so a crash never leaves a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
