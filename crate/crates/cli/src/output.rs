//! CSV and sidecar writers.

use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Shortest representation that round-trips the value rounded to 15
/// significant digits. Plain notation for magnitudes in `[1e-4, 1e15)`,
/// exponent notation otherwise.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{v:.14e}").parse().unwrap();
    if r == 0.0 {
        return "0".into();
    }
    if (1e-4..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Shortest exact round-trip representation, same notation rule as
/// [`fmt_num`]; used for configuration values.
pub fn fmt_exact(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Comma-separated table with a mandatory header and LF line endings.
pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `key=value` lines.
pub fn meta_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.5358e-10), "1.5358e-10");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.666666666666667");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(2e20), "2e20");
        assert_eq!(fmt_exact(1e-8), "1e-8");
        assert_eq!(fmt_exact(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn fifteen_digits_survive() {
        for v in [1.23456789012345e-7, 9.87654321098765, 4.5e300] {
            let back: f64 = fmt_num(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-14 * v.abs());
        }
    }

    #[test]
    fn table_layout() {
        let t = csv_text(&["a".into(), "b".into()], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "a,b\n1,2\n");
        assert_eq!(meta_text(&[("x".into(), "1".into())]), "x=1\n");
    }
}
