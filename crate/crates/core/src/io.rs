//! Plain-text output: CSV with fixed 17-significant-digit scientific notation.

use std::fmt::Write;

/// 17 significant digits in scientific notation; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_else(|| "nan".into())
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Table with a single header row.
pub fn table_csv<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let head: Vec<String> = header.iter().map(|h| escape(h.as_ref())).collect();
    out.push_str(&head.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| escape(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Matrix with row and column headers: the corner cell holds `corner`, the
/// first row the column values, the first column the row values.
pub fn matrix_csv(corner: &str, rows: &[f64], cols: &[f64], data: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    out.push_str(&escape(corner));
    for c in cols {
        let _ = write!(out, ",{}", fmt_num(*c));
    }
    out.push('\n');
    for (r, row) in rows.iter().zip(data) {
        out.push_str(&fmt_num(*r));
        for v in row {
            let _ = write!(out, ",{}", fmt_opt(*v));
        }
        out.push('\n');
    }
    out
}

/// Row-major n×n field on a square grid.
pub fn field_csv(corner: &str, points: &[f64], field: &[f64]) -> String {
    let n = points.len();
    let data: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| field[i * n..(i + 1) * n].iter().map(|v| Some(*v)).collect())
        .collect();
    matrix_csv(corner, points, points, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5e-300, std::f64::consts::PI, 1e300, 0.1 + 0.2] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let t = table_csv(&["a", "b,c"], &[vec!["1".into(), "x\"y".into()]]);
        assert_eq!(t, "a,\"b,c\"\n1,\"x\"\"y\"\n");
    }

    #[test]
    fn matrix_layout() {
        let m = matrix_csv("delta\\dk", &[0.0, 1.0], &[2.0], &[vec![Some(3.0)], vec![None]]);
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("delta\\dk,2.0"));
        assert!(lines[2].ends_with(",nan"));
    }
}
