//! The shared on-disk formats.
//!
//! Matrix text format: line 1 is the integer `n`; lines 2..n+1 carry `n`
//! whitespace-separated tokens each, a decimal or the token `inf`.
//! Masses file: `n` decimal tokens on one line (an absent file means
//! uniform masses). Index-list file: one integer per line. Values are
//! written with the shortest round-tripping decimal representation, so a
//! write/read cycle is bit-exact.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Provenance};
use crate::scalar::Scalar;
use crate::space::{Layout, PointSpace};

fn parse_entry<T: Scalar>(token: &str, line: usize) -> Result<T> {
    if token == "inf" {
        return Ok(T::infinity());
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(T::from_f64(v).unwrap()),
        _ => Err(Error::Parse {
            line,
            reason: format!("token {token:?} is not a decimal or \"inf\""),
        }),
    }
}

/// Parses the matrix text format. Only the shape is enforced here;
/// symmetry and sign are the business of `kernel::validate`.
pub fn parse_matrix<T: Scalar>(text: &str) -> Result<Kernel<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty file, expected the point count".into(),
    })?;
    let n: usize = header.trim().parse().map_err(|_| Error::Parse {
        line: 1,
        reason: format!("expected the integer point count, got {:?}", header.trim()),
    })?;
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            reason: "point count must be positive".into(),
        });
    }
    let mut values = Vec::with_capacity(n * n);
    for row in 0..n {
        let expected_line = row + 2;
        let Some((idx, line)) = lines.next() else {
            return Err(Error::Parse {
                line: expected_line,
                reason: format!("expected matrix row {} of {n}, found end of file", row + 1),
            });
        };
        let lineno = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected {n} entries, found {}", tokens.len()),
            });
        }
        for t in tokens {
            values.push(parse_entry(t, lineno)?);
        }
    }
    Kernel::from_values(n, values, Provenance::Raw)
}

fn format_entry<T: Scalar>(v: T) -> String {
    if v.is_finite() {
        format!("{}", v.to_f64().unwrap())
    } else {
        "inf".to_string()
    }
}

/// Writes the matrix text format.
pub fn format_matrix<T: Scalar>(kernel: &Kernel<T>) -> String {
    let n = kernel.len();
    let mut out = String::new();
    out.push_str(&n.to_string());
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = kernel.row(i).iter().map(|&v| format_entry(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a masses file: `n` decimal tokens on one line. The layout is
/// `Circle` when every mass equals `1/n` exactly, `Unordered` otherwise.
/// Invariants are not enforced so that bad files can be audited.
pub fn parse_masses<T: Scalar>(text: &str, n: usize) -> Result<PointSpace<T>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != n {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected {n} masses, found {}", tokens.len()),
        });
    }
    let mut masses = Vec::with_capacity(n);
    for t in tokens {
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: 1,
            reason: format!("token {t:?} is not a decimal mass"),
        })?;
        masses.push(T::from_f64(v).unwrap());
    }
    let cell = T::one() / T::from_count(n);
    let layout = if masses.iter().all(|&m| m == cell) {
        Layout::Circle
    } else {
        Layout::Unordered
    };
    Ok(PointSpace::new_unchecked(masses, layout))
}

/// Writes a masses file.
pub fn format_masses<T: Scalar>(space: &PointSpace<T>) -> String {
    let row: Vec<String> = space
        .masses()
        .iter()
        .map(|&m| format!("{}", m.to_f64().unwrap()))
        .collect();
    let mut s = row.join(" ");
    s.push('\n');
    s
}

/// Parses an index-list file: one integer per line, blank lines ignored.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: usize = t.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            reason: format!("token {t:?} is not a point index"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Writes an index-list file.
pub fn format_index_list(indices: &[usize]) -> String {
    let mut s = String::new();
    for &i in indices {
        s.push_str(&i.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let k = Kernel::from_fn(3, Provenance::Raw, |i, j| {
            if i == j {
                0.0
            } else {
                1.0 / (3.0 + i as f64 + j as f64)
            }
        });
        let text = format_matrix(&k);
        let back: Kernel<f64> = parse_matrix(&text).unwrap();
        assert_eq!(k.values(), back.values());
    }

    #[test]
    fn infinity_token_round_trips() {
        let mut k = Kernel::<f64>::zeros(2);
        k.set_sym(0, 1, f64::INFINITY);
        let text = format_matrix(&k);
        assert!(text.contains("inf"));
        let back: Kernel<f64> = parse_matrix(&text).unwrap();
        assert_eq!(back.at(0, 1), f64::INFINITY);
    }

    #[test]
    fn missing_row_cites_the_line() {
        let text = "3\n0 1 2\n1 0 1\n";
        let err = parse_matrix::<f64>(text).unwrap_err();
        match err {
            Error::Parse { line, reason } => {
                assert_eq!(line, 4);
                assert!(reason.contains("row 3"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_row_cites_the_line() {
        let text = "2\n0 1\n1\n";
        let err = parse_matrix::<f64>(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn bad_token_is_rejected() {
        for bad in ["nan", "-inf", "abc", "1.2.3"] {
            let text = format!("2\n0 {bad}\n{bad} 0\n");
            assert!(parse_matrix::<f64>(&text).is_err(), "token {bad}");
        }
    }

    #[test]
    fn negative_entries_parse_for_auditing() {
        let text = "2\n0 -1\n-1 0\n";
        let k: Kernel<f64> = parse_matrix(text).unwrap();
        assert_eq!(k.at(0, 1), -1.0);
    }

    #[test]
    fn masses_layout_detection() {
        let uniform: PointSpace<f64> = parse_masses("0.25 0.25 0.25 0.25\n", 4).unwrap();
        assert_eq!(uniform.layout(), Layout::Circle);
        let skewed: PointSpace<f64> = parse_masses("0.5 0.3 0.1 0.1\n", 4).unwrap();
        assert_eq!(skewed.layout(), Layout::Unordered);
    }

    #[test]
    fn masses_count_mismatch() {
        assert!(parse_masses::<f64>("0.5 0.5", 3).is_err());
    }

    #[test]
    fn index_list_round_trip() {
        let text = format_index_list(&[0, 3, 7]);
        assert_eq!(parse_index_list(&text).unwrap(), vec![0, 3, 7]);
        assert!(parse_index_list("1\nx\n").is_err());
    }
}
