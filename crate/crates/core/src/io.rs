//! Plain-text file formats.
//!
//! Trajectory files start with a `M T S` header (chains, horizon, state
//! count) followed by `M` lines of `T + 1` space-separated states.
//!
//! Matrix and distribution files start with a line holding `S`, followed by
//! `S` rows (matrix) or one row (distribution) of space-separated decimals
//! written with 17 significant digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Distribution, StochasticMatrix};
use crate::trajectory::TrajectoryMatrix;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_tokens<T: std::str::FromStr>(line_no: usize, line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| parse_err(line_no, format!("invalid value {tok:?}"))))
        .collect()
}

pub fn format_trajectories(data: &TrajectoryMatrix) -> String {
    let mut out = format!("{} {} {}\n", data.chains(), data.horizon(), data.state_count());
    for row in data.rows() {
        let mut first = true;
        for s in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{s}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_trajectories(text: &str) -> Result<TrajectoryMatrix> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty trajectory file"))?;
    let header: Vec<usize> = parse_tokens(hl, header)?;
    let [chains, horizon, states] = header[..] else {
        return Err(parse_err(hl, "header must be `M T S`"));
    };
    let mut data = Vec::with_capacity(chains * (horizon + 1));
    let mut rows = 0;
    for (ln, line) in lines {
        let row: Vec<u32> = parse_tokens(ln, line)?;
        if row.len() != horizon + 1 {
            return Err(parse_err(ln, format!("expected {} states, found {}", horizon + 1, row.len())));
        }
        data.extend(row);
        rows += 1;
    }
    if rows != chains {
        return Err(parse_err(hl, format!("header declares {chains} rows, found {rows}")));
    }
    TrajectoryMatrix::new(chains, horizon, states, data)
}

fn push_row(out: &mut String, row: &[f64]) {
    for (j, w) in row.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        write!(out, "{w:.16e}").unwrap();
    }
    out.push('\n');
}

pub fn format_matrix(p: &StochasticMatrix) -> String {
    let mut out = format!("{}\n", p.size());
    for row in p.rows() {
        push_row(&mut out, row);
    }
    out
}

pub fn format_distribution(d: &Distribution) -> String {
    let mut out = format!("{}\n", d.len());
    push_row(&mut out, d.as_slice());
    out
}

fn parse_size(lines: &mut dyn Iterator<Item = (usize, &str)>) -> Result<(usize, usize)> {
    let (ln, line) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let size = line.parse::<usize>().map_err(|_| parse_err(ln, "first line must be the state count"))?;
    Ok((ln, size))
}

fn parse_row(lines: &mut dyn Iterator<Item = (usize, &str)>, size: usize, last_line: usize) -> Result<Vec<f64>> {
    let (ln, line) = lines.next().ok_or_else(|| parse_err(last_line, "unexpected end of file"))?;
    let row: Vec<f64> = parse_tokens(ln, line)?;
    if row.len() != size {
        return Err(parse_err(ln, format!("expected {size} values, found {}", row.len())));
    }
    Ok(row)
}

/// Parses a matrix block from the front of `lines`, leaving the rest unread.
pub(crate) fn parse_matrix_lines(
    lines: &mut dyn Iterator<Item = (usize, &str)>,
    size: usize,
    line: usize,
) -> Result<StochasticMatrix> {
    let mut data = Vec::with_capacity(size * size);
    for _ in 0..size {
        data.extend(parse_row(lines, size, line)?);
    }
    StochasticMatrix::from_row_major(size, data)
}

pub fn parse_matrix(text: &str) -> Result<StochasticMatrix> {
    let mut lines = content_lines(text);
    let (ln, size) = parse_size(&mut lines)?;
    let p = parse_matrix_lines(&mut lines, size, ln)?;
    if let Some((extra, _)) = lines.next() {
        return Err(parse_err(extra, "trailing content after matrix"));
    }
    Ok(p)
}

pub fn parse_distribution(text: &str) -> Result<Distribution> {
    let mut lines = content_lines(text);
    let (ln, size) = parse_size(&mut lines)?;
    let row = parse_row(&mut lines, size, ln)?;
    if let Some((extra, _)) = lines.next() {
        return Err(parse_err(extra, "trailing content after distribution"));
    }
    Distribution::new(row)
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryMatrix> {
    parse_trajectories(&std::fs::read_to_string(path)?)
}

pub fn write_trajectories(path: impl AsRef<Path>, data: &TrajectoryMatrix) -> Result<()> {
    Ok(std::fs::write(path, format_trajectories(data))?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<StochasticMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, p: &StochasticMatrix) -> Result<()> {
    Ok(std::fs::write(path, format_matrix(p))?)
}

pub fn write_distribution(path: impl AsRef<Path>, d: &Distribution) -> Result<()> {
    Ok(std::fs::write(path, format_distribution(d))?)
}

/// Reads a list of row indices, one integer per line.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(ln, l)| l.parse::<usize>().map_err(|_| parse_err(ln, format!("invalid index {l:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_format_is_exact() {
        let data = TrajectoryMatrix::from_rows(3, vec![vec![0, 1, 2], vec![2, 2, 1]]).unwrap();
        let text = format_trajectories(&data);
        assert_eq!(text, "2 2 3\n0 1 2\n2 2 1\n");
        assert_eq!(parse_trajectories(&text).unwrap(), data);
    }

    #[test]
    fn trajectory_parse_errors() {
        assert!(matches!(parse_trajectories(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_trajectories("1 2\n0 1 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_trajectories("1 2 2\n0 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_trajectories("2 2 2\n0 1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_trajectories("1 2 2\n0 x 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_trajectories("1 2 2\n0 5 0\n"), Err(Error::Domain(_))));
    }

    #[test]
    fn matrix_format_has_17_significant_digits() {
        let p = StochasticMatrix::from_rows(vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![0.1, 0.9]]).unwrap();
        let text = format_matrix(&p);
        let first = text.lines().nth(1).unwrap().split(' ').next().unwrap();
        assert_eq!(first, "3.3333333333333331e-1");
        assert_eq!(parse_matrix(&text).unwrap(), p);

        let d = Distribution::new(vec![0.7, 0.3]).unwrap();
        assert_eq!(parse_distribution(&format_distribution(&d)).unwrap(), d);
    }

    #[test]
    fn matrix_parse_errors() {
        assert!(parse_matrix("2\n0.5 0.5\n").is_err());
        assert!(parse_matrix("2\n0.5 0.5\n0.5 0.5\n1\n").is_err());
        assert!(matches!(parse_matrix("2\n0.5 0.5\n0.5 0.6\n"), Err(Error::NotStochastic(_))));
        assert_eq!(parse_index_list("3\n\n1\n").unwrap(), vec![3, 1]);
        assert!(parse_index_list("-1\n").is_err());
    }
}
