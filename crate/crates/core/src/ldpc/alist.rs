//! MacKay alist format: `n m`, maximum degrees, the column then row degree
//! lists, then one line of 1-based row indices per column and one line of
//! 1-based column indices per row, zero-padded to the maximum degree.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::ParityCheckMatrix;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_numbers(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        loop {
            let Some((i, line)) = self.inner.next() else {
                return Err(Error::Alist {
                    line: self.last + 1,
                    msg: format!("unexpected end of file while reading {what}"),
                });
            };
            self.last = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| Error::Alist {
                        line: i + 1,
                        msg: format!("bad integer {t:?} in {what}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((i + 1, nums));
        }
    }

    fn exact(&mut self, what: &str, count: usize) -> Result<(usize, Vec<usize>)> {
        let (line, nums) = self.next_numbers(what)?;
        if nums.len() != count {
            return Err(Error::Alist {
                line,
                msg: format!("{what}: expected {count} values, found {}", nums.len()),
            });
        }
        Ok((line, nums))
    }
}

/// Reads adjacency lines; entries past the degree must be zero padding.
fn adjacency(
    lines: &mut Lines,
    what: &str,
    degrees: &[usize],
    max_degree: usize,
    bound: usize,
) -> Result<Vec<Vec<usize>>> {
    degrees
        .iter()
        .enumerate()
        .map(|(idx, &deg)| {
            let (line, nums) = lines.next_numbers(what)?;
            if nums.len() < deg || nums.len() > max_degree {
                return Err(Error::Alist {
                    line,
                    msg: format!("{what} {}: expected {deg} indices, found {}", idx + 1, nums.len()),
                });
            }
            if nums[deg..].iter().any(|&v| v != 0) {
                return Err(Error::Alist {
                    line,
                    msg: format!("{what} {}: more nonzero indices than its degree {deg}", idx + 1),
                });
            }
            nums[..deg]
                .iter()
                .map(|&v| {
                    if v == 0 || v > bound {
                        Err(Error::Alist {
                            line,
                            msg: format!("index {v} outside 1..={bound}"),
                        })
                    } else {
                        Ok(v - 1)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (_, dims) = lines.exact("dimensions", 2)?;
    let (n, m) = (dims[0], dims[1]);
    let (_, maxes) = lines.exact("maximum degrees", 2)?;
    let (max_col, max_row) = (maxes[0], maxes[1]);
    let (lc, col_deg) = lines.exact("column degrees", n)?;
    let (lr, row_deg) = lines.exact("row degrees", m)?;
    if col_deg.iter().copied().max().unwrap_or(0) > max_col {
        return Err(Error::Alist {
            line: lc,
            msg: format!("column degree exceeds the declared maximum {max_col}"),
        });
    }
    if row_deg.iter().copied().max().unwrap_or(0) > max_row {
        return Err(Error::Alist {
            line: lr,
            msg: format!("row degree exceeds the declared maximum {max_row}"),
        });
    }
    let cols = adjacency(&mut lines, "column", &col_deg, max_col, m)?;
    let rows = adjacency(&mut lines, "row", &row_deg, max_row, n)?;
    let end = lines.last;
    let h = ParityCheckMatrix::from_rows(n, rows)?;
    for (c, list) in cols.iter().enumerate() {
        let mut sorted = list.clone();
        sorted.sort_unstable();
        if sorted != h.col(c) {
            return Err(Error::Alist {
                line: end,
                msg: format!("column {} list disagrees with the row lists", c + 1),
            });
        }
    }
    Ok(h)
}

pub fn read_alist(path: impl AsRef<Path>) -> Result<ParityCheckMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_alist(&text)
}

pub fn write_alist(h: &ParityCheckMatrix) -> String {
    let col_deg: Vec<usize> = (0..h.cols()).map(|c| h.col(c).len()).collect();
    let row_deg: Vec<usize> = (0..h.rows()).map(|r| h.row(r).len()).collect();
    let max_col = col_deg.iter().copied().max().unwrap_or(0);
    let max_row = row_deg.iter().copied().max().unwrap_or(0);
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let padded = |v: &[usize], width: usize| {
        let mut out: Vec<usize> = v.iter().map(|x| x + 1).collect();
        out.resize(width, 0);
        join(&out)
    };
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", h.cols(), h.rows());
    let _ = writeln!(s, "{max_col} {max_row}");
    let _ = writeln!(s, "{}", join(&col_deg));
    let _ = writeln!(s, "{}", join(&row_deg));
    for c in 0..h.cols() {
        let _ = writeln!(s, "{}", padded(h.col(c), max_col));
    }
    for r in 0..h.rows() {
        let _ = writeln!(s, "{}", padded(h.row(r), max_row));
    }
    s
}
