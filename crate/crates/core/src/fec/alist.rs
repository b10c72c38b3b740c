//! Reading and writing the alist sparse-matrix format.
//!
//! Layout, one item per line:
//!
//! ```text
//! n m
//! max_col_weight max_row_weight
//! col_weight_1 … col_weight_n
//! row_weight_1 … row_weight_m
//! n lines: 1-based check indices of each column (zero padded)
//! m lines: 1-based variable indices of each row (zero padded)
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Row and column adjacency of a parity-check matrix, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseH {
    pub n: usize,
    /// `checks[c]` lists the variable nodes of check `c`, ascending.
    pub checks: Vec<Vec<usize>>,
}

impl SparseH {
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    /// Entry `v` lists the checks of variable `v`, ascending.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n];
        for (c, row) in self.checks.iter().enumerate() {
            for &v in row {
                cols[v].push(c);
            }
        }
        cols
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { iter: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line as integers, with its 1-based number.
    fn next(&mut self, section: &str) -> Result<(usize, Vec<usize>)> {
        for (i, line) in self.iter.by_ref() {
            self.last = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("{section}: not a non-negative integer: {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((i + 1, nums));
        }
        Err(Error::Parse {
            line: self.last + 1,
            msg: format!("truncated file: missing {section}"),
        })
    }

    fn rest_is_blank(&mut self) -> Option<usize> {
        self.iter
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, _)| i + 1)
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn expect_len(line: usize, nums: &[usize], want: usize, section: &str) -> Result<()> {
    if nums.len() != want {
        return Err(perr(line, format!("{section}: expected {want} values, found {}", nums.len())));
    }
    Ok(())
}

/// Parses and cross-checks an alist file.
pub fn parse_alist(text: &str) -> Result<SparseH> {
    let mut lines = Lines::new(text);
    let (ln, dims) = lines.next("dimensions")?;
    expect_len(ln, &dims, 2, "dimensions")?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(perr(ln, "dimensions must be positive"));
    }
    let (ln, maxw) = lines.next("maximum degrees")?;
    expect_len(ln, &maxw, 2, "maximum degrees")?;
    let (ln_cw, col_w) = lines.next("column degrees")?;
    expect_len(ln_cw, &col_w, n, "column degrees")?;
    let (ln_rw, row_w) = lines.next("row degrees")?;
    expect_len(ln_rw, &row_w, m, "row degrees")?;
    if col_w.iter().max() != Some(&maxw[0]) || row_w.iter().max() != Some(&maxw[1]) {
        return Err(perr(ln, "maximum degrees disagree with the degree lists"));
    }

    let mut read_lists = |count: usize, weights: &[usize], bound: usize, what: &str| {
        let mut lists = Vec::with_capacity(count);
        for (j, &w) in weights.iter().enumerate() {
            let section = format!("{what} list {}", j + 1);
            let (ln, nums) = lines.next(&section)?;
            let mut entries: Vec<usize> = nums.iter().copied().filter(|&x| x != 0).collect();
            if nums[entries.len()..].iter().any(|&x| x != 0) || nums[..entries.len()].contains(&0) {
                return Err(perr(ln, format!("{section}: zero padding must trail the indices")));
            }
            if entries.len() != w {
                return Err(perr(
                    ln,
                    format!("{section}: degree {w} declared, {} indices listed", entries.len()),
                ));
            }
            if let Some(&bad) = entries.iter().find(|&&x| x > bound) {
                return Err(perr(ln, format!("{section}: index {bad} out of range 1..={bound}")));
            }
            entries.iter_mut().for_each(|x| *x -= 1);
            entries.sort_unstable();
            if entries.windows(2).any(|p| p[0] == p[1]) {
                return Err(perr(ln, format!("{section}: duplicate edge")));
            }
            lists.push((ln, entries));
        }
        Ok::<_, Error>(lists)
    };
    let cols = read_lists(n, &col_w, m, "column")?;
    let rows = read_lists(m, &row_w, n, "row")?;
    if let Some(ln) = lines.rest_is_blank() {
        return Err(perr(ln, "unexpected content after the row lists"));
    }

    let h = SparseH { n, checks: rows.iter().map(|(_, r)| r.clone()).collect() };
    for (v, (col, (ln, listed))) in h.columns().iter().zip(&cols).enumerate() {
        if col != listed {
            return Err(perr(*ln, format!("column {} disagrees with the row lists", v + 1)));
        }
    }
    Ok(h)
}

/// Writes `h` in alist layout with zero padding.
pub fn to_alist(h: &SparseH) -> String {
    let cols = h.columns();
    let max_c = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_r = h.checks.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    let join = |it: &mut dyn Iterator<Item = usize>| {
        it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(out, "{} {}", h.n, h.m());
    let _ = writeln!(out, "{max_c} {max_r}");
    let _ = writeln!(out, "{}", join(&mut cols.iter().map(Vec::len)));
    let _ = writeln!(out, "{}", join(&mut h.checks.iter().map(Vec::len)));
    for (lists, width) in [(&cols, max_c), (&h.checks, max_r)] {
        for l in lists.iter() {
            let padded = l.iter().map(|x| x + 1).chain(std::iter::repeat(0)).take(width);
            let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
        }
    }
    out
}
