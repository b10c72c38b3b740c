//! Grid arguments: `a,b,c` lists or inclusive `start:stop` and
//! `start:step:stop` ranges.

use crate::failure::{usage, CmdResult};

pub fn parse_f64_grid(text: &str) -> CmdResult<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage!("bad number {t:?} in grid {text:?}"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<CmdResult<Vec<_>>>()?,
        [start, stop] => range(num(start)?, 1.0, num(stop)?, text)?,
        [start, step, stop] => range(num(start)?, num(step)?, num(stop)?, text)?,
        _ => return Err(usage!("grid {text:?} has too many ':' separators")),
    };
    if grid.is_empty() {
        return Err(usage!("empty grid {text:?}"));
    }
    Ok(grid)
}

fn range(start: f64, step: f64, stop: f64, text: &str) -> CmdResult<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(usage!("grid {text:?} needs a positive step and start <= stop"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(usage!("grid {text:?} has too many points"));
    }
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

pub fn parse_span_grid(text: &str) -> CmdResult<Vec<u32>> {
    parse_f64_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(usage!("span counts must be positive integers, got {v} in {text:?}"))
            }
        })
        .collect()
}
