//! Placement of coded bits into constellation labels.
//!
//! Positions `0 .. m − ⌈n_d⌉` of every symbol carry coded bits. For a
//! fractional `n_d` the next position carries coded bits in a
//! `⌈n_d⌉ − n_d` fraction of the symbols, spread round-robin, and a random
//! bit otherwise. The remaining trailing positions are dummy bits.
//!
//! When that fractional position is itself a dummy position of the
//! constellation (`⌊n_d⌉ = ⌈n_d⌉`), the receiver has nothing to demap there
//! and its coded bits are punctured.

use crate::error::{invalid, Result};

/// What one label bit of one symbol carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Interleaved coded bit `k`, demapped at the receiver.
    Coded(usize),
    /// Interleaved coded bit `k`, transmitted but given LLR 0.
    Punctured(usize),
    /// Random bit, ignored at the receiver.
    Dummy,
    /// Random filler in the last symbols of a frame once every coded bit
    /// has been placed.
    Pad,
}

impl Slot {
    pub fn coded_index(self) -> Option<usize> {
        match self {
            Slot::Coded(k) | Slot::Punctured(k) => Some(k),
            Slot::Dummy | Slot::Pad => None,
        }
    }
}

/// Slot assignment for one codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    m: usize,
    n_d: f64,
    frame_symbols: usize,
    code_length: usize,
    slots: Vec<Slot>,
}

/// Fractional part `⌈n_d⌉ − n_d` on a 10⁻⁶ lattice, so the round-robin
/// pattern is computed in integers.
const FRAC_SCALE: u64 = 1_000_000;

fn frac_units(n_d: f64) -> u64 {
    ((n_d.ceil() - n_d) * FRAC_SCALE as f64).round() as u64
}

/// Whether symbol `s` carries a coded bit at the fractional position.
fn carries_fraction(s: usize, units: u64) -> bool {
    let s = s as u64;
    (s + 1) * units / FRAC_SCALE > s * units / FRAC_SCALE
}

fn check_nd(m: usize, n_d: f64) -> Result<()> {
    crate::data_bits(m, n_d)?;
    if n_d.ceil() as usize >= m && frac_units(n_d) == 0 {
        return Err(invalid!("n_d = {n_d} leaves no coded positions for m = {m}"));
    }
    Ok(())
}

/// Coded-bit capacity of `frame_symbols` symbols.
fn capacity(frame_symbols: usize, m: usize, n_d: f64) -> usize {
    let full = m - n_d.ceil() as usize;
    let units = frac_units(n_d);
    frame_symbols * full + (frame_symbols as u64 * units / FRAC_SCALE) as usize
}

/// Smallest frame holding `n` coded bits.
pub fn frame_symbols_for(m: usize, n_d: f64, n: usize) -> Result<usize> {
    check_nd(m, n_d)?;
    let per_symbol = m as f64 - n_d;
    let mut s = (n as f64 / per_symbol).floor() as usize;
    while capacity(s, m, n_d) < n {
        s += 1;
    }
    while s > 1 && capacity(s - 1, m, n_d) >= n {
        s -= 1;
    }
    Ok(s)
}

/// Assigns coded bits `0 .. n` to slots in symbol-major order.
pub fn build_schedule(frame_symbols: usize, m: usize, n_d: f64, n: usize) -> Result<FrameSchedule> {
    check_nd(m, n_d)?;
    if n == 0 || frame_symbols == 0 {
        return Err(invalid!("frame and code must be non-empty"));
    }
    let cap = capacity(frame_symbols, m, n_d);
    if cap < n {
        return Err(invalid!(
            "{frame_symbols} symbols hold {cap} coded bits at n_d = {n_d}, code needs {n}"
        ));
    }
    if frame_symbols > 1 && capacity(frame_symbols - 1, m, n_d) >= n {
        return Err(invalid!(
            "{frame_symbols} symbols leave a whole symbol idle for a length-{n} code; use {}",
            frame_symbols_for(m, n_d, n)?
        ));
    }
    let full = m - n_d.ceil() as usize;
    let units = frac_units(n_d);
    let punctured = crate::round_nd(n_d) == n_d.ceil() as usize;
    let mut slots = Vec::with_capacity(frame_symbols * m);
    let mut k = 0;
    let mut next = |slots: &mut Vec<Slot>, punct: bool| {
        if k < n {
            slots.push(if punct { Slot::Punctured(k) } else { Slot::Coded(k) });
            k += 1;
        } else {
            slots.push(Slot::Pad);
        }
    };
    for s in 0..frame_symbols {
        for pos in 0..m {
            if pos < full {
                next(&mut slots, false);
            } else if pos == full && units > 0 && carries_fraction(s, units) {
                next(&mut slots, punctured);
            } else {
                slots.push(Slot::Dummy);
            }
        }
    }
    Ok(FrameSchedule { m, n_d, frame_symbols, code_length: n, slots })
}

impl FrameSchedule {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_d(&self) -> f64 {
        self.n_d
    }

    pub fn frame_symbols(&self) -> usize {
        self.frame_symbols
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    /// Symbol-major slots, `m` per symbol.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, symbol: usize, position: usize) -> Slot {
        self.slots[symbol * self.m + position]
    }

    /// Label position that carries coded bits in only some symbols.
    pub fn fractional_position(&self) -> Option<usize> {
        (frac_units(self.n_d) > 0).then(|| self.m - self.n_d.ceil() as usize)
    }

    pub fn count(&self, pred: impl Fn(&Slot) -> bool) -> usize {
        self.slots.iter().filter(|s| pred(s)).count()
    }
}
