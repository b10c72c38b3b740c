//! Bitwise Gaussian demapper.
//!
//! Posteriors assume a uniform symbol prior and circular Gaussian noise of
//! variance `σ²`:
//!
//! ```text
//! p(u_i = b | y) ∝ Σ_{x : bit i of label(x) = b} exp(−|y − x|² / σ²)
//! ```
//!
//! LLRs are `L_i = ln p(u_i = 0 | y) − ln p(u_i = 1 | y)`; a positive LLR
//! favours bit 0. The LDPC decoder uses the same convention.

use num_complex::Complex64;

use crate::constellation::Constellation;
use crate::error::{invalid, Result};
use crate::neuralnet::sigmoid;

/// Per-sample bit posteriors, one entry per label position.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPosteriors {
    /// `p(u_i = 1 | y)`
    pub p_one: Vec<f64>,
    /// `ln[p(u_i = 0 | y) / p(u_i = 1 | y)]`
    pub llr: Vec<f64>,
}

impl BitPosteriors {
    pub fn from_llrs(llr: Vec<f64>) -> Self {
        let p_one = llr.iter().map(|&l| sigmoid(-l)).collect();
        Self { p_one, llr }
    }

    pub fn len(&self) -> usize {
        self.llr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llr.is_empty()
    }

    /// Posterior of bit value `b` at position `i`.
    pub fn prob(&self, i: usize, b: u8) -> f64 {
        if b == 0 {
            1.0 - self.p_one[i]
        } else {
            self.p_one[i]
        }
    }

    /// Keeps the leading `m − ⌊n_d⌉` positions; dummy positions are
    /// never demapped at the receiver.
    pub fn data_bit_view(&self, n_d: f64) -> Result<BitPosteriors> {
        let keep = crate::data_bits(self.len(), n_d)?;
        Ok(BitPosteriors {
            p_one: self.p_one[..keep].to_vec(),
            llr: self.llr[..keep].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemapMode {
    /// Exact marginalization over all points.
    #[default]
    Exact,
    /// Max-log approximation: each sum replaced by its largest term.
    MaxLog,
}

/// Demapper bound to one constellation and noise variance.
#[derive(Debug, Clone)]
pub struct Demapper {
    m: usize,
    points: Vec<Complex64>,
    inv_sigma2: f64,
    mode: DemapMode,
    metrics: Vec<f64>,
    weights: Vec<f64>,
}

impl Demapper {
    pub fn new(c: &Constellation, sigma2: f64) -> Result<Self> {
        Self::with_mode(c, sigma2, DemapMode::Exact)
    }

    pub fn with_mode(c: &Constellation, sigma2: f64, mode: DemapMode) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(invalid!("noise variance must be positive, got {sigma2}"));
        }
        Ok(Self {
            m: c.m(),
            points: c.points().to_vec(),
            inv_sigma2: sigma2.recip(),
            mode,
            metrics: vec![0.0; c.len()],
            weights: vec![0.0; c.len()],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Writes the `m` LLRs of sample `y` into `out`.
    pub fn llrs_into(&mut self, y: Complex64, out: &mut [f64]) {
        let m = self.m;
        let mut best = f64::NEG_INFINITY;
        for (d, x) in self.metrics.iter_mut().zip(&self.points) {
            *d = -(y - x).norm_sqr() * self.inv_sigma2;
            best = best.max(*d);
        }
        match self.mode {
            DemapMode::MaxLog => {
                for (i, o) in out.iter_mut().enumerate().take(m) {
                    let shift = m - 1 - i;
                    let (mut b0, mut b1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                    for (k, &d) in self.metrics.iter().enumerate() {
                        if (k >> shift) & 1 == 0 {
                            b0 = b0.max(d);
                        } else {
                            b1 = b1.max(d);
                        }
                    }
                    *o = b0 - b1;
                }
            }
            DemapMode::Exact => {
                for (w, &d) in self.weights.iter_mut().zip(&self.metrics) {
                    *w = (d - best).exp();
                }
                for (i, o) in out.iter_mut().enumerate().take(m) {
                    let shift = m - 1 - i;
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for (k, &w) in self.weights.iter().enumerate() {
                        if (k >> shift) & 1 == 0 {
                            s0 += w;
                        } else {
                            s1 += w;
                        }
                    }
                    *o = if s0 > f64::MIN_POSITIVE && s1 > f64::MIN_POSITIVE {
                        s0.ln() - s1.ln()
                    } else {
                        // One side underflowed against the global maximum;
                        // fall back to a per-side log-sum-exp.
                        self.side_lse(shift, 0) - self.side_lse(shift, 1)
                    };
                }
            }
        }
    }

    fn side_lse(&self, shift: usize, bit: usize) -> f64 {
        let side = || {
            self.metrics
                .iter()
                .enumerate()
                .filter(move |(k, _)| (k >> shift) & 1 == bit)
                .map(|(_, &d)| d)
        };
        let top = side().fold(f64::NEG_INFINITY, f64::max);
        top + side().map(|d| (d - top).exp()).sum::<f64>().ln()
    }

    pub fn posteriors(&mut self, y: Complex64) -> BitPosteriors {
        let mut llr = vec![0.0; self.m];
        self.llrs_into(y, &mut llr);
        BitPosteriors::from_llrs(llr)
    }
}

/// Exact bit posteriors of one received sample.
pub fn posteriors(y: Complex64, c: &Constellation, sigma2: f64) -> Result<BitPosteriors> {
    Ok(Demapper::new(c, sigma2)?.posteriors(y))
}

/// Elementwise [`posteriors`] over a sequence of samples.
pub fn posteriors_batch(ys: &[Complex64], c: &Constellation, sigma2: f64) -> Result<Vec<BitPosteriors>> {
    let mut d = Demapper::new(c, sigma2)?;
    Ok(ys.iter().map(|&y| d.posteriors(y)).collect())
}
