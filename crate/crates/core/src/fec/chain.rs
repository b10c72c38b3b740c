//! Coded transmission loop and bit-error counting.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::ldpc::{Decoder, LdpcCode};
use super::schedule::{FrameSchedule, Slot};
use crate::constellation::Constellation;
use crate::demapper::Demapper;
use crate::error::{invalid, Error, Result};

/// Post-FEC BER an outer hard-decision code is assumed to clean up.
pub const BER_THRESHOLD: f64 = 5e-5;

/// Information bits needed before a threshold decision is trusted.
pub const MIN_DECISION_BITS: usize = 1_000_000;

/// Noise variance the demapper assumes when no noise is added.
const NOISELESS_DEMAP_SIGMA2: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub max_iters: usize,
    /// Selects the random stream that fills dummy and pad bits, so they can
    /// be resampled with everything else held fixed.
    pub dummy_stream: u64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { max_iters: 50, dummy_stream: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BerReport {
    /// Hard-decision error rate of the demapped (non-punctured) coded bits.
    pub pre_ber: f64,
    pub post_ber: f64,
    pub frames: usize,
    pub info_bits: usize,
    pub info_errors: usize,
    pub coded_bits: usize,
    pub coded_errors: usize,
    /// Frames whose decoder stopped without satisfying every check.
    pub unconverged_frames: usize,
    /// `post_ber < BER_THRESHOLD` with at least [`MIN_DECISION_BITS`] bits.
    pub pass: bool,
}

impl BerReport {
    /// `point` names the first column (`snr_db` or `spans`).
    pub fn csv_header(point: &str) -> String {
        format!("{point},pre_ber,post_ber,frames,info_bits,pass")
    }

    pub fn csv_row(&self, point: &str) -> String {
        format!(
            "{point},{:.6e},{:.6e},{},{},{}",
            self.pre_ber, self.post_ber, self.frames, self.info_bits, self.pass
        )
    }

    /// Standard error of the post-FEC BER under a binomial model.
    pub fn post_ber_stderr(&self) -> f64 {
        let p = self.post_ber;
        (p * (1.0 - p) / self.info_bits.max(1) as f64).sqrt()
    }

    fn from_counts(c: Counts) -> Self {
        let ratio = |e: usize, n: usize| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        let post_ber = ratio(c.info_errors, c.info_bits);
        Self {
            pre_ber: ratio(c.coded_errors, c.coded_bits),
            post_ber,
            frames: c.frames,
            info_bits: c.info_bits,
            info_errors: c.info_errors,
            coded_bits: c.coded_bits,
            coded_errors: c.coded_errors,
            unconverged_frames: c.unconverged,
            pass: c.info_bits >= MIN_DECISION_BITS && post_ber < BER_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    frames: usize,
    info_bits: usize,
    info_errors: usize,
    coded_bits: usize,
    coded_errors: usize,
    unconverged: usize,
}

impl Counts {
    fn add(self, o: Counts) -> Counts {
        Counts {
            frames: self.frames + o.frames,
            info_bits: self.info_bits + o.info_bits,
            info_errors: self.info_errors + o.info_errors,
            coded_bits: self.coded_bits + o.coded_bits,
            coded_errors: self.coded_errors + o.coded_errors,
            unconverged: self.unconverged + o.unconverged,
        }
    }
}

/// Frames needed for `bits` information bits.
pub fn frames_for_info_bits(code: &LdpcCode, bits: usize) -> usize {
    bits.div_ceil(code.k()).max(1)
}

/// Seeded uniform permutation: interleaved bit `j` is code bit `perm[j]`.
pub fn interleaver(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut crate::rng::stream(crate::rng::derive(seed, 0x11), 0));
    perm
}

/// Runs `n_frames` coded frames over AWGN of variance `sigma2` (0 for a
/// noiseless link) with default options.
pub fn run_chain(
    code: &LdpcCode,
    lut: &Constellation,
    schedule: &FrameSchedule,
    sigma2: f64,
    n_frames: usize,
    seed: u64,
) -> Result<BerReport> {
    run_chain_with(code, lut, schedule, sigma2, n_frames, seed, &ChainOptions::default())
}

pub fn run_chain_with(
    code: &LdpcCode,
    lut: &Constellation,
    schedule: &FrameSchedule,
    sigma2: f64,
    n_frames: usize,
    seed: u64,
    opts: &ChainOptions,
) -> Result<BerReport> {
    if lut.m() != schedule.m() {
        return Err(invalid!("LUT has m = {}, schedule has m = {}", lut.m(), schedule.m()));
    }
    if schedule.code_length() != code.n() {
        return Err(invalid!(
            "schedule places {} coded bits, code length is {}",
            schedule.code_length(),
            code.n()
        ));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(invalid!("noise variance must be non-negative, got {sigma2}"));
    }
    if n_frames == 0 {
        return Err(invalid!("need at least one frame"));
    }
    let perm = interleaver(code.n(), seed);
    let demap_sigma2 = if sigma2 > 0.0 { sigma2 } else { NOISELESS_DEMAP_SIGMA2 };
    let base = Demapper::new(lut, demap_sigma2)?;
    let seeds = FrameSeeds {
        info: crate::rng::derive(seed, 0x21),
        dummy: crate::rng::derive(crate::rng::derive(seed, 0x22), opts.dummy_stream),
        noise: crate::rng::derive(seed, 0x23),
    };

    let results: Vec<Result<Counts>> = (0..n_frames)
        .into_par_iter()
        .map_init(
            || (Decoder::new(code), base.clone()),
            |(decoder, demapper), f| {
                run_frame(code, lut, schedule, &perm, sigma2, f as u64, &seeds, opts, decoder, demapper)
            },
        )
        .collect();
    let mut total = Counts::default();
    for r in results {
        total = total.add(r?);
    }
    Ok(BerReport::from_counts(total))
}

struct FrameSeeds {
    info: u64,
    dummy: u64,
    noise: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_frame(
    code: &LdpcCode,
    lut: &Constellation,
    schedule: &FrameSchedule,
    perm: &[usize],
    sigma2: f64,
    frame: u64,
    seeds: &FrameSeeds,
    opts: &ChainOptions,
    decoder: &mut Decoder,
    demapper: &mut Demapper,
) -> Result<Counts> {
    let m = schedule.m();
    let mut info_rng = crate::rng::stream(seeds.info, frame);
    let mut dummy_rng = crate::rng::stream(seeds.dummy, frame);
    let mut noise_rng = crate::rng::stream(seeds.noise, frame);

    let info: Vec<u8> = (0..code.k()).map(|_| info_rng.random_range(0..2u8)).collect();
    let cw = code.encode(&info)?;
    let std = (sigma2 / 2.0).sqrt();

    let mut llr_cw = vec![0.0; code.n()];
    let mut llr_sym = vec![0.0; m];
    let mut counts = Counts { frames: 1, info_bits: code.k(), ..Counts::default() };
    for slots in schedule.slots().chunks(m) {
        let mut label = 0usize;
        for &slot in slots {
            let bit = match slot.coded_index() {
                Some(j) => cw[perm[j]],
                None => dummy_rng.random_range(0..2u8),
            };
            label = (label << 1) | bit as usize;
        }
        let mut y = lut.point(label);
        if sigma2 > 0.0 {
            let n = Complex64::new(
                noise_rng.sample::<f64, _>(rand_distr::StandardNormal),
                noise_rng.sample::<f64, _>(rand_distr::StandardNormal),
            );
            y += n * std;
        }
        demapper.llrs_into(y, &mut llr_sym);
        for (pos, &slot) in slots.iter().enumerate() {
            if let Slot::Coded(j) = slot {
                let l = llr_sym[pos];
                llr_cw[perm[j]] = l;
                counts.coded_bits += 1;
                counts.coded_errors += usize::from(u8::from(l < 0.0) != cw[perm[j]]);
            }
        }
    }
    if llr_cw.iter().any(|l| l.is_nan()) {
        return Err(Error::Numeric(format!("NaN LLR in frame {frame}")));
    }
    let out = decoder.decode(&llr_cw, opts.max_iters)?;
    counts.unconverged = usize::from(!out.converged);
    counts.info_errors = code
        .info_positions()
        .iter()
        .zip(&info)
        .filter(|(&p, &b)| out.bits[p] != b)
        .count();
    Ok(counts)
}
