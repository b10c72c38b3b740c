//! Masked cross-entropy cost and GMI estimation.
//!
//! Both quantities are built on the per-bit cross-entropy
//! `−log₂ p(u_i | y)` of the transmitted bit value, with the posterior floored
//! at [`PROB_FLOOR`]. With identical posteriors and no masking,
//! `GMI = m · (1 − cost)` holds exactly.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_lin, lin_to_db};
use crate::constellation::Constellation;
use crate::demapper::{BitPosteriors, Demapper};
use crate::error::{invalid, Error, Result};

/// Smallest posterior probability entering a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Below this many symbols a report is flagged as statistically thin.
pub const MIN_REPORT_SYMBOLS: usize = 10_000;

const SHARD_SYMBOLS: usize = 1 << 14;

/// `−log₂ p(u = bit | y)` from an LLR (positive favours 0), floored.
#[inline]
pub fn bit_cross_entropy(llr: f64, bit: u8) -> f64 {
    // −ln p(0) = ln(1 + e^{−L}), −ln p(1) = ln(1 + e^{L})
    let s = if bit == 0 { -llr } else { llr };
    let nats = if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    };
    (nats / std::f64::consts::LN_2).min(-PROB_FLOOR.log2())
}

/// Masked binary cross-entropy in bits: the mean over the leading
/// `m − ⌊n_d⌉` label positions of `mean_k[−log₂ p(u_k^i | y_k)]`.
pub fn masked_bce_cost(
    posteriors: &[BitPosteriors],
    labels: &[usize],
    m: usize,
    n_d: f64,
) -> Result<f64> {
    if posteriors.is_empty() {
        return Err(invalid!("empty posterior batch"));
    }
    if posteriors.len() != labels.len() {
        return Err(invalid!(
            "{} posteriors for {} labels",
            posteriors.len(),
            labels.len()
        ));
    }
    let data = crate::data_bits(m, n_d)?;
    let mut per_bit = vec![0.0; data];
    for (bp, &label) in posteriors.iter().zip(labels) {
        if bp.len() != m {
            return Err(invalid!("posterior has {} positions, expected {m}", bp.len()));
        }
        for (i, acc) in per_bit.iter_mut().enumerate() {
            *acc += bit_cross_entropy(bp.llr[i], Constellation::label_bit(m, label, i));
        }
    }
    let n = posteriors.len() as f64;
    Ok(per_bit.iter().map(|s| s / n).sum::<f64>() / data as f64)
}

/// Monte Carlo GMI at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmiReport {
    pub m: usize,
    /// Per-position GMI clamped to `[0, 1]`.
    pub per_bit_gmi: Vec<f64>,
    /// Per-position GMI before clamping.
    pub per_bit_raw: Vec<f64>,
    /// Leading positions summed into `total_gmi`.
    pub data_bits: usize,
    pub total_gmi: f64,
    pub stderr: f64,
    pub sample_count: usize,
    pub sigma2: f64,
    pub seed: u64,
    /// Set when any per-bit value had to be clamped.
    pub clamped: bool,
    /// Set when fewer than [`MIN_REPORT_SYMBOLS`] symbols were simulated.
    pub low_sample_warning: bool,
    /// Sample covariance of the per-symbol per-bit information terms,
    /// row-major `m × m`; used for standard errors of weighted sums.
    covariance: Vec<f64>,
}

impl GmiReport {
    pub fn snr_db(&self) -> f64 {
        lin_to_db(1.0 / self.sigma2)
    }

    /// `Σ w_i GMI_i` over the clamped per-bit values, with the standard
    /// error taken from the covariance of the raw per-symbol terms.
    pub fn weighted_total(&self, weights: &[f64]) -> (f64, f64) {
        let m = self.m;
        let value = weights
            .iter()
            .zip(&self.per_bit_gmi)
            .map(|(w, g)| w * g)
            .sum();
        let mut var = 0.0;
        for i in 0..m.min(weights.len()) {
            for j in 0..m.min(weights.len()) {
                var += weights[i] * weights[j] * self.covariance[i * m + j];
            }
        }
        (value, (var.max(0.0) / self.sample_count as f64).sqrt())
    }

    pub fn csv_header(m: usize) -> String {
        let mut cols = vec!["snr_db".to_string(), "total_gmi".to_string()];
        cols.extend((1..=m).map(|i| format!("gmi_bit_{i}")));
        cols.extend(["stderr", "n_symbols", "seed"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![fmt_f(self.snr_db()), fmt_f(self.total_gmi)];
        cols.extend(self.per_bit_gmi.iter().map(|&g| fmt_f(g)));
        cols.push(fmt_f(self.stderr));
        cols.push(self.sample_count.to_string());
        cols.push(self.seed.to_string());
        cols.join(",")
    }
}

/// Fixed-precision float formatting shared by all CSV writers.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

/// Running sums of the per-symbol information terms `t_i = 1 − CE_i`.
#[derive(Debug, Clone)]
struct BitStats {
    m: usize,
    n: usize,
    sum: Vec<f64>,
    cross: Vec<f64>,
}

impl BitStats {
    fn new(m: usize) -> Self {
        Self {
            m,
            n: 0,
            sum: vec![0.0; m],
            cross: vec![0.0; m * m],
        }
    }

    fn push(&mut self, llr: &[f64], label: usize, scratch: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            scratch[i] = 1.0 - bit_cross_entropy(llr[i], Constellation::label_bit(m, label, i));
            self.sum[i] += scratch[i];
        }
        for i in 0..m {
            for j in i..m {
                self.cross[i * m + j] += scratch[i] * scratch[j];
            }
        }
        self.n += 1;
    }

    fn merge(mut self, other: &BitStats) -> Self {
        self.n += other.n;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
        self
    }

    fn report(&self, data_bits: usize, sigma2: f64, seed: u64) -> GmiReport {
        let m = self.m;
        let n = self.n as f64;
        let per_bit_raw: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let per_bit_gmi: Vec<f64> = per_bit_raw.iter().map(|g| g.clamp(0.0, 1.0)).collect();
        let clamped = per_bit_raw.iter().any(|g| !(0.0..=1.0).contains(g));
        if clamped {
            log::debug!("GMI per-bit estimates clamped to [0, 1]: {per_bit_raw:?}");
        }
        let mut covariance = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let c = self.cross[i * m + j] / n - per_bit_raw[i] * per_bit_raw[j];
                covariance[i * m + j] = c;
                covariance[j * m + i] = c;
            }
        }
        let total_gmi = per_bit_gmi[..data_bits].iter().sum();
        let mut report = GmiReport {
            m,
            per_bit_gmi,
            per_bit_raw,
            data_bits,
            total_gmi,
            stderr: 0.0,
            sample_count: self.n,
            sigma2,
            seed,
            clamped,
            low_sample_warning: self.n < MIN_REPORT_SYMBOLS,
            covariance,
        };
        let weights: Vec<f64> = (0..m).map(|i| if i < data_bits { 1.0 } else { 0.0 }).collect();
        report.stderr = report.weighted_total(&weights).1;
        report
    }
}

/// GMI computed from an existing posterior batch. Shares the per-bit
/// cross-entropy with [`masked_bce_cost`].
pub fn gmi_from_posteriors(
    posteriors: &[BitPosteriors],
    labels: &[usize],
    m: usize,
    n_d: f64,
    sigma2: f64,
) -> Result<GmiReport> {
    if posteriors.is_empty() || posteriors.len() != labels.len() {
        return Err(invalid!("posterior and label batches must be non-empty and equal length"));
    }
    let data = crate::data_bits(m, n_d)?;
    let mut stats = BitStats::new(m);
    let mut scratch = vec![0.0; m];
    for (bp, &label) in posteriors.iter().zip(labels) {
        stats.push(&bp.llr, label, &mut scratch);
    }
    Ok(stats.report(data, sigma2, 0))
}

/// Monte Carlo GMI of `c` over an AWGN channel of variance `sigma2`, using
/// the exact Gaussian demapper. `n_d` restricts the total to the leading
/// data positions; per-bit values are always reported for all positions.
///
/// Symbols are simulated in shards of fixed size, each from its own random
/// stream, so the result is independent of thread scheduling.
pub fn gmi_estimate(
    c: &Constellation,
    sigma2: f64,
    n_symbols: usize,
    seed: u64,
    n_d: f64,
) -> Result<GmiReport> {
    let data = crate::data_bits(c.m(), n_d)?;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid!("noise variance must be positive, got {sigma2}"));
    }
    if n_symbols == 0 {
        return Err(invalid!("need at least one symbol"));
    }
    let m = c.m();
    let shards = n_symbols.div_ceil(SHARD_SYMBOLS);
    let partial: Vec<BitStats> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let count = SHARD_SYMBOLS.min(n_symbols - s * SHARD_SYMBOLS);
            let mut rng = crate::rng::stream(seed, s as u64);
            let mut demapper = Demapper::new(c, sigma2).expect("validated sigma2");
            let mut stats = BitStats::new(m);
            let mut llr = vec![0.0; m];
            let mut scratch = vec![0.0; m];
            let std = (sigma2 / 2.0).sqrt();
            for _ in 0..count {
                let label = rng.random_range(0..c.len());
                let n = Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                );
                let y = c.point(label) + n * std;
                demapper.llrs_into(y, &mut llr);
                stats.push(&llr, label, &mut scratch);
            }
            stats
        })
        .collect();
    let total = partial
        .iter()
        .fold(BitStats::new(m), |acc, s| acc.merge(s));
    let report = total.report(data, sigma2, seed);
    if report.low_sample_warning {
        log::warn!("GMI estimated from only {n_symbols} symbols");
    }
    Ok(report)
}

/// [`gmi_estimate`] over a grid of SNRs (dB) with common random numbers.
pub fn gmi_vs_snr_curve(
    c: &Constellation,
    snr_db: &[f64],
    n_symbols: usize,
    seed: u64,
    n_d: f64,
) -> Result<Vec<GmiReport>> {
    if snr_db.is_empty() {
        return Err(invalid!("empty SNR grid"));
    }
    snr_db
        .iter()
        .map(|&s| gmi_estimate(c, 1.0 / db_to_lin(s), n_symbols, seed, n_d))
        .collect()
}

/// Guard used by callers that must refuse a diverged estimate.
pub fn ensure_finite(report: &GmiReport) -> Result<()> {
    if report.per_bit_raw.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("non-finite GMI estimate".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn certain(bits: &[u8]) -> BitPosteriors {
        BitPosteriors::from_llrs(bits.iter().map(|&b| if b == 0 { 800.0 } else { -800.0 }).collect())
    }

    #[test]
    fn cost_of_certain_posteriors_is_zero() {
        let labels = [0usize, 5, 9, 15];
        let bp: Vec<_> = labels
            .iter()
            .map(|&l| certain(&Constellation::brgc_qam(4).unwrap().label_bits(l)))
            .collect();
        assert_eq!(masked_bce_cost(&bp, &labels, 4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cost_of_uniform_posteriors_is_one_bit() {
        let bp = vec![BitPosteriors::from_llrs(vec![0.0; 4]); 3];
        let c = masked_bce_cost(&bp, &[1, 2, 3], 4, 0.0).unwrap();
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dummy_positions_are_masked() {
        let labels = [3usize, 200, 77];
        let bp: Vec<_> = labels
            .iter()
            .map(|&l| {
                let bits: Vec<u8> = (0..8).map(|i| Constellation::label_bit(8, l, i)).collect();
                let mut llr = certain(&bits).llr;
                llr[6] = 0.0;
                llr[7] = 0.0;
                BitPosteriors::from_llrs(llr)
            })
            .collect();
        assert_eq!(masked_bce_cost(&bp, &labels, 8, 2.0).unwrap(), 0.0);
        assert!(masked_bce_cost(&bp, &labels, 8, 0.0).unwrap() > 0.2);
    }

    #[test]
    fn cost_errors() {
        let bp = vec![BitPosteriors::from_llrs(vec![0.0; 4])];
        assert!(masked_bce_cost(&bp, &[0], 4, 3.6).is_err());
        assert!(masked_bce_cost(&[], &[], 4, 0.0).is_err());
        assert!(masked_bce_cost(&bp, &[0, 1], 4, 0.0).is_err());
    }

    #[test]
    fn floor_caps_the_penalty() {
        assert_abs_diff_eq!(bit_cross_entropy(-1e4, 0), -PROB_FLOOR.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(bit_cross_entropy(0.0, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_gmi_saturates() {
        let c = Constellation::brgc_qam(4).unwrap();
        let r = gmi_estimate(&c, 1e-6, 20_000, 1, 0.0).unwrap();
        assert_abs_diff_eq!(r.total_gmi, 4.0, epsilon = 1e-9);
        assert!(!r.low_sample_warning);
    }

    #[test]
    fn report_is_reproducible_and_consistent() {
        let c = Constellation::brgc_qam(6).unwrap();
        let a = gmi_estimate(&c, 0.05, 30_000, 7, 0.0).unwrap();
        let b = gmi_estimate(&c, 0.05, 30_000, 7, 0.0).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.total_gmi, a.per_bit_gmi.iter().sum::<f64>(), epsilon = 1e-12);
        assert!(a.stderr > 0.0);
        assert!(a.total_gmi <= 6.0);
        let small = gmi_estimate(&c, 0.05, 100, 7, 0.0).unwrap();
        assert!(small.low_sample_warning);
    }

    #[test]
    fn data_view_total_only_sums_leading_bits() {
        let c = Constellation::brgc_qam(8).unwrap();
        let r = gmi_estimate(&c, 0.02, 20_000, 3, 2.0).unwrap();
        assert_eq!(r.data_bits, 6);
        assert_eq!(r.per_bit_gmi.len(), 8);
        assert_abs_diff_eq!(r.total_gmi, r.per_bit_gmi[..6].iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn duality_with_cost() {
        let c = Constellation::brgc_qam(4).unwrap();
        let sigma2 = 0.1;
        let labels: Vec<usize> = (0..2000).map(|k| (k * 7) % 16).collect();
        let y = crate::channel::transmit(&c, &labels, sigma2, 11);
        let bp = crate::demapper::posteriors_batch(&y, &c, sigma2).unwrap();
        let cost = masked_bce_cost(&bp, &labels, 4, 0.0).unwrap();
        let g = gmi_from_posteriors(&bp, &labels, 4, 0.0, sigma2).unwrap();
        let raw_total: f64 = g.per_bit_raw.iter().sum();
        assert!((raw_total - 4.0 * (1.0 - cost)).abs() < 1e-12);
    }

    #[test]
    fn curve_is_monotone_and_single_point_matches() {
        let c = Constellation::brgc_qam(6).unwrap();
        let grid: Vec<f64> = (0..=25).map(f64::from).collect();
        let curve = gmi_vs_snr_curve(&c, &grid, 20_000, 5, 0.0).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].total_gmi >= w[0].total_gmi - 2.0 * (w[0].stderr + w[1].stderr));
        }
        let single = gmi_vs_snr_curve(&c, &[12.0], 20_000, 5, 0.0).unwrap();
        assert_eq!(single[0], gmi_estimate(&c, 1.0 / db_to_lin(12.0), 20_000, 5, 0.0).unwrap());
        assert!(gmi_vs_snr_curve(&c, &[], 10, 5, 0.0).is_err());
    }

    #[test]
    fn qam256_saturates_at_30_db() {
        let c = Constellation::brgc_qam(8).unwrap();
        let r = gmi_vs_snr_curve(&c, &[30.0], 20_000, 2, 0.0).unwrap();
        assert!((r[0].total_gmi - 8.0).abs() < 0.05, "{}", r[0].total_gmi);
    }

    #[test]
    fn csv_row_layout() {
        let c = Constellation::brgc_qam(2).unwrap();
        let r = gmi_estimate(&c, 0.5, 1000, 9, 0.0).unwrap();
        assert_eq!(
            GmiReport::csv_header(2),
            "snr_db,total_gmi,gmi_bit_1,gmi_bit_2,stderr,n_symbols,seed"
        );
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), 7);
        assert!(row.ends_with(",1000,9"));
    }
}
