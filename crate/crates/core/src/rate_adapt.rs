//! Rate planning and ideal-FEC reach.
//!
//! With a fixed code rate `R`, the net information rate per symbol is set by
//! the dummy-bit count alone: `IR = R·(m − n_d)`. Plans are kept in exact
//! rational arithmetic so grid points never drift off the `n_d` lattice.

use std::fmt::Write as _;
use std::path::Path;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::constellation::Constellation;
use crate::error::{invalid, Error, Result};
use crate::metrics::{fmt_f, gmi_estimate, GmiReport};

pub type Rational = Ratio<i64>;

/// Parses `"5/6"`, `"3"` or a plain decimal such as `"0.1"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || invalid!("not a rational number: {text:?}");
    if t.contains('/') {
        let r: Rational = t.parse().map_err(|_| bad())?;
        return Ok(r);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        || frac.len() > 12
    {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let r = Rational::new(numer, 10i64.pow(frac.len() as u32));
    Ok(if neg { -r } else { r })
}

fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `R·(m − n_d)` in bits per symbol.
pub fn target_ir(rate: Rational, m: usize, n_d: Rational) -> Result<Rational> {
    if rate <= Rational::zero() || rate > Rational::from_integer(1) {
        return Err(invalid!("code rate must lie in (0, 1], got {rate}"));
    }
    let m = Rational::from_integer(m as i64);
    if n_d < Rational::zero() || n_d >= m {
        return Err(invalid!("n_d must lie in [0, {m}), got {n_d}"));
    }
    Ok(rate * (m - n_d))
}

/// A dummy-bit grid with its target rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePlan {
    pub rate: Rational,
    pub m: usize,
    pub step: Rational,
    /// Grid points in increasing order (so IR decreases along the plan).
    pub n_d: Vec<Rational>,
}

/// One point of a [`RatePlan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub n_d: Rational,
    pub ir: Rational,
}

impl PlanPoint {
    pub fn n_d_f64(&self) -> f64 {
        to_f64(self.n_d)
    }

    pub fn ir_f64(&self) -> f64 {
        to_f64(self.ir)
    }
}

impl RatePlan {
    pub fn len(&self) -> usize {
        self.n_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_d.is_empty()
    }

    pub fn points(&self) -> Vec<PlanPoint> {
        self.n_d
            .iter()
            .map(|&n_d| PlanPoint {
                n_d,
                ir: self.rate * (Rational::from_integer(self.m as i64) - n_d),
            })
            .collect()
    }

    /// Distinct trained-constellation cells `⌊n_d⌉` the plan touches.
    pub fn cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self.n_d.iter().map(|&n| crate::round_nd(to_f64(n))).collect();
        cells.dedup();
        cells
    }
}

/// Grid over `n_d ∈ [m − ir_hi/R, m − ir_lo/R]` with spacing `step`,
/// starting at the lower end.
pub fn build_plan(
    rate: Rational,
    m: usize,
    ir_lo: Rational,
    ir_hi: Rational,
    step: Rational,
) -> Result<RatePlan> {
    if step <= Rational::zero() {
        return Err(invalid!("n_d step must be positive, got {step}"));
    }
    if rate <= Rational::zero() || rate > Rational::from_integer(1) {
        return Err(invalid!("code rate must lie in (0, 1], got {rate}"));
    }
    let mr = Rational::from_integer(m as i64);
    if !(ir_lo < ir_hi) || ir_hi > rate * mr {
        return Err(invalid!(
            "need ir_lo < ir_hi <= R·m = {}, got [{ir_lo}, {ir_hi}]",
            rate * mr
        ));
    }
    let start = mr - ir_hi / rate;
    let stop = mr - ir_lo / rate;
    if stop >= mr {
        return Err(invalid!("ir_lo = {ir_lo} needs n_d >= m"));
    }
    let count = ((stop - start) / step).floor().to_integer();
    let n_d = (0..=count).map(|k| start + step * k).collect();
    Ok(RatePlan { rate, m, step, n_d })
}

pub const SWEEP_FORMAT: &str = "mtom-sweep-v1";

/// Sweep description: the rate plan plus the span grid and Monte Carlo
/// budget used to build the GMI curves. Rates are written as strings
/// (`"5/6"`, `"0.1"`) so they stay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rate: String,
    pub m: usize,
    pub ir_lo: String,
    pub ir_hi: String,
    pub step: String,
    pub first_span: u32,
    pub last_span: u32,
    #[serde(default = "default_symbols")]
    pub symbols: usize,
    #[serde(default)]
    pub seed: u64,
    /// Channel file, relative to the sweep file. The reference link is used
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

fn default_symbols() -> usize {
    100_000
}

#[derive(Serialize, Deserialize)]
struct SweepFile {
    format: String,
    #[serde(flatten)]
    config: SweepConfig,
}

impl SweepConfig {
    pub fn plan(&self) -> Result<RatePlan> {
        build_plan(
            parse_rational(&self.rate)?,
            self.m,
            parse_rational(&self.ir_lo)?,
            parse_rational(&self.ir_hi)?,
            parse_rational(&self.step)?,
        )
    }

    pub fn spans(&self) -> Result<Vec<u32>> {
        if self.first_span == 0 || self.first_span > self.last_span {
            return Err(invalid!(
                "span range {}..={} is empty or starts at zero",
                self.first_span,
                self.last_span
            ));
        }
        Ok((self.first_span..=self.last_span).collect())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != SWEEP_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag {:?}, expected {SWEEP_FORMAT:?}",
                file.format
            )));
        }
        if file.config.symbols == 0 {
            return Err(Error::Format("symbols must be positive".into()));
        }
        Ok(file.config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&SweepFile { format: SWEEP_FORMAT.into(), config: self.clone() })
            .expect("sweep config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }
}

/// Weight of each label position in the data rate for a possibly fractional
/// `n_d`: full weight up to `m − ⌈n_d⌉`, the fraction `⌈n_d⌉ − n_d` at that
/// position, and nothing after. The weights sum to `m − n_d`.
pub fn data_weights(m: usize, n_d: f64) -> Result<Vec<f64>> {
    if !n_d.is_finite() || n_d < 0.0 || n_d >= m as f64 {
        return Err(invalid!("n_d must lie in [0, {m}), got {n_d}"));
    }
    let ceil = n_d.ceil() as usize;
    let mut w = vec![0.0; m];
    for (i, wi) in w.iter_mut().enumerate() {
        if i < m - ceil {
            *wi = 1.0;
        } else if i == m - ceil {
            *wi = ceil as f64 - n_d;
        }
    }
    Ok(w)
}

/// Data-bit GMI versus span count for one `n_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachCurve {
    pub n_d: f64,
    /// Strictly increasing span counts.
    pub spans: Vec<u32>,
    pub gmi: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ReachCurve {
    /// Weights full per-bit reports with [`data_weights`].
    pub fn from_reports(n_d: f64, reports: &[(u32, GmiReport)]) -> Result<Self> {
        let Some((_, first)) = reports.first() else {
            return Err(invalid!("empty GMI curve"));
        };
        let w = data_weights(first.m, n_d)?;
        let mut curve = ReachCurve { n_d, spans: vec![], gmi: vec![], stderr: vec![] };
        for (s, r) in reports {
            let (g, e) = r.weighted_total(&w);
            curve.spans.push(*s);
            curve.gmi.push(g);
            curve.stderr.push(e);
        }
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(invalid!("empty GMI curve for n_d = {}", self.n_d));
        }
        if self.gmi.len() != self.spans.len() || self.stderr.len() != self.spans.len() {
            return Err(invalid!("GMI curve columns differ in length"));
        }
        if self.spans.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid!("span counts must be strictly increasing"));
        }
        Ok(())
    }
}

/// Full per-bit GMI of `c` at each span count, each at the constellation's
/// own optimal launch power. All span counts share one random stream.
pub fn span_reports(
    c: &Constellation,
    channel: &ChannelParams,
    spans: &[u32],
    n_symbols: usize,
    seed: u64,
) -> Result<Vec<(u32, GmiReport)>> {
    let mom = c.moments();
    spans
        .iter()
        .map(|&s| {
            let op = channel.with_spans(s).operating_point(&mom)?;
            Ok((s, gmi_estimate(c, op.sigma2(), n_symbols, seed, 0.0)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachPoint {
    pub n_d: f64,
    pub ir_bits: f64,
    /// Largest span count with GMI ≥ IR; 0 when never reached.
    pub reach_spans: u32,
    pub reach_km: f64,
    /// GMI at the reach; `None` when the reach is 0.
    pub gmi_at_reach: Option<f64>,
    /// Set when the GMI at the reach, or at the next evaluated span count,
    /// lies within two standard errors of the IR.
    pub flag_marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReachResult {
    pub points: Vec<ReachPoint>,
}

impl ReachResult {
    pub const CSV_HEADER: &'static str = "n_d,ir_bits,reach_spans,reach_km,gmi_at_reach,flag_marginal";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f(p.n_d),
                fmt_f(p.ir_bits),
                p.reach_spans,
                fmt_f(p.reach_km),
                p.gmi_at_reach.map(fmt_f).unwrap_or_default(),
                p.flag_marginal
            );
        }
        out
    }
}

/// Reach of one curve at target rate `ir`.
pub fn reach_of(curve: &ReachCurve, ir: f64, span_length_km: f64) -> Result<ReachPoint> {
    curve.validate()?;
    let hit = (0..curve.spans.len()).rev().find(|&i| curve.gmi[i] >= ir);
    let near = |i: usize| (curve.gmi[i] - ir).abs() < 2.0 * curve.stderr[i];
    let (reach, gmi_at, marginal) = match hit {
        Some(i) => {
            let next = i + 1 < curve.spans.len() && near(i + 1);
            (curve.spans[i], Some(curve.gmi[i]), near(i) || next)
        }
        None => (0, None, near(0)),
    };
    Ok(ReachPoint {
        n_d: curve.n_d,
        ir_bits: ir,
        reach_spans: reach,
        reach_km: reach as f64 * span_length_km,
        gmi_at_reach: gmi_at,
        flag_marginal: marginal,
    })
}

/// Reach for every plan point; `curves[i]` belongs to the i-th point.
pub fn ideal_fec_reach(curves: &[ReachCurve], plan: &RatePlan, span_length_km: f64) -> Result<ReachResult> {
    if curves.len() != plan.len() {
        return Err(invalid!("{} curves for a {}-point plan", curves.len(), plan.len()));
    }
    let points = curves
        .iter()
        .zip(plan.points())
        .map(|(c, p)| {
            if (c.n_d - p.n_d_f64()).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "curve for n_d = {} does not match plan point {}",
                    c.n_d,
                    p.n_d_f64()
                )));
            }
            reach_of(c, p.ir_f64(), span_length_km)
        })
        .collect::<Result<_>>()?;
    Ok(ReachResult { points })
}
