//! Effective-SNR fiber channel.
//!
//! The received noise is circular Gaussian with variance
//!
//! ```text
//! σ²_eff(P) = N_spans · [ σ²_ASE + (χ1 + χ2·(μ4 − 2)) · P³ ]
//! ```
//!
//! where `P` is the launch power relative to unit-energy symbols and `μ4`
//! the fourth moment of the normalized constellation. Constellations with a
//! smaller fourth moment generate less nonlinear interference, which is the
//! coupling the shaping optimizer can exploit.

use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, MomentSet};
use crate::error::{invalid, Error, Result};

pub const CHANNEL_FORMAT: &str = "mtom-chan-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_spans: u32,
    pub span_length_km: f64,
    /// ASE noise added per span, relative to unit symbol energy.
    pub sigma2_ase_per_span: f64,
    /// Per-span nonlinear coefficient on `P³`.
    pub chi1: f64,
    /// Per-span nonlinear coefficient on `P³·(μ4 − 2)`.
    pub chi2: f64,
    /// Fixed launch power. When absent the optimal launch power is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launch_power: Option<f64>,
}

/// Noise variance together with a flag telling whether the nonlinear term
/// was negative and clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseVariance {
    pub value: f64,
    pub clamped: bool,
}

/// Launch power, effective SNR and the noise variance seen by a
/// unit-power constellation (`1 / SNR`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub launch_power: f64,
    pub snr: f64,
    pub clamped: bool,
}

impl OperatingPoint {
    pub fn snr_db(&self) -> f64 {
        lin_to_db(self.snr)
    }

    /// Noise variance for a unit-power constellation.
    pub fn sigma2(&self) -> f64 {
        1.0 / self.snr
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    format: String,
    #[serde(flatten)]
    params: ChannelParams,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_spans < 1 {
            return Err(invalid!("n_spans must be at least 1"));
        }
        let coeffs = [
            ("span_length_km", self.span_length_km),
            ("sigma2_ase_per_span", self.sigma2_ase_per_span),
            ("chi1", self.chi1),
            ("chi2", self.chi2),
        ];
        for (name, v) in coeffs {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let Some(p) = self.launch_power {
            if !p.is_finite() || p <= 0.0 {
                return Err(invalid!("launch power must be positive, got {p}"));
            }
        }
        Ok(())
    }

    pub fn with_spans(&self, n_spans: u32) -> Self {
        Self {
            n_spans,
            ..self.clone()
        }
    }

    /// Per-span nonlinear coefficient for a constellation with these moments.
    pub fn chi_effective(&self, mom: &MomentSet) -> f64 {
        self.chi1 + self.chi2 * (mom.mu4 - 2.0)
    }

    /// `σ²_eff` at launch power `power`.
    pub fn noise_variance(&self, power: f64, mom: &MomentSet) -> Result<NoiseVariance> {
        self.validate()?;
        if !power.is_finite() || power <= 0.0 {
            return Err(invalid!("launch power must be positive, got {power}"));
        }
        let n = self.n_spans as f64;
        let nonlinear = self.chi_effective(mom) * power.powi(3);
        let clamped = nonlinear < 0.0;
        let value = n * (self.sigma2_ase_per_span + nonlinear.max(0.0));
        Ok(NoiseVariance { value, clamped })
    }

    /// `σ²_eff` at the configured launch power.
    pub fn effective_noise_variance(&self, mom: &MomentSet) -> Result<NoiseVariance> {
        let power = self
            .launch_power
            .ok_or_else(|| invalid!("no launch power configured"))?;
        self.noise_variance(power, mom)
    }

    pub fn snr_at_power(&self, power: f64, mom: &MomentSet) -> Result<f64> {
        let nv = self.noise_variance(power, mom)?;
        if nv.value <= 0.0 {
            return Err(Error::Numeric("zero noise variance".into()));
        }
        Ok(power / nv.value)
    }

    /// Maximizer of `P / σ²_eff(P)`: `P*³ = σ²_ASE / (2·χ_eff)`.
    pub fn optimal_launch_power(&self, mom: &MomentSet) -> Result<OperatingPoint> {
        self.validate()?;
        let chi = self.chi_effective(mom);
        if chi <= 0.0 {
            return Err(Error::NoInteriorMaximum(format!(
                "effective nonlinear coefficient {chi} ≤ 0, SNR grows without bound"
            )));
        }
        if self.sigma2_ase_per_span <= 0.0 {
            return Err(Error::NoInteriorMaximum(
                "zero ASE noise puts the optimum at zero launch power".into(),
            ));
        }
        let power = (self.sigma2_ase_per_span / (2.0 * chi)).cbrt();
        let snr = self.snr_at_power(power, mom)?;
        for f in [1.0 - 1e-3, 1.0 + 1e-3] {
            if self.snr_at_power(power * f, mom)? > snr {
                return Err(Error::Numeric("closed-form launch power is not a maximum".into()));
            }
        }
        Ok(OperatingPoint {
            launch_power: power,
            snr,
            clamped: false,
        })
    }

    /// Fixed launch power when configured, otherwise the optimum.
    pub fn operating_point(&self, mom: &MomentSet) -> Result<OperatingPoint> {
        match self.launch_power {
            Some(p) => {
                let nv = self.noise_variance(p, mom)?;
                Ok(OperatingPoint {
                    launch_power: p,
                    snr: p / nv.value,
                    clamped: nv.clamped,
                })
            }
            None => self.optimal_launch_power(mom),
        }
    }

    /// Effective SNR in dB at `n_spans` spans and optimal launch power.
    pub fn snr_at_spans(&self, n_spans: u32, mom: &MomentSet) -> Result<f64> {
        Ok(self.with_spans(n_spans).optimal_launch_power(mom)?.snr_db())
    }

    /// Rescales ASE and nonlinear coefficients (keeping `χ2/χ1`) so that a
    /// constellation with moments `reference` reaches `target_snr_db` at
    /// the optimum, with the optimum at unit launch power.
    pub fn calibrated(&self, reference: &MomentSet, target_snr_db: f64) -> Result<Self> {
        self.validate()?;
        if self.chi1 <= 0.0 {
            return Err(invalid!("calibration needs chi1 > 0"));
        }
        let ratio = self.chi2 / self.chi1;
        let shape = 1.0 + ratio * (reference.mu4 - 2.0);
        if shape <= 0.0 {
            return Err(invalid!("chi2/chi1 = {ratio} makes the nonlinear term negative"));
        }
        // At P* = 1: SNR* = 1 / (1.5 · N · ase) and χ_eff = ase / 2.
        let ase = 1.0 / (1.5 * self.n_spans as f64 * db_to_lin(target_snr_db));
        let chi1 = ase / (2.0 * shape);
        Ok(Self {
            sigma2_ase_per_span: ase,
            chi1,
            chi2: ratio * chi1,
            launch_power: None,
            ..self.clone()
        })
    }

    /// Reference link: 15 spans of 100 km, calibrated so that BRGC 256QAM
    /// sees 15.76 dB at its optimal launch power.
    pub fn reference() -> Self {
        let template = Self {
            n_spans: 15,
            span_length_km: 100.0,
            sigma2_ase_per_span: 1.0,
            chi1: 1.0,
            chi2: 0.5,
            launch_power: None,
        };
        let qam256 = Constellation::brgc_qam(8).expect("valid m").moments();
        template
            .calibrated(&qam256, 15.76)
            .expect("reference template is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ChannelFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != CHANNEL_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag {:?}, expected {CHANNEL_FORMAT:?}",
                file.format
            )));
        }
        file.params.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(file.params)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ChannelFile {
            format: CHANNEL_FORMAT.into(),
            params: self.clone(),
        })
        .expect("channel params serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

/// Adds circular complex Gaussian noise of total variance `sigma2`
/// (`sigma2/2` per real dimension).
pub fn add_noise(
    symbols: &mut [Complex64],
    sigma2: f64,
    rng: &mut impl rand::Rng,
) {
    if sigma2 <= 0.0 {
        return;
    }
    let std = (sigma2 / 2.0).sqrt();
    for y in symbols.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *y += Complex64::new(re * std, im * std);
    }
}

/// Maps `labels` through `c` and adds Gaussian noise of variance `sigma2`.
pub fn transmit(c: &Constellation, labels: &[usize], sigma2: f64, seed: u64) -> Vec<Complex64> {
    let mut y: Vec<Complex64> = labels.iter().map(|&l| c.point(l)).collect();
    let mut rng = crate::rng::stream(seed, 0);
    add_noise(&mut y, sigma2, &mut rng);
    y
}
