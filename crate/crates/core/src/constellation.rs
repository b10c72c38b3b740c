//! Labeled complex constellations.
//!
//! A [`Constellation`] stores its `M = 2^m` points in label order: entry `k`
//! is the point carrying the label whose bits, most significant first, are
//! the binary expansion of `k`. Label bit 0 is therefore the MSB, data bits
//! occupy the leading positions and dummy bits the trailing ones. Storing
//! points this way makes the labeling a bijection by construction.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported label length.
pub const MAX_BITS: usize = 12;

/// Tolerance used when checking unit average power of a loaded LUT.
pub const LUT_POWER_TOLERANCE: f64 = 1e-6;

pub const LUT_FORMAT: &str = "mtom-lut-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: usize,
    points: Vec<Complex64>,
}

/// Second, fourth and sixth absolute moments under uniform symbol
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu2: f64,
    pub mu4: f64,
    pub mu6: f64,
}

/// Partition of the points by their data prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    /// Number of trailing label bits ignored by the grouping (`⌊n_d⌉`).
    pub dummy_bits: usize,
    /// `groups[g]` holds the point indices whose leading bits equal `g`.
    pub groups: Vec<Vec<usize>>,
    /// Largest pairwise distance inside each group.
    pub intra_max_ed: Vec<f64>,
    /// Smallest distance between centroids of distinct groups. Infinite
    /// when there is a single group.
    pub inter_min_ed: f64,
    pub centroids: Vec<Complex64>,
}

impl GroupStructure {
    /// Largest intra-group spread over all groups.
    pub fn max_intra_ed(&self) -> f64 {
        self.intra_max_ed.iter().copied().fold(0.0, f64::max)
    }
}

impl Constellation {
    /// Wraps `points` (label order) without normalizing.
    pub fn new(m: usize, points: Vec<Complex64>) -> Result<Self> {
        if m == 0 || m > MAX_BITS {
            return Err(invalid!("label length m = {m} outside 1..={MAX_BITS}"));
        }
        if points.len() != 1 << m {
            return Err(invalid!(
                "expected {} points for m = {m}, got {}",
                1usize << m,
                points.len()
            ));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::Numeric("constellation contains non-finite points".into()));
        }
        Ok(Self { m, points })
    }

    /// Wraps and normalizes to unit average power.
    pub fn normalized(m: usize, points: Vec<Complex64>) -> Result<Self> {
        Self::new(m, points)?.normalize()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of points, `2^m`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Bit `i` (0 = MSB) of `label` for an `m`-bit label.
    #[inline]
    pub fn label_bit(m: usize, label: usize, i: usize) -> u8 {
        ((label >> (m - 1 - i)) & 1) as u8
    }

    /// Bits of `label`, MSB first.
    pub fn label_bits(&self, label: usize) -> Vec<u8> {
        (0..self.m).map(|i| Self::label_bit(self.m, label, i)).collect()
    }

    /// Inverse of [`Constellation::label_bits`].
    pub fn label_from_bits(bits: &[u8]) -> usize {
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1))
    }

    pub fn average_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    /// Rescales to unit average power. Labels and geometry are unchanged
    /// apart from the single positive scale factor.
    pub fn normalize(&self) -> Result<Self> {
        let power = self.average_power();
        if power <= 0.0 || !power.is_finite() {
            return Err(Error::Degenerate(
                "cannot normalize a constellation with zero average power".into(),
            ));
        }
        let scale = power.sqrt().recip();
        let points = self.points.iter().map(|p| p * scale).collect();
        Ok(Self { m: self.m, points })
    }

    pub fn moments(&self) -> MomentSet {
        let n = self.len() as f64;
        let (mut s2, mut s4, mut s6) = (0.0, 0.0, 0.0);
        for p in &self.points {
            let e = p.norm_sqr();
            s2 += e;
            s4 += e * e;
            s6 += e * e * e;
        }
        MomentSet {
            mu2: s2 / n,
            mu4: s4 / n,
            mu6: s6 / n,
        }
    }

    /// Smallest distance between any two distinct points.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min((self.points[i] - self.points[j]).norm());
            }
        }
        best
    }

    /// Reorders label bits: bit `j` of the new label is bit `perm[j]` of
    /// the old label, and each point keeps its physical position.
    pub fn permute_label_bits(&self, perm: &[usize]) -> Result<Self> {
        let m = self.m;
        let mut seen = vec![false; m];
        if perm.len() != m {
            return Err(invalid!("permutation has {} entries, expected {m}", perm.len()));
        }
        for &p in perm {
            if p >= m || std::mem::replace(&mut seen[p], true) {
                return Err(invalid!("{perm:?} is not a permutation of 0..{m}"));
            }
        }
        let mut points = vec![Complex64::new(0.0, 0.0); self.len()];
        for (old, &pt) in self.points.iter().enumerate() {
            let new = (0..m).fold(0usize, |acc, j| {
                (acc << 1) | Self::label_bit(m, old, perm[j]) as usize
            });
            points[new] = pt;
        }
        Ok(Self { m, points })
    }

    /// Groups points by the leading `m − ⌊n_d⌉` label bits.
    pub fn group_structure(&self, n_d: f64) -> Result<GroupStructure> {
        if !n_d.is_finite() || n_d < 0.0 || n_d > (self.m - 1) as f64 {
            return Err(invalid!("n_d = {n_d} outside [0, {}]", self.m - 1));
        }
        Ok(self.groups_by_dummy_bits(crate::round_nd(n_d)))
    }

    fn groups_by_dummy_bits(&self, dummy_bits: usize) -> GroupStructure {
        let size = 1usize << dummy_bits;
        let n_groups = self.len() / size;
        let groups: Vec<Vec<usize>> = (0..n_groups)
            .map(|g| (g * size..(g + 1) * size).collect())
            .collect();
        let intra_max_ed = groups
            .iter()
            .map(|idx| {
                let mut worst = 0.0f64;
                for (a, &i) in idx.iter().enumerate() {
                    for &j in &idx[a + 1..] {
                        worst = worst.max((self.points[i] - self.points[j]).norm());
                    }
                }
                worst
            })
            .collect();
        let centroids: Vec<Complex64> = groups
            .iter()
            .map(|idx| idx.iter().map(|&i| self.points[i]).sum::<Complex64>() / size as f64)
            .collect();
        let mut inter_min_ed = f64::INFINITY;
        for a in 0..centroids.len() {
            for b in (a + 1)..centroids.len() {
                inter_min_ed = inter_min_ed.min((centroids[a] - centroids[b]).norm());
            }
        }
        GroupStructure {
            dummy_bits,
            groups,
            intra_max_ed,
            inter_min_ed,
            centroids,
        }
    }

    /// Collapses every group of `2^n_d` points to its centroid, yielding a
    /// `2^(m−n_d)`-point constellation labeled by the data prefixes.
    pub fn merge_groups(&self, n_d: usize) -> Result<Self> {
        if n_d == 0 || n_d > self.m {
            return Err(invalid!("merge needs 1 ≤ n_d ≤ m = {}, got {n_d}", self.m));
        }
        if n_d == self.m {
            return Err(Error::Degenerate(
                "merging all label bits collapses the constellation to one point".into(),
            ));
        }
        let gs = self.groups_by_dummy_bits(n_d);
        Self::new(self.m - n_d, gs.centroids)?.normalize()
    }

    /// Binary-reflected Gray coded square QAM with `m/2` bits per axis.
    /// The first half of the label indexes the in-phase level, the second
    /// half the quadrature level.
    pub fn brgc_qam(m: usize) -> Result<Self> {
        if !m.is_multiple_of(2) || !(2..=10).contains(&m) {
            return Err(invalid!("square BRGC QAM needs an even m in 2..=10, got {m}"));
        }
        let half = m / 2;
        let levels = 1usize << half;
        let amplitude = |gray: usize| {
            let idx = gray_decode(gray);
            (2 * idx) as f64 - (levels - 1) as f64
        };
        let points = (0..1usize << m)
            .map(|label| {
                let i_bits = label >> half;
                let q_bits = label & (levels - 1);
                Complex64::new(amplitude(i_bits), amplitude(q_bits))
            })
            .collect();
        Self::normalized(m, points)
    }

    /// Writes the constellation as an `mtom-lut-v1` JSON document.
    pub fn save_lut(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_lut_string())?;
        Ok(())
    }

    pub fn to_lut_string(&self) -> String {
        let doc = LutDocument {
            format: LUT_FORMAT.to_string(),
            m: self.m,
            points: self.points.iter().map(|p| [p.re, p.im]).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("LUT serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn load_lut(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_lut_str(&text)
            .map_err(|e| e.in_file(path))
    }

    pub fn from_lut_str(text: &str) -> Result<Self> {
        let doc: LutDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format != LUT_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag {:?}, expected {LUT_FORMAT:?}",
                doc.format
            )));
        }
        if doc.m == 0 || doc.m > MAX_BITS {
            return Err(Error::Format(format!("unsupported label length m = {}", doc.m)));
        }
        if doc.points.len() != 1 << doc.m {
            return Err(Error::Format(format!(
                "m = {} requires {} points, file has {}",
                doc.m,
                1usize << doc.m,
                doc.points.len()
            )));
        }
        let points: Vec<Complex64> =
            doc.points.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        let c = Self::new(doc.m, points).map_err(|e| Error::Format(e.to_string()))?;
        let power = c.average_power();
        if (power - 1.0).abs() > LUT_POWER_TOLERANCE {
            return Err(Error::Format(format!(
                "average power {power} deviates from 1 by more than {LUT_POWER_TOLERANCE}"
            )));
        }
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LutDocument {
    format: String,
    m: usize,
    points: Vec<[f64; 2]>,
}

/// Index of a binary-reflected Gray codeword.
pub fn gray_decode(mut g: usize) -> usize {
    let mut shift = g >> 1;
    while shift != 0 {
        g ^= shift;
        shift >>= 1;
    }
    g
}

pub fn gray_encode(i: usize) -> usize {
    i ^ (i >> 1)
}
