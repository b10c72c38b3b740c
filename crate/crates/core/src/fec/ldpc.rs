//! Binary LDPC codes: systematic encoding and sum-product decoding.

use rand::seq::SliceRandom;
use rand::Rng;

use super::alist::{parse_alist, to_alist, SparseH};
use crate::error::{invalid, Error, Result};

/// The rate-5/6 code bundled with the toolkit (n = 3996, k = 3330).
pub const BUNDLED_ALIST: &str = include_str!("../../data/ira_n3996_k3330.alist");

/// Parameters the bundled code was generated with by [`ira_checks`].
pub const BUNDLED_PARAMS: (usize, usize, usize, u64) = (3996, 3330, 3, 0x1da7_c0de);

/// A parity-check code with a precomputed systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: SparseH,
    k: usize,
    /// Codeword positions carrying message bits, ascending.
    info_positions: Vec<usize>,
    /// Codeword position of each parity bit.
    parity_positions: Vec<usize>,
    /// For each parity bit, the message bits it sums, packed 64 per word.
    parity_masks: Vec<Vec<u64>>,
    // Edge layout for message passing: edges are numbered check by check.
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    var_start: Vec<usize>,
    var_edges: Vec<usize>,
}

/// Result of one decoder run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Hard decisions for all `n` code bits.
    pub bits: Vec<u8>,
    /// Set when the decisions satisfy every check.
    pub converged: bool,
    /// Message-passing iterations performed.
    pub iterations: usize,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl LdpcCode {
    pub fn from_alist(text: &str) -> Result<Self> {
        Self::from_sparse(parse_alist(text)?)
    }

    /// The bundled rate-5/6 code.
    pub fn bundled() -> Self {
        Self::from_alist(BUNDLED_ALIST).expect("bundled code parses")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_alist(&std::fs::read_to_string(path)?)
    }

    /// Validates `h` and derives the encoder by Gaussian elimination over
    /// GF(2). Pivots are taken from the rightmost columns first, so codes
    /// whose parity part sits at the end keep their message bits in front.
    pub fn from_sparse(h: SparseH) -> Result<Self> {
        let n = h.n;
        for (c, row) in h.checks.iter().enumerate() {
            if row.iter().any(|&v| v >= n) {
                return Err(invalid!("check {c} references a variable outside 0..{n}"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid!("check {c} must list distinct variables in ascending order"));
            }
        }

        let nw = words(n);
        let mut rows: Vec<Vec<u64>> = h
            .checks
            .iter()
            .map(|row| {
                let mut r = vec![0u64; nw];
                for &v in row {
                    r[v / 64] |= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in (0..n).rev() {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & b != 0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, p)| *a ^= p);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        let k = n - rank;
        if k == 0 {
            return Err(Error::Degenerate("parity-check matrix has full column rank".into()));
        }
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let info_positions: Vec<usize> = (0..n).filter(|&v| !is_pivot[v]).collect();
        let kw = words(k);
        let parity_masks = rows[..rank]
            .iter()
            .map(|row| {
                let mut mask = vec![0u64; kw];
                for (i, &v) in info_positions.iter().enumerate() {
                    if row[v / 64] >> (v % 64) & 1 == 1 {
                        mask[i / 64] |= 1 << (i % 64);
                    }
                }
                mask
            })
            .collect();

        let mut check_start = vec![0];
        let mut edge_var = Vec::new();
        for row in &h.checks {
            edge_var.extend_from_slice(row);
            check_start.push(edge_var.len());
        }
        let mut var_lists = vec![Vec::new(); n];
        for (e, &v) in edge_var.iter().enumerate() {
            var_lists[v].push(e);
        }
        let mut var_start = vec![0];
        let mut var_edges = Vec::new();
        for l in &var_lists {
            var_edges.extend_from_slice(l);
            var_start.push(var_edges.len());
        }

        Ok(Self {
            h,
            k,
            info_positions,
            parity_positions: pivots,
            parity_masks,
            check_start,
            edge_var,
            var_start,
            var_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.h.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.h.n as f64
    }

    pub fn parity_check(&self) -> &SparseH {
        &self.h
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn to_alist(&self) -> String {
        to_alist(&self.h)
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(invalid!("message has {} bits, code expects {}", message.len(), self.k));
        }
        let mut packed = vec![0u64; words(self.k)];
        for (i, &b) in message.iter().enumerate() {
            packed[i / 64] |= ((b & 1) as u64) << (i % 64);
        }
        let mut cw = vec![0u8; self.n()];
        for (&p, &b) in self.info_positions.iter().zip(message) {
            cw[p] = b & 1;
        }
        for (&p, mask) in self.parity_positions.iter().zip(&self.parity_masks) {
            let ones: u32 = mask.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[p] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Message bits of a codeword (or of a decision vector).
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// Whether every check is satisfied.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.h
            .checks
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }

    /// Sum-product decoding with a flooding schedule. LLRs are
    /// `ln p(0)/p(1)`; a position whose posterior LLR is exactly zero counts
    /// as undecided and blocks convergence.
    pub fn decode(&self, llr: &[f64], max_iters: usize) -> Result<DecodeOutcome> {
        Decoder::new(self).decode(llr, max_iters)
    }
}

/// Reusable message buffers for one code.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    code: &'a LdpcCode,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    tanh: Vec<f64>,
    total: Vec<f64>,
    bits: Vec<u8>,
}

const MSG_CLAMP: f64 = 60.0;
const TANH_LIMIT: f64 = 1.0 - 1e-15;

impl<'a> Decoder<'a> {
    pub fn new(code: &'a LdpcCode) -> Self {
        let e = code.edge_var.len();
        Self {
            code,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            tanh: vec![0.0; e],
            total: vec![0.0; code.n()],
            bits: vec![0; code.n()],
        }
    }

    fn decide(&mut self) -> bool {
        let mut undecided = false;
        for (b, &t) in self.bits.iter_mut().zip(&self.total) {
            *b = u8::from(t < 0.0);
            undecided |= t == 0.0;
        }
        !undecided && self.code.syndrome_ok(&self.bits)
    }

    pub fn decode(&mut self, llr: &[f64], max_iters: usize) -> Result<DecodeOutcome> {
        let code = self.code;
        if llr.len() != code.n() {
            return Err(invalid!("{} LLRs for a length-{} code", llr.len(), code.n()));
        }
        if llr.iter().any(|l| l.is_nan()) {
            return Err(Error::Numeric("NaN channel LLR".into()));
        }
        for (e, &v) in code.edge_var.iter().enumerate() {
            self.v2c[e] = llr[v].clamp(-MSG_CLAMP, MSG_CLAMP);
        }
        self.total.copy_from_slice(llr);
        let mut converged = self.decide();
        let mut iterations = 0;
        while !converged && iterations < max_iters {
            iterations += 1;
            // Check nodes: extrinsic tanh products via prefix and suffix.
            for c in 0..code.check_start.len() - 1 {
                let (lo, hi) = (code.check_start[c], code.check_start[c + 1]);
                for e in lo..hi {
                    self.tanh[e] = (0.5 * self.v2c[e]).tanh();
                }
                let mut prefix = 1.0;
                for e in lo..hi {
                    self.c2v[e] = prefix;
                    prefix *= self.tanh[e];
                }
                let mut suffix = 1.0;
                for e in (lo..hi).rev() {
                    let t = (self.c2v[e] * suffix).clamp(-TANH_LIMIT, TANH_LIMIT);
                    self.c2v[e] = 2.0 * t.atanh();
                    suffix *= self.tanh[e];
                }
            }
            // Variable nodes.
            for v in 0..code.n() {
                let edges = &code.var_edges[code.var_start[v]..code.var_start[v + 1]];
                let total = llr[v] + edges.iter().map(|&e| self.c2v[e]).sum::<f64>();
                self.total[v] = total;
                for &e in edges {
                    self.v2c[e] = (total - self.c2v[e]).clamp(-MSG_CLAMP, MSG_CLAMP);
                }
            }
            converged = self.decide();
        }
        Ok(DecodeOutcome { bits: self.bits.clone(), converged, iterations })
    }
}

/// Check lists of an IRA-style code: message columns of weight `col_weight`
/// spread evenly over the checks, followed by a dual-diagonal parity part.
/// Column-to-check assignment avoids length-4 cycles where it can.
pub fn ira_checks(n: usize, k: usize, col_weight: usize, seed: u64) -> Result<SparseH> {
    if k == 0 || k >= n || col_weight == 0 || col_weight > n - k {
        return Err(invalid!("unsupported IRA shape n = {n}, k = {k}, weight {col_weight}"));
    }
    let r = n - k;
    let mut rng = crate::rng::stream(seed, 0);
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); r];
    let cap = (k * col_weight).div_ceil(r);
    let mut order: Vec<usize> = (0..r).collect();
    for v in 0..k {
        let mut chosen: Vec<usize> = Vec::with_capacity(col_weight);
        order.shuffle(&mut rng);
        // Least-filled checks first keeps the row degrees even.
        order.sort_by_key(|&c| checks[c].len());
        for pass in 0..2 {
            for &c in &order {
                if chosen.len() == col_weight {
                    break;
                }
                if chosen.contains(&c) || checks[c].len() >= cap {
                    continue;
                }
                let shares = chosen
                    .iter()
                    .any(|&o| checks[o].iter().any(|u| checks[c].contains(u)));
                if pass == 0 && shares {
                    continue;
                }
                chosen.push(c);
            }
        }
        if chosen.len() < col_weight {
            return Err(Error::Degenerate(format!("could not place column {v}")));
        }
        for c in chosen {
            checks[c].push(v);
        }
    }
    for j in 0..r {
        checks[j].push(k + j);
        if j + 1 < r {
            checks[j + 1].push(k + j);
        }
    }
    checks.iter_mut().for_each(|c| c.sort_unstable());
    Ok(SparseH { n, checks })
}

/// Check lists of a random `(col_weight, row_weight)`-regular code built by
/// socket permutation, retried until no edge repeats.
pub fn regular_checks(n: usize, col_weight: usize, row_weight: usize, seed: u64) -> Result<SparseH> {
    if col_weight == 0 || row_weight == 0 || !(n * col_weight).is_multiple_of(row_weight) {
        return Err(invalid!("n·col_weight must be a multiple of row_weight"));
    }
    let m = n * col_weight / row_weight;
    let mut rng = crate::rng::stream(seed, 1);
    let mut sockets: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, col_weight)).collect();
    for _ in 0..1000 {
        sockets.shuffle(&mut rng);
        let mut checks: Vec<Vec<usize>> = sockets.chunks(row_weight).map(|c| c.to_vec()).collect();
        // Repair repeats by swapping with random sockets elsewhere.
        for _ in 0..100 * m {
            let Some(c) = checks.iter().position(|row| {
                let mut s = row.clone();
                s.sort_unstable();
                s.windows(2).any(|w| w[0] == w[1])
            }) else {
                break;
            };
            let i = rng.random_range(0..row_weight);
            let (c2, j) = (rng.random_range(0..m), rng.random_range(0..row_weight));
            let (a, b) = (checks[c][i], checks[c2][j]);
            checks[c][i] = b;
            checks[c2][j] = a;
        }
        let ok = checks.iter_mut().all(|row| {
            row.sort_unstable();
            row.windows(2).all(|w| w[0] != w[1])
        });
        if ok {
            return Ok(SparseH { n, checks });
        }
    }
    Err(Error::Degenerate("no repeat-free regular graph found".into()))
}
