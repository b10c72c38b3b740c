use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use mtom_core::channel::{db_to_lin, ChannelParams};
use mtom_core::constellation::Constellation;
use mtom_core::fec::chain::frames_for_info_bits;
use mtom_core::fec::ldpc::BUNDLED_ALIST;
use mtom_core::fec::{build_schedule, frame_symbols_for, run_chain_with, BerReport, ChainOptions, LdpcCode};
use mtom_core::metrics::{ensure_finite, fmt_f, gmi_estimate, GmiReport};
use mtom_core::rate_adapt::{ideal_fec_reach, span_reports, ReachCurve, SweepConfig};
use mtom_core::trainer::{train, TrainConfig};
use mtom_core::Error;

use crate::args::{BaselineArgs, ChainArgs, Command, EvalArgs, OperatingGrid, SweepArgs, TrainArgs};
use crate::failure::{usage, with_path, CmdResult, Failure};
use crate::grid::{parse_f64_grid, parse_span_grid};
use crate::manifest::RunManifest;

pub const LUT_FILE: &str = "constellation.lut.json";

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Chain(a) => cmd_chain(&a),
        Command::Baseline(a) => cmd_baseline(&a),
    }
}

fn prepare_out(out: &Path) -> CmdResult {
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Core(Error::Format(format!("{}: {e}", out.display()))))
}

fn utf8(bytes: Vec<u8>, path: &Path) -> CmdResult<String> {
    String::from_utf8(bytes)
        .map_err(|_| Failure::Core(Error::Format(format!("{}: not UTF-8 text", path.display()))))
}

fn load_lut(m: &mut RunManifest, path: &Path) -> CmdResult<Constellation> {
    let text = utf8(m.input("lut", path)?, path)?;
    Constellation::from_lut_str(&text).map_err(|e| Failure::Core(e.in_file(path)))
}

fn load_channel(m: &mut RunManifest, path: Option<&Path>) -> CmdResult<ChannelParams> {
    match path {
        Some(p) => {
            let text = utf8(m.input("channel", p)?, p)?;
            ChannelParams::from_toml_str(&text).map_err(|e| Failure::Core(e.in_file(p)))
        }
        None => Ok(ChannelParams::reference()),
    }
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let mut cfg = with_path(TrainConfig::load(&a.config), &a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    prepare_out(&a.out)?;
    let mut man = RunManifest::new("train", &a.out, Some(cfg.seed));
    man.input("config", &a.config)?;
    info!("training m = {}, n_d = {} for {} steps", cfg.m, cfg.n_d, cfg.steps);
    let outcome = train(&cfg)?;
    man.output(&a.out, LUT_FILE, &outcome.constellation.to_lut_string())?;
    man.output(&a.out, "trace.csv", &outcome.trace.to_csv())?;
    man.write(&a.out)
}

enum Points {
    Snr(Vec<f64>),
    Spans(Vec<u32>, ChannelParams),
}

fn operating_points(
    grid: &OperatingGrid,
    config: Option<&Path>,
    man: &mut RunManifest,
) -> CmdResult<Points> {
    match (&grid.snr_db, &grid.spans) {
        (Some(s), None) => {
            if config.is_some() {
                warn!("--config is ignored for SNR grids");
            }
            Ok(Points::Snr(parse_f64_grid(s)?))
        }
        (None, Some(s)) => Ok(Points::Spans(parse_span_grid(s)?, load_channel(man, config)?)),
        _ => Err(usage!("give exactly one of --snr-db or --spans")),
    }
}

impl Points {
    fn header(&self) -> &'static str {
        match self {
            Points::Snr(_) => "snr_db",
            Points::Spans(..) => "spans",
        }
    }

    /// `(label, σ²)` per point for constellation `c`.
    fn noise(&self, c: &Constellation) -> CmdResult<Vec<(String, f64)>> {
        match self {
            Points::Snr(grid) => Ok(grid.iter().map(|&s| (fmt_f(s), 1.0 / db_to_lin(s))).collect()),
            Points::Spans(grid, ch) => grid
                .iter()
                .map(|&s| {
                    let op = ch.with_spans(s).operating_point(&c.moments())?;
                    if op.clamped {
                        warn!("nonlinear noise clamped at {s} spans");
                    }
                    Ok((s.to_string(), op.sigma2()))
                })
                .collect(),
        }
    }
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    if a.symbols == 0 {
        return Err(usage!("--symbols must be positive"));
    }
    let mut man = RunManifest::new("eval", &a.out, Some(a.seed));
    let lut = load_lut(&mut man, &a.lut)?;
    mtom_core::data_bits(lut.m(), a.nd)?;
    let points = operating_points(&a.grid, a.config.as_deref(), &mut man)?;
    prepare_out(&a.out)?;

    let mut csv = String::new();
    let spans_col = matches!(points, Points::Spans(..));
    if spans_col {
        csv.push_str("spans,");
    }
    csv.push_str(&GmiReport::csv_header(lut.m()));
    csv.push('\n');
    for (label, sigma2) in points.noise(&lut)? {
        let report = gmi_estimate(&lut, sigma2, a.symbols, a.seed, a.nd)?;
        ensure_finite(&report)?;
        if spans_col {
            let _ = write!(csv, "{label},");
        }
        csv.push_str(&report.csv_row());
        csv.push('\n');
    }
    man.output(&a.out, "gmi.csv", &csv)?;
    man.write(&a.out)
}

/// Cached GMI reports of one (cell, span) pair.
#[derive(Serialize, Deserialize, PartialEq)]
struct CellKey {
    lut_sha256: String,
    channel: String,
    spans: u32,
    symbols: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CellEntry {
    key: CellKey,
    report: GmiReport,
}

fn cell_reports(
    lut: &Constellation,
    lut_hash: &str,
    channel: &ChannelParams,
    spans: &[u32],
    cfg: &SweepConfig,
    cache_dir: &Path,
    cell: usize,
) -> CmdResult<Vec<(u32, GmiReport)>> {
    let mut out = Vec::with_capacity(spans.len());
    let mut reused = 0;
    for &s in spans {
        let key = CellKey {
            lut_sha256: lut_hash.into(),
            channel: channel.to_toml_string(),
            spans: s,
            symbols: cfg.symbols,
            seed: cfg.seed,
        };
        let path = cache_dir.join(format!("nd{cell}_s{s}.json"));
        let cached = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<CellEntry>(&t).ok())
            .filter(|e| e.key == key);
        let report = match cached {
            Some(e) => {
                reused += 1;
                e.report
            }
            None => {
                let (_, r) = span_reports(lut, channel, &[s], cfg.symbols, cfg.seed)?.remove(0);
                ensure_finite(&r)?;
                let entry = CellEntry { key, report: r };
                let text = serde_json::to_string(&entry).expect("cache entry serializes");
                std::fs::write(&path, text)?;
                entry.report
            }
        };
        out.push((s, report));
    }
    if reused > 0 {
        info!("cell n_d = {cell}: reused {reused} of {} cached span points", spans.len());
    }
    Ok(out)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let mut cfg = with_path(SweepConfig::load(&a.config), &a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let plan = cfg.plan()?;
    if plan.is_empty() {
        return Err(usage!("the sweep plan has no points"));
    }
    let spans = cfg.spans()?;
    let mut man = RunManifest::new("sweep", &a.out, Some(cfg.seed));
    man.input("config", &a.config)?;
    let channel_path: Option<PathBuf> = a.channel.clone().or_else(|| {
        cfg.channel
            .as_ref()
            .map(|c| a.config.parent().unwrap_or(Path::new(".")).join(c))
    });
    let channel = load_channel(&mut man, channel_path.as_deref())?;

    let mut luts = Vec::new();
    for cell in plan.cells() {
        let path = a.lut.join(format!("nd{cell}.lut.json"));
        if !path.is_file() {
            return Err(usage!("missing LUT for n_d cell {cell}: {}", path.display()));
        }
        let lut = load_lut(&mut man, &path)?;
        if lut.m() != plan.m {
            return Err(usage!("{} has m = {}, the plan needs m = {}", path.display(), lut.m(), plan.m));
        }
        let hash = man.inputs.last().map(|r| r.sha256.clone()).unwrap_or_default();
        luts.push((cell, lut, hash));
    }

    prepare_out(&a.out)?;
    let cache_dir = a.out.join("cells");
    std::fs::create_dir_all(&cache_dir)?;
    let mut per_cell = Vec::new();
    for (cell, lut, hash) in &luts {
        info!("n_d cell {cell}: {} span points", spans.len());
        per_cell.push((*cell, cell_reports(lut, hash, &channel, &spans, &cfg, &cache_dir, *cell)?));
    }
    let curves = plan
        .points()
        .iter()
        .map(|p| {
            let n_d = p.n_d_f64();
            let cell = mtom_core::round_nd(n_d);
            let reports = &per_cell.iter().find(|(c, _)| *c == cell).expect("cell loaded").1;
            ReachCurve::from_reports(n_d, reports)
        })
        .collect::<mtom_core::Result<Vec<_>>>()?;
    let result = ideal_fec_reach(&curves, &plan, channel.span_length_km)?;
    man.output(&a.out, "reach.csv", &result.to_csv())?;
    man.write(&a.out)
}

fn cmd_chain(a: &ChainArgs) -> CmdResult {
    if a.max_iters == 0 {
        return Err(usage!("--max-iters must be positive"));
    }
    let mut man = RunManifest::new("chain", &a.out, Some(a.seed));
    let code = match &a.code {
        Some(p) => {
            let text = utf8(man.input("code", p)?, p)?;
            LdpcCode::from_alist(&text).map_err(|e| Failure::Core(e.in_file(p)))?
        }
        None => {
            man.input_bytes("code", "bundled", BUNDLED_ALIST.as_bytes());
            LdpcCode::bundled()
        }
    };
    let lut = load_lut(&mut man, &a.lut)?;
    let m = lut.m();
    let symbols = frame_symbols_for(m, a.nd, code.n())?;
    let schedule = build_schedule(symbols, m, a.nd, code.n())?;
    let points = operating_points(&a.grid, a.config.as_deref(), &mut man)?;

    let min_frames = frames_for_info_bits(&code, mtom_core::fec::MIN_DECISION_BITS);
    let frames = match a.frames {
        Some(f) if f >= min_frames => f,
        Some(f) => {
            warn!("raising --frames from {f} to {min_frames} to reach 10^6 information bits");
            min_frames
        }
        None => min_frames,
    };
    prepare_out(&a.out)?;
    info!(
        "code n = {}, k = {}; {symbols} symbols per frame; {frames} frames per point",
        code.n(),
        code.k()
    );

    let opts = ChainOptions { max_iters: a.max_iters, ..ChainOptions::default() };
    let mut csv = BerReport::csv_header(points.header());
    csv.push('\n');
    for (label, sigma2) in points.noise(&lut)? {
        let r = run_chain_with(&code, &lut, &schedule, sigma2, frames, a.seed, &opts)?;
        info!("{} {label}: pre {:.3e}, post {:.3e}", points.header(), r.pre_ber, r.post_ber);
        csv.push_str(&r.csv_row(&label));
        csv.push('\n');
    }
    man.output(&a.out, "ber.csv", &csv)?;
    man.write(&a.out)
}

fn cmd_baseline(a: &BaselineArgs) -> CmdResult {
    if a.kind != "brgc" {
        return Err(usage!("unknown constellation kind {:?}; only \"brgc\" is available", a.kind));
    }
    let ms = match a.m {
        Some(m) if m >= 2 && m % 2 == 0 && m <= 10 => vec![m],
        Some(m) => return Err(usage!("square QAM needs an even m in 2..=10, got {m}")),
        None => vec![2, 4, 6, 8],
    };
    prepare_out(&a.out)?;
    let mut man = RunManifest::new("baseline", &a.out, None);
    for m in ms {
        let lut = Constellation::brgc_qam(m)?;
        let path = man.output(&a.out, &format!("brgc{m}.lut.json"), &lut.to_lut_string())?;
        info!("wrote {} ({} points)", path.display(), lut.len());
    }
    man.write(&a.out)
}
