use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tiwork::boolfunc::{tt_to_anf, TruthTable};
use tiwork::leakage::{
    campaign_chunk, load_trace_set, sidecar_path, write_metadata, Acquisition, CampaignConfig,
    Group, LeakageKind, LeakageModel, TraceMeta, TraceSet, TraceWriter, DEFAULT_CHUNK,
};
use tiwork::netlist::{
    distribute_delays, parse_netlist, period_grid, random_vector_pairs, select_path,
    shared_g_output_groups, sweep_clock, synthesize_shared_g, verify_witness, Delays, GaConfig,
    Netlist, TrojanSpec, DEFAULT_SETUP_MARGIN, SHARED_G_TARGETS,
};
use tiwork::present_ti::{
    format_block, present_encrypt, shared_f, shared_g, shared_g_triggered, shared_g_uncorrected,
    ti_encrypt, Key80, TrojanMode, F_HEX, G_HEX,
};
use tiwork::scaeval::{
    class_accumulate, cpa_from, default_checkpoints, dpa_from, first_round_key_nibble,
    leakage_verdict, progress_curve, svg_line_plot, welch_t_with, write_progress_csv,
    write_rank_csv, write_ttest_csv, AttackAnalysis, AttackKind, KeyRankResult, Predictor,
    TTestAnalysis, TraceSelection, THRESHOLD,
};
use tiwork::sharing::{
    check_correctness_with, check_non_completeness, check_uniformity_with, direct_share,
    parse_sharing, search_corrections, SharedFunction,
};
use tiwork::Exec;

mod config;
mod demo;
mod output;

use config::{Block, ConfigError, OnOff, RunConfig};
use output::{emit, write_atomic, Provenance};

const DEFAULT_KEY: &str = "0123456789ABCDEF0123";

#[derive(Parser)]
#[command(name = "tiwork", version, about = "Threshold-implementation workbench")]
struct Cli {
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Directly share a quadratic function and print the component equations.
    Share(ShareArgs),
    /// Correctness, non-completeness and uniformity of a sharing.
    Check(CheckArgs),
    /// Search for correction-term sets that make a sharing uniform.
    FindCorrections(FindArgs),
    /// PRESENT-80 encryption, plain or threshold-shared.
    Encrypt(EncryptArgs),
    /// Simulated acquisition campaign written to a trace file.
    Campaign(CampaignArgs),
    /// Fixed-vs-random Welch t-test.
    Ttest(TtestArgs),
    /// Correlation power analysis on one key nibble.
    Cpa(AttackArgs),
    /// Difference-of-means DPA on one key nibble.
    Dpa(AttackArgs),
    /// Gate-level netlist tools.
    #[command(subcommand)]
    Netlist(NetlistCmd),
    /// End-to-end run of every acceptance check with a summary table.
    Demo(DemoArgs),
}

#[derive(Args)]
struct ShareArgs {
    /// Truth table in hex, one digit per entry.
    #[arg(long)]
    table: String,
    #[arg(long, default_value = "direct")]
    rule: String,
    /// Print the plain-text form accepted by `check --sharing <file>`.
    #[arg(long)]
    plain: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Sharing file or builtin:G|G_uncorrected|G_triggered|F.
    #[arg(value_name = "SHARING")]
    positional: Option<String>,
    #[arg(long)]
    sharing: Option<String>,
    /// Reference truth table; defaults to the builtin's function or the sharing's own.
    #[arg(long)]
    table: Option<String>,
}

#[derive(Args)]
struct FindArgs {
    #[arg(long)]
    sharing: String,
    #[arg(long, default_value_t = 3)]
    max_set: usize,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Stop after this many candidate sets.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EncryptArgs {
    #[arg(long)]
    pt: String,
    #[arg(long)]
    key: String,
    #[arg(long)]
    ti: bool,
    #[arg(long)]
    mode: Option<TrojanMode>,
    #[arg(long)]
    prng: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long = "n")]
    n_traces: Option<u64>,
    #[arg(long)]
    mode: Option<TrojanMode>,
    #[arg(long)]
    prng: Option<OnOff>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// hw or hd.
    #[arg(long)]
    model: Option<LeakageKind>,
    #[arg(long)]
    samples_per_cycle: Option<usize>,
    #[arg(long)]
    key: Option<Key80>,
    #[arg(long)]
    fixed_pt: Option<Block>,
    /// fixed-vs-random or random.
    #[arg(long)]
    acquisition: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TtestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// 1, 2 or 3; all three when absent.
    #[arg(long)]
    order: Option<usize>,
    /// Emit max |t| over trace-count checkpoints instead of per-sample values.
    #[arg(long)]
    progress: bool,
    #[arg(long, default_value_t = 20)]
    checkpoints: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    nibble: Option<usize>,
    /// DPA target bit, or the CPA predictor bit when `--hw` is absent.
    #[arg(long)]
    bit: Option<usize>,
    /// CPA on the Hamming weight of the S-box output.
    #[arg(long)]
    hw: bool,
    /// Known key, to report the rank of the correct nibble.
    #[arg(long)]
    key: Option<Key80>,
    #[arg(long)]
    progress: bool,
    #[arg(long, default_value_t = 20)]
    checkpoints: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum NetlistCmd {
    /// Write the shared-G netlist.
    GenSharedg {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select paths through correction instances and distribute delays with the GA.
    Trojan(TrojanArgs),
    /// Classify clock periods into states 1 to 4.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct NetlistSource {
    /// Netlist file; the builtin shared-G netlist when absent.
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Correction-instance gate ids (repeatable); the shared-G `c2b2` instances by default.
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Random vector pairs.
    #[arg(long)]
    vectors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrojanArgs {
    #[command(flatten)]
    src: NetlistSource,
    /// Target path delay; 1.25 x the non-correction critical path by default.
    #[arg(long = "D")]
    target_delay: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    /// Attack period; midway between the critical path and D by default.
    #[arg(long)]
    period: Option<f64>,
    /// Delay CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    src: NetlistSource,
    /// Delay CSV from `netlist trojan`; nominal delays when absent.
    #[arg(long)]
    delays: Option<PathBuf>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Setup window as a fraction of the period.
    #[arg(long)]
    setup_margin: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Directory for the CSV/SVG artifacts of each step.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Bad invocation or configuration: exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = if e.is::<UsageError>() || e.is::<ConfigError>() {
                1
            } else {
                2
            };
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(code)
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .replace('\n', " ")
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.cmd {
        Cmd::Share(a) => cmd_share(a),
        Cmd::Check(a) => cmd_check(a, exec),
        Cmd::FindCorrections(a) => cmd_find(a, exec),
        Cmd::Encrypt(a) => cmd_encrypt(a, &cfg),
        Cmd::Campaign(a) => cmd_campaign(a, &cfg, exec),
        Cmd::Ttest(a) => cmd_ttest(a, &cfg, exec),
        Cmd::Cpa(a) => cmd_attack(a, false, &cfg, exec),
        Cmd::Dpa(a) => cmd_attack(a, true, &cfg, exec),
        Cmd::Netlist(NetlistCmd::GenSharedg { out }) => cmd_gen_sharedg(out, &cfg),
        Cmd::Netlist(NetlistCmd::Trojan(a)) => cmd_trojan(a, &cfg, exec),
        Cmd::Netlist(NetlistCmd::Sweep(a)) => cmd_sweep(a, &cfg, exec),
        Cmd::Demo(a) => {
            return Ok(if demo::run(a.out_dir.as_deref(), exec)? {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
    }?;
    Ok(ExitCode::SUCCESS)
}

fn load_sharing(spec: &str) -> Result<(SharedFunction, Option<TruthTable>)> {
    let g = || TruthTable::from_hex(G_HEX).expect("builtin table");
    Ok(match spec {
        "builtin:G" => (shared_g(), Some(g())),
        "builtin:G_uncorrected" => (shared_g_uncorrected(), Some(g())),
        "builtin:G_triggered" => (shared_g_triggered(), Some(g())),
        "builtin:F" => (shared_f(), Some(TruthTable::from_hex(F_HEX)?)),
        s if s.starts_with("builtin:") => {
            return Err(usage(format!(
                "unknown builtin `{s}` (G, G_uncorrected, G_triggered, F)"
            )))
        }
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
            (parse_sharing(&text)?, None)
        }
    })
}

fn cmd_share(a: ShareArgs) -> Result<()> {
    if a.rule != "direct" {
        return Err(usage(format!("unknown sharing rule `{}` (direct)", a.rule)));
    }
    let tt = TruthTable::from_hex(&a.table)?;
    let sf = direct_share(&tt_to_anf(&tt))?;
    let text = if a.plain { sf.to_text() } else { sf.report() };
    emit(a.out.as_deref(), &text)
}

fn cmd_check(a: CheckArgs, exec: Exec) -> Result<()> {
    let spec = a
        .sharing
        .or(a.positional)
        .ok_or_else(|| usage("a sharing is required (file or builtin:NAME)"))?;
    let (sf, builtin_ref) = load_sharing(&spec)?;
    let reference = match a.table {
        Some(t) => TruthTable::from_hex(&t)?,
        None => builtin_ref.unwrap_or_else(|| sf.base_table()),
    };
    println!("sharing: {spec}");
    println!("function: {}", sf.base_table().to_hex());
    println!("correct: {}", check_correctness_with(&sf, &reference, exec)?);
    println!("non-complete: {}", check_non_completeness(&sf));
    println!("uniform: {}", check_uniformity_with(&sf, exec));
    Ok(())
}

fn cmd_find(a: FindArgs, exec: Exec) -> Result<()> {
    let (sf, _) = load_sharing(&a.sharing)?;
    let res = search_corrections(&sf, a.degree, a.max_set, a.budget, exec);
    if a.json {
        println!("{}", res.to_json());
        return Ok(());
    }
    for set in &res.sets {
        let labels: Vec<String> = set.iter().map(|c| c.label(sf.base_width())).collect();
        println!("{{{}}}", labels.join("; "));
    }
    println!(
        "# {} set(s), {} candidates examined, search {}",
        res.sets.len(),
        res.examined,
        if res.complete { "complete" } else { "truncated by budget" }
    );
    Ok(())
}

fn cmd_encrypt(a: EncryptArgs, cfg: &RunConfig) -> Result<()> {
    let pt = tiwork::present_ti::parse_block(&a.pt)?;
    let key: Key80 = a.key.parse()?;
    if !a.ti {
        if a.mode.is_some() {
            return Err(usage("--mode needs --ti"));
        }
        println!("{}", format_block(present_encrypt(pt, key)));
        return Ok(());
    }
    let mode = cfg.pick(a.mode, "mode", TrojanMode::Nominal);
    let prng = cfg.pick(a.prng, "prng", OnOff(true)).0;
    let seed = cfg.pick(a.seed, "seed", 1);
    let (ct, _) = ti_encrypt(pt, key, mode, prng, seed)?;
    println!("{}", format_block(ct));
    Ok(())
}

fn campaign_config(a: &CampaignArgs, cfg: &RunConfig) -> Result<CampaignConfig> {
    let key = cfg.pick(a.key, "key", DEFAULT_KEY.parse()?);
    let mode = cfg.pick(a.mode, "mode", TrojanMode::Nominal);
    let prng = cfg.pick(a.prng, "prng", OnOff(true)).0;
    let seed = cfg.pick(a.seed, "seed", 1);
    let n = cfg.pick(a.n_traces, "n_traces", 10_000);
    let mut c = CampaignConfig::new(n, key, mode, prng, seed);
    c.fixed_pt = cfg.pick(a.fixed_pt, "fixed_pt", Block(0)).0;
    c.model = LeakageModel {
        kind: cfg.pick(a.model, "model", LeakageKind::HammingDistance),
        alpha: cfg.pick(a.alpha, "alpha", 1.0),
        sigma: cfg.pick(a.sigma, "sigma", 2.0),
        samples_per_cycle: cfg.pick(a.samples_per_cycle, "samples_per_cycle", 1),
    };
    c.acquisition = match cfg
        .pick_opt(a.acquisition.clone(), "acquisition")
        .as_deref()
    {
        None | Some("fixed-vs-random") => Acquisition::FixedVsRandom,
        Some("random") => Acquisition::RandomOnly,
        Some(x) => return Err(usage(format!("unknown acquisition `{x}` (fixed-vs-random, random)"))),
    };
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn cmd_campaign(a: CampaignArgs, cfg: &RunConfig, exec: Exec) -> Result<()> {
    let c = campaign_config(&a, cfg)?;
    let out = cfg
        .pick_opt(a.out.clone(), "out")
        .ok_or_else(|| usage("--out is required"))?;
    let prov = Provenance::new("campaign")
        .param("seed", c.master_seed)
        .param("n", c.n_traces)
        .param("mode", c.mode)
        .param("prng", if c.prng_on { "on" } else { "off" })
        .param("model", c.model.kind)
        .param("alpha", c.model.alpha)
        .param("sigma", c.model.sigma)
        .param("samples_per_cycle", c.model.samples_per_cycle)
        .param("key", c.key)
        .param("fixed_pt", format_block(c.fixed_pt))
        .param(
            "acquisition",
            match c.acquisition {
                Acquisition::FixedVsRandom => "fixed-vs-random",
                Acquisition::RandomOnly => "random",
            },
        );
    let n = c.n_traces as usize;
    let mut meta: Vec<TraceMeta> = Vec::with_capacity(n);
    write_atomic(&out, |w| {
        let mut tw = TraceWriter::new(w, c.n_traces, c.model.n_samples())?;
        let batch = DEFAULT_CHUNK * 32;
        for start in (0..n).step_by(batch) {
            let end = (start + batch).min(n);
            let parts = exec.map_range((end - start).div_ceil(DEFAULT_CHUNK), |k| {
                let lo = start + k * DEFAULT_CHUNK;
                campaign_chunk(&c, lo as u64..(lo + DEFAULT_CHUNK).min(end) as u64)
            });
            for part in parts {
                let part = part?;
                for (row, _) in part.rows() {
                    tw.write_row(row)?;
                }
                meta.extend(part.meta);
            }
        }
        tw.finish()?;
        Ok(())
    })?;
    write_atomic(&sidecar_path(&out), |w| {
        w.write_all(prov.hash_comment().as_bytes())?;
        write_metadata(w, &meta)?;
        Ok(())
    })?;
    let fixed = meta.iter().filter(|m| m.group == Group::Fixed).count();
    println!(
        "wrote {} traces x {} samples to {} ({} fixed, {} random); {}",
        n,
        c.model.n_samples(),
        out.display(),
        fixed,
        n - fixed,
        prov.line()
    );
    Ok(())
}

fn load_traces(path: &Path) -> Result<TraceSet> {
    load_trace_set(path).with_context(|| format!("cannot load traces from {}", path.display()))
}

fn write_svg(path: Option<&Path>, prov: &Provenance, svg: String) -> Result<()> {
    if let Some(p) = path {
        let body = svg.replacen('\n', &format!("\n{}", prov.xml_comment()), 1);
        emit(Some(p), &body)?;
    }
    Ok(())
}

fn cmd_ttest(a: TtestArgs, cfg: &RunConfig, exec: Exec) -> Result<()> {
    let orders: Vec<usize> = match cfg.pick_opt(a.order, "order") {
        Some(o @ 1..=3) => vec![o],
        Some(o) => return Err(usage(format!("order {o} not in 1..=3"))),
        None => vec![1, 2, 3],
    };
    let traces = load_traces(&a.input)?;
    let prov = Provenance::new("ttest")
        .param("in", a.input.display())
        .param("orders", format!("{orders:?}").replace(' ', ""))
        .param("progress", a.progress);
    let mut text = prov.hash_comment();
    let mut buf = Vec::new();
    if a.progress {
        let order = orders[0];
        let checkpoints = default_checkpoints(traces.n_traces(), a.checkpoints);
        let curve = progress_curve(TTestAnalysis::new(traces.n_samples, order), &traces, &checkpoints)?;
        write_progress_csv(&mut buf, &curve)?;
        let series: Vec<(f64, f64)> = curve.iter().map(|&(n, v)| (n as f64, v)).collect();
        write_svg(
            a.svg.as_deref(),
            &prov,
            svg_line_plot(&format!("max |t| (m={order}) over traces"), "traces", &[("max |t|", series)], Some(THRESHOLD)),
        )?;
        if let Some(&(n, v)) = curve.last() {
            eprintln!("m={order}: max |t| = {v:.3} after {n} traces");
        }
    } else {
        let results = orders
            .iter()
            .map(|&o| welch_t_with(&traces, o, exec))
            .collect::<tiwork::Result<Vec<_>>>()?;
        write_ttest_csv(&mut buf, &results)?;
        let series: Vec<(String, Vec<(f64, f64)>)> = results
            .iter()
            .map(|r| {
                (
                    format!("m={}", r.order),
                    r.t.iter().enumerate().map(|(j, &t)| (j as f64, t)).collect(),
                )
            })
            .collect();
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(l, s)| (l.as_str(), s.clone())).collect();
        write_svg(a.svg.as_deref(), &prov, svg_line_plot("Welch t per sample", "sample", &refs, Some(THRESHOLD)))?;
        for r in &results {
            eprintln!(
                "m={}: max |t| = {:.3} -> {}",
                r.order,
                r.max_abs_t,
                if leakage_verdict(r) { "leakage" } else { "no leakage" }
            );
        }
    }
    text.push_str(std::str::from_utf8(&buf)?);
    emit(a.out.as_deref(), &text)
}

fn cmd_attack(a: AttackArgs, dpa: bool, cfg: &RunConfig, exec: Exec) -> Result<()> {
    let nibble = cfg.pick(a.nibble, "nibble", 0);
    if nibble > 15 {
        return Err(usage(format!("nibble {nibble} not in 0..=15")));
    }
    let bit = cfg.pick(a.bit, "bit", 0);
    if bit > 3 {
        return Err(usage(format!("bit {bit} not in 0..=3")));
    }
    if dpa && a.hw {
        return Err(usage("--hw applies to cpa only"));
    }
    let kind = if dpa {
        AttackKind::Dpa(bit as u8)
    } else if a.hw {
        AttackKind::Cpa(Predictor::SboxOutputHw)
    } else {
        AttackKind::Cpa(Predictor::SboxOutputBit(bit as u8))
    };
    let key = cfg.pick_opt(a.key, "key");
    let correct = key.map(|k| first_round_key_nibble(k, nibble));
    let traces = load_traces(&a.input)?;
    let name = if dpa { "dpa" } else { "cpa" };
    let mut prov = Provenance::new(name)
        .param("in", a.input.display())
        .param("nibble", nibble)
        .param("predictor", match kind {
            AttackKind::Dpa(b) => format!("bit{b}"),
            AttackKind::Cpa(Predictor::SboxOutputBit(b)) => format!("bit{b}"),
            AttackKind::Cpa(Predictor::SboxOutputHw) => "hw".into(),
        });
    if let Some(k) = key {
        prov = prov.param("key", k);
    }
    let mut buf = Vec::new();
    if a.progress {
        let random = traces.filter_group(Group::Random);
        let checkpoints = default_checkpoints(random.n_traces(), a.checkpoints);
        let analysis = AttackAnalysis::new(nibble, random.n_samples, kind, correct);
        let curve = progress_curve(analysis, &random, &checkpoints)?;
        write_progress_csv(&mut buf, &curve)?;
        let series: Vec<(f64, f64)> = curve.iter().map(|&(n, v)| (n as f64, v)).collect();
        write_svg(
            a.svg.as_deref(),
            &prov,
            svg_line_plot(&format!("{name} peak over traces"), "traces", &[("peak", series)], None),
        )?;
    } else {
        let acc = class_accumulate(&traces, nibble, TraceSelection::RandomGroup, exec);
        let res: KeyRankResult = match kind {
            AttackKind::Dpa(b) => dpa_from(&acc, b)?,
            AttackKind::Cpa(p) => cpa_from(&acc, p)?,
        };
        write_rank_csv(&mut buf, &res, if dpa { "delta" } else { "rho" })?;
        let series: Vec<(String, Vec<(f64, f64)>)> = (0..16)
            .map(|g| {
                (
                    format!("{g:X}"),
                    res.stat[g].iter().enumerate().map(|(j, &v)| (j as f64, v)).collect(),
                )
            })
            .collect();
        let mut refs: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
        // correct (or best) guess last so it is drawn on top
        let top = correct.unwrap_or(res.best()) as usize;
        for (g, (l, s)) in series.iter().enumerate() {
            if g != top {
                refs.push((l.as_str(), s.clone()));
            }
        }
        refs.push((series[top].0.as_str(), series[top].1.clone()));
        write_svg(a.svg.as_deref(), &prov, svg_line_plot(&format!("{name} per sample"), "sample", &refs, None))?;
        eprintln!("best guess {:X} (peak {:.4})", res.best(), res.max_abs_stat());
        if let Some(k) = correct {
            eprintln!("correct nibble {k:X} ranked {}", res.rank_of(k));
        }
    }
    let text = prov.hash_comment() + std::str::from_utf8(&buf)?;
    emit(a.out.as_deref(), &text)
}

fn cmd_gen_sharedg(out: Option<PathBuf>, cfg: &RunConfig) -> Result<()> {
    let n = synthesize_shared_g();
    let prov = Provenance::new("netlist gen-sharedg").param("gates", n.gate_count());
    let out = cfg.pick_opt(out, "out");
    emit(out.as_deref(), &(prov.hash_comment() + &n.to_text()))
}

struct Loaded {
    netlist: Netlist,
    spec: TrojanSpec,
    targets: Vec<String>,
    vectors: Vec<(u64, u64)>,
    seed: u64,
}

fn load_netlist(src: &NetlistSource, cfg: &RunConfig) -> Result<Loaded> {
    let netlist = match cfg.pick_opt(src.netlist.clone(), "netlist") {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_netlist(&text)?
        }
        None => synthesize_shared_g(),
    };
    let targets: Vec<String> = if src.targets.is_empty() {
        SHARED_G_TARGETS.iter().map(|s| s.to_string()).collect()
    } else {
        src.targets.clone()
    };
    let names: Vec<&str> = targets.iter().map(|s| s.as_str()).collect();
    let groups = shared_g_output_groups(&netlist);
    let groups = if groups.iter().all(|g| g.len() == 3) {
        groups
    } else {
        Vec::new()
    };
    let spec = TrojanSpec::new(&netlist, &names, groups)?;
    let seed = cfg.pick(src.seed, "seed", 1);
    let count = cfg.pick(src.vectors, "vectors", 10_000);
    if netlist.inputs().len() > 64 {
        bail!("vector encoding supports at most 64 primary inputs");
    }
    let vectors = random_vector_pairs(netlist.inputs().len(), count, seed);
    Ok(Loaded {
        netlist,
        spec,
        targets,
        vectors,
        seed,
    })
}

fn cmd_trojan(a: TrojanArgs, cfg: &RunConfig, exec: Exec) -> Result<()> {
    let l = load_netlist(&a.src, cfg)?;
    let n = &l.netlist;
    let nominal = n.nominal_delays();
    let crit = n.critical_path_excluding(&nominal, &l.spec.instances);
    let target_delay = cfg.pick(a.target_delay, "target_delay", 1.25 * crit);
    let ga = GaConfig {
        population: cfg.pick(a.population, "population", GaConfig::default().population),
        generations: cfg.pick(a.generations, "generations", GaConfig::default().generations),
        mutation_rate: cfg.pick(a.mutation_rate, "mutation_rate", GaConfig::default().mutation_rate),
        crossover_rate: cfg.pick(a.crossover_rate, "crossover_rate", GaConfig::default().crossover_rate),
        target_delay,
        c: cfg.pick(a.c, "c", 1.5),
        seed: l.seed,
        period: cfg.pick_opt(a.period, "period"),
    };
    println!("non-correction critical path: {crit}");
    let mut paths = Vec::new();
    for t in &l.targets {
        let p = select_path(n, t)?;
        if !verify_witness(n, &p) {
            bail!("witness for `{t}` does not re-verify under timing simulation");
        }
        println!(
            "path through {t}: {} (witness {:03x} -> {:03x})",
            p.names(n).join(" -> "),
            p.witness.0,
            p.witness.1
        );
        paths.push(p);
    }
    let out = distribute_delays(n, &paths, &l.spec, &ga, &l.vectors, exec)?;
    let asg = &out.assignment;
    for (p, gates) in asg.paths.iter().enumerate() {
        for (k, &g) in gates.iter().enumerate() {
            println!(
                "  {:<10} d'={:<6} s={:<8.4} d={:.4}",
                n.node(g).name,
                asg.nominal[p][k],
                asg.slack[p][k],
                asg.assigned[p][k]
            );
        }
    }
    let r = &out.report;
    println!(
        "D={} c={} period={} error_rate_design={} error_rate_target={} cost={}",
        asg.target, asg.c, r.period, r.error_rate_design, r.error_rate_target, r.cost
    );
    println!(
        "next-longest path {:.4}: gap to D {:.4} ({} c)",
        out.assigned_critical,
        out.uniqueness_gap(),
        if out.uniqueness_gap() >= asg.c { ">=" } else { "<" }
    );
    let prov = Provenance::new("netlist trojan")
        .param("targets", l.targets.join(","))
        .param("seed", l.seed)
        .param("vectors", l.vectors.len())
        .param("D", target_delay)
        .param("c", ga.c)
        .param("population", ga.population)
        .param("generations", ga.generations)
        .param("mutation_rate", ga.mutation_rate)
        .param("crossover_rate", ga.crossover_rate)
        .param("period", r.period);
    let mut buf = Vec::new();
    asg.delays(n).write_csv(n, &mut buf)?;
    let out_path = cfg.pick_opt(a.out, "out");
    emit(out_path.as_deref(), &(prov.hash_comment() + std::str::from_utf8(&buf)?))
}

fn cmd_sweep(a: SweepArgs, cfg: &RunConfig, exec: Exec) -> Result<()> {
    let l = load_netlist(&a.src, cfg)?;
    let n = &l.netlist;
    let delays = match cfg.pick_opt(a.delays.clone(), "delays") {
        Some(p) => Delays::read_csv(
            n,
            &std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?,
        )?,
        None => n.nominal_delays(),
    };
    let crit = n.critical_path(&delays);
    let from = cfg.pick(a.from, "t_from", 1.2 * crit);
    let to = cfg.pick(a.to, "t_to", 0.5 * crit);
    let steps = cfg.pick(a.steps, "t_steps", 201);
    let margin = cfg.pick(a.setup_margin, "setup_margin", DEFAULT_SETUP_MARGIN);
    if !(from > 0.0 && to > 0.0 && from != to && steps >= 2) {
        return Err(usage("need positive, distinct --from/--to and at least 2 steps"));
    }
    let grid = period_grid(from, to, steps);
    let c = sweep_clock(n, &delays, &l.spec, &grid, &l.vectors, margin, exec)?;
    for b in c.bands() {
        println!(
            "{}  T in [{:.4}, {:.4}]  f in [{:.5}, {:.5}]",
            b.state,
            b.low,
            b.high,
            1.0 / b.high,
            1.0 / b.low
        );
    }
    println!("ordered: {}", c.is_ordered());
    let prov = Provenance::new("netlist sweep")
        .param("targets", l.targets.join(","))
        .param("seed", l.seed)
        .param("vectors", l.vectors.len())
        .param("from", from)
        .param("to", to)
        .param("steps", steps)
        .param("setup_margin", margin);
    let series: Vec<(f64, f64)> = c.points.iter().map(|p| (p.period, p.state.number() as f64)).collect();
    write_svg(a.svg.as_deref(), &prov, svg_line_plot("design state over clock period", "period", &[("state", series)], None))?;
    if let Some(out) = cfg.pick_opt(a.out, "out") {
        emit(Some(&out), &(prov.hash_comment() + &c.to_csv()))?;
    }
    Ok(())
}
