//! `tiwork demo`: every acceptance check at full scale, one table row each.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use tiwork::boolfunc::{compose, tt_to_anf, TruthTable};
use tiwork::leakage::{
    campaign_reduce, Acquisition, CampaignConfig, Group, TraceMeta, TraceSet,
};
use tiwork::netlist::{
    distribute_delays, period_grid, random_vector_pairs, select_path, sweep_clock,
    synthesize_shared_g, verify_witness, DesignState, GaConfig, TrojanSpec, DEFAULT_SETUP_MARGIN,
    SHARED_G_TARGETS,
};
use tiwork::present_ti::{
    g_corrections, present_encrypt, seeded_rng, shared_f, shared_g, shared_g_triggered,
    shared_g_uncorrected, ti_encrypt, Key80, TrojanMode, F_HEX, G_HEX, SBOX_HEX,
};
use tiwork::scaeval::{
    batch, cpa_from, dpa_from, first_round_key_nibble, welch_t_with, write_rank_csv,
    write_ttest_csv, ClassAccumulator, Predictor, TTestAccumulator, THRESHOLD,
};
use tiwork::sharing::{
    check_correctness, check_non_completeness, check_uniformity_with, search_corrections,
};
use tiwork::Exec;

use crate::output::{emit, Provenance};

const KEY: &str = "0123456789ABCDEF0123";

const G_ANF: [&str; 4] = [
    "1 ⊕ a ⊕ dc ⊕ db ⊕ cb",
    "1 ⊕ d ⊕ b ⊕ ca ⊕ ba",
    "1 ⊕ c ⊕ b",
    "c ⊕ b ⊕ a",
];

/// Published PRESENT-80 vectors: (plaintext, key, ciphertext).
const VECTORS: [(u64, u128, u64); 4] = [
    (0, 0, 0x5579C1387B228445),
    (0, (1 << 80) - 1, 0xE72C46C0F5945049),
    (u64::MAX, 0, 0xA112FFC72F68417B),
    (u64::MAX, (1 << 80) - 1, 0x3333DCD3213210D2),
];

struct Row {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

struct Ctx<'a> {
    exec: Exec,
    out_dir: Option<&'a Path>,
}

impl Ctx<'_> {
    fn artifact(&self, name: &str, prov: &Provenance, body: &str) -> Result<()> {
        if let Some(dir) = self.out_dir {
            let p: PathBuf = dir.join(name);
            emit(Some(&p), &(prov.hash_comment() + body))?;
        }
        Ok(())
    }
}

/// Runs every check; `Ok(false)` when any fails.
pub fn run(out_dir: Option<&Path>, exec: Exec) -> Result<bool> {
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
    }
    let ctx = Ctx { exec, out_dir };
    type Check = fn(&Ctx) -> Result<(bool, String)>;
    let checks: [(&str, &str, Check); 11] = [
        ("1", "table reproduction", c1_tables),
        ("2", "uniformity", c2_uniformity),
        ("3", "non-completeness", c3_non_completeness),
        ("4", "correction search", c4_search),
        ("5", "cipher correctness", c5_cipher),
        ("6a", "leakage, PRNG off", c6a),
        ("6b", "no leakage, nominal", c6b),
        ("6c", "leakage, triggered", c6c),
        ("7", "key recovery", c7_attacks),
        ("8", "four-state sweep", c8_sweep),
        ("9", "statistics oracles", c9_stats),
    ];
    let mut rows = Vec::new();
    for (id, name, f) in checks {
        let t0 = Instant::now();
        let (pass, detail) = match f(&ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        let row = Row {
            id,
            name,
            pass,
            detail,
            secs: t0.elapsed().as_secs_f64(),
        };
        eprintln!("[{}] {} {} ({:.1}s)", row.id, row.name, if pass { "PASS" } else { "FAIL" }, row.secs);
        rows.push(row);
    }
    println!("{:<4} {:<22} {:<6} {:>8}  detail", "id", "check", "result", "time");
    for r in &rows {
        println!(
            "{:<4} {:<22} {:<6} {:>7.1}s  {}",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.secs,
            r.detail
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} of {} checks passed", rows.len() - failed, rows.len());
    Ok(failed == 0)
}

fn c1_tables(_: &Ctx) -> Result<(bool, String)> {
    let g = TruthTable::from_hex(G_HEX)?;
    let anf = tt_to_anf(&g);
    let anf_ok = (0..4).all(|b| anf.format_bit(b) == G_ANF[b]);
    let s = compose(&TruthTable::from_hex(F_HEX)?, &g)?;
    let s_ok = s.to_hex() == SBOX_HEX;
    Ok((anf_ok && s_ok, format!("ANF of G matches: {anf_ok}; F∘G = {}", s.to_hex())))
}

fn c2_uniformity(ctx: &Ctx) -> Result<(bool, String)> {
    let g = TruthTable::from_hex(G_HEX)?;
    let unc = check_uniformity_with(&shared_g_uncorrected(), ctx.exec);
    let cor = check_uniformity_with(&shared_g(), ctx.exec);
    let trig = check_uniformity_with(&shared_g_triggered(), ctx.exec);
    let trig_correct = check_correctness(&shared_g_triggered(), &g)?;
    let f = check_uniformity_with(&shared_f(), ctx.exec);
    Ok((
        !unc && cor && !trig && trig_correct && f,
        format!("G* uncorrected {unc}, corrected {cor}, c²b² removed {trig} (correct {trig_correct}), F* {f}"),
    ))
}

fn c3_non_completeness(_: &Ctx) -> Result<(bool, String)> {
    let all = [shared_g_uncorrected(), shared_g(), shared_g_triggered(), shared_f()];
    let ok: Vec<bool> = all.iter().map(check_non_completeness).collect();
    Ok((ok.iter().all(|&b| b), format!("{ok:?}")))
}

fn c4_search(ctx: &Ctx) -> Result<(bool, String)> {
    let res = search_corrections(&shared_g_uncorrected(), 2, 3, u64::MAX, ctx.exec);
    let want = g_corrections();
    let found = res
        .sets
        .iter()
        .any(|s| s.len() == want.len() && want.iter().all(|w| s.contains(w)));
    Ok((
        found && res.complete,
        format!("{} uniform sets of {} candidates; expected set present: {found}", res.sets.len(), res.examined),
    ))
}

fn c5_cipher(ctx: &Ctx) -> Result<(bool, String)> {
    let vec_ok = VECTORS
        .iter()
        .all(|&(pt, k, ct)| present_encrypt(pt, Key80::new(k).unwrap()) == ct);
    let n = 10_000;
    let mismatches: usize = ctx
        .exec
        .map_range(n, |i| {
            let mut rng = seeded_rng(5, i as u64);
            let pt = rng.next_u64();
            let key = Key80::random(&mut rng);
            let seed = rng.next_u64();
            let want = present_encrypt(pt, key);
            [TrojanMode::Nominal, TrojanMode::Triggered]
                .iter()
                .filter(|&&m| ti_encrypt(pt, key, m, true, seed).map(|r| r.0) != Ok(want))
                .count()
        })
        .into_iter()
        .sum();
    Ok((
        vec_ok && mismatches == 0,
        format!("test vectors {vec_ok}; {mismatches} mismatches over {n} x 2 shared encryptions"),
    ))
}

fn campaign(n: u64, mode: TrojanMode, prng: bool, seed: u64, acq: Acquisition) -> CampaignConfig {
    let mut c = CampaignConfig::new(n, KEY.parse().unwrap(), mode, prng, seed);
    c.acquisition = acq;
    c
}

fn ttest(ctx: &Ctx, cfg: &CampaignConfig, name: &str) -> Result<[f64; 3]> {
    let ns = cfg.model.n_samples();
    let acc = campaign_reduce(
        cfg,
        ctx.exec,
        tiwork::leakage::DEFAULT_CHUNK,
        || TTestAccumulator::new(ns),
        |a, row, m| a.update(row, m.group),
        TTestAccumulator::merge,
    )?;
    let res = [acc.finalize(1)?, acc.finalize(2)?, acc.finalize(3)?];
    let prov = Provenance::new("demo ttest")
        .param("n", cfg.n_traces)
        .param("mode", cfg.mode)
        .param("prng", cfg.prng_on)
        .param("seed", cfg.master_seed);
    let mut buf = Vec::new();
    write_ttest_csv(&mut buf, &res)?;
    ctx.artifact(&format!("ttest_{name}.csv"), &prov, std::str::from_utf8(&buf)?)?;
    Ok([res[0].max_abs_t, res[1].max_abs_t, res[2].max_abs_t])
}

fn fmt_t(t: &[f64]) -> String {
    t.iter()
        .enumerate()
        .map(|(i, v)| format!("m{}={v:.2}", i + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c6a(ctx: &Ctx) -> Result<(bool, String)> {
    let t = ttest(ctx, &campaign(100_000, TrojanMode::Nominal, false, 1, Acquisition::FixedVsRandom), "prng_off")?;
    Ok((t.iter().all(|&v| v > THRESHOLD), format!("max |t| {} (need all > 4.5)", fmt_t(&t))))
}

fn c6b(ctx: &Ctx) -> Result<(bool, String)> {
    let t = ttest(ctx, &campaign(1_000_000, TrojanMode::Nominal, true, 2, Acquisition::FixedVsRandom), "nominal")?;
    Ok((t[0] < THRESHOLD, format!("max |t| {} (need m1 < 4.5)", fmt_t(&t))))
}

fn c6c(ctx: &Ctx) -> Result<(bool, String)> {
    let t = ttest(ctx, &campaign(200_000, TrojanMode::Triggered, true, 3, Acquisition::FixedVsRandom), "triggered")?;
    Ok((t[0] > THRESHOLD, format!("max |t| {} (need m1 > 4.5)", fmt_t(&t))))
}

/// (DPA rank, CPA rank) of the correct nibble 0.
fn attack_ranks(ctx: &Ctx, cfg: &CampaignConfig, artifact: Option<&str>) -> Result<(usize, usize)> {
    let ns = cfg.model.n_samples();
    let acc = campaign_reduce(
        cfg,
        ctx.exec,
        tiwork::leakage::DEFAULT_CHUNK,
        || ClassAccumulator::new(0, ns),
        |a, row, m: &TraceMeta| a.update(row, m.plaintext),
        ClassAccumulator::merge,
    )?;
    let k = first_round_key_nibble(cfg.key, 0);
    let dpa = dpa_from(&acc, 0)?;
    let cpa = cpa_from(&acc, Predictor::SboxOutputBit(0))?;
    if let Some(name) = artifact {
        let prov = Provenance::new("demo attack")
            .param("n", cfg.n_traces)
            .param("mode", cfg.mode)
            .param("seed", cfg.master_seed);
        for (label, r, stat) in [("dpa", &dpa, "delta"), ("cpa", &cpa, "rho")] {
            let mut buf = Vec::new();
            write_rank_csv(&mut buf, r, stat)?;
            ctx.artifact(&format!("{label}_{name}.csv"), &prov, std::str::from_utf8(&buf)?)?;
        }
    }
    Ok((dpa.rank_of(k), cpa.rank_of(k)))
}

fn c7_attacks(ctx: &Ctx) -> Result<(bool, String)> {
    let n = 200_000;
    let trig = attack_ranks(ctx, &campaign(n, TrojanMode::Triggered, true, 7, Acquisition::RandomOnly), Some("triggered"))?;
    let mut dpa = Vec::new();
    let mut cpa = Vec::new();
    for seed in 100..120 {
        let (d, c) = attack_ranks(ctx, &campaign(n, TrojanMode::Nominal, true, seed, Acquisition::RandomOnly), None)?;
        dpa.push(d);
        cpa.push(c);
    }
    let uniform = |r: &[usize]| {
        let firsts = r.iter().filter(|&&x| x == 1).count();
        let mean = r.iter().sum::<usize>() as f64 / r.len() as f64;
        (firsts <= 5 && (mean - 8.5).abs() <= 3.1, firsts, mean)
    };
    let (du, df, dm) = uniform(&dpa);
    let (cu, cf, cm) = uniform(&cpa);
    Ok((
        trig == (1, 1) && du && cu,
        format!(
            "triggered ranks DPA {} CPA {}; nominal over 20 seeds: DPA rank1 x{df} mean {dm:.1}, CPA rank1 x{cf} mean {cm:.1}",
            trig.0, trig.1
        ),
    ))
}

fn c8_sweep(ctx: &Ctx) -> Result<(bool, String)> {
    let n = synthesize_shared_g();
    let spec = TrojanSpec::shared_g(&n)?;
    let nominal = n.nominal_delays();
    let l = n.critical_path_excluding(&nominal, &spec.instances);
    let d = 1.25 * l;
    let vectors = random_vector_pairs(n.inputs().len(), 10_000, 8);
    let mut paths = Vec::new();
    for t in SHARED_G_TARGETS {
        let p = select_path(&n, t)?;
        anyhow::ensure!(verify_witness(&n, &p), "witness through {t} does not re-verify");
        paths.push(p);
    }
    let cfg = GaConfig {
        target_delay: d,
        c: 1.5,
        seed: 1,
        ..GaConfig::default()
    };
    let ga = distribute_delays(&n, &paths, &spec, &cfg, &vectors, ctx.exec)?;
    ga.assignment.check()?;
    let delays = ga.assignment.delays(&n);
    let grid = period_grid(1.5 * d, 0.5 * l, 201);
    let sweep = sweep_clock(&n, &delays, &spec, &grid, &vectors, DEFAULT_SETUP_MARGIN, ctx.exec)?;
    let prov = Provenance::new("demo sweep").param("D", d).param("c", cfg.c).param("seed", 8);
    ctx.artifact("sweep.csv", &prov, &sweep.to_csv())?;
    let mut buf = Vec::new();
    delays.write_csv(&n, &mut buf)?;
    ctx.artifact("delays.csv", &prov, std::str::from_utf8(&buf)?)?;

    let r = &ga.report;
    let ga_ok = r.error_rate_design == 0.0 && r.error_rate_target == 1.0 && r.cost == 1.0;
    let band3 = sweep.band(DesignState::Trojan);
    let band3_ok = sweep
        .points
        .iter()
        .filter(|p| p.state == DesignState::Trojan)
        .all(|p| p.wrong == 0 && p.all_missed == p.toggling && p.toggling > 0);
    let l_eff = ga.assigned_critical / (1.0 - DEFAULT_SETUP_MARGIN);
    let edges_ok = band3.is_some_and(|b| (b.high - d).abs() <= 0.05 * d && (b.low - l_eff).abs() <= 0.05 * l_eff);
    let states: Vec<&str> = sweep.bands().iter().map(|b| b.state.symbol()).collect();
    let band_txt = band3.map_or("none".to_string(), |b| format!("[{:.4}, {:.4}]", b.low, b.high));
    Ok((
        ga_ok && sweep.is_ordered() && band3.is_some() && band3_ok && edges_ok,
        format!(
            "GA ed={} et={} cost={}; bands {} ; ③ T in {band_txt} (D={d}, L/0.98={l_eff:.4})",
            r.error_rate_design,
            r.error_rate_target,
            r.cost,
            states.join("")
        ),
    ))
}

fn gaussian_set(n_per_group: usize, n_samples: usize, shift: f64, seed: u64) -> TraceSet {
    let mut rng = seeded_rng(seed, 0);
    let mut set = TraceSet::new(n_samples);
    let mut row = vec![0f32; n_samples];
    for i in 0..2 * n_per_group {
        let group = if i % 2 == 0 { Group::Fixed } else { Group::Random };
        for (j, x) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mu = if group == Group::Random { shift * (j + 1) as f64 } else { 0.0 };
            *x = (z + mu) as f32;
        }
        let meta = TraceMeta {
            index: i as u64,
            group,
            plaintext: rng.random(),
            ciphertext: 0,
            seed: 0,
        };
        set.push(&row, meta).expect("row width");
    }
    set
}

fn c9_stats(ctx: &Ctx) -> Result<(bool, String)> {
    let small = gaussian_set(10_000, 1, 1.0, 9);
    let t = welch_t_with(&small, 1, ctx.exec)?.t[0];
    let t_ok = ((t + 70.7) / 70.7).abs() <= 0.05;

    let big = gaussian_set(500_000, 4, 0.002, 10);
    let mut worst: f64 = 0.0;
    for order in 1..=3 {
        let s = welch_t_with(&big, order, ctx.exec)?;
        let b = batch::welch_t(&big, order)?;
        for (x, y) in s.t.iter().zip(&b.t) {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    let agree_ok = worst <= 1e-6;

    let mut swapped = small.clone();
    for m in &mut swapped.meta {
        m.group = match m.group {
            Group::Fixed => Group::Random,
            Group::Random => Group::Fixed,
        };
    }
    let anti_ok = (1..=3).all(|o| {
        let a = welch_t_with(&small, o, Exec::Sequential).unwrap();
        let b = welch_t_with(&swapped, o, Exec::Sequential).unwrap();
        a.t.iter().zip(&b.t).all(|(x, y)| *x == -*y)
    });
    Ok((
        t_ok && agree_ok && anti_ok,
        format!("t = {t:.2} (target -70.7 ± 5%); streaming vs batch rel. diff {worst:.1e}; antisymmetric {anti_ok}"),
    ))
}
