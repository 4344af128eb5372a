//! Power-trace synthesis from register snapshots and fixed-vs-random campaigns.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::present_ti::{
    round_keys, seeded_rng, ti_encrypt_round_keys, CipherRunLog, DropPolicy, Key80, TrojanMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LeakageKind {
    HammingWeight,
    #[default]
    HammingDistance,
}

impl FromStr for LeakageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hw" | "hammingweight" | "hamming_weight" => Ok(Self::HammingWeight),
            "hd" | "hammingdistance" | "hamming_distance" => Ok(Self::HammingDistance),
            _ => Err(Error::InvalidParameter(format!("unknown leakage model `{s}`"))),
        }
    }
}

impl fmt::Display for LeakageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HammingWeight => "hw",
            Self::HammingDistance => "hd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakageModel {
    pub kind: LeakageKind,
    /// Power units per toggled (HD) or set (HW) bit.
    pub alpha: f64,
    /// Gaussian noise standard deviation, power units.
    pub sigma: f64,
    pub samples_per_cycle: usize,
}

impl Default for LeakageModel {
    fn default() -> Self {
        Self {
            kind: LeakageKind::HammingDistance,
            alpha: 1.0,
            sigma: 2.0,
            samples_per_cycle: 1,
        }
    }
}

impl LeakageModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma {} must be >= 0", self.sigma)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if self.samples_per_cycle == 0 {
            return Err(Error::InvalidParameter("samples_per_cycle must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        CipherRunLog::CYCLES * self.samples_per_cycle
    }
}

/// Noise-free leakage per clock cycle: pipeline register on `G` cycles,
/// state register on `F` cycles. Both registers start from the loaded
/// plaintext sharing and a cleared pipeline.
pub fn cycle_leakage(log: &CipherRunLog, kind: LeakageKind) -> Vec<u32> {
    let mut pipe = [0u64; 3];
    let mut state = log.initial_state;
    log.snapshots
        .iter()
        .map(|snap| {
            let reg = match snap.stage {
                crate::present_ti::Stage::G => &mut pipe,
                crate::present_ti::Stage::F => &mut state,
            };
            let v = (0..3)
                .map(|i| match kind {
                    LeakageKind::HammingWeight => snap.shares[i].count_ones(),
                    LeakageKind::HammingDistance => (snap.shares[i] ^ reg[i]).count_ones(),
                })
                .sum();
            *reg = snap.shares;
            v
        })
        .collect()
}

/// One trace row from a run log.
pub fn synthesize_trace<R: RngCore + ?Sized>(
    log: &CipherRunLog,
    model: &LeakageModel,
    rng: &mut R,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(model.n_samples());
    synthesize_into(log, model, rng, &mut out);
    out
}

fn synthesize_into<R: RngCore + ?Sized>(
    log: &CipherRunLog,
    model: &LeakageModel,
    rng: &mut R,
    out: &mut Vec<f32>,
) {
    for v in cycle_leakage(log, model.kind) {
        let base = model.alpha * v as f64;
        for _ in 0..model.samples_per_cycle {
            let noise = if model.sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                model.sigma * z
            } else {
                0.0
            };
            out.push((base + noise) as f32);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Fixed,
    Random,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Fixed => "fixed",
            Group::Random => "random",
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Group::Fixed),
            "random" => Ok(Group::Random),
            _ => Err(Error::TraceFormat(format!("unknown group `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceMeta {
    pub index: u64,
    pub group: Group,
    pub plaintext: u64,
    pub ciphertext: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TraceSet {
    pub n_samples: usize,
    /// Row-major, `n_traces * n_samples`.
    pub samples: Vec<f32>,
    pub meta: Vec<TraceMeta>,
}

impl TraceSet {
    pub fn new(n_samples: usize) -> Self {
        Self {
            n_samples,
            samples: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn n_traces(&self) -> usize {
        self.meta.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f32], &TraceMeta)> {
        self.samples
            .chunks_exact(self.n_samples.max(1))
            .zip(self.meta.iter())
    }

    pub fn push(&mut self, row: &[f32], meta: TraceMeta) -> Result<()> {
        if row.len() != self.n_samples {
            return Err(Error::TraceFormat(format!(
                "row of {} samples in a set of {}",
                row.len(),
                self.n_samples
            )));
        }
        self.samples.extend_from_slice(row);
        self.meta.push(meta);
        Ok(())
    }

    pub fn append(&mut self, other: TraceSet) -> Result<()> {
        if other.n_samples != self.n_samples && !other.meta.is_empty() {
            return Err(Error::TraceFormat("sample count mismatch".into()));
        }
        self.samples.extend(other.samples);
        self.meta.extend(other.meta);
        Ok(())
    }

    /// Traces `0..n`.
    pub fn prefix(&self, n: usize) -> TraceSet {
        let n = n.min(self.n_traces());
        TraceSet {
            n_samples: self.n_samples,
            samples: self.samples[..n * self.n_samples].to_vec(),
            meta: self.meta[..n].to_vec(),
        }
    }

    pub fn filter_group(&self, group: Group) -> TraceSet {
        let mut out = TraceSet::new(self.n_samples);
        for (row, meta) in self.rows() {
            if meta.group == group {
                out.samples.extend_from_slice(row);
                out.meta.push(*meta);
            }
        }
        out
    }
}

/// How plaintexts are assigned to traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Acquisition {
    /// Coin flip per trace between the fixed plaintext and a fresh random one.
    #[default]
    FixedVsRandom,
    /// Every trace uses a fresh random plaintext.
    RandomOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CampaignConfig {
    pub n_traces: u64,
    pub fixed_pt: u64,
    pub key: Key80,
    pub mode: TrojanMode,
    pub prng_on: bool,
    pub model: LeakageModel,
    pub master_seed: u64,
    pub acquisition: Acquisition,
}

impl CampaignConfig {
    pub fn new(n_traces: u64, key: Key80, mode: TrojanMode, prng_on: bool, master_seed: u64) -> Self {
        Self {
            n_traces,
            fixed_pt: 0,
            key,
            mode,
            prng_on,
            model: LeakageModel::default(),
            master_seed,
            acquisition: Acquisition::FixedVsRandom,
        }
    }

    pub fn validate(&self) -> Result<DropPolicy> {
        if self.n_traces == 0 {
            return Err(Error::InvalidParameter("n_traces must be > 0".into()));
        }
        self.model.validate()?;
        DropPolicy::try_from(self.mode)
    }
}

/// Seed of trace `index`, a SplitMix64 finalizer over the master seed and counter.
pub fn trace_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Prepared {
    rks: [u64; crate::present_ti::ROUNDS + 1],
    policy: DropPolicy,
}

fn generate_one(cfg: &CampaignConfig, prep: &Prepared, index: u64, row: &mut Vec<f32>) -> TraceMeta {
    let seed = trace_seed(cfg.master_seed, index);
    // stream 0 drives the masks and drops inside the cipher, stream 1 the campaign
    let mut rng = seeded_rng(seed, 1);
    let group = match cfg.acquisition {
        Acquisition::FixedVsRandom => {
            if rng.random::<bool>() {
                Group::Fixed
            } else {
                Group::Random
            }
        }
        Acquisition::RandomOnly => Group::Random,
    };
    let plaintext = match group {
        Group::Fixed => cfg.fixed_pt,
        Group::Random => rng.next_u64(),
    };
    let (ciphertext, log) =
        ti_encrypt_round_keys(plaintext, cfg.key, &prep.rks, prep.policy, cfg.prng_on, seed);
    synthesize_into(&log, &cfg.model, &mut rng, row);
    TraceMeta {
        index,
        group,
        plaintext,
        ciphertext,
        seed,
    }
}

/// Generates traces `range` of a campaign.
pub fn campaign_chunk(cfg: &CampaignConfig, range: std::ops::Range<u64>) -> Result<TraceSet> {
    let policy = cfg.validate()?;
    let prep = Prepared {
        rks: round_keys(cfg.key),
        policy,
    };
    let mut set = TraceSet::new(cfg.model.n_samples());
    set.samples.reserve((range.end - range.start) as usize * set.n_samples);
    for i in range {
        let meta = generate_one(cfg, &prep, i, &mut set.samples);
        set.meta.push(meta);
    }
    Ok(set)
}

pub const DEFAULT_CHUNK: usize = 4096;

pub fn run_campaign(cfg: &CampaignConfig) -> Result<TraceSet> {
    run_campaign_with(cfg, Exec::default())
}

pub fn run_campaign_with(cfg: &CampaignConfig, exec: Exec) -> Result<TraceSet> {
    cfg.validate()?;
    let n = cfg.n_traces as usize;
    let parts = exec.map_range(n.div_ceil(DEFAULT_CHUNK), |c| {
        let lo = (c * DEFAULT_CHUNK) as u64;
        let hi = (((c + 1) * DEFAULT_CHUNK).min(n)) as u64;
        campaign_chunk(cfg, lo..hi)
    });
    let mut set = TraceSet::new(cfg.model.n_samples());
    set.samples.reserve(n * set.n_samples);
    set.meta.reserve(n);
    for part in parts {
        set.append(part?)?;
    }
    Ok(set)
}

/// Folds every trace of a campaign into per-chunk accumulators and merges
/// them in chunk order, without materializing the trace set.
pub fn campaign_reduce<A, I, F, M>(
    cfg: &CampaignConfig,
    exec: Exec,
    chunk: usize,
    init: I,
    fold: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &[f32], &TraceMeta) + Sync + Send,
    M: Fn(A, A) -> A,
{
    let policy = cfg.validate()?;
    let prep = Prepared {
        rks: round_keys(cfg.key),
        policy,
    };
    let out = exec.chunked_reduce(
        cfg.n_traces as usize,
        chunk,
        |range| {
            let mut acc = init();
            let mut row = Vec::with_capacity(cfg.model.n_samples());
            for i in range {
                row.clear();
                let meta = generate_one(cfg, &prep, i as u64, &mut row);
                fold(&mut acc, &row, &meta);
            }
            acc
        },
        merge,
    );
    Ok(out.unwrap_or_else(init))
}

const MAGIC: &[u8; 4] = b"SCTR";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
pub const METADATA_HEADER: &str = "index,group,plaintext_hex,ciphertext_hex";

/// Streams rows into a trace file whose header is written up front.
pub struct TraceWriter<W: Write> {
    out: W,
    n_samples: usize,
    remaining: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, n_traces: u64, n_samples: usize) -> Result<Self> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&n_traces.to_le_bytes())?;
        out.write_all(&(n_samples as u32).to_le_bytes())?;
        out.write_all(&[DTYPE_F32])?;
        Ok(Self {
            out,
            n_samples,
            remaining: n_traces,
        })
    }

    pub fn write_row(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.n_samples || self.remaining == 0 {
            return Err(Error::TraceFormat("row does not fit the declared shape".into()));
        }
        let mut buf = Vec::with_capacity(4 * row.len());
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.remaining -= 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.remaining != 0 {
            return Err(Error::TraceFormat(format!(
                "{} declared traces were never written",
                self.remaining
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_traces<W: Write>(out: W, set: &TraceSet) -> Result<()> {
    let mut w = TraceWriter::new(out, set.n_traces() as u64, set.n_samples)?;
    for (row, _) in set.rows() {
        w.write_row(row)?;
    }
    w.finish()?;
    Ok(())
}

/// Reads the sample matrix; returns `(n_samples, samples)`.
pub fn read_trace_matrix<R: Read>(mut input: R) -> Result<(usize, usize, Vec<f32>)> {
    let mut header = [0u8; 19];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::TraceFormat("truncated header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::TraceFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::TraceFormat(format!("unsupported version {version}")));
    }
    let n_traces = u64::from_le_bytes(header[6..14].try_into().unwrap()) as usize;
    let n_samples = u32::from_le_bytes(header[14..18].try_into().unwrap()) as usize;
    if header[18] != DTYPE_F32 {
        return Err(Error::TraceFormat(format!("unsupported dtype {}", header[18])));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != n_traces * n_samples * 4 {
        return Err(Error::TraceFormat(format!(
            "expected {} sample bytes, found {}",
            n_traces * n_samples * 4,
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((n_traces, n_samples, samples))
}

pub fn write_metadata<W: Write>(mut out: W, meta: &[TraceMeta]) -> Result<()> {
    writeln!(out, "{METADATA_HEADER}")?;
    for m in meta {
        writeln!(
            out,
            "{},{},{:016X},{:016X}",
            m.index,
            m.group.as_str(),
            m.plaintext,
            m.ciphertext
        )?;
    }
    Ok(())
}

/// Parses the metadata sidecar; lines starting with `#` are skipped.
/// Trace seeds are not stored and come back as 0.
pub fn read_metadata<R: Read>(input: R) -> Result<Vec<TraceMeta>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != METADATA_HEADER {
                return Err(Error::TraceFormat(format!("bad metadata header `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let bad = || Error::TraceFormat(format!("metadata line {}: `{line}`", n + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        out.push(TraceMeta {
            index: f[0].parse().map_err(|_| bad())?,
            group: f[1].parse()?,
            plaintext: u64::from_str_radix(f[2], 16).map_err(|_| bad())?,
            ciphertext: u64::from_str_radix(f[3], 16).map_err(|_| bad())?,
            seed: 0,
        });
    }
    Ok(out)
}

/// Writes `<path>` and its `<path>.csv` metadata sidecar.
pub fn save_trace_set(path: &Path, set: &TraceSet) -> Result<()> {
    write_traces(BufWriter::new(std::fs::File::create(path)?), set)?;
    let mut side = BufWriter::new(std::fs::File::create(sidecar_path(path))?);
    write_metadata(&mut side, &set.meta)?;
    side.flush()?;
    Ok(())
}

pub fn load_trace_set(path: &Path) -> Result<TraceSet> {
    let (n_traces, n_samples, samples) =
        read_trace_matrix(BufReader::new(std::fs::File::open(path)?))?;
    let meta = read_metadata(std::fs::File::open(sidecar_path(path))?)?;
    if meta.len() != n_traces {
        return Err(Error::TraceFormat(format!(
            "{n_traces} traces but {} metadata rows",
            meta.len()
        )));
    }
    Ok(TraceSet {
        n_samples,
        samples,
        meta,
    })
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".csv");
    s.into()
}
