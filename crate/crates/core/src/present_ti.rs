//! PRESENT-80 and its three-share threshold implementation with a
//! removable correction term.
//!
//! Every S-box goes through a two-stage shared pipeline: `y = G*(x)` into a
//! register, then `z = F*(y)`, with `S = F ∘ G`. `G*` carries three
//! correction terms on output bit 1. The `c²b²` term is instantiated once in
//! `G¹` and once in `G³`; dropping both instances keeps the ciphertext
//! correct but breaks uniformity.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sharing::{parse_sharing, CorrectionTerm, SharedFunction};

pub const ROUNDS: usize = 31;
pub const SBOX: [u8; 16] = [
    0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2,
];
pub const SBOX_HEX: &str = "C56B90AD3EF84712";
pub const G_HEX: &str = "7E92B04D5CA1836F";
pub const F_HEX: &str = "08B7A31C46F9ED52";

/// Shared `G` before correction terms, `x^i = <d^i, c^i, b^i, a^i>`.
pub const G_UNCORRECTED_EQUATIONS: &str = "\
y1_0 = 1 + a2 + d2 c3 + d3 c2 + d2 b3 + d3 b2 + c2 b3 + c3 b2 + d2 c2 + d2 b2 + c2 b2
y1_1 = 1 + b2 + d3 + c2 a3 + c3 a2 + b2 a3 + b3 a2 + c2 a2 + b2 a2
y1_2 = 1 + c2 + b2
y1_3 = c2 + b2 + a2
y2_0 = a3 + d3 c3 + d1 c3 + d3 c1 + d3 b3 + d1 b3 + d3 b1 + c3 b3 + c1 b3 + c3 b1
y2_1 = b3 + d1 + c1 a3 + c3 a1 + b1 a3 + b3 a1 + c3 a3 + b3 a3
y2_2 = c3 + b3
y2_3 = c3 + b3 + a3
y3_0 = a1 + d1 c1 + d1 c2 + d2 c1 + d1 b1 + d1 b2 + d2 b1 + c1 b1 + c1 b2 + c2 b1
y3_1 = b1 + d2 + c1 a2 + c2 a1 + b1 a2 + b2 a1 + c1 a1 + b1 a1
y3_2 = c1 + b1
y3_3 = c1 + b1 + a1
";

/// Uniform shared `F`.
pub const F_EQUATIONS: &str = "\
y1_0 = b2 + c2 a2 + c2 a3 + c3 a2
y1_1 = c2 + b2 + d2 a2 + d2 a3 + d3 a2
y1_2 = d2 + b2 a2 + b2 a3 + b3 a2
y1_3 = c2 + b2 + a2 + d2 a2 + d2 a3 + d3 a2
y2_0 = b3 + c3 a3 + c1 a3 + c3 a1
y2_1 = c3 + b3 + d3 a3 + d1 a3 + d3 a1
y2_2 = d3 + b3 a3 + b1 a3 + b3 a1
y2_3 = c3 + b3 + a3 + d3 a3 + d1 a3 + d3 a1
y3_0 = b1 + c1 a1 + c1 a2 + c2 a1
y3_1 = c1 + b1 + d1 a1 + d1 a2 + d2 a1
y3_2 = d1 + b1 a1 + b1 a2 + b2 a1
y3_3 = c1 + b1 + a1 + d1 a1 + d1 a2 + d2 a1
";

const CB: u8 = 0b0110;

/// `c¹b¹` into `G²`/`G³` bit 1.
pub fn correction_c1b1() -> CorrectionTerm {
    CorrectionTerm::new(0, CB, 1)
}

/// `c²b²` into `G¹`/`G³` bit 1: the term the Trojan cancels.
pub fn correction_c2b2() -> CorrectionTerm {
    CorrectionTerm::new(1, CB, 1)
}

/// `c³b³` into `G¹`/`G²` bit 1.
pub fn correction_c3b3() -> CorrectionTerm {
    CorrectionTerm::new(2, CB, 1)
}

pub fn g_corrections() -> [CorrectionTerm; 3] {
    [correction_c1b1(), correction_c2b2(), correction_c3b3()]
}

pub fn shared_g_uncorrected() -> SharedFunction {
    parse_sharing(G_UNCORRECTED_EQUATIONS).expect("builtin equations parse")
}

/// `G*` with all three correction terms: uniform.
pub fn shared_g() -> SharedFunction {
    crate::sharing::apply_corrections(&shared_g_uncorrected(), &g_corrections())
        .expect("builtin corrections are valid")
}

/// `G*` with both `c²b²` instances removed: correct, not uniform.
pub fn shared_g_triggered() -> SharedFunction {
    crate::sharing::apply_corrections(
        &shared_g_uncorrected(),
        &[correction_c1b1(), correction_c3b3()],
    )
    .expect("builtin corrections are valid")
}

pub fn shared_f() -> SharedFunction {
    parse_sharing(F_EQUATIONS).expect("builtin equations parse")
}

/// 80-bit PRESENT key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Key80(u128);

impl Key80 {
    pub const MASK: u128 = (1u128 << 80) - 1;

    pub fn new(k: u128) -> Result<Self> {
        if k > Self::MASK {
            return Err(Error::InvalidParameter(format!(
                "key {k:#x} wider than 80 bits"
            )));
        }
        Ok(Self(k))
    }

    pub fn value(self) -> u128 {
        self.0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random::<u128>() & Self::MASK)
    }
}

impl FromStr for Key80 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = parse_hex_u128(s, 20)?;
        Self::new(k)
    }
}

impl fmt::Display for Key80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:020X}", self.0)
    }
}

fn parse_hex_u128(s: &str, max_digits: usize) -> Result<u128> {
    let t: String = s
        .trim()
        .trim_start_matches("0x")
        .chars()
        .filter(|&c| c != '_')
        .collect();
    if t.is_empty() || t.len() > max_digits {
        return Err(Error::InvalidParameter(format!(
            "`{s}` is not a hex value of at most {max_digits} digits"
        )));
    }
    u128::from_str_radix(&t, 16)
        .map_err(|_| Error::InvalidParameter(format!("`{s}` is not hexadecimal")))
}

/// Parses a 64-bit block from hex (up to 16 digits).
pub fn parse_block(s: &str) -> Result<u64> {
    Ok(parse_hex_u128(s, 16)? as u64)
}

pub fn format_block(x: u64) -> String {
    format!("{x:016X}")
}

/// The 32 round keys of PRESENT-80.
pub fn round_keys(key: Key80) -> [u64; ROUNDS + 1] {
    let mut k = key.0;
    let mut out = [0u64; ROUNDS + 1];
    for (i, rk) in out.iter_mut().enumerate() {
        *rk = (k >> 16) as u64;
        k = ((k << 61) | (k >> 19)) & Key80::MASK;
        let top = (k >> 76) as usize;
        k = (k & !(0xFu128 << 76)) | (SBOX[top] as u128) << 76;
        k ^= ((i + 1) as u128) << 15;
    }
    out
}

pub fn sbox_layer(x: u64) -> u64 {
    (0..16).fold(0u64, |acc, n| {
        acc | (SBOX[((x >> (4 * n)) & 0xF) as usize] as u64) << (4 * n)
    })
}

const fn player_tables() -> [[u64; 256]; 8] {
    let mut t = [[0u64; 256]; 8];
    let mut byte = 0;
    while byte < 8 {
        let mut v = 0;
        while v < 256 {
            let mut out = 0u64;
            let mut j = 0;
            while j < 8 {
                if (v >> j) & 1 == 1 {
                    let i = byte * 8 + j;
                    let p = if i == 63 { 63 } else { (16 * i) % 63 };
                    out |= 1u64 << p;
                }
                j += 1;
            }
            t[byte][v] = out;
            v += 1;
        }
        byte += 1;
    }
    t
}

static PLAYER: [[u64; 256]; 8] = player_tables();

/// Bit `i` moves to `16 i mod 63`; bit 63 stays.
#[inline]
pub fn p_layer(x: u64) -> u64 {
    let mut out = 0;
    for (byte, table) in PLAYER.iter().enumerate() {
        out |= table[((x >> (8 * byte)) & 0xFF) as usize];
    }
    out
}

pub fn present_encrypt(pt: u64, key: Key80) -> u64 {
    let rks = round_keys(key);
    let mut s = pt;
    for rk in &rks[..ROUNDS] {
        s = p_layer(sbox_layer(s ^ rk));
    }
    s ^ rks[ROUNDS]
}

const LANES: u64 = 0x1111_1111_1111_1111;

#[derive(Clone, Copy)]
struct Planes {
    a: u64,
    b: u64,
    c: u64,
    d: u64,
}

impl Planes {
    #[inline]
    fn split(x: u64) -> Self {
        Self {
            a: x & LANES,
            b: (x >> 1) & LANES,
            c: (x >> 2) & LANES,
            d: (x >> 3) & LANES,
        }
    }
}

#[inline]
fn join(y0: u64, y1: u64, y2: u64, y3: u64) -> u64 {
    y0 | y1 << 1 | y2 << 2 | y3 << 3
}

/// Lanes (bit `4n` for nibble `n`) in which each `c²b²` instance is dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DropMask {
    pub in_g1: u64,
    pub in_g3: u64,
}

impl DropMask {
    pub const NONE: DropMask = DropMask { in_g1: 0, in_g3: 0 };
    pub const BOTH: DropMask = DropMask {
        in_g1: LANES,
        in_g3: LANES,
    };
}

/// One component of `G*` before correction, from its own and next share.
#[inline]
fn g_component(o: Planes, n: Planes, one: u64) -> [u64; 4] {
    let y0 = one
        ^ o.a
        ^ (o.d & n.c)
        ^ (n.d & o.c)
        ^ (o.d & n.b)
        ^ (n.d & o.b)
        ^ (o.c & n.b)
        ^ (n.c & o.b)
        ^ (o.d & o.c)
        ^ (o.d & o.b)
        ^ (o.c & o.b);
    let y1 = one
        ^ o.b
        ^ n.d
        ^ (o.c & n.a)
        ^ (n.c & o.a)
        ^ (o.b & n.a)
        ^ (n.b & o.a)
        ^ (o.c & o.a)
        ^ (o.b & o.a);
    let y2 = one ^ o.c ^ o.b;
    let y3 = o.c ^ o.b ^ o.a;
    [y0, y1, y2, y3]
}

#[inline]
fn f_component(o: Planes, n: Planes) -> [u64; 4] {
    let da = (o.d & o.a) ^ (o.d & n.a) ^ (n.d & o.a);
    let y0 = o.b ^ (o.c & o.a) ^ (o.c & n.a) ^ (n.c & o.a);
    let y1 = o.c ^ o.b ^ da;
    let y2 = o.d ^ (o.b & o.a) ^ (o.b & n.a) ^ (n.b & o.a);
    let y3 = o.c ^ o.b ^ o.a ^ da;
    [y0, y1, y2, y3]
}

/// `G*` on all 16 nibbles of three 64-bit shares.
#[inline]
pub fn g_star_word(x: [u64; 3], drop: DropMask) -> [u64; 3] {
    let p = [Planes::split(x[0]), Planes::split(x[1]), Planes::split(x[2])];
    let cb = [p[0].c & p[0].b, p[1].c & p[1].b, p[2].c & p[2].b];
    // component k sees own share k+1 and next share k+2
    let mut g1 = g_component(p[1], p[2], LANES);
    let mut g2 = g_component(p[2], p[0], 0);
    let mut g3 = g_component(p[0], p[1], 0);
    g1[1] ^= (cb[1] & !drop.in_g1) ^ cb[2];
    g2[1] ^= cb[0] ^ cb[2];
    g3[1] ^= cb[0] ^ (cb[1] & !drop.in_g3);
    [
        join(g1[0], g1[1], g1[2], g1[3]),
        join(g2[0], g2[1], g2[2], g2[3]),
        join(g3[0], g3[1], g3[2], g3[3]),
    ]
}

/// `F*` on all 16 nibbles of three 64-bit shares.
#[inline]
pub fn f_star_word(y: [u64; 3]) -> [u64; 3] {
    let p = [Planes::split(y[0]), Planes::split(y[1]), Planes::split(y[2])];
    let f1 = f_component(p[1], p[2]);
    let f2 = f_component(p[2], p[0]);
    let f3 = f_component(p[0], p[1]);
    [
        join(f1[0], f1[1], f1[2], f1[3]),
        join(f2[0], f2[1], f2[2], f2[3]),
        join(f3[0], f3[1], f3[2], f3[3]),
    ]
}

/// Which `c²b²` instances a single S-box evaluation computes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrectionState {
    pub drop_in_g1: bool,
    pub drop_in_g3: bool,
}

impl CorrectionState {
    pub const NOMINAL: CorrectionState = CorrectionState {
        drop_in_g1: false,
        drop_in_g3: false,
    };
    pub const TRIGGERED: CorrectionState = CorrectionState {
        drop_in_g1: true,
        drop_in_g3: true,
    };
}

/// Shared `G` on one nibble sharing.
pub fn shared_sbox_g(x1: u8, x2: u8, x3: u8, state: CorrectionState) -> (u8, u8, u8) {
    let drop = DropMask {
        in_g1: if state.drop_in_g1 { 1 } else { 0 },
        in_g3: if state.drop_in_g3 { 1 } else { 0 },
    };
    let [y1, y2, y3] = g_star_word([x1 as u64 & 0xF, x2 as u64 & 0xF, x3 as u64 & 0xF], drop);
    ((y1 & 0xF) as u8, (y2 & 0xF) as u8, (y3 & 0xF) as u8)
}

/// Shared `F` on one nibble sharing.
pub fn shared_sbox_f(y1: u8, y2: u8, y3: u8) -> (u8, u8, u8) {
    let [z1, z2, z3] = f_star_word([y1 as u64 & 0xF, y2 as u64 & 0xF, y3 as u64 & 0xF]);
    ((z1 & 0xF) as u8, (z2 & 0xF) as u8, (z3 & 0xF) as u8)
}

/// Operating state of the trojanized design as a function of clock speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrojanMode {
    /// Nominal clock: every correction term is computed.
    Nominal,
    /// Near the trigger band: each `c²b²` instance is lost independently with
    /// probability `p` per S-box evaluation.
    Metastable(f64),
    /// Both `c²b²` instances miss the clock edge.
    Triggered,
    /// Beyond the trigger band; the functional logic fails too.
    Overclocked,
}

impl TrojanMode {
    fn drop_probabilities(self) -> Result<(f64, f64)> {
        match self {
            TrojanMode::Nominal => Ok((0.0, 0.0)),
            TrojanMode::Triggered => Ok((1.0, 1.0)),
            TrojanMode::Metastable(p) => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "metastable drop probability {p} outside (0, 1)"
                    )));
                }
                Ok((p, p))
            }
            TrojanMode::Overclocked => Err(Error::OverclockedFault),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrojanMode::Nominal => "nominal",
            TrojanMode::Metastable(_) => "metastable",
            TrojanMode::Triggered => "triggered",
            TrojanMode::Overclocked => "overclocked",
        }
    }
}

impl fmt::Display for TrojanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrojanMode::Metastable(p) => write!(f, "metastable(p={p})"),
            m => f.write_str(m.name()),
        }
    }
}

impl FromStr for TrojanMode {
    type Err = Error;

    /// `nominal`, `triggered`, `overclocked`, `metastable` (p = 0.5) or `metastable:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "nominal" => Ok(TrojanMode::Nominal),
            "triggered" => Ok(TrojanMode::Triggered),
            "overclocked" => Ok(TrojanMode::Overclocked),
            "metastable" => Ok(TrojanMode::Metastable(0.5)),
            _ => {
                if let Some(p) = s.strip_prefix("metastable:") {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad probability `{p}`")))?;
                    let mode = TrojanMode::Metastable(p);
                    mode.drop_probabilities()?;
                    Ok(mode)
                } else {
                    Err(Error::InvalidParameter(format!("unknown mode `{s}`")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// `G*` outputs latched in the pipeline register.
    G,
    /// `F*` outputs after the permutation layer, latched in the state register.
    F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub round: u8,
    pub stage: Stage,
    pub shares: [u64; 3],
}

/// Register contents of one shared encryption, two clock cycles per round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CipherRunLog {
    pub plaintext: u64,
    pub ciphertext: u64,
    pub key: Key80,
    /// Plaintext sharing loaded into the state register.
    pub initial_state: [u64; 3],
    pub snapshots: Vec<Snapshot>,
}

impl CipherRunLog {
    pub const STAGES: usize = 2;
    pub const CYCLES: usize = ROUNDS * Self::STAGES;
}

/// Counter-based generator for one encryption or trace.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-nibble Bernoulli lane mask.
fn bernoulli_lanes<R: RngCore>(rng: &mut R, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return LANES;
    }
    (0..16).fold(0u64, |acc, n| {
        if rng.random_bool(p) {
            acc | 1 << (4 * n)
        } else {
            acc
        }
    })
}

/// Per-instance drop probabilities; [`TrojanMode`] maps onto this.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropPolicy {
    pub in_g1: f64,
    pub in_g3: f64,
}

impl TryFrom<TrojanMode> for DropPolicy {
    type Error = Error;

    fn try_from(mode: TrojanMode) -> Result<Self> {
        let (in_g1, in_g3) = mode.drop_probabilities()?;
        Ok(Self { in_g1, in_g3 })
    }
}

/// Shared encryption; masks and correction drops come from `seed`.
pub fn ti_encrypt(
    pt: u64,
    key: Key80,
    mode: TrojanMode,
    prng_on: bool,
    seed: u64,
) -> Result<(u64, CipherRunLog)> {
    let policy = DropPolicy::try_from(mode)?;
    Ok(ti_encrypt_with_policy(pt, key, policy, prng_on, seed))
}

/// [`ti_encrypt`] with explicit per-instance drop probabilities.
pub fn ti_encrypt_with_policy(
    pt: u64,
    key: Key80,
    policy: DropPolicy,
    prng_on: bool,
    seed: u64,
) -> (u64, CipherRunLog) {
    let rks = round_keys(key);
    ti_encrypt_round_keys(pt, key, &rks, policy, prng_on, seed)
}

pub(crate) fn ti_encrypt_round_keys(
    pt: u64,
    key: Key80,
    rks: &[u64; ROUNDS + 1],
    policy: DropPolicy,
    prng_on: bool,
    seed: u64,
) -> (u64, CipherRunLog) {
    let mut rng = seeded_rng(seed, 0);
    let (m1, m2) = if prng_on {
        (rng.next_u64(), rng.next_u64())
    } else {
        (0, 0)
    };
    let mut state = [pt ^ m1 ^ m2, m1, m2];
    let initial_state = state;
    let mut snapshots = Vec::with_capacity(CipherRunLog::CYCLES);
    for (r, rk) in rks[..ROUNDS].iter().enumerate() {
        state[0] ^= rk;
        let drop = DropMask {
            in_g1: bernoulli_lanes(&mut rng, policy.in_g1),
            in_g3: bernoulli_lanes(&mut rng, policy.in_g3),
        };
        let pipe = g_star_word(state, drop);
        snapshots.push(Snapshot {
            round: r as u8,
            stage: Stage::G,
            shares: pipe,
        });
        let z = f_star_word(pipe);
        state = [p_layer(z[0]), p_layer(z[1]), p_layer(z[2])];
        snapshots.push(Snapshot {
            round: r as u8,
            stage: Stage::F,
            shares: state,
        });
    }
    state[0] ^= rks[ROUNDS];
    let ciphertext = state[0] ^ state[1] ^ state[2];
    (
        ciphertext,
        CipherRunLog {
            plaintext: pt,
            ciphertext,
            key,
            initial_state,
            snapshots,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfunc::{compose, TruthTable};
    use crate::sharing::{
        check_correctness, check_non_completeness, check_uniformity, recombine, SharedInput,
    };

    /// Bit-by-bit PRESENT-80 written straight from the cipher description,
    /// sharing no code with the table-driven implementation above.
    fn reference_present(pt: u64, key: u128) -> u64 {
        let sbox = |n: u8| -> u8 {
            let t = "C56B90AD3EF84712".as_bytes()[n as usize] as char;
            t.to_digit(16).unwrap() as u8
        };
        let mut bits: Vec<u8> = (0..64).map(|i| ((pt >> i) & 1) as u8).collect();
        let mut k: Vec<u8> = (0..80).map(|i| ((key >> i) & 1) as u8).collect();
        let round_key = |k: &Vec<u8>| -> Vec<u8> { k[16..80].to_vec() };
        for round in 1..=32u32 {
            let rk = round_key(&k);
            for i in 0..64 {
                bits[i] ^= rk[i];
            }
            if round == 32 {
                break;
            }
            for n in 0..16 {
                let v = (0..4).fold(0u8, |a, j| a | bits[4 * n + j] << j);
                let s = sbox(v);
                for j in 0..4 {
                    bits[4 * n + j] = (s >> j) & 1;
                }
            }
            let mut permuted = vec![0u8; 64];
            for i in 0..64 {
                let p = if i == 63 { 63 } else { (i * 16) % 63 };
                permuted[p] = bits[i];
            }
            bits = permuted;
            // key register update: rotate left by 61
            let mut rot = vec![0u8; 80];
            for i in 0..80 {
                rot[(i + 61) % 80] = k[i];
            }
            k = rot;
            let top = (0..4).fold(0u8, |a, j| a | k[76 + j] << j);
            let s = sbox(top);
            for j in 0..4 {
                k[76 + j] = (s >> j) & 1;
            }
            for j in 0..5 {
                k[15 + j] ^= ((round >> j) & 1) as u8;
            }
        }
        bits.iter().enumerate().fold(0u64, |a, (i, &b)| a | (b as u64) << i)
    }

    const ONES80: u128 = (1u128 << 80) - 1;

    #[test]
    fn published_vectors_match_independent_reference() {
        let cases = [
            (0u64, 0u128, 0x5579C1387B228445u64),
            (0, ONES80, 0xE72C46C0F5945049),
            (u64::MAX, 0, 0xA112FFC72F68417B),
            (u64::MAX, ONES80, 0x3333DCD3213210D2),
        ];
        for (pt, key, ct) in cases {
            assert_eq!(reference_present(pt, key), ct);
            assert_eq!(present_encrypt(pt, Key80::new(key).unwrap()), ct);
        }
    }

    #[test]
    fn random_inputs_match_independent_reference() {
        let mut rng = seeded_rng(99, 0);
        for _ in 0..200 {
            let pt = rng.next_u64();
            let key = Key80::random(&mut rng);
            assert_eq!(present_encrypt(pt, key), reference_present(pt, key.value()));
        }
    }

    #[test]
    fn single_round_by_hand() {
        assert_eq!(sbox_layer(0), 0xCCCC_CCCC_CCCC_CCCC);
        // nibble value C = bits 2,3 of every nibble
        let expected = (0..64)
            .filter(|i| i % 4 >= 2)
            .map(|i: u64| if i == 63 { 63 } else { (16 * i) % 63 })
            .fold(0u64, |a, p| a | 1 << p);
        assert_eq!(p_layer(sbox_layer(0)), expected);
        assert_eq!(p_layer(sbox_layer(0)), 0xFFFF_FFFF_0000_0000);
    }

    #[test]
    fn key_parsing() {
        let k: Key80 = "FFFFFFFFFFFFFFFFFFFF".parse().unwrap();
        assert_eq!(k.value(), ONES80);
        assert!("1FFFFFFFFFFFFFFFFFFFF".parse::<Key80>().is_err());
        assert_eq!(k.to_string(), "FFFFFFFFFFFFFFFFFFFF");
        assert_eq!(parse_block("0").unwrap(), 0);
        assert!(parse_block("xyz").is_err());
    }

    #[test]
    fn builtin_sharings_have_the_published_properties() {
        let g = TruthTable::from_hex(G_HEX).unwrap();
        let f = TruthTable::from_hex(F_HEX).unwrap();
        let unc = shared_g_uncorrected();
        assert!(check_correctness(&unc, &g).unwrap());
        assert!(!check_uniformity(&unc));
        assert!(check_uniformity(&shared_g()));
        let trig = shared_g_triggered();
        assert!(check_correctness(&trig, &g).unwrap());
        assert!(!check_uniformity(&trig));
        assert!(check_correctness(&shared_f(), &f).unwrap());
        assert!(check_uniformity(&shared_f()));
        for sf in [unc, shared_g(), trig, shared_f()] {
            assert!(check_non_completeness(&sf));
        }
        assert_eq!(compose(&f, &g).unwrap().to_hex(), SBOX_HEX);
    }

    #[test]
    fn bitsliced_pipeline_matches_parsed_equations() {
        let g = shared_g();
        let g_trig = shared_g_triggered();
        let f = shared_f();
        for idx in 0..4096u32 {
            let (x1, x2, x3) = ((idx & 15) as u8, ((idx >> 4) & 15) as u8, (idx >> 8) as u8);
            let input = SharedInput::new(x1, x2, x3);
            let (a, b, c) = shared_sbox_g(x1, x2, x3, CorrectionState::NOMINAL);
            assert_eq!([a, b, c], g.eval(input));
            let (a, b, c) = shared_sbox_g(x1, x2, x3, CorrectionState::TRIGGERED);
            assert_eq!([a, b, c], g_trig.eval(input));
            let (a, b, c) = shared_sbox_f(x1, x2, x3);
            assert_eq!([a, b, c], f.eval(input));
            // full S-box through the pipeline
            for st in [CorrectionState::NOMINAL, CorrectionState::TRIGGERED] {
                let (y1, y2, y3) = shared_sbox_g(x1, x2, x3, st);
                let (z1, z2, z3) = shared_sbox_f(y1, y2, y3);
                assert_eq!(z1 ^ z2 ^ z3, SBOX[(x1 ^ x2 ^ x3) as usize]);
            }
        }
        let (a, b, c) = shared_sbox_g(0, 0, 0, CorrectionState::NOMINAL);
        assert_eq!(a ^ b ^ c, 7);
        let (a, b, c) = shared_sbox_f(0, 0, 0);
        assert_eq!(a ^ b ^ c, 0);
        assert_eq!(recombine(&g, SharedInput::new(0, 0, 0)), 7);
    }

    #[test]
    fn single_dropped_instance_breaks_correctness() {
        let st = CorrectionState {
            drop_in_g1: true,
            drop_in_g3: false,
        };
        let wrong = (0..4096u32).any(|idx| {
            let (x1, x2, x3) = ((idx & 15) as u8, ((idx >> 4) & 15) as u8, (idx >> 8) as u8);
            let (y1, y2, y3) = shared_sbox_g(x1, x2, x3, st);
            y1 ^ y2 ^ y3 != TruthTable::from_hex(G_HEX).unwrap().get(x1 ^ x2 ^ x3)
        });
        assert!(wrong);
        let policy = DropPolicy {
            in_g1: 1.0,
            in_g3: 0.0,
        };
        let key = Key80::new(0x0123_4567_89AB_CDEF_0123).unwrap();
        let faulty = (0..20u64).any(|i| {
            let (ct, _) = ti_encrypt_with_policy(i * 0x9E37_79B9, key, policy, true, i);
            ct != present_encrypt(i * 0x9E37_79B9, key)
        });
        assert!(faulty);
    }

    #[test]
    fn shared_encryption_modes() {
        let mut rng = seeded_rng(5, 1);
        for i in 0..500u64 {
            let pt = rng.next_u64();
            let key = Key80::random(&mut rng);
            let expected = present_encrypt(pt, key);
            for mode in [TrojanMode::Nominal, TrojanMode::Triggered] {
                let (ct, log) = ti_encrypt(pt, key, mode, true, i).unwrap();
                assert_eq!(ct, expected);
                assert_eq!(log.snapshots.len(), CipherRunLog::CYCLES);
                assert_eq!(log.ciphertext, expected);
            }
        }
        assert_eq!(
            ti_encrypt(0, Key80::default(), TrojanMode::Overclocked, true, 0).unwrap_err(),
            Error::OverclockedFault
        );
        assert!(ti_encrypt(0, Key80::default(), TrojanMode::Metastable(1.0), true, 0).is_err());
    }

    #[test]
    fn prng_off_uses_zero_masks() {
        let (_, log) = ti_encrypt(0xABCD, Key80::default(), TrojanMode::Nominal, false, 3).unwrap();
        assert_eq!(log.initial_state, [0xABCD, 0, 0]);
        let (_, log) = ti_encrypt(0xABCD, Key80::default(), TrojanMode::Nominal, true, 3).unwrap();
        assert_eq!(log.initial_state.iter().fold(0, |a, s| a ^ s), 0xABCD);
        assert_ne!(log.initial_state[1], 0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Triggered".parse::<TrojanMode>().unwrap(), TrojanMode::Triggered);
        assert_eq!(
            "metastable:0.25".parse::<TrojanMode>().unwrap(),
            TrojanMode::Metastable(0.25)
        );
        assert!("metastable:1.5".parse::<TrojanMode>().is_err());
        assert!("fast".parse::<TrojanMode>().is_err());
    }
}
