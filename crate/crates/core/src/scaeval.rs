//! Welch t-tests in three moments, CPA, classical DPA and progress curves.
//!
//! Every statistic is built from mergeable accumulators, so streaming over
//! a campaign and batch evaluation of a stored trace set share one code path
//! per accumulator. [`batch`] holds an independent two-pass implementation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::leakage::{Group, TraceMeta, TraceSet};
use crate::present_ti::{Key80, SBOX};

pub const THRESHOLD: f64 = 4.5;

/// Count, mean and central moment sums `M2..M6` of a sample stream.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    /// `m[p - 2]` is `Σ (x - mean)^p`.
    pub m: [f64; 5],
}

const BINOM: [[f64; 7]; 7] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0, 0.0, 0.0],
    [1.0, 5.0, 10.0, 10.0, 5.0, 1.0, 0.0],
    [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0],
];

impl Moments {
    /// `Σ (x - mean)^p` for `p` in `0..=6`.
    #[inline]
    fn sum_pow(&self, p: usize) -> f64 {
        match p {
            0 => self.n,
            1 => 0.0,
            _ => self.m[p - 2],
        }
    }

    /// Pairwise combination of two streams (Pébay's update formula).
    pub fn merge(&self, other: &Moments) -> Moments {
        if other.n == 0.0 {
            return *self;
        }
        if self.n == 0.0 {
            return *other;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let mut out = Moments {
            n,
            mean: self.mean + delta * nb / n,
            m: [0.0; 5],
        };
        for p in 2..=6 {
            let mut acc = self.sum_pow(p) + other.sum_pow(p);
            let mut dk = 1.0;
            for k in 1..=p - 2 {
                dk *= delta;
                acc += BINOM[p][k]
                    * dk
                    * ((-nb / n).powi(k as i32) * self.sum_pow(p - k)
                        + (na / n).powi(k as i32) * other.sum_pow(p - k));
            }
            acc += (na * nb * delta / n).powi(p as i32)
                * (1.0 / nb.powi(p as i32 - 1) - (-1.0 / na).powi(p as i32 - 1));
            out.m[p - 2] = acc;
        }
        out
    }

    /// [`merge`](Self::merge) with a one-point stream, whose central sums vanish.
    #[inline]
    pub fn push(&mut self, x: f64) {
        let na = self.n;
        if na == 0.0 {
            *self = Moments {
                n: 1.0,
                mean: x,
                m: [0.0; 5],
            };
            return;
        }
        let n = na + 1.0;
        let delta = x - self.mean;
        let r = -delta / n;
        let rk = [1.0, r, r * r, r * r * r, r * r * r * r];
        let a = na * delta / n;
        let inv = -1.0 / na;
        let old = self.m;
        let mut ap = a;
        let mut ip = 1.0;
        for p in 2..=6 {
            ap *= a;
            ip *= inv;
            let mut acc = old[p - 2];
            for k in 1..=p - 2 {
                acc += BINOM[p][k] * rk[k] * old[p - k - 2];
            }
            self.m[p - 2] = acc + ap * (1.0 - ip);
        }
        self.n = n;
        self.mean += delta / n;
    }

    /// `E[(x - mean)^p]`.
    pub fn central(&self, p: usize) -> f64 {
        self.sum_pow(p) / self.n
    }

    pub fn unbiased_variance(&self) -> f64 {
        self.m[0] / (self.n - 1.0)
    }

    /// Mean and variance of the order-`m` preprocessed samples:
    /// raw, centered squares, or standardized cubes.
    pub fn preprocessed(&self, order: usize) -> (f64, f64) {
        match order {
            1 => (self.mean, self.unbiased_variance()),
            2 => {
                let c2 = self.central(2);
                (c2, self.central(4) - c2 * c2)
            }
            _ => {
                let c2 = self.central(2);
                let c3 = self.central(3);
                (c3 / c2.powf(1.5), (self.central(6) - c3 * c3) / c2.powi(3))
            }
        }
    }
}

/// Welch's statistic from two (mean, variance, count) triples; 0 when both
/// the difference and the spread vanish.
pub fn welch(mean_a: f64, var_a: f64, n_a: f64, mean_b: f64, var_b: f64, n_b: f64) -> f64 {
    let num = mean_a - mean_b;
    let den = (var_a / n_a + var_b / n_b).sqrt();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            num.signum() * f64::INFINITY
        }
    } else {
        num / den
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TTestResult {
    pub order: usize,
    pub t: Vec<f64>,
    pub max_abs_t: f64,
}

impl TTestResult {
    fn from_t(order: usize, t: Vec<f64>) -> Self {
        let max_abs_t = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self { order, t, max_abs_t }
    }
}

/// True iff the leakage threshold is exceeded.
pub fn leakage_verdict(res: &TTestResult) -> bool {
    res.max_abs_t > THRESHOLD
}

/// Per-sample moment accumulators for the fixed (A) and random (B) groups.
#[derive(Clone, Debug, PartialEq)]
pub struct TTestAccumulator {
    pub fixed: Vec<Moments>,
    pub random: Vec<Moments>,
}

impl TTestAccumulator {
    pub fn new(n_samples: usize) -> Self {
        Self {
            fixed: vec![Moments::default(); n_samples],
            random: vec![Moments::default(); n_samples],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.fixed.len()
    }

    pub fn update(&mut self, row: &[f32], group: Group) {
        let acc = match group {
            Group::Fixed => &mut self.fixed,
            Group::Random => &mut self.random,
        };
        for (m, &x) in acc.iter_mut().zip(row) {
            m.push(x as f64);
        }
    }

    pub fn merge(mut self, other: TTestAccumulator) -> TTestAccumulator {
        for (a, b) in self.fixed.iter_mut().zip(&other.fixed) {
            *a = a.merge(b);
        }
        for (a, b) in self.random.iter_mut().zip(&other.random) {
            *a = a.merge(b);
        }
        self
    }

    pub fn counts(&self) -> (f64, f64) {
        (
            self.fixed.first().map_or(0.0, |m| m.n),
            self.random.first().map_or(0.0, |m| m.n),
        )
    }

    pub fn finalize(&self, order: usize) -> Result<TTestResult> {
        check_order(order)?;
        let (na, nb) = self.counts();
        if na < 2.0 || nb < 2.0 {
            return Err(Error::DegenerateGroup(format!(
                "groups hold {na} and {nb} traces; each needs at least 2"
            )));
        }
        let mut t = Vec::with_capacity(self.n_samples());
        for (j, (a, b)) in self.fixed.iter().zip(&self.random).enumerate() {
            if order == 3 && (a.m[0] == 0.0 || b.m[0] == 0.0) {
                return Err(Error::DegenerateGroup(format!(
                    "zero variance at sample {j}; standardized moments are undefined"
                )));
            }
            let (ma, va) = a.preprocessed(order);
            let (mb, vb) = b.preprocessed(order);
            t.push(welch(ma, va, a.n, mb, vb, b.n));
        }
        Ok(TTestResult::from_t(order, t))
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=3).contains(&order) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t-test order {order} not in 1..=3")))
    }
}

pub const DEFAULT_CHUNK: usize = 4096;

/// Accumulates a trace set chunk-wise; identical result for either `exec`.
pub fn ttest_accumulate(traces: &TraceSet, exec: Exec) -> TTestAccumulator {
    let n_s = traces.n_samples;
    exec.chunked_reduce(
        traces.n_traces(),
        DEFAULT_CHUNK,
        |r| {
            let mut acc = TTestAccumulator::new(n_s);
            for i in r {
                acc.update(traces.row(i), traces.meta[i].group);
            }
            acc
        },
        TTestAccumulator::merge,
    )
    .unwrap_or_else(|| TTestAccumulator::new(n_s))
}

/// Fixed-vs-random Welch t-test at moment `order`.
pub fn welch_t(traces: &TraceSet, order: usize) -> Result<TTestResult> {
    welch_t_with(traces, order, Exec::default())
}

pub fn welch_t_with(traces: &TraceSet, order: usize, exec: Exec) -> Result<TTestResult> {
    check_order(order)?;
    ttest_accumulate(traces, exec).finalize(order)
}

/// Two-pass reference implementations over materialized samples.
pub mod batch {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    /// Mean and variance of the preprocessed group, computed directly.
    pub fn preprocessed(xs: &[f64], order: usize) -> (f64, f64) {
        let n = xs.len() as f64;
        let mu = mean(xs);
        match order {
            1 => (mu, xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)),
            _ => {
                let sd = (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
                let ys: Vec<f64> = xs
                    .iter()
                    .map(|x| {
                        if order == 2 {
                            (x - mu).powi(2)
                        } else {
                            ((x - mu) / sd).powi(3)
                        }
                    })
                    .collect();
                let my = mean(&ys);
                (my, ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n)
            }
        }
    }

    pub fn welch_t(traces: &TraceSet, order: usize) -> Result<TTestResult> {
        check_order(order)?;
        let mut t = Vec::with_capacity(traces.n_samples);
        for j in 0..traces.n_samples {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (row, meta) in traces.rows() {
                match meta.group {
                    Group::Fixed => a.push(row[j] as f64),
                    Group::Random => b.push(row[j] as f64),
                }
            }
            if a.len() < 2 || b.len() < 2 {
                return Err(Error::DegenerateGroup("fewer than 2 traces".into()));
            }
            let (ma, va) = preprocessed(&a, order);
            let (mb, vb) = preprocessed(&b, order);
            t.push(welch(ma, va, a.len() as f64, mb, vb, b.len() as f64));
        }
        Ok(TTestResult::from_t(order, t))
    }
}

/// Intermediate value predicted from `S(pt_nibble ⊕ guess)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predictor {
    SboxOutputBit(u8),
    SboxOutputHw,
}

impl Predictor {
    pub fn predict(self, pt_nibble: u8, guess: u8) -> f64 {
        let s = SBOX[((pt_nibble ^ guess) & 0xF) as usize];
        match self {
            Predictor::SboxOutputBit(b) => ((s >> b) & 1) as f64,
            Predictor::SboxOutputHw => s.count_ones() as f64,
        }
    }
}

/// Nibble `index` of a 64-bit block.
pub fn nibble(x: u64, index: usize) -> u8 {
    ((x >> (4 * index)) & 0xF) as u8
}

/// Nibble `index` of the first round key, the target of the attacks.
pub fn first_round_key_nibble(key: Key80, index: usize) -> u8 {
    nibble((key.value() >> 16) as u64, index)
}

/// Per-sample moments of the traces sorted into 16 classes by one
/// plaintext nibble. Both CPA and DPA reduce to sums over these classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassAccumulator {
    pub nibble: usize,
    pub n_samples: usize,
    /// `classes[v][j]`: count, mean and `M2` of sample `j` over traces whose
    /// plaintext nibble is `v`.
    pub classes: Vec<Vec<Moments2>>,
}

/// Count, mean and `M2`; the cheap subset of [`Moments`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments2 {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments2 {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, o: &Moments2) -> Moments2 {
        if o.n == 0.0 {
            return *self;
        }
        if self.n == 0.0 {
            return *o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments2 {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

impl ClassAccumulator {
    pub fn new(nibble: usize, n_samples: usize) -> Self {
        Self {
            nibble,
            n_samples,
            classes: vec![vec![Moments2::default(); n_samples]; 16],
        }
    }

    pub fn update(&mut self, row: &[f32], plaintext: u64) {
        let v = nibble(plaintext, self.nibble) as usize;
        for (m, &x) in self.classes[v].iter_mut().zip(row) {
            m.push(x as f64);
        }
    }

    pub fn merge(mut self, other: ClassAccumulator) -> ClassAccumulator {
        for (ca, cb) in self.classes.iter_mut().zip(&other.classes) {
            for (a, b) in ca.iter_mut().zip(cb) {
                *a = a.merge(b);
            }
        }
        self
    }

    pub fn n_traces(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| c.first().map_or(0.0, |m| m.n))
            .sum()
    }

    fn total(&self, j: usize) -> Moments2 {
        self.classes
            .iter()
            .fold(Moments2::default(), |acc, c| acc.merge(&c[j]))
    }

    /// Pearson correlation of `predictor(S(v ⊕ guess))` with every sample.
    pub fn correlation(&self, predictor: Predictor, guess: u8) -> Result<Vec<f64>> {
        let n = self.n_traces();
        let h: Vec<f64> = (0..16u8).map(|v| predictor.predict(v, guess)).collect();
        let counts: Vec<f64> = self.classes.iter().map(|c| c.first().map_or(0.0, |m| m.n)).collect();
        let h_mean = h.iter().zip(&counts).map(|(h, c)| h * c).sum::<f64>() / n;
        let h_var: f64 = h
            .iter()
            .zip(&counts)
            .map(|(h, c)| c * (h - h_mean).powi(2))
            .sum::<f64>();
        if !(h_var > 0.0) {
            return Err(Error::ZeroVariance(guess as usize));
        }
        Ok((0..self.n_samples)
            .map(|j| {
                let tot = self.total(j);
                let cov: f64 = (0..16)
                    .map(|v| {
                        let c = &self.classes[v][j];
                        c.n * (h[v] - h_mean) * (c.mean - tot.mean)
                    })
                    .sum();
                if tot.m2 > 0.0 {
                    (cov / (h_var * tot.m2).sqrt()).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// `mean(bit = 1) − mean(bit = 0)` for every sample.
    pub fn difference_of_means(&self, bit: u8, guess: u8) -> Result<Vec<f64>> {
        let pred = Predictor::SboxOutputBit(bit);
        let mut parts = [vec![Moments2::default(); self.n_samples], vec![Moments2::default(); self.n_samples]];
        for v in 0..16u8 {
            let side = pred.predict(v, guess) as usize;
            for (a, b) in parts[side].iter_mut().zip(&self.classes[v as usize]) {
                *a = a.merge(b);
            }
        }
        if parts[0].first().map_or(0.0, |m| m.n) == 0.0 || parts[1].first().map_or(0.0, |m| m.n) == 0.0 {
            return Err(Error::EmptyPartition(guess as usize));
        }
        Ok(parts[1]
            .iter()
            .zip(&parts[0])
            .map(|(one, zero)| one.mean - zero.mean)
            .collect())
    }
}

/// Per-guess statistics and the ranking by peak magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyRankResult {
    /// `stat[g][j]`.
    pub stat: Vec<Vec<f64>>,
    pub max_abs: [f64; 16],
    /// Guesses, best first.
    pub ranking: Vec<u8>,
}

impl KeyRankResult {
    fn from_stats(stat: Vec<Vec<f64>>) -> Self {
        let mut max_abs = [0.0; 16];
        for (g, s) in stat.iter().enumerate() {
            max_abs[g] = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let mut ranking: Vec<u8> = (0..16).collect();
        ranking.sort_by(|&a, &b| {
            max_abs[b as usize]
                .total_cmp(&max_abs[a as usize])
                .then(a.cmp(&b))
        });
        Self {
            stat,
            max_abs,
            ranking,
        }
    }

    /// 1-based rank of `guess`.
    pub fn rank_of(&self, guess: u8) -> usize {
        self.ranking.iter().position(|&g| g == guess).unwrap() + 1
    }

    pub fn best(&self) -> u8 {
        self.ranking[0]
    }

    pub fn max_abs_stat(&self) -> f64 {
        self.max_abs.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

pub type CpaResult = KeyRankResult;
pub type DpaResult = KeyRankResult;

/// Which traces an attack uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceSelection {
    #[default]
    All,
    RandomGroup,
}

impl TraceSelection {
    fn includes(self, meta: &TraceMeta) -> bool {
        self == TraceSelection::All || meta.group == Group::Random
    }
}

pub fn class_accumulate(traces: &TraceSet, nibble: usize, sel: TraceSelection, exec: Exec) -> ClassAccumulator {
    let n_s = traces.n_samples;
    exec.chunked_reduce(
        traces.n_traces(),
        DEFAULT_CHUNK,
        |r| {
            let mut acc = ClassAccumulator::new(nibble, n_s);
            for i in r {
                let meta = &traces.meta[i];
                if sel.includes(meta) {
                    acc.update(traces.row(i), meta.plaintext);
                }
            }
            acc
        },
        ClassAccumulator::merge,
    )
    .unwrap_or_else(|| ClassAccumulator::new(nibble, n_s))
}

fn check_nibble(index: usize) -> Result<()> {
    if index < 16 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("nibble index {index} not in 0..16")))
    }
}

pub fn cpa_from(acc: &ClassAccumulator, predictor: Predictor) -> Result<CpaResult> {
    let stat = (0..16u8)
        .map(|g| acc.correlation(predictor, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(KeyRankResult::from_stats(stat))
}

pub fn dpa_from(acc: &ClassAccumulator, bit: u8) -> Result<DpaResult> {
    let stat = (0..16u8)
        .map(|g| acc.difference_of_means(bit, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(KeyRankResult::from_stats(stat))
}

/// Correlation power analysis on one key nibble.
pub fn cpa(traces: &TraceSet, nibble: usize, predictor: Predictor) -> Result<CpaResult> {
    check_nibble(nibble)?;
    if let Predictor::SboxOutputBit(b) = predictor {
        check_bit(b)?;
    }
    cpa_from(&class_accumulate(traces, nibble, TraceSelection::All, Exec::default()), predictor)
}

/// Difference-of-means DPA on one key nibble and S-box output bit.
pub fn dpa_bit(traces: &TraceSet, nibble: usize, bit: u8) -> Result<DpaResult> {
    check_nibble(nibble)?;
    check_bit(bit)?;
    dpa_from(&class_accumulate(traces, nibble, TraceSelection::All, Exec::default()), bit)
}

fn check_bit(bit: u8) -> Result<()> {
    if bit < 4 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("S-box output bit {bit} not in 0..4")))
    }
}

/// An incrementally updated statistic with a scalar summary.
pub trait Analysis {
    fn update(&mut self, row: &[f32], meta: &TraceMeta);
    fn max_abs_stat(&self) -> Result<f64>;
}

pub struct TTestAnalysis {
    pub acc: TTestAccumulator,
    pub order: usize,
}

impl TTestAnalysis {
    pub fn new(n_samples: usize, order: usize) -> Self {
        Self {
            acc: TTestAccumulator::new(n_samples),
            order,
        }
    }
}

impl Analysis for TTestAnalysis {
    fn update(&mut self, row: &[f32], meta: &TraceMeta) {
        self.acc.update(row, meta.group);
    }

    fn max_abs_stat(&self) -> Result<f64> {
        Ok(self.acc.finalize(self.order)?.max_abs_t)
    }
}

/// Key-recovery statistic; the summary is the peak of the correct guess
/// when `key_nibble` is known, else of the best guess.
pub struct AttackAnalysis {
    pub acc: ClassAccumulator,
    pub kind: AttackKind,
    pub key_nibble: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    Cpa(Predictor),
    Dpa(u8),
}

impl AttackAnalysis {
    pub fn new(nibble: usize, n_samples: usize, kind: AttackKind, key_nibble: Option<u8>) -> Self {
        Self {
            acc: ClassAccumulator::new(nibble, n_samples),
            kind,
            key_nibble,
        }
    }

    pub fn result(&self) -> Result<KeyRankResult> {
        match self.kind {
            AttackKind::Cpa(p) => cpa_from(&self.acc, p),
            AttackKind::Dpa(b) => dpa_from(&self.acc, b),
        }
    }
}

impl Analysis for AttackAnalysis {
    fn update(&mut self, row: &[f32], meta: &TraceMeta) {
        self.acc.update(row, meta.plaintext);
    }

    fn max_abs_stat(&self) -> Result<f64> {
        let r = self.result()?;
        Ok(match self.key_nibble {
            Some(k) => r.max_abs[k as usize],
            None => r.max_abs_stat(),
        })
    }
}

/// Summary statistic on every trace prefix listed in `checkpoints`.
pub fn progress_curve<A: Analysis>(
    mut analysis: A,
    traces: &TraceSet,
    checkpoints: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be strictly ascending".into()));
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, (row, meta)) in traces.rows().enumerate() {
        analysis.update(row, meta);
        while next.peek().is_some_and(|&&c| c == i + 1) {
            out.push((i + 1, analysis.max_abs_stat()?));
            next.next();
        }
    }
    if let Some(&&c) = next.peek() {
        return Err(Error::InvalidParameter(format!(
            "checkpoint {c} exceeds the {} available traces",
            traces.n_traces()
        )));
    }
    Ok(out)
}

/// Roughly geometric checkpoints ending at `n`.
pub fn default_checkpoints(n: usize, points: usize) -> Vec<usize> {
    let points = points.max(2);
    let lo = (n / 100).max(10).min(n);
    let mut out: Vec<usize> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            (lo as f64 * (n as f64 / lo as f64).powf(f)).round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Least-squares slope of `log y` over `log n`, skipping non-positive values.
pub fn loglog_slope(curve: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(n, y)| ((n as f64).ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn write_ttest_csv<W: Write>(mut out: W, results: &[TTestResult]) -> Result<()> {
    let n = results.first().map_or(0, |r| r.t.len());
    let cols: Vec<String> = results.iter().map(|r| format!("t_m{}", r.order)).collect();
    writeln!(out, "sample,{}", cols.join(","))?;
    for j in 0..n {
        let vals: Vec<String> = results.iter().map(|r| format!("{}", r.t[j])).collect();
        writeln!(out, "{j},{}", vals.join(","))?;
    }
    Ok(())
}

pub fn write_rank_csv<W: Write>(mut out: W, res: &KeyRankResult, label: &str) -> Result<()> {
    writeln!(out, "guess,max_abs_{label},rank")?;
    for g in 0..16u8 {
        writeln!(out, "{g:X},{},{}", res.max_abs[g as usize], res.rank_of(g))?;
    }
    Ok(())
}

pub fn write_progress_csv<W: Write>(mut out: W, curve: &[(usize, f64)]) -> Result<()> {
    writeln!(out, "n_traces,max_abs_stat")?;
    for (n, v) in curve {
        writeln!(out, "{n},{v}")?;
    }
    Ok(())
}

/// Minimal SVG line plot of one or more series, with an optional horizontal rule.
pub fn svg_line_plot(
    title: &str,
    x_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    hline: Option<f64>,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let all = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some(h) = hline {
        y1 = y1.max(h);
        y0 = y0.min(h);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n\
         <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{M}\" y=\"{}\" text-anchor=\"middle\">{x0:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x1:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y0:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y1:.3}</text>\n",
        W / 2.0,
        xml_escape(title),
        H - M,
        W - M,
        H - M,
        H - M,
        W / 2.0,
        H - 8.0,
        xml_escape(x_label),
        H - M + 16.0,
        W - M,
        H - M + 16.0,
        M - 4.0,
        H - M,
        M - 4.0,
        M + 4.0,
    );
    if let Some(h) = hline {
        s += &format!(
            "<line x1=\"{M}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
            W - M,
            y = py(h)
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            path.join(" "),
            W - M - 4.0,
            M + 14.0 * (k as f64 + 1.0),
            xml_escape(name)
        );
    }
    s += "</svg>\n";
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::present_ti::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn push_matches_general_merge() {
        let mut rng = seeded_rng(4, 0);
        let mut fast = Moments::default();
        let mut slow = Moments::default();
        for _ in 0..5000 {
            let x: f64 = 3.0 + 2.0 * rng.sample::<f64, _>(StandardNormal);
            fast.push(x);
            slow = slow.merge(&Moments { n: 1.0, mean: x, m: [0.0; 5] });
        }
        assert_eq!(fast.n, slow.n);
        assert!((fast.mean - slow.mean).abs() < 1e-12);
        for (a, b) in fast.m.iter().zip(&slow.m) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    fn meta(i: usize, group: Group, pt: u64) -> TraceMeta {
        TraceMeta {
            index: i as u64,
            group,
            plaintext: pt,
            ciphertext: 0,
            seed: 0,
        }
    }

    fn two_groups(n: usize, shift: f64, seed: u64) -> TraceSet {
        let mut rng = seeded_rng(seed, 0);
        let mut set = TraceSet::new(3);
        for i in 0..2 * n {
            let group = if i % 2 == 0 { Group::Fixed } else { Group::Random };
            let off = if group == Group::Random { shift } else { 0.0 };
            let row: Vec<f32> = (0..3)
                .map(|_| (off + rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();
            set.push(&row, meta(i, group, 0)).unwrap();
        }
        set
    }

    #[test]
    fn moments_match_two_pass() {
        let mut rng = seeded_rng(1, 0);
        let xs: Vec<f64> = (0..5000).map(|_| 100.0 + rng.random::<f64>().powi(3) * 7.0).collect();
        let mut a = Moments::default();
        let mut b = Moments::default();
        for &x in &xs[..1234] {
            a.push(x);
        }
        for &x in &xs[1234..] {
            b.push(x);
        }
        let m = a.merge(&b);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m.mean - mean).abs() < 1e-12 * mean);
        for p in 2..=6 {
            let direct: f64 = xs.iter().map(|x| (x - mean).powi(p as i32)).sum();
            assert!(
                (m.sum_pow(p) - direct).abs() <= 1e-9 * direct.abs().max(1e-9),
                "p={p} {} vs {direct}",
                m.sum_pow(p)
            );
        }
    }

    #[test]
    fn identical_constant_groups_give_zero() {
        let mut set = TraceSet::new(2);
        for i in 0..10 {
            let g = if i < 5 { Group::Fixed } else { Group::Random };
            set.push(&[3.0, 3.0], meta(i, g, 0)).unwrap();
        }
        let r = welch_t(&set, 1).unwrap();
        assert_eq!(r.t, vec![0.0, 0.0]);
        assert!(!leakage_verdict(&r));
        assert!(matches!(welch_t(&set, 3), Err(Error::DegenerateGroup(_))));
    }

    #[test]
    fn shifted_gaussians() {
        let set = two_groups(10_000, 1.0, 7);
        let r = welch_t(&set, 1).unwrap();
        let expected = -1.0 / (2.0f64 / 1e4).sqrt();
        for t in &r.t {
            assert!((t - expected).abs() < 0.05 * expected.abs(), "{t}");
        }
        assert!(leakage_verdict(&r));
    }

    #[test]
    fn streaming_matches_batch_all_orders() {
        let set = two_groups(3000, 0.3, 8);
        for order in 1..=3 {
            let s = welch_t(&set, order).unwrap();
            let b = batch::welch_t(&set, order).unwrap();
            for (x, y) in s.t.iter().zip(&b.t) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{order}: {x} {y}");
            }
        }
    }

    #[test]
    fn one_group_is_degenerate() {
        let mut set = TraceSet::new(1);
        for i in 0..5 {
            set.push(&[i as f32], meta(i, Group::Fixed, 0)).unwrap();
        }
        assert!(matches!(welch_t(&set, 1), Err(Error::DegenerateGroup(_))));
        assert!(welch_t(&set, 4).is_err());
    }

    fn hw_traces(key: u8, sign: f32) -> TraceSet {
        let mut rng = seeded_rng(3, 0);
        let mut set = TraceSet::new(3);
        for i in 0..2000 {
            let pt: u64 = rng.random();
            let v = SBOX[(nibble(pt, 2) ^ key) as usize].count_ones() as f32;
            let row = [rng.random::<f32>(), sign * v, rng.random::<f32>()];
            set.push(&row, meta(i, Group::Random, pt)).unwrap();
        }
        set
    }

    #[test]
    fn cpa_exact_leak() {
        for sign in [1.0, -1.0] {
            let r = cpa(&hw_traces(0xA, sign), 2, Predictor::SboxOutputHw).unwrap();
            assert_eq!(r.best(), 0xA);
            assert!((r.stat[0xA][1] - sign as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn dpa_exact_leak() {
        let mut rng = seeded_rng(4, 0);
        let mut set = TraceSet::new(2);
        for i in 0..2000 {
            let pt: u64 = rng.random();
            let bit = (SBOX[(nibble(pt, 5) ^ 3) as usize] >> 1) & 1;
            set.push(&[bit as f32, rng.random()], meta(i, Group::Random, pt)).unwrap();
        }
        let r = dpa_bit(&set, 5, 1).unwrap();
        assert_eq!(r.best(), 3);
        assert!((r.stat[3][0] - 1.0).abs() < 1e-12);
        assert!(dpa_bit(&set, 5, 4).is_err());
    }

    #[test]
    fn dpa_empty_partition_and_cpa_zero_variance() {
        let mut set = TraceSet::new(1);
        for i in 0..10 {
            set.push(&[i as f32], meta(i, Group::Random, 0)).unwrap();
        }
        assert!(matches!(dpa_bit(&set, 0, 0), Err(Error::EmptyPartition(_))));
        assert!(matches!(cpa(&set, 0, Predictor::SboxOutputHw), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn progress_curve_flat_and_growing() {
        let mut set = TraceSet::new(1);
        for i in 0..100 {
            let g = if i % 2 == 0 { Group::Fixed } else { Group::Random };
            set.push(&[(i % 4) as f32], meta(i, g, 0)).unwrap();
        }
        // fixed holds 0,2 and random 1,3 alternately: the means differ by 1
        let curve = progress_curve(TTestAnalysis::new(1, 1), &set, &[10, 50, 100]).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve[2].1 > curve[0].1);
        let mut zero = TraceSet::new(1);
        for i in 0..20 {
            let g = if i % 2 == 0 { Group::Fixed } else { Group::Random };
            zero.push(&[0.0], meta(i, g, 0)).unwrap();
        }
        let flat = progress_curve(TTestAnalysis::new(1, 1), &zero, &[4, 10, 20]).unwrap();
        assert!(flat.iter().all(|p| p.1 == 0.0));
        assert!(progress_curve(TTestAnalysis::new(1, 1), &zero, &[10, 4]).is_err());
        assert!(progress_curve(TTestAnalysis::new(1, 1), &zero, &[40]).is_err());
    }

    #[test]
    fn checkpoints_ascend() {
        let c = default_checkpoints(100_000, 12);
        assert_eq!(*c.last().unwrap(), 100_000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn svg_is_wellformed() {
        let svg = svg_line_plot("t", "n", &[("a", vec![(1.0, 1.0), (2.0, 3.0)])], Some(4.5));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
