//! Three-share threshold implementations of small Boolean functions.
//!
//! A [`SharedFunction`] holds three component functions. Component `k`
//! (0-based) never reads input share `k`: component 0 sees shares (1, 2),
//! component 1 sees (2, 0), component 2 sees (0, 1). In the usual 1-based
//! notation these are `F¹(x², x³)`, `F²(x³, x¹)` and `F³(x¹, x²)`.
//!
//! Terms of a component are monomials over `3s` share variables encoded as a
//! `u32` bitmask, variable `share * s + bit`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::boolfunc::{self, degree, is_bijection, AffineMap, Anf, TruthTable};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Largest base width the exhaustive `2^{3s}` checks are run on.
pub const MAX_SHARED_WIDTH: usize = 6;

pub type SharedMonomial = u32;

const SUPERSCRIPT: [char; 3] = ['¹', '²', '³'];
const SUBSCRIPT: [char; 8] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇'];

/// One input sharing `(x¹, x², x³)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SharedInput {
    pub x1: u8,
    pub x2: u8,
    pub x3: u8,
}

impl SharedInput {
    pub fn new(x1: u8, x2: u8, x3: u8) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn unshared(&self) -> u8 {
        self.x1 ^ self.x2 ^ self.x3
    }

    pub fn shares(&self) -> [u8; 3] {
        [self.x1, self.x2, self.x3]
    }

    fn pack(&self, s: usize) -> u32 {
        self.x1 as u32 | (self.x2 as u32) << s | (self.x3 as u32) << (2 * s)
    }

    fn unpack(idx: u32, s: usize) -> Self {
        let m = (1u32 << s) - 1;
        Self::new(
            (idx & m) as u8,
            ((idx >> s) & m) as u8,
            ((idx >> (2 * s)) & m) as u8,
        )
    }
}

/// One component function of a sharing.
#[derive(Clone, Debug)]
pub struct Component {
    missing: usize,
    terms: Vec<BTreeSet<SharedMonomial>>,
    // indexed by (x^{k+1} | x^{k+2} << s); absent when a term reads the missing share
    table: Option<Vec<u8>>,
}

impl PartialEq for Component {
    fn eq(&self, other: &Self) -> bool {
        self.missing == other.missing && self.terms == other.terms
    }
}

impl Eq for Component {}

impl Component {
    fn new(missing: usize, terms: Vec<BTreeSet<SharedMonomial>>, s: usize) -> Self {
        let mut c = Self {
            missing,
            terms,
            table: None,
        };
        c.rebuild_table(s);
        c
    }

    fn rebuild_table(&mut self, s: usize) {
        let missing_mask = ((1u32 << s) - 1) << (self.missing * s);
        let structural = self
            .terms
            .iter()
            .flatten()
            .all(|&m| m & missing_mask == 0);
        if !structural {
            self.table = None;
            return;
        }
        let [p, q] = present_shares(self.missing);
        let table = (0..1u32 << (2 * s))
            .map(|uv| {
                let u = uv & ((1 << s) - 1);
                let v = uv >> s;
                self.eval_anf(u << (p * s) | v << (q * s))
            })
            .collect();
        self.table = Some(table);
    }

    /// The missing share, 0-based.
    pub fn missing_share(&self) -> usize {
        self.missing
    }

    pub fn terms(&self, bit: usize) -> &BTreeSet<SharedMonomial> {
        &self.terms[bit]
    }

    /// True when no term mentions the missing share.
    pub fn is_structurally_non_complete(&self) -> bool {
        self.table.is_some()
    }

    fn eval_anf(&self, idx: u32) -> u8 {
        self.terms.iter().enumerate().fold(0u8, |acc, (bit, monos)| {
            let v = monos.iter().filter(|&&m| idx & m == m).count() & 1;
            acc | (v as u8) << bit
        })
    }

    #[inline]
    fn eval_packed(&self, idx: u32, s: usize) -> u8 {
        match &self.table {
            Some(t) => {
                let [p, q] = present_shares(self.missing);
                let m = (1u32 << s) - 1;
                let u = (idx >> (p * s)) & m;
                let v = (idx >> (q * s)) & m;
                t[(u | v << s) as usize]
            }
            None => self.eval_anf(idx),
        }
    }

    fn toggle(&mut self, bit: usize, m: SharedMonomial) {
        if !self.terms[bit].remove(&m) {
            self.terms[bit].insert(m);
        }
    }
}

fn present_shares(missing: usize) -> [usize; 2] {
    [(missing + 1) % 3, (missing + 2) % 3]
}

/// A 3-share sharing `(F¹, F², F³)` of an `s`-bit function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedFunction {
    base_width: usize,
    out_width: usize,
    comps: [Component; 3],
}

impl SharedFunction {
    /// Builds a sharing from per-component, per-output-bit monomial sets.
    ///
    /// Components may reference their missing share; such a sharing simply
    /// fails [`check_non_completeness`].
    pub fn from_terms(
        base_width: usize,
        out_width: usize,
        terms: [Vec<BTreeSet<SharedMonomial>>; 3],
    ) -> Result<Self> {
        if base_width == 0 || base_width > MAX_SHARED_WIDTH {
            return Err(Error::UnsupportedWidth(base_width));
        }
        if out_width == 0 || out_width > 8 {
            return Err(Error::UnsupportedWidth(out_width));
        }
        let limit = 1u64 << (3 * base_width);
        for t in &terms {
            if t.len() != out_width {
                return Err(Error::WidthMismatch(format!(
                    "component has {} output bits, expected {out_width}",
                    t.len()
                )));
            }
            if t.iter().flatten().any(|&m| m as u64 >= limit) {
                return Err(Error::WidthMismatch(
                    "monomial references a variable beyond the base width".into(),
                ));
            }
        }
        let [t0, t1, t2] = terms;
        Ok(Self {
            base_width,
            out_width,
            comps: [
                Component::new(0, t0, base_width),
                Component::new(1, t1, base_width),
                Component::new(2, t2, base_width),
            ],
        })
    }

    pub fn base_width(&self) -> usize {
        self.base_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.comps[k]
    }

    /// Output shares `(y¹, y², y³)` for one input sharing.
    pub fn eval(&self, input: SharedInput) -> [u8; 3] {
        self.eval_packed(input.pack(self.base_width))
    }

    fn eval_packed(&self, idx: u32) -> [u8; 3] {
        let s = self.base_width;
        [
            self.comps[0].eval_packed(idx, s),
            self.comps[1].eval_packed(idx, s),
            self.comps[2].eval_packed(idx, s),
        ]
    }

    /// `(y¹, y², y³)` for every input sharing, packed as `y¹ | y² << t | y³ << 2t`.
    pub fn composite_table(&self, exec: Exec) -> Vec<u32> {
        let t = self.out_width;
        exec.map_range(1 << (3 * self.base_width), |idx| {
            let [a, b, c] = self.eval_packed(idx as u32);
            a as u32 | (b as u32) << t | (c as u32) << (2 * t)
        })
    }

    /// The function this sharing computes, read off the sharings `(x, 0, 0)`.
    pub fn base_table(&self) -> TruthTable {
        TruthTable::from_fn(self.base_width, self.out_width, |x| {
            recombine(self, SharedInput::new(x, 0, 0))
        })
        .expect("widths validated at construction")
    }

    fn toggle_term(&mut self, comp: usize, bit: usize, m: SharedMonomial) {
        self.comps[comp].toggle(bit, m);
    }

    fn rebuild(&mut self) {
        let s = self.base_width;
        for c in &mut self.comps {
            c.rebuild_table(s);
        }
    }

    /// Equation listing, one line per output share bit: `y¹₀ = 1 ⊕ a² ⊕ d²c³ ...`.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (k, c) in self.comps.iter().enumerate() {
            for bit in 0..self.out_width {
                out.push_str(&format!(
                    "y{}{} = {}\n",
                    SUPERSCRIPT[k],
                    SUBSCRIPT[bit],
                    format_terms(&c.terms[bit], self.base_width, true)
                ));
            }
        }
        out
    }

    /// Plain-ASCII form accepted by [`parse_sharing`].
    pub fn to_text(&self) -> String {
        let mut out = format!("width {}\n", self.base_width);
        for (k, c) in self.comps.iter().enumerate() {
            for bit in 0..self.out_width {
                out.push_str(&format!(
                    "y{}_{} = {}\n",
                    k + 1,
                    bit,
                    format_terms(&c.terms[bit], self.base_width, false)
                ));
            }
        }
        out
    }
}

impl fmt::Display for SharedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}

fn share_var(share: usize, bit: usize, s: usize) -> SharedMonomial {
    1 << (share * s + bit)
}

fn monomial_vars(m: SharedMonomial, s: usize) -> Vec<(usize, usize)> {
    // (bit, share), larger bits first as in `d²c³`
    let mut v: Vec<(usize, usize)> = (0..3 * s)
        .filter(|i| (m >> i) & 1 == 1)
        .map(|i| (i % s, i / s))
        .collect();
    v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    v
}

pub fn format_monomial(m: SharedMonomial, s: usize, unicode: bool) -> String {
    if m == 0 {
        return "1".into();
    }
    let vars = monomial_vars(m, s);
    if unicode {
        vars.iter()
            .map(|&(bit, share)| format!("{}{}", boolfunc::variable_name(bit), SUPERSCRIPT[share]))
            .collect()
    } else {
        vars.iter()
            .map(|&(bit, share)| format!("{}{}", boolfunc::variable_name(bit), share + 1))
            .collect::<Vec<_>>()
            .join("*")
    }
}

fn format_terms(terms: &BTreeSet<SharedMonomial>, s: usize, unicode: bool) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut ordered: Vec<SharedMonomial> = terms.iter().copied().collect();
    // degree, then variables (larger bits first), then share numbers
    let key = |m: SharedMonomial| {
        let vars = monomial_vars(m, s);
        let bits: Vec<usize> = vars.iter().map(|v| v.0).collect();
        let shares: Vec<usize> = vars.iter().map(|v| v.1).collect();
        (m.count_ones(), std::cmp::Reverse(bits), shares)
    };
    ordered.sort_by_key(|&m| key(m));
    let sep = if unicode { " ⊕ " } else { " + " };
    ordered
        .iter()
        .map(|&m| format_monomial(m, s, unicode))
        .collect::<Vec<_>>()
        .join(sep)
}

/// Parses equations such as `y1_0 = 1 + a2 + d2*c3 + d3 c2`.
///
/// Variables are a letter `a`..`h` (bit 0..7) followed by the share number;
/// Unicode superscripts/subscripts and `⊕` as printed by
/// [`SharedFunction::report`] are accepted too. An optional `width <s>` line
/// sets the base width; otherwise it is the larger of 4 and the highest
/// variable used.
pub fn parse_sharing(text: &str) -> Result<SharedFunction> {
    let mut width: Option<usize> = None;
    // (share, bit, monomial as (bit, share) list)
    let mut eqs: Vec<(usize, usize, Vec<Vec<(usize, usize)>>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let err = |msg: String| Error::Parse { line, msg };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let norm = normalize(body);
        if let Some(rest) = norm.strip_prefix("width") {
            let w: usize = rest
                .trim()
                .parse()
                .map_err(|_| err(format!("bad width `{}`", rest.trim())))?;
            width = Some(w);
            continue;
        }
        let (lhs, rhs) = norm
            .split_once('=')
            .ok_or_else(|| err("expected `y<share>_<bit> = ...`".into()))?;
        let lhs: String = lhs.chars().filter(|c| !c.is_whitespace()).collect();
        let rest = lhs
            .strip_prefix('y')
            .ok_or_else(|| err(format!("output `{lhs}` must start with `y`")))?;
        let mut chars = rest.chars();
        let share = chars
            .next()
            .and_then(|c| c.to_digit(10))
            .filter(|d| (1..=3).contains(d))
            .ok_or_else(|| err(format!("bad share index in `{lhs}`")))? as usize
            - 1;
        let bit: usize = chars
            .as_str()
            .trim_start_matches('_')
            .parse()
            .map_err(|_| err(format!("bad output bit in `{lhs}`")))?;
        if bit >= 8 {
            return Err(err(format!("output bit {bit} out of range")));
        }
        let mut monos = Vec::new();
        for term in rhs.split(['+', '^']) {
            let term = term.trim();
            if term.is_empty() {
                return Err(err("empty term".into()));
            }
            if term == "0" {
                continue;
            }
            if term == "1" {
                monos.push(Vec::new());
                continue;
            }
            monos.push(parse_product(term).map_err(err)?);
        }
        if eqs.iter().any(|(sh, b, _)| *sh == share && *b == bit) {
            return Err(err(format!("duplicate equation for y{}_{bit}", share + 1)));
        }
        eqs.push((share, bit, monos));
    }
    if eqs.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no equations".into(),
        });
    }
    let max_var = eqs
        .iter()
        .flat_map(|(_, _, m)| m.iter().flatten().map(|&(b, _)| b + 1))
        .max()
        .unwrap_or(1);
    let out_width = eqs.iter().map(|(_, b, _)| b + 1).max().unwrap_or(1);
    let s = width.unwrap_or(max_var.max(4));
    if max_var > s {
        return Err(Error::Parse {
            line: 0,
            msg: format!("variable beyond declared width {s}"),
        });
    }
    let mut terms: [Vec<BTreeSet<SharedMonomial>>; 3] =
        std::array::from_fn(|_| vec![BTreeSet::new(); out_width]);
    for (share, bit, monos) in eqs {
        for vars in monos {
            let m = vars
                .iter()
                .fold(0u32, |acc, &(b, sh)| acc | share_var(sh, b, s));
            if !terms[share][bit].remove(&m) {
                terms[share][bit].insert(m);
            }
        }
    }
    SharedFunction::from_terms(s, out_width, terms)
}

fn normalize(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '¹' => '1',
            '²' => '2',
            '³' => '3',
            '⊕' => '+',
            '·' => '*',
            c if SUBSCRIPT.contains(&c) => {
                char::from_digit(SUBSCRIPT.iter().position(|&x| x == c).unwrap() as u32, 10)
                    .unwrap()
            }
            c => c,
        })
        .collect()
}

fn parse_product(term: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let mut vars = Vec::new();
    let mut chars = term.chars().filter(|c| !c.is_whitespace() && *c != '*');
    while let Some(c) = chars.next() {
        let bit = match c {
            'a'..='h' => c as usize - 'a' as usize,
            _ => return Err(format!("unexpected `{c}` in term `{term}`")),
        };
        let share = chars
            .next()
            .and_then(|d| d.to_digit(10))
            .filter(|d| (1..=3).contains(d))
            .ok_or_else(|| format!("variable `{c}` needs a share index 1..3 in `{term}`"))?;
        vars.push((bit, share as usize - 1));
    }
    Ok(vars)
}

/// Rule-based sharing of a function of degree at most 2.
///
/// Linear `x_i` goes to the component seeing share 2/3/1 as `x²_i`, `x³_i`,
/// `x¹_i`; each quadratic `x_i x_j` expands to nine cross terms split 3/3/3;
/// the constant goes to the first component.
pub fn direct_share(anf: &Anf) -> Result<SharedFunction> {
    let d = degree(anf);
    if d > 2 {
        return Err(Error::DegreeTooHigh(d));
    }
    let s = anf.in_width();
    if s > MAX_SHARED_WIDTH {
        return Err(Error::UnsupportedWidth(s));
    }
    let t = anf.out_width();
    let mut terms: [Vec<BTreeSet<SharedMonomial>>; 3] =
        std::array::from_fn(|_| vec![BTreeSet::new(); t]);
    // component k owns share (k+1)%3 as its "own" share
    for bit in 0..t {
        for m in anf.monomials(bit) {
            let vars: Vec<usize> = (0..s).filter(|i| (m >> i) & 1 == 1).collect();
            match vars.as_slice() {
                [] => {
                    terms[0][bit].insert(0);
                }
                &[i] => {
                    for k in 0..3 {
                        terms[k][bit].insert(share_var((k + 1) % 3, i, s));
                    }
                }
                &[i, j] => {
                    for k in 0..3 {
                        let own = (k + 1) % 3;
                        let next = (k + 2) % 3;
                        for (p, q) in [(own, own), (own, next), (next, own)] {
                            terms[k][bit].insert(share_var(p, i, s) | share_var(q, j, s));
                        }
                    }
                }
                _ => unreachable!("degree checked above"),
            }
        }
    }
    SharedFunction::from_terms(s, t, terms)
}

/// `y¹ ⊕ y² ⊕ y³`.
pub fn recombine(sf: &SharedFunction, input: SharedInput) -> u8 {
    let [a, b, c] = sf.eval(input);
    a ^ b ^ c
}

pub fn check_correctness(sf: &SharedFunction, reference: &TruthTable) -> Result<bool> {
    check_correctness_with(sf, reference, Exec::default())
}

pub fn check_correctness_with(
    sf: &SharedFunction,
    reference: &TruthTable,
    exec: Exec,
) -> Result<bool> {
    if reference.in_width() != sf.base_width || reference.out_width() != sf.out_width {
        return Err(Error::WidthMismatch(format!(
            "reference {} -> {} vs sharing {} -> {}",
            reference.in_width(),
            reference.out_width(),
            sf.base_width,
            sf.out_width
        )));
    }
    let s = sf.base_width;
    let bad = exec.any_range(1 << (3 * s), |idx| {
        let input = SharedInput::unpack(idx as u32, s);
        let [a, b, c] = sf.eval_packed(idx as u32);
        a ^ b ^ c != reference.get(input.unshared())
    });
    Ok(!bad)
}

/// Exhaustive missing-share flip test on the ANF of every component.
pub fn check_non_completeness(sf: &SharedFunction) -> bool {
    let s = sf.base_width;
    sf.comps.iter().all(|c| {
        let [p, q] = present_shares(c.missing);
        (0..1u32 << (2 * s)).all(|uv| {
            let u = uv & ((1 << s) - 1);
            let v = uv >> s;
            let base = u << (p * s) | v << (q * s);
            let reference = c.eval_anf(base);
            (1..1u32 << s).all(|w| c.eval_anf(base | w << (c.missing * s)) == reference)
        })
    })
}

pub fn check_uniformity(sf: &SharedFunction) -> bool {
    check_uniformity_with(sf, Exec::default())
}

pub fn check_uniformity_with(sf: &SharedFunction, exec: Exec) -> bool {
    let table = sf.composite_table(exec);
    let base = sf.base_table();
    uniform_table(&table, sf.base_width, sf.out_width, &base)
}

/// Uniformity of a packed composite table.
///
/// For a bijective base of equal width this is "the 3s-bit map is a
/// permutation". Otherwise every sharing of `F(x)` has to occur equally often
/// among the `2^{2s}` sharings of each `x`.
fn uniform_table(table: &[u32], s: usize, t: usize, base: &TruthTable) -> bool {
    let bijective = s == t && is_bijection(base).unwrap_or(false);
    if bijective {
        return is_permutation(table);
    }
    if t > s {
        return false;
    }
    let per_x = 1usize << (2 * s);
    let expected = per_x >> (2 * t);
    let om = (1u32 << t) - 1;
    let mut counts = vec![0usize; 1 << (2 * t)];
    for x in 0..1u32 << s {
        counts.iter_mut().for_each(|c| *c = 0);
        let fx = base.get(x as u8) as u32;
        for r in 0..per_x as u32 {
            let x1 = r & ((1 << s) - 1);
            let x2 = r >> s;
            let x3 = x ^ x1 ^ x2;
            let y = table[(x1 | x2 << s | x3 << (2 * s)) as usize];
            let (y1, y2, y3) = (y & om, (y >> t) & om, y >> (2 * t));
            if y1 ^ y2 ^ y3 != fx {
                return false;
            }
            counts[(y1 | y2 << t) as usize] += 1;
        }
        if counts.iter().any(|&c| c != expected) {
            return false;
        }
    }
    true
}

fn is_permutation(table: &[u32]) -> bool {
    let mut seen = vec![0u64; table.len().div_ceil(64)];
    for &y in table {
        let (w, b) = ((y / 64) as usize, y % 64);
        if w >= seen.len() || seen[w] >> b & 1 == 1 {
            return false;
        }
        seen[w] |= 1 << b;
    }
    true
}

/// A monomial in one share, XORed into the same output bit of the two
/// components that can see that share.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorrectionTerm {
    /// 0-based input share the monomial reads.
    pub share: usize,
    /// Monomial over the share's `s` bits (bit `i` set = variable `i`).
    pub monomial: u8,
    pub output_bit: usize,
    /// 0-based components receiving the term.
    pub targets: [usize; 2],
}

impl CorrectionTerm {
    pub fn new(share: usize, monomial: u8, output_bit: usize) -> Self {
        Self {
            share,
            monomial,
            output_bit,
            targets: {
                let mut t = present_shares(share);
                t.sort();
                t
            },
        }
    }

    pub fn with_targets(share: usize, monomial: u8, output_bit: usize, targets: [usize; 2]) -> Self {
        Self {
            share,
            monomial,
            output_bit,
            targets,
        }
    }

    fn validate(&self, sf: &SharedFunction) -> Result<()> {
        let mut t = self.targets;
        t.sort();
        let mut expected = [(self.share + 1) % 3, (self.share + 2) % 3];
        expected.sort();
        if self.share > 2 || t != expected {
            return Err(Error::InvalidTarget {
                share: self.share + 1,
                targets: self.targets.map(|k| k + 1),
            });
        }
        if self.output_bit >= sf.out_width
            || self.monomial == 0
            || (self.monomial as u32) >> sf.base_width != 0
        {
            return Err(Error::InvalidParameter(format!(
                "correction term {self} does not fit the sharing"
            )));
        }
        Ok(())
    }

    fn shared_monomial(&self, s: usize) -> SharedMonomial {
        (self.monomial as u32) << (self.share * s)
    }

    /// `c²b² → y¹₁, y³₁`.
    pub fn label(&self, s: usize) -> String {
        format!(
            "{} -> y{}{}, y{}{}",
            format_monomial(self.shared_monomial(s), s, true),
            SUPERSCRIPT[self.targets[0]],
            SUBSCRIPT[self.output_bit],
            SUPERSCRIPT[self.targets[1]],
            SUBSCRIPT[self.output_bit]
        )
    }
}

impl fmt::Display for CorrectionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = (8 - self.monomial.leading_zeros() as usize).max(4);
        f.write_str(&self.label(s))
    }
}

pub fn apply_correction(sf: &SharedFunction, ct: &CorrectionTerm) -> Result<SharedFunction> {
    ct.validate(sf)?;
    let mut out = sf.clone();
    let m = ct.shared_monomial(sf.base_width);
    for &k in &ct.targets {
        out.toggle_term(k, ct.output_bit, m);
    }
    out.rebuild();
    Ok(out)
}

/// Removing a correction term is the same XOR as adding it.
pub fn remove_correction(sf: &SharedFunction, ct: &CorrectionTerm) -> Result<SharedFunction> {
    apply_correction(sf, ct)
}

pub fn apply_corrections(sf: &SharedFunction, cts: &[CorrectionTerm]) -> Result<SharedFunction> {
    cts.iter().try_fold(sf.clone(), |acc, ct| apply_correction(&acc, ct))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSearch {
    /// Sets found, in search order.
    pub sets: Vec<Vec<CorrectionTerm>>,
    /// Number of candidate sets examined.
    pub examined: u64,
    /// False when the budget ran out before the search space was exhausted.
    pub complete: bool,
}

impl CorrectionSearch {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Candidate correction terms in search order: by output bit, then share, then monomial.
pub fn correction_candidates(s: usize, t: usize, degree_max: usize) -> Vec<CorrectionTerm> {
    let mut out = Vec::new();
    for bit in 0..t {
        for share in 0..3 {
            for m in 1..1u32 << s {
                if (m.count_ones() as usize) <= degree_max {
                    out.push(CorrectionTerm::new(share, m as u8, bit));
                }
            }
        }
    }
    out
}

/// Searches single terms, then pairs, then triples, ... up to `set_size_max`
/// for sets that make `sf` uniform. `max_examined` bounds the number of sets
/// tried; when it is hit the partial result is returned with `complete = false`.
pub fn search_corrections(
    sf: &SharedFunction,
    degree_max: usize,
    set_size_max: usize,
    max_examined: u64,
    exec: Exec,
) -> CorrectionSearch {
    let s = sf.base_width;
    let t = sf.out_width;
    let base_fn = sf.base_table();
    let table = sf.composite_table(exec);
    if uniform_table(&table, s, t, &base_fn) {
        return CorrectionSearch {
            sets: vec![Vec::new()],
            examined: 1,
            complete: true,
        };
    }
    let cands = correction_candidates(s, t, degree_max);
    // per-candidate XOR delta on the packed composite output
    let deltas: Vec<Vec<u32>> = exec.map_slice(&cands, |ct| {
        let m = ct.shared_monomial(s);
        let flip = ct
            .targets
            .iter()
            .fold(0u32, |acc, &k| acc | 1 << (k * t + ct.output_bit));
        (0..1u32 << (3 * s))
            .map(|idx| if idx & m == m { flip } else { 0 })
            .collect()
    });

    let mut sets = Vec::new();
    let mut examined = 0u64;
    let mut complete = true;
    for size in 1..=set_size_max.min(cands.len()) {
        let combos = combinations_count(cands.len(), size);
        let remaining = max_examined.saturating_sub(examined);
        let take = combos.min(remaining);
        // split on the first element so each work item is an independent sub-search
        let found: Vec<Vec<Vec<usize>>> = exec.map_range(cands.len(), |first| {
            let mut hits = Vec::new();
            let mut idxs: Vec<usize> = (first..first + size).collect();
            if idxs[size - 1] >= cands.len() {
                return hits;
            }
            let start_rank = rank_of(&idxs, cands.len());
            if start_rank >= take {
                return hits;
            }
            let mut scratch = vec![0u32; table.len()];
            loop {
                if rank_of(&idxs, cands.len()) >= take {
                    break;
                }
                for (i, out) in scratch.iter_mut().enumerate() {
                    *out = table[i] ^ idxs.iter().fold(0, |a, &c| a ^ deltas[c][i]);
                }
                if uniform_table(&scratch, s, t, &base_fn) {
                    hits.push(idxs.clone());
                }
                if !next_combination_with_first(&mut idxs, cands.len()) {
                    break;
                }
            }
            hits
        });
        examined += take;
        for group in found {
            for idxs in group {
                sets.push(idxs.iter().map(|&i| cands[i]).collect());
            }
        }
        if take < combos {
            complete = false;
            break;
        }
    }
    CorrectionSearch {
        sets,
        examined,
        complete,
    }
}

fn combinations_count(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Lexicographic rank of a sorted index combination among all `k`-subsets of `0..n`.
fn rank_of(idxs: &[usize], n: usize) -> u64 {
    let k = idxs.len();
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (pos, &v) in idxs.iter().enumerate() {
        for skipped in prev..v {
            rank += combinations_count(n - skipped - 1, k - pos - 1);
        }
        prev = v + 1;
    }
    rank
}

/// Advances to the next combination keeping the first index fixed.
fn next_combination_with_first(idxs: &mut [usize], n: usize) -> bool {
    let k = idxs.len();
    if k <= 1 {
        return false;
    }
    let mut i = k - 1;
    loop {
        if idxs[i] < n - (k - i) {
            idxs[i] += 1;
            for j in i + 1..k {
                idxs[j] = idxs[j - 1] + 1;
            }
            return true;
        }
        if i == 1 {
            return false;
        }
        i -= 1;
    }
}

/// Share-wise affine conjugation: each component becomes
/// `A′ ∘ F^k(A(x^p), A(x^q))`, so the base becomes `A′ ∘ F ∘ A`.
pub fn conjugate_sharing(
    inner: &AffineMap,
    sf: &SharedFunction,
    outer: &AffineMap,
) -> Result<SharedFunction> {
    if !inner.is_invertible() || !outer.is_invertible() {
        return Err(Error::SingularAffine);
    }
    let s = sf.base_width;
    let t = sf.out_width;
    if inner.width() != s || outer.width() != t {
        return Err(Error::WidthMismatch(format!(
            "affine widths ({}, {}) vs sharing {s} -> {t}",
            inner.width(),
            outer.width()
        )));
    }
    if !sf.comps.iter().all(Component::is_structurally_non_complete) {
        return Err(Error::InvalidParameter(
            "conjugation needs a non-complete sharing".into(),
        ));
    }
    let terms: [Vec<BTreeSet<SharedMonomial>>; 3] = std::array::from_fn(|k| {
        let c = &sf.comps[k];
        let [p, q] = present_shares(k);
        let mut words: Vec<u8> = (0..1u32 << (2 * s))
            .map(|uv| {
                let u = inner.apply((uv & ((1 << s) - 1)) as u8) as u32;
                let v = inner.apply((uv >> s) as u8) as u32;
                outer.apply(c.eval_packed(u << (p * s) | v << (q * s), s))
            })
            .collect();
        boolfunc::moebius(&mut words);
        let mut out = vec![BTreeSet::new(); t];
        for (m, &w) in words.iter().enumerate() {
            let m = m as u32;
            let lo = m & ((1 << s) - 1);
            let hi = m >> s;
            let shared = lo << (p * s) | hi << (q * s);
            for (bit, set) in out.iter_mut().enumerate() {
                if (w >> bit) & 1 == 1 {
                    set.insert(shared);
                }
            }
        }
        out
    });
    SharedFunction::from_terms(s, t, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfunc::tt_to_anf;

    fn anf(outputs: &[Vec<u8>]) -> Anf {
        Anf::from_monomials(4, outputs).unwrap()
    }

    #[test]
    fn direct_share_linear_term() {
        // g = c ⊕ b ⊕ a
        let sf = direct_share(&anf(&[vec![4, 2, 1]])).unwrap();
        let lines: Vec<String> = sf.report().lines().map(str::to_string).collect();
        assert_eq!(lines[0], "y¹₀ = c² ⊕ b² ⊕ a²");
        assert_eq!(lines[1], "y²₀ = c³ ⊕ b³ ⊕ a³");
        assert_eq!(lines[2], "y³₀ = c¹ ⊕ b¹ ⊕ a¹");
    }

    #[test]
    fn direct_share_constant_goes_to_first_component() {
        let sf = direct_share(&anf(&[vec![0]])).unwrap();
        assert_eq!(sf.eval(SharedInput::new(3, 5, 9)), [1, 0, 0]);
    }

    #[test]
    fn direct_share_quadratic_partition() {
        let sf = direct_share(&anf(&[vec![2 | 1]])).unwrap();
        let r = sf.report();
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "y¹₀ = b²a² ⊕ b²a³ ⊕ b³a²");
        assert_eq!(lines[1], "y²₀ = b¹a³ ⊕ b³a¹ ⊕ b³a³");
        assert_eq!(lines[2], "y³₀ = b¹a¹ ⊕ b¹a² ⊕ b²a¹");
        for k in 0..3 {
            assert_eq!(sf.component(k).terms(0).len(), 3);
        }
        let all: BTreeSet<u32> = (0..3).flat_map(|k| sf.component(k).terms(0).clone()).collect();
        assert_eq!(all.len(), 9);
        assert!(check_non_completeness(&sf));
        let reference = TruthTable::from_fn(4, 1, |x| (x >> 1) & x & 1).unwrap();
        assert!(check_correctness(&sf, &reference).unwrap());
    }

    #[test]
    fn direct_share_rejects_cubic() {
        let s = TruthTable::from_hex("C56B90AD3EF84712").unwrap();
        assert_eq!(direct_share(&tt_to_anf(&s)), Err(Error::DegreeTooHigh(3)));
    }

    #[test]
    fn corrupted_component_is_detected() {
        let mut terms: [Vec<BTreeSet<u32>>; 3] = std::array::from_fn(|_| vec![BTreeSet::new()]);
        terms[0][0].insert(share_var(0, 0, 4)); // comp1 reads a¹
        terms[0][0].insert(share_var(1, 0, 4));
        terms[1][0].insert(share_var(2, 0, 4));
        let sf = SharedFunction::from_terms(4, 1, terms).unwrap();
        assert!(!sf.component(0).is_structurally_non_complete());
        assert!(!check_non_completeness(&sf));
    }

    #[test]
    fn identity_sharing_is_uniform() {
        let id = tt_to_anf(&TruthTable::identity(4).unwrap());
        let sf = direct_share(&id).unwrap();
        assert!(check_uniformity(&sf));
        assert!(check_correctness(&sf, &TruthTable::identity(4).unwrap()).unwrap());
    }

    #[test]
    fn correction_validation() {
        let sf = direct_share(&anf(&[vec![1], vec![2], vec![4], vec![8]])).unwrap();
        let bad = CorrectionTerm::with_targets(1, 6, 1, [0, 1]);
        assert!(matches!(
            apply_correction(&sf, &bad),
            Err(Error::InvalidTarget { .. })
        ));
        let good = CorrectionTerm::new(1, 6, 1);
        assert_eq!(good.targets, [0, 2]);
        let once = apply_correction(&sf, &good).unwrap();
        assert_ne!(once, sf);
        assert_eq!(apply_correction(&once, &good).unwrap(), sf);
        assert_eq!(good.label(4), "c²b² -> y¹₁, y³₁");
    }

    #[test]
    fn text_round_trip() {
        let g = TruthTable::from_hex("7E92B04D5CA1836F").unwrap();
        let sf = direct_share(&tt_to_anf(&g)).unwrap();
        let again = parse_sharing(&sf.to_text()).unwrap();
        assert_eq!(again, sf);
        let uni = parse_sharing(&sf.report()).unwrap();
        assert_eq!(uni, sf);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_sharing("").is_err());
        assert!(parse_sharing("y4_0 = a1").is_err());
        assert!(parse_sharing("y1_0 = a1 + q2").is_err());
        assert!(parse_sharing("y1_0 = a").is_err());
        assert!(parse_sharing("y1_0 = a2\ny1_0 = b2").is_err());
        let e = parse_sharing("y1_0 = a2\nnonsense").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn combination_ranking() {
        let n = 7;
        let mut all = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    all.push(vec![a, b, c]);
                }
            }
        }
        for (r, idxs) in all.iter().enumerate() {
            assert_eq!(rank_of(idxs, n), r as u64);
        }
        let mut idxs = vec![2, 3, 4];
        let mut count = 1;
        while next_combination_with_first(&mut idxs, n) {
            assert_eq!(idxs[0], 2);
            count += 1;
        }
        assert_eq!(count, combinations_count(4, 2));
    }
}
