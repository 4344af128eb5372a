//! Small vectorial Boolean functions over GF(2).
//!
//! Inputs are indexed so that bit 0 of the table index is the least
//! significant variable. For 4-bit functions the variables are named
//! `d,c,b,a` from most to least significant, so `a` is bit 0.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_WIDTH: usize = 8;

fn check_width(w: usize) -> Result<()> {
    if w == 0 || w > MAX_WIDTH {
        return Err(Error::UnsupportedWidth(w));
    }
    Ok(())
}

/// Lookup-table form of an `in_width`-bit to `out_width`-bit function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruthTable {
    in_width: usize,
    out_width: usize,
    entries: Vec<u8>,
}

impl TruthTable {
    pub fn new(in_width: usize, out_width: usize, entries: Vec<u8>) -> Result<Self> {
        check_width(in_width)?;
        check_width(out_width)?;
        if entries.len() != 1 << in_width {
            return Err(Error::InvalidTable(format!(
                "expected {} entries, got {}",
                1usize << in_width,
                entries.len()
            )));
        }
        let limit = 1u16 << out_width;
        if let Some(e) = entries.iter().find(|&&e| e as u16 >= limit) {
            return Err(Error::InvalidTable(format!(
                "entry {e:#x} does not fit in {out_width} bits"
            )));
        }
        Ok(Self {
            in_width,
            out_width,
            entries,
        })
    }

    pub fn from_fn(in_width: usize, out_width: usize, f: impl Fn(u8) -> u8) -> Result<Self> {
        check_width(in_width)?;
        let entries = (0..1u16 << in_width).map(|x| f(x as u8)).collect();
        Self::new(in_width, out_width, entries)
    }

    pub fn identity(width: usize) -> Result<Self> {
        Self::from_fn(width, width, |x| x)
    }

    /// Parses a table written left to right as the outputs for inputs 0, 1, 2, ...
    ///
    /// The input width is derived from the length: one hex digit per entry for
    /// 4-bit outputs, two per entry for wider outputs.
    pub fn from_hex(s: &str) -> Result<Self> {
        let digits: Vec<u8> = s
            .trim()
            .trim_start_matches("0x")
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| {
                c.to_digit(16)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::InvalidTable(format!("non-hex character `{c}`")))
            })
            .collect::<Result<_>>()?;
        let n = digits.len();
        if n.is_power_of_two() && n >= 2 && n <= 16 {
            let w = n.trailing_zeros() as usize;
            return Self::new(w, 4, digits);
        }
        if n.is_power_of_two() && n >= 64 && n <= 512 {
            let entries: Vec<u8> = digits.chunks(2).map(|p| (p[0] << 4) | p[1]).collect();
            let w = entries.len().trailing_zeros() as usize;
            return Self::new(w, 8, entries);
        }
        Err(Error::InvalidTable(format!(
            "cannot infer table width from {n} hex digits"
        )))
    }

    /// Same as [`from_hex`](Self::from_hex) but with explicit widths, for tables
    /// whose output width is smaller than one hex digit.
    pub fn from_hex_with_widths(s: &str, in_width: usize, out_width: usize) -> Result<Self> {
        let t = Self::from_hex(s)?;
        if t.in_width != in_width {
            return Err(Error::WidthMismatch(format!(
                "hex string encodes {} inputs, expected {in_width}",
                t.in_width
            )));
        }
        Self::new(in_width, out_width, t.entries)
    }

    pub fn to_hex(&self) -> String {
        if self.out_width <= 4 {
            self.entries.iter().map(|e| format!("{e:X}")).collect()
        } else {
            self.entries.iter().map(|e| format!("{e:02X}")).collect()
        }
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, x: u8) -> u8 {
        self.entries[x as usize]
    }

    /// Truth table of one output bit, as a function to {0,1}.
    pub fn coordinate(&self, bit: usize) -> Vec<u8> {
        self.entries.iter().map(|e| (e >> bit) & 1).collect()
    }

    pub fn inverse(&self) -> Result<Self> {
        if !is_bijection(self)? {
            return Err(Error::InvalidTable("table is not a bijection".into()));
        }
        let mut inv = vec![0u8; self.entries.len()];
        for (x, &y) in self.entries.iter().enumerate() {
            inv[y as usize] = x as u8;
        }
        Self::new(self.in_width, self.out_width, inv)
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Algebraic normal form, one coefficient vector per output bit.
///
/// `coeffs[m]` holds, in bit `j`, the coefficient of monomial `m` in output
/// bit `j`; monomial `m` is the product of the variables whose bits are set in
/// `m` (so `m = 0` is the constant term).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Anf {
    in_width: usize,
    out_width: usize,
    coeffs: Vec<u8>,
}

impl Anf {
    pub fn new(in_width: usize, out_width: usize, coeffs: Vec<u8>) -> Result<Self> {
        check_width(in_width)?;
        check_width(out_width)?;
        if coeffs.len() != 1 << in_width {
            return Err(Error::InvalidTable(format!(
                "ANF needs {} coefficient words",
                1usize << in_width
            )));
        }
        if out_width < 8 && coeffs.iter().any(|&c| c >> out_width != 0) {
            return Err(Error::InvalidTable("coefficient beyond output width".into()));
        }
        Ok(Self {
            in_width,
            out_width,
            coeffs,
        })
    }

    /// Builds an ANF from explicit monomial lists per output bit.
    pub fn from_monomials(in_width: usize, outputs: &[Vec<u8>]) -> Result<Self> {
        check_width(in_width)?;
        let mut coeffs = vec![0u8; 1 << in_width];
        for (bit, monos) in outputs.iter().enumerate() {
            for &m in monos {
                if (m as usize) >= coeffs.len() {
                    return Err(Error::InvalidTable(format!(
                        "monomial {m:#b} references a variable beyond width {in_width}"
                    )));
                }
                coeffs[m as usize] ^= 1 << bit;
            }
        }
        Self::new(in_width, outputs.len(), coeffs)
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn coeffs(&self) -> &[u8] {
        &self.coeffs
    }

    pub fn coefficient(&self, bit: usize, monomial: u8) -> bool {
        (self.coeffs[monomial as usize] >> bit) & 1 == 1
    }

    /// The constant coefficient `k0` of an output bit.
    pub fn constant(&self, bit: usize) -> bool {
        self.coefficient(bit, 0)
    }

    /// Monomials of one output bit, in display order.
    pub fn monomials(&self, bit: usize) -> Vec<u8> {
        let mut out: Vec<u8> = (0..self.coeffs.len())
            .filter(|&m| (self.coeffs[m] >> bit) & 1 == 1)
            .map(|m| m as u8)
            .collect();
        out.sort_by(|&x, &y| monomial_order(x, y));
        out
    }

    pub fn eval(&self, x: u8) -> u8 {
        let mut acc = 0u8;
        for (m, &c) in self.coeffs.iter().enumerate() {
            if c != 0 && (x as usize) & m == m {
                acc ^= c;
            }
        }
        acc
    }

    /// Renders one output bit as `1 ⊕ a ⊕ dc ⊕ ...`.
    pub fn format_bit(&self, bit: usize) -> String {
        let terms: Vec<String> = self
            .monomials(bit)
            .into_iter()
            .map(|m| monomial_name(m, self.in_width))
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" ⊕ ")
        }
    }
}

impl fmt::Display for Anf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let out_name = if self.out_width == 4 { "g" } else { "y" };
        for bit in 0..self.out_width {
            writeln!(f, "{out_name}{bit} = {}", self.format_bit(bit))?;
        }
        Ok(())
    }
}

/// Degree ascending; within a degree, larger variables first (`dc` before `db` before `cb`).
pub(crate) fn monomial_order(x: u8, y: u8) -> std::cmp::Ordering {
    x.count_ones()
        .cmp(&y.count_ones())
        .then_with(|| y.cmp(&x))
}

/// Name of input variable `i`: `a` for bit 0 up to `h` for bit 7.
pub fn variable_name(i: usize) -> String {
    ["a", "b", "c", "d", "e", "f", "g", "h"][i].to_string()
}

pub fn monomial_name(m: u8, width: usize) -> String {
    if m == 0 {
        return "1".into();
    }
    (0..width)
        .rev()
        .filter(|i| (m >> i) & 1 == 1)
        .map(variable_name)
        .collect()
}

/// In-place binary Möbius transform over coefficient words; it is its own inverse.
pub(crate) fn moebius(words: &mut [u8]) {
    let n = words.len();
    let mut step = 1;
    while step < n {
        for block in (0..n).step_by(step << 1) {
            for i in block..block + step {
                words[i + step] ^= words[i];
            }
        }
        step <<= 1;
    }
}

pub fn tt_to_anf(tt: &TruthTable) -> Anf {
    let mut coeffs = tt.entries.clone();
    moebius(&mut coeffs);
    Anf {
        in_width: tt.in_width,
        out_width: tt.out_width,
        coeffs,
    }
}

pub fn anf_to_tt(anf: &Anf) -> TruthTable {
    let mut entries = anf.coeffs.clone();
    moebius(&mut entries);
    TruthTable {
        in_width: anf.in_width,
        out_width: anf.out_width,
        entries,
    }
}

/// Largest monomial size over all output bits; 0 for constants.
pub fn degree(anf: &Anf) -> usize {
    anf.coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(m, _)| m.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

pub fn is_bijection(tt: &TruthTable) -> Result<bool> {
    if tt.in_width != tt.out_width {
        return Err(Error::WidthMismatch(format!(
            "bijection needs equal widths, got {} -> {}",
            tt.in_width, tt.out_width
        )));
    }
    let mut seen = [false; 256];
    for &e in &tt.entries {
        if std::mem::replace(&mut seen[e as usize], true) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `outer ∘ inner`.
pub fn compose(outer: &TruthTable, inner: &TruthTable) -> Result<TruthTable> {
    if inner.out_width != outer.in_width {
        return Err(Error::WidthMismatch(format!(
            "inner produces {} bits but outer consumes {}",
            inner.out_width, outer.in_width
        )));
    }
    let entries = inner.entries.iter().map(|&y| outer.get(y)).collect();
    TruthTable::new(inner.in_width, outer.out_width, entries)
}

/// `x ↦ Mx ⊕ v` over GF(2)^s.
///
/// Row `i` of the matrix is a bitmask selecting the input bits XORed into
/// output bit `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineMap {
    width: usize,
    rows: Vec<u8>,
    constant: u8,
}

impl AffineMap {
    pub fn new(width: usize, rows: Vec<u8>, constant: u8) -> Result<Self> {
        check_width(width)?;
        if rows.len() != width {
            return Err(Error::WidthMismatch(format!(
                "{} rows for a {width}-bit map",
                rows.len()
            )));
        }
        let mask = ((1u16 << width) - 1) as u8;
        if rows.iter().any(|r| r & !mask != 0) || constant & !mask != 0 {
            return Err(Error::WidthMismatch("row or constant exceeds width".into()));
        }
        Ok(Self {
            width,
            rows,
            constant,
        })
    }

    pub fn identity(width: usize) -> Result<Self> {
        Self::new(width, (0..width).map(|i| 1u8 << i).collect(), 0)
    }

    /// Exchanges bits `i` and `j`.
    pub fn bit_swap(width: usize, i: usize, j: usize) -> Result<Self> {
        let mut rows: Vec<u8> = (0..width).map(|k| 1u8 << k).collect();
        rows.swap(i, j);
        Self::new(width, rows, 0)
    }

    /// Uniformly random invertible map (rejection sampling on the matrix).
    pub fn random_invertible<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<Self> {
        check_width(width)?;
        let mask = ((1u16 << width) - 1) as u8;
        loop {
            let rows: Vec<u8> = (0..width).map(|_| rng.random::<u8>() & mask).collect();
            let constant = rng.random::<u8>() & mask;
            let map = Self::new(width, rows, constant)?;
            if map.is_invertible() {
                return Ok(map);
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[u8] {
        &self.rows
    }

    pub fn constant(&self) -> u8 {
        self.constant
    }

    #[inline]
    pub fn apply_linear(&self, x: u8) -> u8 {
        self.rows
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &r)| acc | ((((r & x).count_ones() & 1) as u8) << i))
    }

    #[inline]
    pub fn apply(&self, x: u8) -> u8 {
        self.apply_linear(x) ^ self.constant
    }

    pub fn is_invertible(&self) -> bool {
        rank(&self.rows) == self.width
    }

    /// Same linear part with the constant dropped.
    pub fn linear_part(&self) -> Self {
        Self {
            width: self.width,
            rows: self.rows.clone(),
            constant: 0,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_invertible() {
            return Err(Error::SingularAffine);
        }
        // tabulate and invert; widths are tiny
        let n = 1usize << self.width;
        let mut inv = vec![0u8; n];
        for x in 0..n {
            inv[self.apply(x as u8) as usize] = x as u8;
        }
        let constant = inv[0];
        let rows = (0..self.width)
            .map(|i| {
                (0..self.width).fold(0u8, |acc, j| {
                    let col = inv[1 << j] ^ constant;
                    acc | (((col >> i) & 1) << j)
                })
            })
            .collect();
        Self::new(self.width, rows, constant)
    }

    pub fn to_table(&self) -> TruthTable {
        TruthTable {
            in_width: self.width,
            out_width: self.width,
            entries: (0..1u16 << self.width).map(|x| self.apply(x as u8)).collect(),
        }
    }
}

fn rank(rows: &[u8]) -> usize {
    let mut rows = rows.to_vec();
    let mut r = 0;
    for bit in 0..8 {
        let Some(p) = (r..rows.len()).find(|&i| (rows[i] >> bit) & 1 == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && (rows[i] >> bit) & 1 == 1 {
                rows[i] ^= rows[r];
            }
        }
        r += 1;
    }
    r
}

pub fn apply_affine(map: &AffineMap, x: u8) -> u8 {
    map.apply(x)
}

/// Table of `outer ∘ tt ∘ inner`.
pub fn affine_conjugate(
    inner: &AffineMap,
    tt: &TruthTable,
    outer: &AffineMap,
) -> Result<TruthTable> {
    if inner.width != tt.in_width || outer.width != tt.out_width {
        return Err(Error::WidthMismatch(format!(
            "affine maps ({}, {}) do not match table {} -> {}",
            inner.width, outer.width, tt.in_width, tt.out_width
        )));
    }
    TruthTable::from_fn(tt.in_width, tt.out_width, |x| {
        outer.apply(tt.get(inner.apply(x)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const G: &str = "7E92B04D5CA1836F";
    const F: &str = "08B7A31C46F9ED52";
    const S: &str = "C56B90AD3EF84712";

    // bit order <d,c,b,a>, a = bit 0
    const A: u8 = 1;
    const B: u8 = 2;
    const C: u8 = 4;
    const D: u8 = 8;

    #[test]
    fn g_anf_matches_published_equations() {
        let anf = tt_to_anf(&TruthTable::from_hex(G).unwrap());
        let expected = Anf::from_monomials(
            4,
            &[
                vec![0, A, D | C, D | B, C | B],
                vec![0, D, B, C | A, B | A],
                vec![0, C, B],
                vec![C, B, A],
            ],
        )
        .unwrap();
        assert_eq!(anf, expected);
        assert_eq!(anf.format_bit(0), "1 ⊕ a ⊕ dc ⊕ db ⊕ cb");
        assert_eq!(anf.format_bit(1), "1 ⊕ d ⊕ b ⊕ ca ⊕ ba");
    }

    #[test]
    fn zero_table_has_zero_anf() {
        let t = TruthTable::new(4, 4, vec![0; 16]).unwrap();
        assert!(tt_to_anf(&t).coeffs().iter().all(|&c| c == 0));
        assert_eq!(degree(&tt_to_anf(&t)), 0);
    }

    #[test]
    fn f_anf_evaluates_to_published_table() {
        let anf = Anf::from_monomials(
            4,
            &[
                vec![B, C | A],
                vec![C, B, D | A],
                vec![D, B | A],
                vec![C, B, A, D | A],
            ],
        )
        .unwrap();
        let t = anf_to_tt(&anf);
        assert_eq!(t.to_hex(), F);
        assert_eq!(t.get(0), 0);
        assert_eq!(t.get(7), 0xC);
    }

    #[test]
    fn constant_and_identity_anf() {
        let one = Anf::from_monomials(4, &[vec![0]]).unwrap();
        assert!(anf_to_tt(&one).entries().iter().all(|&e| e == 1));
        let id = Anf::from_monomials(4, &[vec![A], vec![B], vec![C], vec![D]]).unwrap();
        assert_eq!(anf_to_tt(&id), TruthTable::identity(4).unwrap());
        assert_eq!(degree(&id), 1);
    }

    #[test]
    fn degrees_of_present_components() {
        let deg = |h| degree(&tt_to_anf(&TruthTable::from_hex(h).unwrap()));
        assert_eq!(deg(S), 3);
        assert_eq!(deg(G), 2);
        assert_eq!(deg(F), 2);
    }

    #[test]
    fn bijections() {
        for h in [S, G, F] {
            assert!(is_bijection(&TruthTable::from_hex(h).unwrap()).unwrap());
        }
        let c = TruthTable::new(4, 4, vec![3; 16]).unwrap();
        assert!(!is_bijection(&c).unwrap());
        let narrow = TruthTable::new(4, 1, vec![0; 16]).unwrap();
        assert!(matches!(is_bijection(&narrow), Err(Error::WidthMismatch(_))));
    }

    #[test]
    fn composition() {
        let g = TruthTable::from_hex(G).unwrap();
        let f = TruthTable::from_hex(F).unwrap();
        assert_eq!(compose(&f, &g).unwrap().to_hex(), S);
        let id = TruthTable::identity(4).unwrap();
        assert_eq!(compose(&id, &g).unwrap(), g);
        assert_eq!(compose(&g.inverse().unwrap(), &g).unwrap(), id);
        let narrow = TruthTable::new(3, 3, vec![0; 8]).unwrap();
        assert!(compose(&narrow, &g).is_err());
    }

    #[test]
    fn affine_basics() {
        let g = TruthTable::from_hex(G).unwrap();
        let id = AffineMap::identity(4).unwrap();
        assert_eq!(affine_conjugate(&id, &g, &id).unwrap(), g);
        let sw = AffineMap::bit_swap(4, 1, 3).unwrap();
        for x in 0..16u8 {
            assert_eq!(apply_affine(&sw, apply_affine(&sw, x)), x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = AffineMap::random_invertible(4, &mut rng).unwrap();
            let inv = m.inverse().unwrap();
            for x in 0..16u8 {
                assert_eq!(inv.apply(m.apply(x)), x);
            }
        }
        let singular = AffineMap::new(4, vec![1, 1, 4, 8], 0).unwrap();
        assert!(!singular.is_invertible());
        assert_eq!(singular.inverse(), Err(Error::SingularAffine));
    }

    #[test]
    fn degree_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for h in [S, G, F] {
            let t = TruthTable::from_hex(h).unwrap();
            for _ in 0..100 {
                let a = AffineMap::random_invertible(4, &mut rng).unwrap();
                let b = AffineMap::random_invertible(4, &mut rng).unwrap();
                let c = affine_conjugate(&a, &t, &b).unwrap();
                assert_eq!(degree(&tt_to_anf(&c)), degree(&tt_to_anf(&t)));
            }
        }
    }

    #[test]
    fn hex_parsing() {
        assert!(TruthTable::from_hex("7E92B04D5CA1836").is_err());
        assert!(TruthTable::from_hex("7E92B04D5CA1836G").is_err());
        let t = TruthTable::from_hex("0x7e92_b04d_5ca1_836f").unwrap();
        assert_eq!(t.to_hex(), G);
        let narrow = TruthTable::from_hex_with_widths("0110", 2, 1).unwrap();
        assert_eq!(narrow.out_width(), 1);
        assert!(TruthTable::new(4, 2, vec![4; 16]).is_err());
    }
}
