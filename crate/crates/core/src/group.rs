//! Exact word arithmetic in free products of cyclic groups.
//!
//! A [`Signature`] lists the factor orders: an entry `m >= 2` is the cyclic
//! group `Z_m`, an entry `0` is the infinite cyclic group `Z`. Words are kept
//! in reduced normal form: adjacent syllables belong to distinct factors and
//! exponents of finite factors lie in `1..m`, so equality of group elements
//! is plain equality of syllable sequences.
//!
//! Generators are printed as `a, b, c, d, f, g, ...` (the letters `e` and `i`
//! are reserved for the identity and the imaginary unit).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Generator alphabet; `e` and `i` are skipped.
pub const GENERATOR_LETTERS: &str = "abcdfghjklmnopqrstuvwxyz";

/// Default cap on the number of words in a ball.
pub const DEFAULT_BALL_CAP: usize = 4_000_000;

pub fn generator_letter(index: usize) -> Option<char> {
    GENERATOR_LETTERS.chars().nth(index)
}

pub fn generator_index(letter: char) -> Option<usize> {
    GENERATOR_LETTERS.chars().position(|c| c == letter)
}

/// Factor orders of a free product of cyclic groups.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(Arc<[u32]>);

impl Signature {
    pub fn new(orders: &[u32]) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidSignature("at least one factor required".into()));
        }
        if orders.len() > GENERATOR_LETTERS.len() {
            return Err(Error::InvalidSignature(format!(
                "at most {} factors supported",
                GENERATOR_LETTERS.len()
            )));
        }
        if let Some(bad) = orders.iter().find(|&&m| m == 1) {
            return Err(Error::InvalidSignature(format!(
                "factor order {bad} is not allowed (use 0 for Z or m >= 2)"
            )));
        }
        Ok(Signature(orders.into()))
    }

    /// The free group on `n` generators.
    pub fn free(n: usize) -> Result<Self> {
        Signature::new(&vec![0; n])
    }

    /// `Z_m * ... * Z_m` with `k` factors: the group of a Bell scenario.
    pub fn scenario(k: usize, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidSignature("scenario needs m >= 2".into()));
        }
        Signature::new(&vec![m as u32; k])
    }

    pub fn factors(&self) -> usize {
        self.0.len()
    }

    pub fn orders(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self, factor: usize) -> u32 {
        self.0[factor]
    }

    pub fn is_free(&self) -> bool {
        self.0.iter().all(|&m| m == 0)
    }

    /// Letters needed to write `x^p`: `min(p, m - p)` for `Z_m`, `|p|` for `Z`.
    pub fn syllable_length(&self, s: Syllable) -> usize {
        let m = self.order(s.factor as usize);
        if m == 0 {
            s.exp.unsigned_abs() as usize
        } else {
            let p = s.exp as u32;
            p.min(m - p) as usize
        }
    }

    pub fn check_same(&self, other: &Signature) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SignatureMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    /// Exponents of factor `f` with syllable length at most `budget`, in
    /// ascending stored order.
    fn exponents_within(&self, factor: usize, budget: usize) -> Vec<(i32, usize)> {
        let m = self.order(factor);
        let mut out = Vec::new();
        if m == 0 {
            for p in 1..=budget as i32 {
                out.push((-p, p as usize));
                out.push((p, p as usize));
            }
            out.sort();
        } else {
            for p in 1..m {
                let len = p.min(m - p) as usize;
                if len <= budget {
                    out.push((p as i32, len));
                }
            }
        }
        out
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature{self}")
    }
}

impl FromStr for Signature {
    type Err = Error;

    /// Accepts `[3,3]`, `3,3` or `0 0`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let orders = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad factor order {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Signature::new(&orders)
    }
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let orders = Vec::<u32>::deserialize(d)?;
        Signature::new(&orders).map_err(serde::de::Error::custom)
    }
}

/// One syllable `x_factor^exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub factor: u16,
    pub exp: i32,
}

impl Syllable {
    pub fn new(factor: usize, exp: i32) -> Self {
        Syllable {
            factor: factor as u16,
            exp,
        }
    }
}

/// A reduced word; the empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupWord {
    signature: Signature,
    syllables: Vec<Syllable>,
}

impl GroupWord {
    pub fn identity(signature: &Signature) -> Self {
        GroupWord {
            signature: signature.clone(),
            syllables: Vec::new(),
        }
    }

    /// The generator of factor `factor`.
    pub fn generator(signature: &Signature, factor: usize) -> Result<Self> {
        reduce(signature, &[(factor, 1)])
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Word length in generator letters.
    pub fn length(&self) -> usize {
        self.syllables.iter().map(|&s| self.signature.syllable_length(s)).sum()
    }

    pub fn multiply(&self, other: &GroupWord) -> Result<GroupWord> {
        multiply(self, other)
    }

    pub fn inverse(&self) -> GroupWord {
        invert(self)
    }

    /// Parses `"a b^2 a"`, `"ab^-1"` or `"e"` over the given signature.
    pub fn parse(signature: &Signature, text: &str) -> Result<GroupWord> {
        let raw = parse_raw_word(text)?;
        reduce(signature, &raw)
    }
}

impl PartialOrd for GroupWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortlex: by letter length, then lexicographically on syllables.
impl Ord for GroupWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.signature
            .cmp(&other.signature)
            .then_with(|| self.length().cmp(&other.length()))
            .then_with(|| self.syllables.cmp(&other.syllables))
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return write!(f, "e");
        }
        for (i, s) in self.syllables.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let letter = generator_letter(s.factor as usize).unwrap_or('?');
            if s.exp == 1 {
                write!(f, "{letter}")?;
            } else {
                write!(f, "{letter}^{}", s.exp)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupWord({} over {})", self, self.signature)
    }
}

#[derive(Serialize, Deserialize)]
struct WordRepr {
    signature: Signature,
    word: String,
}

impl Serialize for GroupWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WordRepr {
            signature: self.signature.clone(),
            word: self.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = WordRepr::deserialize(d)?;
        GroupWord::parse(&repr.signature, &repr.word).map_err(serde::de::Error::custom)
    }
}

/// Splits a word string into raw `(factor, exponent)` syllables.
pub fn parse_raw_word(text: &str) -> Result<Vec<(usize, i64)>> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
    if chars.is_empty() || chars == ['e'] || chars == ['1'] {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let c = chars[pos];
        let factor = generator_index(c).ok_or_else(|| Error::Parse(format!("unknown generator {c:?} in {text:?}")))?;
        pos += 1;
        let mut exp = 1i64;
        if pos < chars.len() && chars[pos] == '^' {
            pos += 1;
            let start = pos;
            if pos < chars.len() && (chars[pos] == '-' || chars[pos] == '+') {
                pos += 1;
            }
            while pos < chars.len() && chars[pos].is_ascii_digit() {
                pos += 1;
            }
            let digits: String = chars[start..pos].iter().collect();
            exp = digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent {digits:?} in {text:?}")))?;
        }
        out.push((factor, exp));
    }
    Ok(out)
}

fn normalize_exp(order: u32, exp: i64) -> Result<i64> {
    if order == 0 {
        if exp.unsigned_abs() > i32::MAX as u64 {
            return Err(Error::InvalidArgument(format!("exponent {exp} out of range")));
        }
        Ok(exp)
    } else {
        Ok(exp.rem_euclid(order as i64))
    }
}

/// Reduces a raw syllable sequence to normal form.
pub fn reduce(signature: &Signature, raw: &[(usize, i64)]) -> Result<GroupWord> {
    let k = signature.factors();
    let mut stack: Vec<Syllable> = Vec::with_capacity(raw.len());
    for &(factor, exp) in raw {
        if factor >= k {
            return Err(Error::FactorOutOfRange {
                index: factor,
                factors: k,
            });
        }
        let order = signature.order(factor);
        let exp = normalize_exp(order, exp)?;
        if exp == 0 {
            continue;
        }
        push_syllable(&mut stack, order, factor as u16, exp)?;
    }
    Ok(GroupWord {
        signature: signature.clone(),
        syllables: stack,
    })
}

fn push_syllable(stack: &mut Vec<Syllable>, order: u32, factor: u16, exp: i64) -> Result<()> {
    match stack.last_mut() {
        Some(top) if top.factor == factor => {
            let combined = normalize_exp(order, top.exp as i64 + exp)?;
            if combined == 0 {
                stack.pop();
            } else {
                top.exp = combined as i32;
            }
        }
        _ => stack.push(Syllable {
            factor,
            exp: exp as i32,
        }),
    }
    Ok(())
}

pub fn multiply(w1: &GroupWord, w2: &GroupWord) -> Result<GroupWord> {
    w1.signature.check_same(&w2.signature)?;
    let mut stack = w1.syllables.clone();
    for s in &w2.syllables {
        let order = w1.signature.order(s.factor as usize);
        push_syllable(&mut stack, order, s.factor, s.exp as i64)?;
    }
    Ok(GroupWord {
        signature: w1.signature.clone(),
        syllables: stack,
    })
}

pub fn invert(w: &GroupWord) -> GroupWord {
    let syllables = w
        .syllables
        .iter()
        .rev()
        .map(|s| {
            let m = w.signature.order(s.factor as usize);
            let exp = if m == 0 { -s.exp } else { m as i32 - s.exp };
            Syllable { factor: s.factor, exp }
        })
        .collect();
    GroupWord {
        signature: w.signature.clone(),
        syllables,
    }
}

/// Number of reduced words of length at most `radius`.
pub fn ball_size(signature: &Signature, radius: usize) -> u128 {
    let k = signature.factors();
    // memo[budget][last] with last == k meaning "no previous factor"
    let mut memo = vec![vec![0u128; k + 1]; radius + 1];
    for budget in 0..=radius {
        for last in 0..=k {
            let mut total = 1u128;
            for f in 0..k {
                if f == last {
                    continue;
                }
                for (_, len) in signature.exponents_within(f, budget) {
                    total = total.saturating_add(memo[budget - len][f]);
                }
            }
            memo[budget][last] = total;
        }
    }
    memo[radius][k]
}

/// All reduced words of length at most `radius`, identity first, in shortlex
/// order (length, then syllables compared as `(factor, exponent)` pairs).
pub fn ball(signature: &Signature, radius: usize, cap: usize) -> Result<Vec<GroupWord>> {
    let needed = ball_size(signature, radius);
    if needed > cap as u128 {
        return Err(Error::ResourceLimit {
            what: "ball",
            needed: needed.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let k = signature.factors();
    let options: Vec<Vec<(i32, usize)>> = (0..k).map(|f| signature.exponents_within(f, radius)).collect();

    let mut out = Vec::with_capacity(needed as usize);
    let mut current = Vec::new();
    fn grow(
        sig: &Signature,
        options: &[Vec<(i32, usize)>],
        current: &mut Vec<Syllable>,
        budget: usize,
        out: &mut Vec<GroupWord>,
    ) {
        out.push(GroupWord {
            signature: sig.clone(),
            syllables: current.clone(),
        });
        let last = current.last().map(|s| s.factor as usize);
        for (f, exps) in options.iter().enumerate() {
            if Some(f) == last {
                continue;
            }
            for &(exp, len) in exps {
                if len <= budget {
                    current.push(Syllable::new(f, exp));
                    grow(sig, options, current, budget - len, out);
                    current.pop();
                }
            }
        }
    }
    grow(signature, &options, &mut current, radius, &mut out);
    out.sort_by(|a, b| a.length().cmp(&b.length()).then_with(|| a.syllables.cmp(&b.syllables)));
    Ok(out)
}

/// Word-to-position lookup for a ball.
pub fn index_map(words: &[GroupWord]) -> HashMap<GroupWord, usize> {
    words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect()
}

/// Known free subgroups of free products of cyclic groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "n")]
pub enum WitnessKind {
    /// `g1 = ab`, `g2 = ba` in `Z_m * Z_m`, `m >= 3`.
    TwoCyclic,
    /// `g1 = abc`, `g2 = acb` in `Z_2 * Z_2 * Z_2`.
    ThreeZ2,
    /// `g_i = a^i b^-i`, `i = 1..n`, in `F_2`.
    FreeInFree(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeWitness {
    pub kind: WitnessKind,
    pub target_signature: Signature,
}

impl FreeWitness {
    pub fn new(kind: WitnessKind, target_signature: Signature) -> Result<Self> {
        let orders = target_signature.orders();
        let ok = match kind {
            WitnessKind::TwoCyclic => orders.len() == 2 && orders.iter().all(|&m| m >= 3),
            WitnessKind::ThreeZ2 => orders == [2, 2, 2],
            WitnessKind::FreeInFree(n) => n >= 1 && orders == [0, 0],
        };
        if !ok {
            return Err(Error::IncompatibleWitness(format!(
                "{kind:?} does not apply to {target_signature}"
            )));
        }
        Ok(FreeWitness { kind, target_signature })
    }

    pub fn two_cyclic(m: u32) -> Result<Self> {
        FreeWitness::new(WitnessKind::TwoCyclic, Signature::new(&[m, m])?)
    }

    pub fn three_z2() -> Result<Self> {
        FreeWitness::new(WitnessKind::ThreeZ2, Signature::new(&[2, 2, 2])?)
    }

    pub fn free_in_free(n: usize) -> Result<Self> {
        FreeWitness::new(WitnessKind::FreeInFree(n), Signature::free(2)?)
    }

    /// Rank of the embedded free group.
    pub fn rank(&self) -> usize {
        match self.kind {
            WitnessKind::TwoCyclic | WitnessKind::ThreeZ2 => 2,
            WitnessKind::FreeInFree(n) => n,
        }
    }

    /// Images `g_1, ..., g_n` of the free generators.
    pub fn generator_images(&self) -> Vec<GroupWord> {
        let sig = &self.target_signature;
        let raw: Vec<Vec<(usize, i64)>> = match self.kind {
            WitnessKind::TwoCyclic => vec![vec![(0, 1), (1, 1)], vec![(1, 1), (0, 1)]],
            WitnessKind::ThreeZ2 => vec![vec![(0, 1), (1, 1), (2, 1)], vec![(0, 1), (2, 1), (1, 1)]],
            WitnessKind::FreeInFree(n) => (1..=n as i64).map(|i| vec![(0, i), (1, -i)]).collect(),
        };
        raw.iter()
            .map(|r| reduce(sig, r).expect("witness images are valid words"))
            .collect()
    }
}

/// Image of a word over `F_n` under `g_i -> witness generator i`.
pub fn embed_free(witness: &FreeWitness, free_word: &GroupWord) -> Result<GroupWord> {
    let n = witness.rank();
    let sig = free_word.signature();
    if !(sig.is_free() && sig.factors() == n) {
        return Err(Error::IncompatibleWitness(format!(
            "word over {sig} cannot be embedded by a rank-{n} witness"
        )));
    }
    let images = witness.generator_images();
    let inverses: Vec<GroupWord> = images.iter().map(invert).collect();
    let mut acc = GroupWord::identity(&witness.target_signature);
    for s in free_word.syllables() {
        let base = if s.exp > 0 {
            &images[s.factor as usize]
        } else {
            &inverses[s.factor as usize]
        };
        for _ in 0..s.exp.unsigned_abs() {
            acc = multiply(&acc, base)?;
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreenessReport {
    pub checked: usize,
    pub failures: Vec<GroupWord>,
    pub max_length: usize,
}

/// Embeds every nontrivial reduced word of length `<= max_length` and lists
/// those mapped to the identity.
pub fn check_freeness(witness: &FreeWitness, max_length: usize, cap: usize, exec: Execution) -> Result<FreenessReport> {
    if max_length == 0 {
        return Err(Error::InvalidArgument("max_length must be >= 1".into()));
    }
    let free = Signature::free(witness.rank())?;
    let words = ball(&free, max_length, cap)?;
    let nontrivial = &words[1..];
    let trivial_images = par::map(exec, nontrivial, |w| {
        embed_free(witness, w).map(|img| img.is_identity())
    });
    let mut failures = Vec::new();
    for (w, r) in nontrivial.iter().zip(trivial_images) {
        if r? {
            failures.push(w.clone());
        }
    }
    Ok(FreenessReport {
        checked: nontrivial.len(),
        failures,
        max_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(o: &[u32]) -> Signature {
        Signature::new(o).unwrap()
    }

    fn word(s: &Signature, raw: &[(usize, i64)]) -> GroupWord {
        reduce(s, raw).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let z33 = sig(&[3, 3]);
        assert!(word(&z33, &[(0, 1), (0, 2)]).is_identity());
        let f2 = sig(&[0, 0]);
        assert!(word(&f2, &[(0, 3), (1, -1), (1, 1), (0, -3)]).is_identity());
        let z222 = sig(&[2, 2, 2]);
        let w = word(&z222, &[(0, 1), (1, 1), (1, 1), (2, 1)]);
        assert_eq!(w.syllables(), &[Syllable::new(0, 1), Syllable::new(2, 1)]);
        assert_eq!(w.to_string(), "a c");
    }

    #[test]
    fn reduce_rejects_bad_factor() {
        let f2 = sig(&[0, 0]);
        assert_eq!(
            reduce(&f2, &[(2, 1)]),
            Err(Error::FactorOutOfRange { index: 2, factors: 2 })
        );
    }

    #[test]
    fn multiply_examples() {
        let z33 = sig(&[3, 3]);
        let ab = word(&z33, &[(0, 1), (1, 1)]);
        let ba = word(&z33, &[(1, 1), (0, 1)]);
        assert_eq!(multiply(&ab, &ba).unwrap(), word(&z33, &[(0, 1), (1, 2), (0, 1)]));
        assert_eq!(multiply(&GroupWord::identity(&z33), &ab).unwrap(), ab);

        let f2 = sig(&[0, 0]);
        let u = word(&f2, &[(0, 1), (1, -1)]);
        let v = word(&f2, &[(1, 1), (0, -1)]);
        assert!(multiply(&u, &v).unwrap().is_identity());

        assert!(matches!(multiply(&ab, &u), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn invert_examples() {
        let z33 = sig(&[3, 3]);
        assert!(invert(&GroupWord::identity(&z33)).is_identity());
        let ab = word(&z33, &[(0, 1), (1, 1)]);
        assert_eq!(invert(&ab).to_string(), "b^2 a^2");
        let f2 = sig(&[0, 0]);
        let w = word(&f2, &[(0, 2), (1, -1)]);
        assert_eq!(invert(&w).to_string(), "b a^-2");
    }

    #[test]
    fn ball_small_cases() {
        let f2 = sig(&[0, 0]);
        let b0 = ball(&f2, 0, DEFAULT_BALL_CAP).unwrap();
        assert_eq!(b0.len(), 1);
        assert!(b0[0].is_identity());
        let b1 = ball(&f2, 1, DEFAULT_BALL_CAP).unwrap();
        let names: Vec<String> = b1.iter().map(|w| w.to_string()).collect();
        assert_eq!(names, ["e", "a^-1", "a", "b^-1", "b"]);
    }

    #[test]
    fn ball_respects_cap() {
        let f2 = sig(&[0, 0]);
        let err = ball(&f2, 12, 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { needed: 1_062_881, .. }));
    }

    #[test]
    fn ball_size_formula() {
        let f2 = sig(&[0, 0]);
        for n in 0..=12u32 {
            assert_eq!(ball_size(&f2, n as usize), 2 * 3u128.pow(n) - 1);
        }
    }

    #[test]
    fn z_m_length_metric() {
        let z5 = sig(&[5, 5]);
        assert_eq!(word(&z5, &[(0, 4)]).length(), 1);
        assert_eq!(word(&z5, &[(0, 2), (1, 3)]).length(), 4);
    }

    #[test]
    fn parse_round_trip() {
        let z33 = sig(&[3, 3]);
        let w = GroupWord::parse(&z33, "a b^2 a").unwrap();
        assert_eq!(GroupWord::parse(&z33, &w.to_string()).unwrap(), w);
        let f2 = sig(&[0, 0]);
        assert_eq!(GroupWord::parse(&f2, "ab^-1").unwrap().to_string(), "a b^-1");
        assert!(GroupWord::parse(&f2, "e").unwrap().is_identity());
        assert!(GroupWord::parse(&f2, "q").is_err());
        let json = serde_json::to_string(&w).unwrap();
        let back: GroupWord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        assert_eq!("[3,3]".parse::<Signature>().unwrap(), z33);
    }

    #[test]
    fn witness_images() {
        let w = FreeWitness::two_cyclic(3).unwrap();
        let f2 = Signature::free(2).unwrap();
        let g1 = GroupWord::generator(&f2, 0).unwrap();
        assert_eq!(embed_free(&w, &g1).unwrap().to_string(), "a b");

        let w = FreeWitness::three_z2().unwrap();
        let g2 = GroupWord::generator(&f2, 1).unwrap();
        assert_eq!(embed_free(&w, &g2).unwrap().to_string(), "a c b");
        assert!(embed_free(&w, &GroupWord::identity(&f2)).unwrap().is_identity());

        let w = FreeWitness::free_in_free(3).unwrap();
        let f3 = Signature::free(3).unwrap();
        let g3 = GroupWord::generator(&f3, 2).unwrap();
        assert_eq!(embed_free(&w, &g3).unwrap().to_string(), "a^3 b^-3");
        assert!(embed_free(&w, &g1).is_err());
    }

    #[test]
    fn witness_signature_checks() {
        assert!(FreeWitness::new(WitnessKind::TwoCyclic, sig(&[2, 2])).is_err());
        assert!(FreeWitness::new(WitnessKind::ThreeZ2, sig(&[2, 2])).is_err());
        assert!(FreeWitness::new(WitnessKind::FreeInFree(2), sig(&[3, 3])).is_err());
    }

    #[test]
    fn degenerate_witness_is_caught() {
        // g1 = ab, g2 = ba in Z_2 * Z_2 satisfy g1 g2 = e
        let bad = FreeWitness {
            kind: WitnessKind::TwoCyclic,
            target_signature: sig(&[2, 2]),
        };
        let report = check_freeness(&bad, 2, DEFAULT_BALL_CAP, Execution::Sequential).unwrap();
        assert!(!report.failures.is_empty());
    }
}
