//! Group-algebra elements `C[G]` and `C[G] (x) C[G]`, the Fourier projector
//! basis of `Z_m * ... * Z_m`, Bell elements, sequential-measurement
//! monomials, and evaluation in matrix representations.
//!
//! Outcome `a` of setting `x` corresponds to the projector
//! `e^x_a = (1/m) sum_j w^{-a j} u_x^j` with `w = exp(2 pi i / m)`, so that
//! `u_x = sum_a w^a e^x_a`. Outcomes are 0-based.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupWord, Signature};
use crate::linalg::{ComplexMatrix, C64, ONE, ZERO};

/// Coefficients below this magnitude are dropped.
const COEFF_EPS: f64 = 1e-15;

fn root_of_unity(m: usize, power: i64) -> C64 {
    let angle = 2.0 * PI * (power.rem_euclid(m as i64) as f64) / m as f64;
    C64::from_polar(1.0, angle)
}

/// Finite complex combination of group words.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    signature: Signature,
    #[serde(with = "word_terms")]
    terms: BTreeMap<GroupWord, C64>,
}

mod word_terms {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Term {
        word: GroupWord,
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(t: &BTreeMap<GroupWord, C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        t.iter()
            .map(|(w, c)| Term {
                word: w.clone(),
                re: c.re,
                im: c.im,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<GroupWord, C64>, D::Error> {
        let terms = Vec::<Term>::deserialize(d)?;
        Ok(terms.into_iter().map(|t| (t.word, C64::new(t.re, t.im))).collect())
    }
}

impl AlgebraElement {
    pub fn zero(signature: &Signature) -> Self {
        AlgebraElement {
            signature: signature.clone(),
            terms: BTreeMap::new(),
        }
    }

    /// `delta_w`
    pub fn delta(word: GroupWord) -> Self {
        let signature = word.signature().clone();
        let mut terms = BTreeMap::new();
        terms.insert(word, ONE);
        AlgebraElement { signature, terms }
    }

    pub fn identity(signature: &Signature) -> Self {
        Self::delta(GroupWord::identity(signature))
    }

    pub fn from_terms(signature: &Signature, terms: impl IntoIterator<Item = (GroupWord, C64)>) -> Result<Self> {
        let mut el = Self::zero(signature);
        for (w, c) in terms {
            el.add_term(w, c)?;
        }
        Ok(el)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupWord, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &GroupWord) -> C64 {
        self.terms.get(word).copied().unwrap_or(ZERO)
    }

    pub fn add_term(&mut self, word: GroupWord, coeff: C64) -> Result<()> {
        if word.signature() != &self.signature {
            return Err(Error::SignatureMismatch {
                left: self.signature.to_string(),
                right: word.signature().to_string(),
            });
        }
        let entry = self.terms.entry(word).or_insert(ZERO);
        *entry += coeff;
        if entry.norm() <= COEFF_EPS {
            let key = self
                .terms
                .iter()
                .find(|(_, c)| c.norm() <= COEFF_EPS)
                .map(|(w, _)| w.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (w, &c) in &other.terms {
            out.add_term(w.clone(), c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(&self.signature);
        for (w, &c) in &self.terms {
            let v = c * s;
            if v.norm() > COEFF_EPS {
                out.terms.insert(w.clone(), v);
            }
        }
        out
    }

    /// Coefficients conjugated, words inverted.
    pub fn star(&self) -> Self {
        AlgebraElement {
            signature: self.signature.clone(),
            terms: self.terms.iter().map(|(w, c)| (w.inverse(), c.conj())).collect(),
        }
    }

    /// Convolution product `delta_g delta_h = delta_{gh}`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch {
                left: self.signature.to_string(),
                right: other.signature.to_string(),
            });
        }
        let mut acc: BTreeMap<GroupWord, C64> = BTreeMap::new();
        for (g, &c) in &self.terms {
            for (h, &d) in &other.terms {
                *acc.entry(g.multiply(h)?).or_insert(ZERO) += c * d;
            }
        }
        acc.retain(|_, c| c.norm() > COEFF_EPS);
        Ok(AlgebraElement {
            signature: self.signature.clone(),
            terms: acc,
        })
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficient difference against `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (w, c) in &self.terms {
            worst = worst.max((c - other.coefficient(w)).norm());
        }
        for (w, c) in &other.terms {
            worst = worst.max((c - self.coefficient(w)).norm());
        }
        worst
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.distance(&self.star()) <= tol
    }

    pub fn parse(signature: &Signature, text: &str) -> Result<Self> {
        let mut el = Self::zero(signature);
        for (coeff, body) in split_terms(text)? {
            if body.contains('|') {
                return Err(Error::Parse(format!(
                    "tensor term {body:?} in a group-algebra expression"
                )));
            }
            el.add_term(GroupWord::parse(signature, &body)?, coeff)?;
        }
        Ok(el)
    }
}

/// `alg_multiply`
pub fn alg_multiply(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    x.multiply(y)
}

pub fn star(el: &AlgebraElement) -> AlgebraElement {
    el.star()
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)*{}", c.re, c.im, w)?;
        }
        Ok(())
    }
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebraElement[{}]", self)
    }
}

/// Finite complex combination of word pairs, an element of `C[G] (x) C[H]`.
#[derive(Clone, PartialEq, Debug)]
pub struct BiAlgebraElement {
    left: Signature,
    right: Signature,
    terms: BTreeMap<(GroupWord, GroupWord), C64>,
}

impl BiAlgebraElement {
    pub fn zero(left: &Signature, right: &Signature) -> Self {
        BiAlgebraElement {
            left: left.clone(),
            right: right.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn left_signature(&self) -> &Signature {
        &self.left
    }

    pub fn right_signature(&self) -> &Signature {
        &self.right
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(GroupWord, GroupWord), &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, left: &GroupWord, right: &GroupWord) -> C64 {
        self.terms.get(&(left.clone(), right.clone())).copied().unwrap_or(ZERO)
    }

    pub fn add_term(&mut self, left: GroupWord, right: GroupWord, coeff: C64) -> Result<()> {
        if left.signature() != &self.left || right.signature() != &self.right {
            return Err(Error::SignatureMismatch {
                left: format!("{} (x) {}", self.left, self.right),
                right: format!("{} (x) {}", left.signature(), right.signature()),
            });
        }
        let key = (left, right);
        let v = self.terms.get(&key).copied().unwrap_or(ZERO) + coeff;
        if v.norm() <= COEFF_EPS {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, v);
        }
        Ok(())
    }

    /// `x (x) y`
    pub fn tensor(x: &AlgebraElement, y: &AlgebraElement) -> Self {
        let mut out = Self::zero(x.signature(), y.signature());
        for (g, &c) in x.terms() {
            for (h, &d) in y.terms() {
                out.add_term(g.clone(), h.clone(), c * d).expect("signatures match");
            }
        }
        out
    }

    /// Image of `x` under the diagonal map `g -> g (x) g`.
    pub fn diagonal(x: &AlgebraElement) -> Self {
        let mut out = Self::zero(x.signature(), x.signature());
        for (g, &c) in x.terms() {
            out.add_term(g.clone(), g.clone(), c).expect("signatures match");
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for ((g, h), &c) in &other.terms {
            out.add_term(g.clone(), h.clone(), c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(&self.left, &self.right);
        for ((g, h), &c) in &self.terms {
            out.add_term(g.clone(), h.clone(), c * s).expect("signatures match");
        }
        out
    }

    pub fn star(&self) -> Self {
        BiAlgebraElement {
            left: self.left.clone(),
            right: self.right.clone(),
            terms: self
                .terms
                .iter()
                .map(|((g, h), c)| ((g.inverse(), h.inverse()), c.conj()))
                .collect(),
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((g, h), c) in &self.terms {
            worst = worst.max((c - other.coefficient(g, h)).norm());
        }
        for ((g, h), c) in &other.terms {
            worst = worst.max((c - self.coefficient(g, h)).norm());
        }
        worst
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.distance(&self.star()) <= tol
    }

    /// Parses sums of `coeff*word|word` terms. Terms without `|` are read
    /// through the diagonal map `g -> g|g`.
    pub fn parse(signature: &Signature, text: &str) -> Result<Self> {
        let mut el = Self::zero(signature, signature);
        for (coeff, body) in split_terms(text)? {
            let (l, r) = match body.split_once('|') {
                Some((l, r)) => (GroupWord::parse(signature, l)?, GroupWord::parse(signature, r)?),
                None => {
                    let w = GroupWord::parse(signature, &body)?;
                    (w.clone(), w)
                }
            };
            el.add_term(l, r, coeff)?;
        }
        Ok(el)
    }
}

/// Splits an expression like `"a + 2*b^-1 - (1+2i) a|b"` into
/// `(coefficient, word text)` pairs.
fn split_terms(text: &str) -> Result<Vec<(C64, String)>> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut raw_terms: Vec<(f64, String)> = Vec::new();
    let mut current = String::new();
    let mut sign = 1.0;
    let mut depth = 0i32;
    for (idx, &c) in chars.iter().enumerate() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth -= 1;
                current.push(c);
            }
            '+' | '-' if depth == 0 && idx > 0 && chars[idx - 1] == '^' => current.push(c),
            '+' | '-' if depth == 0 => {
                if !current.is_empty() {
                    raw_terms.push((sign, std::mem::take(&mut current)));
                } else if idx > 0 {
                    return Err(Error::Parse(format!("dangling operator in {text:?}")));
                }
                sign = if c == '-' { -1.0 } else { 1.0 };
            }
            _ => current.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in {text:?}")));
    }
    if current.is_empty() {
        if raw_terms.is_empty() && text.trim() == "0" {
            return Ok(Vec::new());
        }
        return Err(Error::Parse(format!("empty term in {text:?}")));
    }
    raw_terms.push((sign, current));

    raw_terms
        .into_iter()
        .map(|(sign, term)| {
            let (coeff, rest) = parse_coefficient(&term)?;
            let rest = rest.trim_start_matches('*').to_string();
            Ok((coeff * sign, rest))
        })
        .collect()
}

fn parse_coefficient(term: &str) -> Result<(C64, &str)> {
    if let Some(inner) = term.strip_prefix('(') {
        let close = inner
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unclosed coefficient in {term:?}")))?;
        let lit = &inner[..close];
        let rest = &inner[close + 1..];
        let mut total = ZERO;
        for (c, body) in split_terms(lit)? {
            if !body.is_empty() {
                return Err(Error::Parse(format!("bad complex literal {lit:?}")));
            }
            total += c;
        }
        return Ok((total, rest));
    }
    let end = term
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || c == '.' || c == 'i'))
        .map_or(term.len(), |(i, _)| i);
    let lit = &term[..end];
    let rest = &term[end..];
    if lit.is_empty() {
        return Ok((ONE, rest));
    }
    let (num, imag) = match lit.strip_suffix('i') {
        Some(n) => (n, true),
        None => (lit, false),
    };
    if num.contains('i') {
        return Err(Error::Parse(format!("bad coefficient {lit:?}")));
    }
    let value = if num.is_empty() {
        1.0
    } else {
        num.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad coefficient {lit:?}")))?
    };
    Ok((
        if imag {
            C64::new(0.0, value)
        } else {
            C64::new(value, 0.0)
        },
        rest,
    ))
}

/// A product of projectors `e^{x_1}_{a_1} ... e^{x_n}_{a_n}` in reduced form.
///
/// The `zero` flag marks a product annihilated by orthogonality; it is
/// distinct from the empty (identity) monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjectorMonomial {
    pub slots: Vec<(usize, usize)>,
    pub zero: bool,
}

impl ProjectorMonomial {
    pub fn identity() -> Self {
        ProjectorMonomial {
            slots: Vec::new(),
            zero: false,
        }
    }

    pub fn zero() -> Self {
        ProjectorMonomial {
            slots: Vec::new(),
            zero: true,
        }
    }

    pub fn letter(x: usize, a: usize) -> Self {
        ProjectorMonomial {
            slots: vec![(x, a)],
            zero: false,
        }
    }

    /// Applies `e e = e` and `e^x_a e^x_b = 0` (a != b) to a raw product.
    pub fn reduced(raw: &[(usize, usize)]) -> Self {
        let mut slots: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
        for &(x, a) in raw {
            match slots.last() {
                Some(&(px, pa)) if px == x => {
                    if pa != a {
                        return Self::zero();
                    }
                }
                _ => slots.push((x, a)),
            }
        }
        ProjectorMonomial { slots, zero: false }
    }

    pub fn is_identity(&self) -> bool {
        !self.zero && self.slots.is_empty()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Adjoint: the reversed product.
    pub fn star(&self) -> Self {
        ProjectorMonomial {
            slots: self.slots.iter().rev().copied().collect(),
            zero: self.zero,
        }
    }

    /// Reduced product `self * other`.
    pub fn concat(&self, other: &Self) -> Self {
        if self.zero || other.zero {
            return Self::zero();
        }
        let raw: Vec<(usize, usize)> = self.slots.iter().chain(&other.slots).copied().collect();
        Self::reduced(&raw)
    }

    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        for &(x, a) in &self.slots {
            if x >= k || a >= m {
                return Err(Error::InvalidIndex(format!(
                    "projector e^{x}_{a} outside scenario k={k}, m={m}"
                )));
            }
        }
        Ok(())
    }

    /// Text form with a party prefix, e.g. `A0_1 A1_0`; identity is `1`.
    pub fn label(&self, party: char) -> String {
        if self.zero {
            return "0".into();
        }
        if self.slots.is_empty() {
            return "1".into();
        }
        self.slots
            .iter()
            .map(|(x, a)| format!("{party}{x}_{a}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Palindrome `e^{x1}_{a1} ... e^{xt}_{at} ... e^{x1}_{a1}`, reduced.
pub fn history_monomial(settings: &[usize], outcomes: &[usize]) -> Result<ProjectorMonomial> {
    if settings.len() != outcomes.len() || settings.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "history needs equal nonzero lengths, got {} settings and {} outcomes",
            settings.len(),
            outcomes.len()
        )));
    }
    let forward: Vec<(usize, usize)> = settings.iter().copied().zip(outcomes.iter().copied()).collect();
    let raw: Vec<(usize, usize)> = forward.iter().chain(forward.iter().rev().skip(1)).copied().collect();
    Ok(ProjectorMonomial::reduced(&raw))
}

/// `u_x`, the generator of factor `x` of `Z_m^{*k}`.
pub fn unitary_of_setting(k: usize, m: usize, x: usize) -> Result<AlgebraElement> {
    if x >= k {
        return Err(Error::InvalidIndex(format!("setting {x} >= k = {k}")));
    }
    let sig = Signature::scenario(k, m)?;
    Ok(AlgebraElement::delta(GroupWord::generator(&sig, x)?))
}

/// Fourier image of a single projector `e^x_a`.
pub fn projector_element(sig: &Signature, m: usize, x: usize, a: usize) -> Result<AlgebraElement> {
    let scale = 1.0 / m as f64;
    let terms = (0..m).map(|j| {
        let w = group::reduce(sig, &[(x, j as i64)]).expect("valid factor");
        (w, root_of_unity(m, -((a * j) as i64)) * scale)
    });
    AlgebraElement::from_terms(sig, terms)
}

/// Group-algebra element equal to the projector product `mono`.
pub fn projector_to_algebra(k: usize, m: usize, mono: &ProjectorMonomial) -> Result<AlgebraElement> {
    let sig = Signature::scenario(k, m)?;
    mono.validate(k, m)?;
    if mono.zero {
        return Ok(AlgebraElement::zero(&sig));
    }
    let mut acc = AlgebraElement::identity(&sig);
    for &(x, a) in &mono.slots {
        acc = acc.multiply(&projector_element(&sig, m, x, a)?)?;
    }
    Ok(acc)
}

/// Real Bell functional `sum C[a][b][x][y] P(a,b|x,y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional {
    pub ka: usize,
    pub kb: usize,
    pub m: usize,
    coeffs: Vec<f64>,
}

impl BellFunctional {
    pub fn zeros(ka: usize, kb: usize, m: usize) -> Self {
        BellFunctional {
            ka,
            kb,
            m,
            coeffs: vec![0.0; m * m * ka * kb],
        }
    }

    fn idx(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.m + b) * self.ka + x) * self.kb + y
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.idx(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, c: f64) -> Result<()> {
        if a >= self.m || b >= self.m || x >= self.ka || y >= self.kb {
            return Err(Error::InvalidIndex(format!("coefficient ({a},{b}|{x},{y})")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite coefficient {c}")));
        }
        let i = self.idx(a, b, x, y);
        self.coeffs[i] = c;
        Ok(())
    }

    pub fn add(&mut self, a: usize, b: usize, x: usize, y: usize, c: f64) -> Result<()> {
        let cur = self.get(a, b, x, y);
        self.set(a, b, x, y, cur + c)
    }

    /// Two-outcome correlator form `sum_xy c[x][y] <A_x B_y>` expanded to
    /// probability coefficients `c[x][y] (-1)^(a+b)`.
    pub fn from_correlators(correlators: &[Vec<f64>]) -> Result<Self> {
        let ka = correlators.len();
        let kb = correlators.first().map_or(0, |r| r.len());
        if ka == 0 || kb == 0 || correlators.iter().any(|r| r.len() != kb) {
            return Err(Error::InvalidArgument(
                "correlator matrix must be rectangular and nonempty".into(),
            ));
        }
        let mut f = Self::zeros(ka, kb, 2);
        for x in 0..ka {
            for y in 0..kb {
                for a in 0..2 {
                    for b in 0..2 {
                        let s = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        f.set(a, b, x, y, s * correlators[x][y])?;
                    }
                }
            }
        }
        Ok(f)
    }

    /// `E00 + E01 + E10 - E11`
    pub fn chsh() -> Self {
        Self::from_correlators(&[vec![1.0, 1.0], vec![1.0, -1.0]]).expect("valid preset")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Evaluates on any `P(a, b | x, y)` accessor.
    pub fn evaluate(&self, p: impl Fn(usize, usize, usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.m {
            for b in 0..self.m {
                for x in 0..self.ka {
                    for y in 0..self.kb {
                        let c = self.get(a, b, x, y);
                        if c != 0.0 {
                            acc += c * p(a, b, x, y);
                        }
                    }
                }
            }
        }
        acc
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffEntry {
    x: usize,
    y: usize,
    a: usize,
    b: usize,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct CorrelatorEntry {
    x: usize,
    y: usize,
    c: f64,
}

#[derive(Serialize, Deserialize, Default)]
struct BellFunctionalRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ka: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    coeffs: Vec<CoeffEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    correlators: Vec<CorrelatorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chsh: Option<bool>,
}

impl Serialize for BellFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut repr = BellFunctionalRepr {
            m: Some(self.m),
            ..Default::default()
        };
        if self.ka == self.kb {
            repr.k = Some(self.ka);
        } else {
            repr.ka = Some(self.ka);
            repr.kb = Some(self.kb);
        }
        for x in 0..self.ka {
            for y in 0..self.kb {
                for a in 0..self.m {
                    for b in 0..self.m {
                        let c = self.get(a, b, x, y);
                        if c != 0.0 {
                            repr.coeffs.push(CoeffEntry { x, y, a, b, c });
                        }
                    }
                }
            }
        }
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BellFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = BellFunctionalRepr::deserialize(d)?;
        let preset = repr
            .preset
            .clone()
            .or_else(|| repr.chsh.filter(|&c| c).map(|_| "chsh".to_string()));
        if let Some(p) = preset {
            return match p.as_str() {
                "chsh" => Ok(BellFunctional::chsh()),
                other => Err(D::Error::custom(format!("unknown preset {other:?}"))),
            };
        }
        let ka = repr.ka.or(repr.k).ok_or_else(|| D::Error::custom("missing \"k\""))?;
        let kb = repr.kb.or(repr.k).ok_or_else(|| D::Error::custom("missing \"k\""))?;
        if !repr.correlators.is_empty() {
            let mut corr = vec![vec![0.0; kb]; ka];
            for e in &repr.correlators {
                if e.x >= ka || e.y >= kb {
                    return Err(D::Error::custom(format!("correlator ({}, {}) out of range", e.x, e.y)));
                }
                corr[e.x][e.y] += e.c;
            }
            let mut f = BellFunctional::from_correlators(&corr).map_err(D::Error::custom)?;
            for e in &repr.coeffs {
                f.add(e.a, e.b, e.x, e.y, e.c).map_err(D::Error::custom)?;
            }
            return Ok(f);
        }
        let m = repr.m.ok_or_else(|| D::Error::custom("missing \"m\""))?;
        let mut f = BellFunctional::zeros(ka, kb, m);
        for e in &repr.coeffs {
            f.add(e.a, e.b, e.x, e.y, e.c).map_err(D::Error::custom)?;
        }
        Ok(f)
    }
}

/// `sum C[a][b][x][y] e^x_a (x) e^y_b` in `C[Gamma_A] (x) C[Gamma_B]`.
pub fn bell_element(functional: &BellFunctional) -> Result<BiAlgebraElement> {
    let m = functional.m;
    let sig_a = Signature::scenario(functional.ka, m)?;
    let sig_b = Signature::scenario(functional.kb, m)?;
    let proj_a: Vec<Vec<AlgebraElement>> = (0..functional.ka)
        .map(|x| (0..m).map(|a| projector_element(&sig_a, m, x, a)).collect())
        .collect::<Result<_>>()?;
    let proj_b: Vec<Vec<AlgebraElement>> = (0..functional.kb)
        .map(|y| (0..m).map(|b| projector_element(&sig_b, m, y, b)).collect())
        .collect::<Result<_>>()?;
    let mut out = BiAlgebraElement::zero(&sig_a, &sig_b);
    for a in 0..m {
        for b in 0..m {
            for x in 0..functional.ka {
                for y in 0..functional.kb {
                    let c = functional.get(a, b, x, y);
                    if c == 0.0 {
                        continue;
                    }
                    let term = BiAlgebraElement::tensor(&proj_a[x][a], &proj_b[y][b]);
                    out = out.add(&term.scale(C64::new(c, 0.0)))?;
                }
            }
        }
    }
    Ok(out)
}

/// Tolerance for unitarity and order relations of representations.
pub const REP_TOL: f64 = 1e-10;

/// Checks that each matrix is unitary and satisfies `U^m = 1` for its
/// factor order.
pub fn check_representation(signature: &Signature, rep: &[ComplexMatrix]) -> Result<usize> {
    if rep.len() != signature.factors() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices for {} factors",
            rep.len(),
            signature.factors()
        )));
    }
    let dim = rep[0].rows();
    for (i, u) in rep.iter().enumerate() {
        if !u.is_square() || u.rows() != dim {
            return Err(Error::DimensionMismatch(format!(
                "generator {i} is {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let dev = u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(dim));
        if dev > REP_TOL {
            return Err(Error::NotUnitary(format!("generator {i}: |U*U - 1| = {dev:.3e}")));
        }
        let m = signature.order(i);
        if m > 0 {
            let dev = u.pow(m).max_abs_diff(&ComplexMatrix::identity(dim));
            if dev > REP_TOL {
                return Err(Error::NotUnitary(format!("generator {i}: |U^{m} - 1| = {dev:.3e}")));
            }
        }
    }
    Ok(dim)
}

fn word_image(word: &GroupWord, rep: &[ComplexMatrix], adjoints: &[ComplexMatrix], dim: usize) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(dim);
    for s in word.syllables() {
        let f = s.factor as usize;
        let base = if s.exp > 0 { &rep[f] } else { &adjoints[f] };
        for _ in 0..s.exp.unsigned_abs() {
            acc = acc.matmul(base);
        }
    }
    acc
}

/// Image of `el` under the representation `u_i -> rep[i]`.
pub fn represent(el: &AlgebraElement, rep: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let dim = check_representation(el.signature(), rep)?;
    let adjoints: Vec<ComplexMatrix> = rep.iter().map(|u| u.adjoint()).collect();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (w, &c) in el.terms() {
        out = &out + &word_image(w, rep, &adjoints, dim).scale(c);
    }
    Ok(out)
}

/// Image of a tensor element under `rep_a (x) rep_b`.
pub fn represent_tensor(
    el: &BiAlgebraElement,
    rep_a: &[ComplexMatrix],
    rep_b: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    let da = check_representation(el.left_signature(), rep_a)?;
    let db = check_representation(el.right_signature(), rep_b)?;
    let adj_a: Vec<ComplexMatrix> = rep_a.iter().map(|u| u.adjoint()).collect();
    let adj_b: Vec<ComplexMatrix> = rep_b.iter().map(|u| u.adjoint()).collect();
    let mut out = ComplexMatrix::zeros(da * db, da * db);
    for ((g, h), &c) in el.terms() {
        let img = word_image(g, rep_a, &adj_a, da).kron(&word_image(h, rep_b, &adj_b, db));
        out = &out + &img.scale(c);
    }
    Ok(out)
}

/// Unitary `sum_a w^a P_a` of a projective measurement.
pub fn unitary_from_projectors(projectors: &[ComplexMatrix]) -> ComplexMatrix {
    let m = projectors.len();
    let dim = projectors[0].rows();
    let mut u = ComplexMatrix::zeros(dim, dim);
    for (a, p) in projectors.iter().enumerate() {
        u = &u + &p.scale(root_of_unity(m, a as i64));
    }
    u
}
