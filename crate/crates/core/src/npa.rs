//! Moment-matrix relaxations of the commuting-operator correlation set.
//!
//! A problem is posed over a Hermitian moment matrix `G` indexed by
//! `(block, monomial)` pairs. Cells sharing the canonical form of `u* v` form
//! one class; the classes are affine in a real variable vector `y`, giving
//! `G(y) = F0 + sum_k y_k F_k`. The complex matrix is embedded as the real
//! symmetric `[[Re G, -Im G], [Im G, Re G]]` and handed to the solver as the
//! dual slack of `min <F0, X>` s.t. `<-F_k, X> = f_k`, `X >= 0`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{BellFunctional, ProjectorMonomial};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::par::{self, Execution};
use crate::quantum::{CorrelationTable, SteeringGame};
use crate::sdp::{solve_sdp, LinearForm, SdpInstance, SdpOptions, SdpStatus, Sense};

/// Default cap on basis monomials (before blocking).
pub const DEFAULT_BASIS_CAP: usize = 2000;

/// Membership threshold on `lambda*`.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// Entries below this magnitude are dropped from sparse outputs.
const SPARSE_CUTOFF: f64 = 1e-14;

/// A product of Alice letters times a product of Bob letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonomialIndex {
    pub a_part: ProjectorMonomial,
    pub b_part: ProjectorMonomial,
}

impl MonomialIndex {
    pub fn identity() -> Self {
        MonomialIndex {
            a_part: ProjectorMonomial::identity(),
            b_part: ProjectorMonomial::identity(),
        }
    }

    /// Both parts reduced; `None` when either part vanishes.
    pub fn new(a: &[(usize, usize)], b: &[(usize, usize)]) -> Option<Self> {
        let a_part = ProjectorMonomial::reduced(a);
        let b_part = ProjectorMonomial::reduced(b);
        (!a_part.zero && !b_part.zero).then_some(MonomialIndex { a_part, b_part })
    }

    pub fn alice(x: usize, a: usize) -> Self {
        MonomialIndex {
            a_part: ProjectorMonomial::letter(x, a),
            b_part: ProjectorMonomial::identity(),
        }
    }

    pub fn bob(y: usize, b: usize) -> Self {
        MonomialIndex {
            a_part: ProjectorMonomial::identity(),
            b_part: ProjectorMonomial::letter(y, b),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.a_part.is_identity() && self.b_part.is_identity()
    }

    pub fn len(&self) -> usize {
        self.a_part.len() + self.b_part.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn star(&self) -> Self {
        MonomialIndex {
            a_part: self.a_part.star(),
            b_part: self.b_part.star(),
        }
    }

    pub fn validate(&self, ka: usize, kb: usize, ma: usize, mb: usize) -> Result<()> {
        self.a_part.validate(ka, ma)?;
        self.b_part.validate(kb, mb)
    }
}

/// Reduced `u* v`, or `None` when the product is annihilated.
pub fn canonical_form(u: &MonomialIndex, v: &MonomialIndex) -> Option<MonomialIndex> {
    let a_part = u.a_part.star().concat(&v.a_part);
    let b_part = u.b_part.star().concat(&v.b_part);
    (!a_part.zero && !b_part.zero).then_some(MonomialIndex { a_part, b_part })
}

impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.a_part.is_identity() {
            parts.push(self.a_part.label('A'));
        }
        if !self.b_part.is_identity() {
            parts.push(self.b_part.label('B'));
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

impl FromStr for MonomialIndex {
    type Err = Error;

    /// Parses `1` or whitespace-separated letters such as `A0_1 B1_0`.
    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim();
        if text == "1" {
            return Ok(Self::identity());
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for token in text.split_whitespace() {
            let bad = || Error::Parse(format!("bad monomial letter '{token}'"));
            let (party, rest) = token.split_at(token.char_indices().nth(1).map_or(token.len(), |(i, _)| i));
            let (x, o) = rest.split_once('_').ok_or_else(bad)?;
            let x: usize = x.parse().map_err(|_| bad())?;
            let o: usize = o.parse().map_err(|_| bad())?;
            match party {
                "A" => a.push((x, o)),
                "B" => b.push((x, o)),
                _ => return Err(bad()),
            }
        }
        if a.is_empty() && b.is_empty() {
            return Err(Error::Parse(format!("empty monomial '{s}'")));
        }
        MonomialIndex::new(&a, &b).ok_or_else(|| Error::Parse(format!("monomial '{s}' is zero")))
    }
}

impl Serialize for MonomialIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonomialIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hierarchy level: all monomials of combined length `<= n`, or level 1
/// plus every Alice-Bob letter product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    N(usize),
    OneAB,
}

impl Level {
    pub fn validate(self) -> Result<()> {
        match self {
            Level::N(0) => Err(Error::InvalidArgument("hierarchy level must be at least 1".into())),
            _ => Ok(()),
        }
    }

    fn max_len(self) -> usize {
        match self {
            Level::N(n) => n,
            Level::OneAB => 2,
        }
    }

    fn admits(self, la: usize, lb: usize) -> bool {
        match self {
            Level::N(n) => la + lb <= n,
            Level::OneAB => la + lb <= 1 || (la == 1 && lb == 1),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::N(n) => write!(f, "{n}"),
            Level::OneAB => f.write_str("1+AB"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(' ', "");
        let level = match t.as_str() {
            "1+ab" | "1ab" => Level::OneAB,
            _ => Level::N(
                t.parse()
                    .map_err(|_| Error::Parse(format!("unknown level '{s}' (expected a positive integer or 1+AB)")))?,
            ),
        };
        level.validate()?;
        Ok(level)
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(usize),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(n) => {
                let l = Level::N(n);
                l.validate().map_err(serde::de::Error::custom)?;
                Ok(l)
            }
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Number of reduced words of length `len` over `k` settings with `m - 1`
/// retained outcomes each.
fn word_count(k: usize, m: usize, len: usize) -> usize {
    if len == 0 {
        return 1;
    }
    let r = m.saturating_sub(1);
    let first = k.saturating_mul(r);
    let step = k.saturating_sub(1).saturating_mul(r);
    (1..len).fold(first, |acc, _| acc.saturating_mul(step))
}

/// Reduced words of exactly `len` letters, outcome `m - 1` excluded.
fn party_words(k: usize, m: usize, len: usize) -> Vec<ProjectorMonomial> {
    let mut words = vec![Vec::<(usize, usize)>::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &words {
            for x in 0..k {
                if w.last().is_some_and(|&(px, _)| px == x) {
                    continue;
                }
                for a in 0..m.saturating_sub(1) {
                    let mut v = w.clone();
                    v.push((x, a));
                    next.push(v);
                }
            }
        }
        words = next;
    }
    words
        .into_iter()
        .map(|slots| ProjectorMonomial { slots, zero: false })
        .collect()
}

/// Basis monomials ordered by combined length, Alice-heavy first; the
/// identity sits at index 0.
pub fn basis(ka: usize, kb: usize, ma: usize, mb: usize, level: Level, cap: usize) -> Result<Vec<MonomialIndex>> {
    level.validate()?;
    let max = level.max_len();
    let mut needed = 0usize;
    for total in 0..=max {
        for la in 0..=total {
            if level.admits(la, total - la) {
                needed = needed.saturating_add(word_count(ka, ma, la).saturating_mul(word_count(kb, mb, total - la)));
            }
        }
    }
    if needed > cap {
        return Err(Error::ResourceLimit {
            what: "moment-matrix basis",
            needed,
            cap,
        });
    }
    let mut out = Vec::with_capacity(needed);
    for total in 0..=max {
        for la in (0..=total).rev() {
            let lb = total - la;
            if !level.admits(la, lb) {
                continue;
            }
            let bw = party_words(kb, mb, lb);
            for a in party_words(ka, ma, la) {
                for b in &bw {
                    out.push(MonomialIndex {
                        a_part: a.clone(),
                        b_part: b.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Maximize a Bell functional.
    Bound,
    /// Maximize `lambda` with `G - lambda I >= 0` and the table's cells fixed.
    Membership,
    /// Block moment matrix maximizing a steering-game value.
    Game,
}

/// Cell class key: block indices and canonical monomial.
type Key = (usize, usize, MonomialIndex);

fn key_star(k: &Key) -> Key {
    (k.1, k.0, k.2.star())
}

/// Affine expression `constant + sum coef_k y_k` with complex coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: (f64, f64),
    pub terms: Vec<(usize, f64, f64)>,
}

impl Affine {
    fn constant(c: C64) -> Self {
        Affine {
            constant: (c.re, c.im),
            terms: Vec::new(),
        }
    }

    fn var(k: usize, c: C64) -> Self {
        Affine {
            constant: (0.0, 0.0),
            terms: vec![(k, c.re, c.im)],
        }
    }

    fn c0(&self) -> C64 {
        C64::new(self.constant.0, self.constant.1)
    }

    fn conj(&self) -> Self {
        Affine {
            constant: (self.constant.0, -self.constant.1),
            terms: self.terms.iter().map(|&(k, re, im)| (k, re, -im)).collect(),
        }
    }

    fn add_scaled(&mut self, other: &Affine, s: C64) {
        let c = self.c0() + other.c0() * s;
        self.constant = (c.re, c.im);
        for &(k, re, im) in &other.terms {
            let v = C64::new(re, im) * s;
            self.terms.push((k, v.re, v.im));
        }
    }

    pub fn evaluate(&self, y: &[f64]) -> C64 {
        self.terms
            .iter()
            .fold(self.c0(), |acc, &(k, re, im)| acc + C64::new(re, im) * y[k])
    }
}

/// One class of cells with equal value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellClass {
    pub i: usize,
    pub j: usize,
    pub monomial: MonomialIndex,
    pub value: Affine,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentProblem {
    pub kind: ProblemKind,
    pub ka: usize,
    pub kb: usize,
    pub ma: usize,
    pub mb: usize,
    /// Number of blocks (verifier dimension; 1 outside games).
    pub d: usize,
    pub level: Level,
    pub basis: Vec<MonomialIndex>,
    pub classes: Vec<CellClass>,
    /// Upper-triangle cells whose product vanishes.
    pub zero_cells: usize,
    pub variables: Vec<String>,
    /// `F0` on the embedded matrix, symmetric triplets.
    pub constant: Vec<(usize, usize, f64)>,
    /// `F_k` on the embedded matrix, symmetric triplets.
    pub forms: Vec<Vec<(usize, usize, f64)>>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    /// Index of `lambda` for membership problems.
    pub lambda: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpaStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpaOptions {
    pub basis_cap: usize,
    pub membership_tol: f64,
    pub sdp: SdpOptions,
}

impl Default for NpaOptions {
    fn default() -> Self {
        NpaOptions {
            basis_cap: DEFAULT_BASIS_CAP,
            membership_tol: MEMBERSHIP_TOL,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub kind: ProblemKind,
    pub level: Level,
    pub status: NpaStatus,
    /// `f . y` plus constant; `lambda*` for membership problems.
    pub objective: f64,
    /// `<F0, X>` plus constant: an upper bound whenever `X` is feasible.
    pub upper_bound: f64,
    /// Membership verdict at this level (necessary, not sufficient, for
    /// commuting-operator membership).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
    pub variables: Vec<f64>,
    pub moment_matrix: ComplexMatrix,
    /// Primal `X` (embedded, upper-triangle triplets): certifies the upper
    /// bound, or infeasibility when `<F0, X> < 0`.
    pub certificate: Vec<(usize, usize, f64)>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SdpSolution {
    pub fn kkt_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }
}

/// Expansion of `e^x_a` with outcome `m - 1` replaced by `1 - sum_{a'} e^x_{a'}`.
fn expand_letter(x: usize, a: usize, m: usize) -> Vec<(Option<(usize, usize)>, f64)> {
    if a + 1 < m {
        vec![(Some((x, a)), 1.0)]
    } else {
        std::iter::once((None, 1.0))
            .chain((0..m - 1).map(|b| (Some((x, b)), -1.0)))
            .collect()
    }
}

fn slot(l: Option<(usize, usize)>) -> ProjectorMonomial {
    l.map_or_else(ProjectorMonomial::identity, |(x, a)| ProjectorMonomial::letter(x, a))
}

struct Builder {
    ka: usize,
    kb: usize,
    ma: usize,
    mb: usize,
    d: usize,
    level: Level,
    basis: Vec<MonomialIndex>,
    keys: Vec<Key>,
    counts: Vec<usize>,
    index: HashMap<Key, usize>,
    /// `(p, q, class, conjugated)` for every nonzero upper-triangle cell.
    cells: Vec<(usize, usize, usize, bool)>,
    zero_cells: usize,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn new(ka: usize, kb: usize, ma: usize, mb: usize, d: usize, level: Level, cap: usize) -> Result<Self> {
        if ka == 0 || kb == 0 || ma == 0 || mb == 0 || d == 0 {
            return Err(Error::InvalidArgument("empty scenario".into()));
        }
        let basis = basis(ka, kb, ma, mb, level, cap)?;
        let nb = basis.len();
        let n = d * nb;
        let mut b = Builder {
            ka,
            kb,
            ma,
            mb,
            d,
            level,
            basis,
            keys: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
            cells: Vec::new(),
            zero_cells: 0,
        };
        for p in 0..n {
            for q in p..n {
                let (ip, up) = (p / nb, p % nb);
                let (iq, uq) = (q / nb, q % nb);
                let Some(w) = canonical_form(&b.basis[up], &b.basis[uq]) else {
                    b.zero_cells += 1;
                    continue;
                };
                let key = (ip, iq, w);
                let star = key_star(&key);
                let (rep, conj) = if star < key { (star, true) } else { (key, false) };
                let next = b.keys.len();
                let c = *b.index.entry(rep.clone()).or_insert(next);
                if c == next {
                    b.keys.push(rep);
                    b.counts.push(0);
                }
                b.counts[c] += 1;
                b.cells.push((p, q, c, conj));
            }
        }
        Ok(b)
    }

    fn n(&self) -> usize {
        self.d * self.basis.len()
    }

    fn class_label(&self, k: &Key) -> String {
        if self.d == 1 {
            k.2.to_string()
        } else {
            format!("[{},{}] {}", k.0, k.1, k.2)
        }
    }

    /// Assigns class values: `fixed` overrides, the block-trace normalization,
    /// and free real or complex variables for the rest.
    fn assign(&self, fixed: impl Fn(&Key) -> Option<f64>) -> (Vec<Affine>, Vec<String>) {
        let mut labels = Vec::new();
        let mut values: Vec<Option<Affine>> = vec![None; self.keys.len()];
        let e = MonomialIndex::identity();
        let last_diag = (self.d - 1, self.d - 1, e.clone());
        let mut diag_vars = Vec::new();
        for (c, key) in self.keys.iter().enumerate() {
            if let Some(v) = fixed(key) {
                values[c] = Some(Affine::constant(C64::new(v, 0.0)));
                continue;
            }
            if *key == last_diag {
                continue;
            }
            let label = self.class_label(key);
            let re = labels.len();
            labels.push(format!("Re {label}"));
            let mut val = Affine::var(re, C64::new(1.0, 0.0));
            if key_star(key) != *key {
                let im = labels.len();
                labels.push(format!("Im {label}"));
                val.terms.push((im, 0.0, 1.0));
            }
            if key.0 == key.1 && key.2 == e {
                diag_vars.push(re);
            }
            values[c] = Some(val);
        }
        if let Some(&c) = self.index.get(&last_diag) {
            if values[c].is_none() {
                let mut val = Affine::constant(C64::new(1.0, 0.0));
                val.terms = diag_vars.iter().map(|&k| (k, -1.0, 0.0)).collect();
                values[c] = Some(val);
            }
        }
        (
            values.into_iter().map(|v| v.expect("every class assigned")).collect(),
            labels,
        )
    }

    fn lookup(&self, values: &[Affine], key: &Key) -> Result<Affine> {
        let star = key_star(key);
        let (rep, conj) = if star < *key {
            (star, true)
        } else {
            (key.clone(), false)
        };
        let c = *self.index.get(&rep).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "cell {} not covered at level {}",
                self.class_label(key),
                self.level
            ))
        })?;
        Ok(if conj { values[c].conj() } else { values[c].clone() })
    }

    /// `P(a, b | x, y)` as an affine expression in block `(i, j)`, with
    /// eliminated outcomes re-expanded.
    fn joint(
        &self,
        values: &[Affine],
        ij: (usize, usize),
        a: Option<(usize, usize)>,
        b: Option<(usize, usize)>,
    ) -> Result<Affine> {
        let ea = a.map_or(vec![(None, 1.0)], |(x, o)| expand_letter(x, o, self.ma));
        let eb = b.map_or(vec![(None, 1.0)], |(y, o)| expand_letter(y, o, self.mb));
        let mut acc = Affine::default();
        for (la, ca) in &ea {
            for (lb, cb) in &eb {
                let mono = MonomialIndex {
                    a_part: slot(*la),
                    b_part: slot(*lb),
                };
                let v = self.lookup(values, &(ij.0, ij.1, mono))?;
                acc.add_scaled(&v, C64::new(ca * cb, 0.0));
            }
        }
        Ok(acc)
    }

    fn finish(
        self,
        kind: ProblemKind,
        values: Vec<Affine>,
        mut labels: Vec<String>,
        objective: Affine,
        with_lambda: bool,
    ) -> MomentProblem {
        let n = self.n();
        let lambda = with_lambda.then(|| {
            labels.push("lambda".into());
            labels.len() - 1
        });
        let nv = labels.len();
        let mut constant = Vec::new();
        let mut forms = vec![Vec::new(); nv];
        let push = |out: &mut Vec<(usize, usize, f64)>, p: usize, q: usize, c: C64| {
            if p == q {
                if c.re != 0.0 {
                    out.push((p, p, c.re));
                    out.push((n + p, n + p, c.re));
                }
                return;
            }
            if c.re != 0.0 {
                out.push((p, q, c.re));
                out.push((n + p, n + q, c.re));
            }
            if c.im != 0.0 {
                out.push((n + p, q, c.im));
                out.push((n + q, p, -c.im));
            }
        };
        for &(p, q, c, conj) in &self.cells {
            let v = if conj { values[c].conj() } else { values[c].clone() };
            push(&mut constant, p, q, v.c0());
            for &(k, re, im) in &v.terms {
                push(&mut forms[k], p, q, C64::new(re, im));
            }
        }
        let mut f = vec![0.0; nv];
        for &(k, re, _) in &objective.terms {
            f[k] += re;
        }
        if let Some(l) = lambda {
            forms[l] = (0..2 * n).map(|t| (t, t, -1.0)).collect();
            f[l] = 1.0;
        }
        let classes = self
            .keys
            .iter()
            .zip(values)
            .zip(&self.counts)
            .map(|((k, value), &cells)| CellClass {
                i: k.0,
                j: k.1,
                monomial: k.2.clone(),
                value,
                cells,
            })
            .collect();
        MomentProblem {
            kind,
            ka: self.ka,
            kb: self.kb,
            ma: self.ma,
            mb: self.mb,
            d: self.d,
            level: self.level,
            basis: self.basis,
            classes,
            zero_cells: self.zero_cells,
            variables: labels,
            constant,
            forms,
            objective: f,
            objective_constant: objective.constant.0,
            lambda,
        }
    }
}

/// Level-`level` relaxation of `max sum C P` over commuting-operator
/// correlations.
pub fn build_bound_problem(c: &BellFunctional, level: Level, cap: usize) -> Result<MomentProblem> {
    let b = Builder::new(c.ka, c.kb, c.m, c.m, 1, level, cap)?;
    let identity = MonomialIndex::identity();
    let (values, labels) = b.assign(|k| (k.2 == identity).then_some(1.0));
    let mut obj = Affine::default();
    for a in 0..c.m {
        for bb in 0..c.m {
            for x in 0..c.ka {
                for y in 0..c.kb {
                    let w = c.get(a, bb, x, y);
                    if w != 0.0 {
                        let p = b.joint(&values, (0, 0), Some((x, a)), Some((y, bb)))?;
                        obj.add_scaled(&p, C64::new(w, 0.0));
                    }
                }
            }
        }
    }
    Ok(b.finish(ProblemKind::Bound, values, labels, obj, false))
}

/// Fixes every first-degree and mixed second-degree cell from `p` and
/// maximizes `lambda` with `G - lambda I >= 0`.
pub fn build_membership_problem(p: &CorrelationTable, level: Level, cap: usize) -> Result<MomentProblem> {
    p.validate()?;
    let b = Builder::new(p.ka, p.kb, p.ma, p.mb, 1, level, cap)?;
    let fixed = |k: &Key| -> Option<f64> {
        let (ap, bp) = (&k.2.a_part.slots, &k.2.b_part.slots);
        match (ap.as_slice(), bp.as_slice()) {
            ([], []) => Some(1.0),
            ([(x, a)], []) => Some(p.marginal_a(*a, *x, 0)),
            ([], [(y, bb)]) => Some(p.marginal_b(*bb, 0, *y)),
            ([(x, a)], [(y, bb)]) => Some(p.get(*a, *bb, *x, *y)),
            _ => None,
        }
    };
    let (values, labels) = b.assign(fixed);
    Ok(b.finish(ProblemKind::Membership, values, labels, Affine::default(), true))
}

/// Block moment matrix for a steering game: blocks indexed by the verifier
/// basis, normalized by the block trace.
pub fn build_game_problem(game: &SteeringGame, level: Level, cap: usize) -> Result<MomentProblem> {
    let d = game.d();
    let b = Builder::new(game.ka(), game.kb(), game.ma(), game.mb(), d, level, cap)?;
    let identity = MonomialIndex::identity();
    let (values, labels) = b.assign(|k| (d == 1 && k.2 == identity).then_some(1.0));
    let mut obj = Affine::default();
    let s = game.normalization();
    for i in 0..d {
        for j in 0..d {
            for (x, ops) in game.v().iter().enumerate() {
                for (a, v) in ops.iter().enumerate() {
                    let c = v[(i, j)];
                    if c.norm() > 0.0 {
                        let p = b.joint(&values, (i, j), Some((x, a)), None)?;
                        obj.add_scaled(&p, c * s);
                    }
                }
            }
            for (y, ops) in game.w().iter().enumerate() {
                for (bb, w) in ops.iter().enumerate() {
                    let c = w[(i, j)];
                    if c.norm() > 0.0 {
                        let p = b.joint(&values, (i, j), None, Some((y, bb)))?;
                        obj.add_scaled(&p, c * s);
                    }
                }
            }
        }
    }
    Ok(b.finish(ProblemKind::Game, values, labels, obj, false))
}

impl MomentProblem {
    /// Side of the complex moment matrix.
    pub fn size(&self) -> usize {
        self.d * self.basis.len()
    }

    pub fn embedded_dim(&self) -> usize {
        2 * self.size()
    }

    /// Solver instance: `min <F0, X>` s.t. `<-F_k, X> = f_k`.
    pub fn instance(&self) -> SdpInstance {
        let mut inst = SdpInstance::new(self.embedded_dim(), 0, Sense::Minimize);
        inst.objective = LinearForm {
            psd: self.constant.clone(),
            lp: Vec::new(),
        };
        for (form, &rhs) in self.forms.iter().zip(&self.objective) {
            let psd = form.iter().map(|&(i, j, v)| (i, j, -v)).collect();
            inst.add_constraint(LinearForm { psd, lp: Vec::new() }, rhs);
        }
        inst
    }

    /// Complex moment matrix `F0 + sum y_k F_k`, skipping `lambda`.
    pub fn moment_matrix(&self, y: &[f64]) -> ComplexMatrix {
        let n = self.size();
        let mut emb = vec![0.0; 4 * n * n];
        let nn = 2 * n;
        let mut add = |t: &[(usize, usize, f64)], s: f64| {
            for &(i, j, v) in t {
                emb[i * nn + j] += s * v;
                if i != j {
                    emb[j * nn + i] += s * v;
                }
            }
        };
        add(&self.constant, 1.0);
        for (k, form) in self.forms.iter().enumerate() {
            if Some(k) != self.lambda && y[k] != 0.0 {
                add(form, y[k]);
            }
        }
        ComplexMatrix::from_fn(n, n, |p, q| C64::new(emb[p * nn + q], emb[(n + p) * nn + q]))
    }

    /// Value of the class containing cell `(p, q)` under `y`; zero cells
    /// evaluate to 0.
    pub fn cell_value(&self, p: usize, q: usize, y: &[f64]) -> C64 {
        let nb = self.basis.len();
        let Some(w) = canonical_form(&self.basis[p % nb], &self.basis[q % nb]) else {
            return C64::new(0.0, 0.0);
        };
        let key = (p / nb, q / nb, w);
        let star = key_star(&key);
        let (rep, conj) = if star < key { (star, true) } else { (key, false) };
        let class = self
            .classes
            .iter()
            .find(|c| c.i == rep.0 && c.j == rep.1 && c.monomial == rep.2)
            .expect("cell belongs to a class");
        let v = class.value.evaluate(y);
        if conj {
            v.conj()
        } else {
            v
        }
    }

    /// `f . y + constant`.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(f, v)| f * v).sum::<f64>() + self.objective_constant
    }
}

/// Solves a moment problem; non-convergence is reported in the status.
pub fn solve(problem: &MomentProblem, opts: &NpaOptions) -> Result<SdpSolution> {
    let inst = problem.instance();
    let mut sdp = opts.sdp.clone();
    if problem.kind == ProblemKind::Membership {
        sdp.detect_infeasibility = true;
    }
    let res = solve_sdp(&inst, &sdp)?;
    let nn = problem.embedded_dim();
    let objective = problem.objective_value(&res.y);
    let upper_bound = res.primal_objective + problem.objective_constant;
    let mut message = None;
    let mut status = match res.status {
        SdpStatus::Optimal => NpaStatus::Optimal,
        SdpStatus::PrimalInfeasible | SdpStatus::DualInfeasible => NpaStatus::Infeasible,
        SdpStatus::MaxIter | SdpStatus::NumericalFailure => {
            message = Some(format!(
                "solver stopped with status {:?} after {} iterations (KKT residual {:.3e})",
                res.status,
                res.iterations,
                res.kkt_residual()
            ));
            NpaStatus::MaxIter
        }
    };
    let mut consistent = None;
    if problem.kind == ProblemKind::Membership && status == NpaStatus::Optimal {
        let ok = objective >= -opts.membership_tol;
        consistent = Some(ok);
        if !ok {
            status = NpaStatus::Infeasible;
        }
    }
    let mut certificate = Vec::new();
    for i in 0..nn {
        for j in i..nn {
            let v = res.x[i * nn + j];
            if v.abs() > SPARSE_CUTOFF {
                certificate.push((i, j, v));
            }
        }
    }
    Ok(SdpSolution {
        kind: problem.kind,
        level: problem.level,
        status,
        objective,
        upper_bound,
        consistent,
        moment_matrix: problem.moment_matrix(&res.y),
        variables: res.y.clone(),
        certificate,
        primal_residual: res.primal_residual,
        dual_residual: res.dual_residual,
        gap: res.gap,
        min_eigenvalue: res.min_eig_s,
        iterations: res.iterations,
        message,
    })
}

/// Solves independent problems, one per task.
pub fn solve_all(problems: &[MomentProblem], opts: &NpaOptions, exec: Execution) -> Vec<Result<SdpSolution>> {
    par::map(exec, problems, |p| solve(p, opts))
}

/// Upper bound on `max sum C P` at one level.
pub fn bell_bound(c: &BellFunctional, level: Level, opts: &NpaOptions) -> Result<SdpSolution> {
    solve(&build_bound_problem(c, level, opts.basis_cap)?, opts)
}

/// Membership test of `p` at one level.
pub fn membership(p: &CorrelationTable, level: Level, opts: &NpaOptions) -> Result<SdpSolution> {
    solve(&build_membership_problem(p, level, opts.basis_cap)?, opts)
}

/// Upper bound on a steering-game value at one level.
pub fn game_bound(game: &SteeringGame, level: Level, opts: &NpaOptions) -> Result<SdpSolution> {
    solve(&build_game_problem(game, level, opts.basis_cap)?, opts)
}
