//! Norm estimates for group-algebra elements in truncated regular
//! representations.
//!
//! The ball `B_R` of reduced words spans the truncated space; an element acts
//! by the regular action followed by the projection onto `B_R`. Each term is
//! stored as a gather map `pre[i] = index of the preimage of g_i`, so the
//! compressed operator is applied in `O(terms * |B_R|)` without matrices.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BiAlgebraElement};
use crate::error::{Error, Result};
use crate::group::{ball, index_map, GroupWord, Signature, DEFAULT_BALL_CAP};
use crate::linalg::{random_complex_gaussian, C64};
use crate::par::{self, Execution};

/// Marks a preimage outside the ball.
const OUTSIDE: u32 = u32::MAX;

/// Self-adjointness tolerance on coefficients.
const SELF_ADJOINT_TOL: f64 = 1e-12;

/// Allowed decrease between radii in a scan.
const MONOTONE_TOL: f64 = 1e-9;

/// Number of iterations the convergence test looks back.
const LOOKBACK: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    /// `L_x: d_g -> d_{xg}`
    #[serde(alias = "left")]
    LeftRegular,
    /// `L_x R_y: d_g -> d_{x g y^-1}`
    Biregular,
}

impl std::str::FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "left_regular" | "left-regular" => Ok(RepKind::LeftRegular),
            "biregular" | "bi" => Ok(RepKind::Biregular),
            other => Err(Error::Parse(format!(
                "unknown representation kind '{other}' (expected left or biregular)"
            ))),
        }
    }
}

/// An element acting in a truncated representation.
#[derive(Clone, Debug, PartialEq)]
pub enum NormElement {
    Left(AlgebraElement),
    Bi(BiAlgebraElement),
}

impl NormElement {
    /// Parses `text` for the given representation kind; in the biregular
    /// case a bare word `g` stands for `g|g`.
    pub fn parse(signature: &Signature, kind: RepKind, text: &str) -> Result<Self> {
        match kind {
            RepKind::LeftRegular => Ok(NormElement::Left(AlgebraElement::parse(signature, text)?)),
            RepKind::Biregular => Ok(NormElement::Bi(BiAlgebraElement::parse(signature, text)?)),
        }
    }

    pub fn star(&self) -> Self {
        match self {
            NormElement::Left(x) => NormElement::Left(x.star()),
            NormElement::Bi(x) => NormElement::Bi(x.star()),
        }
    }

    /// Largest coefficient deviation from the adjoint.
    pub fn adjoint_deviation(&self) -> f64 {
        match self {
            NormElement::Left(x) => x.distance(&x.star()),
            NormElement::Bi(x) => x.distance(&x.star()),
        }
    }

    /// Sum of absolute coefficients: the norm bound by the triangle
    /// inequality on unitaries.
    pub fn l1_norm(&self) -> f64 {
        match self {
            NormElement::Left(x) => x.l1_norm(),
            NormElement::Bi(x) => x.terms().map(|(_, c)| c.norm()).sum(),
        }
    }
}

/// Ball basis with its index map; shortlex order, so smaller balls are
/// prefixes.
#[derive(Clone, Debug)]
pub struct TruncatedRep {
    signature: Signature,
    radius: usize,
    kind: RepKind,
    words: Arc<Vec<GroupWord>>,
    index: Arc<HashMap<GroupWord, usize>>,
    dim: usize,
}

impl TruncatedRep {
    pub fn new(signature: &Signature, radius: usize, kind: RepKind, cap: usize) -> Result<Self> {
        let words = ball(signature, radius, cap)?;
        if words.len() >= OUTSIDE as usize {
            return Err(Error::ResourceLimit {
                what: "ball",
                needed: words.len(),
                cap: OUTSIDE as usize - 1,
            });
        }
        let index = index_map(&words);
        let dim = words.len();
        Ok(TruncatedRep {
            signature: signature.clone(),
            radius,
            kind,
            words: Arc::new(words),
            index: Arc::new(index),
            dim,
        })
    }

    /// The same representation on a smaller ball.
    pub fn restricted(&self, radius: usize) -> Result<Self> {
        if radius > self.radius {
            return Err(Error::InvalidArgument(format!(
                "radius {radius} exceeds the built radius {}",
                self.radius
            )));
        }
        let dim = self.words.partition_point(|w| w.length() <= radius);
        Ok(TruncatedRep {
            radius,
            dim,
            ..self.clone()
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[GroupWord] {
        &self.words[..self.dim]
    }

    pub fn index_of(&self, w: &GroupWord) -> Option<usize> {
        self.index.get(w).copied().filter(|&i| i < self.dim)
    }

    fn gather_map(
        &self,
        exec: Execution,
        pre: impl Fn(&GroupWord) -> Result<GroupWord> + Sync + Send,
    ) -> Result<Vec<u32>> {
        let mut out = vec![Ok(OUTSIDE); self.dim];
        par::fill_indexed(exec, &mut out, |i| {
            let p = pre(&self.words[i])?;
            Ok(self.index_of(&p).map_or(OUTSIDE, |j| j as u32))
        });
        out.into_iter().collect()
    }

    /// Gather maps for every term of `el`.
    pub fn compress(&self, el: &NormElement, exec: Execution) -> Result<CompressedOperator> {
        let mut terms = Vec::new();
        match (self.kind, el) {
            (RepKind::LeftRegular, NormElement::Left(x)) => {
                self.signature.check_same(x.signature())?;
                for (w, &c) in x.terms() {
                    let inv = w.inverse();
                    terms.push((c, self.gather_map(exec, |g| inv.multiply(g))?));
                }
            }
            (RepKind::Biregular, NormElement::Bi(x)) => {
                self.signature.check_same(x.left_signature())?;
                self.signature.check_same(x.right_signature())?;
                for ((w1, w2), &c) in x.terms() {
                    let inv = w1.inverse();
                    terms.push((c, self.gather_map(exec, |g| inv.multiply(g)?.multiply(w2))?));
                }
            }
            (kind, _) => {
                return Err(Error::InvalidArgument(format!(
                    "element type does not match the {kind:?} representation"
                )))
            }
        }
        Ok(CompressedOperator { dim: self.dim, terms })
    }
}

/// `P el P` on the ball as per-term gather maps.
#[derive(Clone, Debug)]
pub struct CompressedOperator {
    dim: usize,
    terms: Vec<(C64, Vec<u32>)>,
}

impl CompressedOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The compression to the first `dim` basis words (a smaller ball).
    pub fn restricted(&self, dim: usize) -> Self {
        let dim = dim.min(self.dim);
        CompressedOperator {
            dim,
            terms: self
                .terms
                .iter()
                .map(|(c, pre)| {
                    (
                        *c,
                        pre[..dim]
                            .iter()
                            .map(|&p| if (p as usize) < dim { p } else { OUTSIDE })
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn apply(&self, v: &[C64], exec: Execution) -> Result<Vec<C64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on a ball of {} words",
                v.len(),
                self.dim
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        par::fill_indexed(exec, &mut out, |i| {
            self.terms
                .iter()
                .fold(C64::new(0.0, 0.0), |acc, (c, pre)| match pre[i] {
                    OUTSIDE => acc,
                    j => acc + c * v[j as usize],
                })
        });
        Ok(out)
    }
}

/// Matrix-free application of the compressed element to `v`.
pub fn apply_truncated(rep: &TruncatedRep, el: &NormElement, v: &[C64], exec: Execution) -> Result<Vec<C64>> {
    rep.compress(el, exec)?.apply(v, exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StartVector {
    /// `d_e`
    Identity,
    /// Gaussian vector from a seeded generator.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormOptions {
    /// Relative change of the Rayleigh quotient over five iterations.
    pub tol: f64,
    pub max_iter: usize,
    pub start: StartVector,
    /// Estimate `sqrt(||el* el||)` for elements that are not self-adjoint.
    pub allow_non_self_adjoint: bool,
    pub ball_cap: usize,
    pub execution: Execution,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: 1e-13,
            max_iter: 20_000,
            start: StartVector::Identity,
            allow_non_self_adjoint: false,
            ball_cap: DEFAULT_BALL_CAP,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub radius: usize,
    pub dimension: usize,
    pub kind: RepKind,
    pub iterations: usize,
    /// Relative change of the Rayleigh quotient over the last five
    /// iterations.
    pub residual: f64,
    /// `||A v - theta v|| / theta` for `A = el* el` at the final vector.
    pub eigen_residual: f64,
    pub converged: bool,
    /// Execution policy used for the inner loops.
    pub execution: String,
    /// `(radius, value)` for this and all smaller radii of a scan.
    pub monotone_history: Vec<(usize, f64)>,
}

fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter()
        .zip(v)
        .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_adjoint(el: &NormElement, opts: &NormOptions) -> Result<bool> {
    let dev = el.adjoint_deviation();
    if dev <= SELF_ADJOINT_TOL {
        Ok(true)
    } else if opts.allow_non_self_adjoint {
        Ok(false)
    } else {
        Err(Error::NotHermitian { deviation: dev })
    }
}

/// Power iteration on `A = op* op`; returns the estimate of `||op||`.
fn power_iteration(
    op: &CompressedOperator,
    op_star: Option<&CompressedOperator>,
    radius: usize,
    kind: RepKind,
    opts: &NormOptions,
) -> Result<NormEstimate> {
    let dim = op.dim();
    let exec = opts.execution;
    let mut v = match opts.start {
        StartVector::Identity => {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[0] = C64::new(1.0, 0.0);
            v
        }
        StartVector::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v: Vec<C64> = (0..dim).map(|_| random_complex_gaussian(&mut rng)).collect();
            let n = norm(&v);
            v.iter_mut().for_each(|z| *z /= n);
            v
        }
    };
    let mut history: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    let mut eigen_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let w = op.apply(&v, exec)?;
        let u = op_star.unwrap_or(op).apply(&w, exec)?;
        let theta = dot(&v, &u).re.max(0.0);
        let un = norm(&u);
        if un == 0.0 {
            history.push(0.0);
            residual = 0.0;
            eigen_residual = 0.0;
            converged = true;
            break;
        }
        let r: f64 = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        eigen_residual = r / theta.max(f64::MIN_POSITIVE);
        history.push(theta);
        if history.len() > LOOKBACK {
            let old = history[history.len() - 1 - LOOKBACK];
            residual = (theta - old).abs() / theta.max(f64::MIN_POSITIVE);
        }
        if eigen_residual <= opts.tol {
            residual = residual.min(eigen_residual);
            converged = true;
            break;
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
        v = u.into_iter().map(|z| z / un).collect();
    }
    let value = history.last().copied().unwrap_or(0.0).sqrt();
    Ok(NormEstimate {
        value,
        radius,
        dimension: dim,
        kind,
        iterations,
        residual,
        eigen_residual,
        converged,
        execution: exec.describe(),
        monotone_history: vec![(radius, value)],
    })
}

/// Lower estimate of the norm of a self-adjoint element (or of
/// `sqrt(||el* el||)` when allowed) from its compression to the ball.
pub fn estimate_norm(rep: &TruncatedRep, el: &NormElement, opts: &NormOptions) -> Result<NormEstimate> {
    let sa = check_adjoint(el, opts)?;
    let op = rep.compress(el, opts.execution)?;
    let op_star = if sa {
        None
    } else {
        Some(rep.compress(&el.star(), opts.execution)?)
    };
    power_iteration(&op, op_star.as_ref(), rep.radius(), rep.kind(), opts)
}

/// Estimates at increasing radii from one ball; fails if an estimate drops
/// by more than `1e-9`.
pub fn norm_convergence_scan(
    signature: &Signature,
    kind: RepKind,
    el: &NormElement,
    radii: &[usize],
    opts: &NormOptions,
) -> Result<Vec<NormEstimate>> {
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    let Some(&max) = radii.last() else {
        return Ok(Vec::new());
    };
    let sa = check_adjoint(el, opts)?;
    let rep = TruncatedRep::new(signature, max, kind, opts.ball_cap)?;
    let full = rep.compress(el, opts.execution)?;
    let full_star = if sa {
        None
    } else {
        Some(rep.compress(&el.star(), opts.execution)?)
    };
    let mut out: Vec<NormEstimate> = Vec::with_capacity(radii.len());
    let mut history = Vec::new();
    for &r in &radii {
        let dim = rep.restricted(r)?.dim();
        let op = full.restricted(dim);
        let op_star = full_star.as_ref().map(|o| o.restricted(dim));
        let mut est = power_iteration(&op, op_star.as_ref(), r, kind, opts)?;
        if let Some(prev) = out.last() {
            if est.value < prev.value - MONOTONE_TOL {
                return Err(Error::Numerical(format!(
                    "estimate decreased from {} at radius {} to {} at radius {r}",
                    prev.value, prev.radius, est.value
                )));
            }
        }
        history.push((r, est.value));
        est.monotone_history = history.clone();
        out.push(est);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT12: f64 = 3.464_101_615_137_754_6;

    fn f2() -> Signature {
        Signature::free(2).unwrap()
    }

    fn delta_hat() -> NormElement {
        NormElement::parse(&f2(), RepKind::LeftRegular, "a + a^-1 + b + b^-1").unwrap()
    }

    fn delta_bi() -> NormElement {
        NormElement::parse(&f2(), RepKind::Biregular, "a + a^-1 + b + b^-1").unwrap()
    }

    /// Largest eigenvalue of the symmetric tridiagonal matrix with zero
    /// diagonal and off-diagonal `[2, sqrt3, sqrt3, ...]` of size `r + 1`,
    /// by Sturm-sequence bisection.
    fn radial_oracle(r: usize) -> f64 {
        let off: Vec<f64> = (0..r).map(|i| if i == 0 { 2.0 } else { 3f64.sqrt() }).collect();
        let count_above = |x: f64| -> usize {
            // Number of eigenvalues greater than x.
            let mut below = 0;
            let mut q = -x;
            if q < 0.0 {
                below += 1;
            }
            for &b in &off {
                let prev = if q == 0.0 { 1e-300 } else { q };
                q = -x - b * b / prev;
                if q < 0.0 {
                    below += 1;
                }
            }
            r + 1 - below
        };
        let (mut lo, mut hi) = (0.0, 4.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_above(mid) >= 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn oracle_sanity() {
        assert!((radial_oracle(1) - 2.0).abs() < 1e-12);
        // [[0,2,0],[2,0,s],[0,s,0]] has top eigenvalue sqrt(4+3).
        assert!((radial_oracle(2) - 7f64.sqrt()).abs() < 1e-12);
        assert!(radial_oracle(60) < SQRT12);
    }

    #[test]
    fn identity_element_is_identity_map() {
        let rep = TruncatedRep::new(&f2(), 3, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        let e = NormElement::parse(&f2(), RepKind::LeftRegular, "e").unwrap();
        let v: Vec<C64> = (0..rep.dim()).map(|i| C64::new(i as f64, -(i as f64) / 3.0)).collect();
        let out = apply_truncated(&rep, &e, &v, Execution::Sequential).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn delta_hat_on_identity() {
        let rep = TruncatedRep::new(&f2(), 2, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); rep.dim()];
        v[0] = C64::new(1.0, 0.0);
        let out = apply_truncated(&rep, &delta_hat(), &v, Execution::Sequential).unwrap();
        for w in ["a", "a^-1", "b", "b^-1"] {
            let i = rep.index_of(&GroupWord::parse(&f2(), w).unwrap()).unwrap();
            assert_eq!(out[i], C64::new(1.0, 0.0));
        }
        let total: f64 = out.iter().map(|z| z.norm()).sum();
        assert_eq!(total, 4.0);
    }

    #[test]
    fn biregular_fixes_identity() {
        for r in 0..4 {
            let rep = TruncatedRep::new(&f2(), r, RepKind::Biregular, DEFAULT_BALL_CAP).unwrap();
            let mut v = vec![C64::new(0.0, 0.0); rep.dim()];
            v[0] = C64::new(1.0, 0.0);
            let out = apply_truncated(&rep, &delta_bi(), &v, Execution::Parallel).unwrap();
            assert_eq!(out[0], C64::new(4.0, 0.0));
            assert!(out[1..].iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn biregular_norm_is_four() {
        let hist = norm_convergence_scan(
            &f2(),
            RepKind::Biregular,
            &delta_bi(),
            &[0, 1, 2, 3, 4],
            &NormOptions::default(),
        )
        .unwrap();
        for e in &hist {
            assert!((e.value - 4.0).abs() < 1e-10, "{e:?}");
            assert!(e.converged);
        }
    }

    #[test]
    fn delta_hat_matches_radial_oracle() {
        let hist = norm_convergence_scan(
            &f2(),
            RepKind::LeftRegular,
            &delta_hat(),
            &[2, 4, 6, 8],
            &NormOptions::default(),
        )
        .unwrap();
        for w in hist.windows(2) {
            assert!(w[1].value > w[0].value);
        }
        for e in &hist {
            assert!(e.converged);
            assert!(e.residual <= 1e-13);
            assert!((e.value - radial_oracle(e.radius)).abs() < 1e-7, "{e:?}");
            assert!(e.value <= SQRT12 + 1e-9);
        }
        assert_eq!(hist.last().unwrap().monotone_history.len(), 4);
    }

    #[test]
    fn random_start_agrees_with_identity_start() {
        let rep = TruncatedRep::new(&f2(), 4, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        let opts = NormOptions {
            start: StartVector::Random { seed: 1 },
            ..NormOptions::default()
        };
        let est = estimate_norm(&rep, &delta_hat(), &opts).unwrap();
        assert!(est.converged);
        assert!((est.value - radial_oracle(4)).abs() < 1e-5, "{}", est.value);
    }

    #[test]
    fn constant_element_is_flat() {
        let el = NormElement::parse(&f2(), RepKind::LeftRegular, "-2.5*e").unwrap();
        let hist =
            norm_convergence_scan(&f2(), RepKind::LeftRegular, &el, &[0, 1, 3], &NormOptions::default()).unwrap();
        for e in hist {
            assert!((e.value - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn non_self_adjoint_needs_flag() {
        let rep = TruncatedRep::new(&f2(), 3, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        let el = NormElement::parse(&f2(), RepKind::LeftRegular, "a + b").unwrap();
        assert!(matches!(
            estimate_norm(&rep, &el, &NormOptions::default()),
            Err(Error::NotHermitian { .. })
        ));
        let opts = NormOptions {
            allow_non_self_adjoint: true,
            start: StartVector::Random { seed: 4 },
            ..NormOptions::default()
        };
        let est = estimate_norm(&rep, &el, &opts).unwrap();
        assert!(est.value > 1.0 && est.value <= 2.0 + 1e-12);
    }

    #[test]
    fn signature_mismatch() {
        let rep = TruncatedRep::new(&Signature::new(&[2, 3]).unwrap(), 2, RepKind::LeftRegular, 1000).unwrap();
        assert!(estimate_norm(&rep, &delta_hat(), &NormOptions::default()).is_err());
        assert!(estimate_norm(&rep.clone(), &delta_bi(), &NormOptions::default()).is_err());
    }

    #[test]
    fn left_action_is_isometric_on_safe_core() {
        let r = 5;
        let rep = TruncatedRep::new(&f2(), r, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        for g in ["a", "b^-1 a", "a b a^-1"] {
            let word = GroupWord::parse(&f2(), g).unwrap();
            let el = NormElement::Left(AlgebraElement::delta(word.clone()));
            let core = r - word.length();
            let v: Vec<C64> = rep
                .basis()
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    if w.length() <= core {
                        C64::new(1.0 + i as f64, 0.5)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect();
            let out = apply_truncated(&rep, &el, &v, Execution::Sequential).unwrap();
            assert!((norm(&out) - norm(&v)).abs() < 1e-9 * norm(&v));
        }
    }

    #[test]
    fn execution_policies_agree() {
        let rep = TruncatedRep::new(&f2(), 5, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
        let mut opts = NormOptions::default();
        let par = estimate_norm(&rep, &delta_hat(), &opts).unwrap();
        opts.execution = Execution::Sequential;
        let seq = estimate_norm(&rep, &delta_hat(), &opts).unwrap();
        assert_eq!(par.value, seq.value);
    }

    #[test]
    fn ball_cap_enforced() {
        let opts = NormOptions {
            ball_cap: 100,
            ..NormOptions::default()
        };
        assert!(matches!(
            norm_convergence_scan(&f2(), RepKind::LeftRegular, &delta_hat(), &[6], &opts),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
