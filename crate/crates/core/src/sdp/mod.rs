//! Dense primal-dual interior-point solver for
//!
//! ```text
//! min / max  <C, X> + c.x    s.t.  <A_i, X> + a_i.x = b_i,   X PSD,  x >= 0
//! ```
//!
//! with one dense PSD block `X` of order `n` and one nonnegative block `x`
//! of length `lp_dim` (the LP special case when `n = 0`). The dual is
//! `max b.y  s.t.  S = C - sum y_i A_i PSD` (for minimization).
//!
//! Iterates follow the HKM search direction with a Mehrotra
//! predictor-corrector and step fraction 0.98. Steps are accepted only when
//! they do not increase the merit `|r_p| + |R_d| + <X, S>`.

mod preprocess;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::real;

pub use preprocess::{preprocess, Preprocessed, RANK_THRESHOLD};

/// Step halvings tried before a merit-increasing step is taken anyway.
const MAX_BACKTRACK: usize = 8;

/// Default cap on the PSD block order.
pub const DEFAULT_MAX_DIM: usize = 1200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

/// Sparse linear functional on `(X, x)`.
///
/// A PSD entry `(i, j, v)` with `i != j` stands for the symmetric pair
/// `A[i][j] = A[j][i] = v`; repeated entries add up.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    #[serde(default)]
    pub psd: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub lp: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn with_psd(mut self, i: usize, j: usize, v: f64) -> Self {
        self.psd.push((i, j, v));
        self
    }

    pub fn with_lp(mut self, k: usize, v: f64) -> Self {
        self.lp.push((k, v));
        self
    }

    pub fn add_psd(&mut self, i: usize, j: usize, v: f64) {
        self.psd.push((i, j, v));
    }

    pub fn add_lp(&mut self, k: usize, v: f64) {
        self.lp.push((k, v));
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty() && self.lp.is_empty()
    }

    /// Upper-triangle entries with duplicates summed and zeros dropped.
    pub fn merged_psd(&self) -> Vec<(usize, usize, f64)> {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in &self.psd {
            *acc.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
        acc.into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((i, j), v)| (i, j, v))
            .collect()
    }

    pub fn merged_lp(&self) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(k, v) in &self.lp {
            *acc.entry(k).or_insert(0.0) += v;
        }
        acc.into_iter().filter(|(_, v)| *v != 0.0).collect()
    }

    /// `<A, X> + a.x` for a dense row-major `X` of order `n`.
    pub fn evaluate(&self, x: &[f64], n: usize, xl: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, j, v) in self.merged_psd() {
            s += if i == j {
                v * x[i * n + i]
            } else {
                v * (x[i * n + j] + x[j * n + i])
            };
        }
        for (k, v) in self.merged_lp() {
            s += v * xl[k];
        }
        s
    }

    /// Dense symmetric matrix of the PSD part.
    pub fn dense_psd(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for (i, j, v) in self.merged_psd() {
            out[i * n + j] += v;
            if i != j {
                out[j * n + i] += v;
            }
        }
        out
    }

    pub fn dense_lp(&self, l: usize) -> Vec<f64> {
        let mut out = vec![0.0; l];
        for (k, v) in self.merged_lp() {
            out[k] += v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(form: LinearForm, rhs: f64) -> Self {
        Constraint { form, rhs }
    }
}

/// A semidefinite program in primal standard form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpInstance {
    /// Order of the PSD block.
    pub n: usize,
    /// Length of the nonnegative block.
    pub lp_dim: usize,
    pub sense: Sense,
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

impl SdpInstance {
    pub fn new(n: usize, lp_dim: usize, sense: Sense) -> Self {
        SdpInstance {
            n,
            lp_dim,
            sense,
            objective: LinearForm::default(),
            constraints: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.constraints.push(Constraint::new(form, rhs));
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let check = |f: &LinearForm, what: &str| -> Result<()> {
            for &(i, j, v) in &f.psd {
                if i >= self.n || j >= self.n {
                    return Err(Error::InvalidArgument(format!(
                        "{what}: PSD entry ({i}, {j}) outside order {}",
                        self.n
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("{what}: non-finite coefficient")));
                }
            }
            for &(k, v) in &f.lp {
                if k >= self.lp_dim {
                    return Err(Error::InvalidArgument(format!(
                        "{what}: LP entry {k} outside length {}",
                        self.lp_dim
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.form, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "constraint {i}: non-finite right-hand side"
                )));
            }
        }
        if self.n + self.lp_dim == 0 {
            return Err(Error::InvalidArgument("instance has no variables".into()));
        }
        Ok(())
    }

    /// The same program after the change of basis `X -> Q^T X Q` applied to
    /// the PSD data, for an orthogonal `Q` (row-major, order `n`).
    pub fn rotated(&self, q: &[f64]) -> SdpInstance {
        let n = self.n;
        let rotate = |f: &LinearForm| -> LinearForm {
            let a = f.dense_psd(n);
            // Q^T A Q
            let qt: Vec<f64> = (0..n * n).map(|idx| q[(idx % n) * n + idx / n]).collect();
            let r = real::matmul(&real::matmul(&qt, &a, n), q, n);
            let mut out = LinearForm {
                psd: Vec::new(),
                lp: f.lp.clone(),
            };
            for i in 0..n {
                for j in i..n {
                    let v = r[i * n + j];
                    if v != 0.0 {
                        out.psd.push((i, j, v));
                    }
                }
            }
            out
        };
        SdpInstance {
            n,
            lp_dim: self.lp_dim,
            sense: self.sense,
            objective: rotate(&self.objective),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint::new(rotate(&c.form), c.rhs))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Relative tolerance on primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    /// Classify diverging iterates as infeasible instead of running to
    /// `max_iter`.
    pub detect_infeasibility: bool,
    pub max_dim: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-9,
            max_iter: 150,
            step_fraction: 0.98,
            detect_infeasibility: false,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalFailure,
}

/// Infeasibility certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    /// `y` with `sum y_i A_i` negative semidefinite (and nonpositive on the
    /// LP block) and `b.y > 0`.
    PrimalFarkas { y: Vec<f64> },
    /// `(X, x)` PSD / nonnegative with `A(X, x) = 0` and an objective that
    /// improves without bound.
    DualFarkas { x: Vec<f64>, x_lp: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub mu: f64,
    pub merit: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpResult {
    pub status: SdpStatus,
    pub n: usize,
    /// Primal PSD block, row-major.
    pub x: Vec<f64>,
    pub x_lp: Vec<f64>,
    /// Dual vector over the original constraints.
    pub y: Vec<f64>,
    /// Dual slack PSD block, row-major.
    pub s: Vec<f64>,
    pub s_lp: Vec<f64>,
    pub objective: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal| + |dual|)`
    pub gap: f64,
    /// `|A(X) - b| / (1 + |b|)` on the original constraints.
    pub primal_residual: f64,
    /// `|C - A^T y - S| / (1 + |C|)`
    pub dual_residual: f64,
    pub min_eig_x: f64,
    pub min_eig_s: f64,
    pub iterations: usize,
    pub removed_constraints: Vec<usize>,
    pub certificate: Option<Certificate>,
    pub history: Vec<IterationRecord>,
    /// Whether every accepted step kept the merit nonincreasing.
    pub merit_monotone: bool,
}

impl SdpResult {
    pub fn kkt_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }
}

/// Sparse symmetric operator with both triangles stored.
struct Op {
    psd: Vec<(usize, usize, f64)>,
    lp: Vec<(usize, f64)>,
}

impl Op {
    fn from_form(f: &LinearForm) -> Op {
        let mut psd = Vec::new();
        for (i, j, v) in f.merged_psd() {
            psd.push((i, j, v));
            if i != j {
                psd.push((j, i, v));
            }
        }
        Op { psd, lp: f.merged_lp() }
    }

    fn negated(mut self) -> Op {
        self.psd.iter_mut().for_each(|e| e.2 = -e.2);
        self.lp.iter_mut().for_each(|e| e.1 = -e.1);
        self
    }

    /// `<A, G>` for a possibly nonsymmetric `G`, plus `a.gl`.
    fn pair(&self, g: &[f64], n: usize, gl: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(i, j, v) in &self.psd {
            s += v * g[i * n + j];
        }
        for &(k, v) in &self.lp {
            s += v * gl[k];
        }
        s
    }

    fn add_scaled_to(&self, t: f64, dst: &mut [f64], n: usize, dst_lp: &mut [f64]) {
        for &(i, j, v) in &self.psd {
            dst[i * n + j] += t * v;
        }
        for &(k, v) in &self.lp {
            dst_lp[k] += t * v;
        }
    }

    fn norm(&self) -> f64 {
        (self.psd.iter().map(|e| e.2 * e.2).sum::<f64>() + self.lp.iter().map(|e| e.1 * e.1).sum::<f64>()).sqrt()
    }
}

struct Problem {
    n: usize,
    l: usize,
    c: Vec<f64>,
    cl: Vec<f64>,
    ops: Vec<Op>,
    b: Vec<f64>,
    c_norm: f64,
    b_norm: f64,
}

#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    xl: Vec<f64>,
    s: Vec<f64>,
    sl: Vec<f64>,
    y: Vec<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<f64>,
    rdl: Vec<f64>,
    pobj: f64,
    dobj: f64,
    complementarity: f64,
}

impl Residuals {
    fn rp_norm(&self) -> f64 {
        real::norm(&self.rp)
    }

    fn rd_norm(&self) -> f64 {
        (real::dot(&self.rd, &self.rd) + real::dot(&self.rdl, &self.rdl)).sqrt()
    }

    fn merit(&self) -> f64 {
        self.rp_norm() + self.rd_norm() + self.complementarity.max(0.0)
    }
}

struct Direction {
    dx: Vec<f64>,
    dxl: Vec<f64>,
    ds: Vec<f64>,
    dsl: Vec<f64>,
    dy: Vec<f64>,
}

impl Problem {
    fn residuals(&self, p: &Point) -> Residuals {
        let (n, l) = (self.n, self.l);
        let rp: Vec<f64> = self
            .ops
            .iter()
            .zip(&self.b)
            .map(|(a, &bi)| bi - a.pair(&p.x, n, &p.xl))
            .collect();
        let mut rd: Vec<f64> = self.c.iter().zip(&p.s).map(|(c, s)| c - s).collect();
        let mut rdl: Vec<f64> = self.cl.iter().zip(&p.sl).map(|(c, s)| c - s).collect();
        for (a, &yi) in self.ops.iter().zip(&p.y) {
            a.add_scaled_to(-yi, &mut rd, n, &mut rdl);
        }
        let pobj = real::dot(&self.c, &p.x) + real::dot(&self.cl, &p.xl);
        let dobj = real::dot(&self.b, &p.y);
        let complementarity = real::dot(&p.x, &p.s) + real::dot(&p.xl, &p.sl);
        let _ = l;
        Residuals {
            rp,
            rd,
            rdl,
            pobj,
            dobj,
            complementarity,
        }
    }

    /// Schur complement `M_ij = tr(A_i X A_j S^-1) + sum_k a_ik a_jk x_k / s_k`.
    fn schur(&self, p: &Point, sinv: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = self.ops.len();
        let mut mat = vec![0.0; m * m];
        let total_nnz: usize = self.ops.iter().map(|a| a.psd.len()).sum();
        let ratio: Vec<f64> = p.xl.iter().zip(&p.sl).map(|(x, s)| x / s).collect();
        for j in 0..m {
            let aj = &self.ops[j];
            if aj.psd.is_empty() {
                continue;
            }
            let pairwise_cost = aj.psd.len() * total_nnz;
            let dense_cost = n * n * n + n * aj.psd.len() + total_nnz;
            if pairwise_cost <= dense_cost {
                for i in 0..m {
                    let mut acc = 0.0;
                    for &(pp, q, a) in &self.ops[i].psd {
                        for &(r, s, b) in &aj.psd {
                            acc += a * b * p.x[q * n + r] * sinv[s * n + pp];
                        }
                    }
                    mat[i * m + j] += acc;
                }
            } else {
                // P = X A_j S^-1
                let mut xa = vec![0.0; n * n];
                for &(r, s, b) in &aj.psd {
                    for row in 0..n {
                        xa[row * n + s] += b * p.x[row * n + r];
                    }
                }
                let pm = real::matmul(&xa, sinv, n);
                for i in 0..m {
                    let mut acc = 0.0;
                    for &(pp, q, a) in &self.ops[i].psd {
                        acc += a * pm[q * n + pp];
                    }
                    mat[i * m + j] += acc;
                }
            }
        }
        if self.l > 0 {
            let mut dense_lp: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
            for a in &self.ops {
                dense_lp.push(a.lp.clone());
            }
            let mut col = vec![0.0; self.l];
            for j in 0..m {
                if dense_lp[j].is_empty() {
                    continue;
                }
                col.iter_mut().for_each(|v| *v = 0.0);
                for &(k, v) in &dense_lp[j] {
                    col[k] = v * ratio[k];
                }
                for i in 0..m {
                    let mut acc = 0.0;
                    for &(k, v) in &dense_lp[i] {
                        acc += v * col[k];
                    }
                    mat[i * m + j] += acc;
                }
            }
        }
        real::symmetrize(&mut mat, m);
        mat
    }

    /// Solves the HKM Newton system for right-hand side `X dS + dX S = R`
    /// given through `g = R S^-1` and `gl = r / s`.
    #[allow(clippy::too_many_arguments)]
    fn direction(&self, p: &Point, res: &Residuals, sinv: &[f64], mchol: &[f64], g: &[f64], gl: &[f64]) -> Direction {
        let (n, l, m) = (self.n, self.l, self.ops.len());
        let xrd = real::matmul(&p.x, &res.rd, n);
        let xrds = real::matmul(&xrd, sinv, n);
        let h: Vec<f64> = g.iter().zip(&xrds).map(|(a, b)| a - b).collect();
        let hl: Vec<f64> = (0..l).map(|k| gl[k] - p.xl[k] * res.rdl[k] / p.sl[k]).collect();
        let mut dy: Vec<f64> = (0..m).map(|i| res.rp[i] - self.ops[i].pair(&h, n, &hl)).collect();
        if m > 0 {
            real::cholesky_solve(mchol, m, &mut dy);
        }
        let mut ds = res.rd.clone();
        let mut dsl = res.rdl.clone();
        for (a, &d) in self.ops.iter().zip(&dy) {
            a.add_scaled_to(-d, &mut ds, n, &mut dsl);
        }
        let xds = real::matmul(&p.x, &ds, n);
        let xdss = real::matmul(&xds, sinv, n);
        let mut dx: Vec<f64> = g.iter().zip(&xdss).map(|(a, b)| a - b).collect();
        real::symmetrize(&mut dx, n);
        let dxl: Vec<f64> = (0..l).map(|k| gl[k] - p.xl[k] * dsl[k] / p.sl[k]).collect();
        Direction { dx, dxl, ds, dsl, dy }
    }
}

fn is_pd(a: &[f64], n: usize) -> bool {
    n == 0 || real::cholesky(a, n).is_some()
}

/// Largest `t <= cap` (up to bisection accuracy) keeping `X + t dX` PD and
/// `x + t dx > 0`.
fn max_step(x: &[f64], dx: &[f64], n: usize, xl: &[f64], dxl: &[f64], cap: f64) -> f64 {
    let mut upper = cap;
    for (v, d) in xl.iter().zip(dxl) {
        if *d < 0.0 {
            upper = upper.min(-v / d);
        }
    }
    if n == 0 {
        return upper;
    }
    let trial = |t: f64| -> bool {
        let m: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + t * b).collect();
        is_pd(&m, n)
    };
    if trial(upper) {
        return upper;
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if trial(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    lo
}

fn step_lengths(p: &Point, d: &Direction, n: usize, frac: f64) -> (f64, f64) {
    let cap = 1.0 / frac;
    let ap = max_step(&p.x, &d.dx, n, &p.xl, &d.dxl, cap);
    let ad = max_step(&p.s, &d.ds, n, &p.sl, &d.dsl, cap);
    ((frac * ap).min(1.0), (frac * ad).min(1.0))
}

fn advance(p: &Point, d: &Direction, ap: f64, ad: f64) -> Point {
    let axpy = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u + t * v).collect() };
    Point {
        x: axpy(&p.x, &d.dx, ap),
        xl: axpy(&p.xl, &d.dxl, ap),
        s: axpy(&p.s, &d.ds, ad),
        sl: axpy(&p.sl, &d.dsl, ad),
        y: axpy(&p.y, &d.dy, ad),
    }
}

fn factor_schur(mat: &[f64], m: usize) -> Option<Vec<f64>> {
    if m == 0 {
        return Some(Vec::new());
    }
    if let Some(l) = real::cholesky(mat, m) {
        return Some(l);
    }
    let scale = (0..m).fold(0.0f64, |s, i| s.max(mat[i * m + i].abs())).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut shifted = mat.to_vec();
        for i in 0..m {
            shifted[i * m + i] += reg;
        }
        if let Some(l) = real::cholesky(&shifted, m) {
            return Some(l);
        }
        reg *= 100.0;
    }
    None
}

/// Solves `inst` with the interior-point method.
pub fn solve_sdp(inst: &SdpInstance, opts: &SdpOptions) -> Result<SdpResult> {
    inst.validate()?;
    if inst.n > opts.max_dim {
        return Err(Error::ResourceLimit {
            what: "SDP block order",
            needed: inst.n,
            cap: opts.max_dim,
        });
    }
    let pre = preprocess(inst);
    let (n, l) = (inst.n, inst.lp_dim);
    if let Some(y) = pre.inconsistency.clone() {
        return Ok(SdpResult {
            status: SdpStatus::PrimalInfeasible,
            n,
            x: vec![0.0; n * n],
            x_lp: vec![0.0; l],
            y: y.clone(),
            s: vec![0.0; n * n],
            s_lp: vec![0.0; l],
            objective: f64::NAN,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            min_eig_x: f64::NAN,
            min_eig_s: f64::NAN,
            iterations: 0,
            removed_constraints: pre.removed.clone(),
            certificate: Some(Certificate::PrimalFarkas { y }),
            history: Vec::new(),
            merit_monotone: true,
        });
    }

    let sign = match inst.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let reduced = &pre.reduced;
    let mut objective = Op::from_form(&reduced.objective);
    if sign < 0.0 {
        objective = objective.negated();
    }
    let mut c = vec![0.0; n * n];
    let mut cl = vec![0.0; l];
    objective.add_scaled_to(1.0, &mut c, n, &mut cl);
    let ops: Vec<Op> = reduced.constraints.iter().map(|k| Op::from_form(&k.form)).collect();
    let b: Vec<f64> = reduced.constraints.iter().map(|k| k.rhs).collect();
    let prob = Problem {
        n,
        l,
        c_norm: (real::dot(&c, &c) + real::dot(&cl, &cl)).sqrt(),
        b_norm: real::norm(&b),
        c,
        cl,
        b,
        ops,
    };
    let total = (n + l) as f64;
    let m = prob.ops.len();

    let max_a = prob.ops.iter().map(Op::norm).fold(0.0f64, f64::max);
    let xi = prob
        .ops
        .iter()
        .zip(&prob.b)
        .map(|(a, bi)| total.sqrt() * (1.0 + bi.abs()) / (1.0 + a.norm()))
        .fold(10.0f64.max(total.sqrt()), f64::max);
    let eta = 10.0f64.max(total.sqrt()).max(prob.c_norm).max(max_a);
    let mut pt = Point {
        x: real::identity(n).iter().map(|v| v * xi).collect(),
        xl: vec![xi; l],
        s: real::identity(n).iter().map(|v| v * eta).collect(),
        sl: vec![eta; l],
        y: vec![0.0; m],
    };

    let mut history = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut certificate = None;
    let mut merit_monotone = true;
    let mut iterations = 0;
    let mut res = prob.residuals(&pt);
    let mut stall = 0usize;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let rp_rel = res.rp_norm() / (1.0 + prob.b_norm);
        let rd_rel = res.rd_norm() / (1.0 + prob.c_norm);
        let gap_rel = (res.pobj - res.dobj).abs() / (1.0 + res.pobj.abs() + res.dobj.abs());
        let mu = res.complementarity / total;
        if rp_rel <= opts.tol && rd_rel <= opts.tol && gap_rel <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if opts.detect_infeasibility {
            let y_norm = real::norm(&pt.y);
            let x_norm = (real::dot(&pt.x, &pt.x) + real::dot(&pt.xl, &pt.xl)).sqrt();
            if res.dobj > 1e8 * (1.0 + prob.c_norm) && res.dobj > 1e-6 * y_norm && rd_rel <= 1e-6 * y_norm.max(1.0) {
                status = SdpStatus::PrimalInfeasible;
                let y = pt.y.iter().map(|v| v / res.dobj).collect();
                certificate = Some(Certificate::PrimalFarkas { y });
                break;
            }
            if -res.pobj > 1e8 * (1.0 + prob.b_norm) && rp_rel <= 1e-6 * x_norm.max(1.0) {
                status = SdpStatus::DualInfeasible;
                let scale = -1.0 / res.pobj;
                certificate = Some(Certificate::DualFarkas {
                    x: pt.x.iter().map(|v| v * scale).collect(),
                    x_lp: pt.xl.iter().map(|v| v * scale).collect(),
                });
                break;
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let Some(ls) = real::cholesky(&pt.s, n).or(if n == 0 { Some(Vec::new()) } else { None }) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let sinv = if n == 0 {
            Vec::new()
        } else {
            real::cholesky_inverse(&ls, n)
        };
        let schur = prob.schur(&pt, &sinv);
        let Some(mchol) = factor_schur(&schur, m) else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        // Predictor: R = -X S, so R S^-1 = -X.
        let g_aff: Vec<f64> = pt.x.iter().map(|v| -v).collect();
        let gl_aff: Vec<f64> = pt.xl.iter().map(|v| -v).collect();
        let aff = prob.direction(&pt, &res, &sinv, &mchol, &g_aff, &gl_aff);
        let (ap_aff, ad_aff) = step_lengths(&pt, &aff, n, 1.0);
        let trial = advance(&pt, &aff, ap_aff, ad_aff);
        let mu_aff = (real::dot(&trial.x, &trial.s) + real::dot(&trial.xl, &trial.sl)) / total;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector: R = sigma mu I - X S - dXa dSa.
        let dxa_dsa = real::matmul(&aff.dx, &aff.ds, n);
        let corr = real::matmul(&dxa_dsa, &sinv, n);
        let g: Vec<f64> = (0..n * n)
            .map(|idx| sigma * mu * sinv[idx] - pt.x[idx] - corr[idx])
            .collect();
        let gl: Vec<f64> = (0..l)
            .map(|k| (sigma * mu - pt.xl[k] * pt.sl[k] - aff.dxl[k] * aff.dsl[k]) / pt.sl[k])
            .collect();
        let dir = prob.direction(&pt, &res, &sinv, &mchol, &g, &gl);
        let (mut ap, mut ad) = step_lengths(&pt, &dir, n, opts.step_fraction);

        let merit = res.merit();
        let (full_ap, full_ad) = (ap, ad);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let cand = advance(&pt, &dir, ap, ad);
            let cres = prob.residuals(&cand);
            if cres.merit() <= merit * (1.0 + 1e-12) {
                accepted = Some((cand, cres));
                break;
            }
            ap *= 0.5;
            ad *= 0.5;
        }
        let (cand, cres) = match accepted {
            Some(v) => v,
            None => {
                merit_monotone = false;
                (ap, ad) = (full_ap, full_ad);
                let cand = advance(&pt, &dir, ap, ad);
                let cres = prob.residuals(&cand);
                (cand, cres)
            }
        };
        history.push(IterationRecord {
            primal_residual: rp_rel,
            dual_residual: rd_rel,
            gap: gap_rel,
            mu,
            merit,
            step_primal: ap,
            step_dual: ad,
        });
        if ap.max(ad) < 1e-10 {
            stall += 1;
            if stall >= 3 {
                status = SdpStatus::NumericalFailure;
                pt = cand;
                res = cres;
                iterations = iter + 1;
                break;
            }
        } else {
            stall = 0;
        }
        pt = cand;
        res = cres;
    }

    // Report against the original instance and sense.
    let y_full = pre.lift_dual(&pt.y);
    let primal_objective = sign * res.pobj;
    let dual_objective = sign * res.dobj;
    let original_rp: f64 = inst
        .constraints
        .iter()
        .map(|k| {
            let r = k.rhs - k.form.evaluate(&pt.x, n, &pt.xl);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let b_all: f64 = inst.constraints.iter().map(|k| k.rhs * k.rhs).sum::<f64>().sqrt();
    let y_out: Vec<f64> = y_full.iter().map(|v| sign * v).collect();
    let s_out: Vec<f64> = pt.s.iter().map(|v| sign * v).collect();
    let sl_out: Vec<f64> = pt.sl.iter().map(|v| sign * v).collect();
    let min_eig = |a: &[f64]| if n == 0 { 0.0 } else { real::min_eigenvalue(a, n) };
    let lp_min = |a: &[f64]| a.iter().copied().fold(f64::INFINITY, f64::min);
    let min_eig_x = min_eig(&pt.x).min(lp_min(&pt.xl));
    let min_eig_s = min_eig(&pt.s).min(lp_min(&pt.sl));
    Ok(SdpResult {
        status,
        n,
        objective: if status == SdpStatus::Optimal {
            0.5 * (primal_objective + dual_objective)
        } else {
            primal_objective
        },
        primal_objective,
        dual_objective,
        gap: (res.pobj - res.dobj).abs() / (1.0 + res.pobj.abs() + res.dobj.abs()),
        primal_residual: original_rp / (1.0 + b_all),
        dual_residual: res.rd_norm() / (1.0 + prob.c_norm),
        min_eig_x,
        min_eig_s,
        x: pt.x,
        x_lp: pt.xl,
        y: y_out,
        s: s_out,
        s_lp: sl_out,
        iterations,
        removed_constraints: pre.removed,
        certificate,
        history,
        merit_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SdpOptions {
        SdpOptions::default()
    }

    #[test]
    fn min_trace_with_fixed_corner() {
        let mut inst = SdpInstance::new(2, 0, Sense::Minimize);
        inst.objective = LinearForm::default().with_psd(0, 0, 1.0).with_psd(1, 1, 1.0);
        inst.add_constraint(LinearForm::default().with_psd(0, 0, 1.0), 1.0);
        let r = solve_sdp(&inst, &opts()).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-7);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[3].abs() < 1e-6 && r.x[1].abs() < 1e-6);
    }

    #[test]
    fn max_diagonal_functional() {
        let mut inst = SdpInstance::new(2, 0, Sense::Maximize);
        inst.objective = LinearForm::default().with_psd(0, 0, 1.0).with_psd(1, 1, -1.0);
        inst.add_constraint(LinearForm::default().with_psd(0, 0, 1.0).with_psd(1, 1, 1.0), 1.0);
        let r = solve_sdp(&inst, &opts()).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-7);
        assert!(r.merit_monotone);
    }

    #[test]
    fn pure_lp() {
        // max x0 + 2 x1 s.t. x0 + x1 + x2 = 1
        let mut inst = SdpInstance::new(0, 3, Sense::Maximize);
        inst.objective = LinearForm::default().with_lp(0, 1.0).with_lp(1, 2.0);
        inst.add_constraint(
            LinearForm::default().with_lp(0, 1.0).with_lp(1, 1.0).with_lp(2, 1.0),
            1.0,
        );
        let r = solve_sdp(&inst, &opts()).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn contradiction_reports_infeasible() {
        let mut inst = SdpInstance::new(2, 0, Sense::Minimize);
        inst.add_constraint(LinearForm::default().with_psd(0, 0, 1.0), 0.0);
        inst.add_constraint(LinearForm::default().with_psd(0, 0, 1.0), 1.0);
        let r = solve_sdp(&inst, &opts()).unwrap();
        assert_eq!(r.status, SdpStatus::PrimalInfeasible);
        assert!(matches!(r.certificate, Some(Certificate::PrimalFarkas { .. })));
    }

    #[test]
    fn diverging_dual_is_classified() {
        // X PSD with X00 = -1 is infeasible but the Gram system is consistent.
        let mut inst = SdpInstance::new(2, 0, Sense::Minimize);
        inst.add_constraint(LinearForm::default().with_psd(0, 0, 1.0), -1.0);
        let r = solve_sdp(
            &inst,
            &SdpOptions {
                detect_infeasibility: true,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(r.status, SdpStatus::PrimalInfeasible);
    }

    #[test]
    fn oversize_is_rejected() {
        let inst = SdpInstance::new(5, 0, Sense::Minimize);
        let o = SdpOptions { max_dim: 4, ..opts() };
        assert!(matches!(solve_sdp(&inst, &o), Err(Error::ResourceLimit { .. })));
    }

    fn random_feasible(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SdpInstance {
        // b = A(X0) for a PD X0 and C = A^T y0 + S0 for PD S0: both sides
        // strictly feasible.
        let mut inst = SdpInstance::new(n, 0, Sense::Maximize);
        let x0 = {
            let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut gt = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    gt[i * n + j] = g[j * n + i];
                }
            }
            let mut p = real::matmul(&g, &gt, n);
            for i in 0..n {
                p[i * n + i] += 0.5;
            }
            p
        };
        let mut c = LinearForm::default();
        for i in 0..n {
            c.add_psd(i, i, -(1.0 + rng.random_range(0.0..1.0)));
        }
        for _ in 0..m {
            let mut f = LinearForm::default();
            for i in 0..n {
                for j in i..n {
                    if rng.random_range(0.0..1.0) < 0.5 {
                        f.add_psd(i, j, rng.random_range(-1.0..1.0));
                    }
                }
            }
            let rhs = f.evaluate(&x0, n, &[]);
            inst.add_constraint(f, rhs);
        }
        inst.objective = c;
        inst
    }

    #[test]
    fn weak_duality_and_kkt_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let inst = random_feasible(&mut rng, 5, 6);
            let r = solve_sdp(&inst, &opts()).unwrap();
            assert_eq!(r.status, SdpStatus::Optimal);
            assert!(r.kkt_residual() <= 1e-7, "{}", r.kkt_residual());
            assert!(r.min_eig_x >= -1e-8 && r.min_eig_s >= -1e-8);
            assert!(r.merit_monotone);
            for w in r.history.windows(2) {
                assert!(w[1].merit <= w[0].merit * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn orthogonal_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_feasible(&mut rng, 4, 5);
        let n = 4;
        let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, q) = real::eigh(
            &{
                let mut s = g.clone();
                real::symmetrize(&mut s, n);
                s
            },
            n,
        )
        .unwrap();
        let a = solve_sdp(&inst, &opts()).unwrap();
        let b = solve_sdp(&inst.rotated(&q), &opts()).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
    }
}
