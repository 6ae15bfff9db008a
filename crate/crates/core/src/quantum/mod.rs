//! Finite-dimensional quantum mechanics: states, POVMs, correlation tables
//! under the tensor-product and commuting-operator models, sequential
//! measurements, locality tests, steering, see-saw lower bounds and
//! dilations.

mod correlations;
mod dilation;
mod local;
mod seesaw;
mod spatiotemporal;
mod steering;

pub use correlations::{
    correlations_commuting, correlations_mixed, correlations_tensor, direct_sum_mix, purify, trivial_joint,
    JointMeasurement, Realization,
};
pub use dilation::{
    apply_kraus, choi_matrix, naimark_dilate, random_ucp_kraus, schur_product_psd_check, stinespring_dilate,
    NaimarkDilation, SchurReport, StinespringDilation,
};
pub use local::{deterministic_table, local_membership, LocalModel, LocalityVerdict, DEFAULT_VERTEX_CAP};
pub use seesaw::{bell_seesaw, game_value_seesaw, optimal_povm, SeesawOptions, SeesawResult, SteeringGame};
pub use spatiotemporal::{
    hardy_check, spatiotemporal, spatiotemporal_table, wstate_coarse_table, wstate_realization, CoarseOutcome,
    HardyReport, STCorrelationTable, WStateTable, GAMMA_MINUS, GAMMA_PLUS,
};
pub use steering::{
    random_steering_data, steering_extract, steering_extract_single, steering_realize, SteeringData,
    SteeringRealization,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ZERO};

/// Minimum eigenvalue allowed for PSD inputs.
pub const PSD_TOL: f64 = 1e-10;
/// Minimum eigenvalue allowed for derived PSD quantities.
pub const DERIVED_PSD_TOL: f64 = 1e-8;
/// Completeness tolerance for POVMs.
pub const POVM_TOL: f64 = 1e-10;
/// No-signaling tolerance for correlation tables.
pub const NS_TOL: f64 = 1e-9;
/// Unit-norm tolerance for state vectors.
pub const NORM_TOL: f64 = 1e-12;

/// Overridable tolerances, read from a `{"psd_tol": .., "ns_tol": ..}` block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub psd_tol: f64,
    pub ns_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_tol: PSD_TOL,
            ns_tol: NS_TOL,
        }
    }
}

/// Unit vector in `C^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    #[serde(with = "linalg::complex_vec")]
    amplitudes: Vec<C64>,
}

impl TryFrom<StateRepr> for StateVector {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        StateVector::new(r.amplitudes)
    }
}

impl From<StateVector> for StateRepr {
    fn from(s: StateVector) -> Self {
        StateRepr {
            amplitudes: s.amplitudes,
        }
    }
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state vector has norm {norm}")));
        }
        Ok(StateVector { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(StateVector {
            amplitudes: amplitudes.into_iter().map(|z| z / norm).collect(),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidIndex(format!("basis vector {index} in dimension {dim}")));
        }
        let mut v = vec![ZERO; dim];
        v[index] = C64::new(1.0, 0.0);
        Ok(StateVector { amplitudes: v })
    }

    /// `(|00> + |11> + ...)/sqrt(d)` on `C^d (x) C^d`.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut v = vec![ZERO; d * d];
        let c = 1.0 / (d as f64).sqrt();
        for i in 0..d {
            v[i * d + i] = C64::new(c, 0.0);
        }
        StateVector { amplitudes: v }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        StateVector {
            amplitudes: linalg::random_unit_vector(rng, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut v = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                v.push(a * b);
            }
        }
        StateVector { amplitudes: v }
    }

    pub fn density(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes)
    }

    /// `<psi, M psi>`
    pub fn expectation(&self, m: &ComplexMatrix) -> C64 {
        m.expectation(&self.amplitudes)
    }
}

/// A family of `k` POVMs with `m` outcomes each on `C^dim`, indexed
/// `[setting][outcome]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementFamily {
    dim: usize,
    elements: Vec<Vec<ComplexMatrix>>,
    projective: bool,
}

#[derive(Deserialize)]
struct FamilyRepr {
    elements: Vec<Vec<ComplexMatrix>>,
    #[serde(default)]
    projective: bool,
}

impl<'de> Deserialize<'de> for MeasurementFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FamilyRepr::deserialize(d)?;
        let fam = MeasurementFamily::new(r.elements).map_err(serde::de::Error::custom)?;
        if r.projective {
            fam.into_projective().map_err(serde::de::Error::custom)
        } else {
            Ok(fam)
        }
    }
}

impl MeasurementFamily {
    /// Validates positivity and completeness of every setting.
    pub fn new(elements: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let k = elements.len();
        if k == 0 {
            return Err(Error::InvalidPovm("no settings".into()));
        }
        let m = elements[0].len();
        if m == 0 || elements.iter().any(|s| s.len() != m) {
            return Err(Error::InvalidPovm(
                "every setting needs the same nonzero number of outcomes".into(),
            ));
        }
        let dim = elements[0][0].rows();
        for (x, setting) in elements.iter().enumerate() {
            let mut sum = ComplexMatrix::zeros(dim, dim);
            for (a, e) in setting.iter().enumerate() {
                if !e.is_square() || e.rows() != dim {
                    return Err(Error::InvalidPovm(format!(
                        "element ({x},{a}) is {}x{}, expected {dim}x{dim}",
                        e.rows(),
                        e.cols()
                    )));
                }
                let dev = e.hermitian_deviation();
                if dev > POVM_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "element ({x},{a}) not Hermitian ({dev:.3e})"
                    )));
                }
                let min = e.hermitian_part().min_eigenvalue();
                if min < -PSD_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "element ({x},{a}) has eigenvalue {min:.3e}"
                    )));
                }
                sum = &sum + e;
            }
            let dev = sum.max_abs_diff(&ComplexMatrix::identity(dim));
            if dev > POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "setting {x} sums to identity only within {dev:.3e}"
                )));
            }
        }
        Ok(MeasurementFamily {
            dim,
            elements,
            projective: false,
        })
    }

    /// Checks `E^2 = E` and `E_a E_b = 0` for `a != b` and marks the family
    /// projective.
    pub fn into_projective(mut self) -> Result<Self> {
        for (x, setting) in self.elements.iter().enumerate() {
            for (a, e) in setting.iter().enumerate() {
                for (b, f) in setting.iter().enumerate() {
                    let prod = e.matmul(f);
                    let dev = if a == b { prod.max_abs_diff(e) } else { prod.max_abs() };
                    if dev > 1e-9 {
                        return Err(Error::NotProjective(format!(
                            "setting {x}, outcomes ({a},{b}): deviation {dev:.3e}"
                        )));
                    }
                }
            }
        }
        self.projective = true;
        Ok(self)
    }

    /// Two-outcome projective family from `+-1`-valued observables; outcome
    /// 0 is the `+1` eigenspace.
    pub fn from_observables(observables: &[ComplexMatrix]) -> Result<Self> {
        let mut elements = Vec::with_capacity(observables.len());
        for (x, o) in observables.iter().enumerate() {
            let dim = o.rows();
            if !o.is_square() {
                return Err(Error::DimensionMismatch(format!("observable {x} is not square")));
            }
            let id = ComplexMatrix::identity(dim);
            if o.matmul(o).max_abs_diff(&id) > 1e-9 || !o.is_hermitian(1e-10) {
                return Err(Error::NotProjective(format!(
                    "observable {x} is not a Hermitian involution"
                )));
            }
            elements.push(vec![(&id + o).scale_real(0.5), (&id - o).scale_real(0.5)]);
        }
        MeasurementFamily::new(elements)?.into_projective()
    }

    /// Projective family from orthonormal bases: outcome `a` of setting `x`
    /// projects onto the columns of `bases[x]` in block `a` of a near-even
    /// split of the dimension into `m` blocks.
    pub fn from_bases(bases: &[ComplexMatrix], m: usize) -> Result<Self> {
        let mut elements = Vec::new();
        for u in bases {
            let dim = u.rows();
            let mut setting = Vec::with_capacity(m);
            for a in 0..m {
                let lo = a * dim / m;
                let hi = (a + 1) * dim / m;
                let mut p = ComplexMatrix::zeros(dim, dim);
                for c in lo..hi {
                    p = &p + &ComplexMatrix::outer(&u.column(c));
                }
                setting.push(p);
            }
            elements.push(setting);
        }
        MeasurementFamily::new(elements)?.into_projective()
    }

    /// Random projective family: Haar-random rotations of computational
    /// basis blocks.
    pub fn random_projective<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize, m: usize) -> Self {
        let bases: Vec<ComplexMatrix> = (0..k).map(|_| linalg::random_unitary(rng, dim)).collect();
        Self::from_bases(&bases, m).expect("random unitaries give valid projectors")
    }

    /// Random POVM family `A_a = S^{-1/2} G_a G_a^* S^{-1/2}` with Ginibre `G_a`.
    pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize, m: usize) -> Self {
        let mut elements = Vec::with_capacity(k);
        for _ in 0..k {
            let gs: Vec<ComplexMatrix> = (0..m)
                .map(|_| {
                    let g = linalg::random_ginibre(rng, dim, dim);
                    g.matmul(&g.adjoint())
                })
                .collect();
            let mut s = ComplexMatrix::zeros(dim, dim);
            for g in &gs {
                s = &s + g;
            }
            let s_inv_half = s
                .hermitian_function(|v| 1.0 / v.max(1e-300).sqrt())
                .expect("Hermitian by construction");
            let mut setting: Vec<ComplexMatrix> = gs
                .iter()
                .map(|g| s_inv_half.matmul(g).matmul(&s_inv_half).hermitian_part())
                .collect();
            // Absorb rounding so completeness holds to machine precision.
            let mut total = ComplexMatrix::zeros(dim, dim);
            for e in &setting {
                total = &total + e;
            }
            let fix = &ComplexMatrix::identity(dim) - &total;
            setting[m - 1] = &setting[m - 1] + &fix;
            elements.push(setting);
        }
        MeasurementFamily::new(elements).expect("valid by construction")
    }

    /// `[[1]]`-valued family on `C^1` from outcome probabilities
    /// `probs[x][a]`.
    pub fn scalars(probs: &[Vec<f64>]) -> Result<Self> {
        let elements = probs
            .iter()
            .map(|s| s.iter().map(|&p| ComplexMatrix::diag(&[p])).collect())
            .collect();
        MeasurementFamily::new(elements)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self) -> usize {
        self.elements[0].len()
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }

    pub fn element(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.elements[x][a]
    }

    pub fn elements(&self) -> &[Vec<ComplexMatrix>] {
        &self.elements
    }

    /// `E (x) 1_right` for every element.
    pub fn extend_right(&self, right: usize) -> MeasurementFamily {
        let id = ComplexMatrix::identity(right);
        self.map_elements(|e| e.kron(&id))
    }

    /// `1_left (x) E` for every element.
    pub fn extend_left(&self, left: usize) -> MeasurementFamily {
        let id = ComplexMatrix::identity(left);
        self.map_elements(|e| id.kron(e))
    }

    fn map_elements(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> MeasurementFamily {
        MeasurementFamily {
            dim: 0,
            elements: self.elements.iter().map(|s| s.iter().map(&f).collect()).collect(),
            projective: self.projective,
        }
        .with_dim()
    }

    fn with_dim(mut self) -> Self {
        self.dim = self.elements[0][0].rows();
        self
    }
}

/// `P(a, b | x, y)` for `ka x kb` settings and `ma x mb` outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub ka: usize,
    pub kb: usize,
    pub ma: usize,
    pub mb: usize,
    p: Vec<f64>,
}

impl CorrelationTable {
    pub fn zeros(ka: usize, kb: usize, ma: usize, mb: usize) -> Self {
        CorrelationTable {
            ka,
            kb,
            ma,
            mb,
            p: vec![0.0; ka * kb * ma * mb],
        }
    }

    /// Builds a table from `f(a, b, x, y)` and validates it.
    pub fn from_fn(
        ka: usize,
        kb: usize,
        ma: usize,
        mb: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut t = Self::zeros(ka, kb, ma, mb);
        for a in 0..ma {
            for b in 0..mb {
                for x in 0..ka {
                    for y in 0..kb {
                        t.set(a, b, x, y, f(a, b, x, y));
                    }
                }
            }
        }
        t.validate()?;
        Ok(t)
    }

    fn idx(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.mb + b) * self.ka + x) * self.kb + y
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.idx(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.idx(a, b, x, y);
        self.p[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    /// Alice's marginal `P(a | x)` computed with Bob's setting `y`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.mb).map(|b| self.get(a, b, x, y)).sum()
    }

    pub fn marginal_b(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.ma).map(|a| self.get(a, b, x, y)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(&Tolerances::default())
    }

    /// Range, normalization and no-signaling checks.
    pub fn validate_with(&self, tol: &Tolerances) -> Result<()> {
        if self.ka == 0 || self.kb == 0 || self.ma == 0 || self.mb == 0 {
            return Err(Error::InvalidTable("empty scenario".into()));
        }
        for (i, &v) in self.p.iter().enumerate() {
            if !v.is_finite() || !(-PSD_TOL..=1.0 + PSD_TOL).contains(&v) {
                return Err(Error::InvalidTable(format!("entry {i} = {v} outside [0, 1]")));
            }
        }
        for x in 0..self.ka {
            for y in 0..self.kb {
                let s: f64 = (0..self.ma).map(|a| self.marginal_a(a, x, y)).sum();
                if (s - 1.0).abs() > tol.ns_tol {
                    return Err(Error::InvalidTable(format!("settings ({x},{y}) sum to {s}")));
                }
            }
        }
        let dev = self.signaling_deviation();
        if dev > tol.ns_tol {
            return Err(Error::Signaling(format!("marginals differ by {dev:.3e}")));
        }
        Ok(())
    }

    /// Largest dependence of a marginal on the remote setting.
    pub fn signaling_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.ka {
            for a in 0..self.ma {
                let base = self.marginal_a(a, x, 0);
                for y in 1..self.kb {
                    worst = worst.max((self.marginal_a(a, x, y) - base).abs());
                }
            }
        }
        for y in 0..self.kb {
            for b in 0..self.mb {
                let base = self.marginal_b(b, 0, y);
                for x in 1..self.ka {
                    worst = worst.max((self.marginal_b(b, x, y) - base).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.p.iter().zip(&other.p).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `lambda P + (1 - lambda) Q`
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if (self.ka, self.kb, self.ma, self.mb) != (other.ka, other.kb, other.ma, other.mb) {
            return Err(Error::InvalidTable("scenario mismatch".into()));
        }
        Ok(CorrelationTable {
            p: self
                .p
                .iter()
                .zip(&other.p)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
            ..self.clone()
        })
    }

    /// Two-outcome correlator `E(x, y) = sum_ab (-1)^(a+b) P(a, b | x, y)`.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let mut e = 0.0;
        for a in 0..self.ma {
            for b in 0..self.mb {
                let s = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                e += s * self.get(a, b, x, y);
            }
        }
        e
    }

    /// The eight CHSH variants `|E(x0,y0) + E(x0,y1) + E(x1,y0) - E(x1,y1)|`
    /// with the minus sign on each of the four setting pairs and both
    /// overall signs, for the setting pairs `xs` and `ys`.
    pub fn chsh_values(&self, xs: [usize; 2], ys: [usize; 2]) -> [f64; 8] {
        let e = |i: usize, j: usize| self.correlator(xs[i], ys[j]);
        let mut out = [0.0; 8];
        let mut n = 0;
        for minus in 0..4 {
            let mut s = 0.0;
            for (idx, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                s += if idx == minus { -e(i, j) } else { e(i, j) };
            }
            out[n] = s;
            out[n + 1] = -s;
            n += 2;
        }
        out
    }

    /// Popescu-Rohrlich box: `P = 1/2` iff `a xor b = x y`.
    pub fn pr_box() -> Self {
        Self::from_fn(2, 2, 2, 2, |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 }).expect("valid table")
    }

    pub fn uniform(ka: usize, kb: usize, ma: usize, mb: usize) -> Self {
        let v = 1.0 / (ma * mb) as f64;
        Self::from_fn(ka, kb, ma, mb, |_, _, _, _| v).expect("valid table")
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ka: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ma: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mb: Option<usize>,
    /// `p[a][b][x][y]`
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Serialize for CorrelationTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = (0..self.ma)
            .map(|a| {
                (0..self.mb)
                    .map(|b| {
                        (0..self.ka)
                            .map(|x| (0..self.kb).map(|y| self.get(a, b, x, y)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let symmetric = self.ka == self.kb && self.ma == self.mb;
        TableRepr {
            k: symmetric.then_some(self.ka),
            m: symmetric.then_some(self.ma),
            ka: (!symmetric).then_some(self.ka),
            kb: (!symmetric).then_some(self.kb),
            ma: (!symmetric).then_some(self.ma),
            mb: (!symmetric).then_some(self.mb),
            p,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = TableRepr::deserialize(d)?;
        let ma = r.p.len();
        let mb = r.p.first().map_or(0, |v| v.len());
        let ka = r.p.first().and_then(|v| v.first()).map_or(0, |v| v.len());
        let kb =
            r.p.first()
                .and_then(|v| v.first())
                .and_then(|v| v.first())
                .map_or(0, |v| v.len());
        let declared = [
            (r.ka.or(r.k), ka, "ka"),
            (r.kb.or(r.k), kb, "kb"),
            (r.ma.or(r.m), ma, "ma"),
            (r.mb.or(r.m), mb, "mb"),
        ];
        for (want, got, name) in declared {
            if let Some(w) = want {
                if w != got {
                    return Err(D::Error::custom(format!("{name} = {w} but p has extent {got}")));
                }
            }
        }
        let mut t = CorrelationTable::zeros(ka, kb, ma, mb);
        for (a, pa) in r.p.iter().enumerate() {
            if pa.len() != mb {
                return Err(D::Error::custom(format!("p[{a}] is ragged")));
            }
            for (b, pb) in pa.iter().enumerate() {
                if pb.len() != ka {
                    return Err(D::Error::custom(format!("p[{a}][{b}] is ragged")));
                }
                for (x, px) in pb.iter().enumerate() {
                    if px.len() != kb {
                        return Err(D::Error::custom(format!("p[{a}][{b}][{x}] is ragged")));
                    }
                    for (y, &v) in px.iter().enumerate() {
                        t.set(a, b, x, y, v);
                    }
                }
            }
        }
        t.validate().map_err(D::Error::custom)?;
        Ok(t)
    }
}
