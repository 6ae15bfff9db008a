use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MeasurementFamily, StateVector, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{partial_trace, ComplexMatrix, ZERO};

/// Relative eigenvalue cutoff for the range of the verifier's reduced state.
const RANK_CUTOFF: f64 = 1e-10;
/// Tolerance on `sum_a tr alpha^x_a = 1`.
const TRACE_TOL: f64 = 1e-10;

/// Subnormalized verifier states `alpha[x][a]` on `C^d`, with an optional
/// second family `beta[y][b]` for the bipartite case. A matrix `rho` pairs
/// with an operator `X` as `tr(rho X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SteeringRepr", into = "SteeringRepr")]
pub struct SteeringData {
    d: usize,
    alpha: Vec<Vec<ComplexMatrix>>,
    beta: Option<Vec<Vec<ComplexMatrix>>>,
}

#[derive(Serialize, Deserialize)]
struct SteeringRepr {
    d: usize,
    alpha: Vec<Vec<ComplexMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<Vec<ComplexMatrix>>>,
}

impl TryFrom<SteeringRepr> for SteeringData {
    type Error = Error;

    fn try_from(r: SteeringRepr) -> Result<Self> {
        SteeringData::new(r.d, r.alpha, r.beta)
    }
}

impl From<SteeringData> for SteeringRepr {
    fn from(s: SteeringData) -> Self {
        SteeringRepr {
            d: s.d,
            alpha: s.alpha,
            beta: s.beta,
        }
    }
}

fn check_family(d: usize, fam: &[Vec<ComplexMatrix>], name: &str, tol: &Tolerances) -> Result<()> {
    if fam.is_empty() || fam[0].is_empty() || fam.iter().any(|s| s.len() != fam[0].len()) {
        return Err(Error::InvalidSteeringData(format!(
            "{name} needs a rectangular nonempty k x m array"
        )));
    }
    for (x, setting) in fam.iter().enumerate() {
        let mut sum = ComplexMatrix::zeros(d, d);
        for (a, m) in setting.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(Error::InvalidSteeringData(format!("{name}[{x}][{a}] is not {d}x{d}")));
            }
            let dev = m.hermitian_deviation();
            if dev > tol.psd_tol {
                return Err(Error::InvalidSteeringData(format!(
                    "{name}[{x}][{a}] not Hermitian ({dev:.3e})"
                )));
            }
            let min = m.hermitian_part().min_eigenvalue();
            if min < -tol.psd_tol {
                return Err(Error::InvalidSteeringData(format!(
                    "{name}[{x}][{a}] has eigenvalue {min:.3e}"
                )));
            }
            sum = &sum + m;
        }
        let tr = sum.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidSteeringData(format!("{name}[{x}] has total trace {tr}")));
        }
    }
    Ok(())
}

impl SteeringData {
    pub fn new(d: usize, alpha: Vec<Vec<ComplexMatrix>>, beta: Option<Vec<Vec<ComplexMatrix>>>) -> Result<Self> {
        Self::new_with(d, alpha, beta, &Tolerances::default())
    }

    /// Validates positivity, normalization and, for bipartite data,
    /// `sum_a alpha^x_a = sum_b beta^y_b` for all `x, y`.
    pub fn new_with(
        d: usize,
        alpha: Vec<Vec<ComplexMatrix>>,
        beta: Option<Vec<Vec<ComplexMatrix>>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSteeringData("verifier dimension 0".into()));
        }
        check_family(d, &alpha, "alpha", tol)?;
        if let Some(beta) = &beta {
            check_family(d, beta, "beta", tol)?;
            for (x, sa) in alpha.iter().enumerate() {
                let left = sa.iter().fold(ComplexMatrix::zeros(d, d), |s, m| &s + m);
                for (y, sb) in beta.iter().enumerate() {
                    let right = sb.iter().fold(ComplexMatrix::zeros(d, d), |s, m| &s + m);
                    let dev = left.max_abs_diff(&right);
                    if dev > tol.ns_tol {
                        return Err(Error::Signaling(format!(
                            "sum_a alpha[{x}] and sum_b beta[{y}] differ by {dev:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(SteeringData { d, alpha, beta })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn settings(&self) -> usize {
        self.alpha.len()
    }

    pub fn outcomes(&self) -> usize {
        self.alpha[0].len()
    }

    pub fn alpha(&self) -> &[Vec<ComplexMatrix>] {
        &self.alpha
    }

    pub fn beta(&self) -> Option<&[Vec<ComplexMatrix>]> {
        self.beta.as_deref()
    }

    pub fn is_bipartite(&self) -> bool {
        self.beta.is_some()
    }

    /// `sum_a alpha^x_a`
    pub fn reduced_state(&self, x: usize) -> ComplexMatrix {
        self.alpha[x]
            .iter()
            .fold(ComplexMatrix::zeros(self.d, self.d), |s, m| &s + m)
    }

    /// Largest dependence of `sum_a alpha^x_a` on `x`.
    pub fn reduced_state_spread(&self) -> f64 {
        let base = self.reduced_state(0);
        (1..self.settings())
            .map(|x| self.reduced_state(x).max_abs_diff(&base))
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from another data set of the same shape.
    pub fn max_abs_diff(&self, other: &SteeringData) -> f64 {
        let fam_diff = |p: &[Vec<ComplexMatrix>], q: &[Vec<ComplexMatrix>]| {
            p.iter()
                .flatten()
                .zip(q.iter().flatten())
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max)
        };
        let mut worst = fam_diff(&self.alpha, &other.alpha);
        if let (Some(p), Some(q)) = (&self.beta, &other.beta) {
            worst = worst.max(fam_diff(p, q));
        }
        worst
    }
}

/// `[Tr_2 (rho (1 (x) E))]_{ij} = sum_{kl} rho[(i,k),(j,l)] E[l,k]` for
/// `rho` on `C^d (x) C^n`.
fn collapse(rho: &ComplexMatrix, d: usize, n: usize, e: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = ZERO;
            for k in 0..n {
                for l in 0..n {
                    acc += rho[(i * n + k, j * n + l)] * e[(l, k)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    out.hermitian_part()
}

fn check_density(rho: &ComplexMatrix, tol: &Tolerances) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch("density matrix is not square".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("density matrix has trace {tr}")));
    }
    let dev = rho.hermitian_deviation();
    if dev > tol.psd_tol {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let min = rho.hermitian_part().min_eigenvalue();
    if min < -tol.psd_tol {
        return Err(Error::InvalidArgument(format!(
            "density matrix has eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

fn collapse_family(rho: &ComplexMatrix, d: usize, fam: &MeasurementFamily) -> Vec<Vec<ComplexMatrix>> {
    (0..fam.settings())
        .map(|x| {
            (0..fam.outcomes())
                .map(|a| collapse(rho, d, fam.dim(), fam.element(x, a)))
                .collect()
        })
        .collect()
}

/// Bipartite steering data of `rho` on `C^d (x) C^{dA} (x) C^{dB}` (verifier
/// first).
pub fn steering_extract(
    rho: &ComplexMatrix,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
) -> Result<SteeringData> {
    let (da, db) = (alice.dim(), bob.dim());
    let n = rho.rows();
    if n == 0 || !n.is_multiple_of(da * db) {
        return Err(Error::DimensionMismatch(format!(
            "density of order {n} does not factor as d x {da} x {db}"
        )));
    }
    let tol = Tolerances::default();
    check_density(rho, &tol)?;
    let d = n / (da * db);
    let rho_va = partial_trace(rho, &[d, da, db], &[0, 1])?;
    let rho_vb = partial_trace(rho, &[d, da, db], &[0, 2])?;
    let alpha = collapse_family(&rho_va, d, alice);
    let beta = collapse_family(&rho_vb, d, bob);
    SteeringData::new_with(d, alpha, Some(beta), &tol)
}

/// Single-party steering data of `rho` on `C^d (x) C^{dA}`.
pub fn steering_extract_single(rho: &ComplexMatrix, alice: &MeasurementFamily) -> Result<SteeringData> {
    let da = alice.dim();
    let n = rho.rows();
    if n == 0 || !n.is_multiple_of(da) {
        return Err(Error::DimensionMismatch(format!(
            "density of order {n} does not factor as d x {da}"
        )));
    }
    let tol = Tolerances::default();
    check_density(rho, &tol)?;
    let d = n / da;
    SteeringData::new_with(d, collapse_family(rho, d, alice), None, &tol)
}

/// A pure state on `C^d (x) C^{d'}` with a family on `C^{d'}` that produces
/// given single-party steering data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringRealization {
    pub d: usize,
    pub d_prime: usize,
    pub state: StateVector,
    pub family: MeasurementFamily,
}

impl SteeringRealization {
    pub fn density(&self) -> ComplexMatrix {
        self.state.density()
    }
}

/// Realizes single-party steering data.
///
/// With `A = d rho_V^T` compressed to its range `P`, the family is
/// `A^x_a = A^{-1/2} P^* (d alpha^T) P A^{-1/2}` and the state is
/// `(1/sqrt d) sum_i |i> (x) K^* |i>` with `K = P A^{1/2}`.
pub fn steering_realize(sd: &SteeringData) -> Result<SteeringRealization> {
    let d = sd.d();
    let spread = sd.reduced_state_spread();
    if spread > 1e-10 {
        return Err(Error::InvalidSteeringData(format!(
            "reduced verifier state depends on the setting (spread {spread:.3e})"
        )));
    }
    let df = d as f64;
    let a_full = sd.reduced_state(0).transpose().scale_real(df).hermitian_part();
    let eig = a_full.eigh()?;
    let lmax = eig.values[d - 1];
    if lmax.is_nan() || lmax <= 0.0 {
        return Err(Error::InvalidSteeringData("reduced verifier state is zero".into()));
    }
    let range: Vec<usize> = (0..d).filter(|&k| eig.values[k] > RANK_CUTOFF * lmax).collect();
    let r = range.len();
    let p = ComplexMatrix::from_fn(d, r, |i, j| eig.vectors[(i, range[j])]);
    let lam: Vec<f64> = range.iter().map(|&k| eig.values[k]).collect();
    let inv_sqrt: Vec<f64> = lam.iter().map(|l| 1.0 / l.sqrt()).collect();
    let p_adj = p.adjoint();

    let mut elements = Vec::with_capacity(sd.settings());
    for x in 0..sd.settings() {
        let mut setting: Vec<ComplexMatrix> = (0..sd.outcomes())
            .map(|a| {
                let hat = p_adj.matmul(&sd.alpha()[x][a].transpose().scale_real(df)).matmul(&p);
                ComplexMatrix::from_fn(r, r, |i, j| hat[(i, j)] * inv_sqrt[i] * inv_sqrt[j]).hermitian_part()
            })
            .collect();
        // Absorb rounding in the completeness relation.
        let total = setting.iter().fold(ComplexMatrix::zeros(r, r), |s, m| &s + m);
        let fix = &ComplexMatrix::identity(r) - &total;
        let last = setting.len() - 1;
        setting[last] = &setting[last] + &fix;
        elements.push(setting);
    }
    let family = MeasurementFamily::new(elements)?;

    // K^* |i> = A'^{1/2} P^* |i>, amplitude of |i>|j> is (1/sqrt d) sqrt(l_j) conj(P[i][j]).
    let c = 1.0 / df.sqrt();
    let mut v = vec![ZERO; d * r];
    for i in 0..d {
        for j in 0..r {
            v[i * r + j] = p[(i, j)].conj() * (lam[j].sqrt() * c);
        }
    }
    Ok(SteeringRealization {
        d,
        d_prime: r,
        state: StateVector::normalized(v)?,
        family,
    })
}

/// Single-party data from a random pure state on `C^d (x) C^d` and a random
/// POVM family on the second factor.
pub fn random_steering_data<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize, m: usize) -> SteeringData {
    let psi = StateVector::random(rng, d * d);
    let fam = MeasurementFamily::random_povm(rng, d, k, m);
    steering_extract_single(&psi.density(), &fam).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_state_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rv = linalg::random_density(&mut rng, 2);
        let ra = linalg::random_density(&mut rng, 2);
        let rb = linalg::random_density(&mut rng, 3);
        let a = MeasurementFamily::random_povm(&mut rng, 2, 2, 2);
        let b = MeasurementFamily::random_povm(&mut rng, 3, 2, 3);
        let sd = steering_extract(&rv.kron(&ra).kron(&rb), &a, &b).unwrap();
        for x in 0..2 {
            for o in 0..2 {
                let p = ra.trace_product(a.element(x, o)).re;
                assert!(sd.alpha()[x][o].max_abs_diff(&rv.scale_real(p)) < 1e-12);
            }
        }
        let beta = sd.beta().unwrap();
        let p = rb.trace_product(b.element(1, 2)).re;
        assert!(beta[1][2].max_abs_diff(&rv.scale_real(p)) < 1e-12);
    }

    #[test]
    fn one_dimensional_verifier_gives_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let rho = linalg::random_density(&mut rng, 3);
        let a = MeasurementFamily::random_povm(&mut rng, 3, 2, 2);
        let sd = steering_extract_single(&rho, &a).unwrap();
        assert_eq!(sd.d(), 1);
        for x in 0..2 {
            for o in 0..2 {
                let want = rho.trace_product(a.element(x, o)).re;
                assert!((sd.alpha()[x][o][(0, 0)].re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bipartite_no_signaling_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let psi = StateVector::random(&mut rng, 2 * 2 * 3);
        let a = MeasurementFamily::random_povm(&mut rng, 2, 3, 2);
        let b = MeasurementFamily::random_povm(&mut rng, 3, 2, 3);
        let sd = steering_extract(&psi.density(), &a, &b).unwrap();
        let beta = sd.beta().unwrap();
        for x in 0..3 {
            let left = sd.reduced_state(x);
            for sb in beta {
                let right = sb.iter().fold(ComplexMatrix::zeros(2, 2), |s, m| &s + m);
                assert!(left.max_abs_diff(&right) < 1e-12);
            }
        }
        let json = serde_json::to_string(&sd).unwrap();
        let back: SteeringData = serde_json::from_str(&json).unwrap();
        assert!(back.max_abs_diff(&sd) < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let half = ComplexMatrix::diag(&[0.25, 0.25]);
        assert!(SteeringData::new(2, vec![vec![half.clone(), half.clone()]], None).is_ok());
        assert!(SteeringData::new(2, vec![vec![half.clone()]], None).is_err());
        let neg = ComplexMatrix::diag(&[0.75, -0.25]);
        assert!(SteeringData::new(2, vec![vec![neg, half.clone()]], None).is_err());
        let other = ComplexMatrix::diag(&[0.5, 0.0]);
        let err = SteeringData::new(
            2,
            vec![vec![half.clone(), half.clone()]],
            Some(vec![vec![other.clone(), other]]),
        );
        assert!(matches!(err, Err(Error::Signaling(_))));
    }

    #[test]
    fn maximally_entangled_recovers_transposed_projectors() {
        let y = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => ZERO,
        });
        let z = ComplexMatrix::diag(&[1.0, -1.0]);
        let fam = MeasurementFamily::from_observables(&[z, y]).unwrap();
        let psi = StateVector::maximally_entangled(2);
        let sd = steering_extract_single(&psi.density(), &fam).unwrap();
        let real = steering_realize(&sd).unwrap();
        assert_eq!(real.d_prime, 2);
        // alpha = A^T / 2 here, so the realization's family is A^T up to the
        // basis choice of the range; compare through the round trip and
        // through a basis-independent invariant.
        for x in 0..2 {
            for a in 0..2 {
                let e = real.family.element(x, a);
                assert!(e.matmul(e).max_abs_diff(e) < 1e-10);
            }
        }
        let back = steering_extract_single(&real.density(), &real.family).unwrap();
        assert!(back.max_abs_diff(&sd) < 1e-12);
    }

    #[test]
    fn canonical_state_gives_transposes_exactly() {
        // With rho_V = 1/d the range is everything and the eigenbasis of the
        // identity is the computational one.
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let fam = MeasurementFamily::random_projective(&mut rng, 2, 2, 2);
        let sd = steering_extract_single(&StateVector::maximally_entangled(2).density(), &fam).unwrap();
        let real = steering_realize(&sd).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                assert!(real.family.element(x, a).max_abs_diff(fam.element(x, a)) < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for d in 1..=3 {
            for k in 2..=3 {
                for m in 2..=3 {
                    let sd = random_steering_data(&mut rng, d, k, m);
                    let real = steering_realize(&sd).unwrap();
                    let back = steering_extract_single(&real.density(), &real.family).unwrap();
                    assert!(back.max_abs_diff(&sd) < 1e-9, "d={d} k={k} m={m}");
                }
            }
        }
    }

    #[test]
    fn setting_dependent_reduced_state_is_rejected() {
        let a = vec![
            vec![ComplexMatrix::diag(&[1.0, 0.0]), ComplexMatrix::zeros(2, 2)],
            vec![ComplexMatrix::diag(&[0.0, 1.0]), ComplexMatrix::zeros(2, 2)],
        ];
        let sd = SteeringData::new(2, a, None).unwrap();
        assert!(matches!(steering_realize(&sd), Err(Error::InvalidSteeringData(_))));
    }
}
