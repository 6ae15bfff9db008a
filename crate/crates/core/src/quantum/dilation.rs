use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MeasurementFamily, StateVector, DERIVED_PSD_TOL, PSD_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};

/// Tolerance on `Phi(1) = 1` and on `V^* V = 1`.
const UNITAL_TOL: f64 = 1e-10;
/// Relative cutoff below which Choi eigenvalues are dropped from the Kraus
/// decomposition.
const KRAUS_CUTOFF: f64 = 1e-14;

/// `C = sum_ij E_ij (x) Phi(E_ij)` for a linear map `Phi: M_n -> M_d`.
pub fn choi_matrix(n: usize, phi: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let mut blocks: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(i, j)] = C64::new(1.0, 0.0);
            row.push(phi(&e));
        }
        blocks.push(row);
    }
    let d = blocks[0][0].rows();
    ComplexMatrix::from_fn(n * d, n * d, |r, c| blocks[r / d][c / d][(r % d, c % d)])
}

/// Kraus operators `K_k` (`n x d`) of a random ucp map
/// `Phi(a) = sum_k K_k^* a K_k` from `M_n` to `M_d`, cut from a random
/// isometry `C^d -> C^n (x) C^r`.
pub fn random_ucp_kraus<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, r: usize) -> Vec<ComplexMatrix> {
    let v = linalg::random_isometry(rng, n * r, d);
    (0..r)
        .map(|k| ComplexMatrix::from_fn(n, d, |i, j| v[(i * r + k, j)]))
        .collect()
}

/// `sum_k K_k^* a K_k`
pub fn apply_kraus(kraus: &[ComplexMatrix], a: &ComplexMatrix) -> ComplexMatrix {
    let d = kraus[0].cols();
    kraus
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |s, k| &s + &k.adjoint().matmul(a).matmul(k))
}

/// `Phi(a) = V^* (a (x) 1_r) V` with an isometry `V: C^d -> C^n (x) C^r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StinespringDilation {
    pub n: usize,
    pub d: usize,
    /// Multiplicity `r` of the representation `a -> a (x) 1_r`.
    pub rank: usize,
    /// `(n r) x d`, row index `i * r + k`.
    pub isometry: ComplexMatrix,
    pub kraus: Vec<ComplexMatrix>,
    /// `max |V^* V - 1|`
    pub isometry_error: f64,
    /// Largest entry deviation of `V^* (E_ij (x) 1) V` from `Phi(E_ij)`.
    pub reconstruction_residual: f64,
}

impl StinespringDilation {
    /// `V^* (a (x) 1) V`
    pub fn apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        apply_kraus(&self.kraus, a)
    }

    /// `a (x) 1_r`
    pub fn represent(&self, a: &ComplexMatrix) -> ComplexMatrix {
        a.kron(&ComplexMatrix::identity(self.rank))
    }

    /// Minimum eigenvalue of `Phi(a^* a) - Phi(a)^* Phi(a)`.
    pub fn schwarz_gap(&self, a: &ComplexMatrix) -> f64 {
        let pa = self.apply(a);
        let gap = &self.apply(&a.adjoint().matmul(a)) - &pa.adjoint().matmul(&pa);
        gap.hermitian_part().min_eigenvalue()
    }
}

/// Stinespring dilation of the map `M_n -> M_d` with Choi matrix `choi`.
pub fn stinespring_dilate(choi: &ComplexMatrix, n: usize, d: usize) -> Result<StinespringDilation> {
    if n == 0 || d == 0 || !choi.is_square() || choi.rows() != n * d {
        return Err(Error::DimensionMismatch(format!(
            "Choi matrix of order {} for a map M_{n} -> M_{d}",
            choi.rows()
        )));
    }
    let dev = choi.hermitian_deviation();
    if dev > PSD_TOL {
        return Err(Error::NotUcp(format!(
            "Choi matrix is not Hermitian ({dev:.3e}): map is not completely positive"
        )));
    }
    let choi = choi.hermitian_part();
    let eig = choi.eigh()?;
    if eig.values[0] < -PSD_TOL {
        return Err(Error::NotUcp(format!(
            "Choi matrix has eigenvalue {:.3e}: map is not completely positive",
            eig.values[0]
        )));
    }
    let unit = (0..n).fold(ComplexMatrix::zeros(d, d), |s, i| {
        &s + &choi.submatrix(i * d, i * d, d, d)
    });
    let unital_dev = unit.max_abs_diff(&ComplexMatrix::identity(d));
    if unital_dev > UNITAL_TOL {
        return Err(Error::NotUcp(format!(
            "Phi(1) differs from the identity by {unital_dev:.3e}: map is not unital"
        )));
    }

    let lmax = eig.values[n * d - 1].max(0.0);
    let kept: Vec<usize> = (0..n * d).filter(|&k| eig.values[k] > KRAUS_CUTOFF * lmax).collect();
    // Block i of sqrt(l_k) v_k is K_k^* |i>.
    let kraus: Vec<ComplexMatrix> = kept
        .iter()
        .rev()
        .map(|&k| {
            let s = eig.values[k].sqrt();
            let v = eig.vector(k);
            ComplexMatrix::from_fn(n, d, |i, j| (v[i * d + j] * s).conj())
        })
        .collect();
    let r = kraus.len();
    let isometry = ComplexMatrix::from_fn(n * r, d, |row, j| kraus[row % r][(row / r, j)]);
    let isometry_error = isometry
        .adjoint()
        .matmul(&isometry)
        .max_abs_diff(&ComplexMatrix::identity(d));
    if isometry_error > UNITAL_TOL {
        return Err(Error::Numerical(format!(
            "dilation isometry deviates by {isometry_error:.3e}"
        )));
    }
    let mut residual: f64 = 0.0;
    let id_r = ComplexMatrix::identity(r);
    let v_adj = isometry.adjoint();
    for i in 0..n {
        for j in 0..n {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(i, j)] = C64::new(1.0, 0.0);
            let got = v_adj.matmul(&e.kron(&id_r)).matmul(&isometry);
            residual = residual.max(got.max_abs_diff(&choi.submatrix(i * d, j * d, d, d)));
        }
    }
    Ok(StinespringDilation {
        n,
        d,
        rank: r,
        isometry,
        kraus,
        isometry_error,
        reconstruction_residual: residual,
    })
}

/// Projective measurement `Pi_a = |a><a| (x) 1_d` on `C^m (x) C^d` with the
/// isometry `V = sum_a |a> (x) sqrt(A_a)`, so that `V^* Pi_a V = A_a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaimarkDilation {
    pub m: usize,
    pub d: usize,
    /// `(m d) x d`
    pub isometry: ComplexMatrix,
    pub projectors: Vec<ComplexMatrix>,
    /// `max_a |V^* Pi_a V - A_a|`
    pub residual: f64,
}

impl NaimarkDilation {
    pub fn dilated_dim(&self) -> usize {
        self.m * self.d
    }

    /// `|| Pi_a V psi ||^2` for every outcome.
    pub fn probabilities(&self, psi: &StateVector) -> Vec<f64> {
        let v = self.isometry.matvec(psi.amplitudes());
        (0..self.m)
            .map(|a| v[a * self.d..(a + 1) * self.d].iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// The projectors as a one-setting projective family.
    pub fn family(&self) -> Result<MeasurementFamily> {
        MeasurementFamily::new(vec![self.projectors.clone()])?.into_projective()
    }
}

pub fn naimark_dilate(povm: &[ComplexMatrix]) -> Result<NaimarkDilation> {
    let fam = MeasurementFamily::new(vec![povm.to_vec()])?;
    let (m, d) = (fam.outcomes(), fam.dim());
    let roots = povm
        .iter()
        .map(|e| e.hermitian_part().sqrt_psd())
        .collect::<Result<Vec<_>>>()?;
    let isometry = ComplexMatrix::from_fn(m * d, d, |row, j| roots[row / d][(row % d, j)]);
    let projectors: Vec<ComplexMatrix> = (0..m)
        .map(|a| {
            let mut diag = vec![0.0; m * d];
            diag[a * d..(a + 1) * d].fill(1.0);
            ComplexMatrix::diag(&diag)
        })
        .collect();
    let v_adj = isometry.adjoint();
    let residual = projectors
        .iter()
        .zip(povm)
        .map(|(p, e)| v_adj.matmul(p).matmul(&isometry).max_abs_diff(e))
        .fold(0.0, f64::max);
    if residual > UNITAL_TOL {
        return Err(Error::Numerical(format!(
            "Naimark dilation reproduces the POVM only within {residual:.3e}"
        )));
    }
    Ok(NaimarkDilation {
        m,
        d,
        isometry,
        projectors,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    pub psd: bool,
    /// Minimum eigenvalue of the entrywise product.
    pub min_eigenvalue: f64,
    /// Largest `||[A_ij, B_kl]||` over all entry pairs.
    pub max_commutator: f64,
}

fn assemble(blocks: &[Vec<ComplexMatrix>], name: &str) -> Result<(usize, ComplexMatrix)> {
    let n = blocks.len();
    if n == 0 || blocks.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be a nonempty square array of blocks"
        )));
    }
    let d = blocks[0][0].rows();
    if blocks.iter().flatten().any(|b| b.rows() != d || b.cols() != d) {
        return Err(Error::DimensionMismatch(format!(
            "{name} has entries of different sizes"
        )));
    }
    Ok((
        d,
        ComplexMatrix::from_fn(n * d, n * d, |r, c| blocks[r / d][c / d][(r % d, c % d)]),
    ))
}

/// Checks that the entrywise product of two PSD block matrices with
/// mutually commuting entries is PSD.
pub fn schur_product_psd_check(a: &[Vec<ComplexMatrix>], b: &[Vec<ComplexMatrix>]) -> Result<SchurReport> {
    let (da, big_a) = assemble(a, "first array")?;
    let (db, big_b) = assemble(b, "second array")?;
    if a.len() != b.len() || da != db {
        return Err(Error::DimensionMismatch("block arrays have different shapes".into()));
    }
    for (name, m) in [("first", &big_a), ("second", &big_b)] {
        if !m.is_hermitian(PSD_TOL) {
            return Err(Error::InvalidArgument(format!("{name} array is not Hermitian")));
        }
        let min = m.hermitian_part().min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidArgument(format!("{name} array has eigenvalue {min:.3e}")));
        }
    }
    let mut max_commutator: f64 = 0.0;
    let mut worst = (0, 0, 0, 0);
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            for (k, brow) in b.iter().enumerate() {
                for (l, y) in brow.iter().enumerate() {
                    let c = x.commutator(y).operator_norm();
                    if c > max_commutator {
                        max_commutator = c;
                        worst = (i, j, k, l);
                    }
                }
            }
        }
    }
    if max_commutator > 1e-9 {
        let (i, j, k, l) = worst;
        return Err(Error::CommutatorViolation(format!(
            "||[A_{i}{j}, B_{k}{l}]|| = {max_commutator:.3e}"
        )));
    }
    let n = a.len();
    let d = da;
    let prods: Vec<Vec<ComplexMatrix>> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j].matmul(&b[i][j])).collect())
        .collect();
    let big = ComplexMatrix::from_fn(n * d, n * d, |r, c| prods[r / d][c / d][(r % d, c % d)]);
    let min_eigenvalue = big.hermitian_part().min_eigenvalue();
    Ok(SchurReport {
        psd: min_eigenvalue >= -DERIVED_PSD_TOL,
        min_eigenvalue,
        max_commutator,
    })
}
