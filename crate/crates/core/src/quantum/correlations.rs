use serde::{Deserialize, Serialize};

use super::{CorrelationTable, MeasurementFamily, StateVector, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};

/// A state with measurement families for Alice and Bob on
/// `C^{dA} (x) C^{dB}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub state: StateVector,
    pub alice: MeasurementFamily,
    pub bob: MeasurementFamily,
}

impl Realization {
    pub fn new(state: StateVector, alice: MeasurementFamily, bob: MeasurementFamily) -> Result<Self> {
        if state.dim() != alice.dim() * bob.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {} for {}x{} parties",
                state.dim(),
                alice.dim(),
                bob.dim()
            )));
        }
        Ok(Realization { state, alice, bob })
    }

    pub fn correlations(&self) -> Result<CorrelationTable> {
        correlations_tensor(&self.state, &self.alice, &self.bob)
    }

    /// The same realization as commuting families on the joint space.
    pub fn to_commuting(&self) -> (StateVector, MeasurementFamily, MeasurementFamily) {
        (
            self.state.clone(),
            self.alice.extend_right(self.bob.dim()),
            self.bob.extend_left(self.alice.dim()),
        )
    }
}

/// `P(a,b|x,y) = <psi, (A^x_a (x) B^y_b) psi>`.
pub fn correlations_tensor(
    psi: &StateVector,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
) -> Result<CorrelationTable> {
    let (da, db) = (alice.dim(), bob.dim());
    if psi.dim() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for {da}x{db} parties",
            psi.dim()
        )));
    }
    // Psi as a dA x dB matrix: P = tr((Psi^* A Psi) B^T).
    let big_psi = ComplexMatrix::from_vec(da, db, psi.amplitudes().to_vec())?;
    let psi_adj = big_psi.adjoint();
    let (ka, kb, ma, mb) = (alice.settings(), bob.settings(), alice.outcomes(), bob.outcomes());
    let mut table = CorrelationTable::zeros(ka, kb, ma, mb);
    for x in 0..ka {
        for a in 0..ma {
            let n = psi_adj.matmul(alice.element(x, a)).matmul(&big_psi);
            for y in 0..kb {
                for b in 0..mb {
                    let e = bob.element(y, b);
                    let mut v = ZERO;
                    for j in 0..db {
                        for jj in 0..db {
                            v += n[(j, jj)] * e[(j, jj)];
                        }
                    }
                    if v.im.abs() > 1e-10 {
                        return Err(Error::Numerical(format!(
                            "probability with imaginary part {:.3e}",
                            v.im
                        )));
                    }
                    table.set(a, b, x, y, v.re);
                }
            }
        }
    }
    table.validate()?;
    Ok(table)
}

/// `P(a,b|x,y) = <psi, A^x_a B^y_b psi>` for commuting families on one space.
pub fn correlations_commuting(
    psi: &StateVector,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
) -> Result<CorrelationTable> {
    let dim = psi.dim();
    if alice.dim() != dim || bob.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "families of dimension {} and {} for a state of dimension {dim}",
            alice.dim(),
            bob.dim()
        )));
    }
    let (ka, kb, ma, mb) = (alice.settings(), bob.settings(), alice.outcomes(), bob.outcomes());
    let mut worst = (0.0, (0, 0, 0, 0));
    for x in 0..ka {
        for a in 0..ma {
            for y in 0..kb {
                for b in 0..mb {
                    let c = alice.element(x, a).commutator(bob.element(y, b)).operator_norm();
                    if c > worst.0 {
                        worst = (c, (x, a, y, b));
                    }
                }
            }
        }
    }
    if worst.0 > 1e-9 {
        let (x, a, y, b) = worst.1;
        return Err(Error::CommutatorViolation(format!(
            "||[A^{x}_{a}, B^{y}_{b}]|| = {:.3e}",
            worst.0
        )));
    }
    let mut table = CorrelationTable::zeros(ka, kb, ma, mb);
    for x in 0..ka {
        for a in 0..ma {
            let av: Vec<C64> = alice.element(x, a).matvec(psi.amplitudes());
            for y in 0..kb {
                for b in 0..mb {
                    let bv = bob.element(y, b).matvec(psi.amplitudes());
                    // <psi, A B psi> = <A psi, B psi> for Hermitian A.
                    let v: C64 = av.iter().zip(&bv).map(|(p, q)| p.conj() * q).sum();
                    if v.im.abs() > 1e-9 {
                        return Err(Error::Numerical(format!(
                            "probability with imaginary part {:.3e}",
                            v.im
                        )));
                    }
                    table.set(a, b, x, y, v.re);
                }
            }
        }
    }
    table.validate()?;
    Ok(table)
}

/// Purifies a density matrix on `C^{dA} (x) C^{dB}` with an ancilla on
/// Alice's side: returns a vector on `(C^{dA} (x) C^r) (x) C^{dB}` and `r`.
pub fn purify(rho: &ComplexMatrix, da: usize, db: usize) -> Result<(StateVector, usize)> {
    let n = da * db;
    if !rho.is_square() || rho.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "density matrix of order {} for {da}x{db}",
            rho.rows()
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("density matrix has trace {tr}")));
    }
    let eig = rho.eigh()?;
    if eig.values[0] < -super::PSD_TOL {
        return Err(Error::InvalidArgument(format!(
            "density matrix has eigenvalue {:.3e}",
            eig.values[0]
        )));
    }
    let cutoff = 1e-14 * eig.values[n - 1].max(0.0);
    let kept: Vec<usize> = (0..n).filter(|&k| eig.values[k] > cutoff).collect();
    let r = kept.len().max(1);
    // amplitude index: ((i * r) + k) * db + j
    let mut v = vec![ZERO; da * r * db];
    for (slot, &k) in kept.iter().enumerate() {
        let w = eig.values[k].sqrt();
        let vec_k = eig.vector(k);
        for i in 0..da {
            for j in 0..db {
                v[(i * r + slot) * db + j] += vec_k[i * db + j] * w;
            }
        }
    }
    Ok((StateVector::normalized(v)?, r))
}

/// Correlations of a mixed state, computed through its purification.
pub fn correlations_mixed(
    rho: &ComplexMatrix,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
) -> Result<CorrelationTable> {
    let (psi, r) = purify(rho, alice.dim(), bob.dim())?;
    correlations_tensor(&psi, &alice.extend_right(r), bob)
}

fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.direct_sum(b)
}

/// Realization of `lambda P1 + (1 - lambda) P2` on
/// `(H_A1 + H_A2) (x) (H_B1 + H_B2)` with
/// `psi = sqrt(lambda) psi1 + sqrt(1 - lambda) psi2` on the diagonal blocks.
pub fn direct_sum_mix(r1: &Realization, r2: &Realization, lambda: f64) -> Result<Realization> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("mixing weight {lambda} not in (0, 1)")));
    }
    let shape = |r: &Realization| {
        (
            r.alice.settings(),
            r.alice.outcomes(),
            r.bob.settings(),
            r.bob.outcomes(),
        )
    };
    if shape(r1) != shape(r2) {
        return Err(Error::InvalidTable("realizations belong to different scenarios".into()));
    }
    let (da1, db1) = (r1.alice.dim(), r1.bob.dim());
    let (da2, db2) = (r2.alice.dim(), r2.bob.dim());
    let (da, db) = (da1 + da2, db1 + db2);
    let mut v = vec![ZERO; da * db];
    let (s1, s2) = (lambda.sqrt(), (1.0 - lambda).sqrt());
    for i in 0..da1 {
        for j in 0..db1 {
            v[i * db + j] = r1.state.amplitudes()[i * db1 + j] * s1;
        }
    }
    for i in 0..da2 {
        for j in 0..db2 {
            v[(da1 + i) * db + db1 + j] = r2.state.amplitudes()[i * db2 + j] * s2;
        }
    }
    let combine = |f1: &MeasurementFamily, f2: &MeasurementFamily| -> Result<MeasurementFamily> {
        let elements = (0..f1.settings())
            .map(|x| {
                (0..f1.outcomes())
                    .map(|a| block_diag(f1.element(x, a), f2.element(x, a)))
                    .collect()
            })
            .collect();
        let fam = MeasurementFamily::new(elements)?;
        if f1.is_projective() && f2.is_projective() {
            fam.into_projective()
        } else {
            Ok(fam)
        }
    };
    Realization::new(
        StateVector::normalized(v)?,
        combine(&r1.alice, &r2.alice)?,
        combine(&r1.bob, &r2.bob)?,
    )
}

/// Jointly measurable scalar realization `Pi^{x,y}_{a,b} = P(a,b|x,y)` on `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointMeasurement {
    pub ka: usize,
    pub kb: usize,
    pub ma: usize,
    pub mb: usize,
    /// `pi[x][y][a][b]`
    pub pi: Vec<Vec<Vec<Vec<f64>>>>,
}

impl JointMeasurement {
    /// `sum_b Pi^{x,y}_{a,b}`
    pub fn marginal_a(&self, x: usize, y: usize, a: usize) -> f64 {
        self.pi[x][y][a].iter().sum()
    }

    /// `sum_a Pi^{x,y}_{a,b}`
    pub fn marginal_b(&self, x: usize, y: usize, b: usize) -> f64 {
        self.pi[x][y].iter().map(|row| row[b]).sum()
    }

    /// Largest deviation of the marginals from a table's one-party marginals.
    pub fn marginal_deviation(&self, table: &CorrelationTable) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.ka {
            for y in 0..self.kb {
                for a in 0..self.ma {
                    worst = worst.max((self.marginal_a(x, y, a) - table.marginal_a(a, x, 0)).abs());
                }
                for b in 0..self.mb {
                    worst = worst.max((self.marginal_b(x, y, b) - table.marginal_b(b, 0, y)).abs());
                }
            }
        }
        worst
    }
}

/// The one-dimensional joint realization of a no-signaling table.
pub fn trivial_joint(table: &CorrelationTable) -> Result<JointMeasurement> {
    table.validate_with(&Tolerances::default())?;
    let pi = (0..table.ka)
        .map(|x| {
            (0..table.kb)
                .map(|y| {
                    (0..table.ma)
                        .map(|a| (0..table.mb).map(|b| table.get(a, b, x, y)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(JointMeasurement {
        ka: table.ka,
        kb: table.kb,
        ma: table.ma,
        mb: table.mb,
        pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, -1.0])
    }

    fn random_realization(rng: &mut ChaCha8Rng, da: usize, db: usize, k: usize, m: usize) -> Realization {
        Realization::new(
            StateVector::random(rng, da * db),
            MeasurementFamily::random_povm(rng, da, k, m),
            MeasurementFamily::random_povm(rng, db, k, m),
        )
        .unwrap()
    }

    #[test]
    fn product_state_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sa = StateVector::random(&mut rng, 2);
        let sb = StateVector::random(&mut rng, 3);
        let a = MeasurementFamily::random_povm(&mut rng, 2, 2, 3);
        let b = MeasurementFamily::random_povm(&mut rng, 3, 2, 3);
        let t = correlations_tensor(&sa.tensor(&sb), &a, &b).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        let pa = sa.expectation(a.element(x, i)).re;
                        let pb = sb.expectation(b.element(y, j)).re;
                        assert!((t.get(i, j, x, y) - pa * pb).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn tsirelson_correlators() {
        // Singlet with A0 = Z, A1 = X, B_y = -(Z +- X)/sqrt2 reaches 2 sqrt2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = StateVector::new(vec![ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO]).unwrap();
        let a = MeasurementFamily::from_observables(&[pauli_z(), pauli_x()]).unwrap();
        let b0 = (&pauli_z() + &pauli_x()).scale_real(-s);
        let b1 = (&pauli_z() - &pauli_x()).scale_real(-s);
        let b = MeasurementFamily::from_observables(&[b0, b1]).unwrap();
        let t = correlations_tensor(&singlet, &a, &b).unwrap();
        let chsh = t.correlator(0, 0) + t.correlator(0, 1) + t.correlator(1, 0) - t.correlator(1, 1);
        assert!((chsh - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn commuting_matches_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_realization(&mut rng, 2, 3, 2, 2);
        let (psi, a, b) = r.to_commuting();
        let tc = correlations_commuting(&psi, &a, &b).unwrap();
        assert!(tc.max_abs_diff(&r.correlations().unwrap()) < 1e-12);

        let scalars = MeasurementFamily::scalars(&[vec![0.3, 0.7]]).unwrap();
        let one = StateVector::basis(1, 0).unwrap();
        let t = correlations_commuting(&one, &scalars, &scalars).unwrap();
        assert!((t.get(0, 1, 0, 0) - 0.21).abs() < 1e-15);

        let z = MeasurementFamily::from_observables(&[pauli_z()]).unwrap();
        let x = MeasurementFamily::from_observables(&[pauli_x()]).unwrap();
        let err = correlations_commuting(&StateVector::basis(2, 0).unwrap(), &z, &x).unwrap_err();
        assert!(matches!(err, Error::CommutatorViolation(ref s) if s.contains("A^0_0")));
    }

    #[test]
    fn mixing_by_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let r1 = random_realization(&mut rng, 2, 2, 2, 2);
            let r2 = random_realization(&mut rng, 2, 2, 2, 2);
            let lambda = 0.3;
            let mixed = direct_sum_mix(&r1, &r2, lambda).unwrap();
            let want = r1
                .correlations()
                .unwrap()
                .mix(&r2.correlations().unwrap(), lambda)
                .unwrap();
            assert!(mixed.correlations().unwrap().max_abs_diff(&want) < 1e-10);
        }
        let r = random_realization(&mut rng, 2, 2, 2, 2);
        let same = direct_sum_mix(&r, &r, 0.5).unwrap();
        assert!(same.correlations().unwrap().max_abs_diff(&r.correlations().unwrap()) < 1e-12);
        assert!(direct_sum_mix(&r, &r, 1.0).is_err());
    }

    #[test]
    fn purification_reproduces_mixed_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = linalg::random_density(&mut rng, 6);
        let a = MeasurementFamily::random_povm(&mut rng, 2, 2, 2);
        let b = MeasurementFamily::random_povm(&mut rng, 3, 2, 2);
        let t = correlations_mixed(&rho, &a, &b).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let op = a.element(x, i).kron(b.element(y, j));
                        let direct = rho.trace_product(&op).re;
                        assert!((t.get(i, j, x, y) - direct).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_joint_marginals() {
        let pr = CorrelationTable::pr_box();
        let j = trivial_joint(&pr).unwrap();
        assert!(j.marginal_deviation(&pr) < 1e-15);
        let u = trivial_joint(&CorrelationTable::uniform(2, 2, 3, 3)).unwrap();
        assert!(u
            .pi
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }
}
