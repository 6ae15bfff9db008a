use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CorrelationTable, MeasurementFamily, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};

/// `(1 + 1/sqrt2) / 6`
pub const GAMMA_PLUS: f64 = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 6.0;
/// `(1 - 1/sqrt2) / 6`
pub const GAMMA_MINUS: f64 = (1.0 - std::f64::consts::FRAC_1_SQRT_2) / 6.0;

/// Mixed-radix enumeration of all outcome sequences of length `len`.
fn sequences(m: usize, len: usize) -> Vec<Vec<usize>> {
    let total = m.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let mut s = vec![0; len];
            for slot in s.iter_mut().rev() {
                *slot = code % m;
                code /= m;
            }
            s
        })
        .collect()
}

/// Palindrome `E^{x_1}_{a_1} ... E^{x_t}_{a_t} ... E^{x_1}_{a_1}`.
fn history_operator(fam: &MeasurementFamily, xs: &[usize], outcomes: &[usize]) -> ComplexMatrix {
    let t = xs.len();
    let mut h = fam.element(xs[t - 1], outcomes[t - 1]).clone();
    for s in (0..t - 1).rev() {
        let e = fam.element(xs[s], outcomes[s]);
        h = e.matmul(&h).matmul(e);
    }
    h
}

fn check_settings(fam: &MeasurementFamily, xs: &[usize], who: &str) -> Result<()> {
    if !fam.is_projective() {
        return Err(Error::NotProjective(format!("{who}'s family")));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!("{who} needs at least one measurement")));
    }
    if let Some(&x) = xs.iter().find(|&&x| x >= fam.settings()) {
        return Err(Error::InvalidIndex(format!(
            "{who}'s setting {x} >= {}",
            fam.settings()
        )));
    }
    Ok(())
}

/// `P(a_vec, b_vec | x_vec, y_vec)` for sequential projective measurements,
/// indexed `[a_code * mb^tB + b_code]` with outcome sequences in
/// lexicographic (mixed-radix) order.
pub fn spatiotemporal(
    psi: &StateVector,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
    xs: &[usize],
    ys: &[usize],
) -> Result<Vec<f64>> {
    check_settings(alice, xs, "Alice")?;
    check_settings(bob, ys, "Bob")?;
    let (da, db) = (alice.dim(), bob.dim());
    if psi.dim() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for {da}x{db} parties",
            psi.dim()
        )));
    }
    let a_hist: Vec<ComplexMatrix> = sequences(alice.outcomes(), xs.len())
        .iter()
        .map(|s| history_operator(alice, xs, s))
        .collect();
    let b_hist: Vec<ComplexMatrix> = sequences(bob.outcomes(), ys.len())
        .iter()
        .map(|s| history_operator(bob, ys, s))
        .collect();
    // Reuse the one-shot formula with the history operators as a single
    // setting each.
    let big_psi = ComplexMatrix::from_vec(da, db, psi.amplitudes().to_vec())?;
    let psi_adj = big_psi.adjoint();
    let mut out = Vec::with_capacity(a_hist.len() * b_hist.len());
    for ha in &a_hist {
        let n = psi_adj.matmul(ha).matmul(&big_psi);
        for hb in &b_hist {
            let mut v = ZERO;
            for j in 0..db {
                for jj in 0..db {
                    v += n[(j, jj)] * hb[(j, jj)];
                }
            }
            if v.im.abs() > 1e-10 || v.re < -1e-10 {
                return Err(Error::Numerical(format!("sequential probability {v}")));
            }
            out.push(v.re.max(0.0));
        }
    }
    Ok(out)
}

/// Sequential correlations for every setting sequence of fixed depths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct STCorrelationTable {
    pub ka: usize,
    pub kb: usize,
    pub ma: usize,
    pub mb: usize,
    pub ta: usize,
    pub tb: usize,
    /// `p[x_code][y_code][a_code * mb^tb + b_code]`
    pub p: Vec<Vec<Vec<f64>>>,
}

impl STCorrelationTable {
    pub fn get(&self, xs: &[usize], ys: &[usize], a_seq: &[usize], b_seq: &[usize]) -> f64 {
        let code = |s: &[usize], base: usize| s.iter().fold(0, |acc, &v| acc * base + v);
        let b_count = self.mb.pow(self.tb as u32);
        self.p[code(xs, self.ka)][code(ys, self.kb)][code(a_seq, self.ma) * b_count + code(b_seq, self.mb)]
    }

    /// Largest deviation from normalization over all setting sequences.
    pub fn normalization_deviation(&self) -> f64 {
        self.p
            .iter()
            .flatten()
            .map(|v| (v.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.p.iter().flatten().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn spatiotemporal_table(
    psi: &StateVector,
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
    ta: usize,
    tb: usize,
) -> Result<STCorrelationTable> {
    let (ka, kb) = (alice.settings(), bob.settings());
    let xs_all = sequences(ka, ta);
    let ys_all = sequences(kb, tb);
    let mut p = Vec::with_capacity(xs_all.len());
    for xs in &xs_all {
        let mut row = Vec::with_capacity(ys_all.len());
        for ys in &ys_all {
            row.push(spatiotemporal(psi, alice, bob, xs, ys)?);
        }
        p.push(row);
    }
    Ok(STCorrelationTable {
        ka,
        kb,
        ma: alice.outcomes(),
        mb: bob.outcomes(),
        ta,
        tb,
        p,
    })
}

/// The three-qubit W state with Alice holding qubits 1 and 2, and the
/// observables `A1 = Z(x)1, A2 = X(x)1, A3 = 1(x)Z, A4 = 1(x)X`,
/// `B1 = (Z - X)/sqrt2, B2 = (Z + X)/sqrt2`. Outcome 0 is the `+1`
/// eigenvalue.
pub fn wstate_realization() -> (StateVector, MeasurementFamily, MeasurementFamily) {
    let c = C64::new(1.0 / 3f64.sqrt(), 0.0);
    // basis index: (q1 q2) * 2 + bob
    let mut v = vec![ZERO; 8];
    v[0b001] = c; // e00 (x) e1
    v[0b010] = c; // e01 (x) e0
    v[0b100] = c; // e10 (x) e0
    let z = ComplexMatrix::diag(&[1.0, -1.0]);
    let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let id = ComplexMatrix::identity(2);
    let alice = MeasurementFamily::from_observables(&[z.kron(&id), x.kron(&id), id.kron(&z), id.kron(&x)])
        .expect("Pauli observables");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bob = MeasurementFamily::from_observables(&[(&z - &x).scale_real(s), (&z + &x).scale_real(s)])
        .expect("Pauli observables");
    (StateVector::new(v).expect("unit vector"), alice, bob)
}

/// Alice's coarse-grained outcome after `A1` followed by `A3` or `A4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoarseOutcome {
    /// `A1` succeeded and the second measurement gave `+1`.
    Plus,
    /// `A1` succeeded and the second measurement gave `-1`.
    Minus,
    /// `A1` failed.
    Fail,
}

impl CoarseOutcome {
    pub const ALL: [CoarseOutcome; 3] = [CoarseOutcome::Plus, CoarseOutcome::Minus, CoarseOutcome::Fail];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CoarseOutcome::Plus => "+",
            CoarseOutcome::Minus => "-",
            CoarseOutcome::Fail => "0",
        }
    }
}

/// `p[s][o][y][b]` for Alice's second setting `s` (0: `A3`, 1: `A4`), coarse
/// outcome `o`, Bob's setting `y` (0: `B1`, 1: `B2`) and Bob's outcome `b`
/// (0: `+`, 1: `-`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WStateTable {
    pub p: [[[[f64; 2]; 2]; 3]; 2],
}

impl WStateTable {
    pub fn get(&self, second: usize, o: CoarseOutcome, y: usize, b: usize) -> f64 {
        self.p[second][o.index()][y][b]
    }

    /// Expected entry in terms of `GAMMA_PLUS` / `GAMMA_MINUS`, as a sign.
    pub fn gamma_pattern() -> [[[[bool; 2]; 2]; 3]; 2] {
        // true = gamma_plus
        [
            [
                [[false, true], [false, true]],
                [[true, false], [true, false]],
                [[true, false], [true, false]],
            ],
            [
                [[false, true], [true, false]],
                [[true, false], [false, true]],
                [[true, false], [true, false]],
            ],
        ]
    }

    pub fn max_deviation_from_gammas(&self) -> f64 {
        let pattern = Self::gamma_pattern();
        let mut worst: f64 = 0.0;
        for s in 0..2 {
            for o in 0..3 {
                for y in 0..2 {
                    for b in 0..2 {
                        let want = if pattern[s][o][y][b] { GAMMA_PLUS } else { GAMMA_MINUS };
                        worst = worst.max((self.p[s][o][y][b] - want).abs());
                    }
                }
            }
        }
        worst
    }
}

impl fmt::Display for WStateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}{:>12}{:>12}{:>12}{:>12}", "", "B1 +", "B1 -", "B2 +", "B2 -")?;
        for (s, label) in ["A1,A3", "A1,A4"].iter().enumerate() {
            for o in CoarseOutcome::ALL {
                write!(
                    f,
                    "{:<6}{:<4}",
                    if o == CoarseOutcome::Plus { *label } else { "" },
                    o.symbol()
                )?;
                for y in 0..2 {
                    for b in 0..2 {
                        write!(f, "{:>12.9}", self.get(s, o, y, b))?;
                    }
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Coarse-grained table of Alice measuring `A1` then `A3` or `A4`, Bob
/// measuring once.
pub fn wstate_coarse_table() -> Result<WStateTable> {
    let (psi, alice, bob) = wstate_realization();
    let mut p = [[[[0.0; 2]; 2]; 3]; 2];
    for (s, second) in [2usize, 3].into_iter().enumerate() {
        for y in 0..2 {
            // index: (a1 * 2 + a2) * 2 + b
            let probs = spatiotemporal(&psi, &alice, &bob, &[0, second], &[y])?;
            for b in 0..2 {
                let at = |a1: usize, a2: usize| probs[(a1 * 2 + a2) * 2 + b];
                p[s][CoarseOutcome::Plus.index()][y][b] = at(0, 0);
                p[s][CoarseOutcome::Minus.index()][y][b] = at(0, 1);
                p[s][CoarseOutcome::Fail.index()][y][b] = at(1, 0) + at(1, 1);
            }
        }
    }
    Ok(WStateTable { p })
}

/// The coarse table viewed as a two-setting, three-outcome Alice against a
/// two-setting, two-outcome Bob.
impl WStateTable {
    pub fn as_correlation_table(&self) -> Result<CorrelationTable> {
        CorrelationTable::from_fn(2, 2, 3, 2, |a, b, x, y| self.p[x][a][y][b])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    /// `P(+,+ | A1 A4; B2)`
    pub lhs: f64,
    /// Sum of the four terms bounding `lhs` in every local model.
    pub rhs: f64,
    pub terms: [f64; 4],
    pub violation: f64,
}

/// `P(+,+|A1A4;B2) <= P(+,+|A1A4;B1) + P(+,+|A1A3;B2) + P(-,-|A1A3;B1)
/// + P(0,-|A1A3;B1)`.
pub fn hardy_check(table: &WStateTable) -> Result<HardyReport> {
    for (i, v) in table.p.iter().flatten().flatten().flatten().enumerate() {
        if !v.is_finite() || *v < -1e-10 || *v > 1.0 + 1e-10 {
            return Err(Error::InvalidTable(format!("entry {i} = {v} is not a probability")));
        }
    }
    use CoarseOutcome::*;
    let lhs = table.get(1, Plus, 1, 0);
    let terms = [
        table.get(1, Plus, 0, 0),
        table.get(0, Plus, 1, 0),
        table.get(0, Minus, 0, 1),
        table.get(0, Fail, 0, 1),
    ];
    let rhs: f64 = terms.iter().sum();
    Ok(HardyReport {
        lhs,
        rhs,
        terms,
        violation: lhs - rhs,
    })
}
