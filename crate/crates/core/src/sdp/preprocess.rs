use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Constraint, SdpInstance};
use crate::linalg::real;

/// Relative pivot threshold of the pivoted Cholesky factorization of the
/// constraint Gram matrix.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Outcome of [`preprocess`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    /// Instance with only the independent constraints.
    pub reduced: SdpInstance,
    /// Original index of each kept constraint, in kept order.
    pub kept: Vec<usize>,
    /// Original indices of the removed (dependent) constraints.
    pub removed: Vec<usize>,
    /// Farkas vector over the original constraints when the dependent rows
    /// contradict the independent ones: `sum y_i A_i = 0` and `b.y = 1`.
    pub inconsistency: Option<Vec<f64>>,
}

impl Preprocessed {
    /// Lifts a dual vector of the reduced instance to the original indexing.
    pub fn lift_dual(&self, y: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.kept.len() + self.removed.len()];
        for (&orig, &v) in self.kept.iter().zip(y) {
            full[orig] = v;
        }
        full
    }
}

fn gram(inst: &SdpInstance) -> Vec<f64> {
    let m = inst.constraints.len();
    let mut by_cell: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
    let mut by_lp: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    for (i, c) in inst.constraints.iter().enumerate() {
        for (p, q, v) in c.form.merged_psd() {
            // Off-diagonal entries appear twice in the full matrix.
            let w = if p == q { v } else { v * std::f64::consts::SQRT_2 };
            by_cell.entry((p, q)).or_default().push((i, w));
        }
        for (k, v) in c.form.merged_lp() {
            by_lp.entry(k).or_default().push((i, v));
        }
    }
    let mut g = vec![0.0; m * m];
    for list in by_cell.values().chain(by_lp.values()) {
        for &(i, a) in list {
            for &(j, b) in list {
                g[i * m + j] += a * b;
            }
        }
    }
    g
}

/// Removes linearly dependent equality constraints and detects
/// inconsistent right-hand sides.
pub fn preprocess(inst: &SdpInstance) -> Preprocessed {
    let m = inst.constraints.len();
    let g = gram(inst);
    let scale = (0..m).fold(0.0f64, |s, i| s.max(g[i * m + i]));
    let threshold = RANK_THRESHOLD * scale.max(f64::MIN_POSITIVE);

    // Pivoted Cholesky: residual diagonal is the squared distance of each
    // remaining row from the span of the chosen rows.
    let mut diag: Vec<f64> = (0..m).map(|i| g[i * m + i]).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut l_cols: Vec<Vec<f64>> = Vec::new();
    let mut remaining: Vec<bool> = vec![true; m];
    loop {
        let pivot = (0..m)
            .filter(|&i| remaining[i])
            .max_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(b.cmp(&a)));
        let Some(p) = pivot else { break };
        if diag[p] <= threshold {
            break;
        }
        let d = diag[p].sqrt();
        let mut col = vec![0.0; m];
        for i in 0..m {
            if !remaining[i] {
                continue;
            }
            let mut s = g[i * m + p];
            for prev in &l_cols {
                s -= prev[i] * prev[p];
            }
            col[i] = s / d;
        }
        remaining[p] = false;
        for i in 0..m {
            if remaining[i] {
                diag[i] -= col[i] * col[i];
            }
        }
        chosen.push(p);
        l_cols.push(col);
    }

    let mut kept = chosen.clone();
    kept.sort_unstable();
    let removed: Vec<usize> = (0..m).filter(|i| !kept.contains(i)).collect();

    let mut inconsistency = None;
    if !removed.is_empty() {
        let r = kept.len();
        let gkk: Vec<f64> = kept
            .iter()
            .flat_map(|&i| kept.iter().map(move |&j| (i, j)))
            .map(|(i, j)| g[i * m + j])
            .collect();
        let bmax = inst.constraints.iter().fold(0.0f64, |s, c| s.max(c.rhs.abs()));
        let chol = if r == 0 {
            Some(Vec::new())
        } else {
            real::cholesky(&gkk, r)
        };
        if let Some(l) = chol {
            for &j in &removed {
                let mut coef: Vec<f64> = kept.iter().map(|&i| g[i * m + j]).collect();
                if r > 0 {
                    real::cholesky_solve(&l, r, &mut coef);
                }
                let predicted: f64 = kept.iter().zip(&coef).map(|(&i, c)| c * inst.constraints[i].rhs).sum();
                let mismatch = inst.constraints[j].rhs - predicted;
                if mismatch.abs() > 1e-8 * (1.0 + bmax) {
                    let mut y = vec![0.0; m];
                    y[j] = 1.0 / mismatch;
                    for (&i, c) in kept.iter().zip(&coef) {
                        y[i] = -c / mismatch;
                    }
                    inconsistency = Some(y);
                    break;
                }
            }
        }
    }

    let reduced = SdpInstance {
        constraints: kept
            .iter()
            .map(|&i| inst.constraints[i].clone())
            .collect::<Vec<Constraint>>(),
        ..inst.clone()
    };
    Preprocessed {
        reduced,
        kept,
        removed,
        inconsistency,
    }
}
