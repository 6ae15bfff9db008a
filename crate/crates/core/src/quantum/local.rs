use serde::{Deserialize, Serialize};

use super::CorrelationTable;
use crate::error::{Error, Result};
use crate::sdp::{solve_sdp, LinearForm, SdpInstance, SdpOptions, SdpStatus, Sense};

/// Default cap on deterministic strategies per party (`m^k`).
pub const DEFAULT_VERTEX_CAP: usize = 256;

/// Reconstruction tolerance for a local model.
const MODEL_TOL: f64 = 1e-8;

/// Outcome assignment `s[x]` for every setting, decoded from a mixed-radix
/// strategy code.
fn strategy(code: usize, k: usize, m: usize) -> Vec<usize> {
    let mut s = vec![0; k];
    let mut c = code;
    for slot in s.iter_mut().rev() {
        *slot = c % m;
        c /= m;
    }
    s
}

/// Table of the deterministic strategy pair `(sa, sb)`.
pub fn deterministic_table(sa: &[usize], sb: &[usize], ma: usize, mb: usize) -> Result<CorrelationTable> {
    if sa.iter().any(|&a| a >= ma) || sb.iter().any(|&b| b >= mb) {
        return Err(Error::InvalidIndex("strategy outcome out of range".into()));
    }
    CorrelationTable::from_fn(sa.len(), sb.len(), ma, mb, |a, b, x, y| {
        if sa[x] == a && sb[y] == b {
            1.0
        } else {
            0.0
        }
    })
}

/// Convex weights over deterministic strategy pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    /// `(alice strategy, bob strategy, weight)` with weight above `1e-12`.
    pub weights: Vec<(Vec<usize>, Vec<usize>, f64)>,
    /// Largest entrywise deviation of the mixture from the input table.
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LocalityVerdict {
    Local {
        model: LocalModel,
        visibility: f64,
    },
    Nonlocal {
        /// `beta[a][b][x][y]`, normalized so the local bound is 0 up to
        /// solver accuracy.
        functional: Vec<Vec<Vec<Vec<f64>>>>,
        /// `max_lambda beta . D_lambda` over all deterministic pairs.
        local_bound: f64,
        /// `beta . P`
        value: f64,
        /// `value - local_bound`
        margin: f64,
        /// Largest `v` with `v P + (1 - v) U` local (`U` uniform).
        visibility: f64,
    },
}

impl LocalityVerdict {
    pub fn is_local(&self) -> bool {
        matches!(self, LocalityVerdict::Local { .. })
    }
}

/// Decides whether `P` is a mixture of deterministic strategies.
///
/// LP over strategy weights `q` and visibility `v`: maximize `v` subject to
/// `sum q_l D_l = v P + (1 - v) U`, `v <= 1`. `P` is local iff `v* = 1`;
/// otherwise the dual vector separates `P` from the local polytope.
pub fn local_membership(p: &CorrelationTable, vertex_cap: usize, opts: &SdpOptions) -> Result<LocalityVerdict> {
    p.validate()?;
    let (ka, kb, ma, mb) = (p.ka, p.kb, p.ma, p.mb);
    let count = |m: usize, k: usize| m.checked_pow(k as u32).filter(|&n| n <= vertex_cap);
    let na = count(ma, ka).ok_or(Error::ResourceLimit {
        what: "deterministic strategies for Alice",
        needed: ma.saturating_pow(ka as u32),
        cap: vertex_cap,
    })?;
    let nb = count(mb, kb).ok_or(Error::ResourceLimit {
        what: "deterministic strategies for Bob",
        needed: mb.saturating_pow(kb as u32),
        cap: vertex_cap,
    })?;
    let sa: Vec<Vec<usize>> = (0..na).map(|c| strategy(c, ka, ma)).collect();
    let sb: Vec<Vec<usize>> = (0..nb).map(|c| strategy(c, kb, mb)).collect();
    let coord = |a: usize, b: usize, x: usize, y: usize| ((a * mb + b) * ka + x) * kb + y;
    let ncoord = ka * kb * ma * mb;
    let u = 1.0 / (ma * mb) as f64;
    let nq = na * nb;
    let (v_var, s_var) = (nq, nq + 1);

    let mut inst = SdpInstance::new(0, nq + 2, Sense::Maximize);
    inst.objective = LinearForm::default().with_lp(v_var, 1.0);
    let mut rows = vec![LinearForm::default(); ncoord];
    for (ia, alice) in sa.iter().enumerate() {
        for (ib, bob) in sb.iter().enumerate() {
            for x in 0..ka {
                for y in 0..kb {
                    rows[coord(alice[x], bob[y], x, y)].add_lp(ia * nb + ib, 1.0);
                }
            }
        }
    }
    for a in 0..ma {
        for b in 0..mb {
            for x in 0..ka {
                for y in 0..kb {
                    let t = coord(a, b, x, y);
                    let mut form = std::mem::take(&mut rows[t]);
                    form.add_lp(v_var, -(p.get(a, b, x, y) - u));
                    inst.add_constraint(form, u);
                }
            }
        }
    }
    inst.add_constraint(LinearForm::default().with_lp(v_var, 1.0).with_lp(s_var, 1.0), 1.0);

    let res = solve_sdp(&inst, opts)?;
    if res.status != SdpStatus::Optimal {
        return Err(Error::Numerical(format!(
            "locality LP ended with status {:?}",
            res.status
        )));
    }
    let v = res.x_lp[v_var];

    if v >= 1.0 - MODEL_TOL {
        // Renormalize the weights and report the exact mixture error.
        let total: f64 = res.x_lp[..nq].iter().map(|w| w.max(0.0)).sum();
        let mut weights = Vec::new();
        let mut mix = vec![0.0; ncoord];
        for (ia, alice) in sa.iter().enumerate() {
            for (ib, bob) in sb.iter().enumerate() {
                let w = res.x_lp[ia * nb + ib].max(0.0) / total;
                for x in 0..ka {
                    for y in 0..kb {
                        mix[coord(alice[x], bob[y], x, y)] += w;
                    }
                }
                if w > 1e-12 {
                    weights.push((alice.clone(), bob.clone(), w));
                }
            }
        }
        let reconstruction_error = mix
            .iter()
            .zip(p.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if reconstruction_error > MODEL_TOL {
            return Err(Error::Numerical(format!(
                "local model reproduces the table only within {reconstruction_error:.3e}"
            )));
        }
        return Ok(LocalityVerdict::Local {
            model: LocalModel {
                weights,
                reconstruction_error,
            },
            visibility: v.min(1.0),
        });
    }

    let beta: Vec<f64> = res.y[..ncoord].iter().map(|y| -y).collect();
    let score = |alice: &[usize], bob: &[usize]| -> f64 {
        let mut s = 0.0;
        for x in 0..ka {
            for y in 0..kb {
                s += beta[coord(alice[x], bob[y], x, y)];
            }
        }
        s
    };
    let local_bound = sa
        .iter()
        .flat_map(|alice| sb.iter().map(move |bob| (alice, bob)))
        .map(|(alice, bob)| score(alice, bob))
        .fold(f64::NEG_INFINITY, f64::max);
    let value: f64 = beta.iter().zip(p.values()).map(|(b, q)| b * q).sum();
    let functional = (0..ma)
        .map(|a| {
            (0..mb)
                .map(|b| {
                    (0..ka)
                        .map(|x| (0..kb).map(|y| beta[coord(a, b, x, y)]).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(LocalityVerdict::Nonlocal {
        functional,
        local_bound,
        value,
        margin: value - local_bound,
        visibility: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{correlations_tensor, MeasurementFamily, StateVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(p: &CorrelationTable) -> LocalityVerdict {
        local_membership(p, DEFAULT_VERTEX_CAP, &SdpOptions::default()).unwrap()
    }

    #[test]
    fn product_tables_are_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sa = StateVector::random(&mut rng, 2);
        let sb = StateVector::random(&mut rng, 2);
        let a = MeasurementFamily::random_povm(&mut rng, 2, 2, 3);
        let b = MeasurementFamily::random_povm(&mut rng, 2, 3, 2);
        let t = correlations_tensor(&sa.tensor(&sb), &a, &b).unwrap();
        match run(&t) {
            LocalityVerdict::Local { model, .. } => {
                assert!(model.reconstruction_error < 1e-8);
                let total: f64 = model.weights.iter().map(|w| w.2).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            other => panic!("expected local, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_is_local() {
        let d = deterministic_table(&[1, 0], &[0, 1, 1], 2, 2).unwrap();
        assert!(run(&d).is_local());
        assert!(deterministic_table(&[2], &[0], 2, 2).is_err());
    }

    #[test]
    fn pr_box_is_separated_by_chsh() {
        let v = run(&CorrelationTable::pr_box());
        let LocalityVerdict::Nonlocal {
            functional,
            local_bound,
            value,
            margin,
            visibility,
        } = v
        else {
            panic!("PR box reported local");
        };
        assert!(margin > 0.1);
        assert!((margin - (value - local_bound)).abs() < 1e-12);
        // Best visibility is 1/2 (CHSH 4 v = 2).
        assert!((visibility - 0.5).abs() < 1e-6);
        // The functional is CHSH-like: it rewards a xor b = x y.
        let mut reward = 0.0;
        let mut penalty = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        if (a ^ b) == (x & y) {
                            reward += functional[a][b][x][y];
                        } else {
                            penalty += functional[a][b][x][y];
                        }
                    }
                }
            }
        }
        assert!(reward > penalty);
    }

    #[test]
    fn vertex_cap() {
        let t = CorrelationTable::uniform(6, 2, 3, 2);
        let err = local_membership(&t, DEFAULT_VERTEX_CAP, &SdpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { needed: 729, .. }));
    }
}
