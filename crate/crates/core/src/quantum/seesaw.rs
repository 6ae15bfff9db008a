use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{steering_extract, MeasurementFamily, StateVector, SteeringData};
use crate::algebra::BellFunctional;
use crate::error::{Error, Result};
use crate::linalg::{self, partial_trace, ComplexMatrix, C64};
use crate::par::{self, Execution};
use crate::sdp::{solve_sdp, LinearForm, SdpInstance, SdpOptions, SdpStatus, Sense};

const HERMITIAN_TOL: f64 = 1e-12;

/// Verifier observables `v[x][a]` and `w[y][b]` on `C^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameRepr", into = "GameRepr")]
pub struct SteeringGame {
    d: usize,
    v: Vec<Vec<ComplexMatrix>>,
    w: Vec<Vec<ComplexMatrix>>,
}

#[derive(Serialize, Deserialize)]
struct GameRepr {
    d: usize,
    #[serde(alias = "V")]
    v: Vec<Vec<ComplexMatrix>>,
    #[serde(alias = "W")]
    w: Vec<Vec<ComplexMatrix>>,
}

impl TryFrom<GameRepr> for SteeringGame {
    type Error = Error;

    fn try_from(r: GameRepr) -> Result<Self> {
        SteeringGame::new(r.d, r.v, r.w)
    }
}

impl From<SteeringGame> for GameRepr {
    fn from(g: SteeringGame) -> Self {
        GameRepr { d: g.d, v: g.v, w: g.w }
    }
}

impl SteeringGame {
    pub fn new(d: usize, v: Vec<Vec<ComplexMatrix>>, w: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("verifier dimension 0".into()));
        }
        for (name, fam) in [("V", &v), ("W", &w)] {
            if fam.is_empty() || fam[0].is_empty() || fam.iter().any(|s| s.len() != fam[0].len()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} needs a rectangular nonempty k x m array"
                )));
            }
            for (x, setting) in fam.iter().enumerate() {
                for (a, m) in setting.iter().enumerate() {
                    if m.rows() != d || m.cols() != d {
                        return Err(Error::DimensionMismatch(format!("{name}[{x}][{a}] is not {d}x{d}")));
                    }
                    let dev = m.hermitian_deviation();
                    if dev > HERMITIAN_TOL {
                        return Err(Error::NotHermitian { deviation: dev });
                    }
                }
            }
        }
        Ok(SteeringGame { d, v, w })
    }

    /// Game with Hermitian observables of i.i.d. Gaussian entries.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize, m: usize) -> Self {
        let mut fam = || -> Vec<Vec<ComplexMatrix>> {
            (0..k)
                .map(|_| (0..m).map(|_| linalg::random_hermitian(rng, d)).collect())
                .collect()
        };
        let v = fam();
        let w = fam();
        SteeringGame { d, v, w }
    }

    /// Every observable the identity.
    pub fn trivial(d: usize, k: usize, m: usize) -> Self {
        let fam = vec![vec![ComplexMatrix::identity(d); m]; k];
        SteeringGame {
            d,
            v: fam.clone(),
            w: fam,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ka(&self) -> usize {
        self.v.len()
    }

    pub fn kb(&self) -> usize {
        self.w.len()
    }

    pub fn ma(&self) -> usize {
        self.v[0].len()
    }

    pub fn mb(&self) -> usize {
        self.w[0].len()
    }

    pub fn v(&self) -> &[Vec<ComplexMatrix>] {
        &self.v
    }

    pub fn w(&self) -> &[Vec<ComplexMatrix>] {
        &self.w
    }

    /// `1 / (ka + kb)`, i.e. `1/2k` for symmetric scenarios.
    pub fn normalization(&self) -> f64 {
        1.0 / (self.ka() + self.kb()) as f64
    }

    /// `(1/2k)(sum tr(alpha V) + sum tr(beta W))` on bipartite steering data.
    pub fn evaluate(&self, sd: &SteeringData) -> Result<f64> {
        let beta = sd
            .beta()
            .ok_or_else(|| Error::InvalidSteeringData("game evaluation needs bipartite data".into()))?;
        if sd.d() != self.d
            || sd.settings() != self.ka()
            || sd.outcomes() != self.ma()
            || beta.len() != self.kb()
            || beta[0].len() != self.mb()
        {
            return Err(Error::DimensionMismatch(
                "steering data and game have different scenarios".into(),
            ));
        }
        let mut total = 0.0;
        for (fam, obs) in [(sd.alpha(), &self.v), (beta, &self.w)] {
            for (sx, ox) in fam.iter().zip(obs.iter()) {
                for (s, o) in sx.iter().zip(ox) {
                    total += s.trace_product(o).re;
                }
            }
        }
        Ok(total * self.normalization())
    }

    /// `(1/2k)(sum_x max_a V^x_a + sum_y max_b W^y_b)`, the value at `d = 1`.
    pub fn closed_form_d1(&self) -> Option<f64> {
        if self.d != 1 {
            return None;
        }
        let best = |fam: &[Vec<ComplexMatrix>]| -> f64 {
            fam.iter()
                .map(|s| s.iter().map(|m| m[(0, 0)].re).fold(f64::NEG_INFINITY, f64::max))
                .sum()
        };
        Some((best(&self.v) + best(&self.w)) * self.normalization())
    }

    /// `G = (1/2k)(sum V^x_a (x) A^x_a (x) 1 + sum W^y_b (x) 1 (x) B^y_b)`.
    pub fn operator(&self, alice: &MeasurementFamily, bob: &MeasurementFamily) -> Result<ComplexMatrix> {
        self.check_families(alice, bob)?;
        let (da, db) = (alice.dim(), bob.dim());
        let (ia, ib) = (ComplexMatrix::identity(da), ComplexMatrix::identity(db));
        let n = self.d * da * db;
        let mut g = ComplexMatrix::zeros(n, n);
        for x in 0..self.ka() {
            for a in 0..self.ma() {
                g = &g + &self.v[x][a].kron(alice.element(x, a)).kron(&ib);
            }
        }
        for y in 0..self.kb() {
            for b in 0..self.mb() {
                g = &g + &self.w[y][b].kron(&ia).kron(bob.element(y, b));
            }
        }
        Ok(g.scale_real(self.normalization()).hermitian_part())
    }

    fn check_families(&self, alice: &MeasurementFamily, bob: &MeasurementFamily) -> Result<()> {
        if alice.settings() != self.ka()
            || alice.outcomes() != self.ma()
            || bob.settings() != self.kb()
            || bob.outcomes() != self.mb()
        {
            return Err(Error::DimensionMismatch(
                "families do not match the game's scenario".into(),
            ));
        }
        Ok(())
    }

    /// Game value of a pure tripartite realization, computed through its
    /// steering data.
    pub fn realization_value(
        &self,
        state: &StateVector,
        alice: &MeasurementFamily,
        bob: &MeasurementFamily,
    ) -> Result<f64> {
        self.check_families(alice, bob)?;
        self.evaluate(&steering_extract(&state.density(), alice, bob)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeesawOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once a full sweep improves the objective by less than this.
    pub tol: f64,
    pub seed: u64,
    pub execution: Execution,
    pub sdp: SdpOptions,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        SeesawOptions {
            restarts: 10,
            max_iter: 500,
            tol: 1e-13,
            seed: 0,
            execution: Execution::Parallel,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawResult {
    /// Best objective over all restarts; a lower bound on the optimum.
    pub value: f64,
    pub state: StateVector,
    pub alice: MeasurementFamily,
    pub bob: MeasurementFamily,
    /// Objective after every sweep of the best restart.
    pub history: Vec<f64>,
    /// Final objective of every restart, in seed order.
    pub restart_values: Vec<f64>,
    /// Whether every restart's history was nondecreasing.
    pub monotone: bool,
}

/// POVM maximizing `sum_a tr(M_a A_a)` for Hermitian `M_a`.
///
/// Two outcomes: the projector onto the positive part of `M_0 - M_1`.
/// Otherwise an SDP over the real embeddings of the `A_a` arranged on a
/// block diagonal.
pub fn optimal_povm(ms: &[ComplexMatrix], opts: &SdpOptions) -> Result<Vec<ComplexMatrix>> {
    let m = ms.len();
    if m == 0 {
        return Err(Error::InvalidArgument("no outcomes".into()));
    }
    let dim = ms[0].rows();
    if m == 1 {
        return Ok(vec![ComplexMatrix::identity(dim)]);
    }
    if m == 2 {
        let diff = (&ms[0] - &ms[1]).hermitian_part();
        let p = diff.hermitian_function(|l| if l > 0.0 { 1.0 } else { 0.0 })?;
        let q = &ComplexMatrix::identity(dim) - &p;
        return Ok(vec![p, q]);
    }
    let e = 2 * dim;
    let n = m * e;
    let mut inst = SdpInstance::new(n, 0, Sense::Maximize);
    let mut objective = LinearForm::default();
    for (a, mat) in ms.iter().enumerate() {
        let h = mat.hermitian_part();
        let base = a * e;
        // <emb(H), Z> / 2 with emb(H) = [[Re, -Im], [Im, Re]].
        for i in 0..dim {
            for j in i..dim {
                let (re, im) = (h[(i, j)].re, h[(i, j)].im);
                objective.add_psd(base + i, base + j, 0.5 * re);
                objective.add_psd(base + dim + i, base + dim + j, 0.5 * re);
                if i != j {
                    objective.add_psd(base + dim + i, base + j, 0.5 * im);
                    objective.add_psd(base + dim + j, base + i, -0.5 * im);
                }
            }
        }
    }
    inst.objective = objective;
    for i in 0..e {
        for j in i..e {
            let mut f = LinearForm::default();
            for a in 0..m {
                f.add_psd(a * e + i, a * e + j, 1.0);
            }
            inst.add_constraint(f, if i == j { 1.0 } else { 0.0 });
        }
    }
    let res = solve_sdp(&inst, opts)?;
    if !matches!(res.status, SdpStatus::Optimal | SdpStatus::MaxIter) {
        return Err(Error::Numerical(format!(
            "POVM subproblem ended with status {:?}",
            res.status
        )));
    }
    let z = |r: usize, c: usize| res.x[r * n + c];
    let mut out: Vec<ComplexMatrix> = (0..m)
        .map(|a| {
            let b = a * e;
            ComplexMatrix::from_fn(dim, dim, |i, j| {
                let re = 0.5 * (z(b + i, b + j) + z(b + dim + i, b + dim + j));
                let im = 0.5 * (z(b + dim + i, b + j) - z(b + i, b + dim + j));
                C64::new(re, im)
            })
            .hermitian_part()
        })
        .collect();
    repair_povm(&mut out)?;
    Ok(out)
}

/// Clips negative eigenvalues and restores completeness by congruence.
fn repair_povm(elements: &mut [ComplexMatrix]) -> Result<()> {
    let dim = elements[0].rows();
    for e in elements.iter_mut() {
        *e = e.hermitian_function(|l| l.max(0.0))?;
    }
    let total = elements.iter().fold(ComplexMatrix::zeros(dim, dim), |s, m| &s + m);
    let s = total.hermitian_function(|l| 1.0 / l.max(1e-300).sqrt())?;
    for e in elements.iter_mut() {
        *e = s.matmul(e).matmul(&s).hermitian_part();
    }
    let total = elements.iter().fold(ComplexMatrix::zeros(dim, dim), |s, m| &s + m);
    let fix = &ComplexMatrix::identity(dim) - &total;
    let last = elements.len() - 1;
    elements[last] = &elements[last] + &fix;
    Ok(())
}

fn top_eigenvector(h: &ComplexMatrix) -> Result<StateVector> {
    let eig = h.eigh()?;
    StateVector::normalized(eig.vector(h.rows() - 1))
}

/// `M_{xa} = Tr_rest[(O_{xa}) rho]` restricted to subsystem `keep`.
fn effective_ops(
    rho: &ComplexMatrix,
    dims: &[usize],
    keep: usize,
    ops: &[Vec<ComplexMatrix>],
) -> Result<Vec<Vec<ComplexMatrix>>> {
    ops.iter()
        .map(|s| {
            s.iter()
                .map(|o| Ok(partial_trace(&o.matmul(rho), dims, &[keep])?.hermitian_part()))
                .collect()
        })
        .collect()
}

fn best_response(effective: &[Vec<ComplexMatrix>], opts: &SdpOptions) -> Result<MeasurementFamily> {
    let elements = effective
        .iter()
        .map(|ms| optimal_povm(ms, opts))
        .collect::<Result<Vec<_>>>()?;
    MeasurementFamily::new(elements)
}

fn objective_on(g: &ComplexMatrix, psi: &StateVector) -> f64 {
    psi.expectation(g).re
}

/// One alternating run: abstracts the operator builder and the two effective
/// operator maps shared by games and Bell functionals.
struct Problem<'a> {
    dims: [usize; 3],
    operator: &'a (dyn Fn(&MeasurementFamily, &MeasurementFamily) -> Result<ComplexMatrix> + Sync),
    alice_ops: &'a (dyn Fn(&MeasurementFamily) -> Vec<Vec<ComplexMatrix>> + Sync),
    bob_ops: &'a (dyn Fn(&MeasurementFamily) -> Vec<Vec<ComplexMatrix>> + Sync),
    alice_slot: usize,
    bob_slot: usize,
    shape: [usize; 4],
}

struct Run {
    value: f64,
    state: StateVector,
    alice: MeasurementFamily,
    bob: MeasurementFamily,
    history: Vec<f64>,
}

fn run_once(p: &Problem<'_>, seed: u64, opts: &SeesawOptions) -> Result<Run> {
    let [ka, ma, kb, mb] = p.shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alice = MeasurementFamily::random_projective(&mut rng, p.dims[p.alice_slot], ka, ma);
    let mut bob = MeasurementFamily::random_projective(&mut rng, p.dims[p.bob_slot], kb, mb);
    let mut g = (p.operator)(&alice, &bob)?;
    let mut state = top_eigenvector(&g)?;
    let mut value = objective_on(&g, &state);
    let mut history = vec![value];
    for _ in 0..opts.max_iter {
        let start = value;
        let rho = state.density();

        let fixed: Vec<Vec<ComplexMatrix>> = (p.alice_ops)(&bob);
        let eff = effective_ops(&rho, &p.dims, p.alice_slot, &fixed)?;
        let cand = best_response(&eff, &opts.sdp)?;
        let g_cand = (p.operator)(&cand, &bob)?;
        let v_cand = objective_on(&g_cand, &state);
        if v_cand > value {
            alice = cand;
            g = g_cand;
            value = v_cand;
        }

        let fixed: Vec<Vec<ComplexMatrix>> = (p.bob_ops)(&alice);
        let eff = effective_ops(&rho, &p.dims, p.bob_slot, &fixed)?;
        let cand = best_response(&eff, &opts.sdp)?;
        let g_cand = (p.operator)(&alice, &cand)?;
        let v_cand = objective_on(&g_cand, &state);
        if v_cand > value {
            bob = cand;
            g = g_cand;
            value = v_cand;
        }

        let cand_state = top_eigenvector(&g)?;
        let v_cand = objective_on(&g, &cand_state);
        if v_cand > value {
            state = cand_state;
            value = v_cand;
        }
        history.push(value);
        if value - start < opts.tol * (1.0 + value.abs()) {
            break;
        }
    }
    Ok(Run {
        value,
        state,
        alice,
        bob,
        history,
    })
}

fn run_restarts(p: &Problem<'_>, opts: &SeesawOptions) -> Result<SeesawResult> {
    let seeds: Vec<u64> = (0..opts.restarts.max(1) as u64)
        .map(|r| opts.seed.wrapping_add(r))
        .collect();
    let runs = par::map(opts.execution, &seeds, |&s| run_once(p, s, opts));
    let runs = runs.into_iter().collect::<Result<Vec<Run>>>()?;
    let monotone = runs.iter().all(|r| r.history.windows(2).all(|w| w[1] >= w[0]));
    let restart_values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let best = runs
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    Ok(SeesawResult {
        value: best.value,
        state: best.state,
        alice: best.alice,
        bob: best.bob,
        history: best.history,
        restart_values,
        monotone,
    })
}

/// See-saw lower bound on the tensor-product value of a steering game with
/// prover dimensions `da`, `db`.
pub fn game_value_seesaw(game: &SteeringGame, da: usize, db: usize, opts: &SeesawOptions) -> Result<SeesawResult> {
    if da == 0 || db == 0 {
        return Err(Error::InvalidArgument("prover dimensions must be positive".into()));
    }
    let d = game.d();
    let norm = game.normalization();
    let (ia, ib) = (ComplexMatrix::identity(da), ComplexMatrix::identity(db));
    let operator = |a: &MeasurementFamily, b: &MeasurementFamily| game.operator(a, b);
    // Alice's coefficient of A^x_a is V^x_a (x) 1 (x) 1, independent of Bob.
    let alice_ops = |_: &MeasurementFamily| -> Vec<Vec<ComplexMatrix>> {
        game.v()
            .iter()
            .map(|s| s.iter().map(|v| v.kron(&ia).kron(&ib).scale_real(norm)).collect())
            .collect()
    };
    let bob_ops = |_: &MeasurementFamily| -> Vec<Vec<ComplexMatrix>> {
        game.w()
            .iter()
            .map(|s| s.iter().map(|w| w.kron(&ia).kron(&ib).scale_real(norm)).collect())
            .collect()
    };
    let problem = Problem {
        dims: [d, da, db],
        operator: &operator,
        alice_ops: &alice_ops,
        bob_ops: &bob_ops,
        alice_slot: 1,
        bob_slot: 2,
        shape: [game.ka(), game.ma(), game.kb(), game.mb()],
    };
    run_restarts(&problem, opts)
}

/// See-saw lower bound on `max <psi, sum c A (x) B psi>` over `C^{da} (x) C^{db}`.
pub fn bell_seesaw(functional: &BellFunctional, da: usize, db: usize, opts: &SeesawOptions) -> Result<SeesawResult> {
    if da == 0 || db == 0 {
        return Err(Error::InvalidArgument("party dimensions must be positive".into()));
    }
    let (ka, kb, m) = (functional.ka, functional.kb, functional.m);
    let (ia, ib) = (ComplexMatrix::identity(da), ComplexMatrix::identity(db));
    let operator = |a: &MeasurementFamily, b: &MeasurementFamily| -> Result<ComplexMatrix> {
        let n = da * db;
        let mut g = ComplexMatrix::zeros(n, n);
        for x in 0..ka {
            for y in 0..kb {
                for oa in 0..m {
                    for ob in 0..m {
                        let c = functional.get(oa, ob, x, y);
                        if c != 0.0 {
                            g = &g + &a.element(x, oa).kron(b.element(y, ob)).scale_real(c);
                        }
                    }
                }
            }
        }
        Ok(g.hermitian_part())
    };
    // Coefficient of A^x_a: 1 (x) sum_{y,b} c B^y_b.
    let alice_ops = |b: &MeasurementFamily| -> Vec<Vec<ComplexMatrix>> {
        (0..ka)
            .map(|x| {
                (0..m)
                    .map(|oa| {
                        let mut acc = ComplexMatrix::zeros(db, db);
                        for y in 0..kb {
                            for ob in 0..m {
                                acc = &acc + &b.element(y, ob).scale_real(functional.get(oa, ob, x, y));
                            }
                        }
                        ia.kron(&acc)
                    })
                    .collect()
            })
            .collect()
    };
    let bob_ops = |a: &MeasurementFamily| -> Vec<Vec<ComplexMatrix>> {
        (0..kb)
            .map(|y| {
                (0..m)
                    .map(|ob| {
                        let mut acc = ComplexMatrix::zeros(da, da);
                        for x in 0..ka {
                            for oa in 0..m {
                                acc = &acc + &a.element(x, oa).scale_real(functional.get(oa, ob, x, y));
                            }
                        }
                        acc.kron(&ib)
                    })
                    .collect()
            })
            .collect()
    };
    let problem = Problem {
        dims: [1, da, db],
        operator: &operator,
        alice_ops: &alice_ops,
        bob_ops: &bob_ops,
        alice_slot: 1,
        bob_slot: 2,
        shape: [ka, m, kb, m],
    };
    run_restarts(&problem, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SeesawOptions {
        SeesawOptions {
            restarts: 4,
            ..SeesawOptions::default()
        }
    }

    #[test]
    fn chsh_reaches_tsirelson() {
        let r = bell_seesaw(&BellFunctional::chsh(), 2, 2, &SeesawOptions::default()).unwrap();
        assert!(r.value >= 2.0 * std::f64::consts::SQRT_2 - 1e-6, "{}", r.value);
        assert!(r.value <= 2.0 * std::f64::consts::SQRT_2 + 1e-9);
        assert!(r.monotone);
    }

    #[test]
    fn trivial_game_has_value_one() {
        for k in 1..=3 {
            let g = SteeringGame::trivial(2, k, 2);
            let r = game_value_seesaw(&g, 2, 2, &quick()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn one_dimensional_verifier_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for m in 2..=3 {
            let g = SteeringGame::random(&mut rng, 1, 2, m);
            let r = game_value_seesaw(&g, 2, 2, &quick()).unwrap();
            let want = g.closed_form_d1().unwrap();
            assert!((r.value - want).abs() < 1e-6, "m={m}: {} vs {want}", r.value);
        }
    }

    #[test]
    fn objective_matches_steering_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = SteeringGame::random(&mut rng, 2, 2, 3);
        let r = game_value_seesaw(&g, 2, 2, &quick()).unwrap();
        assert!(r.monotone);
        let again = g.realization_value(&r.state, &r.alice, &r.bob).unwrap();
        assert!((again - r.value).abs() < 1e-10);
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn optimal_povm_matches_two_outcome_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ms: Vec<ComplexMatrix> = (0..3).map(|_| linalg::random_hermitian(&mut rng, 2)).collect();
        let povm = optimal_povm(&ms, &SdpOptions::default()).unwrap();
        let value: f64 = ms.iter().zip(&povm).map(|(m, a)| m.trace_product(a).re).sum();
        // Any random POVM does no better.
        for _ in 0..50 {
            let fam = MeasurementFamily::random_povm(&mut rng, 2, 1, 3);
            let other: f64 = (0..3).map(|a| ms[a].trace_product(fam.element(0, a)).re).sum();
            assert!(other <= value + 1e-7);
        }
        // Pure projective candidates: one outcome per eigenvector pair.
        let fam = MeasurementFamily::new(vec![povm]).unwrap();
        assert_eq!(fam.outcomes(), 3);
        // Degenerate three-outcome problem reduces to the two-outcome rule.
        let zero = ComplexMatrix::zeros(2, 2);
        let a = &ms[0] + &ComplexMatrix::identity(2).scale_real(10.0);
        let b = &ms[1] + &ComplexMatrix::identity(2).scale_real(10.0);
        let three = optimal_povm(&[a.clone(), b.clone(), zero], &SdpOptions::default()).unwrap();
        let two = optimal_povm(&[a.clone(), b.clone()], &SdpOptions::default()).unwrap();
        let v3 = a.trace_product(&three[0]).re + b.trace_product(&three[1]).re;
        let v2 = a.trace_product(&two[0]).re + b.trace_product(&two[1]).re;
        assert!((v3 - v2).abs() < 1e-7, "{v3} vs {v2}");
        // Complex three-outcome optimum attains the SDP value.
        let exact: f64 = ms
            .iter()
            .zip(&optimal_povm(&ms, &SdpOptions::default()).unwrap())
            .map(|(m, a)| m.trace_product(a).re)
            .sum();
        assert!((exact - value).abs() < 1e-9);
    }

    #[test]
    fn game_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let g = SteeringGame::random(&mut rng, 2, 2, 2);
        let back: SteeringGame = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"d":1,"v":[[[[[0.0,1.0]]]]],"w":[[[[[1.0,0.0]]]]]}"#;
        assert!(serde_json::from_str::<SteeringGame>(bad).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let g = SteeringGame::random(&mut ChaCha8Rng::seed_from_u64(45), 2, 2, 2);
        let mut o = quick();
        let par = game_value_seesaw(&g, 2, 2, &o).unwrap();
        o.execution = Execution::Sequential;
        let seq = game_value_seesaw(&g, 2, 2, &o).unwrap();
        assert_eq!(par.value, seq.value);
        assert_eq!(par.restart_values, seq.restart_values);
    }
}
