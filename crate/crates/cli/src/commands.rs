use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use corrkit::algebra::BellFunctional;
use corrkit::config::{OutputFormat, RunConfig, CONFIG_ENV};
use corrkit::group::{check_freeness, FreeWitness, FreenessReport, Signature};
use corrkit::linalg::ComplexMatrix;
use corrkit::norms::{
    estimate_norm, norm_convergence_scan, NormElement, NormEstimate, RepKind, StartVector, TruncatedRep,
};
use corrkit::npa::{self, Level, MomentProblem, NpaStatus, SdpSolution};
use corrkit::par::Execution;
use corrkit::quantum::{
    apply_kraus, bell_seesaw, choi_matrix, correlations_tensor, game_value_seesaw, hardy_check, local_membership,
    naimark_dilate, random_steering_data, random_ucp_kraus, steering_extract_single, steering_realize,
    stinespring_dilate, wstate_coarse_table, wstate_realization, CorrelationTable, HardyReport, LocalityVerdict,
    MeasurementFamily, NaimarkDilation, StateVector, SteeringData, SteeringGame, SteeringRealization,
    StinespringDilation, WStateTable, GAMMA_MINUS, GAMMA_PLUS,
};

use crate::args::*;
use crate::input::{read_json, write_json};
use crate::output::{render, Outcome};

type Res<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let config = match load_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match dispatch(cli.command, &config) {
        Ok(outcome) => {
            print!("{}", render(&outcome, &config));
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn load_config(g: &GlobalArgs) -> Res<RunConfig> {
    let path = g
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(Into::into));
    let mut c: RunConfig = match path {
        Some(p) => read_json(&p).map_err(|e| format!("config {e}"))?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(f) = g.format {
        c.format = match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Table => OutputFormat::Table,
        };
    }
    if let Some(t) = g.sdp_tol {
        c.sdp_tol = t;
    }
    if let Some(n) = g.sdp_max_iter {
        c.sdp_max_iter = n;
    }
    if g.sequential {
        c.execution = Execution::Sequential;
    }
    c.validate().map_err(err)?;
    Ok(c)
}

fn dispatch(cmd: Command, c: &RunConfig) -> Res<Outcome> {
    match cmd {
        Command::Wstate { depth } => wstate(depth, c),
        Command::Hardy { table } => hardy(table.as_deref()),
        Command::ChshBound { level, no_seesaw } => chsh_bound(&level, !no_seesaw, c),
        Command::Npa { mode } => npa_cmd(mode, c),
        Command::Local { table } => local(&table, c),
        Command::Steer { data, random } => steer(data.as_deref(), random, c),
        Command::Game { game, da, db, level } => game_cmd(&game, da, db, &level, c),
        Command::Norm { mode } => norm(mode, c),
        Command::FreeCheck {
            witness,
            orders,
            rank,
            max_len,
        } => free_check(witness, orders.as_deref(), rank, max_len, c),
        Command::Dilate { mode } => dilate(mode, c),
    }
}

fn rng(c: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(c.seed)
}

fn level(s: &str) -> Res<Level> {
    s.parse().map_err(err)
}

#[derive(Serialize, Deserialize)]
pub struct SingleShotReport {
    pub table: CorrelationTable,
    /// `(x0, x1, values)` for every pair of Alice settings against Bob's two.
    pub chsh: Vec<(usize, usize, [f64; 8])>,
    pub max_chsh: f64,
    pub locality: LocalityVerdict,
}

#[derive(Serialize, Deserialize)]
pub struct WStateReport {
    pub table: WStateTable,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub max_deviation: f64,
    pub hardy: HardyReport,
}

fn wstate(depth: usize, c: &RunConfig) -> Res<Outcome> {
    match depth {
        1 => {
            let (psi, alice, bob) = wstate_realization();
            let table = correlations_tensor(&psi, &alice, &bob).map_err(err)?;
            let mut chsh = Vec::new();
            for x0 in 0..table.ka {
                for x1 in x0 + 1..table.ka {
                    chsh.push((x0, x1, table.chsh_values([x0, x1], [0, 1])));
                }
            }
            let max_chsh = chsh
                .iter()
                .flat_map(|(_, _, v)| v.iter().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            let locality = local_membership(&table, c.vertex_cap, &c.sdp_options()).map_err(err)?;
            let local = locality.is_local();
            Ok(Outcome::new(
                "wstate",
                &SingleShotReport {
                    table,
                    chsh,
                    max_chsh,
                    locality,
                },
            )?
            .line(format!("max CHSH value {max_chsh:.10}; local model: {local}")))
        }
        2 => {
            let table = wstate_coarse_table().map_err(err)?;
            let hardy = hardy_check(&table).map_err(err)?;
            let text = table.to_string();
            let report = WStateReport {
                max_deviation: table.max_deviation_from_gammas(),
                table,
                gamma_plus: GAMMA_PLUS,
                gamma_minus: GAMMA_MINUS,
                hardy,
            };
            let mut o = Outcome::new("wstate", &report)?;
            for l in text.lines() {
                o = o.line(l);
            }
            Ok(o.line(format!("gamma+ = {GAMMA_PLUS:.10}  gamma- = {GAMMA_MINUS:.10}"))
                .line(format!("Hardy violation = {:.10}", report.hardy.violation)))
        }
        d => Err(format!("--depth must be 1 or 2, got {d}")),
    }
}

fn hardy(path: Option<&Path>) -> Res<Outcome> {
    let table: WStateTable = match path {
        Some(p) => read_json(p)?,
        None => wstate_coarse_table().map_err(err)?,
    };
    let r = hardy_check(&table).map_err(err)?;
    let ok = r.violation > 0.0;
    Ok(Outcome::new("hardy", &r)?.verdict(ok).line(format!(
        "lhs {:.10}  rhs {:.10}  violation {:.10}",
        r.lhs, r.rhs, r.violation
    )))
}

#[derive(Serialize, Deserialize)]
pub struct ChshReport {
    pub level: Level,
    pub status: NpaStatus,
    pub upper_bound: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seesaw_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

fn chsh_bound(lvl: &str, seesaw: bool, c: &RunConfig) -> Res<Outcome> {
    let level = level(lvl)?;
    let f = BellFunctional::chsh();
    let sol = npa::bell_bound(&f, level, &c.npa_options()).map_err(err)?;
    let lower = if seesaw {
        Some(bell_seesaw(&f, 2, 2, &c.seesaw_options()).map_err(err)?.value)
    } else {
        None
    };
    let report = ChshReport {
        level,
        status: sol.status,
        upper_bound: sol.upper_bound,
        objective: sol.objective,
        kkt_residual: sol.kkt_residual(),
        seesaw_lower_bound: lower,
        gap: lower.map(|l| sol.upper_bound - l),
    };
    solution_outcome("chsh-bound", &report, &sol)
        .map(|o| o.line(format!("CHSH upper bound at level {level}: {:.6}", sol.upper_bound)))
}

/// Solver non-convergence is a failure to compute, reported after printing.
fn solution_outcome<T: Serialize>(command: &'static str, report: &T, sol: &SdpSolution) -> Res<Outcome> {
    if sol.status == NpaStatus::MaxIter {
        let out = serde_json::to_string_pretty(report).map_err(err)?;
        println!("{out}");
        return Err(sol.message.clone().unwrap_or_else(|| "solver did not converge".into()));
    }
    Outcome::new(command, report)
}

#[derive(Serialize, Deserialize)]
pub struct ProblemSummary {
    pub kind: npa::ProblemKind,
    pub level: Level,
    pub blocks: usize,
    pub basis_size: usize,
    pub classes: usize,
    pub variables: usize,
    pub zero_cells: usize,
}

impl ProblemSummary {
    fn of(p: &MomentProblem) -> Self {
        ProblemSummary {
            kind: p.kind,
            level: p.level,
            blocks: p.d,
            basis_size: p.basis.len(),
            classes: p.classes.len(),
            variables: p.variables.len(),
            zero_cells: p.zero_cells,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct NpaReport {
    pub problem: ProblemSummary,
    pub solution: SdpSolution,
}

fn load_table(src: &TableSource) -> Res<CorrelationTable> {
    if let Some(p) = &src.table {
        return read_json(p);
    }
    let preset = src.preset.ok_or("either --table or --preset is required")?;
    Ok(match preset {
        TablePreset::PrBox => CorrelationTable::pr_box(),
        TablePreset::Uniform => CorrelationTable::uniform(2, 2, 2, 2),
        TablePreset::Wstate => {
            let (psi, a, b) = wstate_realization();
            correlations_tensor(&psi, &a, &b).map_err(err)?
        }
        TablePreset::WstateCoarse => wstate_coarse_table()
            .and_then(|t| t.as_correlation_table())
            .map_err(err)?,
        TablePreset::TsirelsonChsh => tsirelson_table().map_err(err)?,
    })
}

/// Maximally entangled qubits with the optimal CHSH observables.
fn tsirelson_table() -> corrkit::Result<CorrelationTable> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = ComplexMatrix::diag(&[1.0, -1.0]);
    let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let alice = MeasurementFamily::from_observables(&[z.clone(), x.clone()])?;
    let bob = MeasurementFamily::from_observables(&[(&z + &x).scale_real(s), (&z - &x).scale_real(s)])?;
    correlations_tensor(&StateVector::maximally_entangled(2), &alice, &bob)
}

fn load_game(src: &GameSource, c: &RunConfig) -> Res<SteeringGame> {
    match (&src.game, src.random) {
        (Some(p), _) => read_json(p),
        (None, Some([d, k, m])) => {
            if d == 0 || k == 0 || m == 0 {
                return Err("--random needs positive d,k,m".into());
            }
            Ok(SteeringGame::random(&mut rng(c), d, k, m))
        }
        (None, None) => Err("either --game or --random is required".into()),
    }
}

fn npa_cmd(mode: NpaMode, c: &RunConfig) -> Res<Outcome> {
    let opts = c.npa_options();
    let (problem, out) = match mode {
        NpaMode::Bound {
            functional,
            preset,
            level: l,
            problem_out,
        } => {
            let f = match (functional, preset) {
                (Some(p), _) => read_json(&p)?,
                (None, Some(FunctionalPreset::Chsh)) => BellFunctional::chsh(),
                (None, None) => return Err("either --functional or --preset is required".into()),
            };
            (
                npa::build_bound_problem(&f, level(&l)?, opts.basis_cap).map_err(err)?,
                problem_out,
            )
        }
        NpaMode::Membership {
            table,
            level: l,
            problem_out,
        } => {
            let t = load_table(&table)?;
            (
                npa::build_membership_problem(&t, level(&l)?, opts.basis_cap).map_err(err)?,
                problem_out,
            )
        }
        NpaMode::Game {
            game,
            level: l,
            problem_out,
        } => {
            let g = load_game(&game, c)?;
            (
                npa::build_game_problem(&g, level(&l)?, opts.basis_cap).map_err(err)?,
                problem_out,
            )
        }
    };
    if let Some(p) = out {
        write_json(&p, &problem)?;
    }
    let solution = npa::solve(&problem, &opts).map_err(err)?;
    let report = NpaReport {
        problem: ProblemSummary::of(&problem),
        solution,
    };
    let sol = &report.solution;
    let line = match sol.consistent {
        Some(true) => format!(
            "consistent at level {} (lambda* = {:.3e}); necessary, not sufficient",
            sol.level, sol.objective
        ),
        Some(false) => format!("inconsistent at level {} (lambda* = {:.3e})", sol.level, sol.objective),
        None => format!("optimum {:.10} (upper bound {:.10})", sol.objective, sol.upper_bound),
    };
    let verdict = sol.consistent.unwrap_or(true);
    Ok(solution_outcome("npa", &report, sol)?.verdict(verdict).line(line))
}

fn local(src: &TableSource, c: &RunConfig) -> Res<Outcome> {
    let t = load_table(src)?;
    let v = local_membership(&t, c.vertex_cap, &c.sdp_options()).map_err(err)?;
    let line = match &v {
        LocalityVerdict::Local { model, .. } => format!("local: {} deterministic strategies", model.weights.len()),
        LocalityVerdict::Nonlocal { margin, visibility, .. } => {
            format!("nonlocal: margin {margin:.6}, visibility {visibility:.6}")
        }
    };
    let ok = v.is_local();
    Ok(Outcome::new("local", &v)?.verdict(ok).line(line))
}

#[derive(Serialize, Deserialize)]
pub struct SteerReport {
    pub data: SteeringData,
    pub realization: SteeringRealization,
    pub round_trip_deviation: f64,
}

fn steer(path: Option<&Path>, random: Option<[usize; 3]>, c: &RunConfig) -> Res<Outcome> {
    let data: SteeringData = match (path, random) {
        (Some(p), _) => read_json(p)?,
        (None, Some([d, k, m])) => {
            if d == 0 || k == 0 || m == 0 {
                return Err("--random needs positive d,k,m".into());
            }
            random_steering_data(&mut rng(c), d, k, m)
        }
        (None, None) => return Err("either --data or --random is required".into()),
    };
    let realization = steering_realize(&data).map_err(err)?;
    let back = steering_extract_single(&realization.density(), &realization.family).map_err(err)?;
    let dev = back.max_abs_diff(&data);
    let line = format!(
        "realized on C^{} x C^{}; round-trip deviation {dev:.3e}",
        realization.d, realization.d_prime
    );
    Ok(Outcome::new(
        "steer",
        &SteerReport {
            data,
            realization,
            round_trip_deviation: dev,
        },
    )?
    .line(line))
}

#[derive(Serialize, Deserialize)]
pub struct GameReport {
    pub d: usize,
    pub seesaw_lower_bound: f64,
    pub seesaw_history_len: usize,
    pub npa_upper_bound: f64,
    pub npa_status: NpaStatus,
    pub level: Level,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

fn game_cmd(src: &GameSource, da: usize, db: usize, lvl: &str, c: &RunConfig) -> Res<Outcome> {
    let g = load_game(src, c)?;
    let level = level(lvl)?;
    let lower = game_value_seesaw(&g, da, db, &c.seesaw_options()).map_err(err)?;
    let upper = npa::game_bound(&g, level, &c.npa_options()).map_err(err)?;
    let report = GameReport {
        d: g.d(),
        seesaw_lower_bound: lower.value,
        seesaw_history_len: lower.history.len(),
        npa_upper_bound: upper.upper_bound,
        npa_status: upper.status,
        level,
        gap: upper.upper_bound - lower.value,
        closed_form: g.closed_form_d1(),
    };
    let line = format!("{:.10} <= value <= {:.10}", lower.value, upper.upper_bound);
    Ok(solution_outcome("game", &report, &upper)?.line(line))
}

fn norm_inputs(
    common: &NormCommon,
    c: &RunConfig,
) -> Res<(Signature, RepKind, NormElement, corrkit::norms::NormOptions)> {
    let sig: Signature = common.signature.parse().map_err(err)?;
    let kind = match common.kind {
        KindArg::Left => RepKind::LeftRegular,
        KindArg::Biregular => RepKind::Biregular,
    };
    let el = NormElement::parse(&sig, kind, &common.element).map_err(err)?;
    let mut opts = c.norm_options();
    opts.allow_non_self_adjoint = common.allow_non_self_adjoint;
    if common.random_start {
        opts.start = StartVector::Random { seed: c.seed };
    }
    Ok((sig, kind, el, opts))
}

#[derive(Serialize, Deserialize)]
pub struct NormScanReport {
    pub radii: Vec<usize>,
    pub values: Vec<f64>,
    pub estimates: Vec<NormEstimate>,
}

fn norm(mode: NormMode, c: &RunConfig) -> Res<Outcome> {
    match mode {
        NormMode::Estimate { common, radius } => {
            let (sig, kind, el, opts) = norm_inputs(&common, c)?;
            let rep = TruncatedRep::new(&sig, radius, kind, opts.ball_cap).map_err(err)?;
            let est = estimate_norm(&rep, &el, &opts).map_err(err)?;
            let line = format!(
                "norm estimate {:.10} at radius {radius} ({} basis words, {} iterations)",
                est.value, est.dimension, est.iterations
            );
            let ok = est.converged;
            Ok(Outcome::new("norm", &est)?.verdict(ok).line(line))
        }
        NormMode::Scan { common, radii } => {
            let (sig, kind, el, opts) = norm_inputs(&common, c)?;
            let radii: Vec<usize> = radii
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| format!("bad radius '{t}'")))
                .collect::<Res<_>>()?;
            let scan: Vec<NormEstimate> = norm_convergence_scan(&sig, kind, &el, &radii, &opts).map_err(err)?;
            let report = NormScanReport {
                radii: scan.iter().map(|e| e.radius).collect(),
                values: scan.iter().map(|e| e.value).collect(),
                estimates: scan.clone(),
            };
            let mut o = Outcome::new("norm", &report)?;
            for e in &scan {
                o = o.line(format!("R = {:>3}  {:.10}", e.radius, e.value));
            }
            let ok = scan.iter().all(|e| e.converged);
            Ok(o.verdict(ok))
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct FreeCheckReport {
    pub witness: FreeWitness,
    pub report: FreenessReport,
    pub summary: String,
}

fn free_check(w: WitnessArg, orders: Option<&str>, rank: usize, max_len: usize, c: &RunConfig) -> Res<Outcome> {
    let witness = match w {
        WitnessArg::TwoCyclic => {
            let sig: Signature = orders.unwrap_or("3,3").parse().map_err(err)?;
            FreeWitness::new(corrkit::group::WitnessKind::TwoCyclic, sig).map_err(err)?
        }
        WitnessArg::ThreeZ2 => {
            let sig: Signature = orders.unwrap_or("2,2,2").parse().map_err(err)?;
            FreeWitness::new(corrkit::group::WitnessKind::ThreeZ2, sig).map_err(err)?
        }
        WitnessArg::FreeInFree => {
            let sig: Signature = orders.unwrap_or("0,0").parse().map_err(err)?;
            FreeWitness::new(corrkit::group::WitnessKind::FreeInFree(rank), sig).map_err(err)?
        }
    };
    let report = check_freeness(&witness, max_len, c.ball_cap, c.execution).map_err(err)?;
    let summary = format!("{} failures / {} words", report.failures.len(), report.checked);
    let ok = report.failures.is_empty();
    Ok(Outcome::new(
        "free-check",
        &FreeCheckReport {
            witness,
            report,
            summary: summary.clone(),
        },
    )?
    .verdict(ok)
    .line(summary))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MapInput {
    Choi { n: usize, d: usize, choi: ComplexMatrix },
    Kraus { kraus: Vec<ComplexMatrix> },
}

#[derive(Serialize, Deserialize)]
pub struct NaimarkReport {
    pub povm: Vec<ComplexMatrix>,
    pub dilation: NaimarkDilation,
}

fn dilate(mode: DilateMode, c: &RunConfig) -> Res<Outcome> {
    match mode {
        DilateMode::Stinespring { map, random } => {
            let (choi, n, d) = match (map, random) {
                (Some(p), _) => match read_json::<MapInput>(&p)? {
                    MapInput::Choi { n, d, choi } => (choi, n, d),
                    MapInput::Kraus { kraus } => {
                        let first = kraus.first().ok_or("empty Kraus list")?;
                        let (n, d) = (first.rows(), first.cols());
                        (choi_matrix(n, |a| apply_kraus(&kraus, a)), n, d)
                    }
                },
                (None, Some([n, d, r])) => {
                    if n == 0 || d == 0 || r == 0 {
                        return Err("--random needs positive n,d,r".into());
                    }
                    let kraus = random_ucp_kraus(&mut rng(c), n, d, r);
                    (choi_matrix(n, |a| apply_kraus(&kraus, a)), n, d)
                }
                (None, None) => return Err("either --map or --random is required".into()),
            };
            let dil: StinespringDilation = stinespring_dilate(&choi, n, d).map_err(err)?;
            let line = format!(
                "rank {}; isometry error {:.3e}; reconstruction residual {:.3e}",
                dil.rank, dil.isometry_error, dil.reconstruction_residual
            );
            Ok(Outcome::new("dilate", &dil)?.line(line))
        }
        DilateMode::Naimark { povm, random } => {
            let elements: Vec<ComplexMatrix> = match (povm, random) {
                (Some(p), _) => read_json(&p)?,
                (None, Some([d, m])) => {
                    if d == 0 || m == 0 {
                        return Err("--random needs positive d,m".into());
                    }
                    MeasurementFamily::random_povm(&mut rng(c), d, 1, m).elements()[0].clone()
                }
                (None, None) => return Err("either --povm or --random is required".into()),
            };
            let dilation = naimark_dilate(&elements).map_err(err)?;
            let line = format!(
                "dilated to dimension {}; residual {:.3e}",
                dilation.dilated_dim(),
                dilation.residual
            );
            Ok(Outcome::new(
                "dilate",
                &NaimarkReport {
                    povm: elements,
                    dilation,
                },
            )?
            .line(line))
        }
    }
}
