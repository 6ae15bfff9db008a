//! End-to-end acceptance criteria. Runs without the libtest harness so each
//! criterion always prints one PASS/FAIL line; exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use corrkit::algebra::BellFunctional;
use corrkit::group::{check_freeness, FreeWitness, Signature, DEFAULT_BALL_CAP};
use corrkit::linalg::{random_hermitian, ComplexMatrix, C64};
use corrkit::norms::{
    apply_truncated, estimate_norm, norm_convergence_scan, NormElement, NormOptions, RepKind, TruncatedRep,
};
use corrkit::npa::{self, Level, NpaOptions, NpaStatus};
use corrkit::par::Execution;
use corrkit::quantum::{
    apply_kraus, bell_seesaw, choi_matrix, correlations_tensor, game_value_seesaw, hardy_check, local_membership,
    naimark_dilate, random_steering_data, random_ucp_kraus, steering_extract_single, steering_realize,
    stinespring_dilate, wstate_coarse_table, wstate_realization, CorrelationTable, MeasurementFamily, SeesawOptions,
    StateVector, SteeringGame, DEFAULT_VERTEX_CAP,
};
use corrkit::sdp::SdpOptions;

const GAMMA_TOL: f64 = 1e-12;
const HARDY_TOL: f64 = 1e-12;
const CHSH_LOCAL_TOL: f64 = 1e-10;
const TSIRELSON_NPA_TOL: f64 = 1e-5;
const TSIRELSON_SEESAW_TOL: f64 = 1e-6;
const NORM_UPPER_TOL: f64 = 1e-9;
const NORM_LOWER: f64 = 3.35;
const STEER_TOL: f64 = 1e-9;
const STINESPRING_TOL: f64 = 1e-10;
const SCHWARZ_TOL: f64 = 1e-8;
const NAIMARK_TOL: f64 = 1e-9;
const SANDWICH_TOL: f64 = 1e-7;
const CLOSED_FORM_TOL: f64 = 1e-6;
const NS_TOL: f64 = 1e-9;
const KKT_TOL: f64 = 1e-7;
const MONOTONE_TOL: f64 = 1e-6;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn within(start: Instant, budget: Duration) -> Result<String, String> {
    let t = start.elapsed();
    if t <= budget {
        Ok(format!("{:.2}s", t.as_secs_f64()))
    } else {
        Err(format!(
            "took {:.2}s, budget {:.0}s",
            t.as_secs_f64(),
            budget.as_secs_f64()
        ))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s2() -> f64 {
    std::f64::consts::SQRT_2
}

/// Correlator `E(x,y)` of a two-outcome table.
fn correlator(p: &CorrelationTable, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if a == b { 1.0 } else { -1.0 };
            e += sign * p.get(a, b, x, y);
        }
    }
    e
}

/// Largest marginal discrepancy and normalization error, from raw entries.
fn signaling(p: &CorrelationTable) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..p.ka {
        for y in 0..p.kb {
            let total: f64 = (0..p.ma)
                .flat_map(|a| (0..p.mb).map(move |b| (a, b)))
                .map(|(a, b)| p.get(a, b, x, y))
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    for x in 0..p.ka {
        for a in 0..p.ma {
            let m: Vec<f64> = (0..p.kb).map(|y| (0..p.mb).map(|b| p.get(a, b, x, y)).sum()).collect();
            for v in &m {
                worst = worst.max((v - m[0]).abs());
            }
        }
    }
    for y in 0..p.kb {
        for b in 0..p.mb {
            let m: Vec<f64> = (0..p.ka).map(|x| (0..p.ma).map(|a| p.get(a, b, x, y)).sum()).collect();
            for v in &m {
                worst = worst.max((v - m[0]).abs());
            }
        }
    }
    worst
}

fn c1_wstate_table() -> Check {
    let start = Instant::now();
    let table = wstate_coarse_table().map_err(|e| e.to_string())?;
    let gp = (1.0 + 1.0 / s2()) / 6.0;
    let gm = (1.0 - 1.0 / s2()) / 6.0;
    let mut dev = 0.0f64;
    let mut count = 0;
    for v in table.p.iter().flatten().flatten().flatten() {
        dev = dev.max((v - gp).abs().min((v - gm).abs()));
        count += 1;
    }
    ensure(count == 24, || format!("{count} entries"))?;
    ensure(dev <= GAMMA_TOL, || format!("max deviation {dev:e}"))?;
    let t = within(start, Duration::from_secs(1))?;
    Ok(format!("24 entries, max deviation {dev:.1e}, {t}"))
}

fn c2_hardy() -> Check {
    let table = wstate_coarse_table().map_err(|e| e.to_string())?;
    let r = hardy_check(&table).map_err(|e| e.to_string())?;
    let expected = (5.0 / s2() - 3.0) / 6.0;
    let got = r.lhs - r.rhs;
    ensure((got - expected).abs() <= HARDY_TOL, || {
        format!("lhs - rhs = {got}, expected {expected}")
    })?;
    Ok(format!("lhs - rhs = {got:.10}"))
}

fn c3_wstate_locality() -> Check {
    let start = Instant::now();
    let (psi, alice, bob) = wstate_realization();
    let p = correlations_tensor(&psi, &alice, &bob).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for x0 in 0..p.ka {
        for x1 in x0 + 1..p.ka {
            let e = |x: usize, y: usize| correlator(&p, x, y);
            for (xa, xb) in [(x0, x1), (x1, x0)] {
                for (ya, yb) in [(0, 1), (1, 0)] {
                    let s = e(xa, ya) + e(xa, yb) + e(xb, ya) - e(xb, yb);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    ensure(worst <= 2.0 + CHSH_LOCAL_TOL, || format!("CHSH value {worst}"))?;
    let v = local_membership(&p, DEFAULT_VERTEX_CAP, &SdpOptions::default()).map_err(|e| e.to_string())?;
    ensure(v.is_local(), || "no local model found".into())?;
    let t = within(start, Duration::from_secs(5))?;
    Ok(format!("max CHSH {worst:.10}, local model found, {t}"))
}

fn c4_tsirelson() -> Check {
    let start = Instant::now();
    let target = 2.0 * s2();
    let f = BellFunctional::chsh();
    let sol = npa::bell_bound(&f, Level::OneAB, &NpaOptions::default()).map_err(|e| e.to_string())?;
    ensure((sol.upper_bound - target).abs() <= TSIRELSON_NPA_TOL, || {
        format!("upper bound {}", sol.upper_bound)
    })?;
    let see = bell_seesaw(&f, 2, 2, &SeesawOptions::default()).map_err(|e| e.to_string())?;
    ensure(see.value >= target - TSIRELSON_SEESAW_TOL, || {
        format!("see-saw {}", see.value)
    })?;
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!("upper {:.8}, see-saw {:.8}, {t}", sol.upper_bound, see.value))
}

fn c5_pr_box() -> Check {
    let start = Instant::now();
    let problem = npa::build_membership_problem(&CorrelationTable::pr_box(), Level::OneAB, npa::DEFAULT_BASIS_CAP)
        .map_err(|e| e.to_string())?;
    let sol = npa::solve(&problem, &NpaOptions::default()).map_err(|e| e.to_string())?;
    ensure(sol.status == NpaStatus::Infeasible, || {
        format!("status {:?}", sol.status)
    })?;
    ensure(sol.consistent == Some(false), || "reported consistent".into())?;
    ensure(!sol.certificate.is_empty(), || "no certificate".into())?;
    let t = within(start, Duration::from_secs(5))?;
    Ok(format!("infeasible, lambda* = {:.4}, {t}", sol.objective))
}

fn c6_norms() -> Check {
    let start = Instant::now();
    let sig = Signature::free(2).map_err(|e| e.to_string())?;
    let exec = Execution::Parallel;
    let bi = NormElement::parse(&sig, RepKind::Biregular, "a + a^-1 + b + b^-1").map_err(|e| e.to_string())?;
    for r in 0..=4 {
        let rep = TruncatedRep::new(&sig, r, RepKind::Biregular, DEFAULT_BALL_CAP).map_err(|e| e.to_string())?;
        let mut v = vec![C64::new(0.0, 0.0); rep.dim()];
        v[0] = C64::new(1.0, 0.0);
        let w = apply_truncated(&rep, &bi, &v, exec).map_err(|e| e.to_string())?;
        let exact = w
            .iter()
            .enumerate()
            .all(|(i, z)| *z == if i == 0 { C64::new(4.0, 0.0) } else { C64::new(0.0, 0.0) });
        ensure(exact, || {
            format!("biregular image of delta_e is not 4 delta_e at radius {r}")
        })?;
    }
    let left = NormElement::parse(&sig, RepKind::LeftRegular, "a + a^-1 + b + b^-1").map_err(|e| e.to_string())?;
    let bound = 12f64.sqrt() + NORM_UPPER_TOL;
    let opts = NormOptions::default();
    let rep = TruncatedRep::new(&sig, 12, RepKind::LeftRegular, DEFAULT_BALL_CAP).map_err(|e| e.to_string())?;
    let est = estimate_norm(&rep, &left, &opts).map_err(|e| e.to_string())?;
    ensure(est.value >= NORM_LOWER && est.value <= bound, || {
        format!("R=12 estimate {}", est.value)
    })?;
    let t = within(start, Duration::from_secs(180))?;
    let radii: Vec<usize> = (2..=12).collect();
    let scan = norm_convergence_scan(&sig, RepKind::LeftRegular, &left, &radii, &opts).map_err(|e| e.to_string())?;
    for w in scan.windows(2) {
        ensure(w[1].value >= w[0].value, || {
            format!("scan decreases at R={}", w[1].radius)
        })?;
    }
    ensure(scan.iter().all(|e| e.value <= bound), || "scan exceeds sqrt(12)".into())?;
    Ok(format!(
        "4 delta_e exact at R=0..4, R=12 estimate {:.8}, scan monotone, {t}",
        est.value
    ))
}

fn c7_steering() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (d, k, m) = (2 + i % 2, 2 + (i / 2) % 2, 2 + (i / 4) % 2);
        let sd = random_steering_data(&mut rng, d, k, m);
        let real = steering_realize(&sd).map_err(|e| e.to_string())?;
        let back = steering_extract_single(&real.density(), &real.family).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&sd));
    }
    ensure(worst < STEER_TOL, || format!("round-trip deviation {worst:e}"))?;
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!("100 instances, max deviation {worst:.1e}, {t}"))
}

fn c8_dilations() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut residual, mut gap) = (0.0f64, f64::INFINITY);
    for i in 0..50 {
        let kraus = random_ucp_kraus(&mut rng, 3, 2, 1 + i % 4);
        let choi = choi_matrix(3, |a| apply_kraus(&kraus, a));
        let dil = stinespring_dilate(&choi, 3, 2).map_err(|e| e.to_string())?;
        residual = residual.max(dil.reconstruction_residual);
        for _ in 0..5 {
            let (h1, h2) = (random_hermitian(&mut rng, 3), random_hermitian(&mut rng, 3));
            let a = ComplexMatrix::from_fn(3, 3, |r, c| h1[(r, c)] + C64::new(0.0, 1.0) * h2[(r, c)]);
            let direct = apply_kraus(&kraus, &a);
            residual = residual.max(dil.apply(&a).max_abs_diff(&direct));
            let schwarz = &apply_kraus(&kraus, &a.adjoint().matmul(&a)) - &direct.adjoint().matmul(&direct);
            gap = gap.min(schwarz.min_eigenvalue());
        }
    }
    ensure(residual < STINESPRING_TOL, || {
        format!("Stinespring residual {residual:e}")
    })?;
    ensure(gap >= -SCHWARZ_TOL, || format!("Schwarz gap {gap:e}"))?;
    let mut naimark = 0.0f64;
    for _ in 0..20 {
        let povm = MeasurementFamily::random_povm(&mut rng, 2, 1, 3).elements()[0].clone();
        let dil = naimark_dilate(&povm).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let psi = StateVector::random(&mut rng, 2);
            let amps = psi.amplitudes();
            let got = dil.probabilities(&psi);
            for (a, el) in povm.iter().enumerate() {
                let mut p = C64::new(0.0, 0.0);
                for r in 0..2 {
                    for c in 0..2 {
                        p += amps[r].conj() * el[(r, c)] * amps[c];
                    }
                }
                naimark = naimark.max((got[a] - p.re).abs());
            }
        }
    }
    ensure(naimark < NAIMARK_TOL, || {
        format!("Naimark statistics deviate by {naimark:e}")
    })?;
    Ok(format!(
        "Stinespring residual {residual:.1e}, Schwarz gap {gap:.1e}, Naimark {naimark:.1e}"
    ))
}

fn c9_games() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = SeesawOptions::default();
    let npa_opts = NpaOptions::default();
    let mut min_gap = f64::INFINITY;
    for _ in 0..20 {
        let g = SteeringGame::random(&mut rng, 2, 2, 2);
        let lower = game_value_seesaw(&g, 2, 2, &opts).map_err(|e| e.to_string())?.value;
        let upper = npa::game_bound(&g, Level::N(1), &npa_opts).map_err(|e| e.to_string())?;
        ensure(upper.status == NpaStatus::Optimal, || {
            format!("status {:?}", upper.status)
        })?;
        min_gap = min_gap.min(upper.upper_bound - lower);
    }
    ensure(min_gap >= -SANDWICH_TOL, || {
        format!("upper bound below see-saw by {}", -min_gap)
    })?;
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for m in 2..=3 {
            let g = SteeringGame::random(&mut rng, 1, k, m);
            let best = |fam: &[Vec<ComplexMatrix>]| -> f64 {
                fam.iter()
                    .map(|s| s.iter().map(|e| e[(0, 0)].re).fold(f64::MIN, f64::max))
                    .sum()
            };
            let oracle = (best(g.v()) + best(g.w())) / (2.0 * k as f64);
            let lower = game_value_seesaw(&g, 1, 1, &opts).map_err(|e| e.to_string())?.value;
            let upper = npa::game_bound(&g, Level::N(1), &npa_opts)
                .map_err(|e| e.to_string())?
                .upper_bound;
            worst = worst.max((lower - oracle).abs()).max((upper - oracle).abs());
        }
    }
    ensure(worst <= CLOSED_FORM_TOL, || {
        format!("d=1 deviation from closed form {worst:e}")
    })?;
    Ok(format!("min upper - lower {min_gap:.2e}, d=1 deviation {worst:.1e}"))
}

fn c10_freeness() -> Check {
    let start = Instant::now();
    let witnesses = [
        FreeWitness::two_cyclic(3).map_err(|e| e.to_string())?,
        FreeWitness::three_z2().map_err(|e| e.to_string())?,
        FreeWitness::free_in_free(3).map_err(|e| e.to_string())?,
    ];
    let mut checked = 0;
    for w in &witnesses {
        let r = check_freeness(w, 8, DEFAULT_BALL_CAP, Execution::Parallel).map_err(|e| e.to_string())?;
        ensure(r.failures.is_empty(), || {
            format!("{} failures for {w:?}", r.failures.len())
        })?;
        checked += r.checked;
    }
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("{checked} words, no failures, {t}"))
}

fn c11_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tables = vec![CorrelationTable::pr_box(), CorrelationTable::uniform(2, 2, 2, 2)];
    let (psi, a, b) = wstate_realization();
    tables.push(correlations_tensor(&psi, &a, &b).map_err(|e| e.to_string())?);
    for i in 0..20 {
        let (da, db, k, m) = (2 + i % 2, 2, 2 + (i / 2) % 2, 2 + (i / 4) % 2);
        let psi = StateVector::random(&mut rng, da * db);
        let alice = MeasurementFamily::random_povm(&mut rng, da, k, m);
        let bob = MeasurementFamily::random_povm(&mut rng, db, k, m);
        tables.push(correlations_tensor(&psi, &alice, &bob).map_err(|e| e.to_string())?);
    }
    let ns = tables.iter().map(signaling).fold(0.0, f64::max);
    ensure(ns <= NS_TOL, || format!("signaling {ns:e}"))?;

    let opts = NpaOptions::default();
    let mut kkt = 0.0f64;
    let levels = [Level::N(1), Level::OneAB, Level::N(2)];
    for _ in 0..10 {
        let mut f = BellFunctional::zeros(2, 2, 2);
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        f.set(a, b, x, y, rand::Rng::random_range(&mut rng, -1.0..1.0))
                            .map_err(|e| e.to_string())?;
                    }
                }
            }
        }
        let mut bounds = Vec::new();
        for &l in &levels {
            let sol = npa::bell_bound(&f, l, &opts).map_err(|e| e.to_string())?;
            ensure(sol.status == NpaStatus::Optimal, || {
                format!("status {:?} at {l}", sol.status)
            })?;
            kkt = kkt.max(sol.kkt_residual());
            bounds.push(sol.upper_bound);
        }
        ensure(bounds.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL), || {
            format!("levels not monotone: {bounds:?}")
        })?;
    }
    for t in &tables[..3] {
        let sol = npa::membership(t, Level::OneAB, &opts).map_err(|e| e.to_string())?;
        kkt = kkt.max(sol.kkt_residual());
    }
    ensure(kkt <= KKT_TOL, || format!("KKT residual {kkt:e}"))?;
    Ok(format!(
        "{} tables, signaling {ns:.1e}, max KKT residual {kkt:.1e}",
        tables.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("W-state coarse-grained table", c1_wstate_table),
        ("Hardy violation", c2_hardy),
        ("W-state single-shot locality", c3_wstate_locality),
        ("Tsirelson sandwich", c4_tsirelson),
        ("PR-box rejection", c5_pr_box),
        ("norm certificates", c6_norms),
        ("steering round trip", c7_steering),
        ("dilation suite", c8_dilations),
        ("steering-game sandwich", c9_games),
        ("freeness witnesses", c10_freeness),
        ("invariant suites", c11_invariants),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
