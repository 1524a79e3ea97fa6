//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use iglab::classify::{classify, harmonic_witness_check, lambda_solve, Answer};
use iglab::forms::{cutoff_eta, cutoff_gradient_check, random_identity_suite, summarize};
use iglab::gallery::{cutoff_energies, RunRecord};
use iglab::metric::{strongly_intrinsic_check, EdgeLengths, PathMetric, SigmaChoice};
use iglab::potential::{
    boundary_alternative_evidence, boundary_capacity, codim_polarity_test, equilibrium,
    minkowski_samples, AlternativeVerdict, CapRegime,
};
use iglab::random::{positive_upto, random_graph_between, trial_rng};
use iglab::registry::{lookup, registry, Params};
use iglab::{Budget, EndSide, Execution, GraphBuilder, GraphFamily, VertexSet, WeightedGraph};

const SEED: u64 = 0;
const SUITE: usize = 1000;
const SUITE_MAX_VERTICES: usize = 10;
const CUTOFF_PAIRS: u64 = 100;
const GALLERY_LIMIT: Duration = Duration::from_secs(300);

type Outcome = (bool, String);

fn family(name: &str, params: &[(&str, f64)]) -> GraphFamily {
    let p: Params = params.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    lookup(name).unwrap().build(&p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// The graphs of the seeded identity suite, regenerated trial by trial.
fn suite_graphs() -> Vec<WeightedGraph> {
    (0..SUITE as u64)
        .map(|t| random_graph_between(&mut trial_rng(SEED, t), 2, SUITE_MAX_VERTICES))
        .collect()
}

fn criterion_1() -> Outcome {
    let est = minkowski_samples(&family("ex5.4", &[]), SigmaChoice::Sigma0, 30).unwrap();
    let mut r_err: f64 = 0.0;
    let mut mu_err: f64 = 0.0;
    for s in &est.samples {
        let r = (-(s.x as f64 - 1.0)).exp2();
        r_err = r_err.max(rel(s.r, r));
        mu_err = mu_err.max(rel(s.mu_ball, r * r / 3.0));
    }
    let ratio = est.samples.last().and_then(|s| s.ratio).unwrap_or(f64::NAN);
    let pass = r_err <= 1e-12 && mu_err <= 1e-12 && (ratio - 2.0).abs() <= 0.01;
    (pass, format!("max rel err r {r_err:e}, μ(B_r) vs r²/3 {mu_err:e}; ln μ/ln r at x = 30: {ratio} (target 2 ± 0.01)"))
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for alpha in [0.75, 1.0, 2.0] {
        let est = minkowski_samples(
            &family("ex5.6", &[("alpha", alpha), ("case", 1.0)]),
            SigmaChoice::Family,
            40,
        )
        .unwrap();
        let got = est.limsup.unwrap_or(f64::NAN);
        let want = 2.0 - 1.0 / alpha;
        pass &= (got - want).abs() <= 0.05;
        parts.push(format!("α = {alpha}: {got:.4} vs {want:.4}"));
    }
    (pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let fam = family("ex5.1", &[]);
    let worst = cutoff_energies(&fam, 100)
        .unwrap()
        .iter()
        .map(|&(n, q)| rel(q, 2.0 / n as f64))
        .fold(0.0, f64::max);
    let bc = boundary_capacity(&fam, SigmaChoice::Sigma0, &[], Budget::Standard).unwrap();
    let ends_ok = bc.ends.iter().all(|e| {
        e.monotone_decreasing
            && e.limit.is_some_and(|l| l < 1e-3)
            && e.slope.is_some_and(|s| s < 0.0)
    });
    let last: Vec<String> = bc
        .ends
        .iter()
        .map(|e| {
            format!(
                "{} {:e} slope {:.3}",
                e.end,
                e.limit.unwrap_or(f64::NAN),
                e.slope.unwrap_or(f64::NAN)
            )
        })
        .collect();
    let pass = worst <= 1e-12 && ends_ok && bc.regime == CapRegime::Zero;
    (
        pass,
        format!(
            "Q̃(e_n) max rel err {worst:e}; tail caps {}; regime {:?}",
            last.join(", "),
            bc.regime
        ),
    )
}

fn criterion_4() -> Outcome {
    let fam = family("ex5.1", &[]);
    let h = harmonic_witness_check(&fam, Budget::Standard.max_window()).unwrap();
    let rep = classify(
        &fam,
        SigmaChoice::Sigma0,
        Budget::Standard,
        Execution::Parallel,
    )
    .unwrap();
    let pass = h.max_laplacian <= 1e-12
        && h.norm.converges()
        && h.norm_plateau
        && h.energy == 2.0 * h.window as f64
        && rep.self_adjoint.answer == Answer::No;
    (
        pass,
        format!(
            "max |Δh| {:e}; ‖h‖² growth {:e}; energy {} at N = {}; self-adjoint: {:?}",
            h.max_laplacian, h.norm_growth, h.energy, h.window, rep.self_adjoint.answer
        ),
    )
}

fn criterion_5() -> Outcome {
    let fam = family("ex5.3a", &[]);
    let sol = lambda_solve(&fam, 1.0, Budget::Standard.max_window()).unwrap();
    let bc = boundary_capacity(&fam, SigmaChoice::Sigma0, &[], Budget::Standard).unwrap();
    let end = bc.end(EndSide::Right).unwrap();
    let change = end.last_quartile_change.unwrap_or(f64::INFINITY);
    let limit = end.limit.unwrap_or(0.0);
    let alt = boundary_alternative_evidence(&bc);
    let pass = sol.bounded.answer == Answer::Yes
        && sol.plateau
        && sol.l2.answer == Answer::Yes
        && sol.finite_energy.answer == Answer::Yes
        && change < 1e-4
        && limit > 0.01
        && matches!(alt, AlternativeVerdict::DomainsDiffer { .. });
    (
        pass,
        format!(
            "u bounded {:?}, plateau {}, L² {:?}, energy {:?}; Cap change {change:e}, limit {limit}; {alt:?}",
            sol.bounded.answer, sol.plateau, sol.l2.answer, sol.finite_energy.answer
        ),
    )
}

fn criterion_6() -> Outcome {
    let trials = random_identity_suite(SEED, SUITE, SUITE_MAX_VERTICES, Execution::Parallel);
    let s = summarize(SEED, &trials);
    let pass = s.failures == 0 && s.worst_contraction_gap <= 1e-12;
    (
        pass,
        format!(
            "{} trials, {} failures; Green {:e}, Leibniz {:e}, min Caccioppoli slack {:e}, contraction gap {:e}",
            s.trials, s.failures, s.worst_green, s.worst_leibniz, s.worst_caccioppoli, s.worst_contraction_gap
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut min_slack = f64::INFINITY;
    let mut certs = true;
    for g in suite_graphs() {
        for s in [
            EdgeLengths::sigma0(&g).unwrap(),
            EdgeLengths::sigma1(&g).unwrap(),
        ] {
            let c = strongly_intrinsic_check(&g, &s);
            certs &= c.min_slack >= -1e-15;
            min_slack = min_slack.min(c.min_slack);
        }
    }
    let mut worst_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for (i, spec) in registry()
        .iter()
        .filter(|s| s.unsupported.is_none())
        .enumerate()
    {
        for (j, params) in spec.gallery_variants().into_iter().enumerate() {
            let fam = spec.build(&params).unwrap();
            let g = fam.truncate(fam.clamp_window(64)).unwrap();
            let m = PathMetric::new(
                &g,
                EdgeLengths::for_choice(&g, Some(&fam), spec.sigma).unwrap(),
            );
            let d = m.distances_from(0).unwrap();
            let reach = d
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
            let mut rng = trial_rng(SEED, (i * 16 + j) as u64);
            for _ in 0..CUTOFF_PAIRS {
                let big_r = positive_upto(&mut rng, 1.5 * reach);
                let r = big_r - positive_upto(&mut rng, big_r);
                let eta = cutoff_eta(&m, 0, r, big_r).unwrap();
                let c = cutoff_gradient_check(&g, &eta, r, big_r).unwrap();
                worst_excess = worst_excess.max(c.max_excess);
                checked += 1;
            }
        }
    }
    let pass = certs && worst_excess <= 1e-12;
    (pass, format!("σ₀/σ₁ min slack {min_slack:e} over {SUITE} graphs; cut-off max excess {worst_excess:e} over {checked} pairs"))
}

/// Minimum length over all simple paths from `src` to every vertex.
fn exhaustive_distances(g: &WeightedGraph, s: &EdgeLengths, src: usize) -> Vec<f64> {
    fn walk(
        g: &WeightedGraph,
        s: &EdgeLengths,
        x: usize,
        len: f64,
        seen: &mut [bool],
        best: &mut [f64],
    ) {
        best[x] = best[x].min(len);
        for (y, _) in g.neighbors(x) {
            if !seen[y] {
                seen[y] = true;
                walk(g, s, y, len + s.get(g, x, y).unwrap(), seen, best);
                seen[y] = false;
            }
        }
    }
    let mut best = vec![f64::INFINITY; g.len()];
    let mut seen = vec![false; g.len()];
    seen[src] = true;
    walk(g, s, src, 0.0, &mut seen, &mut best);
    best
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut graphs = 0;
    for g in suite_graphs()
        .into_iter()
        .filter(|g| g.len() <= 8 && g.is_connected())
    {
        graphs += 1;
        let m = PathMetric::new(&g, EdgeLengths::sigma0(&g).unwrap());
        for x in 0..g.len() {
            let oracle = exhaustive_distances(&g, m.lengths(), x);
            for (y, &o) in oracle.iter().enumerate() {
                worst = worst.max((m.distance(x, y).unwrap() - o).abs());
            }
        }
    }
    (
        worst <= 1e-12,
        format!("{graphs} graphs, max |d − exhaustive| {worst:e}"),
    )
}

/// `Cap(U)²` by dense elimination: `(L + M)_FF e_F = w(F, U) 1`, then `eᵀ(L + M)e`.
fn dense_capacity(g: &WeightedGraph, u: &[usize]) -> f64 {
    let n = g.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        a[(x, x)] += g.measure(x);
        for (y, w) in g.neighbors(x) {
            a[(x, x)] += w;
            a[(x, y)] -= w;
        }
    }
    let free: Vec<usize> = (0..n).filter(|x| !u.contains(x)).collect();
    let mut e = DVector::<f64>::from_element(n, 1.0);
    if !free.is_empty() {
        let aff = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
        let b = DVector::from_fn(free.len(), |i, _| {
            -u.iter().map(|&y| a[(free[i], y)]).sum::<f64>()
        });
        let ef = aff.cholesky().expect("SPD block").solve(&b);
        for (i, &x) in free.iter().enumerate() {
            e[x] = ef[i];
        }
    }
    (e.transpose() * &a * &e)[(0, 0)]
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (t, g) in suite_graphs()
        .into_iter()
        .enumerate()
        .filter(|(_, g)| g.len() <= 6)
    {
        let mut rng = trial_rng(SEED + 1, t as u64);
        let mut u: Vec<usize> = (0..g.len())
            .filter(|_| positive_upto(&mut rng, 1.0) <= 0.4)
            .collect();
        if u.is_empty() {
            u.push(t % g.len());
        }
        let sparse = equilibrium(&g, &VertexSet::new(u.clone(), g.len()).unwrap())
            .unwrap()
            .cap;
        worst = worst.max(rel(sparse, dense_capacity(&g, &u).sqrt()));
        cases += 1;
    }
    let mut b = GraphBuilder::new(3);
    b.measure(0, 1.0)
        .measure(1, 1.0)
        .measure(2, 1.0)
        .edge(0, 1, 1.0)
        .edge(1, 2, 1.0);
    let hand = equilibrium(&b.build().unwrap(), &VertexSet::new(vec![2], 3).unwrap())
        .unwrap()
        .cap;
    let hand_err = rel(hand, (8.0f64 / 5.0).sqrt());
    (
        worst <= 1e-9 && hand_err <= 1e-12,
        format!("{cases} graphs, max rel err {worst:e}; path-3 Cap {hand} (rel err {hand_err:e})"),
    )
}

fn criterion_10() -> Outcome {
    let t = codim_polarity_test(&family("codim3", &[]), SigmaChoice::Family, 30).unwrap();
    let last = t.last().unwrap_or(f64::NAN);
    (
        t.monotone_decreasing && last < 1e-3 && t.all_bounds_hold,
        format!(
            "monotone {}, last ‖η‖ {last:e}, bounds hold {}",
            t.monotone_decreasing, t.all_bounds_hold
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_iglab"))
        .args([
            "gallery",
            "--budget",
            "standard",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let code = out.status.code().unwrap_or(-1);
    let records: Vec<RunRecord> = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let round_trip = !records.is_empty()
        && records
            .iter()
            .all(|r| RunRecord::read(&dir.path().join(r.file_name())).is_ok_and(|back| &back == r));
    let checks: usize = records.iter().map(|r| r.checks.len()).sum();
    (
        code == 0 && elapsed <= GALLERY_LIMIT && round_trip,
        format!("exit {code}, {} records, {checks} golden checks, {:.1} s, records round-trip {round_trip}", records.len(), elapsed.as_secs_f64()),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = vec![];
    for (n, run) in criteria {
        let start = Instant::now();
        let (pass, detail) = run();
        println!(
            "criterion {n:>2}: {} ({:.1} s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
