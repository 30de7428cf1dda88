//! Acceptance gate: ten end-to-end criteria, one test each. Every test
//! prints a single `criterion N: PASS` line on success (visible with
//! `--nocapture`) or panics with the failure detail.

use std::collections::HashMap;
use std::process::Command;
use std::sync::OnceLock;

use hullmargin::cutting_plane::{cp_learn, relax_cut, CpConfig};
use hullmargin::geometry::{
    hull_distance, hull_membership, mvee, Halfspace, Point, SeminormMetric,
};
use hullmargin::instances::{
    gen_ellipsoidal, gen_ellipsoidal_with_shapes, gen_staircase_with_ell, Instance,
};
use hullmargin::learners::{
    bin_learn, grid_margin_bound, kclass_learn, one_sided_learn, LearnConfig,
};
use hullmargin::oracles::{OracleSuite, SeedPolicy, StairFact, StaircaseDescriptor};
use hullmargin::rounding::verify_rounding;
use hullmargin::sampling::{refresh_rounding, rounding_transform, ConvexBody, SamplingConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

fn rng_for(tag: u64, trial: u64) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&tag.to_le_bytes());
    seed[8..16].copy_from_slice(&trial.to_le_bytes());
    seed[16..24].copy_from_slice(&0xACCE_57A2_CE00_u64.to_le_bytes());
    ChaCha12Rng::from_seed(seed)
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

fn fresh_suite(inst: &Instance) -> OracleSuite {
    OracleSuite::new(inst.target(), SeedPolicy::SmallestIndex)
}

// ---------------------------------------------------------------- criteria 1+3

struct RecoveryTrial {
    tag: String,
    disagreements: usize,
    calls_ok: bool,
    audits: usize,
    audit_failures: Vec<String>,
    min_margin: f64,
}

static RECOVERY: OnceLock<Vec<RecoveryTrial>> = OnceLock::new();

fn recovery_trials() -> &'static [RecoveryTrial] {
    RECOVERY.get_or_init(|| {
        let combos = [
            (2usize, 2usize, 1000usize, 0.05f64),
            (3, 3, 200, 0.1),
            (4, 5, 80, 0.1),
            (5, 4, 100, 0.05),
            (6, 2, 250, 0.2),
        ];
        (0..100usize)
            .into_par_iter()
            .map(|idx| {
                let (m, k, npc, gamma) = combos[idx / 20];
                let seed = idx % 20;
                let tag = format!("m={m} k={k} n_pc={npc} gamma={gamma} seed={seed}");
                let mut rng = rng_for(0xC1, idx as u64);
                let inst = gen_ellipsoidal(m, k, npc, gamma, idx as u64, &mut rng)
                    .unwrap_or_else(|e| panic!("generation failed for {tag}: {e}"));
                let mut suite = fresh_suite(&inst);
                match kclass_learn(&inst.points, &mut suite, &LearnConfig::default(), &mut rng)
                {
                    Ok(out) => {
                        let assignment = out.labels();
                        let disagreements = match assignment {
                            Some(labels) => (0..inst.n())
                                .filter(|&i| labels[i] != inst.labels[i])
                                .count(),
                            None => inst.n(),
                        };
                        let calls_ok =
                            out.recursive_calls <= factorial(k).min(inst.n());
                        let mut audit_failures = Vec::new();
                        let mut min_margin = f64::INFINITY;
                        for audit in &out.roundings {
                            match verify_rounding(
                                &inst.points,
                                &audit.active,
                                &inst.labels,
                                &audit.rounding,
                                gamma,
                                1e-6,
                            ) {
                                Ok(report) => {
                                    min_margin = min_margin.min(report.min_margin);
                                    if !report.ok() {
                                        audit_failures
                                            .extend(report.failures.iter().cloned());
                                    }
                                }
                                Err(e) => audit_failures
                                    .push(format!("verify_rounding error: {e}")),
                            }
                        }
                        RecoveryTrial {
                            tag,
                            disagreements,
                            calls_ok,
                            audits: out.roundings.len(),
                            audit_failures,
                            min_margin,
                        }
                    }
                    Err(e) => RecoveryTrial {
                        tag: format!("{tag}: learner error {e}"),
                        disagreements: inst.n(),
                        calls_ok: false,
                        audits: 0,
                        audit_failures: vec![format!("learner error: {e}")],
                        min_margin: f64::NAN,
                    },
                }
            })
            .collect()
    })
}

#[test]
fn criterion_01_exact_recovery() {
    let trials = recovery_trials();
    let bad: Vec<&RecoveryTrial> = trials
        .iter()
        .filter(|t| t.disagreements > 0 || !t.calls_ok)
        .collect();
    assert!(
        bad.is_empty(),
        "criterion 1: FAIL — {} of 100 trials disagree ({})",
        bad.len(),
        bad.iter()
            .map(|t| format!("[{} disagreements={}]", t.tag, t.disagreements))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "criterion 1: PASS — exact k-class recovery 100/100 (m 2..6, k 2..5, n <= 2000, gamma >= 0.05, 20 seeds per combo)"
    );
}

#[test]
fn criterion_03_rounding_validity() {
    let trials = recovery_trials();
    let total_audits: usize = trials.iter().map(|t| t.audits).sum();
    let failures: Vec<String> = trials
        .iter()
        .flat_map(|t| {
            t.audit_failures
                .iter()
                .map(move |f| format!("[{}] {}", t.tag, f))
        })
        .collect();
    assert!(
        failures.is_empty(),
        "criterion 3: FAIL — {} rounding audits failed: {}",
        failures.len(),
        failures.join("; ")
    );
    let min_margin = trials
        .iter()
        .map(|t| t.min_margin)
        .fold(f64::INFINITY, f64::min);
    println!(
        "criterion 3: PASS — verify_rounding ok on all {total_audits} roundings across 100 trials (min pairwise margin {min_margin:.3e})"
    );
}

// ------------------------------------------------------------------ criterion 2

#[test]
fn criterion_02_cutting_plane_seed_bound() {
    let coef_unit = (std::f64::consts::E / (std::f64::consts::E - 1.0)).log2();
    let results: Vec<Result<(f64, usize, f64), String>> = (0..50usize)
        .into_par_iter()
        .map(|idx| {
            let m = 2 + idx / 10;
            let j = idx % 10;
            let gamma = 0.2 * (3.0e-4f64 / 0.2).powf(j as f64 / 9.0);
            let mut rng = rng_for(0xC2, idx as u64);
            let mut inst = gen_ellipsoidal(m, 2, 30, gamma, idx as u64, &mut rng)
                .map_err(|e| format!("m={m} gamma={gamma}: generation {e}"))?;
            let max_norm = |pts: &[Point]| pts.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
            let sep = hull_distance(
                &inst.class_points(0),
                &inst.class_points(1),
                &SeminormMetric::euclidean(m),
            )
            .map_err(|e| format!("hull_distance: {e}"))?;
            let r = sep.dist / 2.0;
            let mut big_r = max_norm(&inst.points);
            if big_r / r < 10.0 {
                // Translation inflates R without touching the hull gap,
                // pushing wide-margin instances into the required R/r range.
                let mut shift = DVector::zeros(m);
                shift[0] = 12.0 * r + big_r;
                for p in &mut inst.points {
                    *p += &shift;
                }
                big_r = max_norm(&inst.points);
            }
            let ratio = big_r / r;
            if !(10.0..=1e4).contains(&ratio) {
                return Err(format!("m={m} gamma={gamma}: R/r={ratio} outside [10, 1e4]"));
            }
            let all: Vec<usize> = (0..inst.n()).collect();
            let mut suite = fresh_suite(&inst);
            let out = cp_learn(
                &inst.points,
                &all,
                &mut suite,
                0,
                1,
                &CpConfig::default(),
                &mut rng,
            )
            .map_err(|e| format!("m={m} gamma={gamma}: cp_learn {e}"))?;
            let mut learned = vec![1usize; inst.n()];
            for &i in &out.positive {
                learned[i] = 0;
            }
            if learned != inst.labels {
                return Err(format!("m={m} gamma={gamma}: recovery not exact"));
            }
            let bound = (2.0 * m as f64 / coef_unit) * (8.0 * ratio).log2() + 10.0;
            if (out.seed_queries as f64) > bound {
                return Err(format!(
                    "m={m} gamma={gamma}: {} seeds exceed bound {bound:.1} (R/r={ratio:.1})",
                    out.seed_queries
                ));
            }
            Ok((ratio, out.seed_queries, bound))
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    assert!(
        errors.is_empty(),
        "criterion 2: FAIL — {} of 50 trials failed: {}",
        errors.len(),
        errors
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join("; ")
    );
    let max_ratio = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|(ratio, _, _)| *ratio)
        .fold(0.0f64, f64::max);
    println!(
        "criterion 2: PASS — cp_learn seed count within (2m/log2(e/(e-1)))*log2(8R/r)+10 on 50/50 binaries (R/r up to {max_ratio:.0})"
    );
}

// ------------------------------------------------------------------ criterion 4

#[test]
fn criterion_04_label_query_scaling() {
    let ns = [250usize, 500, 1000, 2000, 4000];
    let trials = 8usize;
    let (m, gamma) = (3usize, 0.1f64);
    let per_trial: Vec<(usize, f64)> = (0..ns.len() * trials)
        .into_par_iter()
        .map(|idx| {
            let (ni, t) = (idx / trials, idx % trials);
            let n = ns[ni];
            let mut rng = rng_for(0xC4, idx as u64);
            let inst = gen_ellipsoidal(m, 2, n / 2, gamma, idx as u64, &mut rng)
                .expect("generation");
            let mut suite = fresh_suite(&inst);
            let out = bin_learn(&inst.points, &mut suite, &LearnConfig::default(), &mut rng)
                .unwrap_or_else(|e| panic!("bin_learn n={n} trial={t}: {e}"));
            assert_eq!(
                out.labels().unwrap(),
                inst.labels,
                "bin_learn n={n} trial={t} must recover exactly"
            );
            (ni, out.label_queries as f64)
        })
        .collect();
    let mut means = vec![0.0f64; ns.len()];
    for &(ni, labels) in &per_trial {
        means[ni] += labels / trials as f64;
    }
    for w in means.windows(2) {
        assert!(
            w[1] >= w[0],
            "criterion 4: FAIL — mean label queries not monotone in n: {means:?}"
        );
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = means.iter().sum::<f64>() / means.len() as f64;
    let slope = xs
        .iter()
        .zip(&means)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>();
    let scale = (2 * 2 * m * m) as f64; // k^2 m^2
    let (lo, hi) = (0.2 * scale, 40.0 * scale);
    assert!(
        slope >= lo && slope <= hi,
        "criterion 4: FAIL — fitted slope {slope:.1} outside [{lo:.1}, {hi:.1}] (means {means:?})"
    );
    println!(
        "criterion 4: PASS — label-query slope {slope:.1} vs log2(n) within [{lo:.1}, {hi:.1}], means monotone {means:?}"
    );
}

// ------------------------------------------------------------------ criterion 5

fn staircase_consistent(
    desc: &StaircaseDescriptor,
    band: usize,
    t: &[usize],
    facts: &[StairFact],
) -> bool {
    let class_of = |idx: usize| -> Option<usize> {
        let (s, i, j) = desc.unindex(idx);
        if s != band {
            return None;
        }
        Some(if j <= t[i] { 2 * s } else { 2 * s + 1 })
    };
    for fact in facts {
        match fact {
            StairFact::Label { point, answer } => {
                if let Some(c) = class_of(*point) {
                    if c != *answer {
                        return false;
                    }
                }
            }
            StairFact::SeedHit { class, member } => {
                if class / 2 == band && class_of(*member) != Some(*class) {
                    return false;
                }
            }
            StairFact::SeedNil { class, set } => {
                if class / 2 == band {
                    for &x in set {
                        if class_of(x) == Some(*class) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

fn brute_force_version_space(desc: &StaircaseDescriptor, facts: &[StairFact]) -> u128 {
    let mut product: u128 = 1;
    for band in 0..desc.bands() {
        let mut count: u128 = 0;
        let mut t = vec![1usize; desc.p];
        loop {
            if staircase_consistent(desc, band, &t, facts) {
                count += 1;
            }
            let mut c = 0;
            while c < desc.p {
                t[c] += 1;
                if t[c] <= desc.ell {
                    break;
                }
                t[c] = 1;
                c += 1;
            }
            if c == desc.p {
                break;
            }
        }
        product = product.saturating_mul(count);
    }
    product
}

#[test]
fn criterion_05_lower_bound_harness() {
    let cells: Vec<(usize, usize)> = [2usize, 3, 4]
        .iter()
        .flat_map(|&m| [4usize, 8, 16].iter().map(move |&ell| (m, ell)))
        .collect();
    let trials = 50usize;
    for (cell_idx, &(m, ell)) in cells.iter().enumerate() {
        let gamma = 1.0 / (2.0 * (ell * ell) as f64 * (m as f64).sqrt());
        let totals: Vec<usize> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = rng_for(0xC5 + cell_idx as u64, trial as u64);
                let (inst, desc) =
                    gen_staircase_with_ell(m, 2, ell, trial as u64, &mut rng)
                        .expect("staircase generation");
                let mut suite = OracleSuite::for_staircase(desc.clone());
                let out = bin_learn(
                    &inst.points,
                    &mut suite,
                    &LearnConfig::default(),
                    &mut rng,
                )
                .unwrap_or_else(|e| panic!("bin_learn m={m} ell={ell}: {e}"));
                assert_eq!(
                    out.labels().unwrap(),
                    inst.labels,
                    "adversarial staircase m={m} ell={ell} trial={trial}: not exact"
                );
                let tracked = suite
                    .staircase_state()
                    .expect("staircase tracking on")
                    .version_space_size();
                let brute = brute_force_version_space(&desc, suite.stair_facts());
                assert_eq!(
                    tracked, brute,
                    "version space mismatch m={m} ell={ell} trial={trial}"
                );
                suite.ledger().total()
            })
            .collect();
        let mean = totals.iter().sum::<usize>() as f64 / trials as f64;
        let bound = (m as f64 / 24.0) * (1.0 / (2.0 * gamma)).log2();
        assert!(
            mean >= bound,
            "criterion 5: FAIL — cell m={m} ell={ell}: mean total queries {mean:.1} below lower bound {bound:.2}"
        );
    }
    println!(
        "criterion 5: PASS — 9 staircase cells (m 2..4 x ell 4,8,16): mean queries above (m/24)*log2(1/(2gamma)), version space equals brute force on all 450 trials"
    );
}

// ------------------------------------------------------------------ criterion 6

#[test]
fn criterion_06_one_sided_learner() {
    let combos = [
        (1.0f64, 0.1f64),
        (1.0, 0.3),
        (2.0, 0.1),
        (2.0, 0.3),
        (4.0, 0.1),
        (4.0, 0.3),
    ];
    let m = 3usize;
    let errors: Vec<String> = (0..50usize)
        .into_par_iter()
        .filter_map(|idx| {
            let (kappa, gamma) = combos[idx % combos.len()];
            let tag = format!("kappa={kappa} gamma={gamma} trial={idx}");
            let mut rng = rng_for(0xC6, idx as u64);
            let mut shape = DMatrix::identity(m, m);
            shape[(0, 0)] = kappa;
            let inst = match gen_ellipsoidal_with_shapes(
                m,
                2,
                100,
                gamma,
                &[Some(shape), None],
                idx as u64,
                &mut rng,
            ) {
                Ok(i) => i,
                Err(e) => return Some(format!("{tag}: generation {e}")),
            };
            let mut suite = fresh_suite(&inst);
            let out = match one_sided_learn(
                &inst.points,
                &mut suite,
                0,
                &LearnConfig::default(),
                &mut rng,
            ) {
                Ok(o) => o,
                Err(e) => return Some(format!("{tag}: learner {e}")),
            };
            let expected: Vec<usize> =
                (0..inst.n()).filter(|&i| inst.labels[i] == 0).collect();
            if out.members != expected {
                return Some(format!("{tag}: recovery not exact"));
            }
            let n = inst.n() as f64;
            let ball = out.ball.as_ref().expect("positive class nonempty");
            let label_cap = n.log2().ceil() + 2.0;
            if (ball.label_queries as f64) > label_cap {
                return Some(format!(
                    "{tag}: {} ball labels exceed cap {label_cap}",
                    ball.label_queries
                ));
            }
            let seed_cap = 2.0 * (kappa / gamma).log2().ceil()
                + 10.0 * m as f64 * (4.0 * kappa * kappa / (gamma * gamma)).log2()
                + 30.0;
            if (out.seed_queries as f64) > seed_cap {
                return Some(format!(
                    "{tag}: {} seeds exceed cap {seed_cap:.1}",
                    out.seed_queries
                ));
            }
            None
        })
        .collect();
    assert!(
        errors.is_empty(),
        "criterion 6: FAIL — {} of 50 one-sided trials failed: {}",
        errors.len(),
        errors.join("; ")
    );
    println!(
        "criterion 6: PASS — one-sided recovery 50/50 within label cap ceil(log2 n)+2 and the distortion-scaled seed cap"
    );
}

// ------------------------------------------------------------------ criterion 7

/// Exact closest-pair distance between two tiny hulls by enumerating all
/// support subsets (Caratheodory caps support at m+1 per side) and solving
/// each equality-constrained least-squares system.
fn qp_hull_distance(a: &[Point], b: &[Point]) -> f64 {
    let m = a[0].len();
    let cap = m + 1;
    let subsets = |n: usize| -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            if (mask.count_ones() as usize) <= cap {
                out.push((0..n).filter(|&i| mask >> i & 1 == 1).collect());
            }
        }
        out
    };
    let mut best = f64::INFINITY;
    for sa in subsets(a.len()) {
        for sb in subsets(b.len()) {
            let q = sa.len() + sb.len();
            // Stack the (negated) support points columnwise: dist = |M z|.
            let mut mmat = DMatrix::zeros(m, q);
            for (c, &i) in sa.iter().enumerate() {
                mmat.set_column(c, &a[i]);
            }
            for (c, &i) in sb.iter().enumerate() {
                mmat.set_column(sa.len() + c, &(-&b[i]));
            }
            // KKT system for min |Mz|^2 st sum(lambda)=1, sum(mu)=1.
            let mut kkt = DMatrix::zeros(q + 2, q + 2);
            kkt.view_mut((0, 0), (q, q))
                .copy_from(&(mmat.transpose() * &mmat * 2.0));
            for c in 0..sa.len() {
                kkt[(q, c)] = 1.0;
                kkt[(c, q)] = 1.0;
            }
            for c in sa.len()..q {
                kkt[(q + 1, c)] = 1.0;
                kkt[(c, q + 1)] = 1.0;
            }
            let mut rhs = DVector::zeros(q + 2);
            rhs[q] = 1.0;
            rhs[q + 1] = 1.0;
            let Some(sol) = kkt.clone().full_piv_lu().solve(&rhs) else {
                continue;
            };
            if (&kkt * &sol - &rhs).norm() > 1e-8 {
                continue;
            }
            let z = sol.rows(0, q).into_owned();
            if z.iter().any(|&v| v < -1e-9) {
                continue;
            }
            let suma: f64 = z.rows(0, sa.len()).iter().sum();
            let sumb: f64 = z.rows(sa.len(), sb.len()).iter().sum();
            if (suma - 1.0).abs() > 1e-7 || (sumb - 1.0).abs() > 1e-7 {
                continue;
            }
            best = best.min((&mmat * z).norm());
        }
    }
    best
}

#[test]
fn criterion_07_geometry_kernel() {
    // Cross-polytope MVEE is the unit ball.
    let m = 3;
    let mut pts = Vec::new();
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        pts.push(e.clone());
        pts.push(-e);
    }
    let ball = mvee(&pts, 1e-6).expect("cross-polytope mvee");
    assert!(
        ball.center.amax() <= 1e-5,
        "criterion 7: FAIL — cross-polytope center {:?} off origin",
        ball.center
    );
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(
                (ball.form[(i, j)] - want).abs() <= 1e-5,
                "criterion 7: FAIL — cross-polytope form entry ({i},{j}) = {} != {want}",
                ball.form[(i, j)]
            );
        }
    }

    // John containment: the 1/((1+eps) m)-shrunk MVEE sits inside the hull.
    let eps = 1e-6;
    let john_errors: Vec<String> = (0..150usize)
        .into_par_iter()
        .filter_map(|idx| {
            let m = 2 + idx / 50;
            let mut rng = rng_for(0xC7, idx as u64);
            let n = rng.gen_range(m + 2..=16);
            let set: Vec<Point> = (0..n)
                .map(|_| DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal)))
                .collect();
            let e = mvee(&set, eps).expect("mvee");
            if e.rank < m {
                return Some(format!("m={m} trial={idx}: degenerate mvee"));
            }
            let chol = e.form.clone().cholesky().expect("spd form");
            let lt = chol.l().transpose();
            for probe in 0..200 {
                let dir =
                    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                let radius: f64 = rng.gen_range(0.0..0.999f64);
                let u = &dir * (radius.powf(1.0 / m as f64) / dir.norm());
                let v = lt
                    .clone()
                    .solve_upper_triangular(&u)
                    .expect("triangular solve");
                let x = &e.center + v / ((1.0 + eps) * m as f64);
                if !hull_membership(&x, &set, 1e-6) {
                    return Some(format!("m={m} trial={idx} probe={probe}: point escapes hull"));
                }
            }
            None
        })
        .collect();
    assert!(
        john_errors.is_empty(),
        "criterion 7: FAIL — John containment: {}",
        john_errors.join("; ")
    );

    // hull_distance against the subset-enumeration QP oracle.
    let qp_errors: Vec<String> = (0..100usize)
        .into_par_iter()
        .filter_map(|idx| {
            let m = 2 + idx % 2;
            let mut rng = rng_for(0xC7D, idx as u64);
            let na = rng.gen_range(2..=5);
            let nb = rng.gen_range(2..=5);
            let gauss = |rng: &mut ChaCha12Rng| {
                DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
            };
            let a: Vec<Point> = (0..na).map(|_| gauss(&mut rng)).collect();
            let shift = gauss(&mut rng) * rng.gen_range(0.0..2.0f64);
            let b: Vec<Point> = (0..nb).map(|_| gauss(&mut rng) + &shift).collect();
            let fast = hull_distance(&a, &b, &SeminormMetric::euclidean(m))
                .expect("hull_distance")
                .dist;
            let slow = qp_hull_distance(&a, &b);
            if (fast - slow).abs() > 1e-6 {
                return Some(format!(
                    "pair {idx} (m={m}): hull_distance {fast} vs QP {slow}"
                ));
            }
            None
        })
        .collect();
    assert!(
        qp_errors.is_empty(),
        "criterion 7: FAIL — QP comparison: {}",
        qp_errors.join("; ")
    );
    println!(
        "criterion 7: PASS — cross-polytope MVEE within 1e-5, John containment on 150 sets x 200 probes, hull_distance matches the QP oracle within 1e-6 on 100 pairs"
    );
}

// ------------------------------------------------------------------ criterion 8

#[test]
fn criterion_08_sampling_properties() {
    // Half-disk centroid.
    let mut rng = rng_for(0xC8, 0);
    let body = ConvexBody::unit_ball(2);
    let mut e0 = DVector::zeros(2);
    e0[0] = 1.0;
    let cut = Halfspace::homogeneous(e0);
    let outcome = refresh_rounding(&body, &cut, &SamplingConfig::strict(2), &mut rng)
        .expect("half-disk refresh");
    let want = 4.0 / (3.0 * std::f64::consts::PI);
    assert!(
        (outcome.centroid[0] - want).abs() <= 0.1 && outcome.centroid[1].abs() <= 0.1,
        "criterion 8: FAIL — half-disk centroid {:?} not within 0.1 of ({want:.4}, 0)",
        outcome.centroid
    );

    // Whitening spectral check on a skewed cloud.
    let mut rng = rng_for(0xC8, 1);
    let samples: Vec<Point> = (0..3000)
        .map(|_| {
            let dir = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let r: f64 = rng.gen_range(0.0..1.0f64);
            let ball = &dir * (r.sqrt() / dir.norm());
            DVector::from_vec(vec![3.0 * ball[0] + 1.0, 0.5 * ball[1] + 2.0])
        })
        .collect();
    let spectral_ratio = |pts: &[Point]| {
        let n = pts.len() as f64;
        let mean = pts.iter().fold(DVector::zeros(2), |acc, p| acc + p) / n;
        let mut cov = DMatrix::zeros(2, 2);
        for p in pts {
            let d = p - &mean;
            cov += &d * d.transpose();
        }
        cov /= n;
        let eig = cov.symmetric_eigen().eigenvalues;
        eig.max() / eig.min()
    };
    assert!(spectral_ratio(&samples) >= 10.0, "skew sanity check");
    let w = rounding_transform(&samples).expect("whitening");
    let whitened: Vec<Point> = samples.iter().map(|p| w.apply(p)).collect();
    let ratio = spectral_ratio(&whitened);
    assert!(
        ratio <= 1.3,
        "criterion 8: FAIL — whitened covariance eigenvalue ratio {ratio:.3} exceeds 1.3"
    );

    // relax_cut boundary identity + containment probes.
    let dim = 4;
    let mut rng = rng_for(0xC8, 2);
    let gauss =
        |rng: &mut ChaCha12Rng| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    for triple in 0..200 {
        let mut mu = gauss(&mut rng);
        mu /= mu.norm();
        let mut u = gauss(&mut rng);
        if u.dot(&mu) >= 0.0 {
            u = -u;
        }
        let mut anchor;
        loop {
            anchor = gauss(&mut rng);
            if anchor.dot(&mu) < 0.0 {
                anchor = -anchor;
            }
            if anchor.dot(&mu) > 0.05 {
                break;
            }
        }
        let relaxed = relax_cut(&u, &anchor, &mu)
            .unwrap_or_else(|| panic!("triple {triple}: relaxation unavailable"));
        assert!(
            relaxed.dot(&mu).abs() <= 1e-9,
            "criterion 8: FAIL — triple {triple}: <u*, mu> = {} beyond 1e-9",
            relaxed.dot(&mu)
        );
        for probe in 0..1000 {
            let dir = gauss(&mut rng);
            let r: f64 = rng.gen_range(0.0..1.0f64);
            let x = &dir * (r.powf(1.0 / dim as f64) / dir.norm());
            if u.dot(&x) <= 0.0 && anchor.dot(&x) <= 0.0 && relaxed.dot(&x) > 1e-9 {
                panic!(
                    "criterion 8: FAIL — triple {triple} probe {probe}: relaxed cut drops a version-space point (<u*,x> = {})",
                    relaxed.dot(&x)
                );
            }
        }
    }
    println!(
        "criterion 8: PASS — half-disk centroid within 0.1 of 4/(3pi), whitening spectral ratio <= 1.3, relax_cut identity and containment clean on 200 triples x 1000 probes"
    );
}

// ------------------------------------------------------------------ criterion 9

#[test]
fn criterion_09_grid_margin_bound() {
    let m = 2usize;
    let step = 1.0 / 3.0;
    let mut grid = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            grid.push(DVector::from_vec(vec![
                -1.0 + i as f64 * step,
                -1.0 + j as f64 * step,
            ]));
        }
    }
    let bound = grid_margin_bound(step, m);
    let mut rng = rng_for(0xC9, 0);
    let mut done = 0usize;
    while done < 20 {
        let mut w = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        w /= w.norm();
        let b: f64 = rng.gen_range(-0.9..0.9f64);
        let margins: Vec<f64> = grid.iter().map(|x| w.dot(x) - b).collect();
        if margins.iter().any(|v| v.abs() < 1e-9) {
            continue;
        }
        let labels: Vec<usize> = margins.iter().map(|&v| usize::from(v <= 0.0)).collect();
        if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
            continue;
        }
        done += 1;
        let pos: Vec<Point> = grid
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == 0)
            .map(|(p, _)| p.clone())
            .collect();
        let neg: Vec<Point> = grid
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == 1)
            .map(|(p, _)| p.clone())
            .collect();
        let dist = hull_distance(&pos, &neg, &SeminormMetric::euclidean(m))
            .expect("hull_distance")
            .dist;
        assert!(
            dist + 1e-9 >= bound,
            "criterion 9: FAIL — separator {done}: hull distance {dist:.6} below grid bound {bound:.6}"
        );
        let mut suite = OracleSuite::new(
            hullmargin::oracles::TargetPartition::new(labels.clone(), 2),
            SeedPolicy::SmallestIndex,
        );
        let all: Vec<usize> = (0..grid.len()).collect();
        let out = cp_learn(&grid, &all, &mut suite, 0, 1, &CpConfig::default(), &mut rng)
            .unwrap_or_else(|e| panic!("criterion 9: cp_learn separator {done}: {e}"));
        let mut learned = vec![1usize; grid.len()];
        for &i in &out.positive {
            learned[i] = 0;
        }
        assert_eq!(
            learned, labels,
            "criterion 9: FAIL — cp_learn missed separator {done}"
        );
    }
    println!(
        "criterion 9: PASS — 20 random separators on the 7x7 step-1/3 grid respect (c/sqrt(m))^(m+2) = {bound:.2e} and cp_learn recovers each exactly"
    );
}

// ----------------------------------------------------------------- criterion 10

fn run_cli(args: &[&str], dir: &std::path::Path) -> (String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hullmargin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn hullmargin");
    assert!(
        out.status.success(),
        "hullmargin {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn criterion_10_cli_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let read = |name: &str| std::fs::read(d.join(name)).expect("read output");

    let mut transcripts: HashMap<&str, Vec<Vec<u8>>> = HashMap::new();
    for pass in 0..2 {
        run_cli(
            &["generate", "--family", "ellipsoidal", "--m", "2", "--k", "2", "--n", "30",
              "--gamma", "0.2", "--seed", "11", "--out", "ell.json"],
            d,
        );
        run_cli(
            &["generate", "--family", "staircase", "--m", "3", "--gamma", "0.005",
              "--seed", "7", "--out", "stair.json"],
            d,
        );
        run_cli(
            &["generate", "--family", "grid", "--m", "2", "--bits", "4", "--seed", "5",
              "--out", "grid.json"],
            d,
        );
        run_cli(
            &["learn", "--instance", "ell.json", "--learner", "bin", "--seed", "3",
              "--verify", "--out", "learned.json", "--transcript", "queries.jsonl"],
            d,
        );
        run_cli(
            &["bench", "--family", "ellipsoidal", "--learner", "cp", "--m", "2", "--k", "2",
              "--n", "20", "--gamma", "0.2,0.1", "--trials", "3", "--seed", "1",
              "--out", "bench.csv"],
            d,
        );
        let (verify_stdout, _) = run_cli(&["verify", "--instance", "stair.json"], d);
        for name in ["ell.json", "stair.json", "grid.json", "learned.json",
                     "queries.jsonl", "bench.csv"] {
            transcripts.entry(name).or_default().push(read(name));
        }
        transcripts
            .entry("verify.stdout")
            .or_default()
            .push(verify_stdout.into_bytes());
        if pass == 0 {
            for name in ["ell.json", "stair.json", "grid.json", "learned.json",
                         "queries.jsonl", "bench.csv"] {
                std::fs::remove_file(d.join(name)).expect("clear outputs");
            }
        }
    }
    for (name, versions) in &transcripts {
        assert_eq!(versions.len(), 2);
        assert!(
            versions[0] == versions[1],
            "criterion 10: FAIL — rerun of {name} produced different bytes"
        );
    }
    println!(
        "criterion 10: PASS — generate/learn/bench/verify reruns byte-identical across {} outputs",
        transcripts.len()
    );
}
