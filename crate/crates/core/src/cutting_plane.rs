//! Seed-driven cutting-plane separation of one class from another.
//!
//! Points are lifted by one coordinate so affine separators become
//! homogeneous ones; the hypothesis space is the unit ball in the lifted
//! dimension. Each round splits the unresolved points by the current
//! centroid direction, asks for a wrong-side witness of either class, and
//! cuts the hypothesis body through the centroid with a relaxation anchored
//! at the very first cut's witness. The body is re-rounded after every cut,
//! and the refreshed sample mean becomes the next centroid.

use std::collections::HashMap;

use crate::geometry::{Halfspace, Point};
use crate::oracles::{OracleError, OracleSuite};
use crate::sampling::{refresh_rounding, ConvexBody, SamplingConfig, SamplingError};
use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CpError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("witness stream outlived the point set after {rounds} rounds")]
    SeparabilityViolated { rounds: usize },
    #[error("update budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
}

pub type CpResult<T> = Result<T, CpError>;

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct CpConfig {
    /// Use the slow high-accuracy sampling schedule.
    pub strict_sampling: bool,
    /// Hard cap on counterexample rounds (default: one per active point).
    pub max_rounds: Option<usize>,
}


/// One accepted counterexample and the cut it induced.
#[derive(Debug, Clone)]
pub struct CutRecord {
    pub round: usize,
    /// Index of the witness point.
    pub point: usize,
    /// +1 if the witness belongs to the positive class, -1 otherwise.
    pub sign: f64,
    /// Whether the centroid-relaxed cut was used (false = raw witness cut).
    pub relaxed: bool,
    /// Lifted cut normal (sign * direction); the body keeps its nonnegative side.
    pub normal: Point,
    /// Inner product of the relaxed direction with the centroid (~0 when relaxed).
    pub mu_dot: f64,
    /// Inner product of the anchor with the centroid at cut time (positive
    /// whenever the relaxation is usable; 0 on the unrelaxed first cut).
    pub anchor_dot: f64,
}

#[derive(Debug, Clone)]
pub struct CpOutcome {
    /// Indices assigned to the positive class's side.
    pub positive: Vec<usize>,
    /// Indices assigned to the negative class's side.
    pub negative: Vec<usize>,
    pub cuts: Vec<CutRecord>,
    /// Counterexample rounds consumed (excludes the final certificate round).
    pub rounds: usize,
    /// Seed queries spent by this run.
    pub seed_queries: usize,
}

const ANCHOR_TOL: f64 = 1e-12;

/// Lift `x` to `(x, r)`.
pub fn lift(x: &Point, r: f64) -> Point {
    let mut v = DVector::zeros(x.len() + 1);
    v.rows_mut(0, x.len()).copy_from(x);
    v[x.len()] = r;
    v
}

/// Relax a counterexample direction so the induced cut passes through the
/// centroid `mu`: subtract the `anchor` component that reproduces `u`'s
/// centroid inner product. Returns None when the anchor is too shallow
/// (`<anchor, mu> <= tol`) or the relaxed direction vanishes.
pub fn relax_cut(u: &Point, anchor: &Point, mu: &Point) -> Option<Point> {
    let anchor_dot = anchor.dot(mu);
    if anchor_dot <= ANCHOR_TOL {
        return None;
    }
    let relaxed = u - anchor * (u.dot(mu) / anchor_dot);
    if relaxed.norm() <= ANCHOR_TOL {
        return None;
    }
    Some(relaxed)
}

/// Learn a split of `active` with every class-`pos` point on the positive
/// side and every class-`neg` point on the negative side, using only seed
/// queries for the two classes. Points of other classes may land on either
/// side. Exact on binary instances.
pub fn cp_learn<R: Rng>(
    points: &[Point],
    active: &[usize],
    suite: &mut OracleSuite,
    pos: usize,
    neg: usize,
    cfg: &CpConfig,
    rng: &mut R,
) -> CpResult<CpOutcome> {
    let seeds_before = suite.ledger().seed_count();
    let mut known_pos: Vec<usize> = Vec::new();
    let mut known_neg: Vec<usize> = Vec::new();
    let mut cuts: Vec<CutRecord> = Vec::new();

    let finish = |mut positive: Vec<usize>,
                  mut negative: Vec<usize>,
                  cuts: Vec<CutRecord>,
                  rounds: usize,
                  suite: &OracleSuite| {
        positive.sort_unstable();
        negative.sort_unstable();
        Ok(CpOutcome {
            positive,
            negative,
            cuts,
            rounds,
            seed_queries: suite.ledger().seed_count() - seeds_before,
        })
    };

    // Trivial-side shortcuts: a NIL certifies a one-sided answer, a witness
    // pins one known label per class.
    match seed_or_nil(suite, active, neg)? {
        None => return finish(active.to_vec(), Vec::new(), cuts, 0, suite),
        Some(u) => known_neg.push(u),
    }
    let mut avail: Vec<usize> = active
        .iter()
        .copied()
        .filter(|i| *i != known_neg[0])
        .collect();
    match seed_or_nil(suite, &avail, pos)? {
        None => return finish(Vec::new(), active.to_vec(), cuts, 0, suite),
        Some(u) => known_pos.push(u),
    }
    avail.retain(|i| *i != known_pos[0]);

    // Lift so that affine separators become homogeneous.
    let radius = active
        .iter()
        .map(|&i| points[i].norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let lifted: HashMap<usize, Point> =
        active.iter().map(|&i| (i, lift(&points[i], radius))).collect();
    let dim = points[active[0]].len() + 1;
    let sampling = if cfg.strict_sampling {
        SamplingConfig::strict(dim)
    } else {
        SamplingConfig::for_dim(dim)
    };

    let mut body = ConvexBody::unit_ball(dim);
    let mut mu = DVector::zeros(dim);
    mu[0] = 1.0;
    let mut anchor: Option<Point> = None;
    let max_rounds = cfg.max_rounds.unwrap_or(active.len() + 1);

    for round in 0..=max_rounds {
        let (split_pos, split_neg): (Vec<usize>, Vec<usize>) = avail
            .iter()
            .copied()
            .partition(|&i| lifted[&i].dot(&mu) >= 0.0);

        let (witness, sign) = match seed_or_nil(suite, &split_pos, neg)? {
            Some(u) => (u, -1.0),
            None => match seed_or_nil(suite, &split_neg, pos)? {
                Some(u) => (u, 1.0),
                None => {
                    let mut positive = split_pos;
                    positive.extend_from_slice(&known_pos);
                    let mut negative = split_neg;
                    negative.extend_from_slice(&known_neg);
                    return finish(positive, negative, cuts, round, suite);
                }
            },
        };

        let u = &lifted[&witness];
        debug_assert!(
            sign * u.dot(&mu) <= 0.0,
            "witnesses come from the wrong side of the split"
        );
        let (normal, relaxed, mu_dot, anchor_dot) = match &anchor {
            None => (u * sign, false, 0.0, 0.0),
            Some(z) => match relax_cut(u, z, &mu) {
                Some(star) => {
                    let mu_dot = star.dot(&mu);
                    (star * sign, true, mu_dot, z.dot(&mu))
                }
                None => (u * sign, false, 0.0, z.dot(&mu)),
            },
        };
        if anchor.is_none() {
            anchor = Some(u * sign);
        }
        cuts.push(CutRecord {
            round,
            point: witness,
            sign,
            relaxed,
            normal: normal.clone(),
            mu_dot,
            anchor_dot,
        });

        let refreshed = refresh_rounding(&body, &Halfspace::homogeneous(normal), &sampling, rng)?;
        body = refreshed.body;
        mu = refreshed.centroid;

        if sign > 0.0 {
            known_pos.push(witness);
        } else {
            known_neg.push(witness);
        }
        avail.retain(|i| *i != witness);
    }
    Err(CpError::SeparabilityViolated { rounds: max_rounds })
}

/// Perceptron driven by the same witness protocol: split by the running
/// weight vector, ask for a wrong-side witness of either class, and add it
/// to the weights. No body maintenance, no witness retirement.
pub fn perceptron_seed_baseline(
    points: &[Point],
    active: &[usize],
    suite: &mut OracleSuite,
    pos: usize,
    neg: usize,
    max_updates: usize,
) -> CpResult<CpOutcome> {
    let seeds_before = suite.ledger().seed_count();
    let radius = active
        .iter()
        .map(|&i| points[i].norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let lifted: HashMap<usize, Point> =
        active.iter().map(|&i| (i, lift(&points[i], radius))).collect();
    let dim = points.first().map_or(1, |p| p.len() + 1);
    let mut w: Point = DVector::zeros(dim);
    let mut updates = 0usize;
    let mut cuts = Vec::new();
    loop {
        let (split_pos, split_neg): (Vec<usize>, Vec<usize>) = active
            .iter()
            .copied()
            .partition(|&i| lifted[&i].dot(&w) >= 0.0);
        let (witness, sign) = match seed_or_nil(suite, &split_pos, neg)? {
            Some(u) => (u, -1.0),
            None => match seed_or_nil(suite, &split_neg, pos)? {
                Some(u) => (u, 1.0),
                None => {
                    return Ok(CpOutcome {
                        positive: split_pos,
                        negative: split_neg,
                        cuts,
                        rounds: updates,
                        seed_queries: suite.ledger().seed_count() - seeds_before,
                    });
                }
            },
        };
        if updates >= max_updates {
            return Err(CpError::BudgetExceeded { budget: max_updates });
        }
        let u = &lifted[&witness];
        w += u * (sign / u.norm());
        updates += 1;
        cuts.push(CutRecord {
            round: updates,
            point: witness,
            sign,
            relaxed: false,
            normal: u * sign,
            mu_dot: 0.0,
            anchor_dot: 0.0,
        });
    }
}

fn seed_or_nil(
    suite: &mut OracleSuite,
    u: &[usize],
    class: usize,
) -> Result<Option<usize>, OracleError> {
    if u.is_empty() {
        return Ok(None);
    }
    suite.seed(u, class)
}
