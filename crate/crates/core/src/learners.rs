//! Top-level learners: the binary and k-class hull-margin learners, the
//! distance-ordered ball search, the one-sided learner, and the
//! bit-complexity margin floors.

use std::collections::HashMap;

use crate::cutting_plane::{cp_learn, CpConfig, CpError};
use crate::geometry::{AffineMap, Ellipsoid, GeomError, Point};
use crate::oracles::{OracleError, OracleSuite};
use crate::rounding::{round_partition, RoundError, Rounding};
use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Cut(#[from] CpError),
    #[error(transparent)]
    Round(#[from] RoundError),
    #[error("point {index} is not in the positive class (protocol misuse)")]
    NotPositive { index: usize },
    #[error("{calls} recursive calls exceed the class-permutation budget")]
    RecursionDepthExceeded { calls: usize },
}

pub type LearnResult<T> = Result<T, LearnError>;

#[derive(Debug, Clone)]
pub struct LearnConfig {
    /// Draw multiplier for the trap-rounding threshold ceil(c * m^2).
    pub round_c: f64,
    /// Use the slow high-accuracy sampling schedule inside cutting planes.
    pub strict_sampling: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { round_c: 5.0, strict_sampling: false }
    }
}

impl LearnConfig {
    fn cp(&self) -> CpConfig {
        CpConfig { strict_sampling: self.strict_sampling, max_rounds: None }
    }
}

/// One trap-rounding invocation kept for offline auditing.
#[derive(Debug, Clone)]
pub struct RoundingAudit {
    pub active: Vec<usize>,
    pub rounding: Rounding,
}

/// A learned labeling plus its query accounting and audit trail.
#[derive(Debug, Clone)]
pub struct LearnedPartition {
    /// Class per point index; learners assign every index they were given.
    pub assignment: Vec<Option<usize>>,
    pub seed_queries: usize,
    pub label_queries: usize,
    pub roundings: Vec<RoundingAudit>,
    /// Recursive invocations made below the top-level call.
    pub recursive_calls: usize,
}

impl LearnedPartition {
    /// The complete labeling, if every point was assigned.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.assignment.iter().copied().collect()
    }
}

/// Coordinate change sending a part's ellipsoid to the unit ball: full-rank
/// ellipsoids map in place, rank-deficient ones drop to hull coordinates,
/// and point-like ones just translate to the origin.
fn part_transform(e: &Ellipsoid) -> AffineMap {
    if e.rank == 0 {
        AffineMap::new(DMatrix::identity(e.dim(), e.dim()), -e.center.clone())
    } else if e.rank == e.dim() {
        e.to_unit_ball_transform()
            .unwrap_or_else(|_| e.to_unit_ball_coords())
    } else {
        e.to_unit_ball_coords()
    }
}

/// Apply `map` to the points at `indices`, leaving other slots as
/// zero-vector placeholders (they are never read).
fn transform_points(points: &[Point], indices: &[usize], map: &AffineMap) -> Vec<Point> {
    let mut out = vec![nalgebra::DVector::zeros(map.dim_out()); points.len()];
    for &i in indices {
        out[i] = map.apply(&points[i]);
    }
    out
}

/// Exact recovery of a hidden 2-class labeling: trap-round the point set,
/// send each part's ellipsoid to the unit ball, run the cutting-plane
/// learner inside each part with that part's class as positive, and merge.
pub fn bin_learn<R: Rng>(
    points: &[Point],
    suite: &mut OracleSuite,
    cfg: &LearnConfig,
    rng: &mut R,
) -> LearnResult<LearnedPartition> {
    assert_eq!(suite.k(), 2, "the binary learner needs a 2-class oracle");
    let n = suite.n();
    let active: Vec<usize> = (0..n).collect();
    let seeds0 = suite.ledger().seed_count();
    let labels0 = suite.ledger().label_count();

    let rounding = round_partition(points, &active, suite, cfg.round_c, rng)?;
    let mut assignment = vec![None; n];
    for class in 0..2 {
        let part = &rounding.parts[class];
        if part.indices.is_empty() {
            continue;
        }
        let e = part.ellipsoid.as_ref().expect("nonempty parts carry ellipsoids");
        let map = part_transform(e);
        let tpoints = transform_points(points, &part.indices, &map);
        let out = cp_learn(&tpoints, &part.indices, suite, class, 1 - class, &cfg.cp(), rng)?;
        for &i in &out.positive {
            assignment[i] = Some(class);
        }
        for &i in &out.negative {
            assignment[i] = Some(1 - class);
        }
    }
    Ok(LearnedPartition {
        assignment,
        seed_queries: suite.ledger().seed_count() - seeds0,
        label_queries: suite.ledger().label_count() - labels0,
        roundings: vec![RoundingAudit { active, rounding }],
        recursive_calls: 0,
    })
}

struct KState {
    assignment: Vec<Option<usize>>,
    audits: Vec<RoundingAudit>,
    recursive_calls: usize,
    call_budget: usize,
}

/// Exact recovery of a hidden k-class labeling by recursive elimination:
/// trap-round, isolate each part's own class as the intersection of its
/// pairwise cutting-plane separations, and recurse on the part's leftover
/// with that class removed from the candidate set.
pub fn kclass_learn<R: Rng>(
    points: &[Point],
    suite: &mut OracleSuite,
    cfg: &LearnConfig,
    rng: &mut R,
) -> LearnResult<LearnedPartition> {
    let n = suite.n();
    let k = suite.k();
    let seeds0 = suite.ledger().seed_count();
    let labels0 = suite.ledger().label_count();
    let mut st = KState {
        assignment: vec![None; n],
        audits: Vec::new(),
        recursive_calls: 0,
        call_budget: (1..=k).product(),
    };
    let active: Vec<usize> = (0..n).collect();
    let classes: Vec<usize> = (0..k).collect();
    kclass_recurse(points, &active, &classes, suite, cfg, rng, &mut st, true)?;
    Ok(LearnedPartition {
        assignment: st.assignment,
        seed_queries: suite.ledger().seed_count() - seeds0,
        label_queries: suite.ledger().label_count() - labels0,
        roundings: st.audits,
        recursive_calls: st.recursive_calls,
    })
}

#[allow(clippy::too_many_arguments)]
fn kclass_recurse<R: Rng>(
    points: &[Point],
    active: &[usize],
    classes: &[usize],
    suite: &mut OracleSuite,
    cfg: &LearnConfig,
    rng: &mut R,
    st: &mut KState,
    top: bool,
) -> LearnResult<()> {
    if active.is_empty() {
        return Ok(());
    }
    if !top {
        st.recursive_calls += 1;
        if st.recursive_calls > st.call_budget {
            return Err(LearnError::RecursionDepthExceeded { calls: st.recursive_calls });
        }
    }
    if classes.len() == 1 {
        let probe = *active.iter().min().unwrap();
        let answer = suite.label(probe)?;
        for &i in active {
            st.assignment[i] = Some(answer);
        }
        return Ok(());
    }

    let rounding = round_partition(points, active, suite, cfg.round_c, rng)?;
    st.audits.push(RoundingAudit {
        active: active.to_vec(),
        rounding: rounding.clone(),
    });
    for &i in classes {
        let part = rounding.parts[i].clone();
        if part.indices.is_empty() {
            continue;
        }
        let e = part.ellipsoid.as_ref().expect("nonempty parts carry ellipsoids");
        let map = part_transform(e);
        let tpoints = transform_points(points, &part.indices, &map);
        let mut own: Vec<usize> = part.indices.clone();
        for &j in classes {
            if j == i {
                continue;
            }
            let out = cp_learn(&tpoints, &part.indices, suite, i, j, &cfg.cp(), rng)?;
            let positive: std::collections::HashSet<usize> = out.positive.into_iter().collect();
            own.retain(|idx| positive.contains(idx));
        }
        for &idx in &own {
            st.assignment[idx] = Some(i);
        }
        let own_set: std::collections::HashSet<usize> = own.into_iter().collect();
        let leftover: Vec<usize> = part
            .indices
            .iter()
            .copied()
            .filter(|idx| !own_set.contains(idx))
            .collect();
        if !leftover.is_empty() {
            let remaining: Vec<usize> =
                classes.iter().copied().filter(|&c| c != i).collect();
            kclass_recurse(points, &leftover, &remaining, suite, cfg, rng, st, false)?;
        }
    }
    Ok(())
}

/// Result of the distance-ordered ball search.
#[derive(Debug, Clone)]
pub struct BallSearchOutcome {
    /// Indices of the retained ball, ascending.
    pub xhat: Vec<usize>,
    pub label_queries: usize,
    pub seed_queries: usize,
    /// Distance to the last confirmed-positive point of the binary probe.
    pub inner_radius: f64,
    /// Radius of the ball actually returned.
    pub outer_radius: f64,
}

const BALL_TOL: f64 = 1e-9;

/// Shrink `X` to a ball around the positive point `x1` that provably
/// contains the whole positive class: binary-search the distance ordering
/// for a positive/negative adjacent pair, then grow an annulus probe until a
/// seed query certifies that no positive point is left outside.
pub fn ball_search(
    points: &[Point],
    x1: usize,
    suite: &mut OracleSuite,
    pos: usize,
    cache: &mut HashMap<usize, usize>,
) -> LearnResult<BallSearchOutcome> {
    let n = suite.n();
    let seeds0 = suite.ledger().seed_count();
    let labels0 = suite.ledger().label_count();
    if label_cached(suite, cache, x1)? != pos {
        return Err(LearnError::NotPositive { index: x1 });
    }

    let dist = |i: usize| (&points[i] - &points[x1]).norm();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));

    let finish = |xhat: Vec<usize>, inner: f64, outer: f64, suite: &OracleSuite| {
        let mut xhat = xhat;
        xhat.sort_unstable();
        Ok(BallSearchOutcome {
            xhat,
            label_queries: suite.ledger().label_count() - labels0,
            seed_queries: suite.ledger().seed_count() - seeds0,
            inner_radius: inner,
            outer_radius: outer,
        })
    };

    let farthest = *order.last().unwrap();
    if label_cached(suite, cache, farthest)? == pos {
        let all: Vec<usize> = (0..n).collect();
        let outer = dist(farthest);
        return finish(all, outer, outer, suite);
    }

    // Positions are 1-based over the distance ordering.
    let mut lo = 1usize;
    let mut hi = n;
    while hi - lo >= 2 {
        let mid = (hi + lo).div_ceil(2);
        if label_cached(suite, cache, order[mid - 1])? == pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let inner = dist(order[lo - 1]);
    let big_r = dist(order[hi - 1]);

    let mut t = 1.0f64;
    loop {
        let reach = big_r / t;
        let annulus: Vec<usize> = (0..n)
            .filter(|&i| {
                let d = dist(i);
                d >= big_r - BALL_TOL && d <= reach + BALL_TOL
            })
            .collect();
        let hit = seed_or_nil(suite, &annulus, pos)?;
        let radius = if hit.is_none() { inner } else { reach };
        let xhat: Vec<usize> = (0..n).filter(|&i| dist(i) <= radius + BALL_TOL).collect();
        let outside: Vec<usize> = (0..n).filter(|&i| dist(i) > radius + BALL_TOL).collect();
        if seed_or_nil(suite, &outside, pos)?.is_none() {
            return finish(xhat, inner, radius, suite);
        }
        t /= 2.0;
    }
}

/// Learn the members of the positive class when only that class carries a
/// hull-margin guarantee: find one positive, shrink to a certified ball
/// around it, translate it to the origin, and cut-plane the remainder.
pub fn one_sided_learn<R: Rng>(
    points: &[Point],
    suite: &mut OracleSuite,
    pos: usize,
    cfg: &LearnConfig,
    rng: &mut R,
) -> LearnResult<OneSidedOutcome> {
    assert_eq!(suite.k(), 2, "the one-sided learner needs a 2-class oracle");
    let n = suite.n();
    let seeds0 = suite.ledger().seed_count();
    let labels0 = suite.ledger().label_count();
    let all: Vec<usize> = (0..n).collect();
    let x1 = match seed_or_nil(suite, &all, pos)? {
        None => {
            return Ok(OneSidedOutcome {
                members: Vec::new(),
                ball: None,
                seed_queries: suite.ledger().seed_count() - seeds0,
                label_queries: 0,
            })
        }
        Some(x) => x,
    };
    let mut cache = HashMap::new();
    cache.insert(x1, pos);
    let ball = ball_search(points, x1, suite, pos, &mut cache)?;

    // Anchor the ball at its positive center so the lifted scale matches the
    // ball's radius.
    let tpoints: Vec<Point> = points.iter().map(|p| p - &points[x1]).collect();
    let out = cp_learn(&tpoints, &ball.xhat, suite, pos, 1 - pos, &cfg.cp(), rng)?;
    Ok(OneSidedOutcome {
        members: out.positive,
        ball: Some(ball),
        seed_queries: suite.ledger().seed_count() - seeds0,
        label_queries: suite.ledger().label_count() - labels0,
    })
}

#[derive(Debug, Clone)]
pub struct OneSidedOutcome {
    /// Indices learned to be in the positive class, ascending.
    pub members: Vec<usize>,
    /// Ball-search diagnostics (None when there was no positive at all).
    pub ball: Option<BallSearchOutcome>,
    pub seed_queries: usize,
    pub label_queries: usize,
}

/// Margin floor for coordinates writable with `bits` bits in dimension `m`:
/// `2^(-c_exp * m^2 * bits)`.
pub fn rational_margin_bound(bits: u32, m: usize, c_exp: f64) -> f64 {
    2.0f64.powf(-(c_exp * (m * m) as f64 * bits as f64))
}

/// Margin floor for linearly separable subsets of the step-`c` grid in
/// `[-1, 1]^m`: `(c / sqrt(m))^(m + 2)`.
pub fn grid_margin_bound(c: f64, m: usize) -> f64 {
    (c / (m as f64).sqrt()).powi(m as i32 + 2)
}

fn label_cached(
    suite: &mut OracleSuite,
    cache: &mut HashMap<usize, usize>,
    idx: usize,
) -> Result<usize, OracleError> {
    if let Some(&l) = cache.get(&idx) {
        return Ok(l);
    }
    let l = suite.label(idx)?;
    cache.insert(idx, l);
    Ok(l)
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
