//! Trap-based rounding: repeatedly sample labels from the active set until
//! one class accumulates enough draws, enclose that class's sampled points in
//! their minimum-volume ellipsoid, and peel off every active point the
//! ellipsoid captures. Each class's accumulated captures get a final
//! enclosing ellipsoid whose induced seminorm restores a margin floor that
//! depends only on the dimension.

use crate::geometry::{hull_distance, mvee, Ellipsoid, GeomError, Point};
use crate::oracles::{OracleError, OracleSuite};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoundError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

pub type RoundResult<T> = Result<T, RoundError>;

/// Membership slack when testing capture by a trap ellipsoid.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Relative volume tolerance for enclosing-ellipsoid fits.
pub const MVEE_EPS: f64 = 1e-6;

/// Margin dilution factor: a labeling with margin `gamma` keeps margin at
/// least `gamma / margin_divisor(m)` within each part under that part's
/// ellipsoid metric.
pub fn margin_divisor(m: usize) -> f64 {
    (m * m * (m + 1)) as f64
}

/// One class's share of a rounding: the captured point indices and their
/// minimum-volume enclosing ellipsoid (None iff the class captured nothing).
#[derive(Debug, Clone)]
pub struct RoundedPart {
    pub indices: Vec<usize>,
    pub ellipsoid: Option<Ellipsoid>,
}

#[derive(Debug, Clone)]
pub struct Rounding {
    /// parts[c] collects the points peeled off by class-c traps.
    pub parts: Vec<RoundedPart>,
    /// The margin dilution factor for this dimension.
    pub alpha: f64,
    /// Label queries spent (one per draw, repeats included).
    pub draw_count: usize,
}

impl Rounding {
    /// Classes whose part is nonempty.
    pub fn occupied(&self) -> Vec<usize> {
        (0..self.parts.len())
            .filter(|&c| !self.parts[c].indices.is_empty())
            .collect()
    }
}

/// Partition the active points into per-class parts by repeated trapping.
///
/// Each pass draws uniformly (with replacement, every draw a LABEL query)
/// from the still-active points until some class has `ceil(c * m^2)` draws,
/// fits the minimum-volume ellipsoid of that class's drawn points, and
/// removes every active point the ellipsoid captures. The drawn points are
/// captured by construction, so the active set strictly shrinks.
pub fn round_partition<R: Rng>(
    points: &[Point],
    active: &[usize],
    suite: &mut OracleSuite,
    c: f64,
    rng: &mut R,
) -> RoundResult<Rounding> {
    assert!(c > 0.0, "draw multiplier must be positive");
    assert!(!points.is_empty(), "rounding needs a point set");
    let m = points[0].len();
    let k = suite.k();
    let threshold = ((c * (m * m) as f64).ceil() as usize).max(1);

    let mut remaining: Vec<usize> = active.to_vec();
    let mut captured: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut draw_count = 0usize;

    while !remaining.is_empty() {
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
        let winner = loop {
            let pick = remaining[rng.gen_range(0..remaining.len())];
            let class = suite.label(pick)?;
            draw_count += 1;
            buckets[class].push(pick);
            if buckets[class].len() >= threshold {
                break class;
            }
        };
        let mut sample = buckets[winner].clone();
        sample.sort_unstable();
        sample.dedup();
        let sample_pts: Vec<Point> = sample.iter().map(|&i| points[i].clone()).collect();
        let trap = mvee(&sample_pts, MVEE_EPS)?;

        let mut kept = Vec::with_capacity(remaining.len());
        let mut caught = Vec::new();
        for idx in remaining {
            if trap.contains(&points[idx], MEMBERSHIP_TOL) {
                caught.push(idx);
            } else {
                kept.push(idx);
            }
        }
        assert!(
            !caught.is_empty(),
            "a trap always captures its own sample points"
        );
        captured[winner].extend(caught);
        remaining = kept;
    }

    let mut parts = Vec::with_capacity(k);
    for indices in captured {
        let ellipsoid = if indices.is_empty() {
            None
        } else {
            let pts: Vec<Point> = indices.iter().map(|&i| points[i].clone()).collect();
            Some(mvee(&pts, MVEE_EPS)?)
        };
        parts.push(RoundedPart { indices, ellipsoid });
    }
    Ok(Rounding {
        parts,
        alpha: margin_divisor(m),
        draw_count,
    })
}

/// Offline audit of a rounding against the ground-truth labels.
#[derive(Debug, Clone)]
pub struct RoundingReport {
    /// Parts are disjoint and cover the active set exactly.
    pub partition_ok: bool,
    /// Every captured point sits inside its part's ellipsoid (tol 1e-9), and
    /// nonempty parts carry an ellipsoid.
    pub containment_ok: bool,
    /// Within each part, every pair of class hulls is at distance at least
    /// `gamma / alpha - tol` under the part's ellipsoid metric.
    pub margin_ok: bool,
    /// Smallest pairwise hull distance observed (infinite if no pair).
    pub min_margin: f64,
    pub failures: Vec<String>,
}

impl RoundingReport {
    pub fn ok(&self) -> bool {
        self.partition_ok && self.containment_ok && self.margin_ok
    }
}

/// Check partition exactness, ellipsoid containment, and the per-part margin
/// floor `gamma / alpha - margin_tol` under each part's metric.
pub fn verify_rounding(
    points: &[Point],
    active: &[usize],
    labels: &[usize],
    rounding: &Rounding,
    gamma: f64,
    margin_tol: f64,
) -> RoundResult<RoundingReport> {
    let mut failures = Vec::new();

    let mut expected: Vec<usize> = active.to_vec();
    expected.sort_unstable();
    let mut got: Vec<usize> = rounding
        .parts
        .iter()
        .flat_map(|p| p.indices.iter().copied())
        .collect();
    got.sort_unstable();
    let duplicates = got.windows(2).any(|w| w[0] == w[1]);
    let partition_ok = !duplicates && got == expected;
    if duplicates {
        failures.push("a point index appears in two parts".into());
    } else if got != expected {
        failures.push("union of parts differs from the active set".into());
    }

    let mut containment_ok = true;
    for (class, part) in rounding.parts.iter().enumerate() {
        match (&part.ellipsoid, part.indices.is_empty()) {
            (None, true) => {}
            (None, false) => {
                containment_ok = false;
                failures.push(format!("part {class} is nonempty but has no ellipsoid"));
            }
            (Some(e), _) => {
                for &idx in &part.indices {
                    if !e.contains(&points[idx], MEMBERSHIP_TOL) {
                        containment_ok = false;
                        failures.push(format!(
                            "point {idx} escapes part {class}'s ellipsoid"
                        ));
                    }
                }
            }
        }
    }

    let mut margin_ok = true;
    let mut min_margin = f64::INFINITY;
    let floor = gamma / rounding.alpha - margin_tol;
    for (class, part) in rounding.parts.iter().enumerate() {
        let Some(e) = &part.ellipsoid else { continue };
        let metric = e.metric();
        let mut by_class: Vec<(usize, Vec<Point>)> = Vec::new();
        for &idx in &part.indices {
            let l = labels[idx];
            match by_class.iter_mut().find(|(c, _)| *c == l) {
                Some((_, v)) => v.push(points[idx].clone()),
                None => by_class.push((l, vec![points[idx].clone()])),
            }
        }
        for a in 0..by_class.len() {
            for b in a + 1..by_class.len() {
                let sep = hull_distance(&by_class[a].1, &by_class[b].1, &metric)?;
                min_margin = min_margin.min(sep.dist);
                if sep.dist < floor {
                    margin_ok = false;
                    failures.push(format!(
                        "part {class}: classes {} and {} at distance {:.3e} < {:.3e}",
                        by_class[a].0, by_class[b].0, sep.dist, floor
                    ));
                }
            }
        }
    }

    Ok(RoundingReport {
        partition_ok,
        containment_ok,
        margin_ok,
        min_margin,
        failures,
    })
}
