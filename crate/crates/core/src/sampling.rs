//! Near-uniform sampling from version-space bodies: intersections of the
//! unit ball with homogeneous halfspaces, kept well-rounded by a frame that
//! is refreshed from sample covariance after each new cut.

use crate::geometry::{mvee, psd_sqrt, AffineMap, Halfspace, Point, TOL};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("chord degenerated to width {0:.3e}")]
    EmptyChord(f64),
    #[error("sample covariance is rank deficient")]
    RankDeficientSamples,
    #[error("rounding lost: {accepted} accepted samples after {attempts} attempts")]
    RoundingLost { accepted: usize, attempts: usize },
}

pub type SamplingResult<T> = Result<T, SamplingError>;

/// Step counts for the random walk. Defaults are desk-scale; `strict` uses
/// the full worst-case polynomial walk lengths (configurable via the CLI
/// flag).
#[derive(Debug, Clone, Copy)]
pub struct SamplingConfig {
    /// Steps before the first recorded endpoint of a chain.
    pub burn_in: usize,
    /// Endpoints averaged / accepted per refresh.
    pub n_samples: usize,
    /// Steps between successive endpoints when warm-starting from the
    /// previous one (burn_in / 4 by default).
    pub warm_gap: usize,
    /// Candidate budget for rejection sampling before escalation.
    pub accept_cap: usize,
}

impl SamplingConfig {
    /// Desk-scale defaults for ambient dimension `d`:
    /// `burn_in = 100 d`, `n_samples = 16 d`, `warm_gap = burn_in / 4`.
    pub fn for_dim(d: usize) -> Self {
        let burn_in = 100 * d;
        let n_samples = 16 * d;
        SamplingConfig { burn_in, n_samples, warm_gap: burn_in / 4, accept_cap: 40 * n_samples }
    }

    /// Worst-case counts: walks of order d^5 ln d per endpoint and order d^2
    /// endpoints. Orders of magnitude slower; only for high-assurance runs.
    pub fn strict(d: usize) -> Self {
        let d5 = d.pow(5);
        let burn_in = d5 * ((d as f64).ln().ceil() as usize + 3);
        let n_samples = 16 * d * d;
        SamplingConfig { burn_in, n_samples, warm_gap: burn_in / 4, accept_cap: 40 * n_samples }
    }
}

/// Intersection of the unit ball `|x| <= 1` (implicit) with homogeneous
/// halfspaces, carrying a rounding frame. The frame maps frame coordinates to
/// original coordinates; in frame coordinates the body is approximately
/// `t`-rounded: `B(0, t) <= body <= B(0, 1)` with `t = frame_quality`
/// (spot-checked, not enforced).
#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    /// Unit-normal homogeneous constraints `<u, x> >= 0`.
    constraints: Vec<Halfspace>,
    frame: AffineMap,
    frame_inv: AffineMap,
    frame_quality: f64,
}

impl ConvexBody {
    /// The unit ball itself: identity frame, quality 1.
    pub fn unit_ball(dim: usize) -> Self {
        assert!(dim >= 1);
        ConvexBody {
            dim,
            constraints: Vec::new(),
            frame: AffineMap::identity(dim),
            frame_inv: AffineMap::identity(dim),
            frame_quality: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn frame(&self) -> &AffineMap {
        &self.frame
    }

    pub fn frame_quality(&self) -> f64 {
        self.frame_quality
    }

    /// Frame origin in original coordinates; the walk starts here.
    pub fn frame_origin(&self) -> Point {
        self.frame.offset.clone()
    }

    /// Membership with boundaries relaxed by `tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        if x.norm() > 1.0 + tol {
            return false;
        }
        self.constraints.iter().all(|h| h.contains(x, tol))
    }

    /// Smallest slack over the ball and all halfspaces (positive iff strictly
    /// interior).
    pub fn min_slack(&self, x: &Point) -> f64 {
        let mut s = 1.0 - x.norm();
        for h in &self.constraints {
            s = s.min(h.eval(x));
        }
        s
    }
}

/// One hit-and-run step from `current` (original coordinates, inside the
/// body): a direction is drawn uniformly in *frame* coordinates, the full
/// chord through `current` is computed in closed form, and a point uniform on
/// the chord is returned.
pub fn hit_and_run_step<R: Rng>(
    body: &ConvexBody,
    current: &Point,
    rng: &mut R,
) -> SamplingResult<Point> {
    let d = body.dim;
    // Unit direction in frame coordinates, mapped to original coordinates.
    let q = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qn = q.norm();
    let q = if qn > 0.0 { q / qn } else { DVector::from_fn(d, |i, _| (i == 0) as u8 as f64) };
    let w = &body.frame.linear * q;

    let (mut lo, mut hi) = ball_chord(current, &w)?;
    for h in &body.constraints {
        let s = h.normal.dot(&w);
        let v = h.eval(current);
        if s > 1e-300 {
            lo = lo.max(-v / s);
        } else if s < -1e-300 {
            hi = hi.min(-v / s);
        } else if v < -TOL.boundary {
            return Err(SamplingError::EmptyChord(0.0));
        }
    }
    let width = hi - lo;
    if width < 1e-12 {
        return Err(SamplingError::EmptyChord(width));
    }
    let a = rng.gen_range(lo..hi);
    Ok(current + w * a)
}

/// Chord of the unit ball along `w` through `z`.
fn ball_chord(z: &Point, w: &Point) -> SamplingResult<(f64, f64)> {
    let a = w.norm_squared();
    let b = z.dot(w);
    let c = z.norm_squared() - 1.0;
    let disc = b * b - a * c;
    if disc <= 0.0 || a <= 0.0 {
        return Err(SamplingError::EmptyChord(0.0));
    }
    let root = disc.sqrt();
    Ok(((-b - root) / a, (-b + root) / a))
}

/// Mean of `cfg.n_samples` walk endpoints: the first after `cfg.burn_in`
/// steps from the frame origin, later ones warm-started from their
/// predecessor after `cfg.warm_gap` further steps.
pub fn estimate_centroid<R: Rng>(
    body: &ConvexBody,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> SamplingResult<Point> {
    let mut z = body.frame_origin();
    for _ in 0..cfg.burn_in {
        z = hit_and_run_step(body, &z, rng)?;
    }
    let mut sum = z.clone();
    for _ in 1..cfg.n_samples {
        for _ in 0..cfg.warm_gap {
            z = hit_and_run_step(body, &z, rng)?;
        }
        sum += &z;
    }
    Ok(sum / cfg.n_samples as f64)
}

/// Whitening map from a sample cloud: `x -> C^{-1/2} (x - mean)`. Under the
/// returned map the cloud's covariance is the identity. Rank-deficient
/// covariances are rejected.
pub fn rounding_transform(samples: &[Point]) -> SamplingResult<AffineMap> {
    if samples.is_empty() {
        return Err(SamplingError::RankDeficientSamples);
    }
    let d = samples[0].len();
    if samples.len() <= d {
        return Err(SamplingError::RankDeficientSamples);
    }
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += s;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = s - &mean;
        cov += &c * c.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmax <= 0.0 || lmin <= TOL.rank * lmax {
        return Err(SamplingError::RankDeficientSamples);
    }
    let inv_root = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()));
    let linear = &eig.eigenvectors * DMatrix::from_diagonal(&inv_root) * eig.eigenvectors.transpose();
    let offset = -&linear * &mean;
    Ok(AffineMap::new(linear, offset))
}

/// Result of [`refresh_rounding`]: the cut body with a refreshed frame, the
/// sample mean of the accepted points (a centroid estimate for the new body),
/// the accepted samples themselves, and acceptance statistics.
#[derive(Debug, Clone)]
pub struct RefreshOutcome {
    pub body: ConvexBody,
    pub centroid: Point,
    pub samples: Vec<Point>,
    pub attempts: usize,
    pub accepted: usize,
}

/// Intersect `body` with a homogeneous `cut` and rebuild the rounding frame.
///
/// Hit-and-run candidates are drawn from `body` (warm-started chain) and
/// accepted when they satisfy the cut; after `cfg.n_samples` acceptances the
/// new frame is the sample whitening composed with the isotropic-position
/// outer radius `sqrt(d (d+2))`, giving claimed inner-ball quality `1/d`.
///
/// Escalation ladder when the candidate budget runs out: the budget is
/// quadrupled once; if acceptances still fall short (or whitening is rank
/// deficient) the frame is rebuilt from the MVEE of whatever was accepted;
/// only if that too is impossible does the call fail with `RoundingLost`.
pub fn refresh_rounding<R: Rng>(
    body: &ConvexBody,
    cut: &Halfspace,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> SamplingResult<RefreshOutcome> {
    assert!(
        cut.offset == 0.0,
        "version-space cuts are homogeneous (offset 0), got offset {}",
        cut.offset
    );
    let cut = cut.normalized();
    let d = body.dim;

    let mut z = body.frame_origin();
    for _ in 0..cfg.burn_in {
        z = hit_and_run_step(body, &z, rng)?;
    }
    let mut accepted: Vec<Point> = Vec::with_capacity(cfg.n_samples);
    let mut attempts = 0usize;
    let mut budget = cfg.accept_cap;
    let mut escalated = false;
    while accepted.len() < cfg.n_samples {
        if attempts >= budget {
            if !escalated {
                escalated = true;
                budget *= 4;
                continue;
            }
            break;
        }
        for _ in 0..cfg.warm_gap {
            z = hit_and_run_step(body, &z, rng)?;
        }
        attempts += 1;
        if cut.contains(&z, 1e-12) {
            accepted.push(z.clone());
        }
    }

    if accepted.is_empty() {
        return Err(SamplingError::RoundingLost { accepted: 0, attempts });
    }

    let mut constraints = body.constraints.clone();
    constraints.push(cut);

    let n_acc = accepted.len();
    let mut mean = DVector::zeros(d);
    for s in &accepted {
        mean += s;
    }
    mean /= n_acc as f64;

    // Primary frame: whitening scaled by the isotropic outer radius.
    let frame = if n_acc >= cfg.n_samples {
        match rounding_transform(&accepted) {
            Ok(t) => {
                let r_out = (d as f64 * (d as f64 + 2.0)).sqrt();
                // F(y) = mean + C^{1/2} (r_out y): the inverse of t, scaled.
                let c_root = t
                    .linear
                    .clone()
                    .try_inverse()
                    .ok_or(SamplingError::RankDeficientSamples)?;
                Some((AffineMap::new(&c_root * r_out, mean.clone()), 1.0 / d as f64))
            }
            Err(_) => None,
        }
    } else {
        None
    };
    // Fallback frame: unit ball onto the MVEE of the accepted samples.
    let frame = match frame {
        Some(f) => Some(f),
        None => match mvee(&accepted, 1e-3) {
            Ok(e) if e.rank == d => {
                let root_inv = psd_sqrt(&e.form)
                    .try_inverse()
                    .ok_or(SamplingError::RankDeficientSamples)?;
                Some((AffineMap::new(root_inv, e.center.clone()), 0.5 / d as f64))
            }
            _ => None,
        },
    };
    let Some((mut frame, quality)) = frame else {
        return Err(SamplingError::RoundingLost { accepted: n_acc, attempts });
    };

    let mut new_body = ConvexBody {
        dim: d,
        constraints,
        frame_inv: AffineMap::identity(d), // fixed below
        frame,
        frame_quality: quality,
    };
    // The walk restarts at the frame origin, which must be strictly interior.
    // The accepted-sample mean is interior by convexity; if round-off leaves
    // it on the boundary, fall back to the deepest accepted sample.
    if new_body.min_slack(&new_body.frame.offset) <= 1e-12 {
        let best = accepted
            .iter()
            .max_by(|a, b| {
                new_body
                    .min_slack(a)
                    .partial_cmp(&new_body.min_slack(b))
                    .unwrap()
            })
            .expect("nonempty accepted set");
        new_body.frame.offset = best.clone();
    }
    frame = new_body.frame.clone();
    new_body.frame_inv = frame
        .inverse()
        .ok_or(SamplingError::RankDeficientSamples)?;

    Ok(RefreshOutcome {
        body: new_body,
        centroid: mean,
        samples: accepted,
        attempts,
        accepted: n_acc,
    })
}
