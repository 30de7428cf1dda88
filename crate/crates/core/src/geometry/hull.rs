//! Convex hull queries: polytope distance by Wolfe's min-norm-point scheme
//! over the Minkowski difference, and hull membership by a phase-1 simplex.

use super::{GeomError, GeomResult, Halfspace, Point, SeminormMetric};
use nalgebra::{DMatrix, DVector};

/// Default absolute distance accuracy.
pub const HULL_DIST_TOL: f64 = 1e-9;
/// Default iteration cap for the distance solver.
pub const HULL_DIST_CAP: usize = 1_000_000;

/// Result of a hull-to-hull distance query.
#[derive(Debug, Clone)]
pub struct HullSeparation {
    /// Distance between the hulls under the query metric (0 iff they
    /// intersect, within tolerance).
    pub dist: f64,
    /// When `dist > 0`: halfspace with A strictly on the nonnegative side and
    /// B strictly on the negative side. The functional `x -> eval(x)` is
    /// 1-Lipschitz under the metric, so each hull keeps slack `margin`.
    pub separator: Halfspace,
    /// Guaranteed one-sided slack of the separator under the metric; at least
    /// `(dist - tol) / 2` whenever `dist > tol`.
    pub margin: f64,
}

/// Distance between `conv(a)` and `conv(b)` under `metric`, with default
/// tolerance and iteration cap.
pub fn hull_distance(
    a: &[Point],
    b: &[Point],
    metric: &SeminormMetric,
) -> GeomResult<HullSeparation> {
    hull_distance_with(a, b, metric, HULL_DIST_TOL, HULL_DIST_CAP)
}

/// Distance between `conv(a)` and `conv(b)` under `metric`.
///
/// The minimum-norm point of the Minkowski difference is found by Wolfe's
/// algorithm driven by a linear minimization oracle, so only `|a| + |b|`
/// support scans are needed per iteration. The returned distance is accurate
/// to `tol`: on exit either `dist <= tol` (hulls touch) or the Wolfe dual gap
/// certifies `dist` within `tol`.
pub fn hull_distance_with(
    a: &[Point],
    b: &[Point],
    metric: &SeminormMetric,
    tol: f64,
    cap: usize,
) -> GeomResult<HullSeparation> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let m = a[0].len();
    for p in a.iter().chain(b.iter()) {
        if p.len() != m {
            return Err(GeomError::DimensionMismatch { expected: m, got: p.len() });
        }
    }

    // Work in transformed coordinates where the metric is Euclidean.
    let ta: Vec<Point> = a.iter().map(|p| metric.transform(p)).collect();
    let tb: Vec<Point> = b.iter().map(|p| metric.transform(p)).collect();

    // Support point of the difference body minimizing <v, .>, ties broken by
    // smallest index for determinism.
    let lmo = |v: &Point| -> (usize, usize) {
        let ia = argmin_dot(&ta, v);
        let jb = argmax_dot(&tb, v);
        (ia, jb)
    };
    let vertex = |ia: usize, jb: usize| -> Point { &ta[ia] - &tb[jb] };

    let mut active: Vec<(usize, usize)> = vec![(0, 0)];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut v = vertex(0, 0);
    let mut last_support;

    let mut iters = 0usize;
    loop {
        iters += 1;
        if iters > cap {
            return Err(GeomError::IterationCapExceeded(cap));
        }
        let (ia, jb) = lmo(&v);
        let s = vertex(ia, jb);
        last_support = s.clone();
        let vv = v.dot(&v);
        let gap = vv - v.dot(&s);
        // Certified: dist in [<v,s>/|v|, |v|], width gap/|v|.
        if vv.sqrt() <= tol || gap <= tol * vv.sqrt().max(tol) {
            break;
        }
        if active.contains(&(ia, jb)) {
            break; // no further progress possible numerically
        }
        active.push((ia, jb));
        lambda.push(0.0);

        // Minor cycle: min-norm point over the affine hull of the active
        // vertices, walking back toward feasibility when coefficients leave
        // the simplex.
        loop {
            let pts: Vec<Point> = active.iter().map(|&(i, j)| vertex(i, j)).collect();
            let mu = match affine_min_norm(&pts) {
                Some(mu) => mu,
                None => {
                    // Affinely dependent active set: drop the entry with the
                    // smallest weight and retry.
                    drop_smallest(&mut active, &mut lambda);
                    if active.len() == 1 {
                        break;
                    }
                    continue;
                }
            };
            if mu.iter().all(|&c| c >= -1e-12) {
                lambda = mu;
                break;
            }
            // Step from lambda toward mu until the first coefficient hits 0.
            let mut theta = 1.0f64;
            for i in 0..mu.len() {
                if mu[i] < -1e-12 {
                    let t = lambda[i] / (lambda[i] - mu[i]);
                    theta = theta.min(t);
                }
            }
            for i in 0..lambda.len() {
                lambda[i] = (1.0 - theta) * lambda[i] + theta * mu[i];
            }
            let mut keep_idx = Vec::new();
            for i in 0..lambda.len() {
                if lambda[i] > 1e-14 {
                    keep_idx.push(i);
                }
            }
            if keep_idx.is_empty() {
                keep_idx.push(0);
            }
            active = keep_idx.iter().map(|&i| active[i]).collect();
            lambda = keep_idx.iter().map(|&i| lambda[i]).collect();
            let total: f64 = lambda.iter().sum();
            for l in lambda.iter_mut() {
                *l /= total;
            }
            if active.len() == 1 {
                break;
            }
        }

        v = DVector::zeros(m);
        for (c, &(i, j)) in lambda.iter().zip(active.iter()) {
            v += vertex(i, j) * *c;
        }
    }

    let norm = v.norm();
    let dist = if norm <= tol { 0.0 } else { norm };

    // Separator in original coordinates. The unit direction in transformed
    // space pulls back through the metric square root, making eval() a
    // 1-Lipschitz functional for the metric.
    let (separator, margin) = if dist > 0.0 {
        let u = &v / norm;
        let lo_a = ta.iter().map(|p| p.dot(&u)).fold(f64::INFINITY, f64::min);
        let hi_b = tb.iter().map(|p| p.dot(&u)).fold(f64::NEG_INFINITY, f64::max);
        let mid = 0.5 * (lo_a + hi_b);
        let normal = metric.transform(&u); // sqrt(M) * u, sqrt symmetric
        (Halfspace::new(normal, -mid), 0.5 * (lo_a - hi_b))
    } else {
        let dir = if last_support.norm() > 0.0 {
            last_support.normalize()
        } else {
            DVector::from_fn(m, |i, _| if i == 0 { 1.0 } else { 0.0 })
        };
        (Halfspace::new(dir, 0.0), 0.0)
    };
    Ok(HullSeparation { dist, separator, margin })
}

/// Coefficients of the min-norm point over the affine hull of `pts`, by the
/// KKT system; `None` when the Gram system is singular.
fn affine_min_norm(pts: &[Point]) -> Option<Vec<f64>> {
    let k = pts.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            kkt[(i, j)] = pts[i].dot(&pts[j]);
        }
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let lu = kkt.full_piv_lu();
    let sol = lu.solve(&rhs)?;
    let mu: Vec<f64> = sol.iter().take(k).copied().collect();
    if mu.iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(mu)
}

fn drop_smallest(active: &mut Vec<(usize, usize)>, lambda: &mut Vec<f64>) {
    if active.len() <= 1 {
        return;
    }
    let mut imin = 0;
    for i in 1..lambda.len() {
        if lambda[i] < lambda[imin] {
            imin = i;
        }
    }
    active.remove(imin);
    lambda.remove(imin);
    let total: f64 = lambda.iter().sum();
    if total > 0.0 {
        for l in lambda.iter_mut() {
            *l /= total;
        }
    } else {
        let uniform = 1.0 / lambda.len() as f64;
        lambda.fill(uniform);
    }
}

fn argmin_dot(pts: &[Point], v: &Point) -> usize {
    let mut best = (0usize, f64::INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = p.dot(v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn argmax_dot(pts: &[Point], v: &Point) -> usize {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = p.dot(v);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// True iff `x` is a convex combination of `points`, decided by a phase-1
/// simplex on the linear feasibility program
/// `sum_i lambda_i p_i = x, sum_i lambda_i = 1, lambda >= 0`
/// with feasibility tolerance `tol` (rows are rescaled to unit magnitude, so
/// the tolerance acts relatively).
pub fn hull_membership(x: &Point, points: &[Point], tol: f64) -> bool {
    if points.is_empty() {
        return false;
    }
    let m = x.len();
    let n = points.len();
    let rows = m + 1;

    // Equality system A lambda = b with a trailing sum row; scale each row.
    let mut a = vec![vec![0.0f64; n]; rows];
    let mut b = vec![0.0f64; rows];
    for r in 0..m {
        let mut scale = x[r].abs();
        for p in points {
            scale = scale.max(p[r].abs());
        }
        let scale = scale.max(1.0);
        for (j, p) in points.iter().enumerate() {
            a[r][j] = p[r] / scale;
        }
        b[r] = x[r] / scale;
    }
    for j in 0..n {
        a[m][j] = 1.0;
    }
    b[m] = 1.0;

    // Make b nonnegative, then add artificial variables as the initial basis.
    for r in 0..rows {
        if b[r] < 0.0 {
            b[r] = -b[r];
            for j in 0..n {
                a[r][j] = -a[r][j];
            }
        }
    }

    // Tableau over columns [lambda | artificial], phase-1 objective = sum of
    // artificials. Bland's rule keeps the pivoting finite.
    let cols = n + rows;
    let mut t = vec![vec![0.0f64; cols + 1]; rows + 1];
    for r in 0..rows {
        for j in 0..n {
            t[r][j] = a[r][j];
        }
        t[r][n + r] = 1.0;
        t[r][cols] = b[r];
    }
    // Objective row: reduced costs for min sum(artificials) with artificial
    // basis = negated column sums of the structural part.
    for j in 0..n {
        let s: f64 = (0..rows).map(|r| t[r][j]).sum();
        t[rows][j] = -s;
    }
    t[rows][cols] = -b.iter().sum::<f64>();
    let mut basis: Vec<usize> = (n..n + rows).collect();

    let pivot_eps = 1e-12;
    for _ in 0..50_000 {
        // Entering: smallest-index column with negative reduced cost.
        let mut enter = None;
        for j in 0..cols {
            if t[rows][j] < -pivot_eps {
                enter = Some(j);
                break;
            }
        }
        let Some(e) = enter else { break };
        // Leaving: min ratio, ties to smallest row.
        let mut leave = None;
        let mut best = f64::INFINITY;
        for r in 0..rows {
            if t[r][e] > pivot_eps {
                let ratio = t[r][cols] / t[r][e];
                if ratio < best - pivot_eps {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else { break }; // unbounded: cannot happen here
        // Pivot.
        let piv = t[l][e];
        for j in 0..=cols {
            t[l][j] /= piv;
        }
        for r in 0..=rows {
            if r != l {
                let f = t[r][e];
                if f != 0.0 {
                    for j in 0..=cols {
                        t[r][j] -= f * t[l][j];
                    }
                }
            }
        }
        basis[l] = e;
    }

    // Phase-1 optimum is -t[rows][cols]; feasible iff it vanishes.
    (-t[rows][cols]) <= tol
}
