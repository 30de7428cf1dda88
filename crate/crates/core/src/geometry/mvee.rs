//! Minimum-volume enclosing ellipsoid by Khachiyan's first-order barycentric
//! ascent, with affine-hull reduction for degenerate inputs.

use super::{col_matrix, GeomError, GeomResult, Point, TOL};
use nalgebra::{DMatrix, DVector};

const ITER_CAP: usize = 1_000_000;
/// Rebuild the inverse from scratch this often to bound rank-1 update drift.
const REFRESH_EVERY: usize = 512;

/// Minimum-volume enclosing ellipsoid of `points`, to relative accuracy
/// `eps` (default 1e-3 used throughout the crate).
///
/// Guarantees, with `r` the affine rank of the input:
/// - every input point is inside the returned ellipsoid (the farthest one is
///   on the boundary up to round-off);
/// - the ellipsoid scaled about its center by `1 / ((1 + eps) * r)` lies
///   inside the convex hull of the input;
/// - the ellipsoid's affine hull equals the input's affine hull: `hull_basis`
///   has orthonormal columns and `rank = r`.
///
/// Duplicate points are ignored. A single distinct point yields the rank-0
/// ellipsoid at that point.
pub fn mvee(points: &[Point], eps: f64) -> GeomResult<super::Ellipsoid> {
    if points.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let m = points[0].len();
    for p in points {
        if p.len() != m {
            return Err(GeomError::DimensionMismatch { expected: m, got: p.len() });
        }
    }
    assert!(eps > 0.0, "eps must be positive");

    let unique = dedupe(points);
    let n = unique.len();
    let mean = {
        let mut s = DVector::zeros(m);
        for p in &unique {
            s += p;
        }
        s / n as f64
    };

    if n == 1 {
        return Ok(super::Ellipsoid {
            center: unique[0].clone(),
            form: DMatrix::zeros(m, m),
            hull_basis: DMatrix::zeros(m, 0),
            rank: 0,
        });
    }

    // Affine-hull reduction: orthonormal basis from the SVD of the centered
    // point matrix; tiny singular values are treated as zero.
    let centered = {
        let mut d = col_matrix(&unique);
        for mut col in d.column_iter_mut() {
            col -= &mean;
        }
        d
    };
    // Rank from the singular values (backward-stable even when the computed
    // singular vectors are not); basis from column-pivoted QR, whose leading
    // Q columns span the column space to machine precision.
    let sv = centered.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let rank = sv.iter().filter(|&&s| s > TOL.rank * smax && s > 0.0).count();
    if rank == 0 {
        // Numerically coincident points that survived exact dedupe.
        return Ok(super::Ellipsoid {
            center: mean,
            form: DMatrix::zeros(m, m),
            hull_basis: DMatrix::zeros(m, 0),
            rank: 0,
        });
    }
    let basis = centered.clone().col_piv_qr().q().columns(0, rank).into_owned();

    // Hull coordinates, globally rescaled to unit size for conditioning.
    let mut y = basis.transpose() * &centered; // rank x n
    let scale = y.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    y /= scale;

    let (center_y, form_y) = khachiyan(&y, eps)?;

    // Undo the scaling and lift back to ambient coordinates.
    let center = &mean + &basis * (&center_y * scale);
    let form = &basis * (&form_y / (scale * scale)) * basis.transpose();
    Ok(super::Ellipsoid { center, form, hull_basis: basis, rank })
}

/// Core ascent in full-rank coordinates. `y` is r x n with affine rank r.
/// Returns (center, form) with all columns inside the unit-level set and the
/// maximal one exactly on it.
fn khachiyan(y: &DMatrix<f64>, eps: f64) -> GeomResult<(DVector<f64>, DMatrix<f64>)> {
    let r = y.nrows();
    let n = y.ncols();
    let d_lift = r + 1;

    // Lifted columns q_j = (y_j, 1).
    let q = {
        let mut q = DMatrix::zeros(d_lift, n);
        q.view_mut((0, 0), (r, n)).copy_from(y);
        q.row_mut(r).fill(1.0);
        q
    };

    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let (mut xinv, mut marks) = lifted_inverse(&q, &w)?;

    // Stop once max_j q_j^T X^{-1} q_j <= 1 + (1 + eps) r; this is slightly
    // stricter than the classical (1 + eps)(r + 1) cutoff and is what makes
    // the 1/((1+eps) r) shrink containment hold for the rescaled output.
    //
    // Steps alternate between the classical add step (push weight onto the
    // worst violator) and Wolfe-Atwood drop steps (pull weight off support
    // points with small marks), which is what makes tight eps affordable.
    let target = 1.0 + (1.0 + eps) * r as f64;
    let d = d_lift as f64;
    let mut iters = 0usize;
    loop {
        let (jmax, kappa) = argmax(&marks);
        if kappa <= target {
            break;
        }
        iters += 1;
        if iters > ITER_CAP {
            return Err(GeomError::IterationCapExceeded(ITER_CAP));
        }

        // Drop candidate: support point with the smallest mark.
        let mut jmin = jmax;
        let mut kmin = f64::INFINITY;
        for i in 0..n {
            if w[i] > 1e-12 && marks[i] < kmin {
                kmin = marks[i];
                jmin = i;
            }
        }
        let add_gain = kappa / d - 1.0;
        let drop_gain = 1.0 - kmin / d;
        let (j, kj, beta) = if add_gain >= drop_gain {
            (jmax, kappa, (kappa - d) / (d * (kappa - 1.0)))
        } else {
            let raw = (kmin - d) / (d * (kmin - 1.0).max(1e-12));
            let floor = -w[jmin] / (1.0 - w[jmin]).max(1e-12);
            (jmin, kmin, raw.max(floor))
        };

        w *= 1.0 - beta;
        w[j] += beta;
        w[j] = w[j].max(0.0);

        let denom = 1.0 - beta + beta * kj;
        if iters.is_multiple_of(REFRESH_EVERY) || denom <= 1e-9 {
            let fresh = lifted_inverse(&q, &w)?;
            xinv = fresh.0;
            marks = fresh.1;
        } else {
            // Rank-1 update of X^{-1} and of all marks q_j^T X^{-1} q_j.
            let qj = q.column(j).into_owned();
            let xq = &xinv * &qj;
            let t = q.transpose() * &xq; // n-vector of q_i^T X^{-1} q_j
            let c = beta / denom;
            for i in 0..n {
                marks[i] = (marks[i] - c * t[i] * t[i]) / (1.0 - beta);
            }
            xinv = (&xinv - c * &xq * xq.transpose()) / (1.0 - beta);
        }
    }

    // Center and shape from the final weights; rescale so the farthest input
    // sits exactly on the boundary.
    let center = &q.view((0, 0), (r, n)).into_owned() * &w; // = y * w
    let mut g = DMatrix::zeros(r, r);
    for j in 0..n {
        let yj = y.column(j);
        g += w[j] * yj * yj.transpose();
    }
    g -= &center * center.transpose();
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or(GeomError::IterationCapExceeded(ITER_CAP))?;
    let mut s_obs = 0.0f64;
    for j in 0..n {
        let d = y.column(j) - &center;
        let v = (&ginv * &d).dot(&d);
        s_obs = s_obs.max(v);
    }
    if s_obs <= 0.0 {
        return Err(GeomError::IterationCapExceeded(ITER_CAP));
    }
    Ok((center, ginv / s_obs))
}

/// X = Q diag(w) Q^T, its inverse, and all marks q_j^T X^{-1} q_j.
fn lifted_inverse(
    q: &DMatrix<f64>,
    w: &DVector<f64>,
) -> GeomResult<(DMatrix<f64>, DVector<f64>)> {
    let d = q.nrows();
    let n = q.ncols();
    let mut x = DMatrix::zeros(d, d);
    for j in 0..n {
        let qj = q.column(j);
        x += w[j] * qj * qj.transpose();
    }
    let xinv = x
        .try_inverse()
        .ok_or(GeomError::IterationCapExceeded(ITER_CAP))?;
    let mut marks = DVector::zeros(n);
    for j in 0..n {
        let qj = q.column(j);
        marks[j] = (&xinv * qj).dot(&qj.into_owned());
    }
    Ok((xinv, marks))
}

fn argmax(v: &DVector<f64>) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

fn dedupe(points: &[Point]) -> Vec<Point> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for p in points {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key) {
            out.push(p.clone());
        }
    }
    out
}
