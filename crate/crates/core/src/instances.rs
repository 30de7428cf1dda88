//! Learning-problem instances: labeled point sets with per-class metrics and
//! a certified hull margin, plus the generators for the ellipsoidal,
//! staircase, grid, and rational families.

use crate::geometry::{
    diameter, hull_distance, GeomError, Halfspace, Point, SeminormMetric,
};
use crate::oracles::{StaircaseDescriptor, TargetPartition};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("failed to generate an instance after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("margin {gamma} violates the staircase precondition (needs gamma <= {max})")]
    InvalidGamma { gamma: f64, max: f64 },
    #[error("bit budget {bits} below the dimension {m}")]
    InvalidBits { bits: u32, m: usize },
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("malformed instance JSON: {0}")]
    Json(String),
}

pub type InstanceResult<T> = Result<T, InstanceError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub seed: u64,
}

/// Ground-truth separating halfspace for one ordered class pair, under the
/// metric-owning class's seminorm. Kept for test assertions; not serialized.
#[derive(Debug, Clone)]
pub struct PairWitness {
    /// The class whose metric the separation is measured in.
    pub metric_class: usize,
    pub other: usize,
    pub separator: Halfspace,
    pub dist: f64,
}

/// A labeled point set with per-class metrics and a certified margin.
/// `certified_margin` may be infinite (degenerate or single-class cases);
/// it serializes as null.
#[derive(Debug, Clone)]
pub struct Instance {
    pub m: usize,
    pub k: usize,
    pub points: Vec<Point>,
    pub labels: Vec<usize>,
    pub metrics: Vec<SeminormMetric>,
    pub certified_margin: f64,
    pub provenance: Provenance,
    pub witnesses: Vec<PairWitness>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn class_points(&self, class: usize) -> Vec<Point> {
        (0..self.n())
            .filter(|&i| self.labels[i] == class)
            .map(|i| self.points[i].clone())
            .collect()
    }

    pub fn target(&self) -> TargetPartition {
        TargetPartition::new(self.labels.clone(), self.k)
    }

    pub fn to_json(&self) -> String {
        let shadow = InstanceJson {
            m: self.m,
            k: self.k,
            points: self.points.iter().map(|p| p.iter().copied().collect()).collect(),
            labels: self.labels.clone(),
            metrics: self
                .metrics
                .iter()
                .map(|d| {
                    d.form()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect()
                })
                .collect(),
            certified_margin: if self.certified_margin.is_finite() {
                Some(self.certified_margin)
            } else {
                None
            },
            provenance: self.provenance.clone(),
        };
        serde_json::to_string(&shadow).expect("instances serialize")
    }

    pub fn from_json(text: &str) -> InstanceResult<Instance> {
        let shadow: InstanceJson =
            serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        if shadow.points.iter().any(|p| p.len() != shadow.m) {
            return Err(InstanceError::Json("point dimension mismatch".into()));
        }
        if shadow.labels.len() != shadow.points.len() {
            return Err(InstanceError::Json("label count mismatch".into()));
        }
        if shadow.labels.iter().any(|&l| l >= shadow.k) {
            return Err(InstanceError::Json("label out of class range".into()));
        }
        if shadow.metrics.len() != shadow.k {
            return Err(InstanceError::Json("one metric per class required".into()));
        }
        let mut metrics = Vec::with_capacity(shadow.k);
        for rows in &shadow.metrics {
            let m = shadow.m;
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(InstanceError::Json("metric form must be m x m".into()));
            }
            let form = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            metrics.push(SeminormMetric::new(form)?);
        }
        Ok(Instance {
            m: shadow.m,
            k: shadow.k,
            points: shadow
                .points
                .into_iter()
                .map(DVector::from_vec)
                .collect(),
            labels: shadow.labels,
            metrics,
            certified_margin: shadow.certified_margin.unwrap_or(f64::INFINITY),
            provenance: shadow.provenance,
            witnesses: Vec::new(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    m: usize,
    k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    metrics: Vec<Vec<Vec<f64>>>,
    certified_margin: Option<f64>,
    provenance: Provenance,
}

/// Strong hull margin of the instance: the minimum over ordered class pairs
/// (i, j), i != j, of `d_i(conv C_j, conv C_i) / diam_{d_i}(C_i)`, minus
/// `tol`. Pairs with an empty class or a zero-diameter reference class hold
/// vacuously; if every pair is vacuous the sentinel is +infinity.
pub fn certify_margin(inst: &Instance, tol: f64) -> InstanceResult<f64> {
    let classes: Vec<Vec<Point>> = (0..inst.k).map(|c| inst.class_points(c)).collect();
    let mut best = f64::INFINITY;
    for i in 0..inst.k {
        if classes[i].is_empty() {
            continue;
        }
        let phi = diameter(&classes[i], &inst.metrics[i]);
        if phi <= 0.0 {
            continue;
        }
        for j in 0..inst.k {
            if j == i || classes[j].is_empty() {
                continue;
            }
            let sep = hull_distance(&classes[j], &classes[i], &inst.metrics[i])?;
            best = best.min(sep.dist / phi);
        }
    }
    if best.is_finite() {
        Ok(best - tol)
    } else {
        Ok(f64::INFINITY)
    }
}

fn gaussian_vector<R: Rng>(m: usize, rng: &mut R) -> Point {
    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit_vector<R: Rng>(m: usize, rng: &mut R) -> Point {
    loop {
        let v = gaussian_vector(m, rng);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Uniform draw from the unit ball.
fn ball_point<R: Rng>(m: usize, rng: &mut R) -> Point {
    let dir = unit_vector(m, rng);
    let radius = rng.gen_range(0.0..1.0f64).powf(1.0 / m as f64);
    dir * radius
}

/// Random rotation times a random diagonal stretch.
fn random_shape<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let scales = DVector::from_fn(m, |_, _| rng.gen_range(0.6..1.6f64));
    q * DMatrix::from_diagonal(&scales)
}

fn metric_of_shape(linear: &DMatrix<f64>) -> InstanceResult<SeminormMetric> {
    let gram = linear * linear.transpose();
    let form = gram
        .clone()
        .cholesky()
        .ok_or(InstanceError::GenerationFailed { attempts: 0 })?
        .inverse();
    Ok(SeminormMetric::new(form)?)
}

fn pair_witnesses(
    classes: &[Vec<Point>],
    metrics: &[SeminormMetric],
) -> InstanceResult<Vec<PairWitness>> {
    let mut witnesses = Vec::new();
    for i in 0..classes.len() {
        if classes[i].is_empty() {
            continue;
        }
        for j in 0..classes.len() {
            if j == i || classes[j].is_empty() {
                continue;
            }
            let sep = hull_distance(&classes[j], &classes[i], &metrics[i])?;
            witnesses.push(PairWitness {
                metric_class: i,
                other: j,
                separator: sep.separator,
                dist: sep.dist,
            });
        }
    }
    Ok(witnesses)
}

/// `k` clouds drawn in random ellipsoids and pushed apart along random
/// directions until the certified margin reaches `gamma_target`. Each class's
/// metric is the one induced by its generating ellipsoid.
pub fn gen_ellipsoidal<R: Rng>(
    m: usize,
    k: usize,
    n_per_class: usize,
    gamma_target: f64,
    seed_label: u64,
    rng: &mut R,
) -> InstanceResult<Instance> {
    gen_ellipsoidal_with_shapes(m, k, n_per_class, gamma_target, &[], seed_label, rng)
}

/// As [`gen_ellipsoidal`], with explicit per-class linear shapes (empty slice
/// or None entries fall back to random shapes). A shape `L` sends the unit
/// ball to the class's generating ellipsoid, and the class metric compensates
/// it exactly, so `diag(kappa, 1, .., 1)` yields metric distortion `kappa`.
pub fn gen_ellipsoidal_with_shapes<R: Rng>(
    m: usize,
    k: usize,
    n_per_class: usize,
    gamma_target: f64,
    shapes: &[Option<DMatrix<f64>>],
    seed_label: u64,
    rng: &mut R,
) -> InstanceResult<Instance> {
    assert!(m >= 1 && k >= 1 && n_per_class >= 1);
    assert!(
        gamma_target > 0.0 && gamma_target <= 1.0,
        "margin target must lie in (0, 1]"
    );

    let mut class_shapes = Vec::with_capacity(k);
    for c in 0..k {
        match shapes.get(c).and_then(|s| s.clone()) {
            Some(l) => class_shapes.push(l),
            None => class_shapes.push(random_shape(m, rng)),
        }
    }
    let metrics: Vec<SeminormMetric> = class_shapes
        .iter()
        .map(metric_of_shape)
        .collect::<InstanceResult<_>>()?;

    // Centered clouds, one per class.
    let base: Vec<Vec<Point>> = (0..k)
        .map(|c| {
            (0..n_per_class)
                .map(|_| &class_shapes[c] * ball_point(m, rng))
                .collect()
        })
        .collect();

    let provenance = |t: f64| {
        let mut params = serde_json::Map::new();
        params.insert("n_per_class".into(), n_per_class.into());
        params.insert("gamma_target".into(), gamma_target.into());
        params.insert("translation".into(), t.into());
        Provenance { generator: "ellipsoidal".into(), params, seed: seed_label }
    };

    if k == 1 {
        let points: Vec<Point> = base.into_iter().flatten().collect();
        let labels = vec![0usize; points.len()];
        return Ok(Instance {
            m,
            k,
            points,
            labels,
            metrics,
            certified_margin: f64::INFINITY,
            provenance: provenance(0.0),
            witnesses: Vec::new(),
        });
    }

    // Pairwise-distinct push directions.
    let directions: Vec<Point> = {
        let mut attempts = 0;
        loop {
            let cand: Vec<Point> = (0..k).map(|_| unit_vector(m, rng)).collect();
            let ok = (0..k).all(|a| (a + 1..k).all(|b| cand[a].dot(&cand[b]) < 0.9));
            if ok {
                break cand;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(InstanceError::GenerationFailed { attempts });
            }
        }
    };

    let diameters: Vec<f64> = (0..k).map(|c| diameter(&base[c], &metrics[c])).collect();
    let margin_at = |t: f64| -> InstanceResult<f64> {
        let classes: Vec<Vec<Point>> = (0..k)
            .map(|c| base[c].iter().map(|p| p + &directions[c] * t).collect())
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..k {
            if diameters[i] <= 0.0 {
                continue;
            }
            for j in 0..k {
                if j == i {
                    continue;
                }
                let sep = hull_distance(&classes[j], &classes[i], &metrics[i])?;
                best = best.min(sep.dist / diameters[i]);
            }
        }
        Ok(best)
    };

    // Find a feasible scale by doubling, then tighten by bisection. The
    // search target carries a hair of slack so the final re-certification
    // (whose diameters are recomputed after translation) cannot dip below
    // the requested margin through last-bit float drift.
    let search_target = gamma_target * (1.0 + 1e-9);
    let mut hi = 1.0f64;
    let mut attempts = 0;
    while margin_at(hi)? < search_target {
        hi *= 2.0;
        attempts += 1;
        if attempts >= 100 {
            return Err(InstanceError::GenerationFailed { attempts });
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..50 {
        let mid = (lo + hi) / 2.0;
        if margin_at(mid)? >= search_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut points = Vec::with_capacity(k * n_per_class);
    let mut labels = Vec::with_capacity(k * n_per_class);
    let mut classes: Vec<Vec<Point>> = vec![Vec::new(); k];
    for c in 0..k {
        for p in &base[c] {
            let x = p + &directions[c] * hi;
            classes[c].push(x.clone());
            points.push(x);
            labels.push(c);
        }
    }
    let certified = certify_margin_raw(&classes, &metrics)?;
    debug_assert!(certified >= gamma_target - 1e-12);
    let witnesses = pair_witnesses(&classes, &metrics)?;
    Ok(Instance {
        m,
        k,
        points,
        labels,
        metrics,
        certified_margin: certified,
        provenance: provenance(hi),
        witnesses,
    })
}

fn certify_margin_raw(
    classes: &[Vec<Point>],
    metrics: &[SeminormMetric],
) -> InstanceResult<f64> {
    let mut best = f64::INFINITY;
    for i in 0..classes.len() {
        if classes[i].is_empty() {
            continue;
        }
        let phi = diameter(&classes[i], &metrics[i]);
        if phi <= 0.0 {
            continue;
        }
        for j in 0..classes.len() {
            if j == i || classes[j].is_empty() {
                continue;
            }
            let sep = hull_distance(&classes[j], &classes[i], &metrics[i])?;
            best = best.min(sep.dist / phi);
        }
    }
    Ok(best)
}

/// Column-of-points staircase family. Each of the `floor(k/2)` bands holds
/// `m - 1` columns of `ell` points apiece, stacked along the last coordinate;
/// the hidden threshold of each column is drawn uniformly. Returns the
/// instance together with its combinatorial descriptor.
pub fn gen_staircase<R: Rng>(
    m: usize,
    k: usize,
    gamma: f64,
    seed_label: u64,
    rng: &mut R,
) -> InstanceResult<(Instance, StaircaseDescriptor)> {
    assert!(m >= 2 && k >= 2);
    let max_gamma = (m as f64).powf(-1.5) / 16.0;
    if !(gamma > 0.0 && gamma <= max_gamma) {
        return Err(InstanceError::InvalidGamma { gamma, max: max_gamma });
    }
    let ell = (1.0 / (2.0 * gamma * (m as f64).sqrt()).sqrt()).floor() as usize;
    debug_assert!(ell >= 4, "the margin precondition forces at least 4 rows");
    let mut out = gen_staircase_with_ell(m, k, ell, seed_label, rng)?;
    out.0
        .provenance
        .params
        .insert("gamma".into(), gamma.into());
    Ok(out)
}

/// Staircase family addressed by the row count directly (margin follows as
/// `1/(2 ell^2 sqrt(m))`). The gamma-driven entry point wraps this; harnesses
/// that sweep `ell` call it directly.
pub fn gen_staircase_with_ell<R: Rng>(
    m: usize,
    k: usize,
    ell: usize,
    seed_label: u64,
    rng: &mut R,
) -> InstanceResult<(Instance, StaircaseDescriptor)> {
    assert!(m >= 2 && k >= 2 && ell >= 4);
    let p = m - 1;
    let bands = k / 2;
    let thresholds: Vec<Vec<usize>> = (0..bands)
        .map(|_| (0..p).map(|_| rng.gen_range(1..=ell)).collect())
        .collect();
    let desc = StaircaseDescriptor::new(ell, p, k, thresholds);

    let mut points = Vec::with_capacity(desc.n_points());
    for idx in 0..desc.n_points() {
        let (s, i, j) = desc.unindex(idx);
        let mut x = DVector::zeros(m);
        x[i] = 1.0;
        x[m - 1] = (j + s * ell) as f64;
        points.push(x);
    }
    let labels = desc.hidden_labels();

    // Explicit separator check, exact in integer arithmetic: within band s
    // the vector (-t_1, .., -t_p, 1) scores j - t_i at column i's row j,
    // nonpositive exactly on the band's prefix class.
    for idx in 0..desc.n_points() {
        let (s, i, j) = desc.unindex(idx);
        let score = j as i64 - desc.thresholds[s][i] as i64;
        assert_eq!(score <= 0, labels[idx] == 2 * s, "separator witness violated");
    }

    let certified = 1.0 / (2.0 * (ell * ell) as f64 * (m as f64).sqrt());
    let metrics = vec![SeminormMetric::euclidean(m); k];
    let mut params = serde_json::Map::new();
    params.insert("ell".into(), ell.into());
    params.insert("bands".into(), bands.into());
    let provenance = Provenance { generator: "staircase".into(), params, seed: seed_label };
    Ok((
        Instance {
            m,
            k,
            points,
            labels,
            metrics,
            certified_margin: certified,
            provenance,
            witnesses: Vec::new(),
        },
        desc,
    ))
}

/// Step size denominator of the `[-1, 1]` coordinate grid affordable with
/// `bits` bits per coordinate in dimension `m`.
pub fn grid_steps(bits: u32, m: usize) -> usize {
    ((2.0f64.powf(bits as f64 / m as f64) - 1.0).floor() as usize).max(1)
}

/// Point set on the grid `{-1, -1+c, .., 1}^m` with labels read off a random
/// projection sliced into `k` slabs. The full grid is used up to 4096 points,
/// otherwise a uniform distinct sample of that size.
pub fn gen_grid<R: Rng>(
    m: usize,
    bits: u32,
    k: usize,
    seed_label: u64,
    rng: &mut R,
) -> InstanceResult<Instance> {
    assert!(m >= 1 && k >= 2);
    if (bits as usize) < m {
        return Err(InstanceError::InvalidBits { bits, m });
    }
    let inv_c = grid_steps(bits, m);
    let side = 2 * inv_c + 1;
    let total = (side as f64).powi(m as i32);
    const CAP: usize = 4096;

    let points: Vec<Point> = if total <= CAP as f64 {
        let mut pts = Vec::with_capacity(total as usize);
        let mut digits = vec![0usize; m];
        loop {
            pts.push(DVector::from_fn(m, |i, _| {
                (digits[i] as f64 - inv_c as f64) / inv_c as f64
            }));
            let mut pos = 0;
            loop {
                if pos == m {
                    break;
                }
                digits[pos] += 1;
                if digits[pos] < side {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == m {
                break;
            }
        }
        pts
    } else {
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < CAP {
            let cell: Vec<usize> = (0..m).map(|_| rng.gen_range(0..side)).collect();
            seen.insert(cell);
        }
        seen.iter()
            .map(|cell| {
                DVector::from_fn(m, |i, _| (cell[i] as f64 - inv_c as f64) / inv_c as f64)
            })
            .collect()
    };

    // Slab labeling along a random direction; retry until all classes occur.
    let mut attempts = 0;
    let labels = loop {
        let u = unit_vector(m, rng);
        let projections: Vec<f64> = points.iter().map(|x| u.dot(x)).collect();
        let min = projections.iter().copied().fold(f64::INFINITY, f64::min);
        let max = projections.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(min..max)).collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        let labels: Vec<usize> = projections
            .iter()
            .map(|&v| cuts.iter().filter(|&&c| c <= v).count())
            .collect();
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().all(|&s| s) {
            break labels;
        }
        attempts += 1;
        if attempts >= 100 {
            return Err(InstanceError::GenerationFailed { attempts });
        }
    };

    let metrics = vec![SeminormMetric::euclidean(m); k];
    let classes: Vec<Vec<Point>> = (0..k)
        .map(|c| {
            (0..points.len())
                .filter(|&i| labels[i] == c)
                .map(|i| points[i].clone())
                .collect()
        })
        .collect();
    let certified = certify_margin_raw(&classes, &metrics)?;
    let witnesses = pair_witnesses(&classes, &metrics)?;
    let mut params = serde_json::Map::new();
    params.insert("bits".into(), bits.into());
    params.insert("inv_c".into(), inv_c.into());
    let provenance = Provenance { generator: "grid".into(), params, seed: seed_label };
    Ok(Instance {
        m,
        k,
        points,
        labels,
        metrics,
        certified_margin: certified,
        provenance,
        witnesses,
    })
}

/// Snap every coordinate to the rational grid with denominator
/// `2^(bits / 2m)` and re-certify. Labels are kept; the margin shrinks by at
/// most the snap perturbation.
pub fn snap_to_rationals(inst: &Instance, bits: u32) -> InstanceResult<Instance> {
    let q = 2.0f64.powf(bits as f64 / (2.0 * inst.m as f64)).floor().max(1.0);
    let points: Vec<Point> = inst
        .points
        .iter()
        .map(|p| DVector::from_fn(inst.m, |i, _| (p[i] * q).round() / q))
        .collect();
    let mut snapped = Instance {
        m: inst.m,
        k: inst.k,
        points,
        labels: inst.labels.clone(),
        metrics: inst.metrics.clone(),
        certified_margin: 0.0,
        provenance: Provenance {
            generator: "rational".into(),
            params: {
                let mut p = inst.provenance.params.clone();
                p.insert("bits".into(), bits.into());
                p.insert("denominator".into(), (q as u64).into());
                p.insert("base_generator".into(), inst.provenance.generator.clone().into());
                p
            },
            seed: inst.provenance.seed,
        },
        witnesses: Vec::new(),
    };
    snapped.certified_margin = certify_margin(&snapped, 0.0)?.max(0.0);
    let classes: Vec<Vec<Point>> = (0..snapped.k).map(|c| snapped.class_points(c)).collect();
    snapped.witnesses = pair_witnesses(&classes, &snapped.metrics)?;
    Ok(snapped)
}

/// Bits needed to write the integer `x`: 1 + ceil(log2(|x| + 1)).
pub fn bit_size(x: i64) -> u32 {
    let a = x.unsigned_abs() + 1;
    1 + (64 - a.leading_zeros() - if a.is_power_of_two() { 1 } else { 0 })
}

/// Total encoding size of a rational instance with common denominator `q`:
/// per coordinate, the numerator's bits plus the denominator's bits.
pub fn instance_bit_size(inst: &Instance, q: u64) -> u64 {
    let qb = bit_size(q as i64) as u64;
    inst.points
        .iter()
        .flat_map(|p| p.iter())
        .map(|&x| bit_size((x * q as f64).round() as i64) as u64 + qb)
        .sum()
}
