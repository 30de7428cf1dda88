//! Geometric kernel: ellipsoids, seminorm metrics, affine maps, and convex
//! hull queries (distance, membership, diameter).
//!
//! All routines work on dynamically sized `f64` vectors. Degenerate inputs
//! (affinely dependent point sets, rank-deficient quadratic forms) are first
//! class: ellipsoids carry an explicit affine-hull basis and rank, and metrics
//! may be seminorms.

mod hull;
mod mvee;

pub use hull::{hull_distance, hull_distance_with, hull_membership, HullSeparation};
pub use mvee::mvee;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A point in R^m.
pub type Point = DVector<f64>;

/// Shared numeric tolerances. One instance is threaded through every module
/// so boundary decisions are made identically everywhere.
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    /// Exactness checks (symmetry, identities): 1e-12.
    pub sym: f64,
    /// Membership and boundary decisions: 1e-9. Ties are resolved by
    /// relaxing the comparison by this amount, in oracles and learners alike.
    pub boundary: f64,
    /// Rank detection: singular values below `rank * largest` count as zero.
    pub rank: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { sym: 1e-12, boundary: 1e-9, rank: 1e-9 }
    }
}

pub const TOL: Tol = Tol { sym: 1e-12, boundary: 1e-9, rank: 1e-9 };

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("input point set is empty")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iteration cap {0} exceeded before convergence")]
    IterationCapExceeded(usize),
    #[error("ellipsoid rank {rank} is below ambient dimension {dim}")]
    DegenerateEllipsoid { rank: usize, dim: usize },
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
}

pub type GeomResult<T> = Result<T, GeomError>;

/// Closed halfspace `{ x : <normal, x> + offset >= 0 }`.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: Point,
    pub offset: f64,
}

impl Halfspace {
    /// Requires a nonzero normal.
    pub fn new(normal: Point, offset: f64) -> Self {
        assert!(normal.norm() > 0.0, "halfspace normal must be nonzero");
        Halfspace { normal, offset }
    }

    /// Homogeneous halfspace through the origin.
    pub fn homogeneous(normal: Point) -> Self {
        Halfspace::new(normal, 0.0)
    }

    /// Signed value `<normal, x> + offset`; nonnegative inside.
    pub fn eval(&self, x: &Point) -> f64 {
        self.normal.dot(x) + self.offset
    }

    /// Membership with the boundary relaxed by `tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.eval(x) >= -tol
    }

    /// Same halfspace with a unit normal.
    pub fn normalized(&self) -> Self {
        let n = self.normal.norm();
        Halfspace { normal: &self.normal / n, offset: self.offset / n }
    }
}

/// Affine map `x -> linear * x + offset`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub offset: Point,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, offset: Point) -> Self {
        assert_eq!(linear.nrows(), offset.len());
        AffineMap { linear, offset }
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap { linear: DMatrix::identity(dim, dim), offset: DVector::zeros(dim) }
    }

    pub fn apply(&self, x: &Point) -> Point {
        &self.linear * x + &self.offset
    }

    /// Inverse map, if the linear part is invertible.
    pub fn inverse(&self) -> Option<AffineMap> {
        let inv = self.linear.clone().try_inverse()?;
        let off = -&inv * &self.offset;
        Some(AffineMap { linear: inv, offset: off })
    }

    /// `self` after `other`: x -> self(other(x)).
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &other.linear,
            offset: &self.linear * &other.offset + &self.offset,
        }
    }

    pub fn dim_out(&self) -> usize {
        self.linear.nrows()
    }
}

/// Pseudometric induced by a positive semidefinite form `M`:
/// `d(x, y) = sqrt((x-y)^T M (x-y))`.
#[derive(Debug, Clone)]
pub struct SeminormMetric {
    form: DMatrix<f64>,
    /// Symmetric PSD square root of `form`, cached for point transforms.
    sqrt: DMatrix<f64>,
    /// Eigenvalues of `form`, descending.
    eigs: Vec<f64>,
}

impl SeminormMetric {
    /// Validates symmetry (within `Tol::sym`, then symmetrizes) and positive
    /// semidefiniteness (eigenvalues above `-Tol::boundary * |lambda_max|`).
    pub fn new(form: DMatrix<f64>) -> GeomResult<Self> {
        let m = form.nrows();
        if form.ncols() != m {
            return Err(GeomError::DimensionMismatch { expected: m, got: form.ncols() });
        }
        let sym = (&form + form.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let mut eigs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let lead = eigs.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&min) = eigs.last() {
            if min < -TOL.boundary * lead.max(1.0) {
                return Err(GeomError::NotPsd(min));
            }
        }
        // Clamp round-off negatives to zero before taking the square root.
        let root_vals = DVector::from_iterator(
            m,
            eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
        );
        let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&root_vals) * eig.eigenvectors.transpose();
        Ok(SeminormMetric { form: sym, sqrt, eigs })
    }

    /// Standard Euclidean metric on R^m.
    pub fn euclidean(m: usize) -> Self {
        SeminormMetric::new(DMatrix::identity(m, m)).expect("identity is PSD")
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.form.nrows()
    }

    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        (&self.sqrt * (x - y)).norm()
    }

    /// Image of `x` under the symmetric square root of the form; Euclidean
    /// distances of transformed points equal metric distances of originals.
    pub fn transform(&self, x: &Point) -> Point {
        &self.sqrt * x
    }

    /// Ratio of the extreme axis scalings, `sqrt(lambda_max / lambda_min)`.
    /// Returns `+inf` for rank-deficient forms.
    pub fn distortion(&self) -> f64 {
        let hi = self.eigs.first().copied().unwrap_or(0.0);
        let lo = self.eigs.last().copied().unwrap_or(0.0);
        if lo <= TOL.rank * hi.max(0.0) || hi <= 0.0 {
            f64::INFINITY
        } else {
            (hi / lo).sqrt()
        }
    }
}

/// Convenience free function mirroring [`SeminormMetric::distortion`].
pub fn distortion(metric: &SeminormMetric) -> f64 {
    metric.distortion()
}

/// Exact max pairwise distance under `metric`, by scan over transformed
/// points. Empty and singleton sets have diameter 0.
pub fn diameter(points: &[Point], metric: &SeminormMetric) -> f64 {
    let t: Vec<Point> = points.iter().map(|p| metric.transform(p)).collect();
    let mut best = 0.0f64;
    for i in 0..t.len() {
        for j in (i + 1)..t.len() {
            let d = (&t[i] - &t[j]).norm();
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Ellipsoid `{ x : (x - center)^T form (x - center) <= 1 }` intersected with
/// its affine hull `center + span(hull_basis)`. `form` is PSD on R^m and
/// positive definite on the hull subspace; directions off the hull are
/// excluded by the span test, not the quadratic.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: Point,
    pub form: DMatrix<f64>,
    /// Orthonormal basis (m x rank) of the affine hull's direction space.
    pub hull_basis: DMatrix<f64>,
    pub rank: usize,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Quadratic form value `(x - center)^T form (x - center)`.
    pub fn quadratic(&self, x: &Point) -> f64 {
        let d = x - &self.center;
        (&self.form * &d).dot(&d)
    }

    /// Distance from `x - center` to the hull subspace.
    pub fn off_hull_residual(&self, x: &Point) -> f64 {
        let d = x - &self.center;
        let proj = &self.hull_basis * (self.hull_basis.transpose() * &d);
        (d - proj).norm()
    }

    /// Membership with boundaries relaxed by `tol`; the span test uses a
    /// scale-aware relaxation `tol * (1 + |x - center|)`.
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        let d = x - &self.center;
        if self.rank < self.dim() {
            let scale = 1.0 + d.norm();
            if self.off_hull_residual(x) > tol * scale {
                return false;
            }
        }
        if self.rank == 0 {
            return true; // span test above already pinned x to the center
        }
        self.quadratic(x) <= 1.0 + tol
    }

    /// Homothety about `z` with ratio `lambda > 0`:
    /// `{ z + lambda (x - z) : x in E }`.
    pub fn scale(&self, z: &Point, lambda: f64) -> Ellipsoid {
        assert!(lambda > 0.0, "scale ratio must be positive");
        Ellipsoid {
            center: z + (&self.center - z) * lambda,
            form: &self.form / (lambda * lambda),
            hull_basis: self.hull_basis.clone(),
            rank: self.rank,
        }
    }

    /// Metric whose unit ball about `center` is this ellipsoid (a seminorm
    /// when the ellipsoid is degenerate).
    pub fn metric(&self) -> SeminormMetric {
        SeminormMetric::new(self.form.clone()).expect("ellipsoid form is PSD")
    }

    /// The form restricted to hull coordinates (rank x rank, positive
    /// definite), as `hull_basis^T form hull_basis`.
    pub fn hull_form(&self) -> DMatrix<f64> {
        self.hull_basis.transpose() * &self.form * &self.hull_basis
    }

    /// Point on the boundary in hull direction `u` (rank-dim, need not be
    /// unit): `center + hull_basis W^{-1/2} u / |W^{-1/2} u|`-style, i.e. the
    /// boundary point of the quadratic along that direction.
    pub fn boundary_point(&self, u: &DVector<f64>) -> Point {
        assert_eq!(u.len(), self.rank);
        assert!(self.rank > 0);
        let dir = &self.hull_basis * u;
        let q = (&self.form * &dir).dot(&dir);
        assert!(q > 0.0, "direction degenerate under the form");
        &self.center + dir / q.sqrt()
    }

    /// Affine map sending this ellipsoid onto the unit ball: `x ->
    /// form^{1/2} (x - center)`. Requires full rank.
    pub fn to_unit_ball_transform(&self) -> GeomResult<AffineMap> {
        if self.rank < self.dim() {
            return Err(GeomError::DegenerateEllipsoid { rank: self.rank, dim: self.dim() });
        }
        let root = psd_sqrt(&self.form);
        let offset = -&root * &self.center;
        Ok(AffineMap::new(root, offset))
    }

    /// Map into hull coordinates in which the ellipsoid is the unit ball of
    /// R^rank: `x -> W^{1/2} hull_basis^T (x - center)` with `W` the restricted
    /// form. Output dimension is `rank`; this is the degeneracy-tolerant
    /// companion of [`Ellipsoid::to_unit_ball_transform`].
    pub fn to_unit_ball_coords(&self) -> AffineMap {
        let w = self.hull_form();
        let root = psd_sqrt(&w);
        let proj = &root * self.hull_basis.transpose();
        let offset = -&proj * &self.center;
        AffineMap::new(proj, offset)
    }
}

/// Symmetric PSD square root via eigendecomposition; round-off negatives are
/// clamped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let root_vals = DVector::from_iterator(
        m.nrows(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&root_vals) * eig.eigenvectors.transpose()
}

/// Euclidean free function version of hull membership over raw slices.
pub(crate) fn col_matrix(points: &[Point]) -> DMatrix<f64> {
    let m = points[0].len();
    DMatrix::from_fn(m, points.len(), |r, c| points[c][r])
}
