//! Primitives on the unit sphere S² and on orthonormal frames: geodesics,
//! rotations, Log/Exp maps, Fréchet means, circle fitting and the two
//! euclideanization charts (circle residuals and tangent-plane coordinates).

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Unit tolerance accepted when adopting externally supplied directions.
pub const UNIT_INPUT_TOL: f64 = 1e-6;
/// Orthogonality tolerance for frames.
pub const FRAME_ORTHO_TOL: f64 = 1e-9;

/// A unit vector in R³. Construction always renormalizes, so the invariant
/// `x² + y² + z² = 1` holds to machine precision afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vector3<f64>);

impl UnitVec3 {
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::numerical(format!(
                "cannot normalize near-zero vector ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        Ok(UnitVec3(v / n))
    }

    pub fn from_components(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    /// Adopt a direction that is supposed to already be unit length.
    /// Deviations up to `UNIT_INPUT_TOL` are renormalized; larger ones are
    /// rejected. Vectors already unit to machine precision keep their bits,
    /// so file round trips stay byte-identical.
    pub fn adopt(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > UNIT_INPUT_TOL {
            return Err(Error::validation(format!(
                "direction ({}, {}, {}) has norm {n}, outside unit tolerance {UNIT_INPUT_TOL}",
                v.x, v.y, v.z
            )));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(UnitVec3(v));
        }
        Self::new(v)
    }

    pub fn x_axis() -> Self {
        UnitVec3(Vector3::x())
    }
    pub fn y_axis() -> Self {
        UnitVec3(Vector3::y())
    }
    pub fn z_axis() -> Self {
        UnitVec3(Vector3::z())
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_vector(self) -> Vector3<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        UnitVec3(-self.0)
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn cross(&self, other: &UnitVec3) -> Vector3<f64> {
        self.0.cross(&other.0)
    }

    /// Apply a rotation matrix; renormalizes to absorb rounding.
    pub fn rotated(&self, r: &Matrix3<f64>) -> UnitVec3 {
        let v = r * self.0;
        UnitVec3(v / v.norm())
    }
}

impl std::ops::Deref for UnitVec3 {
    type Target = Vector3<f64>;
    fn deref(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Tangent-space coordinates at a base point of S² (radian-scaled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVec2 {
    pub a1: f64,
    pub a2: f64,
}

impl TangentVec2 {
    pub fn new(a1: f64, a2: f64) -> Self {
        TangentVec2 { a1, a2 }
    }

    pub fn norm(&self) -> f64 {
        self.a1.hypot(self.a2)
    }
}

/// Right-handed orthonormal triple (n, b, b⊥) with b⊥ = n × b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    n: UnitVec3,
    b: UnitVec3,
    b_perp: UnitVec3,
}

impl Frame {
    /// Build from n and b; b is re-projected orthogonal to n and b⊥ = n × b.
    pub fn from_n_b(n: UnitVec3, b: UnitVec3) -> Result<Self> {
        let b_proj = b.as_vector() - n.as_vector() * n.dot(&b);
        let b = UnitVec3::new(b_proj)
            .map_err(|_| Error::numerical("frame b direction is parallel to n"))?;
        let b_perp = UnitVec3::new(n.cross(&b))?;
        Ok(Frame { n, b, b_perp })
    }

    /// Build from all three vectors, validating orthonormality and
    /// right-handedness to `FRAME_ORTHO_TOL`.
    pub fn from_vectors(n: UnitVec3, b: UnitVec3, b_perp: UnitVec3) -> Result<Self> {
        let f = Frame { n, b, b_perp };
        f.validate()?;
        Ok(f)
    }

    /// Build without validation. Intended for tests and for transient
    /// intermediates that are checked later (e.g. deliberately left-handed
    /// frames exercising the reflection-adjustment branch).
    pub fn from_vectors_unchecked(n: UnitVec3, b: UnitVec3, b_perp: UnitVec3) -> Self {
        Frame { n, b, b_perp }
    }

    /// The canonical reference frame (n, b, b⊥) = (e₃, e₁, e₂).
    pub fn canonical() -> Self {
        Frame {
            n: UnitVec3::z_axis(),
            b: UnitVec3::x_axis(),
            b_perp: UnitVec3::y_axis(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dots = [
            self.n.dot(&self.b),
            self.n.dot(&self.b_perp),
            self.b.dot(&self.b_perp),
        ];
        if dots.iter().any(|d| d.abs() > FRAME_ORTHO_TOL) {
            return Err(Error::validation(format!(
                "frame vectors not orthogonal (dots {dots:?})"
            )));
        }
        let cross = self.n.cross(&self.b);
        if (cross - self.b_perp.as_vector()).norm() > FRAME_ORTHO_TOL {
            return Err(Error::validation(
                "frame is not right-handed: b_perp != n x b".to_string(),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> &UnitVec3 {
        &self.n
    }
    pub fn b(&self) -> &UnitVec3 {
        &self.b
    }
    pub fn b_perp(&self) -> &UnitVec3 {
        &self.b_perp
    }

    /// Axis by index: 0 = n, 1 = b, 2 = b⊥.
    pub fn axis(&self, i: usize) -> &UnitVec3 {
        match i {
            0 => &self.n,
            1 => &self.b,
            2 => &self.b_perp,
            _ => panic!("frame axis index out of range"),
        }
    }

    /// Columns (n, b, b⊥) as a 3×3 matrix.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[*self.n.as_vector(), *self.b.as_vector(), *self.b_perp.as_vector()])
    }

    /// Rotate every frame vector by `r` (not validated; rotations preserve
    /// orthonormality up to rounding).
    pub fn rotated(&self, r: &Matrix3<f64>) -> Frame {
        Frame {
            n: self.n.rotated(r),
            b: self.b.rotated(r),
            b_perp: self.b_perp.rotated(r),
        }
    }

    /// Negate the third vector. Used by the reflection adjustment of the
    /// local reparameterization.
    pub fn with_negated_b_perp(&self) -> Frame {
        Frame {
            n: self.n,
            b: self.b,
            b_perp: self.b_perp.neg(),
        }
    }

    /// Largest geodesic deviation between corresponding axes of two frames.
    pub fn max_axis_angle_to(&self, other: &Frame) -> f64 {
        (0..3)
            .map(|i| geodesic_dist(self.axis(i), other.axis(i)))
            .fold(0.0, f64::max)
    }
}

/// Geodesic (great-circle) distance in [0, π].
///
/// Evaluates arccos(x·y) through atan2 of the cross/dot pair, which keeps
/// full precision for nearly parallel and nearly antipodal inputs.
pub fn geodesic_dist(x: &UnitVec3, y: &UnitVec3) -> f64 {
    let c = x.cross(y).norm();
    let d = x.dot(y);
    c.atan2(d)
}

/// Rotation moving `x` to `y` along the shortest geodesic:
/// R = I + sinα (ywᵀ − wyᵀ) + (cosα − 1)(yyᵀ + wwᵀ) with
/// w = (x − y(yᵀx))/‖·‖ and α the angle between x and y.
///
/// Returns the identity when x = y and an error when x = −y, where the
/// shortest geodesic is not unique.
pub fn rotation_between(x: &UnitVec3, y: &UnitVec3) -> Result<Matrix3<f64>> {
    let cos_a = y.dot(x);
    let w_raw = x.as_vector() - y.as_vector() * cos_a;
    let sin_a = w_raw.norm();
    if sin_a < 1e-15 {
        if cos_a > 0.0 {
            return Ok(Matrix3::identity());
        }
        return Err(Error::numerical(
            "antipodal rotation undefined: x = -y".to_string(),
        ));
    }
    let w = w_raw / sin_a;
    let yv = y.as_vector();
    let skew = yv * w.transpose() - w * yv.transpose();
    let planar = yv * yv.transpose() + w * w.transpose();
    Ok(Matrix3::identity() + skew * sin_a + planar * (cos_a - 1.0))
}

/// Rotation by `angle` about a unit `axis` (Rodrigues).
pub fn rotation_about(axis: &UnitVec3, angle: f64) -> Matrix3<f64> {
    let k = axis.as_vector();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Log map at the north pole q = (0,0,1):
/// Log_q(v) = (v₁ θ/sinθ, v₂ θ/sinθ) with θ = arccos(v₃).
pub fn log_map_north(v: &UnitVec3) -> Result<TangentVec2> {
    let theta = geodesic_dist(v, &UnitVec3::z_axis());
    if theta > PI - 1e-12 {
        return Err(Error::numerical(
            "log map undefined at cut locus (v = -q)".to_string(),
        ));
    }
    let scale = if theta < 1e-9 {
        // removable singularity: θ/sinθ → 1
        1.0
    } else {
        theta / theta.sin()
    };
    Ok(TangentVec2::new(v.x * scale, v.y * scale))
}

/// Exp map at the north pole; inverse of `log_map_north`.
pub fn exp_map_north(t: &TangentVec2) -> UnitVec3 {
    let theta = t.norm();
    if theta < 1e-15 {
        return UnitVec3::z_axis();
    }
    let s = theta.sin() / theta;
    UnitVec3(Vector3::new(t.a1 * s, t.a2 * s, theta.cos()))
}

/// Unit tangent vector at `v` pointing toward `w` along the connecting
/// geodesic. Errors when the two points coincide or are antipodal.
pub fn unit_tangent_toward(v: &UnitVec3, w: &UnitVec3) -> Result<Vector3<f64>> {
    let raw = w.as_vector() - v.as_vector() * v.dot(w);
    let n = raw.norm();
    if n < 1e-14 {
        return Err(Error::numerical(
            "tangent direction undefined: points coincide or are antipodal".to_string(),
        ));
    }
    Ok(raw / n)
}

/// Point reached by walking `angle` radians from `from` along the unit
/// tangent `dir` (‖dir‖ = 1, dir ⊥ from).
pub fn walk_geodesic(from: &UnitVec3, dir: &Vector3<f64>, angle: f64) -> UnitVec3 {
    let v = from.as_vector() * angle.cos() + dir * angle.sin();
    UnitVec3(v / v.norm())
}

/// Fréchet mean on S² by iterative tangent averaging.
///
/// Repeatedly maps the sample to the tangent space of the current estimate,
/// averages, and exponentiates back until the update angle drops below 1e-12
/// (at most 1000 iterations).
pub fn frechet_mean(points: &[UnitVec3]) -> Result<UnitVec3> {
    if points.is_empty() {
        return Err(Error::validation("frechet_mean of empty set".to_string()));
    }
    if points.len() == 1 {
        return Ok(points[0]);
    }
    let sum: Vector3<f64> = points.iter().map(|p| *p.as_vector()).sum();
    let mut mean = if sum.norm() > 1e-9 {
        UnitVec3::new(sum)?
    } else {
        points[0]
    };
    for _ in 0..1000 {
        let mut avg = Vector3::zeros();
        for p in points {
            let cos_t = mean.dot(p);
            let raw = p.as_vector() - mean.as_vector() * cos_t;
            let sin_t = raw.norm();
            let theta = sin_t.atan2(cos_t);
            if sin_t < 1e-15 {
                if cos_t < 0.0 {
                    return Err(Error::numerical(
                        "frechet_mean: point antipodal to current estimate".to_string(),
                    ));
                }
                continue;
            }
            avg += raw * (theta / sin_t);
        }
        avg /= points.len() as f64;
        let step = avg.norm();
        if step < 1e-12 {
            return Ok(mean);
        }
        mean = walk_geodesic(&mean, &(avg / step), step);
    }
    Err(Error::numerical(format!(
        "frechet_mean did not converge; last iterate ({}, {}, {})",
        mean.x, mean.y, mean.z
    )))
}

/// Circular Fréchet mean of angles (radians), for reasonably concentrated
/// data. Starts at the resultant direction and polishes by averaging wrapped
/// deviations.
pub fn circular_mean(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::validation("circular_mean of empty set".to_string()));
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let mut mean = if s.hypot(c) > 1e-12 { s.atan2(c) } else { angles[0] };
    for _ in 0..100 {
        let adj: f64 = angles.iter().map(|a| wrap_angle(a - mean)).sum::<f64>() / angles.len() as f64;
        mean = wrap_angle(mean + adj);
        if adj.abs() < 1e-13 {
            break;
        }
    }
    Ok(mean)
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// A fitted circle on S²: all points at geodesic distance `radius_angle`
/// from `axis`. `is_great` marks radius π/2.
#[derive(Debug, Clone, Copy)]
pub struct FittedCircle {
    pub axis: UnitVec3,
    pub radius_angle: f64,
    pub is_great: bool,
}

/// Configuration for the circle fit and the great-vs-small decision rule.
#[derive(Debug, Clone, Copy)]
pub struct CircleFitConfig {
    /// Pick the small circle only if it reduces mean squared residual by more
    /// than this relative factor.
    pub small_gain_factor: f64,
    /// ... and only if its radius stays below π/2 − `great_margin`.
    pub great_margin: f64,
    pub max_iters: usize,
}

impl Default for CircleFitConfig {
    fn default() -> Self {
        CircleFitConfig {
            small_gain_factor: 0.05,
            great_margin: 0.05,
            max_iters: 200,
        }
    }
}

/// Colatitude moments (Σθᵢ, Σθᵢ²); they give the residual objective at any
/// radius in closed form: Σ(θᵢ − r)² = Σθ² − 2rΣθ + nr².
fn colat_moments(points: &[UnitVec3], axis: &UnitVec3) -> (f64, f64) {
    let mut s = 0.0;
    let mut s2 = 0.0;
    for p in points {
        let theta = geodesic_dist(axis, p);
        s += theta;
        s2 += theta * theta;
    }
    (s, s2)
}

#[inline]
fn obj_at(n: f64, s: f64, s2: f64, r: f64) -> f64 {
    (s2 - 2.0 * r * s + n * r * r).max(0.0)
}

/// One damped Gauss-Newton step for the axis. Moving the axis by a tangent
/// vector δ changes each colatitude by −tᵢ·δ (tᵢ the unit tangent at the
/// axis toward point i). With a free radius the optimal r is the mean
/// colatitude, so the reduced objective is the colatitude variance and the
/// Jacobian rows are centered; this follows the axis/radius valley of
/// clustered data that a plain alternation zigzags through. The step is
/// halved until the objective improves. Returns (axis, r, objective).
fn refine_step(
    points: &[UnitVec3],
    axis: UnitVec3,
    fixed_radius: Option<f64>,
) -> (UnitVec3, f64, f64) {
    let n = points.len() as f64;
    let (e1, e2) = plane_basis(&axis);
    let (mut s, mut s2) = (0.0f64, 0.0f64);
    let (mut su, mut sv) = (0.0f64, 0.0f64);
    let (mut auu, mut auv, mut avv) = (0.0f64, 0.0f64, 0.0f64);
    let (mut gu, mut gv) = (0.0f64, 0.0f64);
    for p in points {
        let cos_t = axis.dot(p);
        let raw = p.as_vector() - axis.as_vector() * cos_t;
        let sin_t = raw.norm();
        let theta = sin_t.atan2(cos_t);
        s += theta;
        s2 += theta * theta;
        if sin_t < 1e-12 {
            continue;
        }
        let t = raw / sin_t;
        let (tu, tv) = (t.dot(&e1), t.dot(&e2));
        su += tu;
        sv += tv;
        auu += tu * tu;
        auv += tu * tv;
        avv += tv * tv;
        gu += theta * tu;
        gv += theta * tv;
    }
    let r = fixed_radius.unwrap_or(s / n);
    let obj = obj_at(n, s, s2, r);
    // residual gradient Σ(θᵢ − r)tᵢ; with r = θ̄ this is already centered
    gu -= r * su;
    gv -= r * sv;
    if fixed_radius.is_none() {
        // Schur complement of the radius: center the tangent rows
        auu -= su * su / n;
        auv -= su * sv / n;
        avv -= sv * sv / n;
    }
    let ridge = 1e-12 * (auu + avv).max(1e-300);
    let (a11, a12, a22) = (auu + ridge, auv, avv + ridge);
    let det = a11 * a22 - a12 * a12;
    if !(det > 0.0) {
        return (axis, r, obj);
    }
    let mut du = (a22 * gu - a12 * gv) / det;
    let mut dv = (a11 * gv - a12 * gu) / det;
    for _ in 0..10 {
        let step = e1 * du + e2 * dv;
        let len = step.norm();
        if len < 1e-17 {
            break;
        }
        let cand = walk_geodesic(&axis, &(step / len), len);
        let (cs, cs2) = colat_moments(points, &cand);
        let cr = fixed_radius.unwrap_or((cs / n).clamp(1e-12, PI - 1e-12));
        let cobj = obj_at(n, cs, cs2, cr);
        if cobj < obj {
            return (cand, cr, cobj);
        }
        du *= 0.5;
        dv *= 0.5;
    }
    (axis, r, obj)
}

fn fit_with_initial(
    points: &[UnitVec3],
    init: UnitVec3,
    fixed_radius: Option<f64>,
    cfg: &CircleFitConfig,
) -> (UnitVec3, f64, f64) {
    let mut axis = init;
    let mut r = fixed_radius.unwrap_or(0.0);
    let mut obj = f64::INFINITY;
    // clustered data leaves near-flat directions in the objective; stop once
    // relative progress stalls rather than crawling along them
    let mut stalled = 0;
    for _ in 0..cfg.max_iters {
        let (new_axis, new_r, new_obj) = refine_step(points, axis, fixed_radius);
        let moved = geodesic_dist(&axis, &new_axis);
        let improved = obj - new_obj;
        axis = new_axis;
        r = new_r;
        obj = new_obj;
        if moved == 0.0 {
            break;
        }
        if improved < 1e-9 * obj.max(1e-300) {
            stalled += 1;
            if stalled >= 2 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    (axis, r, obj)
}

fn min_eigvec(scatter: &Matrix3<f64>) -> Option<UnitVec3> {
    let eig = nalgebra::SymmetricEigen::new(*scatter);
    let mut min_i = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
            min_i = i;
        }
    }
    UnitVec3::new(eig.eigenvectors.column(min_i).into_owned()).ok()
}

/// Deterministic initial axes for the small-circle fit: ± the
/// smallest-eigenvector of the centered outer-product sum (the least-squares
/// plane normal) and the six signed coordinate axes.
fn initial_axes(points: &[UnitVec3]) -> Vec<UnitVec3> {
    let n = points.len() as f64;
    let mean: Vector3<f64> = points.iter().map(|p| *p.as_vector()).sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.as_vector() - mean;
        scatter += d * d.transpose();
    }
    let mut axes = Vec::with_capacity(8);
    if let Some(a) = min_eigvec(&scatter) {
        axes.push(a);
        axes.push(a.neg());
    }
    for a in [
        UnitVec3::x_axis(),
        UnitVec3::x_axis().neg(),
        UnitVec3::y_axis(),
        UnitVec3::y_axis().neg(),
        UnitVec3::z_axis(),
        UnitVec3::z_axis().neg(),
    ] {
        if axes.len() < 8 {
            axes.push(a);
        }
    }
    axes
}

/// Initial axes for the great-circle fit: points on a great circle satisfy
/// axis·x = 0, so the smallest-eigenvector of the uncentered outer-product
/// sum is the algebraic optimum already.
fn great_axes(points: &[UnitVec3]) -> Vec<UnitVec3> {
    let mut scatter = Matrix3::zeros();
    for p in points {
        scatter += p.as_vector() * p.as_vector().transpose();
    }
    match min_eigvec(&scatter) {
        Some(a) => vec![a, a.neg()],
        None => vec![UnitVec3::z_axis(), UnitVec3::z_axis().neg()],
    }
}

/// Least-squares circle fit on S²: minimizes Σ (d_g(axis, xᵢ) − r)² by
/// alternating radius/axis updates from eight deterministic starts, then
/// applies the great-vs-small decision rule.
pub fn fit_circle(points: &[UnitVec3], cfg: &CircleFitConfig) -> Result<FittedCircle> {
    if points.len() < 3 {
        return Err(Error::validation(
            "circle fit needs at least 3 points".to_string(),
        ));
    }
    let first = &points[0];
    if points
        .iter()
        .all(|p| geodesic_dist(first, p) < 1e-12)
    {
        return Err(Error::numerical(
            "circle fit degenerate: all points identical".to_string(),
        ));
    }

    let mut best_small: Option<(UnitVec3, f64, f64)> = None;
    let mut best_great: Option<(UnitVec3, f64)> = None;
    for init in initial_axes(points) {
        let (axis, r, obj) = fit_with_initial(points, init, None, cfg);
        if best_small.as_ref().map_or(true, |(_, _, b)| obj < *b) {
            best_small = Some((axis, r, obj));
        }
    }
    for init in great_axes(points) {
        let (gaxis, _, gobj) = fit_with_initial(points, init, Some(FRAC_PI_2), cfg);
        if best_great.as_ref().map_or(true, |(_, b)| gobj < *b) {
            best_great = Some((gaxis, gobj));
        }
    }
    let (mut axis, mut r, obj_small) = best_small.expect("at least one start");
    let (gaxis, obj_great) = best_great.expect("at least one start");

    // canonicalize to colatitude ≤ π/2
    if r > FRAC_PI_2 {
        axis = axis.neg();
        r = PI - r;
    }

    let n = points.len() as f64;
    let mse_small = obj_small / n;
    let mse_great = obj_great / n;
    let take_small = mse_small < (1.0 - cfg.small_gain_factor) * mse_great
        && r < FRAC_PI_2 - cfg.great_margin;

    if take_small {
        if r <= 0.0 {
            r = f64::MIN_POSITIVE;
        }
        Ok(FittedCircle {
            axis,
            radius_angle: r,
            is_great: false,
        })
    } else {
        Ok(FittedCircle {
            axis: gaxis,
            radius_angle: FRAC_PI_2,
            is_great: true,
        })
    }
}

/// An in-plane orthonormal basis (e_ref1, e_ref2) for the plane orthogonal to
/// `axis`, chosen deterministically.
fn plane_basis(axis: &UnitVec3) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if axis.x.abs() <= axis.y.abs() && axis.x.abs() <= axis.z.abs() {
        Vector3::x()
    } else if axis.y.abs() <= axis.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1_raw = seed - axis.as_vector() * axis.as_vector().dot(&seed);
    let e1 = e1_raw / e1_raw.norm();
    let e2 = axis.as_vector().cross(&e1);
    (e1, e2)
}

/// Result of circle-residual euclideanization on S².
#[derive(Debug, Clone)]
pub struct CircleResiduals {
    /// Per point: (signed radial residual, signed arc length to the circular
    /// mean scaled by sin r).
    pub coords: Vec<TangentVec2>,
    /// Point on the fitted circle at the circular mean of the projections.
    pub base: UnitVec3,
    pub circle: FittedCircle,
}

/// Euclideanize by circle residuals: component 1 is the signed geodesic
/// distance to the fitted circle (positive outside as seen from the axis),
/// component 2 the signed arc length along the circle from the projected
/// point to the circular mean of projections, scaled by sin(r). Longitude
/// sign follows the right-hand rule about the axis.
pub fn euclideanize_pns(points: &[UnitVec3]) -> Result<CircleResiduals> {
    euclideanize_pns_with(points, &CircleFitConfig::default())
}

pub fn euclideanize_pns_with(
    points: &[UnitVec3],
    cfg: &CircleFitConfig,
) -> Result<CircleResiduals> {
    let circle = fit_circle(points, cfg)?;
    let (e1, e2) = plane_basis(&circle.axis);
    let longitudes: Vec<f64> = points
        .iter()
        .map(|p| {
            let u = p.as_vector().dot(&e1);
            let v = p.as_vector().dot(&e2);
            v.atan2(u)
        })
        .collect();
    let phi_mean = circular_mean(&longitudes)?;
    let sin_r = circle.radius_angle.sin();
    let coords = points
        .iter()
        .zip(&longitudes)
        .map(|(p, phi)| {
            let radial = geodesic_dist(&circle.axis, p) - circle.radius_angle;
            let arc = wrap_angle(phi - phi_mean) * sin_r;
            TangentVec2::new(radial, arc)
        })
        .collect();
    let base_v = circle.axis.as_vector() * circle.radius_angle.cos()
        + (e1 * phi_mean.cos() + e2 * phi_mean.sin()) * sin_r;
    Ok(CircleResiduals {
        coords,
        base: UnitVec3::new(base_v)?,
        circle,
    })
}

/// Euclideanize on the tangent plane: rotate the Fréchet mean to the north
/// pole, then apply the Log map. Returns the coordinates and the mean.
pub fn euclideanize_tangent(points: &[UnitVec3]) -> Result<(Vec<TangentVec2>, UnitVec3)> {
    let mean = frechet_mean(points)?;
    let rot = rotation_between(&mean, &UnitVec3::z_axis())?;
    let coords = points
        .iter()
        .map(|p| log_map_north(&p.rotated(&rot)))
        .collect::<Result<Vec<_>>>()?;
    Ok((coords, mean))
}
