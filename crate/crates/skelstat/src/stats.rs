//! Population statistics: the LP distance, per-GOP means, constrained frame
//! means by iterative geodesic alignment, the mean LP-ds-rep, and
//! generalized Procrustes alignment for the GP baseline.

use nalgebra::{Matrix3, Vector3};

use crate::dsrep::{lp_size, Connection, LpDsRep, Spoke};
use crate::error::{Error, Result};
use crate::sphere::{
    euclideanize_pns, frechet_mean, geodesic_dist, rotation_between, unit_tangent_toward,
    walk_geodesic, Frame, UnitVec3,
};

/// A population of structurally identical LP ds-reps.
#[derive(Debug, Clone)]
pub struct LpPopulation {
    members: Vec<LpDsRep>,
}

impl LpPopulation {
    pub fn new(members: Vec<LpDsRep>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::validation("empty population".to_string()));
        }
        for (i, m) in members.iter().enumerate().skip(1) {
            if !members[0].same_structure(m) {
                return Err(Error::validation(format!(
                    "population member {i} differs structurally from member 0"
                )));
            }
        }
        Ok(LpPopulation { members })
    }

    pub fn members(&self) -> &[LpDsRep] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn scaled(&self) -> bool {
        self.members[0].scaled
    }
}

/// Distance between two scaled LP ds-reps: the root of the summed squared
/// geodesic distances over all direction GOPs (spokes, connections, frame
/// axes) plus squared Euclidean distances over all length GOPs. With
/// `commensurate`, length differences are stretched by π to share the range
/// of the geodesic terms (this rescales individual terms, not the minimizers
/// of per-GOP means).
pub fn lp_distance(a: &LpDsRep, b: &LpDsRep, commensurate: bool) -> Result<f64> {
    if !a.same_structure(b) {
        return Err(Error::validation(
            "lp_distance: structural mismatch".to_string(),
        ));
    }
    if !a.scaled || !b.scaled {
        return Err(Error::validation(
            "lp_distance is defined on scaled representations".to_string(),
        ));
    }
    let len_w = if commensurate {
        std::f64::consts::PI.powi(2)
    } else {
        1.0
    };
    let root = a.hierarchy.root();
    let mut sum = 0.0;
    for (sa, sb) in a.spokes.iter().zip(&b.spokes) {
        sum += geodesic_dist(&sa.dir, &sb.dir).powi(2);
        sum += len_w * (sa.len - sb.len).powi(2);
    }
    for j in 0..a.n_points() {
        let (fa, fb) = (&a.frames[j], &b.frames[j]);
        sum += geodesic_dist(fa.n(), fb.n()).powi(2);
        sum += geodesic_dist(fa.b(), fb.b()).powi(2);
        sum += geodesic_dist(fa.b_perp(), fb.b_perp()).powi(2);
        if j != root {
            let (ca, cb) = (&a.connections[j], &b.connections[j]);
            sum += geodesic_dist(&ca.dir, &cb.dir).powi(2);
            sum += len_w * (ca.len - cb.len).powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// How directional GOP means are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMean {
    /// Base point of the circle-residual euclideanization; falls back to the
    /// Fréchet mean when the circle fit is degenerate.
    Pns,
    Frechet,
}

/// Mean of a directional sample per the chosen method.
pub fn direction_mean(points: &[UnitVec3], method: DirectionMean) -> Result<UnitVec3> {
    match method {
        DirectionMean::Frechet => frechet_mean(points),
        DirectionMean::Pns => match euclideanize_pns(points) {
            Ok(res) => Ok(res.base),
            Err(_) => frechet_mean(points),
        },
    }
}

/// Initial frame strategies for the frame-mean alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Place n and b a quarter turn apart on the geodesic through the mean
    /// axes, symmetric about its midpoint.
    Geodesic,
    /// Rotate the canonical frame so its unit centroid matches the unit
    /// centroid of the mean axes.
    Centroid,
}

/// Initial frame from (possibly non-orthogonal) mean axes.
pub fn initial_frame(
    n_mean: &UnitVec3,
    b_mean: &UnitVec3,
    bperp_mean: &UnitVec3,
    strategy: InitStrategy,
) -> Result<Frame> {
    match strategy {
        InitStrategy::Centroid => {
            let c = n_mean.as_vector() + b_mean.as_vector() + bperp_mean.as_vector();
            let target = UnitVec3::new(c)
                .map_err(|_| Error::numerical("mean axes sum to zero".to_string()))?;
            let ones = UnitVec3::from_components(1.0, 1.0, 1.0).unwrap();
            let r = rotation_between(&ones, &target)?;
            Ok(Frame::canonical().rotated(&r))
        }
        InitStrategy::Geodesic => {
            let theta = geodesic_dist(n_mean, b_mean);
            if theta < 1e-9 || theta > std::f64::consts::PI - 1e-9 {
                return Err(Error::numerical(
                    "mean n and b are identical or antipodal".to_string(),
                ));
            }
            let toward_b = unit_tangent_toward(n_mean, b_mean)?;
            let mid = walk_geodesic(n_mean, &toward_b, theta / 2.0);
            let dir = unit_tangent_toward(&mid, b_mean)?;
            let quarter = std::f64::consts::FRAC_PI_4;
            let n = walk_geodesic(&mid, &dir, -quarter);
            let b = walk_geodesic(&mid, &dir, quarter);
            let b_perp = UnitVec3::new(n.cross(&b))?;
            Frame::from_vectors(n, b, b_perp)
        }
    }
}

/// Configuration of the iterative frame alignment.
#[derive(Debug, Clone, Copy)]
pub struct FrameMeanConfig {
    pub direction_mean: DirectionMean,
    /// Geodesic step size δ.
    pub step: f64,
    /// Convergence threshold ε on the objective and its change.
    pub epsilon: f64,
    pub max_iters: usize,
    /// The step is halved whenever a sweep stalls; below this it stops.
    pub min_step: f64,
}

impl Default for FrameMeanConfig {
    fn default() -> Self {
        FrameMeanConfig {
            direction_mean: DirectionMean::Pns,
            step: 0.01,
            epsilon: 1e-8,
            max_iters: 100_000,
            min_step: 1e-7,
        }
    }
}

/// Objective Δ of the frame alignment: the root of the summed squared
/// geodesic distances of the frame axes to their targets.
pub fn frame_objective(frame: &Frame, targets: &[UnitVec3; 3]) -> f64 {
    (0..3)
        .map(|i| geodesic_dist(frame.axis(i), &targets[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Iteratively rotate `init` toward the target axes: each step nudges one
/// axis along the tangent toward its target by the current step size and
/// rotates the whole frame accordingly, keeping it exactly orthonormal.
/// Steps that would increase the objective are skipped, so the returned
/// trace (objective after every sweep) is non-increasing.
pub fn align_frame_to_targets(
    init: Frame,
    targets: &[UnitVec3; 3],
    cfg: &FrameMeanConfig,
) -> Result<(Frame, Vec<f64>)> {
    let obj2 = |f: &Frame| -> f64 {
        (0..3)
            .map(|i| geodesic_dist(f.axis(i), &targets[i]).powi(2))
            .sum()
    };
    let mut frame = init;
    let mut cur = obj2(&frame);
    let mut trace = vec![cur.sqrt()];
    let mut delta = cfg.step;
    let mut prev = f64::INFINITY;
    let mut iters = 0usize;
    loop {
        let mut improved = false;
        for i in 0..3 {
            iters += 1;
            if iters > cfg.max_iters {
                return Err(Error::numerical(format!(
                    "frame alignment did not converge after {} steps; objective {} at frame n=({:.6}, {:.6}, {:.6})",
                    cfg.max_iters,
                    cur.sqrt(),
                    frame.n().x,
                    frame.n().y,
                    frame.n().z,
                )));
            }
            let axis = frame.axis(i);
            if geodesic_dist(axis, &targets[i]) < 1e-14 {
                continue;
            }
            let tangent = match unit_tangent_toward(axis, &targets[i]) {
                Ok(t) => t,
                Err(_) => continue, // antipodal target: no unique direction
            };
            let nudged = UnitVec3::new(axis.as_vector() + tangent * delta)?;
            let rot = rotation_between(axis, &nudged)?;
            let cand = frame.rotated(&rot);
            let cand_obj = obj2(&cand);
            if cand_obj <= cur {
                frame = cand;
                cur = cand_obj;
                improved = true;
            }
        }
        let obj = cur.sqrt();
        trace.push(obj);
        if obj < cfg.epsilon {
            break;
        }
        if (prev - obj).abs() < cfg.epsilon || !improved {
            delta *= 0.5;
            if delta < cfg.min_step {
                break;
            }
        }
        prev = obj;
    }
    Ok((frame, trace))
}

/// Outcome of a frame mean: the aligned frame, its objective, the per-sweep
/// objective trace and the component-wise target means.
#[derive(Debug, Clone)]
pub struct FrameMeanOutcome {
    pub frame: Frame,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub targets: [UnitVec3; 3],
}

/// Mean of a set of frames: component-wise directional means, then the
/// constrained alignment that restores orthonormality.
pub fn frame_mean(frames: &[Frame], cfg: &FrameMeanConfig) -> Result<Frame> {
    frame_mean_detailed(frames, cfg).map(|o| o.frame)
}

pub fn frame_mean_detailed(frames: &[Frame], cfg: &FrameMeanConfig) -> Result<FrameMeanOutcome> {
    if frames.is_empty() {
        return Err(Error::validation("frame_mean of empty set".to_string()));
    }
    let collect = |i: usize| -> Vec<UnitVec3> { frames.iter().map(|f| *f.axis(i)).collect() };
    let targets = [
        direction_mean(&collect(0), cfg.direction_mean)?,
        direction_mean(&collect(1), cfg.direction_mean)?,
        direction_mean(&collect(2), cfg.direction_mean)?,
    ];
    let init = initial_frame(&targets[0], &targets[1], &targets[2], InitStrategy::Geodesic)
        .or_else(|_| initial_frame(&targets[0], &targets[1], &targets[2], InitStrategy::Centroid))
        .unwrap_or_else(|_| Frame::canonical());
    let (frame, trace) = align_frame_to_targets(init, &targets, cfg)?;
    let objective = *trace.last().expect("nonempty trace");
    Ok(FrameMeanOutcome {
        frame,
        objective,
        trace,
        targets,
    })
}

/// How length GOP means are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMean {
    Geometric,
    Arithmetic,
}

fn length_mean(values: &[f64], method: LengthMean) -> f64 {
    let n = values.len() as f64;
    match method {
        LengthMean::Arithmetic => values.iter().sum::<f64>() / n,
        LengthMean::Geometric => (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MeanConfig {
    pub length_mean: LengthMean,
    pub direction_mean: DirectionMean,
    pub frame: FrameMeanConfig,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            length_mean: LengthMean::Geometric,
            direction_mean: DirectionMean::Pns,
            frame: FrameMeanConfig::default(),
        }
    }
}

/// Mean LP-ds-rep and whether its lengths had to be renormalized to reach
/// LP-size one (always the case for geometric length means).
#[derive(Debug, Clone)]
pub struct MeanOutcome {
    pub mean: LpDsRep,
    pub renormalized: bool,
    pub renorm_factor: f64,
}

/// Per-GOP mean of a scaled population: directional means for spokes,
/// connections and frame axes (the latter re-orthonormalized by the frame
/// alignment), length means per the configuration. With arithmetic length
/// means the result has LP-size one by construction; with geometric means it
/// is renormalized and flagged.
pub fn mean_lp(pop: &LpPopulation, cfg: &MeanConfig) -> Result<MeanOutcome> {
    if !pop.scaled() {
        return Err(Error::validation(
            "mean_lp expects a scaled population".to_string(),
        ));
    }
    let members = pop.members();
    let template = &members[0];
    let n_points = template.n_points();
    let root = template.hierarchy.root();

    let mut spokes = Vec::with_capacity(template.spokes.len());
    for i in 0..template.spokes.len() {
        let dirs: Vec<UnitVec3> = members.iter().map(|m| m.spokes[i].dir).collect();
        let lens: Vec<f64> = members.iter().map(|m| m.spokes[i].len).collect();
        let dir = direction_mean(&dirs, cfg.direction_mean)?;
        warn_if_spread(&dirs, &dir, "spoke", i);
        spokes.push(Spoke {
            tail: template.spokes[i].tail,
            kind: template.spokes[i].kind,
            dir,
            len: length_mean(&lens, cfg.length_mean),
        });
    }

    let mut frames = Vec::with_capacity(n_points);
    let mut connections = Vec::with_capacity(n_points);
    for j in 0..n_points {
        if j == root {
            frames.push(Frame::canonical());
            connections.push(Connection::placeholder());
            continue;
        }
        let member_frames: Vec<Frame> = members.iter().map(|m| m.frames[j]).collect();
        let fm = FrameMeanConfig {
            direction_mean: cfg.direction_mean,
            ..cfg.frame
        };
        frames.push(frame_mean(&member_frames, &fm)?);
        let dirs: Vec<UnitVec3> = members.iter().map(|m| m.connections[j].dir).collect();
        let lens: Vec<f64> = members.iter().map(|m| m.connections[j].len).collect();
        let dir = direction_mean(&dirs, cfg.direction_mean)?;
        warn_if_spread(&dirs, &dir, "connection", j);
        connections.push(Connection {
            dir,
            len: length_mean(&lens, cfg.length_mean),
        });
    }

    let mut mean = LpDsRep {
        grid: template.grid.clone(),
        hierarchy: template.hierarchy.clone(),
        spokes,
        frames,
        connections,
        scaled: true,
        lp_size: 1.0,
    };
    let sum = lp_size(&mean);
    let renormalized = matches!(cfg.length_mean, LengthMean::Geometric) || (sum - 1.0).abs() > 1e-12;
    if renormalized {
        for s in &mut mean.spokes {
            s.len /= sum;
        }
        for c in &mut mean.connections {
            c.len /= sum;
        }
    }
    let sizes: Vec<f64> = members.iter().map(|m| m.lp_size).collect();
    mean.lp_size = length_mean(&sizes, cfg.length_mean);
    mean.validate()?;
    Ok(MeanOutcome {
        mean,
        renormalized,
        renorm_factor: sum,
    })
}

fn warn_if_spread(dirs: &[UnitVec3], mean: &UnitVec3, what: &str, index: usize) {
    let max = dirs
        .iter()
        .map(|d| geodesic_dist(d, mean))
        .fold(0.0, f64::max);
    if max > std::f64::consts::FRAC_PI_4 {
        log::warn!(
            "{what} {index}: directional spread {max:.3} rad exceeds pi/4; the mean may not be unique"
        );
    }
}

/// Generalized Procrustes alignment result. Aligned configurations are
/// produced by x ↦ scale · R (x − centroid) per member.
#[derive(Debug, Clone)]
pub struct GpaResult {
    pub aligned: Vec<Vec<Vector3<f64>>>,
    pub rotations: Vec<Matrix3<f64>>,
    pub scales: Vec<f64>,
    pub centroids: Vec<Vector3<f64>>,
    /// Σᵢ ‖Xᵢ − mean‖² after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Iterative GPA: center (and optionally normalize to unit centroid size),
/// then repeatedly rotate every configuration onto the current mean by the
/// proper orthogonal Procrustes solution until the mean stabilizes.
pub fn gpa_align(
    configs: &[Vec<Vector3<f64>>],
    with_scaling: bool,
) -> Result<Vec<Vec<Vector3<f64>>>> {
    gpa_align_full(configs, with_scaling).map(|r| r.aligned)
}

pub fn gpa_align_full(configs: &[Vec<Vector3<f64>>], with_scaling: bool) -> Result<GpaResult> {
    if configs.len() < 2 {
        return Err(Error::validation(
            "GPA needs at least two configurations".to_string(),
        ));
    }
    let n_pts = configs[0].len();
    if configs.iter().any(|c| c.len() != n_pts) || n_pts < 2 {
        return Err(Error::validation(
            "GPA configurations must share a common nontrivial size".to_string(),
        ));
    }

    let mut centroids = Vec::with_capacity(configs.len());
    let mut scales = vec![1.0; configs.len()];
    let mut work: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let centroid: Vector3<f64> = cfg.iter().sum::<Vector3<f64>>() / n_pts as f64;
        let mut pts: Vec<Vector3<f64>> = cfg.iter().map(|p| p - centroid).collect();
        let size = pts.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
        if size < 1e-12 {
            return Err(Error::numerical(format!(
                "degenerate configuration {i} in GPA"
            )));
        }
        if with_scaling {
            let s = 1.0 / size;
            for p in &mut pts {
                *p *= s;
            }
            scales[i] = s;
        }
        centroids.push(centroid);
        work.push(pts);
    }

    let mut rotations = vec![Matrix3::identity(); configs.len()];
    let mean_of = |w: &[Vec<Vector3<f64>>]| -> Vec<Vector3<f64>> {
        (0..n_pts)
            .map(|j| w.iter().map(|c| c[j]).sum::<Vector3<f64>>() / w.len() as f64)
            .collect()
    };
    let objective = |w: &[Vec<Vector3<f64>>], m: &[Vector3<f64>]| -> f64 {
        w.iter()
            .map(|c| {
                c.iter()
                    .zip(m)
                    .map(|(p, q)| (p - q).norm_squared())
                    .sum::<f64>()
            })
            .sum()
    };

    let mut mean = mean_of(&work);
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        for (i, cfgv) in work.iter_mut().enumerate() {
            let r = procrustes_rotation(cfgv, &mean);
            for p in cfgv.iter_mut() {
                *p = r * *p;
            }
            rotations[i] = r * rotations[i];
        }
        let new_mean = mean_of(&work);
        trace.push(objective(&work, &new_mean));
        let shift: f64 = new_mean
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        mean = new_mean;
        if shift < 1e-10 {
            break;
        }
    }

    Ok(GpaResult {
        aligned: work,
        rotations,
        scales,
        centroids,
        objective_trace: trace,
        iterations,
    })
}

/// Proper rotation minimizing Σⱼ ‖R aⱼ − mⱼ‖² (SVD with determinant
/// correction on the weakest singular direction).
pub fn procrustes_rotation(points: &[Vector3<f64>], target: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut k = Matrix3::zeros();
    for (a, m) in points.iter().zip(target) {
        k += a * m.transpose();
    }
    let svd = nalgebra::SVD::new(k, true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let mut min_i = 0;
        for i in 1..3 {
            if svd.singular_values[i] < svd.singular_values[min_i] {
                min_i = i;
            }
        }
        d[(min_i, min_i)] = -1.0;
    }
    v * d * u.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::rotation_about;
    use approx::assert_abs_diff_eq;

    #[test]
    fn initial_frame_orthogonal_inputs_are_fixed_points() {
        let f = initial_frame(
            &UnitVec3::z_axis(),
            &UnitVec3::x_axis(),
            &UnitVec3::y_axis(),
            InitStrategy::Geodesic,
        )
        .unwrap();
        assert!(f.max_axis_angle_to(&Frame::canonical()) < 1e-12);

        let f = initial_frame(
            &UnitVec3::z_axis(),
            &UnitVec3::x_axis(),
            &UnitVec3::y_axis(),
            InitStrategy::Centroid,
        )
        .unwrap();
        assert!(f.max_axis_angle_to(&Frame::canonical()) < 1e-12);
    }

    #[test]
    fn initial_frame_geodesic_splits_the_defect() {
        // n̄ = e₃, b̄ at colatitude 80° in the xz-plane: the initial frame is
        // exactly orthogonal with both axes 5° from their targets
        let n_mean = UnitVec3::z_axis();
        let col = 80f64.to_radians();
        let b_mean = UnitVec3::from_components(col.sin(), 0.0, col.cos()).unwrap();
        let bp = UnitVec3::new(n_mean.cross(&b_mean)).unwrap();
        let f = initial_frame(&n_mean, &b_mean, &bp, InitStrategy::Geodesic).unwrap();
        assert_abs_diff_eq!(
            geodesic_dist(f.n(), f.b()),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
        let five = 5f64.to_radians();
        assert_abs_diff_eq!(geodesic_dist(f.n(), &n_mean), five, epsilon = 1e-9);
        assert_abs_diff_eq!(geodesic_dist(f.b(), &b_mean), five, epsilon = 1e-9);
    }

    #[test]
    fn initial_frame_rejects_degenerate_axes() {
        let n = UnitVec3::z_axis();
        assert!(initial_frame(&n, &n, &UnitVec3::x_axis(), InitStrategy::Geodesic).is_err());
        assert!(
            initial_frame(&n, &n.neg(), &UnitVec3::x_axis(), InitStrategy::Geodesic).is_err()
        );
    }

    #[test]
    fn frame_mean_of_identical_frames_is_that_frame() {
        let base = Frame::canonical()
            .rotated(&rotation_about(&UnitVec3::from_components(0.3, 0.5, 1.0).unwrap(), 0.7));
        let frames = vec![base; 5];
        let mean = frame_mean(&frames, &FrameMeanConfig::default()).unwrap();
        assert!(mean.max_axis_angle_to(&base) < 1e-9);
    }

    #[test]
    fn frame_mean_of_symmetric_pair_bisects() {
        let theta = 0.3;
        let spin = |a: f64| Frame::canonical().rotated(&rotation_about(&UnitVec3::z_axis(), a));
        let frames = vec![spin(theta), spin(-theta)];
        let mean = frame_mean(&frames, &FrameMeanConfig::default()).unwrap();
        assert!(geodesic_dist(mean.n(), &UnitVec3::z_axis()) < 1e-6);
        assert!(geodesic_dist(mean.b(), &UnitVec3::x_axis()) < 1e-6);
    }

    #[test]
    fn frame_alignment_trace_is_monotone() {
        let targets = [
            UnitVec3::from_components(0.1, 0.0, 1.0).unwrap(),
            UnitVec3::from_components(1.0, 0.1, -0.05).unwrap(),
            UnitVec3::from_components(-0.1, 1.0, 0.0).unwrap(),
        ];
        let (frame, trace) =
            align_frame_to_targets(Frame::canonical(), &targets, &FrameMeanConfig::default())
                .unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "objective increased: {w:?}");
        }
        assert!(frame.validate().is_ok());
        assert!(frame_objective(&frame, &targets) <= trace[0]);
    }

    #[test]
    fn gpa_recovers_pure_rotation() {
        let shape: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.3, 0.4, 1.5),
        ];
        let r = rotation_about(&UnitVec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let rotated: Vec<Vector3<f64>> = shape.iter().map(|p| r * p).collect();
        let aligned = gpa_align(&[shape, rotated], false).unwrap();
        for (a, b) in aligned[0].iter().zip(&aligned[1]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn gpa_translation_only_reduces_to_centering() {
        let shape: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.3, 0.4, 1.5),
        ];
        let shifted: Vec<Vector3<f64>> =
            shape.iter().map(|p| p + Vector3::new(5.0, -3.0, 2.0)).collect();
        let res = gpa_align_full(&[shape.clone(), shifted], false).unwrap();
        let centroid: Vector3<f64> = shape.iter().sum::<Vector3<f64>>() / shape.len() as f64;
        for (a, orig) in res.aligned[0].iter().zip(&shape) {
            assert!((a - (orig - centroid)).norm() < 1e-9);
        }
        for (a, b) in res.aligned[0].iter().zip(&res.aligned[1]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn gpa_objective_never_increases() {
        // three noisy copies of a tetrahedron under different rotations
        let base: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.1),
            Vector3::new(0.0, 1.0, -0.2),
            Vector3::new(0.2, 0.4, 1.0),
            Vector3::new(-0.5, 0.9, 0.3),
        ];
        let mut configs = Vec::new();
        for k in 0..3 {
            let axis = UnitVec3::from_components(0.2 + k as f64, 1.0, 0.5).unwrap();
            let r = rotation_about(&axis, 0.4 + 0.3 * k as f64);
            let cfg: Vec<Vector3<f64>> = base
                .iter()
                .enumerate()
                .map(|(j, p)| r * (p + Vector3::new(0.0, 0.0, 0.01 * (j * k) as f64)))
                .collect();
            configs.push(cfg);
        }
        let res = gpa_align_full(&configs, true).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective increased: {w:?}");
        }
    }

    #[test]
    fn length_means() {
        assert_abs_diff_eq!(
            length_mean(&[0.01, 0.03], LengthMean::Arithmetic),
            0.02,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            length_mean(&[1.0, 4.0], LengthMean::Geometric),
            2.0,
            epsilon = 1e-12
        );
    }
}
