//! Shape simulation: analytic ellipsoid templates, frame-rotation bending
//! and twisting, von Mises-Fisher and truncated-normal noise, and the
//! two-group bending study generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::dsrep::{lp_size, GpDsRep, GridLayout, LpDsRep, Spoke, SpokeKind};
use crate::error::{Error, Result};
use crate::seeding::mix_seed;
use crate::sphere::{rotation_about, rotation_between, wrap_angle, Frame, UnitVec3};
use crate::stats::LpPopulation;

/// Frame axis a deformation rotates about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformAxis {
    N,
    B,
    BPerp,
}

impl DeformAxis {
    fn index(&self) -> usize {
        match self {
            DeformAxis::N => 0,
            DeformAxis::B => 1,
            DeformAxis::BPerp => 2,
        }
    }
}

/// A frame-rotation deformation: rotate the listed nodes' parent-local
/// frames about one of their own axes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DeformSpec {
    pub target_nodes: Vec<usize>,
    pub axis: DeformAxis,
    /// One angle for all targets, or one per target.
    pub angles: Angles,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angles {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl DeformSpec {
    fn angle_for(&self, pos: usize) -> f64 {
        match &self.angles {
            Angles::Uniform(a) => *a,
            Angles::PerNode(v) => v[pos],
        }
    }

    pub fn validate(&self, lp: &LpDsRep) -> Result<()> {
        let root = lp.hierarchy.root();
        for &n in &self.target_nodes {
            if n >= lp.n_points() {
                return Err(Error::validation(format!("invalid node {n}")));
            }
            if n == root {
                return Err(Error::validation(
                    "the root frame is the reference chart and cannot be deformed".to_string(),
                ));
            }
        }
        let check = |a: f64| -> Result<()> {
            if !(a.abs() < PI) {
                return Err(Error::validation(format!(
                    "deformation angle {a} out of (-pi, pi)"
                )));
            }
            Ok(())
        };
        match &self.angles {
            Angles::Uniform(a) => check(*a)?,
            Angles::PerNode(v) => {
                if v.len() != self.target_nodes.len() {
                    return Err(Error::validation(
                        "per-node angle count differs from target count".to_string(),
                    ));
                }
                for a in v {
                    check(*a)?;
                }
            }
        }
        Ok(())
    }
}

/// Directional and length noise levels for `perturb_lp`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub kappa_frame: f64,
    pub kappa_spoke: f64,
    pub kappa_conn: f64,
    /// Truncated-normal parameters relative to each template length:
    /// sigma = sigma_factor·len, bounds = (lower_factor·len, upper_factor·len).
    pub sigma_factor: f64,
    pub lower_factor: f64,
    pub upper_factor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kappa_frame: 600.0,
            kappa_spoke: 250.0,
            kappa_conn: 5000.0,
            sigma_factor: 0.02,
            lower_factor: 0.5,
            upper_factor: 1.5,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_frame > 0.0 && self.kappa_spoke > 0.0 && self.kappa_conn > 0.0) {
            return Err(Error::validation("concentrations must be positive".to_string()));
        }
        if !(self.sigma_factor > 0.0) {
            return Err(Error::validation("sigma factor must be positive".to_string()));
        }
        if !(self.lower_factor > 0.0 && self.lower_factor < 1.0 && self.upper_factor > 1.0) {
            return Err(Error::validation(
                "length bounds must straddle the template length".to_string(),
            ));
        }
        Ok(())
    }
}

/// Analytic ds-rep of an eccentric ellipsoid with principal radii a > b > c.
///
/// Skeletal points sample the medial disk of the ellipsoid on a rows×cols
/// grid with cosine spacing (strictly inside the fold); up and down spokes
/// are the exact tangent-sphere spokes and mirror images of each other;
/// `crest_count` crest spokes sit on boundary grid nodes, spread evenly
/// along the fold, pointing to the equator of the ellipsoid.
pub fn ellipsoid_template(
    rows: usize,
    cols: usize,
    radii: (f64, f64, f64),
    crest_count: usize,
) -> Result<GpDsRep> {
    let (a, b, c) = radii;
    if !(a > b && b > c && c > 0.0) {
        return Err(Error::validation(format!(
            "ellipsoid radii must satisfy a > b > c > 0, got ({a}, {b}, {c})"
        )));
    }
    if rows < 3 || rows % 2 == 0 || cols < 3 || cols % 2 == 0 {
        return Err(Error::validation(
            "template grid needs odd rows >= 3 and odd cols >= 3".to_string(),
        ));
    }
    if crest_count < 4 || crest_count % 2 != 0 {
        return Err(Error::validation(
            "crest count must be even and at least 4".to_string(),
        ));
    }
    let cycle_len = 2 * (rows + cols) - 4;
    if crest_count > cycle_len {
        return Err(Error::validation(format!(
            "crest count {crest_count} exceeds the {cycle_len} boundary nodes"
        )));
    }

    // medial disk semi-axes
    let m_a = (a * a - c * c) / a;
    let m_b = (b * b - c * c) / b;

    let mut points = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for col in 0..cols {
            let s = -(PI * (col as f64 + 0.5) / cols as f64).cos();
            let x = m_a * s;
            let h = m_b * (1.0 - s * s).sqrt();
            let w = -(PI * (r as f64 + 0.5) / rows as f64).cos();
            points.push(Vector3::new(x, h * w, 0.0));
        }
    }

    // boundary preimage on the ellipsoid: the contact point of the maximal
    // inscribed sphere centered at (px, py, 0)
    let preimage = |p: &Vector3<f64>| -> (f64, f64) {
        (p.x * a * a / (a * a - c * c), p.y * b * b / (b * b - c * c))
    };

    let mut spokes = Vec::new();
    for (idx, p) in points.iter().enumerate() {
        let (x_c, y_c) = preimage(p);
        let inside = 1.0 - x_c * x_c / (a * a) - y_c * y_c / (b * b);
        debug_assert!(inside > 0.0, "grid point outside the medial disk");
        let z_c = c * inside.sqrt();
        for (kind, sign) in [(SpokeKind::Up, 1.0), (SpokeKind::Down, -1.0)] {
            let tip = Vector3::new(x_c, y_c, sign * z_c);
            let delta = tip - p;
            spokes.push(Spoke {
                tail: idx,
                kind,
                dir: UnitVec3::new(delta)?,
                len: delta.norm(),
            });
        }
    }

    // crest spokes on evenly spread boundary nodes, pointing at the equator
    let mut crest_order = Vec::with_capacity(crest_count);
    {
        let grid_probe = GridLayout::new(rows, cols, [None, None], vec![])?;
        let cycle = grid_probe.boundary_cycle();
        for k in 0..crest_count {
            let node = cycle[(k * cycle.len()) / crest_count];
            crest_order.push(node);
            let p = &points[node];
            let (x_c, y_c) = preimage(p);
            let scale = 1.0 / (x_c * x_c / (a * a) + y_c * y_c / (b * b)).sqrt();
            let tip = Vector3::new(scale * x_c, scale * y_c, 0.0);
            let delta = tip - p;
            spokes.push(Spoke {
                tail: node,
                kind: SpokeKind::Crest,
                dir: UnitVec3::new(delta)?,
                len: delta.norm(),
            });
        }
    }

    let grid = GridLayout::new(rows, cols, [None, None], crest_order)?;
    GpDsRep::new(grid, points, spokes)
}

/// Variant of `ellipsoid_template` with dedicated fold points: crest tails
/// sit on the fold curve itself (appended after the grid block), each
/// parented to its associated boundary node, and the two fold points on the
/// major axis are designated as the spine extensions.
pub fn ellipsoid_template_with_fold_points(
    rows: usize,
    cols: usize,
    radii: (f64, f64, f64),
    crest_count: usize,
) -> Result<GpDsRep> {
    let base = ellipsoid_template(rows, cols, radii, crest_count)?;
    let (a, b, c) = radii;
    let n_grid = rows * cols;
    let grid_probe = GridLayout::new(rows, cols, [None, None], vec![])?;
    let cycle = grid_probe.boundary_cycle();

    let mut points = base.skeletal_points.clone();
    let mut spokes: Vec<Spoke> = base
        .spokes
        .iter()
        .filter(|s| s.kind != SpokeKind::Crest)
        .copied()
        .collect();

    let preimage = |p: &Vector3<f64>| -> (f64, f64) {
        (p.x * a * a / (a * a - c * c), p.y * b * b / (b * b - c * c))
    };

    let mut crest_order = Vec::with_capacity(crest_count);
    let mut extensions = [None, None];
    for k in 0..crest_count {
        let boundary_node = cycle[(k * cycle.len()) / crest_count];
        let p = &points[boundary_node];
        let (x_c, y_c) = preimage(p);
        let scale = 1.0 / (x_c * x_c / (a * a) + y_c * y_c / (b * b)).sqrt();
        let (ex, ey) = (scale * x_c, scale * y_c);
        // fold point: medial image of the equator point
        let fold = Vector3::new(ex * (a * a - c * c) / (a * a), ey * (b * b - c * c) / (b * b), 0.0);
        let tip = Vector3::new(ex, ey, 0.0);
        let idx = points.len();
        points.push(fold);
        crest_order.push(idx);
        let delta = tip - fold;
        spokes.push(Spoke {
            tail: idx,
            kind: SpokeKind::Crest,
            dir: UnitVec3::new(delta)?,
            len: delta.norm(),
        });
        if boundary_node == cycle[0] {
            extensions[0] = Some(idx);
        }
        if boundary_node == cycle[cycle.len() / 2] {
            extensions[1] = Some(idx);
        }
    }
    debug_assert_eq!(n_grid + crest_count, points.len());

    let grid = GridLayout::new(rows, cols, extensions, crest_order)?;
    GpDsRep::new(grid, points, spokes)
}

/// Rotate the targeted nodes' parent-local frames about one of their own
/// axes. Untouched properties are preserved bit for bit; rotating about an
/// axis leaves that axis itself in place.
pub fn rotate_frames(lp: &LpDsRep, spec: &DeformSpec) -> Result<LpDsRep> {
    spec.validate(lp)?;
    let mut out = lp.clone();
    for (pos, &node) in spec.target_nodes.iter().enumerate() {
        let angle = spec.angle_for(pos);
        if angle == 0.0 {
            continue;
        }
        let frame = out.frames[node];
        let axis = *frame.axis(spec.axis.index());
        let rot = rotation_about(&axis, angle);
        out.frames[node] = frame.rotated(&rot);
    }
    Ok(out)
}

/// One vMF(μ, κ) draw on S² via inverse-CDF sampling of the colatitude
/// cosine plus a uniform longitude, rotated from the pole to μ. Consumes
/// exactly two uniforms.
fn vmf_s2_draw(rng: &mut ChaCha8Rng, mu: &UnitVec3, kappa: f64) -> UnitVec3 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let w = if kappa > 350.0 {
        // exp(-2κ) underflows; the conditional distribution collapses
        1.0 + u.ln() / kappa
    } else {
        1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa
    }
    .clamp(-1.0, 1.0);
    let phi = rng.random::<f64>() * 2.0 * PI;
    let s = (1.0 - w * w).max(0.0).sqrt();
    let local = Vector3::new(s * phi.cos(), s * phi.sin(), w);
    let rot = match rotation_between(&UnitVec3::z_axis(), mu) {
        Ok(r) => r,
        // μ = −e₃: any half-turn through the equator works; fix one
        Err(_) => rotation_about(&UnitVec3::x_axis(), PI),
    };
    UnitVec3::new(rot * local).expect("unit by construction")
}

/// One von Mises(0, κ) draw on the circle (Best-Fisher rejection sampling;
/// above κ = 10⁶ the wrapped-normal limit N(0, 1/κ) is sampled by inverse
/// CDF instead, where the rejection arithmetic loses precision).
fn vm_circle_draw(rng: &mut ChaCha8Rng, kappa: f64) -> f64 {
    if kappa < 1e-9 {
        return rng.random::<f64>() * 2.0 * PI - PI;
    }
    if kappa > 1e6 {
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        let u: f64 = rng.random::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
        return std.inverse_cdf(u) / kappa.sqrt();
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let theta = if u3 > 0.5 { f.acos() } else { -(f.acos()) };
            return theta;
        }
    }
}

/// Seeded vMF(μ, κ) sample on S².
pub fn sample_vmf_s2(mu: &UnitVec3, kappa: f64, n: usize, seed: u64) -> Vec<UnitVec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vmf_s2_draw(&mut rng, mu, kappa)).collect()
}

/// Seeded von Mises(μ, κ) sample on the circle, in radians wrapped to
/// (−π, π].
pub fn sample_vmf_circle(mu: f64, kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| wrap_angle(mu + vm_circle_draw(&mut rng, kappa)))
        .collect()
}

fn trunc_normal_draw(rng: &mut ChaCha8Rng, mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let pa = std.cdf((a - mu) / sigma);
    let pb = std.cdf((b - mu) / sigma);
    let u: f64 = rng.random();
    let x = mu + sigma * std.inverse_cdf(pa + u * (pb - pa));
    x.clamp(a, b)
}

/// Seeded truncated-normal sample on [a, b] via inverse-CDF sampling.
pub fn sample_trunc_normal(
    mu: f64,
    sigma: f64,
    a: f64,
    b: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(a < mu && mu < b) || !(sigma > 0.0) {
        return Err(Error::validation(format!(
            "empty or invalid truncation interval: mu {mu}, sigma {sigma}, bounds ({a}, {b})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| trunc_normal_draw(&mut rng, mu, sigma, a, b))
        .collect())
}

/// Add directional and length noise to an unscaled LP rep: spoke and
/// connection directions get one vMF draw each; every frame is tilted by a
/// vMF draw about its normal and spun in-plane by a circular vMF draw, which
/// keeps it exactly orthonormal; lengths follow truncated normals around the
/// template values. The root frame and connection stay fixed.
pub fn perturb_lp(lp: &LpDsRep, noise: &NoiseSpec, seed: u64) -> Result<LpDsRep> {
    if lp.scaled {
        return Err(Error::validation(
            "perturb_lp expects an unscaled representation".to_string(),
        ));
    }
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = lp.clone();
    let root = lp.hierarchy.root();

    for s in &mut out.spokes {
        s.dir = vmf_s2_draw(&mut rng, &s.dir, noise.kappa_spoke);
        s.len = trunc_normal_draw(
            &mut rng,
            s.len,
            noise.sigma_factor * s.len,
            noise.lower_factor * s.len,
            noise.upper_factor * s.len,
        );
    }
    for j in 0..out.n_points() {
        if j == root {
            continue;
        }
        let c = &mut out.connections[j];
        c.dir = vmf_s2_draw(&mut rng, &c.dir, noise.kappa_conn);
        c.len = trunc_normal_draw(
            &mut rng,
            c.len,
            noise.sigma_factor * c.len,
            noise.lower_factor * c.len,
            noise.upper_factor * c.len,
        );

        let frame = out.frames[j];
        let n_new = vmf_s2_draw(&mut rng, frame.n(), noise.kappa_frame);
        let tilt = match rotation_between(frame.n(), &n_new) {
            Ok(r) => r,
            Err(_) => rotation_about(frame.b(), PI),
        };
        let tilted = frame.rotated(&tilt);
        let spin = vm_circle_draw(&mut rng, noise.kappa_frame);
        let spun = tilted.rotated(&rotation_about(tilted.n(), spin));
        // re-derive b⊥ from n × b to keep the invariants tight
        out.frames[j] = Frame::from_n_b(*spun.n(), *spun.b())?;
    }

    out.lp_size = lp_size(&out);
    Ok(out)
}

/// Cluster concentrated around a small circle: colatitudes follow a von
/// Mises around `colatitude` (reflected into [0, π]), longitudes an
/// independent von Mises about 0, both relative to `axis`.
pub fn small_circle_cluster(
    axis: &UnitVec3,
    colatitude: f64,
    kappa_radial: f64,
    kappa_angular: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<UnitVec3>> {
    if !(colatitude > 0.0 && colatitude < std::f64::consts::FRAC_PI_2) {
        return Err(Error::validation(
            "colatitude must lie in (0, pi/2)".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = match rotation_between(&UnitVec3::z_axis(), axis) {
        Ok(r) => r,
        Err(_) => rotation_about(&UnitVec3::x_axis(), PI),
    };
    Ok((0..n)
        .map(|_| {
            let mut col = colatitude + vm_circle_draw(&mut rng, kappa_radial);
            col = col.abs();
            if col > PI {
                col = 2.0 * PI - col;
            }
            let phi = vm_circle_draw(&mut rng, kappa_angular);
            let local = Vector3::new(col.sin() * phi.cos(), col.sin() * phi.sin(), col.cos());
            UnitVec3::new(rot * local).expect("unit by construction")
        })
        .collect())
}

/// Bending rule for one group of the simulation study.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GroupBend {
    pub nodes: Vec<usize>,
    pub axis: DeformAxis,
    /// Mean rotation angle per node (radians).
    pub mean_angle: f64,
    /// Concentration of the von Mises draw; None applies the mean exactly.
    pub kappa: Option<f64>,
}

/// The three spinal nodes closest to the s-centroid on the low-column side.
pub fn default_bend_nodes(lp: &LpDsRep) -> Result<Vec<usize>> {
    let grid = &lp.grid;
    let mid = grid.mid_col();
    if mid < 3 {
        return Err(Error::validation(
            "grid too narrow for the default three-node bend".to_string(),
        ));
    }
    Ok((1..=3)
        .map(|k| grid.grid_index(grid.spine_row(), mid - k))
        .collect())
}

/// Generate one group member: draw the bending angle, rotate the bend nodes
/// successively, then add noise.
fn simulate_member(
    template: &LpDsRep,
    bend: &GroupBend,
    noise: Option<&NoiseSpec>,
    member_seed: u64,
) -> Result<LpDsRep> {
    let theta = match bend.kappa {
        None => bend.mean_angle,
        Some(kappa) => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[member_seed, 0]));
            wrap_angle(bend.mean_angle + vm_circle_draw(&mut rng, kappa))
        }
    };
    let spec = DeformSpec {
        target_nodes: bend.nodes.clone(),
        axis: bend.axis,
        angles: Angles::Uniform(theta),
    };
    let bent = rotate_frames(template, &spec)?;
    match noise {
        Some(n) => perturb_lp(&bent, n, mix_seed(&[member_seed, 1])),
        None => Ok(bent),
    }
}

/// Generate the two-group bending study: per member one angle draw from the
/// group's distribution, applied successively to the bend nodes, followed by
/// directional and length noise. Member generation is parallel and
/// scheduling-invariant through per-member derived seeds.
pub fn build_study(
    template: &LpDsRep,
    n_per_group: usize,
    bend_a: &GroupBend,
    bend_b: &GroupBend,
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<(LpPopulation, LpPopulation)> {
    if template.scaled {
        return Err(Error::validation(
            "study template must be unscaled".to_string(),
        ));
    }
    if n_per_group == 0 {
        return Err(Error::validation("empty study groups".to_string()));
    }
    let gen_group = |bend: &GroupBend, tag: u64| -> Result<LpPopulation> {
        let members = (0..n_per_group)
            .into_par_iter()
            .map(|k| simulate_member(template, bend, noise, mix_seed(&[seed, tag, k as u64])))
            .collect::<Result<Vec<_>>>()?;
        LpPopulation::new(members)
    };
    Ok((gen_group(bend_a, 1)?, gen_group(bend_b, 2)?))
}
