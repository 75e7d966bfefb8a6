//! Oracles for the population statistics: term-by-term distance summation,
//! random-search frame means, re-implemented Fréchet means, and GPA
//! baselines.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use nalgebra::Vector3;
use skelstat::dsrep::scale_lp;
use skelstat::reparam::gp_to_lp;
use skelstat::simulate::{ellipsoid_template, perturb_lp, NoiseSpec};
use skelstat::sphere::{geodesic_dist, rotation_about, Frame, UnitVec3};
use skelstat::stats::{
    frame_mean_detailed, frame_objective, gpa_align_full, lp_distance, mean_lp, procrustes_rotation,
    DirectionMean, FrameMeanConfig, LengthMean, LpPopulation, MeanConfig,
};

fn scaled_member(seed: u64) -> skelstat::dsrep::LpDsRep {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let lp = gp_to_lp(&gp).unwrap();
    scale_lp(&perturb_lp(&lp, &NoiseSpec::default(), seed).unwrap())
}

#[test]
fn lp_distance_matches_termwise_oracle() {
    let a = scaled_member(1);
    let b = scaled_member(2);
    let d = lp_distance(&a, &b, false).unwrap();

    // oracle: sum every term directly with the arccos formula
    let angle = |u: &UnitVec3, v: &UnitVec3| u.dot(v).clamp(-1.0, 1.0).acos();
    let mut sum = 0.0;
    for (sa, sb) in a.spokes.iter().zip(&b.spokes) {
        sum += angle(&sa.dir, &sb.dir).powi(2) + (sa.len - sb.len).powi(2);
    }
    let root = a.hierarchy.root();
    for j in 0..a.n_points() {
        sum += angle(a.frames[j].n(), b.frames[j].n()).powi(2);
        sum += angle(a.frames[j].b(), b.frames[j].b()).powi(2);
        sum += angle(a.frames[j].b_perp(), b.frames[j].b_perp()).powi(2);
        if j != root {
            sum += angle(&a.connections[j].dir, &b.connections[j].dir).powi(2);
            sum += (a.connections[j].len - b.connections[j].len).powi(2);
        }
    }
    assert!((d - sum.sqrt()).abs() < 1e-12, "{d} vs {}", sum.sqrt());

    // commensuration multiplies length terms by pi
    let dc = lp_distance(&a, &b, true).unwrap();
    assert!(dc >= d);
}

#[test]
fn lp_distance_identity_and_single_term() {
    let a = scaled_member(3);
    assert_eq!(lp_distance(&a, &a, false).unwrap(), 0.0);

    // rotate exactly one spoke direction by 0.2 rad
    let mut b = a.clone();
    let axis = UnitVec3::new(b.spokes[7].dir.cross(&UnitVec3::z_axis())).unwrap();
    b.spokes[7].dir = b.spokes[7].dir.rotated(&rotation_about(&axis, 0.2));
    let d = lp_distance(&a, &b, false).unwrap();
    assert!((d - 0.2).abs() < 1e-9, "single-term distance {d}");
}

#[test]
fn lp_distance_metric_axioms() {
    let a = scaled_member(10);
    let b = scaled_member(11);
    let c = scaled_member(12);
    let dab = lp_distance(&a, &b, false).unwrap();
    let dba = lp_distance(&b, &a, false).unwrap();
    assert_eq!(dab, dba);
    let dac = lp_distance(&a, &c, false).unwrap();
    let dcb = lp_distance(&c, &b, false).unwrap();
    assert!(dab <= dac + dcb + 1e-9);
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    // uniform SO(3) via a normalized quaternion of Box-Muller gaussians
    let mut gauss = || {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let (w, x, y, z) = (gauss(), gauss(), gauss(), gauss());
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let q = nalgebra::Quaternion::new(w / n, x / n, y / n, z / n);
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

fn vmf_frame_cluster(base: &Frame, kappa: f64, n: usize, seed: u64) -> Vec<Frame> {
    // tilt the base normal by a vMF draw, then spin in plane
    let mut frames = Vec::with_capacity(n);
    let tilts = skelstat::simulate::sample_vmf_s2(base.n(), kappa, n, seed);
    let spins = skelstat::simulate::sample_vmf_circle(0.0, kappa, n, seed ^ 0xabcd);
    for i in 0..n {
        let r1 = skelstat::sphere::rotation_between(base.n(), &tilts[i]).unwrap();
        let tilted = base.rotated(&r1);
        let spun = tilted.rotated(&rotation_about(tilted.n(), spins[i]));
        frames.push(spun);
    }
    frames
}

#[test]
fn frame_mean_beats_random_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for cluster in 0..3 {
        let base = Frame::canonical().rotated(&random_rotation(&mut rng));
        let frames = vmf_frame_cluster(&base, 600.0, 50, 1000 + cluster);
        let outcome = frame_mean_detailed(&frames, &FrameMeanConfig::default()).unwrap();
        outcome.frame.validate().unwrap();
        for w in outcome.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let cand = Frame::canonical().rotated(&random_rotation(&mut rng));
            best = best.min(frame_objective(&cand, &outcome.targets));
        }
        assert!(
            outcome.objective <= best,
            "cluster {cluster}: aligned {} vs random best {best}",
            outcome.objective
        );
    }
}

#[test]
fn frame_mean_is_rotation_equivariant() {
    let base = Frame::canonical().rotated(&rotation_about(
        &UnitVec3::from_components(0.4, 0.1, 0.9).unwrap(),
        0.6,
    ));
    let frames = vmf_frame_cluster(&base, 600.0, 40, 51);
    let mean = skelstat::stats::frame_mean(&frames, &FrameMeanConfig::default()).unwrap();
    let r0 = rotation_about(&UnitVec3::from_components(1.0, -0.3, 0.2).unwrap(), 1.2);
    let rotated: Vec<Frame> = frames.iter().map(|f| f.rotated(&r0)).collect();
    let mean_rot = skelstat::stats::frame_mean(&rotated, &FrameMeanConfig::default()).unwrap();
    assert!(mean_rot.max_axis_angle_to(&mean.rotated(&r0)) < 1e-6);
}

/// Independent re-implementation of the spherical Fréchet mean
/// (simple projected-average fixed point).
fn oracle_frechet(points: &[UnitVec3]) -> UnitVec3 {
    let mut m = points[0];
    for _ in 0..2000 {
        let mut acc = Vector3::zeros();
        for p in points {
            let cos_t = m.dot(p).clamp(-1.0, 1.0);
            let theta = cos_t.acos();
            let raw = p.as_vector() - m.as_vector() * cos_t;
            let n = raw.norm();
            if n > 1e-14 {
                acc += raw * (theta / n);
            }
        }
        acc /= points.len() as f64;
        let step = acc.norm();
        if step < 1e-14 {
            break;
        }
        let v = m.as_vector() * step.cos() + (acc / step) * step.sin();
        m = UnitVec3::new(v).unwrap();
    }
    m
}

#[test]
fn mean_lp_direction_gops_match_oracle_means() {
    let members: Vec<_> = (0..150).map(|k| scaled_member(500 + k)).collect();
    let pop = LpPopulation::new(members.clone()).unwrap();
    let cfg = MeanConfig {
        direction_mean: DirectionMean::Frechet,
        length_mean: LengthMean::Arithmetic,
        ..MeanConfig::default()
    };
    let mean = mean_lp(&pop, &cfg).unwrap().mean;

    for i in (0..members[0].spokes.len()).step_by(13) {
        let dirs: Vec<UnitVec3> = members.iter().map(|m| m.spokes[i].dir).collect();
        let oracle = oracle_frechet(&dirs);
        assert!(
            geodesic_dist(&oracle, &mean.spokes[i].dir) < 1e-6,
            "spoke {i}"
        );
    }
    for j in (0..members[0].n_points()).step_by(7) {
        if j == members[0].hierarchy.root() {
            continue;
        }
        let dirs: Vec<UnitVec3> = members.iter().map(|m| m.connections[j].dir).collect();
        let oracle = oracle_frechet(&dirs);
        assert!(
            geodesic_dist(&oracle, &mean.connections[j].dir) < 1e-6,
            "connection {j}"
        );
    }
}

#[test]
fn mean_lp_arithmetic_keeps_unit_size() {
    let members: Vec<_> = (0..40).map(|k| scaled_member(900 + k)).collect();
    let pop = LpPopulation::new(members).unwrap();
    let cfg = MeanConfig {
        length_mean: LengthMean::Arithmetic,
        ..MeanConfig::default()
    };
    let out = mean_lp(&pop, &cfg).unwrap();
    assert!((skelstat::dsrep::lp_size(&out.mean) - 1.0).abs() < 1e-12);

    let geo = mean_lp(&pop, &MeanConfig::default()).unwrap();
    assert!(geo.renormalized);
    assert!((skelstat::dsrep::lp_size(&geo.mean) - 1.0).abs() < 1e-12);
}

#[test]
fn mean_lp_of_singleton_is_the_member() {
    let m = scaled_member(77);
    let pop = LpPopulation::new(vec![m.clone()]).unwrap();
    let out = mean_lp(&pop, &MeanConfig::default()).unwrap().mean;
    for (a, b) in m.spokes.iter().zip(&out.spokes) {
        assert!(geodesic_dist(&a.dir, &b.dir) < 1e-9);
        assert!((a.len - b.len).abs() < 1e-9);
    }
    for j in 0..m.n_points() {
        assert!(m.frames[j].max_axis_angle_to(&out.frames[j]) < 1e-9);
    }
}

#[test]
fn mean_lp_of_identical_members_is_that_member() {
    let m = scaled_member(78);
    let pop = LpPopulation::new(vec![m.clone(); 6]).unwrap();
    let out = mean_lp(&pop, &MeanConfig::default()).unwrap().mean;
    for j in 0..m.n_points() {
        assert!(m.frames[j].max_axis_angle_to(&out.frames[j]) < 1e-9);
        assert!((m.connections[j].len - out.connections[j].len).abs() < 1e-9);
    }
}

fn noisy_configs(n: usize, seed: u64) -> Vec<Vec<Vector3<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vector3<f64>> = (0..12)
        .map(|i| {
            Vector3::new(
                (i % 4) as f64,
                (i / 4) as f64,
                0.3 * ((i * 7) % 5) as f64,
            )
        })
        .collect();
    (0..n)
        .map(|_| {
            let r = random_rotation(&mut rng);
            let t = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 4.0;
            base.iter()
                .map(|p| {
                    r * p
                        + t
                        + Vector3::new(
                            rng.random::<f64>() - 0.5,
                            rng.random::<f64>() - 0.5,
                            rng.random::<f64>() - 0.5,
                        ) * 0.05
                })
                .collect()
        })
        .collect()
}

#[test]
fn gpa_beats_align_to_first_baseline() {
    let configs = noisy_configs(8, 99);
    let res = gpa_align_full(&configs, false).unwrap();
    let gpa_obj = *res.objective_trace.last().unwrap();

    // weaker baseline: center all, rotate each onto the first shape once
    let n_pts = configs[0].len() as f64;
    let centered: Vec<Vec<Vector3<f64>>> = configs
        .iter()
        .map(|c| {
            let cent: Vector3<f64> = c.iter().sum::<Vector3<f64>>() / n_pts;
            c.iter().map(|p| p - cent).collect()
        })
        .collect();
    let target = &centered[0];
    let aligned: Vec<Vec<Vector3<f64>>> = centered
        .iter()
        .map(|c| {
            let r = procrustes_rotation(c, target);
            c.iter().map(|p| r * p).collect()
        })
        .collect();
    let mean: Vec<Vector3<f64>> = (0..target.len())
        .map(|j| aligned.iter().map(|c| c[j]).sum::<Vector3<f64>>() / aligned.len() as f64)
        .collect();
    let baseline_obj: f64 = aligned
        .iter()
        .map(|c| {
            c.iter()
                .zip(&mean)
                .map(|(p, q)| (p - q).norm_squared())
                .sum::<f64>()
        })
        .sum();
    assert!(
        gpa_obj <= baseline_obj + 1e-9,
        "gpa {gpa_obj} vs baseline {baseline_obj}"
    );
}

#[test]
fn gpa_residuals_invariant_to_prerotating_one_input() {
    let configs = noisy_configs(5, 123);
    let res_a = gpa_align_full(&configs, true).unwrap();

    let mut perturbed = configs.clone();
    let r = rotation_about(&UnitVec3::from_components(0.3, 0.8, 0.1).unwrap(), 2.1);
    for p in &mut perturbed[2] {
        *p = r * *p;
    }
    let res_b = gpa_align_full(&perturbed, true).unwrap();

    // pairwise residuals between aligned members agree up to a common motion
    for i in 0..configs.len() {
        for j in (i + 1)..configs.len() {
            let d_a: f64 = res_a.aligned[i]
                .iter()
                .zip(&res_a.aligned[j])
                .map(|(p, q)| (p - q).norm_squared())
                .sum::<f64>()
                .sqrt();
            let d_b: f64 = res_b.aligned[i]
                .iter()
                .zip(&res_b.aligned[j])
                .map(|(p, q)| (p - q).norm_squared())
                .sum::<f64>()
                .sqrt();
            assert!((d_a - d_b).abs() < 1e-8, "pair ({i},{j}): {d_a} vs {d_b}");
        }
    }
}
