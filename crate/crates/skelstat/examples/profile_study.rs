use std::time::Instant;
use skelstat::hypothesis::{run_study_lp, StudyOptions};
use skelstat::reparam::gp_to_lp;
use skelstat::simulate::*;
use skelstat::seeding::mix_seed;

fn main() {
    let gp = ellipsoid_template(5, 13, (3.0, 2.0, 1.0), 20).unwrap();
    let lp = gp_to_lp(&gp).unwrap();
    let spine_row = lp.grid.spine_row();
    let targets: Vec<usize> = (0..lp.grid.cols).filter(|&c| c != lp.grid.mid_col())
        .map(|c| lp.grid.grid_index(spine_row, c)).collect();
    let template = rotate_frames(&lp, &DeformSpec {
        target_nodes: targets, axis: DeformAxis::BPerp, angles: Angles::Uniform(0.08),
    }).unwrap();
    let nodes = default_bend_nodes(&template).unwrap();
    let bend_a = GroupBend { nodes: nodes.clone(), axis: DeformAxis::BPerp, mean_angle: 0.0, kappa: Some(100.0) };
    let bend_b = GroupBend { nodes, axis: DeformAxis::BPerp, mean_angle: -std::f64::consts::PI/15.0, kappa: Some(100.0) };

    let t0 = Instant::now();
    let (ga, gb) = build_study(&template, 150, &bend_a, &bend_b, Some(&NoiseSpec::default()), mix_seed(&[555, 0])).unwrap();
    println!("build_study: {:?}", t0.elapsed());

    for b in [100usize, 2000, 10_000] {
        let t = Instant::now();
        let report = run_study_lp(&ga, &gb, &StudyOptions { b, seed: 1, ..StudyOptions::default() }).unwrap();
        println!("run_study_lp B={b}: {:?} (K={})", t.elapsed(), report.k);
    }
}
