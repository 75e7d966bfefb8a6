use std::time::Instant;
use skelstat::simulate::sample_vmf_s2;
use skelstat::sphere::*;

fn main() {
    for (kappa, name) in [(250.0, "spoke"), (600.0, "frame"), (5000.0, "conn")] {
        let mu = UnitVec3::from_components(0.3, -0.2, 0.93).unwrap();
        let pts = sample_vmf_s2(&mu, kappa, 300, 9);
        let t = Instant::now();
        let mut fit = None;
        for _ in 0..20 {
            fit = Some(fit_circle(&pts, &CircleFitConfig::default()).unwrap());
        }
        let f = fit.unwrap();
        println!("{name} kappa={kappa}: {:?}/fit, r={:.4}, great={}", t.elapsed()/20, f.radius_angle, f.is_great);
        let t = Instant::now();
        for _ in 0..20 { let _ = euclideanize_pns(&pts).unwrap(); }
        println!("  euclideanize: {:?}", t.elapsed()/20);
    }
}
