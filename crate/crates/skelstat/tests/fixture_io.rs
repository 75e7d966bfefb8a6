//! End-to-end dsrep-json behavior on realistic fixtures: byte-identical
//! round trips, schema validation, and the documented error messages.

use skelstat::dsrep::{lp_size, scale_lp};
use skelstat::io::{gp_from_json, gp_to_json, lp_from_json, lp_to_json};
use skelstat::reparam::gp_to_lp;
use skelstat::simulate::{ellipsoid_template, ellipsoid_template_with_fold_points, perturb_lp, NoiseSpec};

#[test]
fn gp_roundtrip_is_byte_identical() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let bytes = gp_to_json(&gp).unwrap();
    let loaded = gp_from_json(&bytes).unwrap();
    assert_eq!(loaded.n_points(), 45);
    assert_eq!(loaded.n_spokes(), 2 * 45 + 20);
    let again = gp_to_json(&loaded).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn lp_roundtrip_is_byte_identical_for_study_template() {
    let gp = ellipsoid_template(5, 13, (3.0, 2.0, 1.0), 20).unwrap();
    let lp = perturb_lp(&gp_to_lp(&gp).unwrap(), &NoiseSpec::default(), 8).unwrap();
    let bytes = lp_to_json(&lp).unwrap();
    let loaded = lp_from_json(&bytes).unwrap();
    let again = lp_to_json(&loaded).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(&loaded, &lp);
}

#[test]
fn scaled_lp_roundtrip_validates_unit_sum() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let lp = scale_lp(&gp_to_lp(&gp).unwrap());
    let bytes = lp_to_json(&lp).unwrap();
    let loaded = lp_from_json(&bytes).unwrap();
    assert!((lp_size(&loaded) - 1.0).abs() < 1e-12);

    // corrupt one length: the unit-sum invariant must reject the file
    let text = String::from_utf8(bytes).unwrap();
    let corrupted = text.replacen("\"scaled\":true", "\"scaled\":true", 1);
    assert_eq!(text, corrupted); // marker still present
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let len = doc["spokes"][0]["len"].as_f64().unwrap();
    doc["spokes"][0]["len"] = serde_json::json!(len * 2.0);
    let err = lp_from_json(serde_json::to_string(&doc).unwrap().as_bytes()).unwrap_err();
    assert!(err.to_string().contains("unit length sum"), "{err}");
}

#[test]
fn fold_point_fixture_roundtrips() {
    let gp = ellipsoid_template_with_fold_points(3, 17, (3.0, 2.0, 1.0), 20).unwrap();
    let bytes = gp_to_json(&gp).unwrap();
    let loaded = gp_from_json(&bytes).unwrap();
    assert_eq!(loaded.n_points(), 71);
    assert_eq!(gp_to_json(&loaded).unwrap(), bytes);

    let lp = gp_to_lp(&loaded).unwrap();
    let lp_bytes = lp_to_json(&lp).unwrap();
    assert_eq!(lp_to_json(&lp_from_json(&lp_bytes).unwrap()).unwrap(), lp_bytes);
}

#[test]
fn zero_length_spoke_is_rejected() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let text = String::from_utf8(gp_to_json(&gp).unwrap()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["spokes"][3]["len"] = serde_json::json!(0.0);
    let err = gp_from_json(serde_json::to_string(&doc).unwrap().as_bytes()).unwrap_err();
    assert!(err.to_string().contains("non-positive spoke length"), "{err}");
}

#[test]
fn slightly_off_unit_direction_is_renormalized() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let text = String::from_utf8(gp_to_json(&gp).unwrap()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let dir = doc["spokes"][0]["dir"].clone();
    let scaled: Vec<f64> = dir
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap() * (1.0 + 1e-7))
        .collect();
    doc["spokes"][0]["dir"] = serde_json::json!(scaled);
    let loaded = gp_from_json(serde_json::to_string(&doc).unwrap().as_bytes()).unwrap();
    let norm = loaded.spokes[0].dir.as_vector().norm();
    assert!((norm - 1.0).abs() < 1e-14);

    // far off unit: rejected
    let bad: Vec<f64> = dir
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap() * 1.2)
        .collect();
    doc["spokes"][0]["dir"] = serde_json::json!(bad);
    assert!(gp_from_json(serde_json::to_string(&doc).unwrap().as_bytes()).is_err());
}

#[test]
fn hierarchy_cycle_is_rejected() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let lp = gp_to_lp(&gp).unwrap();
    let text = String::from_utf8(lp_to_json(&lp).unwrap()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    // point two non-root nodes at each other
    let root = lp.hierarchy.root();
    let (a, b) = if root > 1 { (0, 1) } else { (2, 3) };
    doc["hierarchy"]["parent"][a] = serde_json::json!(b);
    doc["hierarchy"]["parent"][b] = serde_json::json!(a);
    let err = lp_from_json(serde_json::to_string(&doc).unwrap().as_bytes()).unwrap_err();
    assert!(err.to_string().contains("not a tree"), "{err}");
}

#[test]
fn numbers_use_17_significant_digits() {
    let gp = ellipsoid_template(5, 9, (3.0, 2.0, 1.0), 20).unwrap();
    let text = String::from_utf8(gp_to_json(&gp).unwrap()).unwrap();
    // every float is rendered in scientific notation with 16 fraction digits
    let sample = text
        .split("\"len\":")
        .nth(1)
        .and_then(|s| s.split(&[',', '}'][..]).next())
        .unwrap();
    let frac = sample.split('.').nth(1).unwrap();
    let digits = frac.split('e').next().unwrap();
    assert_eq!(digits.len(), 16, "fraction digits in {sample}");
}
