//! Conversion between the global and the local parameterization.
//!
//! Going local, every node's frame, connection and spokes are expressed in
//! the chart that aligns the relevant reference frame to the canonical frame
//! (n → e₃ first, then b → e₁ within the equator). Going global, the tree is
//! rebuilt breadth-first from the root by inverting the same alignment.

use nalgebra::{Matrix3, Vector3};

use crate::dsrep::{lp_size, Connection, GpDsRep, LpDsRep, Spoke};
use crate::error::{Error, Result};
use crate::hierarchy::{fit_frames, FittedFrames};
use crate::sphere::{rotation_between, Frame, UnitVec3};

/// Pose assigned to the root during reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct RootPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RootPose {
    fn default() -> Self {
        RootPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// The rotation aligning `frame` to the canonical frame: R₂R₁ with
/// R₁ = R(n, e₃) and R₂ = R(R₁b, e₁). The boolean reports whether b⊥ lands
/// on −e₂, which happens exactly when `frame` is left-handed and triggers the
/// reflection adjustment in `express_in_parent`.
///
/// The two antipodal sub-cases have canonical resolutions because the
/// composed rotation is pinned by the whole frame: n = −e₃ takes the
/// half-turn about e₁ (R₂ compensates for the choice of meridian), and
/// R₁b = −e₁ takes the half-turn about e₃, the unique equator-preserving
/// rotation moving it to e₁. Straight spines hit the second case exactly.
pub fn chart_alignment(frame: &Frame) -> Result<(Matrix3<f64>, bool)> {
    let r1 = match rotation_between(frame.n(), &UnitVec3::z_axis()) {
        Ok(r) => r,
        Err(_) => crate::sphere::rotation_about(&UnitVec3::x_axis(), std::f64::consts::PI),
    };
    let b1 = frame.b().rotated(&r1);
    let r2 = match rotation_between(&b1, &UnitVec3::x_axis()) {
        Ok(r) => r,
        Err(_) => crate::sphere::rotation_about(&UnitVec3::z_axis(), std::f64::consts::PI),
    };
    let a = r2 * r1;
    let reflected = frame.b_perp().rotated(&a).as_vector().y < 0.0;
    Ok((a, reflected))
}

/// Express `child` (world coordinates) in the chart of `parent`: aligns the
/// parent to the canonical frame and applies the same rotation to the child.
/// When the aligned parent comes out as (e₃, e₁, −e₂), the third column of
/// the result is negated.
pub fn express_in_parent(child: &Frame, parent: &Frame) -> Result<Frame> {
    let (a, reflected) = chart_alignment(parent)?;
    let f = child.rotated(&a);
    Ok(if reflected { f.with_negated_b_perp() } else { f })
}

/// Convert a GP ds-rep into its local parameterization. Fits the frame
/// field, then rewrites every frame in its parent chart, every connection in
/// the parent chart, and every spoke in the chart of its own tail frame.
/// The root frame is the canonical frame by construction. The result is
/// unscaled.
pub fn gp_to_lp(gp: &GpDsRep) -> Result<LpDsRep> {
    let fitted = fit_frames(gp)?;
    lp_from_fitted(gp, &fitted)
}

/// Local parameterization from an already fitted frame field.
pub fn lp_from_fitted(gp: &GpDsRep, fitted: &FittedFrames) -> Result<LpDsRep> {
    let n = gp.n_points();
    let root = fitted.hierarchy.root();

    let mut alignments = Vec::with_capacity(n);
    for (j, f) in fitted.frames_global.iter().enumerate() {
        let al = chart_alignment(f)
            .map_err(|e| Error::numerical(format!("cannot align frame at node {j}: {e}")))?;
        alignments.push(al);
    }

    let mut frames = Vec::with_capacity(n);
    let mut connections = Vec::with_capacity(n);
    for j in 0..n {
        if j == root {
            frames.push(Frame::canonical());
            connections.push(Connection::placeholder());
            continue;
        }
        let parent = fitted.hierarchy.parent_of(j);
        let (a, reflected) = &alignments[parent];
        let mut f = fitted.frames_global[j].rotated(a);
        if *reflected {
            f = f.with_negated_b_perp();
        }
        frames.push(f);
        let cg = &fitted.connections_global[j];
        connections.push(Connection {
            dir: cg.dir.rotated(a),
            len: cg.len,
        });
    }

    let spokes = gp
        .spokes
        .iter()
        .map(|s| Spoke {
            tail: s.tail,
            kind: s.kind,
            dir: s.dir.rotated(&alignments[s.tail].0),
            len: s.len,
        })
        .collect();

    let mut lp = LpDsRep {
        grid: gp.grid.clone(),
        hierarchy: fitted.hierarchy.clone(),
        spokes,
        frames,
        connections,
        scaled: false,
        lp_size: 1.0,
    };
    lp.lp_size = lp_size(&lp);
    lp.validate()?;
    Ok(lp)
}

/// Reconstruct a GP ds-rep from its local parameterization, breadth-first
/// from the root. The root is placed at the origin with the canonical frame
/// unless a pose is given. A scaled rep needs `target_size` to restore
/// units.
pub fn lp_to_gp(
    lp: &LpDsRep,
    root_pose: Option<&RootPose>,
    target_size: Option<f64>,
) -> Result<GpDsRep> {
    let factor = match (lp.scaled, target_size) {
        (true, Some(s)) => {
            if !(s > 0.0) {
                return Err(Error::validation("target LP-size must be positive".to_string()));
            }
            s
        }
        (true, None) => {
            return Err(Error::validation(
                "scaled LP-ds-rep needs a target LP-size to restore units".to_string(),
            ));
        }
        (false, Some(_)) => {
            return Err(Error::validation(
                "target LP-size only applies to scaled representations".to_string(),
            ));
        }
        (false, None) => 1.0,
    };
    let default_pose = RootPose::default();
    let pose = root_pose.unwrap_or(&default_pose);

    let n = lp.n_points();
    let root = lp.hierarchy.root();
    let mut frames_global: Vec<Option<Frame>> = vec![None; n];
    let mut positions: Vec<Option<Vector3<f64>>> = vec![None; n];
    frames_global[root] = Some(lp.frames[root].rotated(&pose.rotation));
    positions[root] = Some(pose.translation);

    for node in lp.hierarchy.bfs_order() {
        let frame = frames_global[node].expect("bfs order visits parents first");
        let pos = positions[node].expect("bfs order visits parents first");
        if lp.hierarchy.children_of(node).is_empty() {
            continue;
        }
        let (a, _) = chart_alignment(&frame)
            .map_err(|e| Error::numerical(format!("cannot align frame at node {node}: {e}")))?;
        let a_inv = a.transpose();
        for &child in lp.hierarchy.children_of(node) {
            frames_global[child] = Some(lp.frames[child].rotated(&a_inv));
            let c = &lp.connections[child];
            positions[child] = Some(pos + c.dir.rotated(&a_inv).as_vector() * (c.len * factor));
        }
    }

    let mut spokes = Vec::with_capacity(lp.spokes.len());
    for s in &lp.spokes {
        let tail_frame = frames_global[s.tail].expect("all nodes reached");
        let (a, _) = chart_alignment(&tail_frame)
            .map_err(|e| Error::numerical(format!("cannot align frame at node {}: {e}", s.tail)))?;
        spokes.push(Spoke {
            tail: s.tail,
            kind: s.kind,
            dir: s.dir.rotated(&a.transpose()),
            len: s.len * factor,
        });
    }

    let points = positions.into_iter().map(|p| p.unwrap()).collect();
    GpDsRep::new(lp.grid.clone(), points, spokes)
}

/// Apply a rigid motion (rotation then translation) to a GP ds-rep.
pub fn apply_rigid(gp: &GpDsRep, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> GpDsRep {
    GpDsRep {
        grid: gp.grid.clone(),
        skeletal_points: gp
            .skeletal_points
            .iter()
            .map(|p| rotation * p + translation)
            .collect(),
        spokes: gp
            .spokes
            .iter()
            .map(|s| Spoke {
                tail: s.tail,
                kind: s.kind,
                dir: s.dir.rotated(rotation),
                len: s.len,
            })
            .collect(),
    }
}

/// The rigid motion taking the fitted root frame/position of `gp` onto the
/// canonical frame at the origin — the pose `lp_to_gp` reconstructs in.
pub fn root_chart_motion(gp: &GpDsRep) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let fitted = fit_frames(gp)?;
    let root = fitted.hierarchy.root();
    let (a, _) = chart_alignment(&fitted.frames_global[root])?;
    let t = -(a * gp.skeletal_points[root]);
    Ok((a, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsrep::{GridLayout, SpokeKind};
    use crate::sphere::geodesic_dist;

    /// A bent, asymmetric but valid GP rep for conversion tests.
    fn bumpy_gp() -> GpDsRep {
        let grid = GridLayout::new(3, 5, [None, None], vec![]).unwrap();
        let mut points = Vec::new();
        for r in 0..3 {
            for c in 0..5 {
                let x = c as f64;
                let y = r as f64 * (1.0 + 0.1 * c as f64);
                let z = 0.1 * (x * 0.9).sin() + 0.05 * y * y;
                points.push(Vector3::new(x, y, z));
            }
        }
        let mut spokes = Vec::new();
        for idx in 0..points.len() {
            let tilt = 0.05 * idx as f64;
            let up = UnitVec3::from_components(tilt.sin() * 0.2, 0.1, 1.0).unwrap();
            spokes.push(Spoke {
                tail: idx,
                kind: SpokeKind::Up,
                dir: up,
                len: 1.0 + 0.02 * idx as f64,
            });
            spokes.push(Spoke {
                tail: idx,
                kind: SpokeKind::Down,
                dir: UnitVec3::from_components(tilt.sin() * 0.2, 0.1, -1.0).unwrap(),
                len: 0.9 + 0.02 * idx as f64,
            });
        }
        GpDsRep::new(grid, points, spokes).unwrap()
    }

    #[test]
    fn aligned_chain_gives_canonical_frames() {
        // flat sheet, straight spine: interior frames all share one
        // orientation, so frames expressed in parent charts are canonical
        let grid = GridLayout::new(3, 5, [None, None], vec![]).unwrap();
        let mut points = Vec::new();
        for r in 0..3 {
            for c in 0..5 {
                points.push(Vector3::new(c as f64, r as f64, 0.0));
            }
        }
        let mut spokes = Vec::new();
        for idx in 0..points.len() {
            spokes.push(Spoke {
                tail: idx,
                kind: SpokeKind::Up,
                dir: UnitVec3::z_axis(),
                len: 1.0,
            });
            spokes.push(Spoke {
                tail: idx,
                kind: SpokeKind::Down,
                dir: UnitVec3::z_axis().neg(),
                len: 1.0,
            });
        }
        let gp = GpDsRep::new(grid.clone(), points, spokes).unwrap();
        let lp = gp_to_lp(&gp).unwrap();

        // the right spinal chain shares the root's orientation exactly
        let right = grid.grid_index(1, 3);
        assert!(
            lp.frames[right].max_axis_angle_to(&Frame::canonical()) < 1e-9,
            "chain frame should be canonical in its parent chart"
        );
        // its connection comes in along the parent's b
        assert!(geodesic_dist(&lp.connections[right].dir, &UnitVec3::x_axis()) < 1e-9);
        // up spokes sit along the local n = e₃
        let up_local = lp
            .spokes
            .iter()
            .find(|s| s.tail == right && s.kind == SpokeKind::Up)
            .unwrap();
        assert!(geodesic_dist(&up_local.dir, &UnitVec3::z_axis()) < 1e-9);
    }

    #[test]
    fn child_rotated_about_parent_n_shows_up_as_rotation_about_e3() {
        use crate::sphere::rotation_about;
        let parent = Frame::canonical();
        let rot = rotation_about(parent.n(), 30f64.to_radians());
        let child = parent.rotated(&rot);
        let local = express_in_parent(&child, &parent).unwrap();
        let expect = Frame::canonical().rotated(&rotation_about(&UnitVec3::z_axis(), 30f64.to_radians()));
        assert!(local.max_axis_angle_to(&expect) < 1e-10);

        // same relationship after moving both frames rigidly
        let g = rotation_about(&UnitVec3::from_components(1.0, 2.0, -0.5).unwrap(), 1.1);
        let local2 = express_in_parent(&child.rotated(&g), &parent.rotated(&g)).unwrap();
        assert!(local2.max_axis_angle_to(&expect) < 1e-10);
    }

    #[test]
    fn reflection_branch_restores_special_orthogonality() {
        // left-handed parent and child trigger the third-column adjustment
        let parent = Frame::from_vectors_unchecked(
            UnitVec3::z_axis(),
            UnitVec3::x_axis(),
            UnitVec3::y_axis().neg(),
        );
        let rot = rotation_about(&UnitVec3::from_components(0.3, -0.2, 0.9).unwrap(), 0.4);
        let child = parent.rotated(&rot);
        let local = express_in_parent(&child, &parent).unwrap();
        let det = local.to_matrix().determinant();
        assert!((det - 1.0).abs() < 1e-9, "det {det}");
    }

    use crate::sphere::rotation_about;

    #[test]
    fn roundtrip_recovers_shape_up_to_root_motion() {
        let gp = bumpy_gp();
        let lp = gp_to_lp(&gp).unwrap();
        let back = lp_to_gp(&lp, None, None).unwrap();

        let (r, t) = root_chart_motion(&gp).unwrap();
        let aligned = apply_rigid(&gp, &r, &t);
        let mut max_pos = 0.0f64;
        for (a, b) in aligned.skeletal_points.iter().zip(&back.skeletal_points) {
            max_pos = max_pos.max((a - b).norm());
        }
        assert!(max_pos < 1e-8, "max position error {max_pos}");
        let mut max_dir = 0.0f64;
        for (a, b) in aligned.spokes.iter().zip(&back.spokes) {
            max_dir = max_dir.max(geodesic_dist(&a.dir, &b.dir));
            assert!((a.len - b.len).abs() < 1e-10);
        }
        assert!(max_dir < 1e-9, "max direction error {max_dir}");
    }

    #[test]
    fn chain_of_canonical_frames_reconstructs_collinear_points() {
        let gp = bumpy_gp();
        let mut lp = gp_to_lp(&gp).unwrap();
        // overwrite: all frames canonical, all connections along e₁, unit length
        for j in 0..lp.n_points() {
            lp.frames[j] = Frame::canonical();
            if j != lp.hierarchy.root() {
                lp.connections[j] = Connection {
                    dir: UnitVec3::x_axis(),
                    len: 1.0,
                };
            }
        }
        lp.lp_size = lp_size(&lp);
        let back = lp_to_gp(&lp, None, None).unwrap();
        // every position must be an integer offset along x from the root
        for p in &back.skeletal_points {
            assert!(p.y.abs() < 1e-9 && p.z.abs() < 1e-9);
            assert!((p.x - p.x.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_with_pose_is_equivariant() {
        let gp = bumpy_gp();
        let lp = gp_to_lp(&gp).unwrap();
        let base = lp_to_gp(&lp, None, None).unwrap();
        let r = rotation_about(&UnitVec3::from_components(0.1, 0.7, 0.3).unwrap(), 0.8);
        let t = Vector3::new(1.0, -2.0, 0.5);
        let posed = lp_to_gp(
            &lp,
            Some(&RootPose {
                rotation: r,
                translation: t,
            }),
            None,
        )
        .unwrap();
        for (p, q) in base.skeletal_points.iter().zip(&posed.skeletal_points) {
            assert!((r * p + t - q).norm() < 1e-9);
        }
    }

    #[test]
    fn scaled_rep_requires_target_size() {
        let gp = bumpy_gp();
        let lp = crate::dsrep::scale_lp(&gp_to_lp(&gp).unwrap());
        assert!(lp_to_gp(&lp, None, None).is_err());
        let restored = lp_to_gp(&lp, None, Some(lp.lp_size)).unwrap();
        let original = lp_to_gp(&gp_to_lp(&gp).unwrap(), None, None).unwrap();
        for (a, b) in restored.skeletal_points.iter().zip(&original.skeletal_points) {
            assert!((a - b).norm() < 1e-8);
        }
    }
}
