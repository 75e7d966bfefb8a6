//! Construction of the hierarchical local-frame field on a GP ds-rep
//! skeleton: the s-centroid root, spine and vein chains, discrete sheet
//! normals, and the three-consecutive-point rule for the in-sheet b vector.

use nalgebra::Vector3;

use crate::dsrep::{Connection, FrameHierarchy, GpDsRep, GridLayout, NodeRole};
use crate::error::{Error, Result};
use crate::sphere::{Frame, UnitVec3};

/// Frames fitted to a GP ds-rep, still in world coordinates, together with
/// the hierarchy and the world-space connections.
#[derive(Debug, Clone)]
pub struct FittedFrames {
    pub frames_global: Vec<Frame>,
    pub hierarchy: FrameHierarchy,
    /// Per node; the root holds the zero-length placeholder.
    pub connections_global: Vec<Connection>,
}

/// Build the spanning tree over skeletal points.
///
/// The root is the middle point of the spine (the s-centroid). Spinal nodes
/// chain outward from the root along the middle row; each vein chains outward
/// from its spinal intersection along its column; dedicated fold points are
/// parented to their associated boundary node. Deterministic given the grid.
pub fn build_hierarchy(grid: &GridLayout) -> Result<FrameHierarchy> {
    grid.validate()?;
    let n = grid.n_points();
    let n_grid = grid.n_grid();
    let sr = grid.spine_row();
    let mid = grid.mid_col();

    let mut parent = vec![usize::MAX; n];
    let mut roles = vec![NodeRole::Vein; n];

    let root = grid.grid_index(sr, mid);
    parent[root] = root;
    roles[root] = NodeRole::SCentroid;

    for c in 0..grid.cols {
        let idx = grid.grid_index(sr, c);
        if c != mid {
            roles[idx] = NodeRole::Spinal;
            parent[idx] = if c < mid {
                grid.grid_index(sr, c + 1)
            } else {
                grid.grid_index(sr, c - 1)
            };
        }
        for r in 0..sr {
            // upper vein: rows sr-1 .. 0 hang off the spine
            parent[grid.grid_index(r, c)] = grid.grid_index(r + 1, c);
        }
        for r in sr + 1..grid.rows {
            parent[grid.grid_index(r, c)] = grid.grid_index(r - 1, c);
        }
    }

    for (k, &idx) in grid.crest_order.iter().enumerate() {
        if idx >= n_grid {
            parent[idx] = grid.crest_attachment(k);
            roles[idx] = NodeRole::CrestTail;
        }
    }

    FrameHierarchy::new(parent, roles)
}

/// Discrete unit normals of the skeletal sheet, one per skeletal point.
///
/// Grid points use the cross product of central-difference tangents along
/// rows and columns (one-sided at the sheet boundary); dedicated fold points
/// copy the nearest grid point's normal. Normals are oriented so that
/// n·u_up > 0 wherever an up spoke exists; points without up spokes take the
/// orientation of the nearest oriented grid point.
pub fn estimate_normals(gp: &GpDsRep) -> Result<Vec<UnitVec3>> {
    let grid = &gp.grid;
    let n_grid = grid.n_grid();
    let pts = &gp.skeletal_points;

    let mut normals: Vec<Option<UnitVec3>> = vec![None; gp.n_points()];
    let mut oriented = vec![false; n_grid];

    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let idx = grid.grid_index(r, c);
            let along_row = match (c > 0, c + 1 < grid.cols) {
                (true, true) => pts[grid.grid_index(r, c + 1)] - pts[grid.grid_index(r, c - 1)],
                (false, true) => pts[grid.grid_index(r, c + 1)] - pts[idx],
                (true, false) => pts[idx] - pts[grid.grid_index(r, c - 1)],
                _ => unreachable!("cols >= 3"),
            };
            let along_col = match (r > 0, r + 1 < grid.rows) {
                (true, true) => pts[grid.grid_index(r + 1, c)] - pts[grid.grid_index(r - 1, c)],
                (false, true) => pts[grid.grid_index(r + 1, c)] - pts[idx],
                (true, false) => pts[idx] - pts[grid.grid_index(r - 1, c)],
                _ => unreachable!("rows >= 3"),
            };
            let cross = along_row.cross(&along_col);
            let mut normal = UnitVec3::new(cross).map_err(|_| {
                Error::numerical(format!(
                    "degenerate neighborhood at skeletal point {idx}: collinear neighbors"
                ))
            })?;
            if let Some(si) = gp.up_spoke_at(idx) {
                let d = normal.dot(&gp.spokes[si].dir);
                if d < 0.0 {
                    normal = normal.neg();
                }
                oriented[idx] = true;
            }
            normals[idx] = Some(normal);
        }
    }

    // orient leftover grid points by the nearest oriented neighbor
    if oriented.iter().any(|o| *o) {
        for idx in 0..n_grid {
            if oriented[idx] {
                continue;
            }
            let nearest = (0..n_grid)
                .filter(|&j| oriented[j])
                .min_by(|&a, &b| {
                    let da = (pts[a] - pts[idx]).norm_squared();
                    let db = (pts[b] - pts[idx]).norm_squared();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .expect("at least one oriented point");
            let me = normals[idx].unwrap();
            let reference = normals[nearest].unwrap();
            if me.dot(&reference) < 0.0 {
                normals[idx] = Some(me.neg());
            }
        }
    }

    for idx in n_grid..gp.n_points() {
        let nearest = (0..n_grid)
            .min_by(|&a, &b| {
                let da = (pts[a] - pts[idx]).norm_squared();
                let db = (pts[b] - pts[idx]).norm_squared();
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .expect("grid nonempty");
        normals[idx] = normals[nearest];
    }

    Ok(normals.into_iter().map(|n| n.unwrap()).collect())
}

/// Child position used by the b-vector rule at a node, if any.
enum BChild {
    Point(Vector3<f64>),
    None,
}

/// Fit the full local frame field of a GP ds-rep.
///
/// At every node b lies in the tangent plane and b⊥ = n × b. Interior spinal
/// and vein nodes average the directions to the projected parent and child;
/// the root differences the directions to its two spinal children (child 1 is
/// the lower-column one); spine endpoints continue through the designated
/// extension point or their crest spoke tip; fold points use their crest
/// spoke tip as the child.
pub fn fit_frames(gp: &GpDsRep) -> Result<FittedFrames> {
    let hierarchy = build_hierarchy(&gp.grid)?;
    let normals = estimate_normals(gp)?;
    let grid = &gp.grid;
    let pts = &gp.skeletal_points;
    let sr = grid.spine_row();
    let root = hierarchy.root();

    let mut frames = Vec::with_capacity(gp.n_points());
    for node in 0..gp.n_points() {
        let p = pts[node];
        let n = normals[node];
        let project = |q: &Vector3<f64>| q - n.as_vector() * (q - p).dot(n.as_vector());

        let b = if node == root {
            // two spinal children, lower column first
            let mut kids: Vec<usize> = hierarchy
                .children_of(root)
                .iter()
                .copied()
                .filter(|&k| hierarchy.role(k) == NodeRole::Spinal)
                .collect();
            kids.sort_by_key(|&k| grid.row_col(k).1);
            if kids.len() != 2 {
                return Err(Error::validation(format!(
                    "root must have two spinal children, has {}",
                    kids.len()
                )));
            }
            let toward = |k: usize| -> Result<Vector3<f64>> {
                let d = project(&pts[k]) - p;
                UnitVec3::new(d)
                    .map(|u| u.into_vector())
                    .map_err(|_| Error::numerical(format!("b undefined at node {node}")))
            };
            let v1 = toward(kids[0])?;
            let v2 = toward(kids[1])?;
            diff_b(&v2, &v1, node)?
        } else {
            let parent_pos = pts[hierarchy.parent_of(node)];
            let v1_raw = p - project(&parent_pos);
            let v1 = UnitVec3::new(v1_raw)
                .map_err(|_| Error::numerical(format!("b undefined at node {node}")))?
                .into_vector();
            match b_child(gp, &hierarchy, node, sr)? {
                BChild::Point(child_pos) => {
                    let v2_raw = project(&child_pos) - p;
                    let v2 = UnitVec3::new(v2_raw)
                        .map_err(|_| Error::numerical(format!("b undefined at node {node}")))?
                        .into_vector();
                    sum_b(&v1, &v2, node)?
                }
                BChild::None => v1,
            }
        };

        let b_unit = UnitVec3::new(b - n.as_vector() * n.as_vector().dot(&b))
            .map_err(|_| Error::numerical(format!("b undefined at node {node}")))?;
        frames.push(Frame::from_n_b(n, b_unit)?);
    }

    let mut connections = Vec::with_capacity(gp.n_points());
    for node in 0..gp.n_points() {
        if node == root {
            connections.push(Connection::placeholder());
            continue;
        }
        let delta = pts[node] - pts[hierarchy.parent_of(node)];
        let len = delta.norm();
        let dir = UnitVec3::new(delta).map_err(|_| {
            Error::numerical(format!(
                "node {node} coincides with its parent; connection undefined"
            ))
        })?;
        connections.push(Connection { dir, len });
        debug_assert!(len > 0.0);
    }

    Ok(FittedFrames {
        frames_global: frames,
        hierarchy,
        connections_global: connections,
    })
}

fn sum_b(v1: &Vector3<f64>, v2: &Vector3<f64>, node: usize) -> Result<Vector3<f64>> {
    let s = v1 + v2;
    if s.norm() < 1e-8 {
        return Err(Error::numerical(format!(
            "b undefined at node {node}: projected directions fold back"
        )));
    }
    Ok(s)
}

fn diff_b(v2: &Vector3<f64>, v1: &Vector3<f64>, node: usize) -> Result<Vector3<f64>> {
    let d = v2 - v1;
    if d.norm() < 1e-8 {
        return Err(Error::numerical(format!(
            "b undefined at node {node}: projected child directions coincide"
        )));
    }
    Ok(d)
}

/// The position continuing the node's curve outward, per node class.
fn b_child(
    gp: &GpDsRep,
    hierarchy: &FrameHierarchy,
    node: usize,
    spine_row: usize,
) -> Result<BChild> {
    let grid = &gp.grid;
    let spoke_tip = |si: usize| gp.spoke_tip(si);

    match hierarchy.role(node) {
        NodeRole::SCentroid => unreachable!("root handled by caller"),
        NodeRole::CrestTail => {
            let si = gp.crest_spoke_at(node).ok_or_else(|| {
                Error::validation(format!("fold point {node} has no crest spoke"))
            })?;
            Ok(BChild::Point(spoke_tip(si)))
        }
        NodeRole::Spinal => {
            let (_, c) = grid.row_col(node);
            let endpoint_slot = if c == 0 {
                Some(0)
            } else if c == grid.cols - 1 {
                Some(1)
            } else {
                None
            };
            match endpoint_slot {
                None => {
                    // interior spinal node: the next node outward on the spine
                    let mid = grid.mid_col();
                    let next = if c < mid {
                        grid.grid_index(spine_row, c - 1)
                    } else {
                        grid.grid_index(spine_row, c + 1)
                    };
                    Ok(BChild::Point(gp.skeletal_points[next]))
                }
                Some(slot) => {
                    if let Some(ext) = grid.spine_extensions[slot] {
                        return Ok(BChild::Point(gp.skeletal_points[ext]));
                    }
                    if let Some(crest_child) = first_crest_child(hierarchy, node) {
                        return Ok(BChild::Point(gp.skeletal_points[crest_child]));
                    }
                    if let Some(si) = gp.crest_spoke_at(node) {
                        return Ok(BChild::Point(spoke_tip(si)));
                    }
                    Ok(BChild::None)
                }
            }
        }
        NodeRole::Vein => {
            let (r, c) = grid.row_col(node);
            let outward = if r < spine_row {
                r.checked_sub(1).map(|rr| grid.grid_index(rr, c))
            } else if r + 1 < grid.rows {
                Some(grid.grid_index(r + 1, c))
            } else {
                None
            };
            if let Some(next) = outward {
                return Ok(BChild::Point(gp.skeletal_points[next]));
            }
            // fold-row vein end: continue through a fold child or crest tip
            if let Some(crest_child) = first_crest_child(hierarchy, node) {
                return Ok(BChild::Point(gp.skeletal_points[crest_child]));
            }
            if let Some(si) = gp.crest_spoke_at(node) {
                return Ok(BChild::Point(spoke_tip(si)));
            }
            Ok(BChild::None)
        }
    }
}

fn first_crest_child(hierarchy: &FrameHierarchy, node: usize) -> Option<usize> {
    hierarchy
        .children_of(node)
        .iter()
        .copied()
        .find(|&k| hierarchy.role(k) == NodeRole::CrestTail)
}
