//! Data model for globally and locally parameterized discrete skeletal
//! representations: the skeletal grid, spokes, frames, the parent hierarchy
//! and the size measures.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{Frame, UnitVec3};

/// Spoke classes: up/down reach the two sides of the boundary, crest spokes
/// reach the crest from the skeletal fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpokeKind {
    Up,
    Down,
    Crest,
}

/// One spoke: tail node index, kind, direction and length. For a GP rep the
/// direction is in world coordinates; for an LP rep it is expressed in the
/// local frame at the tail node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spoke {
    pub tail: usize,
    pub kind: SpokeKind,
    pub dir: UnitVec3,
    pub len: f64,
}

/// Skeletal grid layout: a rows×cols sheet (rows odd, middle row is the
/// spine) plus the ordered crest tails along the fold.
///
/// `crest_order` lists the skeletal indices carrying crest spokes in fold
/// order; indices below rows·cols are boundary grid nodes (crest tails
/// coincide with the sheet boundary), indices from rows·cols upward are
/// dedicated fold points appended after the grid block.
///
/// `spine_extensions` optionally designates, per spine endpoint (column 0
/// first), the skeletal point continuing the spine along the major curve;
/// endpoints without a designation fall back to their crest spoke tip, or to
/// one-sided fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub spine_extensions: [Option<usize>; 2],
    pub crest_order: Vec<usize>,
}

impl GridLayout {
    pub fn new(
        rows: usize,
        cols: usize,
        spine_extensions: [Option<usize>; 2],
        crest_order: Vec<usize>,
    ) -> Result<Self> {
        let g = GridLayout {
            rows,
            cols,
            spine_extensions,
            crest_order,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows % 2 == 0 {
            return Err(Error::validation(format!(
                "grid rows must be odd, got {}",
                self.rows
            )));
        }
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::validation(format!(
                "grid too small: {}x{} (need rows >= 3, cols >= 3)",
                self.rows, self.cols
            )));
        }
        if self.cols % 2 == 0 {
            return Err(Error::validation(format!(
                "grid cols must be odd for a central s-centroid, got {}",
                self.cols
            )));
        }
        let n_grid = self.n_grid();
        let n_points = self.n_points();
        let cycle = self.boundary_cycle();
        let mut seen_extra = vec![false; n_points - n_grid];
        for &idx in &self.crest_order {
            if idx >= n_points {
                return Err(Error::validation(format!(
                    "crest_order index {idx} out of range"
                )));
            }
            if idx < n_grid {
                if !cycle.contains(&idx) {
                    return Err(Error::validation(format!(
                        "crest tail {idx} is not on the grid boundary"
                    )));
                }
            } else {
                if seen_extra[idx - n_grid] {
                    return Err(Error::validation(format!(
                        "crest tail {idx} listed twice"
                    )));
                }
                seen_extra[idx - n_grid] = true;
            }
        }
        if !seen_extra.iter().all(|s| *s) {
            return Err(Error::validation(
                "every dedicated fold point must appear in crest_order".to_string(),
            ));
        }
        for (slot, ext) in self.spine_extensions.iter().enumerate() {
            if let Some(e) = ext {
                if *e >= n_points {
                    return Err(Error::validation(format!(
                        "spine extension {e} out of range"
                    )));
                }
                let endpoint = if slot == 0 {
                    self.grid_index(self.spine_row(), 0)
                } else {
                    self.grid_index(self.spine_row(), self.cols - 1)
                };
                if *e == endpoint {
                    return Err(Error::validation(
                        "spine extension cannot be the endpoint itself".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn spine_row(&self) -> usize {
        (self.rows - 1) / 2
    }

    pub fn mid_col(&self) -> usize {
        (self.cols - 1) / 2
    }

    pub fn grid_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn n_grid(&self) -> usize {
        self.rows * self.cols
    }

    /// Total skeletal points: grid points plus dedicated fold points.
    pub fn n_points(&self) -> usize {
        let extra = self
            .crest_order
            .iter()
            .filter(|&&i| i >= self.n_grid())
            .count();
        self.n_grid() + extra
    }

    /// Grid indices around the sheet boundary, starting at the column-0 spine
    /// endpoint and proceeding up the left edge, along the top row, down the
    /// right edge and back along the bottom.
    pub fn boundary_cycle(&self) -> Vec<usize> {
        let (rows, cols) = (self.rows, self.cols);
        let sr = self.spine_row();
        let mut cycle = Vec::with_capacity(2 * (rows + cols) - 4);
        for r in (0..=sr).rev() {
            cycle.push(self.grid_index(r, 0));
        }
        for c in 1..cols {
            cycle.push(self.grid_index(0, c));
        }
        for r in 1..rows {
            cycle.push(self.grid_index(r, cols - 1));
        }
        for c in (0..cols - 1).rev() {
            cycle.push(self.grid_index(rows - 1, c));
        }
        for r in (sr + 1..rows - 1).rev() {
            cycle.push(self.grid_index(r, 0));
        }
        cycle
    }

    /// Boundary grid node a crest tail is associated with: the k-th crest
    /// tail maps to boundary-cycle position floor(k·L/m). For crest tails
    /// that are themselves boundary grid nodes this returns the node itself.
    pub fn crest_attachment(&self, crest_pos: usize) -> usize {
        let idx = self.crest_order[crest_pos];
        if idx < self.n_grid() {
            return idx;
        }
        let cycle = self.boundary_cycle();
        let m = self.crest_order.len();
        cycle[(crest_pos * cycle.len()) / m]
    }
}

/// Globally parameterized ds-rep: skeletal points and spokes in one world
/// coordinate system.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDsRep {
    pub grid: GridLayout,
    pub skeletal_points: Vec<Vector3<f64>>,
    pub spokes: Vec<Spoke>,
}

impl GpDsRep {
    pub fn new(
        grid: GridLayout,
        skeletal_points: Vec<Vector3<f64>>,
        spokes: Vec<Spoke>,
    ) -> Result<Self> {
        let rep = GpDsRep {
            grid,
            skeletal_points,
            spokes,
        };
        rep.validate()?;
        Ok(rep)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.skeletal_points.len() != self.grid.n_points() {
            return Err(Error::validation(format!(
                "expected {} skeletal points, file has {}",
                self.grid.n_points(),
                self.skeletal_points.len()
            )));
        }
        validate_spokes(&self.spokes, &self.grid)?;
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.skeletal_points.len()
    }

    pub fn n_spokes(&self) -> usize {
        self.spokes.len()
    }

    pub fn spoke_tip(&self, i: usize) -> Vector3<f64> {
        let s = &self.spokes[i];
        self.skeletal_points[s.tail] + s.dir.as_vector() * s.len
    }

    pub fn up_spoke_at(&self, node: usize) -> Option<usize> {
        self.spokes
            .iter()
            .position(|s| s.tail == node && s.kind == SpokeKind::Up)
    }

    pub fn crest_spoke_at(&self, node: usize) -> Option<usize> {
        self.spokes
            .iter()
            .position(|s| s.tail == node && s.kind == SpokeKind::Crest)
    }
}

fn validate_spokes(spokes: &[Spoke], grid: &GridLayout) -> Result<()> {
    let n_points = grid.n_points();
    let n_grid = grid.n_grid();
    let mut up = vec![false; n_points];
    let mut down = vec![false; n_points];
    let mut crest_count = vec![0usize; n_points];
    for (i, s) in spokes.iter().enumerate() {
        if s.tail >= n_points {
            return Err(Error::validation(format!(
                "spoke {i} tail index {} out of range",
                s.tail
            )));
        }
        if !(s.len > 0.0) {
            return Err(Error::validation(format!(
                "non-positive spoke length (spoke {i}, len {})",
                s.len
            )));
        }
        match s.kind {
            SpokeKind::Up => {
                if s.tail >= n_grid {
                    return Err(Error::validation(format!(
                        "up spoke {i} tails at fold point {}",
                        s.tail
                    )));
                }
                up[s.tail] = true;
            }
            SpokeKind::Down => {
                if s.tail >= n_grid {
                    return Err(Error::validation(format!(
                        "down spoke {i} tails at fold point {}",
                        s.tail
                    )));
                }
                down[s.tail] = true;
            }
            SpokeKind::Crest => crest_count[s.tail] += 1,
        }
    }
    for node in 0..n_grid {
        if up[node] != down[node] {
            return Err(Error::validation(format!(
                "node {node} has an unmatched up/down spoke pair"
            )));
        }
    }
    for &tail in &grid.crest_order {
        if crest_count[tail] != 1 {
            return Err(Error::validation(format!(
                "crest tail {tail} must carry exactly one crest spoke, has {}",
                crest_count[tail]
            )));
        }
    }
    let listed = grid.crest_order.len();
    let total_crest: usize = crest_count.iter().sum();
    if total_crest != listed {
        return Err(Error::validation(format!(
            "{total_crest} crest spokes but {listed} crest tails listed"
        )));
    }
    Ok(())
}

/// Node classes in the frame hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    SCentroid,
    Spinal,
    Vein,
    CrestTail,
}

/// Spanning tree over skeletal points, rooted at the s-centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHierarchy {
    parent: Vec<usize>,
    roles: Vec<NodeRole>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl FrameHierarchy {
    pub fn new(parent: Vec<usize>, roles: Vec<NodeRole>) -> Result<Self> {
        let n = parent.len();
        if roles.len() != n {
            return Err(Error::validation(
                "hierarchy parent/role length mismatch".to_string(),
            ));
        }
        let mut root = None;
        for (i, &p) in parent.iter().enumerate() {
            if p >= n {
                return Err(Error::validation(format!(
                    "hierarchy parent index {p} out of range"
                )));
            }
            if p == i {
                if root.is_some() {
                    return Err(Error::validation(
                        "hierarchy not a tree: multiple roots".to_string(),
                    ));
                }
                root = Some(i);
            }
        }
        let root =
            root.ok_or_else(|| Error::validation("hierarchy not a tree: no root".to_string()))?;
        if roles[root] != NodeRole::SCentroid {
            return Err(Error::validation(
                "hierarchy root must have the s-centroid role".to_string(),
            ));
        }
        if roles
            .iter()
            .enumerate()
            .any(|(i, r)| *r == NodeRole::SCentroid && i != root)
        {
            return Err(Error::validation(
                "only the root may have the s-centroid role".to_string(),
            ));
        }
        // every node must reach the root in < n steps
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while cur != root {
                cur = parent[cur];
                steps += 1;
                if steps > n {
                    return Err(Error::validation("hierarchy not a tree".to_string()));
                }
            }
        }
        let mut children = vec![Vec::new(); n];
        for (i, &p) in parent.iter().enumerate() {
            if i != p {
                children[p].push(i);
            }
        }
        Ok(FrameHierarchy {
            parent,
            roles,
            children,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent_of(&self, node: usize) -> usize {
        self.parent[node]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn children_of(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Breadth-first traversal order starting at the root.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.root);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &c in &self.children[node] {
                queue.push_back(c);
            }
        }
        order
    }
}

/// A connection vector from a parent frame origin to a node origin,
/// expressed in the parent frame chart for LP reps. The root carries the
/// zero-length placeholder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub dir: UnitVec3,
    pub len: f64,
}

impl Connection {
    pub fn placeholder() -> Self {
        Connection {
            dir: UnitVec3::x_axis(),
            len: 0.0,
        }
    }
}

/// Locally parameterized ds-rep: every direction lives in the chart of its
/// local (or parent) frame, so the representation carries no world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDsRep {
    pub grid: GridLayout,
    pub hierarchy: FrameHierarchy,
    pub spokes: Vec<Spoke>,
    /// Per node, the frame expressed in its parent frame chart (root: the
    /// canonical frame).
    pub frames: Vec<Frame>,
    /// Per node, the connection from the parent expressed in the parent
    /// chart (root: zero-length placeholder).
    pub connections: Vec<Connection>,
    pub scaled: bool,
    /// LP-size of the underlying unscaled representation.
    pub lp_size: f64,
}

impl LpDsRep {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.grid.n_points();
        if self.hierarchy.len() != n {
            return Err(Error::validation(format!(
                "hierarchy covers {} nodes, grid has {n}",
                self.hierarchy.len()
            )));
        }
        if self.frames.len() != n || self.connections.len() != n {
            return Err(Error::validation(
                "frames/connections must cover every skeletal point".to_string(),
            ));
        }
        validate_spokes(&self.spokes, &self.grid)?;
        for (j, f) in self.frames.iter().enumerate() {
            f.validate()
                .map_err(|e| Error::validation(format!("frame {j}: {e}")))?;
        }
        let root = self.hierarchy.root();
        if self.frames[root].max_axis_angle_to(&Frame::canonical()) > 1e-9 {
            return Err(Error::validation(
                "root frame must be the canonical frame".to_string(),
            ));
        }
        if self.connections[root].len != 0.0 {
            return Err(Error::validation(
                "root connection must have zero length".to_string(),
            ));
        }
        for (j, c) in self.connections.iter().enumerate() {
            if j != root && !(c.len > 0.0) {
                return Err(Error::validation(format!(
                    "non-positive connection length at node {j}"
                )));
            }
        }
        let sum = lp_size(self);
        if self.scaled {
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "scaled rep must have unit length sum, got {sum}"
                )));
            }
        } else if (self.lp_size - sum).abs() > 1e-9 * sum.max(1.0) {
            return Err(Error::validation(format!(
                "declared lp_size {} does not match length sum {sum}",
                self.lp_size
            )));
        }
        if !(self.lp_size > 0.0) {
            return Err(Error::validation("lp_size must be positive".to_string()));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.hierarchy.len()
    }

    pub fn n_spokes(&self) -> usize {
        self.spokes.len()
    }

    /// True when the two reps share grid, hierarchy, spoke layout and scaling.
    pub fn same_structure(&self, other: &LpDsRep) -> bool {
        self.grid == other.grid
            && self.hierarchy.parents() == other.hierarchy.parents()
            && self.hierarchy.roles() == other.hierarchy.roles()
            && self.scaled == other.scaled
            && self.spokes.len() == other.spokes.len()
            && self
                .spokes
                .iter()
                .zip(&other.spokes)
                .all(|(a, b)| a.tail == b.tail && a.kind == b.kind)
    }
}

/// Centered, unit-norm skeletal configuration (the pre-shape):
/// P̃ = C P / ‖C P‖ with C the centering matrix.
pub fn pre_shape(gp: &GpDsRep) -> Result<DMatrix<f64>> {
    configuration_pre_shape(&gp.skeletal_points)
}

pub fn configuration_pre_shape(points: &[Vector3<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::validation(
            "pre-shape needs at least two points".to_string(),
        ));
    }
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n as f64;
    let mut m = DMatrix::zeros(n, 3);
    for (i, p) in points.iter().enumerate() {
        let d = p - centroid;
        m[(i, 0)] = d.x;
        m[(i, 1)] = d.y;
        m[(i, 2)] = d.z;
    }
    let norm = m.norm();
    if norm < 1e-12 {
        return Err(Error::numerical("degenerate configuration".to_string()));
    }
    Ok(m / norm)
}

/// Which point set the GP centroid size is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeBasis {
    SpokeTips,
    SpokeTails,
}

/// Centroid size ‖C X‖ of the chosen point set (spoke tips by default
/// elsewhere in the pipeline).
pub fn gp_size(gp: &GpDsRep, basis: SizeBasis) -> f64 {
    let points: Vec<Vector3<f64>> = match basis {
        SizeBasis::SpokeTips => (0..gp.n_spokes()).map(|i| gp.spoke_tip(i)).collect(),
        SizeBasis::SpokeTails => gp.skeletal_points.clone(),
    };
    let n = points.len() as f64;
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;
    points
        .iter()
        .map(|p| (p - centroid).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// LP-size: the sum of all spoke and connection lengths.
pub fn lp_size(lp: &LpDsRep) -> f64 {
    let spokes: f64 = lp.spokes.iter().map(|s| s.len).sum();
    let conns: f64 = lp.connections.iter().map(|c| c.len).sum();
    spokes + conns
}

/// Divide every spoke and connection length by the current LP-size. The
/// returned rep is flagged scaled and keeps the original LP-size as
/// metadata. Scaling an already-scaled rep is a no-op up to rounding.
pub fn scale_lp(lp: &LpDsRep) -> LpDsRep {
    let total = lp_size(lp);
    let mut out = lp.clone();
    for s in &mut out.spokes {
        s.len /= total;
    }
    for c in &mut out.connections {
        c.len /= total;
    }
    out.scaled = true;
    out.lp_size = if lp.scaled { lp.lp_size } else { total };
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_grid() -> GridLayout {
        GridLayout::new(3, 3, [None, None], vec![]).unwrap()
    }

    #[test]
    fn grid_rejects_even_rows() {
        assert!(GridLayout::new(4, 5, [None, None], vec![]).is_err());
    }

    #[test]
    fn grid_rejects_too_small() {
        assert!(GridLayout::new(3, 1, [None, None], vec![]).is_err());
    }

    #[test]
    fn boundary_cycle_covers_rim_once() {
        let g = GridLayout::new(5, 9, [None, None], vec![]).unwrap();
        let cycle = g.boundary_cycle();
        assert_eq!(cycle.len(), 2 * (5 + 9) - 4);
        let mut sorted = cycle.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), cycle.len());
        assert_eq!(cycle[0], g.grid_index(g.spine_row(), 0));
        assert_eq!(cycle[cycle.len() / 2], g.grid_index(g.spine_row(), 8));
    }

    #[test]
    fn hierarchy_detects_cycle() {
        let parent = vec![1, 2, 0];
        let roles = vec![NodeRole::SCentroid, NodeRole::Spinal, NodeRole::Spinal];
        let err = FrameHierarchy::new(parent, roles).unwrap_err();
        assert!(err.to_string().contains("not a tree"));
    }

    #[test]
    fn hierarchy_bfs_starts_at_root() {
        let parent = vec![1, 1, 1];
        let roles = vec![NodeRole::Spinal, NodeRole::SCentroid, NodeRole::Spinal];
        let h = FrameHierarchy::new(parent, roles).unwrap();
        assert_eq!(h.root(), 1);
        assert_eq!(h.bfs_order()[0], 1);
        assert_eq!(h.bfs_order().len(), 3);
    }

    #[test]
    fn pre_shape_two_points() {
        let pts = vec![Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0)];
        let m = configuration_pre_shape(&pts).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!(m[(0, 0)], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(m.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pre_shape_degenerate() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert!(configuration_pre_shape(&[p, p, p]).is_err());
    }

    #[test]
    fn gp_size_unit_square() {
        // four tips on a unit square: each is sqrt(2)/2 from the center, so
        // the centroid size is sqrt(4 * 0.5) = sqrt(2)
        let grid = toy_grid();
        let tails = vec![
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, -1.0),
            Vector3::new(1.0, 1.0, -1.0),
            Vector3::new(0.0, 1.0, -1.0),
        ];
        let mut points = vec![Vector3::zeros(); 9];
        points[..4].copy_from_slice(&tails);
        let spokes = (0..4)
            .map(|i| Spoke {
                tail: i,
                kind: SpokeKind::Up,
                dir: UnitVec3::z_axis(),
                len: 1.0,
            })
            .collect();
        let gp = GpDsRep {
            grid,
            skeletal_points: points,
            spokes,
        };
        assert_abs_diff_eq!(
            gp_size(&gp, SizeBasis::SpokeTips),
            2.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gp_size_identical_tips_zero() {
        let grid = toy_grid();
        let points = vec![Vector3::zeros(); 9];
        let spokes = vec![
            Spoke {
                tail: 0,
                kind: SpokeKind::Up,
                dir: UnitVec3::z_axis(),
                len: 1.0,
            },
            Spoke {
                tail: 0,
                kind: SpokeKind::Down,
                dir: UnitVec3::z_axis(),
                len: 1.0,
            },
        ];
        let gp = GpDsRep {
            grid,
            skeletal_points: points,
            spokes,
        };
        assert_abs_diff_eq!(gp_size(&gp, SizeBasis::SpokeTips), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn spoke_validation_rejects_nonpositive_length() {
        let grid = toy_grid();
        let points = vec![Vector3::zeros(); 9];
        let spokes = vec![Spoke {
            tail: 0,
            kind: SpokeKind::Up,
            dir: UnitVec3::z_axis(),
            len: 0.0,
        }];
        let err = GpDsRep::new(grid, points, spokes).unwrap_err();
        assert!(err.to_string().contains("non-positive spoke length"));
    }
}
