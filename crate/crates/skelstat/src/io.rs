//! dsrep-json: the on-disk format for GP and LP ds-reps.
//!
//! One JSON document per rep. Floats are serialized with 17 significant
//! digits so that save → load → save is byte-identical and every f64
//! round-trips exactly.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dsrep::{
    lp_size, Connection, FrameHierarchy, GpDsRep, GridLayout, LpDsRep, NodeRole, Spoke, SpokeKind,
};
use crate::error::{Error, Result};
use crate::sphere::{Frame, UnitVec3};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FileSpoke {
    tail: usize,
    kind: SpokeKind,
    dir: [f64; 3],
    len: f64,
}

#[derive(Serialize, Deserialize)]
struct FileHierarchy {
    parent: Vec<usize>,
    roles: Vec<NodeRole>,
}

#[derive(Serialize, Deserialize)]
struct FileConnection {
    dir: [f64; 3],
    len: f64,
}

#[derive(Serialize, Deserialize)]
struct DsrepFile {
    format_version: u32,
    kind: String,
    grid: GridLayout,
    #[serde(skip_serializing_if = "Option::is_none")]
    skeletal_points: Option<Vec<[f64; 3]>>,
    spokes: Vec<FileSpoke>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hierarchy: Option<FileHierarchy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<[[f64; 3]; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    connections: Option<Vec<FileConnection>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lp_size: Option<f64>,
}

/// serde_json formatter writing every f64 as `{:.16e}` (17 significant
/// digits), which is enough for exact f64 round-trips.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn to_json_bytes(file: &DsrepFile) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    file.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

fn vec3_of(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn arr3_of(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn adopt_direction(raw: [f64; 3], what: &str) -> Result<UnitVec3> {
    let v = vec3_of(raw);
    let norm = v.norm();
    let unit = UnitVec3::adopt(v).map_err(|e| Error::validation(format!("{what}: {e}")))?;
    if (norm - 1.0).abs() > 1e-9 {
        log::warn!("{what} had norm {norm}; renormalized");
    }
    Ok(unit)
}

fn spokes_from_file(spokes: Vec<FileSpoke>) -> Result<Vec<Spoke>> {
    spokes
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Spoke {
                tail: s.tail,
                kind: s.kind,
                dir: adopt_direction(s.dir, &format!("spoke {i} direction"))?,
                len: s.len,
            })
        })
        .collect()
}

fn spokes_to_file(spokes: &[Spoke]) -> Vec<FileSpoke> {
    spokes
        .iter()
        .map(|s| FileSpoke {
            tail: s.tail,
            kind: s.kind,
            dir: arr3_of(s.dir.as_vector()),
            len: s.len,
        })
        .collect()
}

/// Serialize a GP ds-rep to dsrep-json bytes.
pub fn gp_to_json(gp: &GpDsRep) -> Result<Vec<u8>> {
    let file = DsrepFile {
        format_version: FORMAT_VERSION,
        kind: "gp".to_string(),
        grid: gp.grid.clone(),
        skeletal_points: Some(gp.skeletal_points.iter().map(arr3_of).collect()),
        spokes: spokes_to_file(&gp.spokes),
        hierarchy: None,
        frames: None,
        connections: None,
        scaled: None,
        lp_size: None,
    };
    to_json_bytes(&file)
}

/// Serialize an LP ds-rep to dsrep-json bytes.
pub fn lp_to_json(lp: &LpDsRep) -> Result<Vec<u8>> {
    let file = DsrepFile {
        format_version: FORMAT_VERSION,
        kind: "lp".to_string(),
        grid: lp.grid.clone(),
        skeletal_points: None,
        spokes: spokes_to_file(&lp.spokes),
        hierarchy: Some(FileHierarchy {
            parent: lp.hierarchy.parents().to_vec(),
            roles: lp.hierarchy.roles().to_vec(),
        }),
        frames: Some(
            lp.frames
                .iter()
                .map(|f| {
                    [
                        arr3_of(f.n().as_vector()),
                        arr3_of(f.b().as_vector()),
                        arr3_of(f.b_perp().as_vector()),
                    ]
                })
                .collect(),
        ),
        connections: Some(
            lp.connections
                .iter()
                .map(|c| FileConnection {
                    dir: arr3_of(c.dir.as_vector()),
                    len: c.len,
                })
                .collect(),
        ),
        scaled: Some(lp.scaled),
        lp_size: Some(lp.lp_size),
    };
    to_json_bytes(&file)
}

/// Parse a GP ds-rep from dsrep-json bytes, validating the full schema.
pub fn gp_from_json(bytes: &[u8]) -> Result<GpDsRep> {
    let file: DsrepFile = serde_json::from_slice(bytes)?;
    check_header(&file, "gp")?;
    let points = file
        .skeletal_points
        .ok_or_else(|| Error::validation("gp file missing skeletal_points".to_string()))?
        .into_iter()
        .map(vec3_of)
        .collect();
    GpDsRep::new(file.grid, points, spokes_from_file(file.spokes)?)
}

/// Parse an LP ds-rep from dsrep-json bytes, validating schema, hierarchy
/// and scaling invariants.
pub fn lp_from_json(bytes: &[u8]) -> Result<LpDsRep> {
    let file: DsrepFile = serde_json::from_slice(bytes)?;
    check_header(&file, "lp")?;
    let hier = file
        .hierarchy
        .ok_or_else(|| Error::validation("lp file missing hierarchy".to_string()))?;
    let hierarchy = FrameHierarchy::new(hier.parent, hier.roles)?;
    let frames = file
        .frames
        .ok_or_else(|| Error::validation("lp file missing frames".to_string()))?
        .into_iter()
        .enumerate()
        .map(|(j, f)| {
            let n = adopt_direction(f[0], &format!("frame {j} n"))?;
            let b = adopt_direction(f[1], &format!("frame {j} b"))?;
            let bp = adopt_direction(f[2], &format!("frame {j} b_perp"))?;
            Frame::from_vectors(n, b, bp).map_err(|e| Error::validation(format!("frame {j}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let connections = file
        .connections
        .ok_or_else(|| Error::validation("lp file missing connections".to_string()))?
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            Ok(Connection {
                dir: adopt_direction(c.dir, &format!("connection {j} direction"))?,
                len: c.len,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lp = LpDsRep {
        grid: file.grid,
        hierarchy,
        spokes: spokes_from_file(file.spokes)?,
        frames,
        connections,
        scaled: file
            .scaled
            .ok_or_else(|| Error::validation("lp file missing scaled flag".to_string()))?,
        lp_size: file
            .lp_size
            .ok_or_else(|| Error::validation("lp file missing lp_size".to_string()))?,
    };
    lp.validate()?;
    Ok(lp)
}

fn check_header(file: &DsrepFile, expected_kind: &str) -> Result<()> {
    if file.format_version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    if file.kind != expected_kind {
        return Err(Error::validation(format!(
            "expected a {expected_kind} file, found kind \"{}\"",
            file.kind
        )));
    }
    Ok(())
}

pub fn load_gp(path: impl AsRef<Path>) -> Result<GpDsRep> {
    let bytes = fs::read(path.as_ref())?;
    gp_from_json(&bytes)
}

pub fn save_gp(gp: &GpDsRep, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), gp_to_json(gp)?)?;
    Ok(())
}

pub fn load_lp(path: impl AsRef<Path>) -> Result<LpDsRep> {
    let bytes = fs::read(path.as_ref())?;
    lp_from_json(&bytes)
}

pub fn save_lp(lp: &LpDsRep, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), lp_to_json(lp)?)?;
    Ok(())
}

/// Load every LP file in a directory (sorted by file name).
pub fn load_lp_dir(dir: impl AsRef<Path>) -> Result<Vec<LpDsRep>> {
    load_dir(dir, |p| load_lp(p))
}

/// Load every GP file in a directory (sorted by file name).
pub fn load_gp_dir(dir: impl AsRef<Path>) -> Result<Vec<GpDsRep>> {
    load_dir(dir, |p| load_gp(p))
}

fn load_dir<T>(dir: impl AsRef<Path>, load: impl Fn(&Path) -> Result<T>) -> Result<Vec<T>> {
    let mut paths: Vec<_> = fs::read_dir(dir.as_ref())?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| load(p).map_err(|e| Error::validation(format!("{}: {e}", p.display()))))
        .collect()
}

/// Placeholder connection stored at the hierarchy root.
pub fn root_connection() -> Connection {
    Connection::placeholder()
}

/// Convenience for building valid LP reps in one place: recomputes the
/// lp_size metadata from the length sum when the rep is unscaled.
pub fn finish_unscaled_lp(mut lp: LpDsRep) -> Result<LpDsRep> {
    lp.scaled = false;
    lp.lp_size = lp_size(&lp);
    lp.validate()?;
    Ok(lp)
}
