//! File formats: binary voxel grids, ASCII point files, B-Rep and
//! evaluation JSON, and a point-sample OBJ export.
//!
//! Grid files are little-endian with x varying fastest:
//!
//! | file | header | payload per voxel |
//! |------|--------|-------------------|
//! | `NVDU` | magic, `u32` version, `u32` r, 3 x `f64` origin, `f64` spacing | `f32` d, gx, gy, gz |
//! | `NVDB` | magic, `u32` version, `u32` r | `f32` probability |
//! | `NVDL` | magic, `u32` version, `u32` r | `u32` label |
//!
//! `NVDB` and `NVDL` carry no placement and are read onto the unit-box grid.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::brep::{BRepModel, BoolMatrix, Edge, Face};
use crate::geom::Vec3;
use crate::grid::{GridGeometry, VoxelGrid};
use crate::gt_voronoi::{BoundaryGrid, LabelGrid};
use crate::metrics::{sample_model, DetectionScores, MetricsError, TopoScores};
use crate::udf::{Normalization, UdfGrid, UdfSample};

pub const GRID_VERSION: u32 = 1;
pub const BREP_FORMAT: &str = "vorofit-brep";
pub const BREP_VERSION: u32 = 1;
pub const EVAL_FORMAT: &str = "vorofit-eval";
pub const EVAL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected magic {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("grid payload has {actual} bytes, expected {expected}")]
    Truncated { expected: usize, actual: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no points in input")]
    EmptyInput,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl IoError {
    /// Parse-type failures, as opposed to missing or unreadable files.
    pub fn is_parse(&self) -> bool {
        !matches!(self, IoError::File { .. } | IoError::Metrics(_))
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| IoError::Parse {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })
}

// Binary grids.

fn header(magic: &[u8; 4], r: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(&(r as u32).to_le_bytes());
    out
}

/// Little-endian cursor over a byte buffer.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(IoError::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32(&mut self) -> Result<f32, IoError> {
        Ok(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Checks magic and version, returns the resolution and a reader positioned
/// after the common header. The payload size is checked against
/// `header_rest + r^3 * voxel_bytes`.
fn open_grid<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    header_rest: usize,
    voxel_bytes: usize,
) -> Result<(usize, Reader<'a>), IoError> {
    let mut rd = Reader { bytes, pos: 0 };
    let found = rd.take(4).map_err(|_| IoError::BadMagic {
        expected: String::from_utf8_lossy(magic).into_owned(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if found != magic {
        return Err(IoError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    let version = rd.u32()?;
    if version != GRID_VERSION {
        return Err(IoError::Version {
            what: "grid",
            expected: GRID_VERSION,
            found: version,
        });
    }
    let r = rd.u32()? as usize;
    if r == 0 {
        return Err(IoError::SchemaMismatch("grid resolution is zero".into()));
    }
    let expected = r
        .checked_mul(r)
        .and_then(|x| x.checked_mul(r))
        .and_then(|x| x.checked_mul(voxel_bytes))
        .and_then(|x| x.checked_add(12 + header_rest))
        .ok_or_else(|| IoError::SchemaMismatch(format!("grid resolution {r} too large")))?;
    if bytes.len() != expected {
        return Err(IoError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok((r, rd))
}

pub fn encode_udf(udf: &UdfGrid) -> Vec<u8> {
    let g = udf.geometry();
    let mut out = header(b"NVDU", g.resolution);
    for o in g.origin {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&g.spacing.to_le_bytes());
    out.reserve(udf.values().len() * 16);
    for s in udf.values() {
        for v in [s.d, s.g[0], s.g[1], s.g[2]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_udf(bytes: &[u8]) -> Result<UdfGrid, IoError> {
    let (r, mut rd) = open_grid(bytes, b"NVDU", 32, 16)?;
    let origin = [rd.f64()?, rd.f64()?, rd.f64()?];
    let spacing = rd.f64()?;
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(IoError::SchemaMismatch(format!(
            "spacing {spacing} is not positive"
        )));
    }
    let geometry = GridGeometry {
        resolution: r,
        origin,
        spacing,
    };
    let mut values = Vec::with_capacity(geometry.len());
    for _ in 0..geometry.len() {
        values.push(UdfSample {
            d: rd.f32()?,
            g: [rd.f32()?, rd.f32()?, rd.f32()?],
        });
    }
    Ok(VoxelGrid::from_values(geometry, values).expect("sized by geometry"))
}

pub fn encode_boundary(b: &BoundaryGrid) -> Vec<u8> {
    let mut out = header(b"NVDB", b.resolution());
    out.reserve(b.values().len() * 4);
    for v in b.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_boundary(bytes: &[u8]) -> Result<BoundaryGrid, IoError> {
    let (r, mut rd) = open_grid(bytes, b"NVDB", 0, 4)?;
    let geometry = GridGeometry::unit(r);
    let values = (0..geometry.len())
        .map(|_| rd.f32())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VoxelGrid::from_values(geometry, values).expect("sized by geometry"))
}

pub fn encode_labels(l: &LabelGrid) -> Vec<u8> {
    let mut out = header(b"NVDL", l.resolution());
    out.reserve(l.values().len() * 4);
    for v in l.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelGrid, IoError> {
    let (r, mut rd) = open_grid(bytes, b"NVDL", 0, 4)?;
    let geometry = GridGeometry::unit(r);
    let values = (0..geometry.len())
        .map(|_| rd.u32())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VoxelGrid::from_values(geometry, values).expect("sized by geometry"))
}

pub fn save_udf(path: &Path, udf: &UdfGrid) -> Result<(), IoError> {
    write_file(path, &encode_udf(udf))
}

pub fn load_udf(path: &Path) -> Result<UdfGrid, IoError> {
    decode_udf(&read_file(path)?)
}

pub fn save_boundary(path: &Path, b: &BoundaryGrid) -> Result<(), IoError> {
    write_file(path, &encode_boundary(b))
}

pub fn load_boundary(path: &Path) -> Result<BoundaryGrid, IoError> {
    decode_boundary(&read_file(path)?)
}

pub fn save_labels(path: &Path, l: &LabelGrid) -> Result<(), IoError> {
    write_file(path, &encode_labels(l))
}

pub fn load_labels(path: &Path) -> Result<LabelGrid, IoError> {
    decode_labels(&read_file(path)?)
}

// Point files.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Present when every line carries six columns.
    pub normals: Option<Vec<Vec3>>,
}

/// Parses `x y z` or `x y z nx ny nz` lines. Blank lines and text after `#`
/// are ignored; all data lines must have the same column count.
pub fn parse_points(text: &str) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let data = raw.split('#').next().unwrap_or("").trim();
        if data.is_empty() {
            continue;
        }
        let vals = data
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| IoError::Parse {
                        line,
                        message: format!("{t:?} is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(IoError::Parse {
                line,
                message: format!("expected 3 or 6 values, found {}", vals.len()),
            });
        }
        match columns {
            None => columns = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(IoError::Parse {
                    line,
                    message: format!(
                        "expected {c} values like the first line, found {}",
                        vals.len()
                    ),
                })
            }
            _ => {}
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    let normals = (columns == Some(6)).then_some(normals);
    Ok(PointCloud { points, normals })
}

/// One point per line with shortest round-trip formatting.
pub fn format_points(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.points.len() * 48);
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = &cloud.normals {
            let _ = write!(out, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        out.push('\n');
    }
    out
}

pub fn load_points(path: &Path) -> Result<PointCloud, IoError> {
    parse_points(&read_text(path)?)
}

pub fn save_points(path: &Path, points: &[Vec3]) -> Result<(), IoError> {
    let cloud = PointCloud {
        points: points.to_vec(),
        normals: None,
    };
    write_file(path, format_points(&cloud).as_bytes())
}

// B-Rep JSON.

/// Boolean matrix as its shape and the index pairs of its true entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub shape: [usize; 2],
    pub pairs: Vec<[usize; 2]>,
}

impl SparseMatrix {
    pub fn from_matrix(m: &BoolMatrix) -> Self {
        SparseMatrix {
            shape: [m.rows(), m.cols()],
            pairs: m.ones(),
        }
    }

    pub fn to_matrix(&self, name: &str) -> Result<BoolMatrix, IoError> {
        BoolMatrix::from_pairs(self.shape[0], self.shape[1], &self.pairs).ok_or_else(|| {
            IoError::SchemaMismatch(format!(
                "{name} has an index pair outside its {}x{} shape",
                self.shape[0], self.shape[1]
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyJson {
    pub ff: SparseMatrix,
    pub fe: SparseMatrix,
    pub ee: SparseMatrix,
    pub ev: SparseMatrix,
    pub fv: SparseMatrix,
}

/// On-disk B-Rep document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRepDocument {
    pub format: String,
    pub version: u32,
    /// Map from input coordinates to the unit box the model lives in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    pub surfaces: Vec<Face>,
    pub curves: Vec<Edge>,
    pub vertices: Vec<[f64; 3]>,
    pub topology: TopologyJson,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl BRepDocument {
    pub fn new(
        model: &BRepModel,
        normalization: Option<Normalization>,
        warnings: Vec<String>,
    ) -> Self {
        BRepDocument {
            format: BREP_FORMAT.into(),
            version: BREP_VERSION,
            normalization,
            surfaces: model.surfaces.clone(),
            curves: model.curves.clone(),
            vertices: model.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            topology: TopologyJson {
                ff: SparseMatrix::from_matrix(&model.ff),
                fe: SparseMatrix::from_matrix(&model.fe),
                ee: SparseMatrix::from_matrix(&model.ee),
                ev: SparseMatrix::from_matrix(&model.ev),
                fv: SparseMatrix::from_matrix(&model.fv),
            },
            warnings,
        }
    }

    pub fn model(&self) -> Result<BRepModel, IoError> {
        let t = &self.topology;
        Ok(BRepModel {
            vertices: self.vertices.iter().map(|&v| Vec3::from(v)).collect(),
            curves: self.curves.clone(),
            surfaces: self.surfaces.clone(),
            ff: t.ff.to_matrix("ff")?,
            fe: t.fe.to_matrix("fe")?,
            ee: t.ee.to_matrix("ee")?,
            ev: t.ev.to_matrix("ev")?,
            fv: t.fv.to_matrix("fv")?,
        })
    }
}

fn check_header(value: &serde_json::Value, format: &str, version: u32) -> Result<(), IoError> {
    let found = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
    if found != format {
        return Err(IoError::SchemaMismatch(format!(
            "expected format {format:?}, found {found:?}"
        )));
    }
    let v = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if v != version as u64 {
        return Err(IoError::Version {
            what: "document",
            expected: version,
            found: v as u32,
        });
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn parse_brep(text: &str) -> Result<BRepDocument, IoError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_header(&value, BREP_FORMAT, BREP_VERSION)?;
    let doc: BRepDocument =
        serde_json::from_value(value).map_err(|e| IoError::SchemaMismatch(e.to_string()))?;
    doc.model()?;
    Ok(doc)
}

pub fn load_brep(path: &Path) -> Result<BRepDocument, IoError> {
    parse_brep(&read_text(path)?)
}

pub fn save_brep(path: &Path, doc: &BRepDocument) -> Result<(), IoError> {
    write_file(path, to_json(doc).as_bytes())
}

// Evaluation JSON.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassChamfer {
    pub vertex: Option<f64>,
    pub curve: Option<f64>,
    pub surface: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub format: String,
    pub version: u32,
    pub chamfer: ClassChamfer,
    pub detection: DetectionScores,
    pub topology: TopoScores,
}

pub fn parse_eval(text: &str) -> Result<EvalDocument, IoError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_header(&value, EVAL_FORMAT, EVAL_VERSION)?;
    serde_json::from_value(value).map_err(|e| IoError::SchemaMismatch(e.to_string()))
}

// OBJ export.

/// Point samples of every element as OBJ vertices, one named object per
/// element. For visual inspection only.
pub fn format_obj(
    model: &BRepModel,
    surface_density: f64,
    curve_density: f64,
) -> Result<String, IoError> {
    let samples = sample_model(model, surface_density, curve_density)?;
    let mut out = String::new();
    for (name, sets) in [
        ("surface", &samples.surfaces),
        ("curve", &samples.curves),
        ("vertex", &samples.vertices),
    ] {
        for (i, set) in sets.iter().enumerate() {
            let _ = writeln!(out, "o {name}_{i}");
            for p in set {
                let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes;
    use crate::udf::udf_on_grid;

    fn small_udf() -> UdfGrid {
        let pts = vec![Vec3::new(0.2, 0.3, 0.4), Vec3::new(0.7, 0.6, 0.5)];
        udf_on_grid(&pts, GridGeometry::unit(8)).unwrap()
    }

    #[test]
    fn udf_round_trip_is_bit_identical() {
        let udf = small_udf();
        let bytes = encode_udf(&udf);
        assert_eq!(bytes.len(), 44 + 512 * 16);
        assert_eq!(&bytes[0..4], b"NVDU");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        let back = decode_udf(&bytes).unwrap();
        assert_eq!(encode_udf(&back), bytes);
        assert_eq!(back.geometry(), udf.geometry());
    }

    #[test]
    fn boundary_and_label_round_trips() {
        let g = GridGeometry::unit(4);
        let b: BoundaryGrid = VoxelGrid::from_fn(g, |i| (i % 3) as f32 / 2.0);
        assert_eq!(decode_boundary(&encode_boundary(&b)).unwrap(), b);
        let l: LabelGrid = VoxelGrid::from_fn(g, |i| (i * 7) as u32);
        assert_eq!(decode_labels(&encode_labels(&l)).unwrap(), l);
    }

    #[test]
    fn grid_header_errors() {
        let l: LabelGrid = VoxelGrid::filled(GridGeometry::unit(2), 1);
        let bytes = encode_labels(&l);
        assert!(matches!(
            decode_boundary(&bytes),
            Err(IoError::BadMagic { .. })
        ));
        assert!(matches!(
            decode_labels(&bytes[..bytes.len() - 1]),
            Err(IoError::Truncated { .. })
        ));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            decode_labels(&v2),
            Err(IoError::Version { found: 2, .. })
        ));
        assert!(matches!(
            decode_labels(b"NV"),
            Err(IoError::BadMagic { .. })
        ));
    }

    #[test]
    fn points_with_comments_and_normals() {
        let c = parse_points("# header\n0 0 0 0 0 1\n\n1 2 3 0 1 0 # trailing\n").unwrap();
        assert_eq!(c.points, vec![Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.normals.unwrap()[1], Vec3::y());
        let plain = parse_points("0.5 0.25 1e-3\n").unwrap();
        assert!(plain.normals.is_none());
    }

    #[test]
    fn malformed_point_line_reports_its_number() {
        match parse_points("0 0 0\na b\n") {
            Err(IoError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_points("0 0 0\n1 1\n"),
            Err(IoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_points("0 0 0\n1 1 1 0 0 1\n"),
            Err(IoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_points("nan 0 0\n"),
            Err(IoError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn point_text_round_trip() {
        let c = PointCloud {
            points: vec![Vec3::new(0.1, 1.0 / 3.0, -2.5e-7)],
            normals: Some(vec![Vec3::new(0.0, 0.6, 0.8)]),
        };
        assert_eq!(parse_points(&format_points(&c)).unwrap(), c);
    }

    #[test]
    fn brep_round_trip() {
        let m = scenes::cube(0.01).gt;
        let doc = BRepDocument::new(&m, Some(Normalization::IDENTITY), vec!["note".into()]);
        let text = to_json(&doc);
        let back = parse_brep(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.model().unwrap(), m);
        assert_eq!(to_json(&back), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["surfaces"][0]["type"], "plane");
        assert_eq!(v["topology"]["fe"]["shape"], serde_json::json!([6, 12]));
    }

    #[test]
    fn brep_schema_errors() {
        let doc = BRepDocument::new(&BRepModel::empty(), None, Vec::new());
        let mut v = serde_json::to_value(&doc).unwrap();
        v["format"] = "other".into();
        assert!(matches!(
            parse_brep(&v.to_string()),
            Err(IoError::SchemaMismatch(_))
        ));
        v["format"] = BREP_FORMAT.into();
        v["version"] = 9.into();
        assert!(matches!(
            parse_brep(&v.to_string()),
            Err(IoError::Version { found: 9, .. })
        ));
        v["version"] = 1.into();
        v["topology"]["ev"]["pairs"] = serde_json::json!([[0, 3]]);
        assert!(matches!(
            parse_brep(&v.to_string()),
            Err(IoError::SchemaMismatch(_))
        ));
        assert!(matches!(parse_brep("{"), Err(IoError::Json(_))));
    }

    #[test]
    fn obj_lists_every_element() {
        let m = scenes::cube(0.01).gt;
        let obj = format_obj(&m, 400.0, 100.0).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("o ")).count(), 26);
    }
}
