//! Subcommand implementations behind the `vorofit` binary: manifests, stage
//! runners and exit codes.
//!
//! Relative paths inside a manifest resolve against the manifest's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cells::{assign_points, cell_adjacency, VoronoiCells, NONE};
use crate::config::{Config, ConfigError, TOPOLOGY_MATCH_THRESHOLD};
use crate::detect::{detect_analytic, detect_tiled, ingest_external, DetectorParams, PatchSpec};
use crate::fitting::CellFit;
use crate::geom::Vec3;
use crate::grid::GridGeometry;
use crate::grid::VoxelGrid;
use crate::gt_voronoi::{boundary_from_labels, flags, BoundaryGrid};
use crate::io::{self, BRepDocument, ClassChamfer, EvalDocument, IoError, SparseMatrix};
use crate::metrics::{
    class_chamfer, detection_scores, sample_model, topo_f1, CURVE_DENSITY, SURFACE_DENSITY,
};
use crate::pipeline::{fit_cells, run_from_boundary, Stage, StageError};
use crate::scenes;
use crate::udf::{udf_from_primitive_samples_on, udf_on_grid, Normalization, UdfGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOPOLOGY: i32 = 2;
pub const EXIT_STAGE: i32 = 3;

pub const MANIFEST_VERSION: u32 = 1;
/// Largest side of the normalized bounding box of out-of-box inputs.
pub const NORMALIZE_FILL: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Stage(#[from] StageError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage(_) => EXIT_STAGE,
            _ => EXIT_USAGE,
        }
    }
}

/// Command-line values that override [`Config`] fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub resolution: Option<usize>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(r) = self.resolution {
            cfg.resolution = r;
        }
        if let Some(v) = self.eps1 {
            cfg.eps1 = v;
        }
        if let Some(v) = self.eps2 {
            cfg.eps2 = v;
        }
        if let Some(v) = self.eps3 {
            cfg.eps3 = v;
        }
        if let Some(v) = self.tau {
            cfg.detect_tau = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }

    /// Defaults with the overrides applied, validated.
    pub fn config(&self) -> Result<Config, CliError> {
        let mut cfg = Config::default();
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = String::from_utf8(io::read_file(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    Ok(io::write_file(path, io::to_json(value).as_bytes())?)
}

/// Identity when every point lies in the unit box, otherwise the map that
/// centers the points with largest side [`NORMALIZE_FILL`].
pub fn auto_normalization(points: &[Vec3]) -> Normalization {
    if points
        .iter()
        .all(|p| p.iter().all(|c| (0.0..=1.0).contains(c)))
    {
        Normalization::IDENTITY
    } else {
        Normalization::fit(points, NORMALIZE_FILL)
    }
}

fn load_normalized_points(path: &Path) -> Result<(Vec<Vec3>, Normalization), CliError> {
    let cloud = io::load_points(path)?;
    if cloud.points.is_empty() {
        return Err(IoError::EmptyInput.into());
    }
    let n = auto_normalization(&cloud.points);
    Ok((cloud.points.iter().map(|p| n.apply(p)).collect(), n))
}

fn unit_udf(points: &[Vec3], r: usize) -> Result<UdfGrid, CliError> {
    udf_on_grid(points, GridGeometry::unit(r)).map_err(|e| StageError::new(Stage::Udf, e).into())
}

/// Analytic detection, tiled unless `whole`.
pub fn detect_boundary(
    udf: &UdfGrid,
    cfg: &Config,
    whole: bool,
) -> Result<BoundaryGrid, StageError> {
    let params = DetectorParams::from_config(cfg);
    let err = |e| StageError::new(Stage::Detect, e);
    if whole {
        detect_analytic(udf, &params).map_err(err)
    } else {
        let spec =
            PatchSpec::new(udf.resolution(), cfg.patch_stride, cfg.patch_size).map_err(err)?;
        detect_tiled(udf, &params, &spec).map_err(err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UdfSummary {
    pub resolution: usize,
    pub points: usize,
    pub normalization: Normalization,
}

pub fn cmd_udf(input: &Path, output: &Path, cfg: &Config) -> Result<UdfSummary, CliError> {
    let (points, normalization) = load_normalized_points(input)?;
    let udf = unit_udf(&points, cfg.resolution)?;
    io::save_udf(output, &udf)?;
    Ok(UdfSummary {
        resolution: cfg.resolution,
        points: points.len(),
        normalization,
    })
}

/// Ground-truth manifest: one point file per primitive; the label of a
/// voxel is the index of the file holding its nearest sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtManifest {
    pub version: u32,
    pub primitives: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GtSummary {
    pub labels_present: usize,
    pub boundary_voxels: usize,
}

/// Writes `labels.nvdl`, `boundary.nvdb` and `udf.nvdu` into `out_dir`.
/// Samples are used as given, without normalization.
pub fn cmd_gt(manifest: &Path, out_dir: &Path, cfg: &Config) -> Result<GtSummary, CliError> {
    let m: GtManifest = read_json(manifest)?;
    if m.version != MANIFEST_VERSION {
        return Err(CliError::Usage(format!(
            "unsupported manifest version {}",
            m.version
        )));
    }
    if m.primitives.is_empty() {
        return Err(CliError::Usage("manifest lists no primitives".into()));
    }
    let base = manifest_dir(manifest);
    let sets = m
        .primitives
        .iter()
        .map(|p| io::load_points(&resolve(&base, p)).map(|c| c.points))
        .collect::<Result<Vec<_>, _>>()?;
    if sets.iter().any(Vec::is_empty) {
        return Err(IoError::EmptyInput.into());
    }
    let (udf, labels) = udf_from_primitive_samples_on(&sets, GridGeometry::unit(cfg.resolution))
        .map_err(|e| StageError::new(Stage::Udf, e))?;
    let boundary = boundary_from_labels(&labels);
    io::save_labels(&out_dir.join("labels.nvdl"), &labels)?;
    io::save_boundary(&out_dir.join("boundary.nvdb"), &boundary)?;
    io::save_udf(&out_dir.join("udf.nvdu"), &udf)?;
    let present: std::collections::BTreeSet<u32> = labels.values().iter().copied().collect();
    Ok(GtSummary {
        labels_present: present.len(),
        boundary_voxels: flags(&boundary).iter().filter(|&&f| f).count(),
    })
}

/// Writes the analytic boundary of a stored UDF; returns the flagged count.
pub fn cmd_detect(
    udf_path: &Path,
    output: &Path,
    cfg: &Config,
    whole: bool,
) -> Result<usize, CliError> {
    let udf = io::load_udf(udf_path)?;
    let cfg = Config {
        resolution: udf.resolution(),
        ..cfg.clone()
    };
    let boundary = detect_boundary(&udf, &cfg, whole)?;
    io::save_boundary(output, &boundary)?;
    Ok(flags(&boundary).iter().filter(|&&f| f).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellsSummary {
    pub n_cells: usize,
    pub voxel_counts: Vec<usize>,
    pub adjacency: SparseMatrix,
}

/// Hole filling and region growing. Writes `cells.nvdl` (cell id per voxel,
/// `u32::MAX` on boundary voxels) and `cells.json`.
pub fn cmd_cells(
    udf_path: &Path,
    boundary_path: &Path,
    out_dir: &Path,
    cfg: &Config,
) -> Result<CellsSummary, CliError> {
    let udf = io::load_udf(udf_path)?;
    let boundary = ingest_external(io::load_boundary(boundary_path)?, udf.resolution())
        .map_err(|e| StageError::new(Stage::Detect, e))?;
    let filled = crate::cells::fill_holes(&boundary, &udf, cfg.hole_fill_steps, cfg.d_max)
        .map_err(|e| StageError::new(Stage::FillHoles, e))?;
    let cells = crate::cells::grow_regions(&filled, cfg.min_cell_voxels)
        .map_err(|e| StageError::new(Stage::GrowRegions, e))?;
    io::save_labels(&out_dir.join("cells.nvdl"), &cells.cell_of)?;
    let summary = CellsSummary {
        n_cells: cells.n_cells,
        voxel_counts: cells.voxels.iter().map(Vec::len).collect(),
        adjacency: SparseMatrix::from_matrix(&cells.adjacency),
    };
    write_json(&out_dir.join("cells.json"), &summary)?;
    Ok(summary)
}

/// Rebuilds cells from a stored cell-id grid.
pub fn cells_from_ids(cell_of: VoxelGrid<u32>) -> VoronoiCells {
    let n = cell_of
        .values()
        .iter()
        .filter(|&&c| c != NONE)
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let mut voxels = vec![Vec::new(); n];
    for (i, &c) in cell_of.values().iter().enumerate() {
        if c != NONE {
            voxels[c as usize].push(i);
        }
    }
    let boundary: BoundaryGrid = cell_of.map(|&c| if c == NONE { 1.0 } else { 0.0 });
    let mut cells = VoronoiCells {
        cell_of,
        n_cells: n,
        adjacency: crate::brep::BoolMatrix::new(n, n),
        voxels,
    };
    cells.adjacency = cell_adjacency(&cells, &boundary);
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFitRecord {
    pub cell: usize,
    pub points: usize,
    pub degenerate: bool,
    pub fit: CellFit,
}

/// Fits every cell of a stored cell grid; `points` are input samples in
/// unit-box coordinates, otherwise voxel foot points are fitted.
pub fn cmd_fit(
    udf_path: &Path,
    cells_path: &Path,
    points: Option<&Path>,
    output: &Path,
    cfg: &Config,
) -> Result<Vec<CellFitRecord>, CliError> {
    let udf = io::load_udf(udf_path)?;
    let cells = cells_from_ids(io::load_labels(cells_path)?);
    if cells.cell_of.resolution() != udf.resolution() {
        return Err(CliError::Usage(format!(
            "cell grid resolution {} differs from UDF resolution {}",
            cells.cell_of.resolution(),
            udf.resolution()
        )));
    }
    let pts = points.map(io::load_points).transpose()?.map(|c| c.points);
    let cp = assign_points(&cells, &udf, pts.as_deref())
        .map_err(|e| StageError::new(Stage::AssignPoints, e))?;
    let fits = fit_cells(&cp, cfg);
    let records: Vec<CellFitRecord> = fits
        .into_iter()
        .enumerate()
        .map(|(c, fit)| CellFitRecord {
            cell: c,
            points: cp.points[c].len(),
            degenerate: cp.degenerate[c],
            fit,
        })
        .collect();
    write_json(output, &records)?;
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// ASCII point file; the UDF is computed from it.
    Points,
    /// `NVDL` label grid whose label interfaces give the boundary; needs
    /// `points` for the UDF.
    Labels,
    /// `NVDU` distance field; `points` optional.
    UdfGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub kind: InputKind,
    pub path: PathBuf,
}

/// Boundary source besides a label input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub analytic: bool,
    /// Run the analytic detector on the whole grid instead of patches.
    #[serde(default)]
    pub whole_grid: bool,
    /// `NVDB` probability grid from an external predictor.
    #[serde(default)]
    pub external: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub version: u32,
    pub input: InputSpec,
    /// Samples fitted per cell, for label and UDF inputs.
    #[serde(default)]
    pub points: Option<PathBuf>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub config: Config,
    pub output_dir: PathBuf,
}

impl PipelineManifest {
    /// Exactly one boundary source: a label input, the analytic detector
    /// or an external grid.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != MANIFEST_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        let sources = [
            self.input.kind == InputKind::Labels,
            self.boundary.analytic,
            self.boundary.external.is_some(),
        ];
        let n = sources.iter().filter(|&&s| s).count();
        if n != 1 {
            return Err(CliError::Usage(format!(
                "exactly one boundary source (label input, analytic or external) must be selected, found {n}"
            )));
        }
        if self.input.kind == InputKind::Labels && self.points.is_none() {
            return Err(CliError::Usage("label input needs a points file".into()));
        }
        if self.input.kind == InputKind::Points && self.points.is_some() {
            return Err(CliError::Usage(
                "points input already provides the samples".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub output_dir: PathBuf,
    pub n_cells: usize,
    pub counts: (usize, usize, usize),
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() {
            EXIT_OK
        } else {
            EXIT_TOPOLOGY
        }
    }
}

/// Runs the manifest. Writes `brep.json`, `fits.json`, `udf.nvdu`,
/// `boundary.nvdb` (after hole filling) and `cells.nvdl` into the output
/// directory. Topology violations are reported, not raised.
pub fn cmd_pipeline(
    manifest_path: &Path,
    overrides: &ConfigOverrides,
) -> Result<PipelineReport, CliError> {
    let m: PipelineManifest = read_json(manifest_path)?;
    m.validate()?;
    let base = manifest_dir(manifest_path);
    let mut cfg = m.config.clone();
    overrides.apply(&mut cfg);
    let input = resolve(&base, &m.input.path);
    let extra_points = m
        .points
        .as_ref()
        .map(|p| io::load_points(&resolve(&base, p)).map(|c| c.points))
        .transpose()?;
    let (udf, points, normalization, label_boundary) = match m.input.kind {
        InputKind::Points => {
            cfg.validate()?;
            let (pts, n) = load_normalized_points(&input)?;
            (unit_udf(&pts, cfg.resolution)?, Some(pts), n, None)
        }
        InputKind::Labels => {
            let labels = io::load_labels(&input)?;
            cfg.resolution = labels.resolution();
            cfg.validate()?;
            let pts = extra_points.expect("validated");
            if pts.is_empty() {
                return Err(IoError::EmptyInput.into());
            }
            let udf = unit_udf(&pts, cfg.resolution)?;
            (
                udf,
                Some(pts),
                Normalization::IDENTITY,
                Some(boundary_from_labels(&labels)),
            )
        }
        InputKind::UdfGrid => {
            let udf = io::load_udf(&input)?;
            cfg.resolution = udf.resolution();
            cfg.validate()?;
            (udf, extra_points, Normalization::IDENTITY, None)
        }
    };
    let boundary = match (label_boundary, &m.boundary.external) {
        (Some(b), _) => b,
        (None, Some(path)) => {
            ingest_external(io::load_boundary(&resolve(&base, path))?, udf.resolution())
                .map_err(|e| StageError::new(Stage::Detect, e))?
        }
        (None, None) => detect_boundary(&udf, &cfg, m.boundary.whole_grid)?,
    };
    let out = run_from_boundary(&udf, &boundary, points.as_deref(), &cfg)?;
    let out_dir = resolve(&base, &m.output_dir);
    io::save_udf(&out_dir.join("udf.nvdu"), &udf)?;
    io::save_boundary(&out_dir.join("boundary.nvdb"), &out.boundary)?;
    io::save_labels(&out_dir.join("cells.nvdl"), &out.cells.cell_of)?;
    let records: Vec<CellFitRecord> = out
        .fits
        .iter()
        .enumerate()
        .map(|(c, fit)| CellFitRecord {
            cell: c,
            points: out.cell_points.points[c].len(),
            degenerate: out.cell_points.degenerate[c],
            fit: fit.clone(),
        })
        .collect();
    write_json(&out_dir.join("fits.json"), &records)?;
    let warnings = out.recovered.warnings.clone();
    let doc = BRepDocument::new(&out.recovered.model, Some(normalization), warnings.clone());
    io::save_brep(&out_dir.join("brep.json"), &doc)?;
    Ok(PipelineReport {
        output_dir: out_dir,
        n_cells: out.cells.n_cells,
        counts: out.recovered.model.counts(),
        warnings,
    })
}

/// Scores `pred` against `gt` and writes the evaluation document.
pub fn cmd_eval(
    pred: &Path,
    gt: &Path,
    output: Option<&Path>,
    cfg: &Config,
) -> Result<EvalDocument, CliError> {
    let pm = io::load_brep(pred)?.model()?;
    let gm = io::load_brep(gt)?.model()?;
    let ps = sample_model(&pm, SURFACE_DENSITY, CURVE_DENSITY).map_err(IoError::from)?;
    let gs = sample_model(&gm, SURFACE_DENSITY, CURVE_DENSITY).map_err(IoError::from)?;
    let mut thresholds = cfg.match_thresholds.clone();
    if !thresholds.contains(&TOPOLOGY_MATCH_THRESHOLD) {
        thresholds.push(TOPOLOGY_MATCH_THRESHOLD);
    }
    let detection = detection_scores(&ps, &gs, &thresholds);
    let topology = topo_f1(
        &pm,
        &gm,
        detection
            .at(TOPOLOGY_MATCH_THRESHOLD)
            .expect("threshold present"),
    );
    let doc = EvalDocument {
        format: io::EVAL_FORMAT.into(),
        version: io::EVAL_VERSION,
        chamfer: ClassChamfer {
            vertex: class_chamfer(&ps.vertices, &gs.vertices),
            curve: class_chamfer(&ps.curves, &gs.curves),
            surface: class_chamfer(&ps.surfaces, &gs.surfaces),
        },
        detection,
        topology,
    };
    if let Some(path) = output {
        write_json(path, &doc)?;
    }
    Ok(doc)
}

/// Point-sample OBJ of a stored model.
pub fn cmd_obj(brep: &Path, output: &Path) -> Result<(), CliError> {
    let m = io::load_brep(brep)?.model()?;
    let text = io::format_obj(&m, SURFACE_DENSITY / 10.0, CURVE_DENSITY / 10.0)?;
    Ok(io::write_file(output, text.as_bytes())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneFiles {
    pub points: PathBuf,
    pub gt_manifest: PathBuf,
    pub gt_brep: PathBuf,
    pub pipeline_gt: PathBuf,
    pub pipeline_detect: PathBuf,
}

/// Writes a synthetic scene: `points.xyz`, one file per primitive under
/// `primitives/`, `gt.json` (ground-truth manifest), `gt_brep.json`, the
/// ground-truth grids under `gt/`, and two pipeline manifests: one on the
/// ground-truth labels (`pipeline_gt.json`) and one with the analytic
/// detector (`pipeline.json`).
pub fn cmd_scene(
    name: &str,
    out_dir: &Path,
    cfg: &Config,
    sigma: f64,
    noise_seed: u64,
) -> Result<SceneFiles, CliError> {
    let mut scene =
        scenes::by_name(name, scenes::default_step(cfg.resolution)).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown scene {name:?}; known: {}",
                scenes::SCENE_NAMES.join(", ")
            ))
        })?;
    if sigma > 0.0 {
        scene = scene.with_noise(sigma, noise_seed);
    }
    let mut prims = Vec::new();
    for (i, set) in scene.sample_sets.iter().enumerate() {
        let rel = PathBuf::from(format!("primitives/{i:03}.xyz"));
        io::save_points(&out_dir.join(&rel), set)?;
        prims.push(rel);
    }
    let files = SceneFiles {
        points: out_dir.join("points.xyz"),
        gt_manifest: out_dir.join("gt.json"),
        gt_brep: out_dir.join("gt_brep.json"),
        pipeline_gt: out_dir.join("pipeline_gt.json"),
        pipeline_detect: out_dir.join("pipeline.json"),
    };
    io::save_points(&files.points, &scene.all_points())?;
    write_json(
        &files.gt_manifest,
        &GtManifest {
            version: MANIFEST_VERSION,
            primitives: prims,
        },
    )?;
    io::save_brep(
        &files.gt_brep,
        &BRepDocument::new(&scene.gt, None, Vec::new()),
    )?;
    cmd_gt(&files.gt_manifest, &out_dir.join("gt"), cfg)?;
    let manifest = |input: InputSpec,
                    points: Option<PathBuf>,
                    boundary: BoundarySpec,
                    out: &str| PipelineManifest {
        version: MANIFEST_VERSION,
        input,
        points,
        boundary,
        config: cfg.clone(),
        output_dir: PathBuf::from(out),
    };
    write_json(
        &files.pipeline_gt,
        &manifest(
            InputSpec {
                kind: InputKind::Labels,
                path: "gt/labels.nvdl".into(),
            },
            Some("points.xyz".into()),
            BoundarySpec::default(),
            "out_gt",
        ),
    )?;
    write_json(
        &files.pipeline_detect,
        &manifest(
            InputSpec {
                kind: InputKind::Points,
                path: "points.xyz".into(),
            },
            None,
            BoundarySpec {
                analytic: true,
                ..BoundarySpec::default()
            },
            "out",
        ),
    )?;
    Ok(files)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_manifest() -> PipelineManifest {
        PipelineManifest {
            version: 1,
            input: InputSpec {
                kind: InputKind::Labels,
                path: "l.nvdl".into(),
            },
            points: Some("p.xyz".into()),
            boundary: BoundarySpec::default(),
            config: Config::default(),
            output_dir: "out".into(),
        }
    }

    #[test]
    fn manifest_needs_exactly_one_boundary_source() {
        labels_manifest().validate().unwrap();
        let mut both = labels_manifest();
        both.input.kind = InputKind::UdfGrid;
        both.boundary.analytic = true;
        both.boundary.external = Some("b.nvdb".into());
        assert!(matches!(both.validate(), Err(CliError::Usage(m)) if m.contains("found 2")));
        let mut none = labels_manifest();
        none.input.kind = InputKind::UdfGrid;
        assert!(matches!(none.validate(), Err(CliError::Usage(m)) if m.contains("found 0")));
        let mut extra = labels_manifest();
        extra.boundary.analytic = true;
        assert!(extra.validate().is_err());
    }

    #[test]
    fn manifest_json_defaults() {
        let m: PipelineManifest = serde_json::from_str(
            r#"{"version":1,"input":{"kind":"points","path":"p.xyz"},"boundary":{"analytic":true},"config":{"eps1":0.002},"output_dir":"o"}"#,
        )
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.config.eps1, 0.002);
        assert_eq!(m.config.eps2, 0.02);
        assert!(serde_json::from_str::<PipelineManifest>(
            r#"{"version":1,"input":{"kind":"points","path":"p"},"output_dir":"o","typo":1}"#
        )
        .is_err());
    }

    #[test]
    fn overrides_apply_and_validate() {
        let o = ConfigOverrides {
            eps1: Some(0.03),
            ..Default::default()
        };
        assert!(matches!(o.config(), Err(CliError::Config(_))));
        let o = ConfigOverrides {
            resolution: Some(32),
            tau: Some(5.0),
            seed: Some(7),
            ..Default::default()
        };
        let c = o.config().unwrap();
        assert_eq!((c.resolution, c.detect_tau, c.seed), (32, Some(5.0), 7));
    }

    #[test]
    fn out_of_box_points_are_normalized() {
        assert_eq!(
            auto_normalization(&[Vec3::new(0.2, 0.3, 0.4)]),
            Normalization::IDENTITY
        );
        let n = auto_normalization(&[Vec3::new(-5.0, 0.0, 0.0), Vec3::new(5.0, 2.0, 1.0)]);
        let a = n.apply(&Vec3::new(-5.0, 0.0, 0.0));
        let b = n.apply(&Vec3::new(5.0, 2.0, 1.0));
        assert!(((b - a).x - NORMALIZE_FILL).abs() < 1e-12);
        assert!(((a + b) / 2.0 - Vec3::repeat(0.5)).norm() < 1e-12);
    }

    #[test]
    fn cells_round_trip_through_ids() {
        let g = GridGeometry::unit(4);
        let ids = VoxelGrid::from_fn(g, |i| if i % 4 == 0 { NONE } else { (i / 32) as u32 });
        let cells = cells_from_ids(ids.clone());
        assert_eq!(cells.n_cells, 2);
        assert_eq!(cells.voxels[0].len() + cells.voxels[1].len(), 48);
        assert!(cells.adjacency.get(0, 1));
        assert_eq!(cells.cell_of, ids);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::Stage(StageError::new(Stage::Fit, "x")).exit_code(),
            EXIT_STAGE
        );
        let r = PipelineReport {
            output_dir: PathBuf::new(),
            n_cells: 0,
            counts: (0, 0, 0),
            warnings: vec!["w".into()],
        };
        assert_eq!(r.exit_code(), EXIT_TOPOLOGY);
    }
}
