use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_from, image_rng, sample_augmentation_vector, AugmentationConfig, SensorSimulator};
use crate::geometry::TriangleMesh;
use crate::obj::load_mesh;
use crate::patch::{foreground_mask, DepthPatch};
use crate::renderer::{render_views, RenderConfig, RenderedView};
use crate::viewsphere::{generate_viewpoints, Symmetry, ViewSphereConfig};

use super::tensor::{read_tensor, write_mask, write_tensor};
use super::DatapackError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const CLEAN_DIR: &str = "clean";
const AUGMENTED_DIR: &str = "augmented";
const MASK_DIR: &str = "mask";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// Wavefront OBJ file; relative paths resolve against the config's base directory.
    pub mesh: PathBuf,
    pub class_id: u32,
    /// Overrides the view sphere's symmetry for this object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<Symmetry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputFlags {
    pub augmented: bool,
    pub mask: bool,
}

impl Default for OutputFlags {
    fn default() -> Self {
        Self {
            augmented: true,
            mask: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub master_seed: u64,
    pub objects: Vec<ObjectSpec>,
    pub viewsphere: ViewSphereConfig,
    pub render: RenderConfig,
    pub augmentation: AugmentationConfig,
    pub outputs: OutputFlags,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            name: "synthdepth".into(),
            master_seed: 0,
            objects: Vec::new(),
            viewsphere: ViewSphereConfig::default(),
            render: RenderConfig::default(),
            augmentation: AugmentationConfig::default(),
            outputs: OutputFlags::default(),
        }
    }
}

impl DatasetConfig {
    pub fn from_json(text: &str) -> Result<Self, DatapackError> {
        serde_json::from_str(text).map_err(|e| DatapackError::Config(e.to_string()))
    }

    /// Augmentation config with the patch size taken from the render config.
    pub fn effective_augmentation(&self) -> AugmentationConfig {
        AugmentationConfig {
            patch_width: self.render.size,
            patch_height: self.render.size,
            ..self.augmentation.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DatapackError> {
        let cfg = |e: &dyn std::fmt::Display| DatapackError::Config(e.to_string());
        self.viewsphere.validate().map_err(|e| cfg(&e))?;
        self.render.validate().map_err(|e| cfg(&e))?;
        self.effective_augmentation().validate().map_err(|e| cfg(&e))?;
        if self.objects.is_empty() {
            return Err(DatapackError::Config("no objects listed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// The object is not visible in the rendered patch.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: u64,
    pub object_index: usize,
    pub class_id: u32,
    /// Object rotation in the camera frame, `(w, x, y, z)`.
    pub pose: [f64; 4],
    pub vertex_index: usize,
    pub in_plane_deg: f64,
    pub clean: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    pub object_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub master_seed: u64,
    pub objects: Vec<ObjectSpec>,
    pub viewsphere: ViewSphereConfig,
    pub render: RenderConfig,
    pub augmentation: AugmentationConfig,
    pub records: Vec<Record>,
    /// Set when some records could not be produced; see `failures`.
    pub partial: bool,
    #[serde(default)]
    pub failures: Vec<Failure>,
}

pub struct GenerateOptions<'a> {
    pub out_dir: PathBuf,
    /// Directory that relative mesh paths are resolved against.
    pub base_dir: PathBuf,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub sensor: Option<&'a dyn SensorSimulator>,
}

impl GenerateOptions<'_> {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            base_dir: PathBuf::from("."),
            workers: 0,
            sensor: None,
        }
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, DatapackError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DatapackError::Config(format!("thread pool: {e}")))
}

fn rel_path(dir: &str, id: u64) -> String {
    format!("{dir}/{id:06}.dpz")
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<(), String> {
    let path = root.join(rel);
    fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), DatapackError> {
    let mut text = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    text.push(b'\n');
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let path = dir.join(MANIFEST_FILE);
    fs::write(&tmp, &text).map_err(|e| DatapackError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| DatapackError::io(&path, e))
}

fn create_dirs(root: &Path, outputs: OutputFlags, clean: bool) -> Result<(), DatapackError> {
    let dirs = [
        (CLEAN_DIR, clean),
        (AUGMENTED_DIR, outputs.augmented),
        (MASK_DIR, outputs.mask),
    ];
    for (dir, on) in dirs {
        if on {
            let path = root.join(dir);
            fs::create_dir_all(&path).map_err(|e| DatapackError::io(&path, e))?;
        }
    }
    Ok(())
}

struct ItemContext<'a> {
    root: &'a Path,
    master_seed: u64,
    augmentation: &'a AugmentationConfig,
    outputs: OutputFlags,
    sensor: Option<&'a dyn SensorSimulator>,
}

impl ItemContext<'_> {
    /// Writes the augmented and mask files of one record.
    fn emit_derived(
        &self,
        id: u64,
        clean: &DepthPatch<f32>,
        simulate: impl FnOnce(&DepthPatch<f32>) -> Result<DepthPatch<f32>, String>,
        record: &mut Record,
    ) -> Result<(), String> {
        if self.outputs.augmented {
            let z = sample_augmentation_vector(self.augmentation, &mut image_rng(self.master_seed, id));
            let start = if z.sensor { simulate(clean)? } else { clean.clone() };
            let pair = augment_from(clean, &start, &z).map_err(|e| e.to_string())?;
            let rel = rel_path(AUGMENTED_DIR, id);
            write_file(self.root, &rel, &write_tensor(&pair.augmented).map_err(|e| e.to_string())?)?;
            record.augmented = Some(rel);
        }
        if self.outputs.mask {
            let rel = rel_path(MASK_DIR, id);
            write_file(self.root, &rel, &write_mask(&foreground_mask(clean)).map_err(|e| e.to_string())?)?;
            record.mask = Some(rel);
        }
        Ok(())
    }
}

fn collect(
    results: Vec<Result<Record, Failure>>,
    records: &mut Vec<Record>,
    failures: &mut Vec<Failure>,
) {
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => {
                warn!("record {:?}: {}", f.id, f.message);
                failures.push(f);
            }
        }
    }
}

/// Renders every object from every viewpoint and writes the tensors and manifest to
/// `opts.out_dir`. Item failures are collected into the manifest, which is then flagged
/// partial. Output bytes depend only on the config, never on `opts.workers`.
pub fn generate_dataset(cfg: &DatasetConfig, opts: &GenerateOptions<'_>) -> Result<Manifest, DatapackError> {
    cfg.validate()?;
    let augmentation = cfg.effective_augmentation();
    if cfg.outputs.augmented && augmentation.stages.sensor && opts.sensor.is_none() {
        return Err(DatapackError::Config(
            "sensor stage enabled but no simulator is available".into(),
        ));
    }
    let pool = thread_pool(opts.workers)?;
    let root = opts.out_dir.as_path();
    create_dirs(root, cfg.outputs, true)?;
    let ctx = ItemContext {
        root,
        master_seed: cfg.master_seed,
        augmentation: &augmentation,
        outputs: cfg.outputs,
        sensor: opts.sensor,
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut next_id = 0u64;
    for (object_index, object) in cfg.objects.iter().enumerate() {
        let vs = ViewSphereConfig {
            symmetry: object.symmetry.unwrap_or(cfg.viewsphere.symmetry),
            ..cfg.viewsphere.clone()
        };
        let viewpoints = generate_viewpoints::<f64>(&vs).map_err(|e| DatapackError::Config(e.to_string()))?;
        let first_id = next_id;
        next_id += viewpoints.len() as u64;

        let mesh_path = opts.base_dir.join(&object.mesh);
        let mesh = fs::read(&mesh_path)
            .map_err(|e| e.to_string())
            .and_then(|bytes| load_mesh::<f64>(&bytes).map_err(|e| e.to_string()));
        let mesh = match mesh {
            Ok(m) => m,
            Err(message) => {
                warn!("object {object_index}: {}: {message}", mesh_path.display());
                failures.push(Failure {
                    object_index,
                    id: None,
                    message: format!("{}: {message}", mesh_path.display()),
                });
                continue;
            }
        };
        let centered: TriangleMesh<f64> = mesh.translated(-mesh.centroid());
        info!(
            "object {object_index}: {} triangles, {} views",
            centered.triangles.len(),
            viewpoints.len()
        );
        let views = match pool.install(|| render_views(&centered, &viewpoints, &cfg.render)) {
            Ok(v) => v,
            Err(e) => {
                failures.push(Failure {
                    object_index,
                    id: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let results: Vec<Result<Record, Failure>> = pool.install(|| {
            views
                .par_iter()
                .enumerate()
                .map(|(k, view)| {
                    let id = first_id + k as u64;
                    produce_record(&ctx, &centered, object_index, object.class_id, id, view).map_err(|message| {
                        Failure {
                            object_index,
                            id: Some(id),
                            message,
                        }
                    })
                })
                .collect()
        });
        collect(results, &mut records, &mut failures);
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        master_seed: cfg.master_seed,
        objects: cfg.objects.clone(),
        viewsphere: cfg.viewsphere.clone(),
        render: cfg.render.clone(),
        augmentation,
        partial: !failures.is_empty(),
        records,
        failures,
    };
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

fn produce_record(
    ctx: &ItemContext<'_>,
    mesh: &TriangleMesh<f64>,
    object_index: usize,
    class_id: u32,
    id: u64,
    view: &RenderedView<f64>,
) -> Result<Record, String> {
    let clean: DepthPatch<f32> = view.patch.cast();
    let clean_rel = rel_path(CLEAN_DIR, id);
    write_file(ctx.root, &clean_rel, &write_tensor(&clean).map_err(|e| e.to_string())?)?;
    let vp = &view.viewpoint;
    let mut record = Record {
        id,
        object_index,
        class_id,
        pose: vp.camera_pose.rotation.conjugate().to_array(),
        vertex_index: vp.vertex_index,
        in_plane_deg: vp.in_plane_deg,
        clean: clean_rel,
        augmented: None,
        mask: None,
        status: if view.empty { RecordStatus::Empty } else { RecordStatus::Ok },
    };
    let simulate = |c: &DepthPatch<f32>| {
        let sensor = ctx.sensor.ok_or("sensor stage without simulator")?;
        sensor.simulate(mesh, vp, c).map_err(|e| e.to_string())
    };
    ctx.emit_derived(id, &clean, simulate, &mut record)?;
    Ok(record)
}

/// Reads and checks a manifest: schema version, unique ids, and that every referenced
/// file exists.
pub fn read_manifest(dir: &Path) -> Result<Manifest, DatapackError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| DatapackError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| DatapackError::Json {
        path: path.clone(),
        source,
    })?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(DatapackError::Manifest(format!(
            "unsupported schema_version {}",
            manifest.schema_version
        )));
    }
    let mut ids: Vec<u64> = manifest.records.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatapackError::Manifest(format!("duplicate record id {}", w[0])));
    }
    for r in &manifest.records {
        for rel in std::iter::once(&r.clean).chain(&r.augmented).chain(&r.mask) {
            if !dir.join(rel).is_file() {
                return Err(DatapackError::Manifest(format!("record {}: missing file {rel}", r.id)));
            }
        }
    }
    Ok(manifest)
}

/// Re-augments an existing dataset from its clean tensors. Seeds are derived from the record
/// ids exactly as in [`generate_dataset`], so the outputs match a direct generation run
/// with the same augmentation config.
pub fn augment_dataset(
    dir: &Path,
    augmentation: Option<AugmentationConfig>,
    outputs: OutputFlags,
    workers: usize,
) -> Result<Manifest, DatapackError> {
    let mut manifest = read_manifest(dir)?;
    let augmentation = AugmentationConfig {
        patch_width: manifest.render.size,
        patch_height: manifest.render.size,
        ..augmentation.unwrap_or_else(|| manifest.augmentation.clone())
    };
    augmentation.validate().map_err(|e| DatapackError::Config(e.to_string()))?;
    if outputs.augmented && augmentation.stages.sensor {
        return Err(DatapackError::Config(
            "sensor stage needs meshes and cannot run on stored patches".into(),
        ));
    }
    create_dirs(dir, outputs, false)?;
    let pool = thread_pool(workers)?;
    let ctx = ItemContext {
        root: dir,
        master_seed: manifest.master_seed,
        augmentation: &augmentation,
        outputs,
        sensor: None,
    };
    let results: Vec<Result<Record, Failure>> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|r| {
                let mut record = Record {
                    augmented: None,
                    mask: None,
                    ..r.clone()
                };
                let clean_path = dir.join(&r.clean);
                fs::read(&clean_path)
                    .map_err(|e| format!("{}: {e}", clean_path.display()))
                    .and_then(|b| read_tensor(&b).map_err(|e| format!("{}: {e}", clean_path.display())))
                    .and_then(|clean| {
                        ctx.emit_derived(r.id, &clean, |_| Err("sensor stage unavailable".into()), &mut record)
                    })
                    .map(|()| record)
                    .map_err(|message| Failure {
                        object_index: r.object_index,
                        id: Some(r.id),
                        message,
                    })
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = std::mem::take(&mut manifest.failures);
    collect(results, &mut records, &mut failures);
    manifest.records = records;
    manifest.partial = !failures.is_empty();
    manifest.failures = failures;
    manifest.augmentation = augmentation;
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Relative paths of every file below `dir`, sorted.
pub fn tree_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("below root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
