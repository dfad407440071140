//! Pipeline stages behind the `ccx` binary.
//!
//! Every stage reads its inputs from a run directory and writes its
//! artifacts back into it. The directory's `manifest.json` lists every
//! artifact with its SHA-256, so two runs can be compared by manifest alone.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ccx_core::boundary::{build_boundary, circle_diagnostic, entourage_diagnostic, BoundaryConfig, BoundaryModel, DiagnosticReport};
use ccx_core::cone::{
    audit_log_modulus, audit_pseudocontinuity, audit_roundtrips, build_radial_contraction, contraction_modulus,
    default_contraction_bound, write_curve_csv, BoundCheck, ConeMaps, PseudoReport, RadialContraction, RoundtripReport,
};
use ccx_core::convexity::{audit_same_origin, fit_convexity, verify_convexity, AuditMode, AuditReport, ConvexityFit, FitConfig, ViolationCurve};
use ccx_core::functions::{
    classify_function, compactification_bound, extend_to_boundary, Classification, CompactificationReport, FunctionMode, ScalarField,
};
use ccx_core::homotopy::{audit_bicombing, audit_schedule, build_schedule, extract_bicombing, write_tracks_csv, BicombingReport, ContractionSchedule, ScheduleReport};
use ccx_core::io::{certificate_table, envelope, open_envelope, peek_kind, SpaceFile, SystemFile};
use ccx_core::products::{audit_product_laws, Entity, LawConfig, LawReport, ProductContext, ProductTable};
use ccx_core::spaces::{gen_space, SpaceRecipe};
use ccx_core::{derive_constants, CcxError, ConstantTable, ConvexityCertificate, Exec, FiniteMetricSpace, GeodesicSystem, PointId};

pub mod plot;

/// Spaces above this size are not dumped as dense matrices; later stages
/// regenerate them from the recipe instead.
pub const DENSE_DUMP_LIMIT: usize = 2000;
/// Bicombings store one path per ordered pair, so they are skipped above this size.
pub const BICOMBING_LIMIT: usize = 400;
/// Homotopy tracks are written for at most this many points.
pub const TRACK_LIMIT: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Gen,
    Fit,
    Derive,
    Products,
    Boundary,
    Cone,
    Homotopy,
    Functions,
    Plot,
    Convert,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Gen,
        Stage::Fit,
        Stage::Derive,
        Stage::Products,
        Stage::Boundary,
        Stage::Cone,
        Stage::Homotopy,
        Stage::Functions,
    ];

    fn index(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Fit => "fit",
            Stage::Derive => "derive",
            Stage::Products => "products",
            Stage::Boundary => "boundary",
            Stage::Cone => "cone",
            Stage::Homotopy => "homotopy",
            Stage::Functions => "functions",
            Stage::Plot => "plot",
            Stage::Convert => "convert",
        }
    }
}

/// Modules that `--expect-violation` can name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Convexity,
    Products,
    Boundary,
    Cone,
    Homotopy,
    Functions,
}

impl Module {
    fn of(stage: Stage) -> Option<Module> {
        match stage {
            Stage::Fit => Some(Module::Convexity),
            Stage::Products => Some(Module::Products),
            Stage::Boundary => Some(Module::Boundary),
            Stage::Cone => Some(Module::Cone),
            Stage::Homotopy => Some(Module::Homotopy),
            Stage::Functions => Some(Module::Functions),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Unreadable or malformed input.
    Parse,
    Io,
    /// The stage could not compute its result.
    Stage,
    /// The stage finished but an audit failed.
    Violation,
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        CliError { stage, kind, message: message.into() }
    }

    fn core(stage: Stage, e: CcxError) -> Self {
        let kind = match e {
            CcxError::Parse { .. } | CcxError::Schema(_) | CcxError::Json(_) => FailureKind::Parse,
            CcxError::Io(_) => FailureKind::Io,
            _ => FailureKind::Stage,
        };
        CliError::new(stage, kind, e.to_string())
    }

    /// 3 for parse errors, 4 for I/O, `10 + stage` for stage failures and
    /// `30 + stage` for audit violations.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Parse => 3,
            FailureKind::Io => 4,
            FailureKind::Stage => 10 + self.stage.index(),
            FailureKind::Violation => 30 + self.stage.index(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            FailureKind::Parse => "parse error",
            FailureKind::Io => "i/o error",
            FailureKind::Stage => "stage failed",
            FailureKind::Violation => "audit violation",
        };
        write!(f, "{} {what}: {}", self.stage.name(), self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) trait At<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T> At<T> for ccx_core::Result<T> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| CliError::core(stage, e))
    }
}

fn io_err(stage: Stage, path: &Path, e: std::io::Error) -> CliError {
    CliError::new(stage, FailureKind::Io, format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// `None` for imported spaces.
    pub recipe: Option<SpaceRecipe>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Tuple budget of the convexity fit and audit.
    pub budget: u64,
    /// Samples per audit (triples, pairs, quadruples).
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub expect_violation: Vec<Module>,
    /// Function classification parameters.
    pub epsilon_f: f64,
    pub r: f64,
    pub n: f64,
    #[serde(default)]
    pub sequential: bool,
}

impl PipelineConfig {
    pub fn new(recipe: Option<SpaceRecipe>) -> Self {
        PipelineConfig {
            recipe,
            horizon: None,
            epsilon: None,
            budget: 200_000,
            samples: 2000,
            seed: 0x5eed,
            expect_violation: Vec::new(),
            epsilon_f: 0.5,
            r: 1.0,
            n: 2.0,
            sequential: false,
        }
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn expects(&self, stage: Stage) -> bool {
        Module::of(stage).is_some_and(|m| self.expect_violation.contains(&m))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: Vec<ManifestEntry>,
}

/// A run directory and its manifest.
pub struct RunDir {
    pub root: PathBuf,
    entries: BTreeMap<String, ManifestEntry>,
}

impl RunDir {
    pub fn open(root: &Path, stage: Stage) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(stage, root, e))?;
        let mut entries = BTreeMap::new();
        let mpath = root.join("manifest.json");
        if mpath.exists() {
            let m: Manifest = open_envelope(&read(&mpath, stage)?, "manifest").at(stage)?;
            for e in m.artifacts {
                entries.insert(e.name.clone(), e);
            }
        }
        Ok(RunDir { root: root.to_path_buf(), entries })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    pub fn write(&mut self, stage: Stage, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| io_err(stage, &p, e))?;
        self.entries.insert(
            name.to_string(),
            ManifestEntry { name: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, stage: Stage, name: &str, kind: &str, body: &T) -> CliResult<()> {
        let text = envelope(kind, body).at(stage)?;
        self.write(stage, name, text.as_bytes())
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, stage: Stage, name: &str, kind: &str) -> CliResult<T> {
        open_envelope(&read(&self.path(name), stage)?, kind).at(stage)
    }

    /// Drop manifest entries for files this stage replaces or removes.
    pub fn forget(&mut self, stage: Stage, name: &str) -> CliResult<()> {
        self.entries.remove(name);
        let p = self.path(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| io_err(stage, &p, e))?;
        }
        Ok(())
    }

    pub fn save_manifest(&self, stage: Stage) -> CliResult<()> {
        let m = Manifest { artifacts: self.entries.values().cloned().collect() };
        let text = envelope("manifest", &m).at(stage)?;
        let p = self.path("manifest.json");
        fs::write(&p, text).map_err(|e| io_err(stage, &p, e))
    }
}

fn read(path: &Path, stage: Stage) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(stage, path, e))
}

/// What a stage reports back to the driver.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    pub passed: bool,
    pub expected_violation: bool,
    pub notes: Vec<String>,
}

impl StageStatus {
    fn new(stage: Stage) -> Self {
        StageStatus { stage, passed: true, expected_violation: false, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            self.notes.push(what.into());
        }
    }

    fn into_result(mut self, cfg: &PipelineConfig) -> CliResult<StageStatus> {
        if self.passed {
            return Ok(self);
        }
        if cfg.expects(self.stage) {
            self.expected_violation = true;
            return Ok(self);
        }
        Err(CliError::new(self.stage, FailureKind::Violation, self.notes.join("; ")))
    }
}

/// Space and system of a run: regenerated from the recipe when the config
/// has one, otherwise read from the imported files.
pub fn load_space(dir: &RunDir, stage: Stage) -> CliResult<(PipelineConfig, FiniteMetricSpace, GeodesicSystem)> {
    let cfg: PipelineConfig = dir.read_json(stage, "config.json", "config")?;
    if let Some(recipe) = &cfg.recipe {
        let (space, sys) = gen_space(recipe).at(stage)?;
        return Ok((cfg, space, sys));
    }
    let space = SpaceFile::parse(&read(&dir.path("space.json"), stage)?).at(stage)?.into_space().at(stage)?;
    let sf: SystemFile = serde_json::from_str(&read(&dir.path("system.json"), stage)?).map_err(|e| json_err(stage, e))?;
    let sys = sf.into_system(&space).at(stage)?;
    Ok((cfg, space, sys))
}

fn json_err(stage: Stage, e: serde_json::Error) -> CliError {
    CliError::core(stage, CcxError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
}

/// Imported inputs for a run without a recipe.
pub struct Import {
    pub space: PathBuf,
    pub system: PathBuf,
}

pub fn stage_gen(dir: &mut RunDir, cfg: &PipelineConfig, import: Option<&Import>) -> CliResult<StageStatus> {
    let st = Stage::Gen;
    let (space, sys) = match (&cfg.recipe, import) {
        (Some(recipe), _) => {
            recipe.validate().at(st)?;
            gen_space(recipe).at(st)?
        }
        (None, Some(imp)) => {
            let space = SpaceFile::parse(&read(&imp.space, st)?).at(st)?.into_space().at(st)?;
            let sf: SystemFile = serde_json::from_str(&read(&imp.system, st)?).map_err(|e| json_err(st, e))?;
            let sys = sf.into_system(&space).at(st)?;
            (space, sys)
        }
        (None, None) => return Err(CliError::new(st, FailureKind::Stage, "no recipe and no imported space")),
    };
    if sys.segments.is_empty() {
        return Err(CliError::new(st, FailureKind::Stage, "geodesic system has no segments"));
    }
    dir.write_json(st, "config.json", "config", cfg)?;
    let mut status = StageStatus::new(st);
    if space.len() <= DENSE_DUMP_LIMIT || cfg.recipe.is_none() {
        let text = SpaceFile::from_space(&space).to_json().at(st)?;
        dir.write(st, "space.json", text.as_bytes())?;
        let text = ccx_core::io::to_canonical(&SystemFile::from_system(&sys, &space)).at(st)?;
        dir.write(st, "system.json", text.as_bytes())?;
    } else {
        status.notes.push(format!("{} points: dense dump skipped, later stages regenerate from the recipe", space.len()));
    }
    status.notes.push(format!("{} points, {} segments, {} rays", space.len(), sys.segments.len(), sys.rays.len()));
    Ok(status)
}

#[derive(Serialize, Deserialize)]
pub struct VerifyArtifact {
    pub segments: AuditReport,
    pub same_origin: AuditReport,
    pub constants: ConstantTable,
}

pub fn stage_fit(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Fit;
    let (cfg, space, sys) = load_space(dir, st)?;
    let (lambda, k) = sys.declared();
    let fit_cfg = FitConfig { budget: cfg.budget, seed: cfg.seed, ..Default::default() };
    let mut status = StageStatus::new(st);
    match fit_convexity(&space, &sys, lambda, k, &fit_cfg, cfg.exec()).at(st)? {
        ConvexityFit::Certified(cert) => {
            dir.forget(st, "violation_curve.json")?;
            dir.write_json(st, "certificate.json", "certificate", &cert)?;
            let segments = verify_convexity(&space, &sys, &cert, AuditMode::Segments, cfg.budget, cfg.seed, cfg.exec()).at(st)?;
            let same_origin = audit_same_origin(&space, &sys, &cert.derived, cfg.budget, cfg.seed, cfg.exec());
            status.check(segments.passed(), format!("{} convexity audit violations", segments.violations));
            status.check(same_origin.passed(), format!("{} same-origin violations", same_origin.violations));
            status.notes.push(format!("E = {}, C = {}, D = {}", cert.e, cert.c, cert.derived.d));
            dir.write_json(st, "verify.json", "convexity-audit", &VerifyArtifact { segments, same_origin, constants: cert.derived })?;
        }
        ConvexityFit::Violation(curve) => {
            dir.forget(st, "certificate.json")?;
            dir.write_json(st, "violation_curve.json", "violation-curve", &curve)?;
            status.check(false, format!("no (E, C) within caps; gap slope {}", curve.slope));
        }
    }
    status.into_result(&cfg)
}

pub fn stage_derive(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Derive;
    let cfg: PipelineConfig = dir.read_json(st, "config.json", "config")?;
    if !dir.has("certificate.json") {
        return Err(CliError::new(st, FailureKind::Stage, "no convexity certificate in the run directory"));
    }
    let cert: ConvexityCertificate = dir.read_json(st, "certificate.json", "certificate")?;
    let mut table = derive_constants(&cert);
    if let Some(e) = cfg.epsilon {
        table = table.with_epsilon(e).at(st)?;
    }
    dir.write_json(st, "constants.json", "constants", &table)?;
    let mut status = StageStatus::new(st);
    status.notes.push(format!("epsilon = {}, epsilon_max = {}", table.epsilon, table.epsilon_max));
    Ok(status)
}

fn load_constants(dir: &RunDir, st: Stage) -> CliResult<ConstantTable> {
    dir.read_json(st, "constants.json", "constants")
}

#[derive(Serialize, Deserialize)]
pub struct LawArtifact {
    pub laws: LawReport,
    pub constants: ConstantTable,
    pub seed: u64,
}

pub fn stage_products(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Products;
    let (cfg, space, sys) = load_space(dir, st)?;
    let table = load_constants(dir, st)?;
    let ctx = ProductContext::new(&space, &sys, &table);
    let rays: Vec<Entity> = (0..sys.rays.len() as u32).map(Entity::Ray).collect();
    let pt = ProductTable::build(&ctx, &rays, cfg.exec()).at(st)?;
    let mut buf = Vec::new();
    pt.write_csv(&mut buf).at(st)?;
    dir.write(st, "products.csv", &buf)?;
    let law_cfg = LawConfig { triples: cfg.samples, point_pairs: cfg.samples / 4, seed: cfg.seed };
    let laws = audit_product_laws(&ctx, &law_cfg, cfg.exec()).at(st)?;
    let mut status = StageStatus::new(st);
    for c in &laws.checks {
        status.check(c.violations == 0, format!("{}: {} violations", c.name, c.violations));
    }
    dir.write_json(st, "laws.json", "product-laws", &LawArtifact { laws, constants: table, seed: cfg.seed })?;
    status.into_result(&cfg)
}

#[derive(Serialize, Deserialize)]
pub struct DiagnosticsArtifact {
    pub circle: Option<DiagnosticReport>,
    pub entourage: DiagnosticReport,
    pub clustering_consistent: bool,
    pub seed: u64,
}

pub fn stage_boundary(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Boundary;
    let (cfg, space, sys) = load_space(dir, st)?;
    let table = load_constants(dir, st)?;
    let bcfg = BoundaryConfig { horizon: cfg.horizon, ..Default::default() };
    let model = build_boundary(&space, &sys, &table, &bcfg, cfg.exec()).at(st)?;
    let circle = match space.coords {
        Some(_) => Some(circle_diagnostic(&space, &model).at(st)?),
        None => None,
    };
    let entourage = entourage_diagnostic(&space, &model, 1.0, cfg.samples, cfg.seed).at(st)?;
    let consistent = model.clustering_consistent(&space);
    let mut status = StageStatus::new(st);
    status.notes.push(format!("{} classes at horizon {}", model.class_count(), model.horizon));
    if model.overmerged_pairs > 0 {
        status.notes.push(format!("{} ray pairs chain-merged beyond D", model.overmerged_pairs));
    }
    status.check(model.sandwich_violations == 0, format!("{} sandwich violations", model.sandwich_violations));
    status.check(consistent, "clustering not consistent with the ray distances");
    if let DiagnosticReport::Entourage { violations, .. } = &entourage {
        status.check(*violations == 0, format!("{violations} entourage violations"));
    }
    dir.write_json(st, "boundary.json", "boundary", &model)?;
    dir.write_json(st, "diagnostics.json", "boundary-diagnostics", &DiagnosticsArtifact {
        circle,
        entourage,
        clustering_consistent: consistent,
        seed: cfg.seed,
    })?;
    status.into_result(&cfg)
}

#[derive(Serialize, Deserialize)]
pub struct ConeArtifact {
    pub roundtrip: RoundtripReport,
    pub pseudocontinuity: PseudoReport,
    pub log_modulus: BoundCheck,
    pub contraction: RadialContraction,
    pub contraction_checked: u64,
    pub contraction_worst: f64,
    pub constants: ConstantTable,
    pub seed: u64,
}

pub fn stage_cone(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Cone;
    let (cfg, space, _) = load_space(dir, st)?;
    let model: BoundaryModel = dir.read_json(st, "boundary.json", "boundary")?;
    let maps = ConeMaps::new(&space, &model);
    let step = model.rays.first().map_or(1.0, |r| r.step);
    let params: Vec<f64> = (1..).map(|i| i as f64 * step).take_while(|&t| t <= model.horizon + 1e-9).collect();
    let roundtrip = audit_roundtrips(&maps, &params, cfg.exec()).at(st)?;
    let pseudo = audit_pseudocontinuity(&maps, cfg.samples, cfg.seed);
    let log_modulus = audit_log_modulus(&maps, 2.0 * model.table.d, cfg.samples, cfg.seed).at(st)?;
    let bound = default_contraction_bound(&model);
    let contraction = build_radial_contraction(&maps, bound).at(st)?;
    let (checked, worst) = contraction_modulus(&maps, &contraction, cfg.samples, cfg.seed);
    let mut status = StageStatus::new(st);
    status.check(roundtrip.exp_log.violations == 0, format!("{} exp-log violations", roundtrip.exp_log.violations));
    status.check(roundtrip.log_exp.violations == 0, format!("{} log-exp violations", roundtrip.log_exp.violations));
    if roundtrip.exp_log_premise_failures > 0 {
        status.notes.push(format!(
            "{} ray points skipped: their ray leaves the D-neighbourhood of its class representative",
            roundtrip.exp_log_premise_failures
        ));
    }
    status.check(pseudo.check.violations == 0, format!("{} pseudocontinuity violations", pseudo.check.violations));
    status.check(log_modulus.violations == 0, format!("{} log modulus violations", log_modulus.violations));
    status.check(worst <= bound + 1e-9, format!("radial contraction displacement {worst} above {bound}"));
    if pseudo.vacuous {
        status.notes.push("pseudocontinuity premise never met".into());
    }
    let mut buf = Vec::new();
    write_curve_csv(&roundtrip.curve, &mut buf).at(st)?;
    dir.write(st, "bound_curve.csv", &buf)?;
    dir.write_json(st, "cone.json", "cone-audit", &ConeArtifact {
        roundtrip,
        pseudocontinuity: pseudo,
        log_modulus,
        contraction,
        contraction_checked: checked,
        contraction_worst: worst,
        constants: model.table.clone(),
        seed: cfg.seed,
    })?;
    status.into_result(&cfg)
}

#[derive(Serialize, Deserialize)]
pub struct HomotopyArtifact {
    pub schedule: ContractionSchedule,
    pub audit: ScheduleReport,
    pub bicombing: Option<BicombingReport>,
    pub constants: ConstantTable,
    pub seed: u64,
}

pub fn stage_homotopy(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Homotopy;
    let (cfg, space, sys) = load_space(dir, st)?;
    let model: BoundaryModel = dir.read_json(st, "boundary.json", "boundary")?;
    let table = model.table.clone();
    let image = ConeMaps::new(&space, &model).exp_image();
    let sch = build_schedule(&space, &sys, &image, &table, cfg.exec()).at(st)?;
    let audit = audit_schedule(&space, &sys, &sch, &table, cfg.samples, cfg.seed, cfg.exec());
    let mut status = StageStatus::new(st);
    status.check(audit.passed(), "schedule audit failed");
    let bicombing = if space.len() <= BICOMBING_LIMIT {
        let b = extract_bicombing(&space, &sys, &table).at(st)?;
        let r = audit_bicombing(&space, &b, cfg.samples, cfg.seed, cfg.exec());
        status.check(r.passed(), format!("{} bicombing violations", r.violations));
        Some(r)
    } else {
        status.notes.push(format!("bicombing skipped above {BICOMBING_LIMIT} points"));
        None
    };
    let points: Vec<PointId> = (0..space.len().min(TRACK_LIMIT) as PointId).collect();
    let mut buf = Vec::new();
    write_tracks_csv(&sch, &sys, &points, &mut buf).at(st)?;
    dir.write(st, "tracks.csv", &buf)?;
    dir.write_json(st, "homotopy.json", "homotopy", &HomotopyArtifact { schedule: sch, audit, bicombing, constants: table, seed: cfg.seed })?;
    status.into_result(&cfg)
}

#[derive(Serialize, Deserialize)]
pub struct FunctionEntry {
    pub label: String,
    pub slowly_oscillating: Classification,
    pub gromov: Classification,
    pub boundary_spread: f64,
}

#[derive(Serialize, Deserialize)]
pub struct FunctionsArtifact {
    pub functions: Vec<FunctionEntry>,
    pub compactification: CompactificationReport,
    pub constants: ConstantTable,
}

/// Functions classified by the pipeline: a constant, distance from the
/// base, and the direction `v / |v|` when the space has coordinates.
pub fn builtin_functions(space: &FiniteMetricSpace) -> Vec<ScalarField> {
    let n = space.len();
    let mut out = vec![
        ScalarField::constant(n, [1.0, 0.0]),
        ScalarField::real("distance from base", (0..n as PointId).map(|v| space.d(space.base, v))),
    ];
    if let Some(c) = &space.coords {
        let o = c[space.base as usize];
        let values = c
            .iter()
            .map(|p| {
                let (x, y) = (p[0] - o[0], p[1] - o[1]);
                let r = x.hypot(y);
                if r == 0.0 {
                    [1.0, 0.0]
                } else {
                    [x / r, y / r]
                }
            })
            .collect();
        out.push(ScalarField { values, label: "direction".into() });
    }
    out
}

pub fn stage_functions(dir: &mut RunDir) -> CliResult<StageStatus> {
    let st = Stage::Functions;
    let (cfg, space, sys) = load_space(dir, st)?;
    let model: BoundaryModel = dir.read_json(st, "boundary.json", "boundary")?;
    let table = model.table.clone();
    let ctx = ProductContext::new(&space, &sys, &table);
    let mut functions = Vec::new();
    for f in builtin_functions(&space) {
        let classify = |mode| classify_function(&f, &ctx, mode, cfg.epsilon_f, cfg.r, cfg.budget, cfg.seed, cfg.exec()).at(st);
        let so = classify(FunctionMode::SlowlyOscillating)?;
        let g = classify(FunctionMode::Gromov)?;
        functions.push(FunctionEntry {
            label: f.label.clone(),
            slowly_oscillating: so,
            gromov: g,
            boundary_spread: extend_to_boundary(&f, &model).max_spread(),
        });
    }
    let compactification = compactification_bound(&ctx, &table, cfg.r, cfg.n, cfg.exec()).at(st)?;
    let mut status = StageStatus::new(st);
    status.check(compactification.violations == 0, format!("{} compactification violations", compactification.violations));
    if compactification.checked == 0 {
        status.notes.push(format!("no pairs outside radius {}", compactification.radius));
    }
    dir.write_json(st, "functions.json", "functions", &FunctionsArtifact { functions, compactification, constants: table })?;
    status.into_result(&cfg)
}

#[derive(Serialize, Deserialize)]
pub struct Summary {
    pub stages: Vec<StageStatus>,
    /// Stages not run because an expected violation ended the pipeline.
    pub skipped: Vec<Stage>,
}

pub fn run_stage(dir: &mut RunDir, cfg: &PipelineConfig, import: Option<&Import>, stage: Stage) -> CliResult<StageStatus> {
    match stage {
        Stage::Gen => stage_gen(dir, cfg, import),
        Stage::Fit => stage_fit(dir),
        Stage::Derive => stage_derive(dir),
        Stage::Products => stage_products(dir),
        Stage::Boundary => stage_boundary(dir),
        Stage::Cone => stage_cone(dir),
        Stage::Homotopy => stage_homotopy(dir),
        Stage::Functions => stage_functions(dir),
        Stage::Plot | Stage::Convert => Err(CliError::new(stage, FailureKind::Stage, "not a pipeline stage")),
    }
}

/// gen → fit → derive → products → boundary → cone → homotopy → functions.
/// A convexity violation ends the run after the fit, since nothing
/// downstream has constants to work with.
pub fn run_pipeline(cfg: &PipelineConfig, import: Option<&Import>, out: &Path) -> CliResult<Summary> {
    let mut dir = RunDir::open(out, Stage::Gen)?;
    let mut stages = Vec::new();
    let mut skipped = Vec::new();
    let mut first_violation: Option<CliError> = None;
    for (i, &stage) in Stage::PIPELINE.iter().enumerate() {
        let status = match run_stage(&mut dir, cfg, import, stage) {
            Ok(s) => s,
            Err(e) if e.kind == FailureKind::Violation => {
                let mut s = StageStatus::new(stage);
                s.check(false, e.message.clone());
                first_violation.get_or_insert(e);
                s
            }
            Err(e) => {
                dir.save_manifest(stage)?;
                return Err(e);
            }
        };
        let stop = stage == Stage::Fit && !dir.has("certificate.json");
        stages.push(status);
        if stop {
            skipped.extend_from_slice(&Stage::PIPELINE[i + 1..]);
            break;
        }
    }
    let summary = Summary { stages, skipped };
    dir.write_json(Stage::Functions, "summary.json", "summary", &summary)?;
    dir.save_manifest(Stage::Functions)?;
    match first_violation {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Space JSON ↔ CSV matrix dump, certificate JSON → text table.
pub fn convert(input: &Path, output: &Path) -> CliResult<()> {
    let st = Stage::Convert;
    let ext = |p: &Path| p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let text = |s: String| s.into_bytes();
    let bytes = match (ext(input).as_str(), ext(output).as_str()) {
        ("csv", "json") => {
            let f = fs::File::open(input).map_err(|e| io_err(st, input, e))?;
            text(SpaceFile::read_csv(f).at(st)?.to_json().at(st)?)
        }
        ("json", out) => {
            let src = read(input, st)?;
            let v: serde_json::Value = serde_json::from_str(&src).map_err(|e| json_err(st, e))?;
            if v.get("points").is_some() {
                let f = SpaceFile::parse(&src).at(st)?;
                match out {
                    "csv" => {
                        let mut buf = Vec::new();
                        f.write_csv(&mut buf).at(st)?;
                        buf
                    }
                    "json" => text(f.to_json().at(st)?),
                    _ => return Err(CliError::new(st, FailureKind::Parse, format!("cannot convert a space to .{out}"))),
                }
            } else {
                match (peek_kind(&src).at(st)?.as_str(), out) {
                    ("certificate", "txt") => {
                        let c: ConvexityCertificate = open_envelope(&src, "certificate").at(st)?;
                        text(certificate_table(&c))
                    }
                    (kind, _) => {
                        return Err(CliError::new(st, FailureKind::Parse, format!("no conversion from a {kind} artifact to .{out}")))
                    }
                }
            }
        }
        (a, b) => return Err(CliError::new(st, FailureKind::Parse, format!("no conversion from .{a} to .{b}"))),
    };
    fs::write(output, bytes).map_err(|e| io_err(st, output, e))
}

/// Violation curve of a run that ended at the fit, if any.
pub fn violation_curve(dir: &RunDir) -> CliResult<Option<ViolationCurve>> {
    if !dir.has("violation_curve.json") {
        return Ok(None);
    }
    dir.read_json(Stage::Fit, "violation_curve.json", "violation-curve").map(Some)
}
