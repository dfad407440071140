use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccx_cli::plot::{plot, PlotKind};
use ccx_cli::{convert, run_pipeline, run_stage, CliError, CliResult, FailureKind, Import, Module, PipelineConfig, RunDir, Stage};
use ccx_core::spaces::{GeodesicPolicy, SpaceKind, SpaceRecipe};

#[derive(Parser)]
#[command(name = "ccx", version, about = "Finite-sample coarse convexity pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate (or import) a space and start a run directory.
    Gen(GenArgs),
    /// Fit convexity constants and derive the constant table.
    Fit(StageArgs),
    /// Ray products, product laws and the boundary model.
    Boundary(StageArgs),
    /// Cone maps and their roundtrip audits.
    Cone(StageArgs),
    /// Contraction schedule and bicombing audits.
    Homotopy(StageArgs),
    /// Function classification and compactification check.
    Functions(StageArgs),
    /// Every stage in order.
    Run(RunArgs),
    /// Draw a figure from an artifact.
    Plot {
        artifact: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert between space JSON and CSV, or render a certificate as text.
    Convert { input: PathBuf, output: PathBuf },
}

#[derive(Args, Clone)]
struct RecipeArgs {
    /// euclidean-l2-disc, grid-l1, tree or hyperbolic-disc.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<SpaceKind>,
    /// Radius, or depth for trees.
    #[arg(long)]
    size: Option<u32>,
    /// affine, staircase-all or canonical; defaults by kind.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<GeodesicPolicy>,
    /// Ray directions on the disc samples.
    #[arg(long)]
    directions: Option<u32>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Spaces up to this size get segments between all pairs.
    #[arg(long)]
    pair_cap: Option<usize>,
    /// Import a `ccx/1` space file instead of generating.
    #[arg(long, conflicts_with = "kind")]
    space: Option<PathBuf>,
    /// `ccx/1` geodesic system for the imported space.
    #[arg(long, requires = "space")]
    system: Option<PathBuf>,
    /// Full pipeline config as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Ray horizon R for the boundary; defaults to half the radius.
    #[arg(long)]
    horizon: Option<f64>,
    /// Metrization exponent; must not exceed the derived maximum.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed for every sampled scan.
    #[arg(long)]
    seed: Option<u64>,
    /// Tuple budget of the convexity fit and audits.
    #[arg(long)]
    budget: Option<u64>,
    /// Samples per audit (triples, pairs, quadruples).
    #[arg(long)]
    samples: Option<usize>,
    /// Module whose violation is expected; the run then exits 0.
    #[arg(long, value_enum)]
    expect_violation: Vec<Module>,
    /// Run every scan on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    over: Overrides,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    over: Overrides,
    /// Run directory created by `gen`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    over: Overrides,
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<SpaceKind, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| {
        format!("unknown space kind {s:?} (euclidean_l2_disc, grid_l1, tree, hyperbolic_disc)")
    })
}

fn parse_policy(s: &str) -> Result<GeodesicPolicy, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('_', "-")))
        .map_err(|_| format!("unknown geodesic policy {s:?} (affine, staircase-all, canonical)"))
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        for m in &self.expect_violation {
            if !cfg.expect_violation.contains(m) {
                cfg.expect_violation.push(*m);
            }
        }
        cfg.expect_violation.sort();
        if self.sequential {
            cfg.sequential = true;
        }
    }

    fn is_empty(&self) -> bool {
        self.horizon.is_none()
            && self.epsilon.is_none()
            && self.seed.is_none()
            && self.budget.is_none()
            && self.samples.is_none()
            && self.expect_violation.is_empty()
            && !self.sequential
    }
}

fn config_from(r: &RecipeArgs, over: &Overrides) -> CliResult<(PipelineConfig, Option<Import>)> {
    let st = Stage::Gen;
    let mut cfg = match &r.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::new(st, FailureKind::Io, format!("{}: {e}", p.display())))?;
            serde_json::from_str::<PipelineConfig>(&text).map_err(|e| {
                CliError::new(st, FailureKind::Parse, format!("{}:{}:{}: {e}", p.display(), e.line(), e.column()))
            })?
        }
        None => PipelineConfig::new(None),
    };
    let import = match (&r.space, &r.system) {
        (Some(s), Some(l)) => {
            cfg.recipe = None;
            Some(Import { space: s.clone(), system: l.clone() })
        }
        (Some(_), None) => return Err(CliError::new(st, FailureKind::Stage, "--space needs --system")),
        _ => None,
    };
    if import.is_none() {
        let base = cfg.recipe.clone();
        let kind = r.kind.or(base.as_ref().map(|b| b.kind));
        let size = r.size.or(base.as_ref().map(|b| b.size));
        let (Some(kind), Some(size)) = (kind, size) else {
            return Err(CliError::new(st, FailureKind::Stage, "give --kind and --size, --config, or --space/--system"));
        };
        let default_policy = match kind {
            SpaceKind::Tree | SpaceKind::HyperbolicDisc => GeodesicPolicy::Canonical,
            SpaceKind::GridL1 => GeodesicPolicy::StaircaseAll,
            _ => GeodesicPolicy::Affine,
        };
        let policy = r.policy.or(base.as_ref().map(|b| b.policy)).unwrap_or(default_policy);
        let mut recipe = match base {
            Some(b) if b.kind == kind => SpaceRecipe { size, policy, ..b },
            _ => SpaceRecipe::new(kind, size, policy),
        };
        if r.directions.is_some() {
            recipe.directions = r.directions;
        }
        if let Some(h) = r.grid_step {
            recipe.grid_step = h;
        }
        if r.pair_cap.is_some() {
            recipe.pair_cap = r.pair_cap;
        }
        cfg.recipe = Some(recipe);
    }
    over.apply(&mut cfg);
    Ok((cfg, import))
}

fn stages(dir: &std::path::Path, over: &Overrides, list: &[Stage]) -> CliResult<()> {
    let mut run = RunDir::open(dir, list[0])?;
    let mut cfg: PipelineConfig = run.read_json(list[0], "config.json", "config")?;
    if !over.is_empty() {
        over.apply(&mut cfg);
        run.write_json(list[0], "config.json", "config", &cfg)?;
    }
    let mut result = Ok(());
    for &st in list {
        match run_stage(&mut run, &cfg, None, st) {
            Ok(s) => report(&s),
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    run.save_manifest(*list.last().unwrap())?;
    result
}

fn report(s: &ccx_cli::StageStatus) {
    let tag = match (s.passed, s.expected_violation) {
        (true, _) => "ok",
        (false, true) => "expected violation",
        (false, false) => "violation",
    };
    eprintln!("{}: {tag}", s.stage.name());
    for n in &s.notes {
        eprintln!("  {n}");
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Gen(a) => {
            let (cfg, import) = config_from(&a.recipe, &a.over)?;
            let mut run = RunDir::open(&a.out, Stage::Gen)?;
            let s = run_stage(&mut run, &cfg, import.as_ref(), Stage::Gen)?;
            report(&s);
            run.save_manifest(Stage::Gen)
        }
        Cmd::Fit(a) => stages(&a.out, &a.over, &[Stage::Fit, Stage::Derive]),
        Cmd::Boundary(a) => stages(&a.out, &a.over, &[Stage::Products, Stage::Boundary]),
        Cmd::Cone(a) => stages(&a.out, &a.over, &[Stage::Cone]),
        Cmd::Homotopy(a) => stages(&a.out, &a.over, &[Stage::Homotopy]),
        Cmd::Functions(a) => stages(&a.out, &a.over, &[Stage::Functions]),
        Cmd::Run(a) => {
            let (cfg, import) = config_from(&a.recipe, &a.over)?;
            let summary = run_pipeline(&cfg, import.as_ref(), &a.out)?;
            for s in &summary.stages {
                report(s);
            }
            for s in &summary.skipped {
                eprintln!("{}: skipped", s.name());
            }
            Ok(())
        }
        Cmd::Plot { artifact, kind, out } => plot(&artifact, kind, &out),
        Cmd::Convert { input, output } => convert(&input, &output),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccx: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
