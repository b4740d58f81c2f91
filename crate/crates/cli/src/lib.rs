//! Command implementations behind the `mphys` binary.
//!
//! Every command fails with a [`CliError`] whose `code` is the process exit
//! status:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure |
//! | 2 | invalid input (scene, material, trajectory, arguments) |
//! | 3 | simulation instability |
//! | 4 | initialization failed or language-model backend unavailable |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use mphys::estimate::{
    initialize, optimize, EstimateError, HttpBackend, InitError, InitRequest, LlmBackend,
    MockBackend, OptimizerConfig, ReplayBackend,
};
use mphys::material::{MaterialClass, MaterialParams};
use mphys::motion::{ecms, flow_from_snapshots, render_trajectory, write_ppm, ECMS_GUARD};
use mphys::mpm::{
    read_trajectory, simulate, write_summary_csv, write_trajectory, ExecutionMode, SimError,
    SolverOptions, Trajectory,
};
use mphys::scene::{bundled, load_scene, Camera, RenderSettings, SceneConfig, SceneError};

pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_INIT: i32 = 4;

/// Prefix selecting a scene shipped with the library instead of a file.
pub const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn io(what: &Path, e: std::io::Error) -> Self {
        CliError::new(EXIT_IO, format!("{}: {e}", what.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        let code = match e {
            SceneError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        CliError::new(code, e.to_string())
    }
}

fn sim_code(e: &SimError) -> i32 {
    match e {
        SimError::Unstable { .. } | SimError::ParticleOutOfDomain { .. } => EXIT_UNSTABLE,
        SimError::Scene(_) | SimError::Material(_) => EXIT_INVALID,
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::new(sim_code(&e), e.to_string())
    }
}

impl From<InitError> for CliError {
    fn from(e: InitError) -> Self {
        let code = match e {
            InitError::EmptyPrompt => EXIT_INVALID,
            _ => EXIT_INIT,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        let code = match &e {
            EstimateError::Unstable(_) => EXIT_UNSTABLE,
            EstimateError::Simulation(s) => sim_code(s),
            _ => EXIT_INVALID,
        };
        CliError::new(code, e.to_string())
    }
}

/// Provenance record written into every output directory before the
/// command starts its main work, and rewritten with the finish time.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub rng: &'static str,
    pub version: &'static str,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, scene: Option<&str>, out: &Path, seed: Option<u64>, deterministic: bool) -> Self {
        RunManifest {
            command: command.into(),
            scene: scene.map(str::to_string),
            out: out.to_path_buf(),
            seed,
            deterministic,
            rng: mphys::rng::RNG_NAME,
            version: env!("CARGO_PKG_VERSION"),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn write(&self) -> Result<(), CliError> {
        write_json(&self.out.join("manifest.json"), self)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.finished_unix = Some(unix_now());
        self.write()
    }
}

/// Creates the output directory and writes the initial manifest.
fn start_run(manifest: &RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(&manifest.out).map_err(|e| CliError::io(&manifest.out, e))?;
    manifest.write()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn finish_file(w: &mut BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Loads a scene file, or a bundled scene given as `bundled:NAME`.
pub fn load_scene_arg(arg: &str) -> Result<SceneConfig, CliError> {
    match arg.strip_prefix(BUNDLED_PREFIX) {
        Some(name) => Ok(bundled::bundled(name)?),
        None => Ok(load_scene(Path::new(arg))?),
    }
}

/// Reads a material from a JSON file, or inline JSON starting with `{`.
pub fn load_material_arg(arg: &str) -> Result<MaterialParams, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::io(Path::new(arg), e))?
    };
    let params: MaterialParams = serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_INVALID, format!("material: {e}")))?;
    params
        .validate_fields()
        .map_err(|e| CliError::new(EXIT_INVALID, format!("material: {e}")))?;
    Ok(params)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_trajectory(&mut BufReader::new(file))
        .map_err(|e| CliError::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

/// Settings shared by the simulating commands.
#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub deterministic: bool,
    /// Overrides the scene's frame count.
    pub frames: Option<u32>,
}

impl RunSettings {
    /// Applies flag overrides to a scene; flags win over the scene file.
    pub fn apply(&self, scene: &mut SceneConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            scene.seed = seed;
            scene.perturb.seed = seed;
        }
        if let Some(frames) = self.frames {
            scene.step.frames = frames;
        }
        scene.validate()?;
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            mode: if self.deterministic {
                ExecutionMode::Deterministic
            } else {
                ExecutionMode::Parallel
            },
            ..SolverOptions::default()
        }
    }
}

fn resolve_material(scene: &SceneConfig, material: Option<&str>) -> Result<MaterialParams, CliError> {
    match material {
        Some(arg) => load_material_arg(arg),
        None => scene.material.clone().ok_or_else(|| {
            CliError::new(EXIT_INVALID, "scene has no material; pass --material")
        }),
    }
}

/// Simulates a scene and writes `trajectory.bin`, `summary.csv` and
/// `manifest.json` into `out`.
pub fn cmd_simulate(
    scene_arg: &str,
    material: Option<&str>,
    out: &Path,
    settings: &RunSettings,
) -> Result<(), CliError> {
    let mut scene = load_scene_arg(scene_arg)?;
    settings.apply(&mut scene)?;
    let params = resolve_material(&scene, material)?;
    let manifest = RunManifest::new("simulate", Some(scene_arg), out, Some(scene.seed), settings.deterministic);
    start_run(&manifest)?;

    let sim = simulate(&scene, &params, settings.solver_options())?;
    let path = out.join("trajectory.bin");
    let mut w = create(&path)?;
    write_trajectory(&mut w, &sim.trajectory).map_err(|e| CliError::io(&path, e))?;
    finish_file(&mut w, &path)?;
    let path = out.join("summary.csv");
    let mut w = create(&path)?;
    write_summary_csv(&mut w, &sim.summaries).map_err(|e| CliError::io(&path, e))?;
    finish_file(&mut w, &path)?;
    manifest.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Replay,
    Http,
}

/// Inputs of [`cmd_estimate`].
#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub scene: String,
    pub prompt: String,
    pub image: Option<PathBuf>,
    pub class_hint: Option<MaterialClass>,
    pub reference: PathBuf,
    pub backend: BackendKind,
    /// Recorded transcript for the replay backend.
    pub transcript: Option<PathBuf>,
    pub config: OptimizerConfig,
    pub out: PathBuf,
}

fn make_backend(args: &EstimateArgs) -> Result<Box<dyn LlmBackend>, CliError> {
    Ok(match args.backend {
        BackendKind::Mock => Box::new(MockBackend::builtin()),
        BackendKind::Replay => {
            let path = args.transcript.as_deref().ok_or_else(|| {
                CliError::new(EXIT_INVALID, "--backend replay needs --transcript FILE")
            })?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Box::new(ReplayBackend::from_json(&text)?)
        }
        BackendKind::Http => Box::new(HttpBackend::from_env()?),
    })
}

/// Initializes from the prompt, optimizes against the reference and writes
/// `report.json`, `final_params.json`, `loss_trace.csv` and
/// `transcript.json`.
pub fn cmd_estimate(args: &EstimateArgs, settings: &RunSettings) -> Result<(), CliError> {
    let mut scene = load_scene_arg(&args.scene)?;
    settings.apply(&mut scene)?;
    let reference = load_trajectory(&args.reference)?;
    let mut backend = make_backend(args)?;
    let manifest = RunManifest::new("estimate", Some(&args.scene), &args.out, Some(scene.seed), settings.deterministic);
    start_run(&manifest)?;

    let request = InitRequest {
        prompt: args.prompt.clone(),
        image: args.image.clone(),
        class_hint: args.class_hint,
    };
    let init = initialize(&request, backend.as_mut())?;
    write_json(&args.out.join("transcript.json"), &init.transcript)?;

    let mut report = optimize(&scene, &init.params, &reference, &args.config, settings.solver_options())?;
    let mut clamps = init.clamps.clone();
    clamps.append(&mut report.clamp_events);
    report.clamp_events = clamps;
    report.transcript = init.transcript;
    write_json(&args.out.join("report.json"), &report)?;
    write_json(&args.out.join("final_params.json"), &report.final_params)?;

    let path = args.out.join("loss_trace.csv");
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    write!(w, "iteration,subsequence,loss").map_err(io)?;
    for name in &report.parameters {
        write!(w, ",{name}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (i, loss) in report.loss_trace.iter().enumerate() {
        write!(w, "{i},{},{loss:e}", report.subsequence_trace[i]).map_err(io)?;
        for value in &report.parameter_trace[i] {
            write!(w, ",{value:e}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish_file(&mut w, &path)?;
    manifest.finish()
}

fn camera_and_settings(scene: Option<&str>) -> Result<(Camera, RenderSettings), CliError> {
    match scene {
        Some(arg) => {
            let s = load_scene_arg(arg)?;
            Ok((s.camera, s.render))
        }
        None => Ok((Camera::default(), RenderSettings::default())),
    }
}

/// Renders every snapshot to `frame_NNNN.ppm` in `out`. Returns the number
/// of frames written.
pub fn cmd_render(trajectory: &Path, scene: Option<&str>, out: &Path) -> Result<usize, CliError> {
    let traj = load_trajectory(trajectory)?;
    let (camera, settings) = camera_and_settings(scene)?;
    let manifest = RunManifest::new("render", scene, out, None, true);
    start_run(&manifest)?;
    let frames = render_trajectory(&traj.snapshots, &camera, &settings);
    let digits = frames.len().saturating_sub(1).to_string().len().max(4);
    for (i, frame) in frames.iter().enumerate() {
        let path = out.join(format!("frame_{i:0digits$}.ppm"));
        let mut w = create(&path)?;
        write_ppm(&mut w, frame).map_err(|e| CliError::io(&path, e))?;
        finish_file(&mut w, &path)?;
    }
    manifest.finish()?;
    Ok(frames.len())
}

/// Names accepted by [`cmd_metrics`].
pub const METRICS: [&str; 1] = ["ecms"];

/// Computes a motion metric of a trajectory.
pub fn cmd_metrics(trajectory: &Path, metric: &str, scene: Option<&str>) -> Result<f64, CliError> {
    if !METRICS.contains(&metric) {
        return Err(CliError::new(
            EXIT_INVALID,
            format!("unknown metric {metric}; available: {}", METRICS.join(", ")),
        ));
    }
    let traj = load_trajectory(trajectory)?;
    if traj.snapshots.len() < 2 {
        return Err(CliError::new(
            EXIT_INVALID,
            format!("{metric} needs at least 2 frames, trajectory has {}", traj.snapshots.len()),
        ));
    }
    let (camera, settings) = camera_and_settings(scene)?;
    let flows = flow_from_snapshots(&traj.snapshots, &camera, &settings);
    Ok(ecms(&flows, ECMS_GUARD))
}

/// Parses and validates a scene, optionally with a material override.
pub fn cmd_validate(scene_arg: &str, material: Option<&str>) -> Result<SceneConfig, CliError> {
    let scene = load_scene_arg(scene_arg)?;
    if let Some(m) = material {
        load_material_arg(m)?;
    }
    Ok(scene)
}

/// The rendered initialization prompt.
pub fn cmd_prompt(
    prompt: &str,
    image: Option<PathBuf>,
    class_hint: Option<MaterialClass>,
) -> Result<String, CliError> {
    if prompt.trim().is_empty() {
        return Err(InitError::EmptyPrompt.into());
    }
    Ok(mphys::estimate::build_prompt(&InitRequest {
        prompt: prompt.into(),
        image,
        class_hint,
    }))
}
