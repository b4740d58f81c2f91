use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mphys::estimate::OptimizerConfig;
use mphys::material::MaterialClass;
use mphys_cli::*;

#[derive(Parser)]
#[command(name = "mphys", version, about = "Material point simulation and material estimation")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Overrides the scene seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Serial, bit-reproducible scatter.
    #[arg(long)]
    deterministic: bool,
    /// Overrides the scene frame count.
    #[arg(long)]
    frames: Option<u32>,
}

impl RunFlags {
    fn settings(&self) -> RunSettings {
        RunSettings {
            seed: self.seed,
            deterministic: self.deterministic,
            frames: self.frames,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mock,
    Replay,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ppm,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene and write its trajectory.
    Simulate {
        /// Scene JSON file, or `bundled:NAME`.
        #[arg(long)]
        scene: String,
        /// Material JSON file or inline JSON; overrides the scene material.
        #[arg(long)]
        material: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Estimate material parameters from a reference trajectory.
    Estimate {
        #[arg(long)]
        scene: String,
        /// Textual description of the scene.
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        image: Option<PathBuf>,
        /// Material type to suggest to the language model.
        #[arg(long, value_parser = parse_class)]
        class_hint: Option<MaterialClass>,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "mock")]
        backend: Backend,
        /// Recorded transcript for the replay backend.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Optimizer settings as JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        boost: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Render a trajectory to one image per snapshot.
    Render {
        #[arg(long)]
        trajectory: PathBuf,
        /// Scene whose camera and render settings are used.
        #[arg(long)]
        scene: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ppm")]
        format: Format,
    },
    /// Print a motion metric of a trajectory.
    Metrics {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value = "ecms")]
        metric: String,
        /// Scene whose camera is used.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Check a scene and optional material without simulating.
    Validate {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        material: Option<String>,
    },
    /// Print the initialization prompt for offline use.
    Prompt {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, value_parser = parse_class)]
        class_hint: Option<MaterialClass>,
    },
}

fn parse_class(s: &str) -> Result<MaterialClass, String> {
    MaterialClass::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = MaterialClass::ALL.iter().map(|c| c.display_name()).collect();
        format!("unknown material type; expected one of: {}", names.join(", "))
    })
}

fn load_config(path: Option<&PathBuf>) -> Result<OptimizerConfig, CliError> {
    let Some(path) = path else {
        return Ok(OptimizerConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scene,
            material,
            out,
            run,
        } => cmd_simulate(&scene, material.as_deref(), &out, &run.settings()),
        Command::Estimate {
            scene,
            prompt,
            image,
            class_hint,
            reference,
            backend,
            transcript,
            config,
            max_iterations,
            boost,
            out,
            run,
        } => {
            let mut config = load_config(config.as_ref())?;
            if let Some(n) = max_iterations {
                config.max_iterations = n;
            }
            if let Some(m) = boost {
                config.boost = m;
            }
            let args = EstimateArgs {
                scene,
                prompt,
                image,
                class_hint,
                reference,
                backend: match backend {
                    Backend::Mock => BackendKind::Mock,
                    Backend::Replay => BackendKind::Replay,
                    Backend::Http => BackendKind::Http,
                },
                transcript,
                config,
                out,
            };
            cmd_estimate(&args, &run.settings())
        }
        Command::Render {
            trajectory,
            scene,
            out,
            format: Format::Ppm,
        } => {
            let n = cmd_render(&trajectory, scene.as_deref(), &out)?;
            eprintln!("wrote {n} frames to {}", out.display());
            Ok(())
        }
        Command::Metrics {
            trajectory,
            metric,
            scene,
        } => {
            let value = cmd_metrics(&trajectory, &metric, scene.as_deref())?;
            println!("{value:e}");
            Ok(())
        }
        Command::Validate { scene, material } => {
            cmd_validate(&scene, material.as_deref())?;
            println!("ok");
            Ok(())
        }
        Command::Prompt {
            prompt,
            image,
            class_hint,
        } => {
            print!("{}", cmd_prompt(&prompt, image, class_hint)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
