use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use foa_cli::commands::{self, ConvergeOptions, PoissonOptions, Scene, SynthOptions};
use foa_cli::error::{CliError, EXIT_CONFIG};
use foa_core::export::format_sig9;
use foa_core::TelegraphMode;

#[derive(Parser)]
#[command(name = "foa", version, about = "Focus-of-attention field simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the attention pipeline over a sequence of PGM frames.
    Simulate {
        config: PathBuf,
        /// Glob matching the frames; matches are taken in lexicographic order.
        frames: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Horn–Schunck flow between two PGM frames.
    Flow {
        config: PathBuf,
        frame_a: PathBuf,
        frame_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the Poisson problem for a FOAF mass density.
    Poisson {
        mu: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use log-kernel border values and report the gradient error against the kernel sum.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
    },
    /// Error of the evolved potential against the Poisson solution, per c.
    Converge {
        mu: PathBuf,
        /// Comma-separated ascending propagation speeds.
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::DampedWave)]
        mode: Mode,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_drag: f64,
        #[arg(long, default_value_t = 0.025)]
        dt: f64,
        #[arg(long, default_value_t = 8.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
    },
    /// Generate synthetic inputs.
    Synth {
        #[arg(value_enum)]
        scene: SceneArg,
        /// Output FOAF file for `mass`, output directory otherwise.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0.04)]
        dt_frame: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Heat,
    Wave,
    DampedWave,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneArg {
    Mass,
    Blobs,
    Pursuit,
    Stripes,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, frames, out } => {
            let r = commands::simulate(&config, &frames, &out)?;
            println!(
                "{} frames, {} samples, {} dumps -> {}",
                r.frames,
                r.samples,
                r.dumps,
                out.display()
            );
        }
        Command::Flow {
            config,
            frame_a,
            frame_b,
            out,
        } => commands::flow(&config, &frame_a, &frame_b, &out)?,
        Command::Poisson {
            mu,
            out,
            oracle,
            h,
            tol,
            max_iters,
        } => {
            let opts = PoissonOptions {
                h,
                tol,
                max_iters,
                oracle,
            };
            if let Some(err) = commands::poisson(&mu, &out, &opts)? {
                println!("relative gradient error {}", format_sig9(err));
            }
        }
        Command::Converge {
            mu,
            c,
            mode,
            gamma,
            lambda_drag,
            dt,
            horizon,
            h,
        } => {
            let opts = ConvergeOptions {
                mode: match mode {
                    Mode::Heat => TelegraphMode::Heat,
                    Mode::Wave => TelegraphMode::Wave,
                    Mode::DampedWave => TelegraphMode::DampedWave,
                },
                gamma,
                lambda_drag,
                h,
                dt,
                horizon,
                ..ConvergeOptions::default()
            };
            println!("c,error");
            for (c, e) in commands::converge(&mu, &c, &opts)? {
                println!("{},{}", format_sig9(c), format_sig9(e));
            }
        }
        Command::Synth {
            scene,
            out,
            seed,
            size,
            frames,
            dt_frame,
        } => {
            let scene = match scene {
                SceneArg::Mass => Scene::Mass,
                SceneArg::Blobs => Scene::Blobs,
                SceneArg::Pursuit => Scene::Pursuit,
                SceneArg::Stripes => Scene::Stripes,
            };
            let opts = SynthOptions {
                size,
                frames,
                dt_frame,
                seed,
            };
            let written = commands::synth(scene, &out, &opts)?;
            println!("wrote {} file(s) to {}", written.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("foa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
