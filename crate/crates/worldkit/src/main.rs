use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use worldkit::config::{load_pipeline_config, load_serve_config};
use worldkit::log::{replay_file, SessionRecorder};
use worldkit::service::{self, AppState, DEFAULT_PORT};
use worldkit::wire::StepRequest;
use worldkit_core::pipeline::parse_action_list;
use worldkit_core::{decode_frame, Modality, PipelineConfig, SessionId, Task};

#[derive(Parser)]
#[command(name = "worldkit", version, about = "World-model session runner, replayer and service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP session API. WORLDKIT_PORT overrides --port.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// TOML file with `port` and a default `[session]` config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a scripted session and write its replayable log.
    Run {
        #[arg(long)]
        task: Option<Task>,
        /// Map text file; the built-in demo map when omitted.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Comma-separated actions, one per turn. F B L R TL TR or full tokens.
        #[arg(long, default_value = "")]
        actions: String,
        /// Send all actions as a single turn.
        #[arg(long)]
        batch: bool,
        /// Query text; repeat for several turns.
        #[arg(long)]
        query: Vec<String>,
        /// Reasoning kind for queries: general, spatial or audio.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        p_slip: Option<f64>,
        /// Pipeline config (TOML, or JSON by extension); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where frames go as PGM files; defaults to `<out>.frames`.
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
    /// Replay a log and export a representation of its final state.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        format: String,
        #[arg(long)]
        yaw: Option<f64>,
        #[arg(long)]
        rays: Option<u32>,
        #[arg(long)]
        fov: Option<f64>,
        #[arg(long)]
        polar: Option<f64>,
        #[arg(long)]
        azimuth: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a log; exit 0 only when it reproduces byte for byte.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { port, config } => serve(port, config),
        Command::Run {
            task,
            map,
            actions,
            batch,
            query,
            kind,
            seed,
            p_slip,
            config,
            out,
            frames_dir,
        } => {
            let mut cfg = match &config {
                Some(p) => load_pipeline_config(p)?,
                None => PipelineConfig::new(task.unwrap_or(Task::Navigate), 0),
            };
            if let Some(t) = task {
                cfg.task = t;
            }
            match seed {
                Some(s) => cfg.seed = s,
                None if config.is_none() => bail!("--seed is required without --config"),
                None => {}
            }
            if let Some(m) = map {
                cfg.map = std::fs::read_to_string(&m).with_context(|| format!("reading map {}", m.display()))?;
            }
            if let Some(p) = p_slip {
                cfg.kernel.p_slip = p;
            }
            let mut turns = Vec::new();
            let tokens = parse_action_list(&actions);
            if batch && !tokens.is_empty() {
                turns.push(StepRequest::actions(&tokens));
            } else {
                turns.extend(tokens.iter().map(|t| StepRequest::actions(&[t])));
            }
            turns.extend(query.iter().map(|q| StepRequest::query(kind.as_deref(), q)));
            if turns.is_empty() && cfg.task == Task::Act {
                turns.push(StepRequest::query(None, "reach_goal"));
            }
            let frames = frames_dir.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".frames");
                p.into()
            });
            run_session(cfg, &turns, &out, &frames)
        }
        Command::Export {
            log,
            format,
            yaw,
            rays,
            fov,
            polar,
            azimuth,
            out,
        } => {
            let rec = replay_file(&log).with_context(|| format!("replaying {}", log.display()))?;
            let p = rec.pipeline();
            let text = match format.as_str() {
                "pointcloud" => worldkit_core::representation::format_wkpc(&p.grid().export_points().points),
                "depth" => {
                    let d = service::depth_export(p, yaw, rays, fov, polar, azimuth).map_err(anyhow::Error::msg)?;
                    serde_json::to_string_pretty(&d)? + "\n"
                }
                "memory-log" => service::memory_log(p),
                other => bail!("unknown export format {other:?}"),
            };
            match out {
                Some(path) => std::fs::write(&path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Replay { log } => {
            let rec = replay_file(&log).with_context(|| format!("replaying {}", log.display()))?;
            println!("ok: {} turns reproduced", rec.turns());
            Ok(())
        }
    }
}

fn serve(port: Option<u16>, config: Option<PathBuf>) -> Result<()> {
    let file = config.as_deref().map(load_serve_config).transpose()?.unwrap_or_default();
    let port = match std::env::var("WORLDKIT_PORT") {
        Ok(v) => v.parse().with_context(|| format!("WORLDKIT_PORT={v}"))?,
        Err(_) => port.or(file.port).unwrap_or(DEFAULT_PORT),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        service::serve(listener, AppState::new(file.session)).await?;
        Ok(())
    })
}

fn write_pgm(path: &Path, frame: &worldkit_core::ObservationFrame) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    bytes.extend_from_slice(frame.pixels());
    std::fs::write(path, bytes)?;
    Ok(())
}

fn run_session(cfg: PipelineConfig, turns: &[StepRequest], out: &Path, frames: &Path) -> Result<()> {
    let session = SessionId::derive(cfg.seed, 0);
    let mut rec = SessionRecorder::new(cfg, session)?;
    std::fs::create_dir_all(frames)?;
    for req in turns {
        if rec.pipeline().is_terminal() {
            break;
        }
        let r = rec.step(req)?;
        let env = &r.envelope;
        let mut n = 0;
        for a in &env.artifacts {
            if matches!(a.modality, Modality::Image | Modality::VideoFrames) {
                let f = decode_frame(&a.payload)?;
                write_pgm(&frames.join(format!("turn{:04}_{n}.pgm", env.turn)), &f)?;
                n += 1;
            }
        }
        match env.error_message() {
            Some(e) => println!("turn {} error {e}", env.turn),
            None => println!(
                "turn {} reward {} cumulative {} pose {} terminal {}",
                env.turn,
                env.meta("reward").unwrap_or("-"),
                env.meta("cumulative_reward").unwrap_or("-"),
                env.meta("pose").unwrap_or("-"),
                env.terminal
            ),
        }
    }
    rec.write_to(out)?;
    Ok(())
}
