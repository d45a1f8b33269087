use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sceneloom_core::agent::replay::replay_verify;
use sceneloom_core::agent::{read_trajectory, verify_chain, Session, SessionConfig, SessionEvent, SessionStatus, DEFAULT_MAX_STEPS};
use sceneloom_core::assets::ProviderKind;
use sceneloom_core::camera::{view_scene, View};
use sceneloom_core::render::{render, RenderOptions, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use sceneloom_core::scene::Scene;
use sceneloom_service::{api, cli, SessionManager};

#[derive(Parser)]
#[command(name = "sceneloom", version, about = "Feedback-driven 3D scene synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session to completion and write it to a directory.
    Generate {
        instruction: String,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u32,
        /// remote | replay:<file> | scripted:<policy>
        #[arg(long)]
        vlm: Option<String>,
        /// procedural | remote
        #[arg(long, default_value = "procedural")]
        assets: String,
        #[arg(long)]
        no_visual_prompt: bool,
        #[arg(long)]
        no_collision_check: bool,
        #[arg(long, default_value = "sceneloom-session")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: u32,
        #[arg(long, default_value_t = DEFAULT_HEIGHT)]
        height: u32,
    },
    /// Host sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "sessions")]
        root: PathBuf,
        /// Default model for new sessions: remote | replay:<file> | scripted:<policy>
        #[arg(long)]
        vlm: Option<String>,
    },
    /// Render a saved scene to PNG.
    Render {
        scene: PathBuf,
        #[arg(long, default_value = "iso")]
        view: String,
        #[arg(long, default_value_t = 1.0)]
        zoom: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: u32,
        #[arg(long, default_value_t = DEFAULT_HEIGHT)]
        height: u32,
        #[arg(long)]
        no_visual_prompt: bool,
    },
    /// Check a trajectory log; with --verify, re-execute it and compare scene hashes.
    Replay {
        trajectory: PathBuf,
        #[arg(long)]
        verify: bool,
    },
}

fn describe(event: &SessionEvent) -> String {
    match event {
        SessionEvent::StepStarted { step } => format!("step {step} started"),
        SessionEvent::ImageReady { step, image_ref } => format!("step {step} image {image_ref}"),
        SessionEvent::ResponseReceived { step, reason, .. } => format!("step {step} reason: {reason}"),
        SessionEvent::BatchExecuted { step, actions, .. } => {
            let calls: Vec<_> = actions.iter().map(ToString::to_string).collect();
            format!("step {step} executed: {}", calls.join(", "))
        }
        SessionEvent::BatchRejected { step, reason } => format!("step {step} rejected: {reason}"),
        SessionEvent::SystemMessage { message } => format!("message [{}] {}", message.origin.as_str(), message.text),
        SessionEvent::StatusChanged { status, step, detail } => match detail {
            Some(d) => format!("status {status} at step {step}: {d}"),
            None => format!("status {status} at step {step}"),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    instruction: String,
    max_steps: u32,
    vlm: Option<String>,
    assets: String,
    no_visual_prompt: bool,
    no_collision_check: bool,
    out: PathBuf,
    width: u32,
    height: u32,
) -> Result<ExitCode> {
    let gateway = match vlm {
        Some(value) => cli::parse_vlm(&value).map_err(anyhow::Error::msg)?,
        None => cli::default_vlm(),
    };
    let config = SessionConfig {
        max_steps,
        visual_prompting: !no_visual_prompt,
        collision_check: !no_collision_check,
        gateway,
        assets: cli::parse_assets(&assets).map_err(anyhow::Error::msg)?,
        width,
        height,
        ..SessionConfig::default()
    };
    if out.join("session.json").exists() {
        bail!("{} already holds a session", out.display());
    }
    let id = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".into());
    let mut session = Session::new(id, instruction, config, Some(out.clone()))?;
    let status = session.run(&mut |e| println!("{}", describe(&e)))?;
    println!(
        "{status} after {} step(s); scene hash {}; written to {}",
        session.step_count(),
        session.scene().content_hash(),
        out.display()
    );
    Ok(match status {
        SessionStatus::Finished | SessionStatus::Exhausted => ExitCode::SUCCESS,
        SessionStatus::Paused => ExitCode::from(2),
        _ => ExitCode::from(3),
    })
}

async fn serve(addr: SocketAddr, root: PathBuf, vlm: Option<String>) -> Result<()> {
    let gateway = match vlm {
        Some(value) => cli::parse_vlm(&value).map_err(anyhow::Error::msg)?,
        None => cli::default_vlm(),
    };
    let defaults = SessionConfig {
        gateway,
        assets: ProviderKind::from_env(),
        ..SessionConfig::default()
    };
    let manager = tokio::task::spawn_blocking(move || SessionManager::open(root, defaults)).await??;
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("bind {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, api::router(manager)).await?;
    Ok(())
}

fn render_scene(path: PathBuf, view: String, zoom: f64, out: PathBuf, width: u32, height: u32, no_visual_prompt: bool) -> Result<()> {
    let scene = Scene::load(&path).with_context(|| format!("load {}", path.display()))?;
    let view: View = view.parse()?;
    let cam = view_scene(&scene, view, zoom)?;
    let opts = RenderOptions {
        width,
        height,
        visual_prompting: !no_visual_prompt,
        ..RenderOptions::default()
    };
    std::fs::write(&out, render(&scene, &cam, &opts)?.to_png()).with_context(|| format!("write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn replay(trajectory: PathBuf, verify: bool) -> Result<()> {
    if verify {
        let report = replay_verify(&trajectory)?;
        println!("verified {} step(s); final scene hash {}", report.steps, report.final_scene_hash);
    } else {
        let steps = read_trajectory(&trajectory)?;
        verify_chain(&steps).map_err(anyhow::Error::msg)?;
        println!("hash chain intact over {} step(s)", steps.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let result = match Cli::parse().command {
        Command::Generate {
            instruction,
            max_steps,
            vlm,
            assets,
            no_visual_prompt,
            no_collision_check,
            out,
            width,
            height,
        } => generate(instruction, max_steps, vlm, assets, no_visual_prompt, no_collision_check, out, width, height),
        Command::Serve { addr, root, vlm } => tokio::runtime::Runtime::new()
            .map_err(anyhow::Error::from)
            .and_then(|rt| rt.block_on(serve(addr, root, vlm)))
            .map(|_| ExitCode::SUCCESS),
        Command::Render {
            scene,
            view,
            zoom,
            out,
            width,
            height,
            no_visual_prompt,
        } => render_scene(scene, view, zoom, out, width, height, no_visual_prompt).map(|_| ExitCode::SUCCESS),
        Command::Replay { trajectory, verify } => replay(trajectory, verify).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
