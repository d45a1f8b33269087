//! Re-executes a recorded trajectory and checks every scene hash along the way.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{read_trajectory, verify_chain, AgentError, TrajectoryStep};
use crate::action::{execute_batch, validate_batch};
use crate::assets::{AssetError, AssetProvider, AssetRequest, TextureImage, DEFAULT_TILE_SIZE};
use crate::camera::{view_scene, View};
use crate::geometry::mesh::hex_digest;
use crate::geometry::TriangleMesh;
use crate::render::Image;
use crate::scene::Scene;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("trajectory chain is broken: {0}")]
    Chain(String),
    #[error("step {step}: {message}")]
    Diverged { step: u32, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub steps: usize,
    pub final_scene_hash: String,
}

/// Serves the assets a step originally received, read back from the session directory.
struct RecordedAssets {
    meshes: BTreeMap<String, TriangleMesh>,
    texture: Option<TextureImage>,
}

impl RecordedAssets {
    fn load(base: &Path, step: &TrajectoryStep) -> Result<Self, AgentError> {
        let mut meshes = BTreeMap::new();
        for (name, mesh_ref) in &step.created_meshes {
            let text = fs::read_to_string(base.join(mesh_ref))?;
            let mesh = TriangleMesh::from_obj(&text).map_err(|e| AgentError::Format(format!("{mesh_ref}: {e}")))?;
            meshes.insert(name.clone(), mesh);
        }
        let texture = match &step.floor_texture_ref {
            Some(r) => {
                let image = Image::from_png(&fs::read(base.join(r))?).map_err(|e| AgentError::Format(format!("{r}: {e}")))?;
                Some(TextureImage::new(image, DEFAULT_TILE_SIZE)?)
            }
            None => None,
        };
        Ok(Self { meshes, texture })
    }
}

impl AssetProvider for RecordedAssets {
    fn generate_asset(&self, request: &AssetRequest) -> Result<TriangleMesh, AssetError> {
        self.meshes
            .get(&request.name)
            .cloned()
            .ok_or_else(|| AssetError::GenerationFailed(format!("no recorded mesh for {:?}", request.name)))
    }

    fn generate_texture(&self, _: &str) -> Result<TextureImage, AssetError> {
        self.texture
            .clone()
            .ok_or_else(|| AssetError::GenerationFailed("no recorded texture".into()))
    }
}

fn diverged(step: u32, message: impl Into<String>) -> ReplayError {
    ReplayError::Diverged {
        step,
        message: message.into(),
    }
}

/// Replays `trajectory.jsonl` from an empty scene. Meshes and textures are
/// resolved against the trajectory's directory. When a `scene.json` sits
/// next to it, the final scene must hash to its bytes.
pub fn replay_verify(trajectory: &Path) -> Result<ReplayReport, ReplayError> {
    let base = trajectory.parent().unwrap_or(Path::new("."));
    let steps = read_trajectory(trajectory)?;
    verify_chain(&steps).map_err(ReplayError::Chain)?;
    let mut scene = Scene::new();
    let mut camera = view_scene(&scene, View::Iso, 1.0).expect("unit zoom is valid");
    for record in &steps {
        let t = record.step;
        if camera != record.camera {
            return Err(diverged(t, "camera state differs from the recording"));
        }
        if let Some(batch) = &record.batch {
            let verdict = validate_batch(batch, &scene);
            if Some(&verdict) != record.verdict.as_ref() {
                return Err(diverged(t, "validation verdict differs from the recording"));
            }
            if verdict.accepted {
                let assets = RecordedAssets::load(base, record)?;
                let outcome = execute_batch(&mut scene, &mut camera, batch, &assets);
                if outcome.executed != record.executed {
                    return Err(diverged(t, "executed actions differ from the recording"));
                }
            }
        }
        let hash = scene.content_hash();
        if hash != record.scene_hash {
            return Err(diverged(t, format!("scene hash {hash} != recorded {}", record.scene_hash)));
        }
    }
    let final_scene_hash = scene.content_hash();
    let scene_file = base.join("scene.json");
    if scene_file.exists() {
        let on_disk = hex_digest(&fs::read(&scene_file).map_err(AgentError::from)?);
        if on_disk != final_scene_hash {
            return Err(diverged(steps.len() as u32, "final scene differs from scene.json"));
        }
    }
    Ok(ReplayReport {
        steps: steps.len(),
        final_scene_hash,
    })
}
