//! Mesh and floor-texture sources for `Create` and `GenerateFloorTexture`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::mesh::{cuboid, frustum};
use crate::geometry::{GeometryError, TriangleMesh};
use crate::math::Vec3;
use crate::render::Image;

/// Physical size of one texture repeat on the floor, meters.
pub const DEFAULT_TILE_SIZE: f64 = 1.0;
pub const FALLBACK_TEXTURE_SIZE: u32 = 64;
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(120);
pub const ASSET_ENDPOINT_ENV: &str = "SCENELOOM_ASSET_ENDPOINT";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssetError {
    #[error("asset provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("asset generation failed: {0}")]
    GenerationFailed(String),
    #[error("asset description must not be empty")]
    EmptyDescription,
    #[error("texture dimensions {0}x{1} are not powers of two")]
    NotPowerOfTwo(u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRequest {
    pub name: String,
    pub description: String,
}

impl AssetRequest {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Result<Self, AssetError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(AssetError::EmptyDescription);
        }
        Ok(Self {
            name: name.into(),
            description,
        })
    }
}

/// Tileable floor image and the floor length one repeat covers.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureImage {
    image: Image,
    tile_size: f64,
}

impl TextureImage {
    pub fn new(image: Image, tile_size: f64) -> Result<Self, AssetError> {
        let (w, h) = (image.width(), image.height());
        if !w.is_power_of_two() || !h.is_power_of_two() {
            return Err(AssetError::NotPowerOfTwo(w, h));
        }
        if !(tile_size.is_finite() && tile_size > 0.0) {
            return Err(AssetError::GenerationFailed(format!("tile size {tile_size}")));
        }
        Ok(Self { image, tile_size })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn tile_size(&self) -> f64 {
        self.tile_size
    }

    pub fn to_png(&self) -> Vec<u8> {
        self.image.to_png()
    }

    /// Nearest-texel lookup at floor offset `(u, v)` meters, repeating.
    pub fn sample(&self, u: f64, v: f64) -> [u8; 3] {
        let (w, h) = (self.image.width(), self.image.height());
        let fu = (u / self.tile_size).rem_euclid(1.0);
        let fv = (v / self.tile_size).rem_euclid(1.0);
        let x = ((fu * w as f64) as u32).min(w - 1);
        // image rows run top-down while +Y runs away from the viewer
        let y = (h - 1) - ((fv * h as f64) as u32).min(h - 1);
        let p = self.image.get(x, y);
        [p[0], p[1], p[2]]
    }
}

/// Rescales to a max extent of 1 m and centers the box on the origin.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh, GeometryError> {
    mesh.normalized()
}

pub trait AssetProvider: Send + Sync {
    fn generate_asset(&self, request: &AssetRequest) -> Result<TriangleMesh, AssetError>;
    fn generate_texture(&self, description: &str) -> Result<TextureImage, AssetError>;
}

/// Offline provider: geometry and textures are a pure function of the description.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralProvider;

/// Bytes of the description's SHA-256, consumed sequentially.
struct HashStream {
    bytes: Vec<u8>,
    pos: usize,
}

impl HashStream {
    fn new(text: &str) -> Self {
        Self {
            bytes: Sha256::digest(text.as_bytes()).to_vec(),
            pos: 0,
        }
    }

    fn next(&mut self) -> u8 {
        if self.pos == self.bytes.len() {
            self.bytes = Sha256::digest(&self.bytes).to_vec();
            self.pos = 0;
        }
        self.pos += 1;
        self.bytes[self.pos - 1]
    }

    /// Uniform-ish value in `[lo, hi]`.
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next() as f64 / 255.0
    }
}

pub fn procedural_asset(description: &str) -> TriangleMesh {
    let mut h = HashStream::new(description);
    let parts = 1 + h.next() % 3;
    let mut mesh: Option<TriangleMesh> = None;
    let mut z = 0.0;
    for _ in 0..parts {
        let width = h.range(0.3, 1.0);
        let depth = h.range(0.3, 1.0);
        let height = h.range(0.1, 0.8);
        let part = match h.next() % 3 {
            0 => cuboid(Vec3::new(0.0, 0.0, z + height / 2.0), Vec3::new(width, depth, height)),
            1 => frustum(Vec3::new(0.0, 0.0, z), width / 2.0, width / 2.0, height, 16),
            _ => frustum(Vec3::new(0.0, 0.0, z), width / 2.0, 0.0, height, 16),
        };
        z += height;
        match &mut mesh {
            Some(m) => m.merge(&part),
            None => mesh = Some(part),
        }
    }
    mesh.expect("at least one part")
        .normalized()
        .expect("procedural parts have positive size")
}

/// Two-tone checker tinted by the description hash.
pub fn fallback_texture(description: &str) -> TextureImage {
    let mut h = HashStream::new(description);
    let tint = [h.next(), h.next(), h.next()];
    let light = tint.map(|c| 150 + (c as u16 * 100 / 255) as u8);
    let dark = light.map(|c| (c as u16 * 3 / 4) as u8);
    let n = FALLBACK_TEXTURE_SIZE;
    let mut image = Image::new(n, n, [0, 0, 0, 255]);
    for y in 0..n {
        for x in 0..n {
            let c = if (x / 8 + y / 8) % 2 == 0 { light } else { dark };
            image.set(x, y, [c[0], c[1], c[2], 255]);
        }
    }
    TextureImage::new(image, DEFAULT_TILE_SIZE).expect("power-of-two fallback")
}

impl AssetProvider for ProceduralProvider {
    fn generate_asset(&self, request: &AssetRequest) -> Result<TriangleMesh, AssetError> {
        Ok(procedural_asset(&request.description))
    }

    fn generate_texture(&self, description: &str) -> Result<TextureImage, AssetError> {
        Ok(fallback_texture(description))
    }
}

/// HTTP provider: `POST {endpoint}/generate` returns OBJ text and
/// `POST {endpoint}/texture` returns PNG bytes; both take `{"description": ...}`.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, AssetError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AssetError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    fn post(&self, path: &str, description: &str) -> Result<Vec<u8>, AssetError> {
        let resp = self
            .client
            .post(format!("{}/{path}", self.endpoint))
            .json(&serde_json::json!({ "description": description }))
            .send()
            .map_err(|e| AssetError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(AssetError::ProviderUnavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(AssetError::GenerationFailed(format!("HTTP {status}")));
        }
        resp.bytes()
            .map(|b| b.to_vec())
            .map_err(|e| AssetError::ProviderUnavailable(e.to_string()))
    }
}

impl AssetProvider for RemoteProvider {
    fn generate_asset(&self, request: &AssetRequest) -> Result<TriangleMesh, AssetError> {
        let body = self.post("generate", &request.description)?;
        let text = String::from_utf8(body).map_err(|_| AssetError::GenerationFailed("OBJ is not UTF-8".into()))?;
        let mesh = TriangleMesh::from_obj(&text).map_err(|e| AssetError::GenerationFailed(e.to_string()))?;
        normalize_mesh(&mesh).map_err(|e| AssetError::GenerationFailed(e.to_string()))
    }

    fn generate_texture(&self, description: &str) -> Result<TextureImage, AssetError> {
        let body = self.post("texture", description)?;
        let image = Image::from_png(&body).map_err(|e| AssetError::GenerationFailed(e.to_string()))?;
        TextureImage::new(image, DEFAULT_TILE_SIZE)
    }
}

/// Serializable provider selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Procedural,
    Remote { endpoint: String },
}

impl ProviderKind {
    /// Remote when the endpoint variable is set, procedural otherwise.
    pub fn from_env() -> Self {
        match std::env::var(ASSET_ENDPOINT_ENV) {
            Ok(endpoint) if !endpoint.trim().is_empty() => ProviderKind::Remote { endpoint },
            _ => ProviderKind::Procedural,
        }
    }

    pub fn build(&self) -> Result<Box<dyn AssetProvider>, AssetError> {
        Ok(match self {
            ProviderKind::Procedural => Box::new(ProceduralProvider),
            ProviderKind::Remote { endpoint } => Box::new(RemoteProvider::new(endpoint.clone(), DEFAULT_REMOTE_TIMEOUT)?),
        })
    }
}
