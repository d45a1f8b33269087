//! Scene state and the object-manipulation actions.
//!
//! Every mutating action finishes with an auto-lift of the objects it
//! touched, so no object's world box ever dips below the floor plane z = 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assets::TextureImage;
use crate::geometry::{mesh::hex_digest, world_aabb, Aabb, GeometryError, TriangleMesh};
use crate::math::{normalize_degrees, Axis, Vec3, WorldTransform};

/// Floor rectangle used when the scene has no objects: 4 m x 4 m.
pub const DEFAULT_FLOOR_HALF_EXTENT: f64 = 2.0;
/// Fractional padding added around object footprints for the floor quad.
pub const FLOOR_PADDING: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("an object named {0:?} already exists")]
    DuplicateName(String),
    #[error("object name must not be empty")]
    EmptyName,
    #[error("no object named {0:?}")]
    UnknownObject(String),
    #[error("invalid mesh: {0}")]
    Mesh(#[from] GeometryError),
    #[error("scale components must be positive and finite, got {0:?}")]
    NonPositiveScale([f64; 3]),
    #[error("count must be at least 1, got {0}")]
    BadCount(i64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene file: {0}")]
    Format(String),
}

/// Scale argument: uniform or per-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleValue {
    Uniform(f64),
    PerAxis(Vec3),
}

impl ScaleValue {
    pub fn to_vec(self) -> Vec3 {
        match self {
            ScaleValue::Uniform(v) => Vec3::splat(v),
            ScaleValue::PerAxis(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    name: String,
    mesh: Arc<TriangleMesh>,
    mesh_ref: String,
    local_extents: Vec3,
    pub position: Vec3,
    /// Euler degrees about X, Y, Z, each in `[-180, 180)`.
    pub rotation: Vec3,
    pub scale: Vec3,
}

impl SceneObject {
    /// Wraps a mesh that is already centered on its local origin.
    pub fn new(name: impl Into<String>, mesh: Arc<TriangleMesh>) -> Self {
        let mesh_ref = format!("meshes/{}.obj", &mesh.content_hash()[..16]);
        Self {
            name: name.into(),
            local_extents: mesh.aabb().extents(),
            mesh,
            mesh_ref,
            position: Vec3::ZERO,
            rotation: Vec3::ZERO,
            scale: Vec3::ONE,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    /// Session-relative path of the OBJ file holding this mesh.
    pub fn mesh_ref(&self) -> &str {
        &self.mesh_ref
    }

    /// Local box extents times scale; unaffected by rotation.
    pub fn size(&self) -> Vec3 {
        self.local_extents.mul_elem(self.scale)
    }

    pub fn transform(&self) -> WorldTransform {
        WorldTransform {
            position: self.position,
            rotation_deg: self.rotation,
            scale: self.scale,
        }
    }

    pub fn world_aabb(&self) -> Aabb {
        world_aabb(&self.mesh, &self.transform())
    }
}

/// Floor texture plus the session-relative file it was stored under.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorTexture {
    pub image: TextureImage,
    pub reference: String,
}

impl FloorTexture {
    /// Content-addressed reference under `textures/`.
    pub fn new(image: TextureImage) -> Self {
        let digest = hex_digest(&image.to_png());
        Self {
            reference: format!("textures/{}.png", &digest[..16]),
            image,
        }
    }
}

/// Names for `count` copies of `base`: `base_2`, `base_3`, ... skipping taken ones.
pub fn copy_names(base: &str, count: usize, taken: impl Fn(&str) -> bool) -> Vec<String> {
    (2u64..)
        .map(|k| format!("{base}_{k}"))
        .filter(|n| !taken(n))
        .take(count)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Scene {
    objects: Vec<SceneObject>,
    pub floor_texture: Option<FloorTexture>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.objects.iter().any(|o| o.name == name)
    }

    pub fn get(&self, name: &str) -> Result<&SceneObject, SceneError> {
        self.objects
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| SceneError::UnknownObject(name.to_string()))
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut SceneObject, SceneError> {
        self.objects
            .iter_mut()
            .find(|o| o.name == name)
            .ok_or_else(|| SceneError::UnknownObject(name.to_string()))
    }

    /// Appends an object with its pose untouched (no stacking, no lift).
    pub fn insert(&mut self, object: SceneObject) -> Result<(), SceneError> {
        if object.name.is_empty() {
            return Err(SceneError::EmptyName);
        }
        if self.contains(&object.name) {
            return Err(SceneError::DuplicateName(object.name));
        }
        self.objects.push(object);
        Ok(())
    }

    /// Adds a mesh at x = y = 0, stacked on whatever already occupies the origin footprint.
    pub fn add_object(&mut self, name: &str, mesh: TriangleMesh) -> Result<&SceneObject, SceneError> {
        if name.is_empty() {
            return Err(SceneError::EmptyName);
        }
        if self.contains(name) {
            return Err(SceneError::DuplicateName(name.to_string()));
        }
        let mut object = SceneObject::new(name, Arc::new(mesh.recentered()));
        self.place_stacked(&mut object);
        self.objects.push(object);
        Ok(self.objects.last().expect("just pushed"))
    }

    fn place_stacked(&self, object: &mut SceneObject) {
        object.position = Vec3::ZERO;
        let at_origin = object.world_aabb();
        let base = self.stacking_height(&at_origin);
        object.position.z = base - at_origin.min.z;
    }

    /// Highest top among objects whose XY footprint overlaps `footprint`, or 0.
    pub fn stacking_height(&self, footprint: &Aabb) -> f64 {
        self.objects
            .iter()
            .map(SceneObject::world_aabb)
            .filter(|b| b.overlaps_xy_strict(footprint))
            .fold(0.0, |top, b| top.max(b.max.z))
    }

    pub fn place(&mut self, name: &str, position: Vec3) -> Result<(), SceneError> {
        if !position.is_finite() {
            return Err(SceneError::NonFinite("position"));
        }
        self.get_mut(name)?.position = position;
        self.auto_lift(name)
    }

    pub fn translate(&mut self, name: &str, axis: Axis, distance: f64) -> Result<(), SceneError> {
        if !distance.is_finite() {
            return Err(SceneError::NonFinite("distance"));
        }
        self.get_mut(name)?.position[axis] += distance;
        self.auto_lift(name)
    }

    /// Sets (not increments) the rotation about one axis.
    pub fn rotate(&mut self, name: &str, axis: Axis, angle_degrees: f64) -> Result<(), SceneError> {
        if !angle_degrees.is_finite() {
            return Err(SceneError::NonFinite("angle"));
        }
        self.get_mut(name)?.rotation[axis] = normalize_degrees(angle_degrees);
        self.auto_lift(name)
    }

    pub fn set_scale(&mut self, name: &str, value: ScaleValue) -> Result<(), SceneError> {
        let v = value.to_vec();
        if !(v.is_finite() && v.min_element() > 0.0) {
            return Err(SceneError::NonPositiveScale(v.to_array()));
        }
        self.get_mut(name)?.scale = v;
        self.auto_lift(name)
    }

    /// Copies named `name_2`, `name_3`, ... (first free suffixes), each stacked at the origin.
    pub fn duplicate(&mut self, name: &str, count: i64) -> Result<Vec<String>, SceneError> {
        if count < 1 {
            return Err(SceneError::BadCount(count));
        }
        let source = self.get(name)?.clone();
        let names = copy_names(name, count as usize, |n| self.contains(n));
        let mut created = Vec::with_capacity(names.len());
        for copy_name in names {
            let mut copy = SceneObject {
                name: copy_name.clone(),
                ..source.clone()
            };
            self.place_stacked(&mut copy);
            self.objects.push(copy);
            created.push(copy_name);
        }
        Ok(created)
    }

    pub fn delete(&mut self, name: &str) -> Result<SceneObject, SceneError> {
        let idx = self
            .objects
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| SceneError::UnknownObject(name.to_string()))?;
        Ok(self.objects.remove(idx))
    }

    /// Raises the object so its world box rests on z = 0 if it dips below. Never lowers.
    pub fn auto_lift(&mut self, name: &str) -> Result<(), SceneError> {
        let object = self.get_mut(name)?;
        let min_z = object.world_aabb().min.z;
        if min_z < 0.0 {
            object.position.z -= min_z;
            // absorb rounding so a second lift is a no-op
            while object.world_aabb().min.z < 0.0 {
                object.position.z = object.position.z.next_up();
            }
        }
        Ok(())
    }

    /// Union of world boxes, or `None` for an empty scene.
    pub fn bounds(&self) -> Option<Aabb> {
        self.objects
            .iter()
            .map(SceneObject::world_aabb)
            .reduce(Aabb::union)
    }

    /// XY rectangle `(min, max)` of the floor quad: object footprints grown by 20%
    /// about their center, or the default 4 m square when empty.
    pub fn floor_extent(&self) -> ([f64; 2], [f64; 2]) {
        match self.bounds() {
            None => (
                [-DEFAULT_FLOOR_HALF_EXTENT; 2],
                [DEFAULT_FLOOR_HALF_EXTENT; 2],
            ),
            Some(b) => {
                let c = b.center();
                let h = b.extents() * (0.5 * (1.0 + FLOOR_PADDING));
                ([c.x - h.x, c.y - h.y], [c.x + h.x, c.y + h.y])
            }
        }
    }

    pub fn summary(&self) -> SceneSummary {
        SceneSummary {
            objects: self
                .objects
                .iter()
                .map(|o| ObjectSummary {
                    name: o.name.clone(),
                    position: round3(o.position),
                    rotation: round3(o.rotation),
                    scale: round3(o.scale),
                    size: round3(o.size()),
                })
                .collect(),
        }
    }

    /// The scene file document. Floats are written at full precision.
    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            objects: self
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    name: o.name.clone(),
                    position: o.position.to_array(),
                    rotation_deg: o.rotation.to_array(),
                    scale: o.scale.to_array(),
                    mesh_ref: o.mesh_ref.clone(),
                })
                .collect(),
            floor_texture_ref: self.floor_texture.as_ref().map(|t| t.reference.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scene file serializes")
    }

    /// Hex SHA-256 of the scene file. Mesh refs are content addressed, so geometry is covered.
    pub fn content_hash(&self) -> String {
        hex_digest(self.to_json().as_bytes())
    }

    /// Writes `scene.json` plus referenced meshes and textures under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SceneError> {
        for o in &self.objects {
            let path = dir.join(&o.mesh_ref);
            if !path.exists() {
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, o.mesh.to_obj())?;
            }
        }
        if let Some(tex) = &self.floor_texture {
            let path = dir.join(&tex.reference);
            if !path.exists() {
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, tex.image.to_png())?;
            }
        }
        fs::create_dir_all(dir)?;
        fs::write(dir.join("scene.json"), self.to_json())?;
        Ok(())
    }

    /// Loads a scene file; relative refs are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Scene, SceneError> {
        let text = fs::read_to_string(path)?;
        let file: SceneFile = serde_json::from_str(&text).map_err(|e| SceneError::Format(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scene::from_file(&file, base)
    }

    pub fn from_file(file: &SceneFile, base: &Path) -> Result<Scene, SceneError> {
        let mut meshes: BTreeMap<&str, Arc<TriangleMesh>> = BTreeMap::new();
        let mut scene = Scene::new();
        for rec in &file.objects {
            let mesh = match meshes.get(rec.mesh_ref.as_str()) {
                Some(m) => m.clone(),
                None => {
                    let text = fs::read_to_string(base.join(&rec.mesh_ref))?;
                    let m = Arc::new(TriangleMesh::from_obj(&text)?);
                    meshes.insert(&rec.mesh_ref, m.clone());
                    m
                }
            };
            let mut object = SceneObject::new(rec.name.clone(), mesh);
            object.mesh_ref = rec.mesh_ref.clone();
            object.position = rec.position.into();
            object.rotation = rec.rotation_deg.into();
            object.scale = rec.scale.into();
            if !(object.position.is_finite() && object.rotation.is_finite()) {
                return Err(SceneError::NonFinite("pose"));
            }
            if !(object.scale.is_finite() && object.scale.min_element() > 0.0) {
                return Err(SceneError::NonPositiveScale(rec.scale));
            }
            scene.insert(object)?;
        }
        if let Some(reference) = &file.floor_texture_ref {
            let bytes = fs::read(base.join(reference))?;
            let image = crate::render::Image::from_png(&bytes).map_err(|e| SceneError::Format(e.to_string()))?;
            scene.floor_texture = Some(FloorTexture {
                image: TextureImage::new(image, crate::assets::DEFAULT_TILE_SIZE).map_err(|e| SceneError::Format(e.to_string()))?,
                reference: reference.clone(),
            });
        }
        Ok(scene)
    }
}

fn round3(v: Vec3) -> [f64; 3] {
    v.to_array().map(|c| {
        let r = (c * 1000.0).round() / 1000.0;
        // avoid "-0.0" in the summary
        if r == 0.0 {
            0.0
        } else {
            r
        }
    })
}

/// Per-object pose data shown to the model, rounded to millimeters / millidegrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub objects: Vec<ObjectSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub name: String,
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub scale: [f64; 3],
    pub size: [f64; 3],
}

impl SceneSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub objects: Vec<ObjectRecord>,
    pub floor_texture_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub name: String,
    pub position: [f64; 3],
    pub rotation_deg: [f64; 3],
    pub scale: [f64; 3],
    pub mesh_ref: String,
}
