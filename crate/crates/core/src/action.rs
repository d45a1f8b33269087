//! The action API: wire format, response parsing, batch validation and execution.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assets::{fallback_texture, AssetProvider, AssetRequest};
use crate::camera::{focus_on, view_scene, CameraState, Direction, View};
use crate::math::{Axis, Vec3};
use crate::scene::{copy_names, FloorTexture, ScaleValue, Scene};

/// Largest `Duplicate` count accepted in one action.
pub const MAX_DUPLICATE_COUNT: i64 = 64;
/// Batches touching more distinct objects than this are accepted with a warning.
pub const OBJECTS_PER_BATCH_HINT: usize = 3;

/// One call of the action API. Axis, view and direction arguments keep the
/// model's raw spelling so out-of-domain values surface at validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Create { name: String, description: String },
    Duplicate { name: String, count: i64 },
    Delete { name: String },
    Translate { name: String, axis: String, distance: f64 },
    Place { name: String, position: [f64; 3] },
    Rotate { name: String, axis: String, angle_degrees: f64 },
    Scale { name: String, value: ScaleValue },
    ViewScene { view: String, zoom: f64 },
    FocusOn { target: String, view: String, zoom: f64 },
    RotateCamera { horizontal: f64, vertical: f64 },
    MoveCamera { direction: String, distance: f64 },
    GenerateFloorTexture { description: String },
    Finish,
}

pub const ACTION_TYPES: [&str; 13] = [
    "Create",
    "Duplicate",
    "Delete",
    "Translate",
    "Place",
    "Rotate",
    "Scale",
    "ViewScene",
    "FocusOn",
    "RotateCamera",
    "MoveCamera",
    "GenerateFloorTexture",
    "Finish",
];

impl Action {
    pub fn type_name(&self) -> &'static str {
        match self {
            Action::Create { .. } => "Create",
            Action::Duplicate { .. } => "Duplicate",
            Action::Delete { .. } => "Delete",
            Action::Translate { .. } => "Translate",
            Action::Place { .. } => "Place",
            Action::Rotate { .. } => "Rotate",
            Action::Scale { .. } => "Scale",
            Action::ViewScene { .. } => "ViewScene",
            Action::FocusOn { .. } => "FocusOn",
            Action::RotateCamera { .. } => "RotateCamera",
            Action::MoveCamera { .. } => "MoveCamera",
            Action::GenerateFloorTexture { .. } => "GenerateFloorTexture",
            Action::Finish => "Finish",
        }
    }

    pub fn is_creation(&self) -> bool {
        matches!(self, Action::Create { .. } | Action::Duplicate { .. })
    }

    /// Scene object this action creates, copies, removes or manipulates.
    pub fn object_name(&self) -> Option<&str> {
        match self {
            Action::Create { name, .. }
            | Action::Duplicate { name, .. }
            | Action::Delete { name }
            | Action::Translate { name, .. }
            | Action::Place { name, .. }
            | Action::Rotate { name, .. }
            | Action::Scale { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn args(&self) -> Vec<Value> {
        match self {
            Action::Create { name, description } => vec![json!(name), json!(description)],
            Action::Duplicate { name, count } => vec![json!(name), json!(count)],
            Action::Delete { name } => vec![json!(name)],
            Action::Translate { name, axis, distance } => vec![json!(name), json!(axis), json!(distance)],
            Action::Place { name, position } => vec![json!(name), json!(position)],
            Action::Rotate { name, axis, angle_degrees } => vec![json!(name), json!(axis), json!(angle_degrees)],
            Action::Scale { name, value } => vec![
                json!(name),
                match value {
                    ScaleValue::Uniform(v) => json!(v),
                    ScaleValue::PerAxis(v) => json!(v.to_array()),
                },
            ],
            Action::ViewScene { view, zoom } => vec![json!(view), json!(zoom)],
            Action::FocusOn { target, view, zoom } => vec![json!(target), json!(view), json!(zoom)],
            Action::RotateCamera { horizontal, vertical } => vec![json!(horizontal), json!(vertical)],
            Action::MoveCamera { direction, distance } => vec![json!(direction), json!(distance)],
            Action::GenerateFloorTexture { description } => vec![json!(description)],
            Action::Finish => vec![],
        }
    }

    /// `{"type": ..., "args": [...]}`
    pub fn to_wire(&self) -> Value {
        json!({ "type": self.type_name(), "args": self.args() })
    }

    pub fn from_wire(value: &Value) -> Result<Action, ParseError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ParseError::MalformedJson("each action must be an object".into()))?;
        let ty = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| ParseError::MalformedJson("action is missing a string \"type\"".into()))?;
        let empty = Vec::new();
        let args = match obj.get("args") {
            None | Some(Value::Null) => &empty,
            Some(Value::Array(a)) => a,
            Some(_) => return Err(ParseError::MalformedJson(format!("{ty}: \"args\" must be a list"))),
        };
        Args { ty, args }.build()
    }
}

impl fmt::Display for Action {
    /// Call syntax, e.g. `Rotate("chair", "Z", 90.0)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args().iter().map(Value::to_string).collect();
        write!(f, "{}({})", self.type_name(), args.join(", "))
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Action::from_wire(&v).map_err(serde::de::Error::custom)
    }
}

struct Args<'a> {
    ty: &'a str,
    args: &'a [Value],
}

impl Args<'_> {
    fn arity(&self, min: usize, max: usize) -> Result<(), ParseError> {
        let n = self.args.len();
        if n < min || n > max {
            let expected = if min == max {
                min.to_string()
            } else {
                format!("{min} to {max}")
            };
            return Err(ParseError::ArityMismatch {
                action: self.ty.to_string(),
                expected,
                got: n,
            });
        }
        Ok(())
    }

    fn bad(&self, index: usize, message: &str) -> ParseError {
        ParseError::BadArgument {
            action: self.ty.to_string(),
            index,
            message: message.to_string(),
        }
    }

    fn string(&self, i: usize) -> Result<String, ParseError> {
        self.args[i]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.bad(i, "expected a string"))
    }

    fn number(&self, i: usize) -> Result<f64, ParseError> {
        self.args[i].as_f64().ok_or_else(|| self.bad(i, "expected a number"))
    }

    fn integer(&self, i: usize) -> Result<i64, ParseError> {
        let v = &self.args[i];
        if let Some(n) = v.as_i64() {
            return Ok(n);
        }
        match v.as_f64() {
            Some(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Ok(x as i64),
            _ => Err(self.bad(i, "expected an integer")),
        }
    }

    fn triple(&self, i: usize) -> Result<[f64; 3], ParseError> {
        let list = self.args[i]
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| self.bad(i, "expected a list of 3 numbers"))?;
        let mut out = [0.0; 3];
        for (slot, v) in out.iter_mut().zip(list) {
            *slot = v.as_f64().ok_or_else(|| self.bad(i, "expected a list of 3 numbers"))?;
        }
        Ok(out)
    }

    fn optional_view(&self, i: usize) -> Result<String, ParseError> {
        if i < self.args.len() {
            self.string(i)
        } else {
            Ok("Iso".to_string())
        }
    }

    fn optional_zoom(&self, i: usize) -> Result<f64, ParseError> {
        if i < self.args.len() {
            self.number(i)
        } else {
            Ok(1.0)
        }
    }

    fn build(&self) -> Result<Action, ParseError> {
        Ok(match self.ty {
            "Create" => {
                self.arity(2, 2)?;
                Action::Create {
                    name: self.string(0)?,
                    description: self.string(1)?,
                }
            }
            "Duplicate" => {
                self.arity(2, 2)?;
                Action::Duplicate {
                    name: self.string(0)?,
                    count: self.integer(1)?,
                }
            }
            "Delete" => {
                self.arity(1, 1)?;
                Action::Delete { name: self.string(0)? }
            }
            "Translate" => {
                self.arity(3, 3)?;
                Action::Translate {
                    name: self.string(0)?,
                    axis: self.string(1)?,
                    distance: self.number(2)?,
                }
            }
            "Place" => {
                self.arity(2, 2)?;
                Action::Place {
                    name: self.string(0)?,
                    position: self.triple(1)?,
                }
            }
            "Rotate" => {
                self.arity(3, 3)?;
                Action::Rotate {
                    name: self.string(0)?,
                    axis: self.string(1)?,
                    angle_degrees: self.number(2)?,
                }
            }
            "Scale" => {
                self.arity(2, 2)?;
                let value = if self.args[1].is_array() {
                    ScaleValue::PerAxis(self.triple(1)?.into())
                } else {
                    ScaleValue::Uniform(self.number(1).map_err(|_| self.bad(1, "expected a number or a list of 3 numbers"))?)
                };
                Action::Scale {
                    name: self.string(0)?,
                    value,
                }
            }
            "ViewScene" => {
                self.arity(0, 2)?;
                Action::ViewScene {
                    view: self.optional_view(0)?,
                    zoom: self.optional_zoom(1)?,
                }
            }
            "FocusOn" => {
                self.arity(1, 3)?;
                Action::FocusOn {
                    target: self.string(0)?,
                    view: self.optional_view(1)?,
                    zoom: self.optional_zoom(2)?,
                }
            }
            "RotateCamera" => {
                self.arity(2, 2)?;
                Action::RotateCamera {
                    horizontal: self.number(0)?,
                    vertical: self.number(1)?,
                }
            }
            "MoveCamera" => {
                self.arity(2, 2)?;
                Action::MoveCamera {
                    direction: self.string(0)?,
                    distance: self.number(1)?,
                }
            }
            "GenerateFloorTexture" => {
                self.arity(1, 1)?;
                Action::GenerateFloorTexture {
                    description: self.string(0)?,
                }
            }
            "Finish" => {
                self.arity(0, 0)?;
                Action::Finish
            }
            other => return Err(ParseError::UnknownActionType(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no fenced action block found after \"Action:\"")]
    NoActionBlock,
    #[error("action block is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("unknown action type {0:?}")]
    UnknownActionType(String),
    #[error("{action} takes {expected} argument(s), got {got}")]
    ArityMismatch { action: String, expected: String, got: usize },
    #[error("{action} argument {index}: {message}")]
    BadArgument { action: String, index: usize, message: String },
    #[error("action list is empty")]
    EmptyBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBatch {
    pub reason: String,
    pub actions: Vec<Action>,
}

impl ActionBatch {
    pub fn new(actions: Vec<Action>) -> Self {
        Self {
            reason: String::new(),
            actions,
        }
    }

    /// Model-facing text in the expected `Reason:` / `Action:` layout.
    pub fn to_response_text(&self) -> String {
        let list = Value::Array(self.actions.iter().map(Action::to_wire).collect());
        format!("Reason: {}\n\nAction:\n```json\n{}\n```\n", self.reason, list)
    }
}

/// Extracts the reasoning and the first fenced block after `Action:`.
pub fn parse_response(text: &str) -> Result<ActionBatch, ParseError> {
    let action_at = text.find("Action:").ok_or(ParseError::NoActionBlock)?;
    let reason = match text.find("Reason:") {
        Some(r) if r < action_at => text[r + "Reason:".len()..action_at].trim().to_string(),
        Some(r) => text[r + "Reason:".len()..].trim().to_string(),
        None => String::new(),
    };
    let after = &text[action_at + "Action:".len()..];
    let open = after.find("```").ok_or(ParseError::NoActionBlock)?;
    let mut body = &after[open + 3..];
    if body.len() >= 4 && body[..4].eq_ignore_ascii_case("json") {
        body = &body[4..];
    }
    let close = body.find("```").ok_or(ParseError::NoActionBlock)?;
    let value: Value = serde_json::from_str(body[..close].trim()).map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    let list = value
        .as_array()
        .ok_or_else(|| ParseError::MalformedJson("expected a JSON list of actions".into()))?;
    if list.is_empty() {
        return Err(ParseError::EmptyBatch);
    }
    let actions = list.iter().map(Action::from_wire).collect::<Result<Vec<_>, _>>()?;
    Ok(ActionBatch { reason, actions })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub accepted: bool,
    pub rejection_reason: Option<String>,
    pub warnings: Vec<String>,
}

impl ValidationVerdict {
    fn reject(reason: String) -> Self {
        Self {
            accepted: false,
            rejection_reason: Some(reason),
            warnings: Vec::new(),
        }
    }
}

fn check_finite(label: &str, values: &[f64]) -> Result<(), String> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(format!("{label} must be finite"))
    }
}

fn check_zoom(zoom: f64) -> Result<(), String> {
    if zoom.is_finite() && zoom > 0.0 {
        Ok(())
    } else {
        Err(format!("zoom must be positive, got {zoom}"))
    }
}

/// Domain and name checks for one action against the simulated set of names.
fn check_action(action: &Action, names: &mut BTreeSet<String>) -> Result<(), String> {
    let known = |names: &BTreeSet<String>, n: &str| {
        if names.contains(n) {
            Ok(())
        } else {
            Err(format!("unknown object {n:?}"))
        }
    };
    let axis = |a: &str| a.parse::<Axis>().map(|_| ()).map_err(|e| e.to_string());
    let view = |v: &str| v.parse::<View>().map(|_| ()).map_err(|e| e.to_string());
    match action {
        Action::Create { name, description } => {
            if name.is_empty() {
                return Err("object name must not be empty".into());
            }
            if names.contains(name) {
                return Err(format!("an object named {name:?} already exists"));
            }
            if description.trim().is_empty() {
                return Err(format!("description for {name:?} is empty"));
            }
            names.insert(name.clone());
        }
        Action::Duplicate { name, count } => {
            known(names, name)?;
            if !(1..=MAX_DUPLICATE_COUNT).contains(count) {
                return Err(format!("duplicate count must be between 1 and {MAX_DUPLICATE_COUNT}, got {count}"));
            }
            let copies = copy_names(name, *count as usize, |n| names.contains(n));
            names.extend(copies);
        }
        Action::Delete { name } => {
            known(names, name)?;
            names.remove(name);
        }
        Action::Translate { name, axis: a, distance } => {
            known(names, name)?;
            axis(a)?;
            check_finite("distance", &[*distance])?;
        }
        Action::Place { name, position } => {
            known(names, name)?;
            check_finite("position", position)?;
        }
        Action::Rotate {
            name,
            axis: a,
            angle_degrees,
        } => {
            known(names, name)?;
            axis(a)?;
            check_finite("angle", &[*angle_degrees])?;
        }
        Action::Scale { name, value } => {
            known(names, name)?;
            let v = value.to_vec();
            if !(v.is_finite() && v.min_element() > 0.0) {
                return Err(format!("scale components must be positive, got {:?}", v.to_array()));
            }
        }
        Action::ViewScene { view: v, zoom } => {
            view(v)?;
            check_zoom(*zoom)?;
        }
        Action::FocusOn { target, view: v, zoom } => {
            known(names, target)?;
            view(v)?;
            check_zoom(*zoom)?;
        }
        Action::RotateCamera { horizontal, vertical } => check_finite("rotation", &[*horizontal, *vertical])?,
        Action::MoveCamera { direction, distance } => {
            direction.parse::<Direction>().map_err(|e| e.to_string())?;
            if !(distance.is_finite() && *distance >= 0.0) {
                return Err(format!("move distance must be non-negative, got {distance}"));
            }
        }
        Action::GenerateFloorTexture { description } => {
            if description.trim().is_empty() {
                return Err("floor texture description is empty".into());
            }
        }
        Action::Finish => {}
    }
    Ok(())
}

/// Batch-level rules, then per-action checks in order. Any failure rejects the whole batch.
pub fn validate_batch(batch: &ActionBatch, scene: &Scene) -> ValidationVerdict {
    let actions = &batch.actions;
    if actions.is_empty() {
        return ValidationVerdict::reject("the action list is empty".into());
    }
    let creating = actions.iter().any(Action::is_creation);
    if creating && actions.iter().any(|a| !a.is_creation()) {
        return ValidationVerdict::reject(
            "Create and Duplicate must be executed in a separate batch without any other action".into(),
        );
    }
    if actions.len() > 1 && actions.iter().any(|a| matches!(a, Action::Finish)) {
        return ValidationVerdict::reject("Finish must be called alone as a single batch".into());
    }
    let mut names: BTreeSet<String> = scene.objects().iter().map(|o| o.name().to_string()).collect();
    for (i, action) in actions.iter().enumerate() {
        if let Err(e) = check_action(action, &mut names) {
            return ValidationVerdict::reject(format!("action {} ({}): {e}", i + 1, action.type_name()));
        }
    }
    let touched: BTreeSet<&str> = actions.iter().filter_map(Action::object_name).collect();
    let mut warnings = Vec::new();
    if touched.len() > OBJECTS_PER_BATCH_HINT {
        warnings.push(format!(
            "this batch touched {} objects; work on at most {OBJECTS_PER_BATCH_HINT} objects per batch",
            touched.len()
        ));
    }
    ValidationVerdict {
        accepted: true,
        rejection_reason: None,
        warnings,
    }
}

/// Source of an engine-to-agent notification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageOrigin {
    Collision,
    BatchRejected,
    ProviderFailure,
    UserEdit,
    ParseFailure,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub origin: MessageOrigin,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    /// Actions that took effect; failed provider calls are left out.
    pub executed: Vec<Action>,
    pub messages: Vec<Notice>,
    pub finished: bool,
}

/// Applies an accepted batch in order. Provider failures skip only the failing action.
pub fn execute_batch(
    scene: &mut Scene,
    camera: &mut CameraState,
    batch: &ActionBatch,
    provider: &dyn AssetProvider,
) -> ExecutionOutcome {
    let mut out = ExecutionOutcome {
        executed: Vec::new(),
        messages: Vec::new(),
        finished: false,
    };
    for action in &batch.actions {
        match apply(scene, camera, action, provider) {
            Ok(notes) => {
                out.messages.extend(notes);
                out.executed.push(action.clone());
                out.finished |= matches!(action, Action::Finish);
            }
            Err(note) => out.messages.push(note),
        }
    }
    out
}

fn apply(
    scene: &mut Scene,
    camera: &mut CameraState,
    action: &Action,
    provider: &dyn AssetProvider,
) -> Result<Vec<Notice>, Notice> {
    let failed = |e: &dyn fmt::Display| Notice {
        origin: MessageOrigin::Warning,
        text: format!("{action} failed: {e}"),
    };
    let axis = |a: &str| a.parse::<Axis>().map_err(|e| failed(&e));
    let view = |v: &str| v.parse::<View>().map_err(|e| failed(&e));
    match action {
        Action::Create { name, description } => {
            let creation_failed = || Notice {
                origin: MessageOrigin::ProviderFailure,
                text: format!("creation failed: {name}"),
            };
            let request = AssetRequest::new(name.clone(), description.clone()).map_err(|_| creation_failed())?;
            let mesh = provider.generate_asset(&request).map_err(|_| creation_failed())?;
            scene.add_object(name, mesh).map_err(|e| failed(&e))?;
        }
        Action::Duplicate { name, count } => {
            scene.duplicate(name, *count).map_err(|e| failed(&e))?;
        }
        Action::Delete { name } => {
            scene.delete(name).map_err(|e| failed(&e))?;
        }
        Action::Translate { name, axis: a, distance } => {
            scene.translate(name, axis(a)?, *distance).map_err(|e| failed(&e))?
        }
        Action::Place { name, position } => scene.place(name, Vec3::from(*position)).map_err(|e| failed(&e))?,
        Action::Rotate {
            name,
            axis: a,
            angle_degrees,
        } => scene.rotate(name, axis(a)?, *angle_degrees).map_err(|e| failed(&e))?,
        Action::Scale { name, value } => scene.set_scale(name, *value).map_err(|e| failed(&e))?,
        Action::ViewScene { view: v, zoom } => *camera = view_scene(scene, view(v)?, *zoom).map_err(|e| failed(&e))?,
        Action::FocusOn { target, view: v, zoom } => {
            *camera = focus_on(scene, target, view(v)?, *zoom).map_err(|e| failed(&e))?
        }
        Action::RotateCamera { horizontal, vertical } => *camera = camera.rotate(*horizontal, *vertical),
        Action::MoveCamera { direction, distance } => {
            let d = direction.parse::<Direction>().map_err(|e| failed(&e))?;
            *camera = camera.moved(d, *distance).map_err(|e| failed(&e))?;
        }
        Action::GenerateFloorTexture { description } => {
            return Ok(match provider.generate_texture(description) {
                Ok(texture) => {
                    scene.floor_texture = Some(FloorTexture::new(texture));
                    Vec::new()
                }
                Err(e) => {
                    scene.floor_texture = Some(FloorTexture::new(fallback_texture(description)));
                    vec![Notice {
                        origin: MessageOrigin::Warning,
                        text: format!("floor texture generation failed ({e}); a plain checker texture is used instead"),
                    }]
                }
            });
        }
        Action::Finish => {}
    }
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetError, ProceduralProvider, TextureImage};
    use crate::geometry::{mesh::unit_cube, TriangleMesh};
    use proptest::prelude::*;

    struct Failing;

    impl AssetProvider for Failing {
        fn generate_asset(&self, _: &AssetRequest) -> Result<TriangleMesh, AssetError> {
            Err(AssetError::ProviderUnavailable("offline".into()))
        }
        fn generate_texture(&self, _: &str) -> Result<TextureImage, AssetError> {
            Err(AssetError::ProviderUnavailable("offline".into()))
        }
    }

    fn wrap(json: &str) -> String {
        format!("Reason: testing\n\nAction:\n```json\n{json}\n```")
    }

    fn batch(json: &str) -> ActionBatch {
        parse_response(&wrap(json)).unwrap()
    }

    fn scene_with(names: &[&str]) -> Scene {
        let mut s = Scene::new();
        for n in names {
            s.add_object(n, unit_cube()).unwrap();
        }
        s
    }

    #[test]
    fn parses_rotate_example() {
        let text = "Reason: turn it\nAction:\n```json[{\"type\":\"Rotate\",\"args\":[\"chair\",\"Z\",90]}]```";
        let b = parse_response(text).unwrap();
        assert_eq!(b.reason, "turn it");
        assert_eq!(
            b.actions,
            vec![Action::Rotate {
                name: "chair".into(),
                axis: "Z".into(),
                angle_degrees: 90.0
            }]
        );
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_response(&wrap(r#"[{"type":"Fly","args":[]}]"#)).unwrap_err(),
            ParseError::UnknownActionType("Fly".into())
        );
        assert!(matches!(
            parse_response(&wrap(r#"[{"type":"Place","args":["chair"]}]"#)).unwrap_err(),
            ParseError::ArityMismatch { got: 1, .. }
        ));
        assert_eq!(parse_response("Reason: hm").unwrap_err(), ParseError::NoActionBlock);
        assert_eq!(parse_response("Action: nothing fenced").unwrap_err(), ParseError::NoActionBlock);
        assert!(matches!(parse_response(&wrap("[{")).unwrap_err(), ParseError::MalformedJson(_)));
        assert_eq!(parse_response(&wrap("[]")).unwrap_err(), ParseError::EmptyBatch);
        assert!(matches!(
            parse_response(&wrap(r#"[{"type":"Translate","args":["a","X","far"]}]"#)).unwrap_err(),
            ParseError::BadArgument { index: 2, .. }
        ));
    }

    #[test]
    fn camera_defaults() {
        let b = batch(r#"[{"type":"ViewScene","args":[]},{"type":"FocusOn","args":["a"]}]"#);
        assert_eq!(
            b.actions,
            vec![
                Action::ViewScene {
                    view: "Iso".into(),
                    zoom: 1.0
                },
                Action::FocusOn {
                    target: "a".into(),
                    view: "Iso".into(),
                    zoom: 1.0
                }
            ]
        );
    }

    #[test]
    fn display_is_call_syntax() {
        let a = Action::Place {
            name: "desk".into(),
            position: [1.0, -2.5, 0.0],
        };
        assert_eq!(a.to_string(), r#"Place("desk", [1.0,-2.5,0.0])"#);
        assert_eq!(Action::Finish.to_string(), "Finish()");
    }

    #[test]
    fn batch_rules() {
        let s = scene_with(&["a", "b", "c", "d"]);
        let v = validate_batch(
            &batch(r#"[{"type":"Create","args":["x","a vase"]},{"type":"Place","args":["a",[0,0,0]]}]"#),
            &s,
        );
        assert!(!v.accepted);
        assert!(v.rejection_reason.unwrap().contains("separate batch"));

        let v = validate_batch(&batch(r#"[{"type":"Finish","args":[]},{"type":"Place","args":["a",[0,0,0]]}]"#), &s);
        assert!(!v.accepted);
        assert!(v.rejection_reason.unwrap().contains("Finish"));

        let v = validate_batch(
            &batch(
                r#"[{"type":"Place","args":["a",[1,0,0]]},{"type":"Rotate","args":["b","Z",10]},
                    {"type":"Scale","args":["c",2]},{"type":"Translate","args":["d","x",1]}]"#,
            ),
            &s,
        );
        assert!(v.accepted);
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn domain_and_name_checks() {
        let s = scene_with(&["a"]);
        for bad in [
            r#"[{"type":"Place","args":["ghost",[0,0,0]]}]"#,
            r#"[{"type":"Translate","args":["a","W",1]}]"#,
            r#"[{"type":"ViewScene","args":["Bottom",1]}]"#,
            r#"[{"type":"ViewScene","args":["Top",0]}]"#,
            r#"[{"type":"MoveCamera","args":["Sideways",1]}]"#,
            r#"[{"type":"Scale","args":["a",[1,0,1]]}]"#,
            r#"[{"type":"Duplicate","args":["a",0]}]"#,
            r#"[{"type":"Create","args":["a","another"]}]"#,
            r#"[{"type":"Delete","args":["a"]},{"type":"Place","args":["a",[0,0,0]]}]"#,
        ] {
            let v = validate_batch(&batch(bad), &s);
            assert!(!v.accepted, "{bad}");
            assert!(!v.rejection_reason.unwrap().is_empty());
        }
        // names created earlier in the batch are visible to later actions
        let v = validate_batch(
            &batch(r#"[{"type":"Duplicate","args":["a",2]},{"type":"Duplicate","args":["a_3",1]}]"#),
            &s,
        );
        assert!(v.accepted, "{:?}", v.rejection_reason);
    }

    #[test]
    fn executes_in_order() {
        let mut s = scene_with(&["a"]);
        let mut cam = CameraState::default();
        let b = batch(r#"[{"type":"Place","args":["a",[1,1,0]]},{"type":"Rotate","args":["a","Z",45]}]"#);
        let out = execute_batch(&mut s, &mut cam, &b, &ProceduralProvider);
        assert_eq!(out.executed.len(), 2);
        let a = s.get("a").unwrap();
        assert_eq!(a.rotation.z, 45.0);
        assert_eq!((a.position.x, a.position.y), (1.0, 1.0));
        assert!(a.world_aabb().min.z.abs() < 1e-12);
    }

    #[test]
    fn failing_provider_reports_creation_failure() {
        let mut s = Scene::new();
        let mut cam = CameraState::default();
        let out = execute_batch(
            &mut s,
            &mut cam,
            &batch(r#"[{"type":"Create","args":["vase","ceramic vase"]}]"#),
            &Failing,
        );
        assert!(s.is_empty());
        assert!(out.executed.is_empty());
        assert_eq!(
            out.messages,
            vec![Notice {
                origin: MessageOrigin::ProviderFailure,
                text: "creation failed: vase".into()
            }]
        );

        let out = execute_batch(
            &mut s,
            &mut cam,
            &batch(r#"[{"type":"GenerateFloorTexture","args":["oak"]}]"#),
            &Failing,
        );
        assert_eq!(out.messages.len(), 1);
        assert_eq!(s.floor_texture.as_ref().unwrap().image, fallback_texture("oak"));
    }

    #[test]
    fn finish_only_flags() {
        let mut s = scene_with(&["a"]);
        let before = s.to_json();
        let mut cam = CameraState::default();
        let out = execute_batch(&mut s, &mut cam, &batch(r#"[{"type":"Finish","args":[]}]"#), &ProceduralProvider);
        assert!(out.finished);
        assert_eq!(s.to_json(), before);
    }

    fn name() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,8}"
    }

    fn num() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, Just(0.0), Just(90.0), (-1000i32..1000).prop_map(f64::from)]
    }

    fn action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (name(), "[a-zA-Z0-9 ,.-]{1,20}").prop_map(|(name, description)| Action::Create { name, description }),
            (name(), 1i64..100).prop_map(|(name, count)| Action::Duplicate { name, count }),
            name().prop_map(|name| Action::Delete { name }),
            (name(), "[XYZxyz]", num()).prop_map(|(name, axis, distance)| Action::Translate { name, axis, distance }),
            (name(), num(), num(), num()).prop_map(|(name, x, y, z)| Action::Place {
                name,
                position: [x, y, z]
            }),
            (name(), "[XYZ]", num()).prop_map(|(name, axis, angle_degrees)| Action::Rotate {
                name,
                axis,
                angle_degrees
            }),
            (name(), num()).prop_map(|(name, v)| Action::Scale {
                name,
                value: ScaleValue::Uniform(v)
            }),
            (name(), num(), num(), num()).prop_map(|(name, x, y, z)| Action::Scale {
                name,
                value: ScaleValue::PerAxis(Vec3::new(x, y, z))
            }),
            ("Top|Front|Side|Iso", num()).prop_map(|(view, zoom)| Action::ViewScene { view, zoom }),
            (name(), "Top|Front|Side|Iso", num()).prop_map(|(target, view, zoom)| Action::FocusOn { target, view, zoom }),
            (num(), num()).prop_map(|(horizontal, vertical)| Action::RotateCamera { horizontal, vertical }),
            ("Forward|Backward|Left|Right|Up|Down", num()).prop_map(|(direction, distance)| Action::MoveCamera {
                direction,
                distance
            }),
            "[a-zA-Z0-9 ,.-]{1,20}".prop_map(|description| Action::GenerateFloorTexture { description }),
            Just(Action::Finish),
        ]
    }

    proptest! {
        #[test]
        fn wire_round_trip(a in action()) {
            prop_assert_eq!(Action::from_wire(&a.to_wire()).unwrap(), a.clone());
            let text = serde_json::to_string(&a).unwrap();
            prop_assert_eq!(serde_json::from_str::<Action>(&text).unwrap(), a);
        }

        #[test]
        fn response_text_round_trip(actions in prop::collection::vec(action(), 1..5)) {
            let b = ActionBatch { reason: "because".into(), actions };
            prop_assert_eq!(parse_response(&b.to_response_text()).unwrap(), b);
        }
    }
}
