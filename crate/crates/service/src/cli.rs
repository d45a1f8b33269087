//! Argument values shared by the CLI subcommands.

use std::fs;
use std::path::Path;

use sceneloom_core::assets::ProviderKind;
use sceneloom_core::gateway::{GatewayKind, ScriptPolicy};

/// `remote`, `replay:<file>` (a JSON array of response strings) or `scripted:<policy>`.
pub fn parse_vlm(value: &str) -> Result<GatewayKind, String> {
    let (kind, arg) = value.split_once(':').unwrap_or((value, ""));
    match kind {
        "remote" if arg.is_empty() => GatewayKind::remote_from_env().map_err(|e| e.to_string()),
        "replay" if !arg.is_empty() => {
            let text = fs::read_to_string(Path::new(arg)).map_err(|e| format!("{arg}: {e}"))?;
            let responses: Vec<String> =
                serde_json::from_str(&text).map_err(|e| format!("{arg}: expected a JSON array of strings ({e})"))?;
            Ok(GatewayKind::Replay { responses })
        }
        "scripted" => {
            let policy = if arg.is_empty() { "grid-layout" } else { arg };
            policy.parse::<ScriptPolicy>().map_err(|e| e.to_string())?;
            Ok(GatewayKind::Scripted { policy: policy.into() })
        }
        _ => Err(format!("unknown --vlm value {value:?}; use remote, replay:<file> or scripted:<policy>")),
    }
}

/// Remote when the endpoint variable is set, otherwise the grid-layout script.
pub fn default_vlm() -> GatewayKind {
    GatewayKind::remote_from_env().unwrap_or_else(|_| GatewayKind::Scripted {
        policy: "grid-layout".into(),
    })
}

pub fn parse_assets(value: &str) -> Result<ProviderKind, String> {
    match value {
        "procedural" => Ok(ProviderKind::Procedural),
        "remote" => match ProviderKind::from_env() {
            ProviderKind::Procedural => Err(format!(
                "--assets remote needs {}",
                sceneloom_core::assets::ASSET_ENDPOINT_ENV
            )),
            remote => Ok(remote),
        },
        _ => Err(format!("unknown --assets value {value:?}; use procedural or remote")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_defaults_to_grid_layout() {
        assert_eq!(
            parse_vlm("scripted").unwrap(),
            GatewayKind::Scripted {
                policy: "grid-layout".into()
            }
        );
        assert!(parse_vlm("scripted:spin").is_err());
        assert!(parse_vlm("oracle").is_err());
    }

    #[test]
    fn replay_file_is_a_string_array() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        fs::write(&path, r#"["a", "b"]"#).unwrap();
        let kind = parse_vlm(&format!("replay:{}", path.display())).unwrap();
        assert_eq!(
            kind,
            GatewayKind::Replay {
                responses: vec!["a".into(), "b".into()]
            }
        );
        fs::write(&path, r#"{"a": 1}"#).unwrap();
        assert!(parse_vlm(&format!("replay:{}", path.display())).is_err());
    }

    #[test]
    fn asset_kinds() {
        assert_eq!(parse_assets("procedural").unwrap(), ProviderKind::Procedural);
        assert!(parse_assets("magic").is_err());
    }
}
