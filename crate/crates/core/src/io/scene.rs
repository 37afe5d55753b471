use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SceneConfig;

use super::{read_text, write_atomic, CONVENTION, UNITS};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    units: String,
    convention: String,
    #[serde(flatten)]
    scene: SceneConfig,
}

/// Pretty JSON with `units` and `convention` keys, newline-terminated.
pub fn scene_json(scene: &SceneConfig) -> Result<String> {
    let file = SceneFile {
        units: UNITS.into(),
        convention: CONVENTION.into(),
        scene: scene.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| Error::invalid(format!("serializing scene: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_scene(text: &str, path: &Path) -> Result<SceneConfig> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if file.units != UNITS {
        return Err(Error::parse(
            path,
            0,
            format!("units is '{}', expected '{UNITS}'", file.units),
        ));
    }
    if file.convention != CONVENTION {
        return Err(Error::parse(
            path,
            0,
            format!("convention is '{}', expected '{CONVENTION}'", file.convention),
        ));
    }
    file.scene.validate()?;
    Ok(file.scene)
}

pub fn load_scene(path: &Path) -> Result<SceneConfig> {
    parse_scene(&read_text(path)?, path)
}

pub fn save_scene(path: &Path, scene: &SceneConfig) -> Result<()> {
    write_atomic(path, scene_json(scene)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RngStream;
    use crate::sim::generate_scene;

    #[test]
    fn round_trip_is_exact() {
        let scene = generate_scene("phocal-like", &mut RngStream::new(11)).unwrap();
        let text = scene_json(&scene).unwrap();
        let back = parse_scene(&text, Path::new("s.json")).unwrap();
        assert_eq!(back, scene);
        assert_eq!(scene_json(&back).unwrap(), text);
    }

    #[test]
    fn units_are_checked() {
        let scene = generate_scene("phocal-like", &mut RngStream::new(1)).unwrap();
        let text = scene_json(&scene).unwrap();
        let bad = text.replacen("\"units\": \"mm\"", "\"units\": \"m\"", 1);
        assert!(parse_scene(&bad, Path::new("s.json"))
            .unwrap_err()
            .to_string()
            .contains("units"));
        let missing = text.replacen("\"units\": \"mm\",", "", 1);
        assert!(parse_scene(&missing, Path::new("s.json")).is_err());
    }
}
