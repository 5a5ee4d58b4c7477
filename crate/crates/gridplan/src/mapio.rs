//! Map files on disk and the built-in catalogue.

use std::fs;
use std::path::{Path, PathBuf};

use gridplan_core::maps::{self, Layout};
use gridplan_core::{GridError, GridMap};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// File extension of the ASCII map format.
pub const MAP_EXT: &str = "map";

/// The one-row fixture used by smoke tests and the service examples.
pub const CORRIDOR: &str = "S...G\n";

#[derive(Debug, Error)]
pub enum MapLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: GridError },
    #[error("bad map pattern {0:?}: {1}")]
    Pattern(String, String),
    #[error("no map files match {0:?}")]
    NoMatch(String),
    #[error("unknown map {0:?} (neither a file nor a catalogue name)")]
    Unknown(String),
}

/// Load a map file; the map takes the file stem as its name.
pub fn load_map_file(path: &Path) -> Result<GridMap, MapLoadError> {
    let text = fs::read_to_string(path).map_err(|source| MapLoadError::Io { path: path.into(), source })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    GridMap::parse(name, &text).map_err(|source| MapLoadError::Parse { path: path.into(), source })
}

pub fn save_map_file(path: &Path, map: &GridMap) -> Result<(), MapLoadError> {
    fs::write(path, map.to_text()).map_err(|source| MapLoadError::Io { path: path.into(), source })
}

/// Expand a glob into a sorted, non-empty list of files.
pub fn resolve_maps(pattern: &str) -> Result<Vec<PathBuf>, MapLoadError> {
    let paths = glob::glob(pattern).map_err(|e| MapLoadError::Pattern(pattern.into(), e.to_string()))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| MapLoadError::Pattern(pattern.into(), e.to_string()))?;
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(MapLoadError::NoMatch(pattern.into()));
    }
    Ok(out)
}

/// Hex SHA-256 of the map's canonical text.
pub fn map_sha256(map: &GridMap) -> String {
    format!("{:x}", Sha256::digest(map.to_text().as_bytes()))
}

/// Generated layouts at every reference size, plus the corridor fixture.
pub fn catalogue() -> Vec<GridMap> {
    let mut all = maps::catalogue();
    all.push(GridMap::parse("corridor", CORRIDOR).expect("fixture parses"));
    all
}

pub fn catalogue_map(name: &str) -> Option<GridMap> {
    catalogue().into_iter().find(|m| m.name() == name)
}

/// Resolve a CLI argument: an existing file wins, otherwise a catalogue name.
pub fn map_from_arg(arg: &str) -> Result<GridMap, MapLoadError> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_map_file(path);
    }
    catalogue_map(arg).ok_or_else(|| MapLoadError::Unknown(arg.into()))
}

/// Write every catalogue map to `dir` as `<name>.map`.
pub fn write_catalogue(dir: &Path) -> Result<Vec<PathBuf>, MapLoadError> {
    fs::create_dir_all(dir).map_err(|source| MapLoadError::Io { path: dir.into(), source })?;
    catalogue()
        .iter()
        .map(|m| {
            let path = dir.join(format!("{}.{MAP_EXT}", m.name()));
            save_map_file(&path, m).map(|_| path)
        })
        .collect()
}

/// Catalogue entry as listed by the service.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct MapInfo {
    pub name: String,
    pub layout: Option<String>,
    pub width: u32,
    pub height: u32,
    pub obstacles: usize,
    pub sha256: String,
    pub text: String,
}

impl MapInfo {
    pub fn of(map: &GridMap) -> Self {
        let layout = Layout::ALL
            .into_iter()
            .find(|l| map.name().starts_with(&format!("{}_", l.slug())))
            .map(|l| l.title().to_string());
        Self {
            name: map.name().into(),
            layout,
            width: map.width(),
            height: map.height(),
            obstacles: map.obstacles().count(),
            sha256: map_sha256(map),
            text: map.to_text(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arg_resolution() {
        assert_eq!(map_from_arg("aisle_16").unwrap().width(), 16);
        assert_eq!(map_from_arg("corridor").unwrap().cell_count(), 5);
        assert!(matches!(map_from_arg("atlantis"), Err(MapLoadError::Unknown(_))));
    }

    #[test]
    fn info_names_layout() {
        let info = MapInfo::of(&catalogue_map("double_door_32").unwrap());
        assert_eq!(info.layout.as_deref(), Some("Double Door"));
        assert_eq!(info.sha256.len(), 64);
        assert_eq!(MapInfo::of(&catalogue_map("corridor").unwrap()).layout, None);
    }
}
