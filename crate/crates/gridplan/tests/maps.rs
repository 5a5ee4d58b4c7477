use std::path::Path;

use gridplan::mapio;
use gridplan_core::advisor::build_init_prompt;
use gridplan_core::maps::{generate, Layout, SIZES};
use gridplan_core::search::SearchMode;

fn shipped() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

#[test]
fn shipped_maps_match_the_generator() {
    for layout in Layout::ALL {
        for n in SIZES {
            let path = shipped().join(format!("{}.map", layout.map_name(n)));
            let loaded = mapio::load_map_file(&path).unwrap();
            let generated = generate(layout, n);
            assert_eq!(loaded, generated, "{}", path.display());
            assert_eq!(mapio::map_sha256(&loaded), mapio::map_sha256(&generated));
        }
    }
    let corridor = mapio::load_map_file(&shipped().join("corridor.map")).unwrap();
    assert_eq!(corridor.to_text(), mapio::CORRIDOR);
    assert_eq!(mapio::resolve_maps(&format!("{}/*_24.map", shipped().display())).unwrap().len(), 3);
}

#[test]
fn init_prompt_lists_every_obstacle() {
    let map = generate(Layout::Aisle, 24);
    let prompt = build_init_prompt(&map, SearchMode::AStar);
    let n = map.obstacles().count();
    assert!(prompt.contains(&format!("Obstacles ({n} cells)")));
    let listed = prompt.lines().find(|l| l.starts_with("2. Obstacles")).unwrap();
    assert_eq!(listed.matches('(').count(), n + 1);
    assert!(prompt.contains(&format!("Initial state: {}", map.start())));
}

#[test]
fn catalogue_written_and_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let paths = mapio::write_catalogue(dir.path()).unwrap();
    assert_eq!(paths.len(), mapio::catalogue().len());
    for p in &paths {
        let m = mapio::load_map_file(p).unwrap();
        assert_eq!(Some(m.clone()), mapio::catalogue_map(m.name()));
    }
    assert!(mapio::resolve_maps(&format!("{}/*.nothing", dir.path().display())).is_err());
    assert!(mapio::map_from_arg("no_such_map").is_err());
    let bad = dir.path().join("bad.map");
    std::fs::write(&bad, "S..\n.x.\n..G\n").unwrap();
    assert!(mapio::load_map_file(&bad).is_err());
}
