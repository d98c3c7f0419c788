use std::path::PathBuf;

use vibropol::config::Config;
use vibropol::presets::co2_analogue_config;

fn example_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples/co2_analogue.json")
}

#[test]
fn co2_example_matches_preset() {
    let expected = co2_analogue_config(0.05).unwrap();
    let loaded = Config::load(&example_path()).unwrap();
    assert_eq!(loaded.config, expected);
    let system = loaded.config.build_system().unwrap();
    loaded.config.build_backend(&system, &loaded.base_dir).unwrap();
}

#[test]
fn documented_example_matches_preset() {
    let doc = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.md")).unwrap();
    let start = doc.find("```json\n{\n  \"format\"").expect("example block") + "```json\n".len();
    let end = start + doc[start..].find("```").unwrap();
    let config = Config::from_json_str(&doc[start..end]).unwrap();
    assert_eq!(config, co2_analogue_config(0.05).unwrap());
}
