// Replays the fuzz corpus through the same checks the fuzz targets make.

use std::fs;
use std::path::Path;

use dcmg::{parse_scenario, to_toml, ExpectationTable};

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.display().to_string(),
                String::from_utf8_lossy(&fs::read(&p).unwrap()).into_owned(),
            )
        })
        .collect()
}

#[test]
fn scenario_seeds_round_trip() {
    let seeds = corpus("scenario_toml");
    assert!(!seeds.is_empty());
    for (name, text) in seeds {
        if let Ok(sc) = parse_scenario(&text) {
            assert_eq!(parse_scenario(&to_toml(&sc)).unwrap(), sc, "{name}");
        }
    }
}

#[test]
fn expectation_seeds_parse() {
    let seeds = corpus("expectations");
    assert!(!seeds.is_empty());
    for (name, text) in seeds {
        if let Ok(table) = ExpectationTable::parse(&text) {
            let _ = table.resolve(3);
            assert!(!table.windows().is_empty() || table.is_empty(), "{name}");
        }
    }
}
