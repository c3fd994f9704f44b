use std::path::Path;

use contextuality_core::catalog;
use contextuality_core::System;

#[test]
fn shipped_fixtures_match_the_catalog() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, system) in catalog::fixtures() {
        let path = dir.join(catalog::fixture_file_name(&name));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            text.trim_end(),
            system.to_json(),
            "{} is stale; run `cargo run -p contextuality-core --example regen_fixtures`",
            path.display()
        );
        assert_eq!(System::parse_json(&text).unwrap(), system);
    }
}

#[test]
fn no_unexpected_fixture_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let expected: Vec<String> = catalog::fixtures().iter().map(|(n, _)| catalog::fixture_file_name(n)).collect();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(expected.contains(&name), "unexpected fixture {name}");
    }
}
