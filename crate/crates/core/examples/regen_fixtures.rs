//! Rewrites `crates/core/fixtures/*.json` from the catalog.
//!
//! Run with `cargo run -p contextuality-core --example regen_fixtures`.

use std::path::Path;

use contextuality_core::catalog;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, system) in catalog::fixtures() {
        let path = dir.join(catalog::fixture_file_name(&name));
        std::fs::write(&path, system.to_json() + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
