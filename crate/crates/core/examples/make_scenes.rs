//! Writes synthetic street scenes with their sidecars into a folder.
//!
//! cargo run --example make_scenes -- <out-dir> [count]

use std::path::PathBuf;

use roadatlas::synthetic::write_scene_dir;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scenes".into()));
    let count: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let scenes = write_scene_dir(&out, 0..count)?;
    for (name, scene) in &scenes {
        println!(
            "{name}: {} defects, {} markings ({} with coverage >= 0.6)",
            scene.defects.len(),
            scene.markings.len(),
            scene.expected_kept(0.6).count()
        );
    }
    Ok(())
}
