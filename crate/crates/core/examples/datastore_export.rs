//! Ingests synthetic scenes into a data root, reviews a few defects and
//! prints the CSV report.
//!
//! cargo run --example datastore_export -- <data-root>

use roadatlas::ingest::{ingest, scan_dir, IngestItem};
use roadatlas::pipeline::Models;
use roadatlas::store::{export_report, DefectFilter, ExportFormat, Store, ValidationState};
use roadatlas::synthetic::{street_rig, write_scene_dir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).ok_or("usage: datastore_export <data-root>")?;
    let store = Store::open(&root)?;
    let cfg = street_rig();
    let models = Models::fallback(&cfg);

    let scenes_dir = std::path::Path::new(&root).join("scenes");
    write_scene_dir(&scenes_dir, 0..4)?;
    for item in scan_dir(&scenes_dir)? {
        let item: IngestItem = item.map_err(|u| u.error)?;
        if store.has_source(&item.source_name) {
            continue;
        }
        let done = ingest(&store, &item, &models, &cfg)?;
        eprintln!("{}: {} defects, {} markings", item.source_name, done.defect_ids.len(), done.marking_ids.len());
    }

    for (i, d) in store.query_defects(&DefectFilter::default())?.iter().take(3).enumerate() {
        let status = if i % 2 == 0 { ValidationState::Confirmed } else { ValidationState::Rejected };
        store.set_validation(&d.id, status, "inspector")?;
    }
    let csv = export_report(&store, ExportFormat::Csv, &DefectFilter::default(), false)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}
