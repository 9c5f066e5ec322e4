//! Runs the per-image pipeline with a custom plate detector plugged in next to
//! the built-in fallback models.
//!
//! cargo run --example defect_pipeline -- [out-dir]

use std::path::PathBuf;
use std::sync::Arc;

use image::RgbImage;
use roadatlas::error::PipelineError;
use roadatlas::geometry::BoundingBox;
use roadatlas::pipeline::{process_image, Models, PlateDetector};
use roadatlas::synthetic::{generate_scene, street_rig};

/// Pretends a plate sits in the top-left corner of every frame.
struct FixedPlate;

impl PlateDetector for FixedPlate {
    fn detect_plates(&self, _image: &RgbImage) -> Result<Vec<BoundingBox>, PipelineError> {
        Ok(vec![BoundingBox::new(10.0, 10.0, 60.0, 30.0)?])
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into()));
    std::fs::create_dir_all(&out)?;
    let cfg = street_rig();
    let models = Models { plates: Arc::new(FixedPlate), ..Models::fallback(&cfg) };

    let scene = generate_scene(11);
    let outcome = process_image(&scene.image, scene.geo, &models, &cfg)?;
    outcome.anonymized.save(out.join("anonymized.png"))?;
    for (i, d) in outcome.defects.iter().enumerate() {
        println!(
            "{:<16} {:?} confidence {:.2} mask pixels {}",
            d.class.as_str(),
            d.bbox,
            d.confidence,
            d.mask.count_nonzero()
        );
        d.mask.to_gray_image().save(out.join(format!("defect_{i}.png")))?;
    }
    println!("markings kept: {} of {}", outcome.markings.kept().count(), outcome.markings.candidates.len());
    println!("planted defects: {:?}", scene.defects.iter().map(|d| d.bbox).collect::<Vec<_>>());
    Ok(())
}
