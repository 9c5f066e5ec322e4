//! Keeps painted road markings that a prediction confirms.
//!
//! cargo run --example marking_refinement -- [seed]

use roadatlas::geometry::polygon_to_bbox;
use roadatlas::pipeline::{parse_markings, PipelineConfig};
use roadatlas::synthetic::{generate_scene, street_rig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let scene = generate_scene(seed);
    for m in &scene.markings {
        println!("planted {:?} prediction covers {:.0}%", m.rect, m.coverage * 100.0);
    }
    for tau in [0.2, 0.6, 0.9] {
        let cfg = PipelineConfig { overlap_threshold: tau, ..street_rig() };
        let result = parse_markings(&scene.image, &scene.prediction, &cfg)?;
        println!("tau {tau}: paint threshold {:?}", result.threshold);
        for c in &result.candidates {
            let where_ = match &c.image_contour {
                Some(contour) => format!("{:?}", polygon_to_bbox(&contour.to_polygon()?)?),
                None => "-".into(),
            };
            println!("  coverage {:.3} kept {:<5} {where_}", c.coverage, c.kept);
        }
    }
    Ok(())
}
