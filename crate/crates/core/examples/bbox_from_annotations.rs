//! Converts polygon annotations into detector training boxes.
//!
//! cargo run --example bbox_from_annotations -- [annotation.json]
//!
//! Without an argument a built-in document is used.

use roadatlas::pipeline::{annotation_to_detections, AnnotationDocument, PipelineConfig};

const SAMPLE: &str = r#"{
  "image": "frame_0001.jpg",
  "polygons": [
    { "class": "Road_Transverse", "points": [[12, 40], [80, 44], [78, 52], [10, 47]] },
    { "class": "Road_Crocodile", "points": [[120, 60], [160, 58], [170, 95], [130, 101], [115, 80]] },
    { "class": "crocodile", "points": [[200, 10], [230, 12], [215, 40]] }
  ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let doc = AnnotationDocument::from_json(&text)?;
    // Alternative spellings such as "crocodile" resolve through the class map.
    let mut cfg = PipelineConfig::default();
    cfg.class_map.insert("crocodile".into(), roadatlas::pipeline::DefectClass::RoadCrocodile);

    let boxes = annotation_to_detections(&doc.labelled_polygons(&cfg)?)?;
    println!("{}", doc.image);
    for (b, class) in boxes {
        println!("  {:<18} x {:>6.1}..{:<6.1} y {:>6.1}..{:<6.1}", class.as_str(), b.x_min, b.x_max, b.y_min, b.y_max);
    }
    Ok(())
}
