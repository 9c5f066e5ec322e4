//! Seeded synthetic street scenes with known ground truth.
//!
//! A scene is a gray road trapezoid on a lighter verge. Dark bars stand in for
//! cracks and bright rectangles for painted markings; each marking comes with
//! a planted prediction covering a known fraction of its columns. The fixed
//! [`street_rig`] configuration matches the scene geometry.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{rasterize_polygon, BoundingBox, Point2, Polygon};
use crate::pipeline::{DefectClass, PipelineConfig};
use crate::store::GeoPoint;

pub const SCENE_WIDTH: u32 = 320;
pub const SCENE_HEIGHT: u32 = 240;

/// Street-view road trapezoid, clockwise from the far-left corner.
pub const ROAD_CORNERS: [(f64, f64); 4] = [(110.0, 90.0), (210.0, 90.0), (320.0, 240.0), (0.0, 240.0)];

/// Prediction coverages used for planted markings. None sits near the default
/// keep threshold, so bilinear blur at the edges cannot flip a decision.
pub const MARKING_COVERAGES: [f64; 4] = [1.0, 0.85, 0.3, 0.1];

const ROAD_GRAY: u8 = 110;
const VERGE_GRAY: u8 = 150;
const CRACK_GRAY: u8 = 25;
const PAINT_GRAY: u8 = 228;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDefect {
    pub bbox: BoundingBox,
    /// Class the aspect-ratio fallback detector should assign.
    pub class: DefectClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedMarking {
    pub rect: BoundingBox,
    /// Fraction of the rectangle the planted prediction covers.
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: RgbImage,
    /// Marking prediction (label 1 = marking).
    pub prediction: crate::geometry::Mask,
    pub defects: Vec<PlantedDefect>,
    pub markings: Vec<PlantedMarking>,
    pub geo: GeoPoint,
}

impl Scene {
    /// Planted markings the refinement should keep at threshold `tau`.
    pub fn expected_kept(&self, tau: f64) -> impl Iterator<Item = &PlantedMarking> {
        self.markings.iter().filter(move |m| m.coverage >= tau)
    }
}

/// Road ROI plus a bird's-eye homography that maps the road trapezoid onto the
/// full `SCENE_WIDTH x SCENE_HEIGHT` canvas.
pub fn street_rig() -> PipelineConfig {
    let src: Vec<Point2> = ROAD_CORNERS.iter().map(|&(x, y)| Point2::new(x, y)).collect();
    let (w, h) = (f64::from(SCENE_WIDTH), f64::from(SCENE_HEIGHT));
    let dst = [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, h), Point2::new(0.0, h)];
    let bev = crate::geometry::estimate_homography(&src, &dst).expect("rig corners are in general position");
    PipelineConfig {
        roi: Some(Polygon::new(src).expect("rig trapezoid")),
        bev_homography: bev,
        bev_size: Some((SCENE_WIDTH, SCENE_HEIGHT)),
        ..PipelineConfig::default()
    }
}

/// Item slots in the near part of the road: 3 columns by 2 rows, 50 x 44 px each.
fn slots() -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for row in 0..2 {
        for col in 0..3 {
            out.push((88 + col * 50, 144 + row * 44));
        }
    }
    out
}

fn fill(img: &mut RgbImage, b: &BoundingBox, value: u8, rng: &mut ChaCha8Rng, jitter: i16) {
    let (x0, y0, x1, y1) = b.pixel_span(img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let v = (i16::from(value) + rng.random_range(-jitter..=jitter)).clamp(0, 255) as u8;
            img.put_pixel(x, y, Rgb([v, v, v]));
        }
    }
}

fn rect(x: u32, y: u32, w: u32, h: u32) -> BoundingBox {
    BoundingBox::new(f64::from(x), f64::from(y), f64::from(x + w), f64::from(y + h)).expect("positive size")
}

/// Deterministic scene for `seed`: one to three cracks and one to three markings.
pub fn generate_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let road = rasterize_polygon(&street_rig().roi.expect("rig has a roi"), SCENE_WIDTH, SCENE_HEIGHT)
        .expect("non-empty canvas");
    let mut image = RgbImage::new(SCENE_WIDTH, SCENE_HEIGHT);
    for (x, y, px) in image.enumerate_pixels_mut() {
        let base = if road.get(x, y) != 0 { ROAD_GRAY } else { VERGE_GRAY };
        let v = (i16::from(base) + rng.random_range(-6i16..=6)).clamp(0, 255) as u8;
        *px = Rgb([v, v, v]);
    }

    let mut free = slots();
    let mut take = |rng: &mut ChaCha8Rng| free.swap_remove(rng.random_range(0..free.len()));
    let n_defects = rng.random_range(1..=3);
    let n_markings = rng.random_range(1..=3);

    let mut defects = Vec::new();
    for _ in 0..n_defects {
        let (sx, sy) = take(&mut rng);
        let (w, h, class) = match rng.random_range(0..3) {
            0 => (40, 4, DefectClass::RoadTransverse),
            1 => (4, 36, DefectClass::RoadLongitudinal),
            _ => (12, 12, DefectClass::RoadBlock),
        };
        let x = sx + rng.random_range(0..=(46 - w));
        let y = sy + rng.random_range(0..=(40 - h));
        let bbox = rect(x, y, w, h);
        fill(&mut image, &bbox, CRACK_GRAY, &mut rng, 5);
        defects.push(PlantedDefect { bbox, class });
    }

    let mut prediction = crate::geometry::Mask::zeros(SCENE_WIDTH, SCENE_HEIGHT);
    let mut markings = Vec::new();
    for _ in 0..n_markings {
        let (sx, sy) = take(&mut rng);
        let (w, h) = if rng.random_bool(0.5) { (30, 14) } else { (14, 30) };
        let x = sx + rng.random_range(4..=(42 - w));
        let y = sy + rng.random_range(4..=(36 - h));
        let r = rect(x, y, w, h);
        fill(&mut image, &r, PAINT_GRAY, &mut rng, 3);
        let coverage = MARKING_COVERAGES[rng.random_range(0..MARKING_COVERAGES.len())];
        let cols = (coverage * f64::from(w)).round() as u32;
        for yy in y..y + h {
            for xx in x..x + cols {
                prediction.set(xx, yy, 1);
            }
        }
        markings.push(PlantedMarking { rect: r, coverage });
    }

    let geo = GeoPoint::new(-27.60 + seed as f64 * 1e-4, 153.10 + seed as f64 * 1e-4).expect("in range");
    Scene { image, prediction, defects, markings, geo }
}

/// Writes `scene_<seed>.png` with its `.geo.json` and `.pred.png` sidecars for
/// each seed. Returns the image file names in the order written.
pub fn write_scene_dir(dir: &Path, seeds: impl IntoIterator<Item = u64>) -> std::io::Result<Vec<(String, Scene)>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for seed in seeds {
        let scene = generate_scene(seed);
        let stem = format!("scene_{seed:04}");
        let io = |e: image::ImageError| std::io::Error::other(e.to_string());
        scene.image.save(dir.join(format!("{stem}.png"))).map_err(io)?;
        scene.prediction.to_gray_image().save(dir.join(format!("{stem}.pred.png"))).map_err(io)?;
        std::fs::write(dir.join(format!("{stem}.geo.json")), serde_json::to_vec(&scene.geo)?)?;
        out.push((format!("{stem}.png"), scene));
    }
    Ok(out)
}
