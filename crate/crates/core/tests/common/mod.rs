//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod http;

use std::io::Cursor;

use roadatlas::geometry::{Mask, Point2};

pub fn png(img: &image::RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn gray_png(img: &image::GrayImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

/// Crossing-number point-in-polygon test.
pub fn inside_even_odd(poly: &[Point2], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > y) != (b.y > y) {
            let xc = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Pixel-center rasterization by testing every pixel.
pub fn brute_raster(poly: &[Point2], w: u32, h: u32) -> Mask {
    Mask::from_fn(w, h, |x, y| inside_even_odd(poly, f64::from(x) + 0.5, f64::from(y) + 0.5))
}

/// |region and prediction| / |region| by counting.
pub fn brute_overlap(region: &Mask, pred: &Mask) -> f64 {
    let (mut inter, mut total) = (0usize, 0usize);
    for (&r, &p) in region.data().iter().zip(pred.data()) {
        if r != 0 {
            total += 1;
            inter += usize::from(p != 0);
        }
    }
    inter as f64 / total as f64
}

/// Maps a point through a row-major 3x3 matrix with plain arithmetic.
pub fn project(h: &[[f64; 3]; 3], x: f64, y: f64) -> (f64, f64) {
    let u = h[0][0] * x + h[0][1] * y + h[0][2];
    let v = h[1][0] * x + h[1][1] * y + h[1][2];
    let w = h[2][0] * x + h[2][1] * y + h[2][2];
    (u / w, v / w)
}

pub fn ascii_mask(rows: &[&str]) -> Mask {
    let h = rows.len() as u32;
    let w = rows[0].len() as u32;
    Mask::from_fn(w, h, |x, y| rows[y as usize].as_bytes()[x as usize] == b'#')
}

/// Clock advancing one second per reading, so insertion order is creation order.
pub struct StepClock(std::sync::Mutex<chrono::DateTime<chrono::Utc>>);

impl StepClock {
    pub fn new() -> std::sync::Arc<Self> {
        let start = chrono::DateTime::parse_from_rfc3339("2024-03-01T08:00:00Z").unwrap().to_utc();
        std::sync::Arc::new(Self(std::sync::Mutex::new(start)))
    }
}

impl roadatlas::store::Clock for StepClock {
    fn now(&self) -> chrono::DateTime<chrono::Utc> {
        let mut t = self.0.lock().unwrap();
        *t += chrono::Duration::seconds(1);
        *t
    }
}

/// What the test itself remembers about an inserted defect.
#[derive(Debug, Clone)]
pub struct Planted {
    pub id: roadatlas::store::RecordId,
    pub image_id: roadatlas::store::RecordId,
    pub class: roadatlas::pipeline::DefectClass,
    pub geo: roadatlas::store::GeoPoint,
    pub status: roadatlas::store::ValidationState,
}

/// Fills `store` with `n` random defects over a handful of images and reviews
/// about a third of them. Returns the records in insertion order.
pub fn random_dataset(store: &roadatlas::store::Store, seed: u64, n: usize) -> Vec<Planted> {
    use rand::{Rng, SeedableRng};
    use roadatlas::geometry::BoundingBox;
    use roadatlas::pipeline::DefectClass;
    use roadatlas::store::{GeoPoint, NewDefect, NewImage, ValidationState};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<_> = (0..5)
        .map(|i| {
            store
                .insert_image(NewImage {
                    id: None,
                    path: format!("images/img{i}.png"),
                    captured_at: store.now(),
                    geo: GeoPoint::new(-27.5, 153.0).unwrap(),
                    anonymized: true,
                    source_name: format!("img{i}.png"),
                })
                .unwrap()
        })
        .collect();
    let mut out = Vec::new();
    for _ in 0..n {
        let image_id = images[rng.random_range(0..images.len())];
        let class = DefectClass::from_label(rng.random_range(1..=6)).unwrap();
        // Coordinates on a 0.01 degree grid so box edges land exactly on records.
        let geo = GeoPoint::new(
            -27.5 + f64::from(rng.random_range(0..20)) * 0.01,
            153.0 + f64::from(rng.random_range(0..20)) * 0.01,
        )
        .unwrap();
        let x = f64::from(rng.random_range(0..300));
        let y = f64::from(rng.random_range(0..200));
        let id = store
            .insert_defect(NewDefect {
                id: None,
                image_id,
                class,
                bbox: BoundingBox::new(x, y, x + 1.0 + f64::from(rng.random_range(0..40)), y + 1.5).unwrap(),
                mask_path: "masks/none.png".into(),
                confidence: f64::from(rng.random_range(0..=100)) / 100.0,
                geo,
            })
            .unwrap();
        out.push(Planted { id, image_id, class, geo, status: ValidationState::Unchecked });
    }
    for p in out.iter_mut() {
        if rng.random_bool(0.33) {
            let status = if rng.random_bool(0.5) { ValidationState::Confirmed } else { ValidationState::Rejected };
            store.set_validation(&p.id, status, &format!("reviewer{}", rng.random_range(0..3))).unwrap();
            p.status = status;
        }
    }
    out
}
