//! Estimates the street-view to bird's-eye homography from four road corners
//! and warps a synthetic scene into the top view.
//!
//! cargo run --example homography_bev -- [out-dir]

use std::path::PathBuf;

use image::imageops::grayscale;
use roadatlas::geometry::{apply_homography, estimate_homography, warp_gray, Point2};
use roadatlas::synthetic::{generate_scene, ROAD_CORNERS, SCENE_HEIGHT, SCENE_WIDTH};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bev_out".into()));
    std::fs::create_dir_all(&out)?;

    let src: Vec<Point2> = ROAD_CORNERS.iter().map(|&(x, y)| Point2::new(x, y)).collect();
    let (w, h) = (f64::from(SCENE_WIDTH), f64::from(SCENE_HEIGHT));
    let dst = [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, h), Point2::new(0.0, h)];
    let hmg = estimate_homography(&src, &dst)?;
    for row in hmg.rows() {
        println!("[{:>12.6} {:>12.6} {:>12.6}]", row[0], row[1], row[2]);
    }
    for (s, d) in src.iter().zip(&dst) {
        let m = apply_homography(&hmg, *s)?;
        println!("({:>5.1}, {:>5.1}) -> ({:>7.3}, {:>7.3})  error {:.1e}", s.x, s.y, m.x, m.y, m.distance(d));
    }

    let scene = generate_scene(3);
    let gray = grayscale(&scene.image);
    let bev = warp_gray(&gray, &hmg, SCENE_WIDTH, SCENE_HEIGHT)?;
    gray.save(out.join("street.png"))?;
    bev.save(out.join("bev.png"))?;
    println!("wrote {}/street.png and bev.png", out.display());
    Ok(())
}
