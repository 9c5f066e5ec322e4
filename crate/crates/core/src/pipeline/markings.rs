//! Road-marking refinement.
//!
//! The marking network's prediction is irregular but usually covers most of
//! a marking, while low-level contours of the bright paint are regular. The
//! refinement restricts both to the road region, warps them to a top-down
//! view, traces contours of the bright paint and keeps each contour whose
//! enclosed region is covered by the prediction at least `overlap_threshold`
//! of the time. Kept contours are mapped back to street-view coordinates.

use image::{imageops, GrayImage, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::error::PipelineError;
use crate::geometry::{overlap_ratio, rasterize_polygon, trace_contours, warp_gray, warp_mask, Contour, Mask};

/// One traced contour with its coverage score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkingCandidate {
    /// Contour in bird's-eye coordinates.
    pub bev_contour: Contour,
    /// Contour in street-view coordinates; present for kept candidates.
    pub image_contour: Option<Contour>,
    pub coverage: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarkingResult {
    pub candidates: Vec<MarkingCandidate>,
    /// Binarization threshold chosen on the bird's-eye image (foreground is `> threshold`).
    pub threshold: Option<u8>,
}

impl MarkingResult {
    pub fn kept(&self) -> impl Iterator<Item = &MarkingCandidate> {
        self.candidates.iter().filter(|c| c.kept)
    }
}

/// Otsu's threshold over the histogram of `values`: the level `t` maximising
/// the between-class variance of `{v <= t}` and `{v > t}`. Ties go to the
/// lowest level; a single-valued input returns that value, so nothing lies above it.
pub fn otsu_threshold(values: impl IntoIterator<Item = u8>) -> Option<u8> {
    let mut hist = [0u64; 256];
    let mut total = 0u64;
    for v in values {
        hist[usize::from(v)] += 1;
        total += 1;
    }
    if total == 0 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let max_value = hist.iter().rposition(|&c| c > 0).unwrap_or(0) as u8;
    let (mut best_t, mut best_var) = (max_value, 0.0f64);
    let (mut w0, mut sum0) = (0u64, 0.0f64);
    for (t, &count) in hist.iter().enumerate().take(255) {
        w0 += count;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    Some(best_t)
}

/// Street-view road mask for an image of the given size.
fn roi_mask(cfg: &PipelineConfig, w: u32, h: u32) -> Result<Mask, PipelineError> {
    match &cfg.roi {
        Some(p) => Ok(rasterize_polygon(p, w, h)?),
        None => Ok(Mask::from_fn(w, h, |_, _| true)),
    }
}

/// Fraction of the contour's enclosed pixels set in `prediction`. Only the
/// contour's bounding window is rasterized; shifting by whole pixels leaves
/// every pixel-center test unchanged.
pub fn contour_coverage(contour: &Contour, prediction: &Mask) -> Result<f64, PipelineError> {
    let pts = contour.points();
    let (w, h) = prediction.dims();
    let lo_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor().clamp(0.0, f64::from(w));
    let lo_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().clamp(0.0, f64::from(h));
    let hi_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil().clamp(0.0, f64::from(w));
    let hi_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil().clamp(0.0, f64::from(h));
    let (x0, y0) = (lo_x as u32, lo_y as u32);
    let (cw, ch) = ((hi_x - lo_x) as u32, (hi_y - lo_y) as u32);
    if cw == 0 || ch == 0 {
        return Err(PipelineError::Stage { stage: "markings", detail: "contour lies outside the canvas".into() });
    }
    let shifted = contour.try_map(|p| Ok(crate::geometry::Point2::new(p.x - lo_x, p.y - lo_y)))?;
    let region = rasterize_polygon(&shifted.to_polygon()?, cw, ch)?;
    Ok(overlap_ratio(&region, &prediction.crop(x0, y0, cw, ch))?)
}

pub fn parse_markings(
    image: &RgbImage,
    prediction: &Mask,
    cfg: &PipelineConfig,
) -> Result<MarkingResult, PipelineError> {
    let (w, h) = image.dimensions();
    if prediction.dims() != (w, h) {
        return Err(PipelineError::Stage {
            stage: "markings",
            detail: format!("prediction {:?} does not match image {:?}", prediction.dims(), (w, h)),
        });
    }
    let to_bev = &cfg.bev_homography;
    let to_street = to_bev.inverse().map_err(|e| PipelineError::Config(format!("bev homography: {e}")))?;
    let (bw, bh) = cfg.bev_size.unwrap_or((w, h));

    // Road region only.
    let roi = roi_mask(cfg, w, h)?;
    let gray = imageops::grayscale(image);
    let gray = GrayImage::from_fn(w, h, |x, y| if roi.get(x, y) != 0 { *gray.get_pixel(x, y) } else { Luma([0]) });
    let mut pred = prediction.to_binary();
    for y in 0..h {
        for x in 0..w {
            if roi.get(x, y) == 0 {
                pred.set(x, y, 0);
            }
        }
    }

    // Top-down view.
    let bev_gray = warp_gray(&gray, to_bev, bw, bh)?;
    let bev_pred = warp_mask(&pred, to_bev, bw, bh)?;
    let bev_roi = warp_mask(&roi, to_bev, bw, bh)?;

    // Bright paint inside the road, threshold chosen on road pixels alone.
    let in_road = |x: u32, y: u32| bev_roi.get(x, y) != 0;
    let threshold = otsu_threshold(
        (0..bh)
            .flat_map(|y| (0..bw).map(move |x| (x, y)))
            .filter(|&(x, y)| in_road(x, y))
            .map(|(x, y)| bev_gray.get_pixel(x, y)[0]),
    );
    let Some(t) = threshold else {
        return Ok(MarkingResult { candidates: Vec::new(), threshold: None });
    };
    let paint = Mask::from_fn(bw, bh, |x, y| in_road(x, y) && bev_gray.get_pixel(x, y)[0] > t);

    let mut candidates = Vec::new();
    for contour in trace_contours(&paint) {
        let coverage = contour_coverage(&contour, &bev_pred)?;
        let kept = coverage >= cfg.overlap_threshold;
        let image_contour = if kept { Some(contour.try_map(|p| to_street.apply(p))?) } else { None };
        candidates.push(MarkingCandidate { bev_contour: contour, image_contour, coverage, kept });
    }
    Ok(MarkingResult { candidates, threshold: Some(t) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn scene() -> RgbImage {
        let mut img = RgbImage::from_pixel(60, 40, Rgb([100, 100, 100]));
        for y in 10..20 {
            for x in 10..30 {
                img.put_pixel(x, y, Rgb([230, 230, 230]));
            }
        }
        img
    }

    fn marking_pred(cols: std::ops::Range<u32>) -> Mask {
        Mask::from_fn(60, 40, |x, y| cols.contains(&x) && (10..20).contains(&y))
    }

    #[test]
    fn otsu_cases() {
        assert_eq!(otsu_threshold([]), None);
        assert_eq!(otsu_threshold([7, 7, 7]), Some(7));
        let t = otsu_threshold([10, 10, 10, 200, 200]).unwrap();
        assert!((10..200).contains(&t));
        // Three-level road scene: the bright class separates from asphalt and cracks.
        let mut v = vec![100u8; 900];
        v.extend(std::iter::repeat_n(30u8, 20));
        v.extend(std::iter::repeat_n(230u8, 80));
        let t = otsu_threshold(v).unwrap();
        assert!((100..230).contains(&t));
    }

    #[test]
    fn fully_covered_marking_is_kept() {
        let cfg = PipelineConfig::default();
        let r = parse_markings(&scene(), &marking_pred(10..30), &cfg).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].coverage, 1.0);
        assert!(r.candidates[0].kept);
        assert_eq!(r.candidates[0].image_contour.as_ref().unwrap().area(), 200.0);
    }

    #[test]
    fn uncovered_marking_is_dropped() {
        let cfg = PipelineConfig::default();
        let r = parse_markings(&scene(), &Mask::zeros(60, 40), &cfg).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].coverage, 0.0);
        assert!(!r.candidates[0].kept);
        assert!(r.candidates[0].image_contour.is_none());
    }

    #[test]
    fn boundary_coverage_is_kept() {
        // 12 of 20 columns = 0.6 exactly.
        let cfg = PipelineConfig { overlap_threshold: 0.6, ..Default::default() };
        let r = parse_markings(&scene(), &marking_pred(10..22), &cfg).unwrap();
        assert_eq!(r.candidates[0].coverage, 0.6);
        assert!(r.candidates[0].kept);
        let r = parse_markings(&scene(), &marking_pred(10..21), &cfg).unwrap();
        assert!(!r.candidates[0].kept);
    }

    #[test]
    fn marking_outside_roi_is_ignored() {
        let cfg = PipelineConfig {
            roi: Some(crate::geometry::Polygon::rectangle(0.0, 25.0, 60.0, 40.0).unwrap()),
            ..Default::default()
        };
        let r = parse_markings(&scene(), &marking_pred(10..30), &cfg).unwrap();
        assert_eq!(r.kept().count(), 0);
    }

    #[test]
    fn translated_bev_maps_contour_back() {
        let cfg = PipelineConfig {
            bev_homography: crate::geometry::Homography::translation(5.0, 3.0),
            bev_size: Some((70, 50)),
            ..Default::default()
        };
        let r = parse_markings(&scene(), &marking_pred(10..30), &cfg).unwrap();
        let c = r.kept().next().unwrap();
        assert_eq!(c.bev_contour.points()[0], crate::geometry::Point2::new(15.0, 13.0));
        assert_eq!(c.image_contour.as_ref().unwrap().points()[0], crate::geometry::Point2::new(10.0, 10.0));
    }

    #[test]
    fn mismatched_prediction_is_an_error() {
        let err = parse_markings(&scene(), &Mask::zeros(10, 10), &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Stage { .. }));
    }
}
