//! Connected-component labelling over binary rasters.

use super::mask::Mask;

/// 8-neighbourhood offsets, excluding the center.
const N8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &N4,
            Connectivity::Eight => &N8,
        }
    }
}

/// Summary of one labelled component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    /// First pixel in raster order (topmost, then leftmost).
    pub seed: (u32, u32),
    /// Inclusive pixel extents.
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
    pub touches_border: bool,
}

/// Per-pixel component labels (0 = not part of any component), labels start at 1
/// and are assigned in raster order of each component's first pixel.
#[derive(Debug, Clone)]
pub struct Labelling {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labelling {
    #[inline]
    pub fn label_at(&self, x: i64, y: i64) -> u32 {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            0
        } else {
            self.labels[y as usize * self.width as usize + x as usize]
        }
    }
}

/// Labels the pixels for which `select(value)` holds.
pub fn label_components(mask: &Mask, connectivity: Connectivity, select: impl Fn(u8) -> bool) -> Labelling {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w as usize * h as usize];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = y as usize * w as usize + x as usize;
            if labels[idx] != 0 || !select(mask.get(x, y)) {
                continue;
            }
            let label = components.len() as u32 + 1;
            let mut comp = Component {
                label,
                area: 0,
                seed: (x, y),
                min_x: x,
                min_y: y,
                max_x: x,
                max_y: y,
                touches_border: false,
            };
            labels[idx] = label;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                comp.area += 1;
                comp.min_x = comp.min_x.min(cx);
                comp.min_y = comp.min_y.min(cy);
                comp.max_x = comp.max_x.max(cx);
                comp.max_y = comp.max_y.max(cy);
                if cx == 0 || cy == 0 || cx + 1 == w || cy + 1 == h {
                    comp.touches_border = true;
                }
                for &(dx, dy) in connectivity.offsets() {
                    let (nx, ny) = (i64::from(cx) + dx, i64::from(cy) + dy);
                    if nx < 0 || ny < 0 || nx >= i64::from(w) || ny >= i64::from(h) {
                        continue;
                    }
                    let (nx, ny) = (nx as u32, ny as u32);
                    let nidx = ny as usize * w as usize + nx as usize;
                    if labels[nidx] == 0 && select(mask.get(nx, ny)) {
                        labels[nidx] = label;
                        stack.push((nx, ny));
                    }
                }
            }
            components.push(comp);
        }
    }
    Labelling { width: w, height: h, labels, components }
}
