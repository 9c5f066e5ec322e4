//! Traces region boundaries in a binary mask and fills them back in.

use roadatlas::geometry::{label_components, rasterize_polygon, trace_contours, Connectivity, Mask};

const ROWS: [&str; 9] = [
    "..............",
    ".#####....##..",
    ".#...#....##..",
    ".#.#.#........",
    ".#...#...####.",
    ".#####...#..#.",
    ".........####.",
    "..#...........",
    "..............",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (ROWS[0].len() as u32, ROWS.len() as u32);
    let mask = Mask::from_fn(w, h, |x, y| ROWS[y as usize].as_bytes()[x as usize] == b'#');

    let labels = label_components(&mask, Connectivity::Eight, |v| v != 0);
    println!("{} components", labels.components.len());

    let contours = trace_contours(&mask);
    let mut rebuilt = Mask::zeros(w, h);
    for c in &contours {
        println!("{:?} area {:>4.1} with {} vertices", c.kind(), c.area(), c.points().len());
        let fill = rasterize_polygon(&c.to_polygon()?, w, h)?;
        // Holes are contours too: even-odd accumulation punches them out.
        rebuilt = Mask::from_fn(w, h, |x, y| (rebuilt.get(x, y) != 0) != (fill.get(x, y) != 0));
    }
    println!("round trip exact: {}", rebuilt == mask);
    Ok(())
}
