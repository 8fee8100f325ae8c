//! Binary PGM (P5) and PPM (P6) rasters of maps, skeleton graphs and intent
//! heat maps. Each grid cell becomes a `scale x scale` block.

use crate::error::{invalid, Result};
use crate::grid::{Coord, GridMap};
use crate::skeleton::{MapGraph, NodeKind};

type Rgb = [u8; 3];

const FREE: Rgb = [255, 255, 255];
const OBSTACLE: Rgb = [0, 0, 0];
const SKELETON: Rgb = [70, 110, 200];
const BRANCH: Rgb = [220, 30, 30];
const LEAF: Rgb = [30, 160, 60];

fn check_scale(scale: usize) -> Result<()> {
    if !(1..=64).contains(&scale) {
        return Err(invalid(format!("render scale {scale} outside [1, 64]")));
    }
    Ok(())
}

fn upscale<const N: usize>(width: usize, height: usize, scale: usize, cell: impl Fn(Coord) -> [u8; N]) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height * scale * scale * N);
    for y in 0..height {
        let row: Vec<[u8; N]> = (0..width).map(|x| cell(Coord::new(x as i32, y as i32))).collect();
        for _ in 0..scale {
            for px in &row {
                for _ in 0..scale {
                    out.extend_from_slice(px);
                }
            }
        }
    }
    out
}

fn with_header(magic: &str, width: usize, height: usize, scale: usize, body: Vec<u8>) -> Vec<u8> {
    let mut out = format!("{magic}\n{} {}\n255\n", width * scale, height * scale).into_bytes();
    out.extend(body);
    out
}

/// Grayscale map: free cells white, obstacles black.
pub fn render_map_pgm(map: &GridMap, scale: usize) -> Result<Vec<u8>> {
    check_scale(scale)?;
    let body = upscale(map.width(), map.height(), scale, |c| [if map.is_free(c) { 255 } else { 0 }]);
    Ok(with_header("P5", map.width(), map.height(), scale, body))
}

/// Map with skeleton pixels, branch nodes and leaf nodes coloured.
pub fn render_skeleton_ppm(map: &GridMap, graph: &MapGraph, scale: usize) -> Result<Vec<u8>> {
    check_scale(scale)?;
    let body = upscale(map.width(), map.height(), scale, |c| {
        if let Some(n) = graph.nodes.iter().find(|n| n.position == c) {
            match n.kind {
                NodeKind::Branch => BRANCH,
                NodeKind::Leaf => LEAF,
            }
        } else if graph.skeleton.mask.get(c) {
            SKELETON
        } else if map.is_free(c) {
            FREE
        } else {
            OBSTACLE
        }
    });
    Ok(with_header("P6", map.width(), map.height(), scale, body))
}

/// Free cells shaded from white (0) to red (1) by `heat`, one value per cell
/// in row-major order.
pub fn render_heatmap_ppm(map: &GridMap, heat: &[f64], scale: usize) -> Result<Vec<u8>> {
    check_scale(scale)?;
    if heat.len() != map.area() {
        return Err(invalid(format!("{} heat values for {} cells", heat.len(), map.area())));
    }
    let body = upscale(map.width(), map.height(), scale, |c| {
        if !map.is_free(c) {
            return OBSTACLE;
        }
        let fade = (255.0 * (1.0 - heat[map.index(c)].clamp(0.0, 1.0))).round() as u8;
        [255, fade, fade]
    });
    Ok(with_header("P6", map.width(), map.height(), scale, body))
}
