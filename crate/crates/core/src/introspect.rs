//! What the trained networks look at: first-layer filters, feature maps,
//! per-landmark weight magnitudes and hidden activations for external
//! embedding tools.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::nn::{Layer, Network, TemporalConv};
use crate::pgm::Gray;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_TOP_K: usize = 10;
const FLAT_GRAY: u8 = 128;

/// Shortest text that parses back to the same 32-bit value.
pub fn format_value(v: Real) -> String {
    format!("{}", v as f32)
}

/// Min-max scales `values` to `0..=255`; a constant input becomes mid-gray.
pub fn scale_to_bytes(values: &[Real], lo: Real, hi: Real) -> Vec<u8> {
    if !(hi > lo) {
        return vec![FLAT_GRAY; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn min_max(values: &[Real]) -> (Real, Real) {
    values
        .iter()
        .fold((Real::INFINITY, Real::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn conv_layer(network: &Network, layer: usize) -> Result<&TemporalConv> {
    match network.spec_layer(layer)? {
        Layer::TemporalConv(c) => Ok(c),
        other => Err(Error::invalid(format!(
            "layer {layer} is {}, not a convolution",
            other.kind()
        ))),
    }
}

/// One rendered kernel slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTile {
    pub filter: usize,
    pub frame: usize,
    pub image: Gray,
    /// Range of the whole filter (all frames) used for scaling.
    pub range: (Real, Real),
}

/// Renders each filter's per-frame kernels, scaled jointly per filter.
pub fn filter_tiles(network: &Network, layer: usize) -> Result<Vec<FilterTile>> {
    let conv = conv_layer(network, layer)?;
    let (rows, cols) = conv.kernel();
    let frames = conv.frames();
    let per_filter = frames * rows * cols;
    let mut tiles = Vec::with_capacity(conv.filters() * frames);
    for (f, weights) in conv.weight.data().chunks(per_filter).enumerate() {
        let range = min_max(weights);
        for (t, slice) in weights.chunks(rows * cols).enumerate() {
            tiles.push(FilterTile {
                filter: f,
                frame: t,
                image: Gray::new(cols, rows, scale_to_bytes(slice, range.0, range.1))?,
                range,
            });
        }
    }
    Ok(tiles)
}

/// Lays tiles out with one row per filter and one column per frame, separated
/// by a one-pixel black gutter.
pub fn tile_grid(tiles: &[FilterTile]) -> Result<Gray> {
    let first = tiles.first().ok_or_else(|| Error::invalid("no filter tiles"))?;
    let (th, tw) = (first.image.height, first.image.width);
    let filters = tiles.iter().map(|t| t.filter).max().unwrap_or(0) + 1;
    let frames = tiles.iter().map(|t| t.frame).max().unwrap_or(0) + 1;
    let (h, w) = (filters * (th + 1) + 1, frames * (tw + 1) + 1);
    let mut pixels = vec![0u8; h * w];
    for tile in tiles {
        let (y0, x0) = (1 + tile.filter * (th + 1), 1 + tile.frame * (tw + 1));
        for y in 0..th {
            let dst = (y0 + y) * w + x0;
            pixels[dst..dst + tw].copy_from_slice(&tile.image.pixels[y * tw..(y + 1) * tw]);
        }
    }
    Gray::new(w, h, pixels)
}

pub fn filter_file_name(layer: usize, filter: usize, frame: usize) -> String {
    format!("layer{layer}_filter{filter}_frame{frame}.pgm")
}

/// Writes one PGM per kernel slice, `layer{L}_grid.pgm` and an index CSV.
/// Returns the written paths.
pub fn export_filters(network: &Network, layer: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let tiles = filter_tiles(network, layer)?;
    let mut written = Vec::with_capacity(tiles.len() + 2);
    let mut index = String::from("file,filter,frame,min,max\n");
    for tile in &tiles {
        let name = filter_file_name(layer, tile.filter, tile.frame);
        let path = dir.join(&name);
        tile.image.save(&path)?;
        writeln!(
            index,
            "{name},{},{},{},{}",
            tile.filter,
            tile.frame,
            format_value(tile.range.0),
            format_value(tile.range.1)
        )
        .unwrap();
        written.push(path);
    }
    let grid = dir.join(format!("layer{layer}_grid.pgm"));
    tile_grid(&tiles)?.save(&grid)?;
    written.push(grid);
    let index_path = dir.join(format!("layer{layer}_filters.csv"));
    write_atomic(&index_path, index.as_bytes())?;
    written.push(index_path);
    Ok(written)
}

/// Output of a spatial layer for one input, `[maps, height, width]`.
pub fn feature_maps(network: &Network, input: &Tensor, layer: usize) -> Result<Tensor> {
    let out = network.activations(input, layer)?;
    if out.rank() != 3 {
        return Err(Error::invalid(format!(
            "layer {layer} ({}) produces {:?}, not feature maps",
            network.spec_layer(layer)?.kind(),
            out.shape()
        )));
    }
    Ok(out)
}

/// Raw values as `map,row,col,value` rows.
pub fn feature_maps_csv(maps: &Tensor) -> String {
    let (h, w) = (maps.shape()[1], maps.shape()[2]);
    let mut out = String::from("map,row,col,value\n");
    for (k, &v) in maps.data().iter().enumerate() {
        writeln!(out, "{},{},{},{}", k / (h * w), (k / w) % h, k % w, format_value(v)).unwrap();
    }
    out
}

/// Parses [`feature_maps_csv`] output back into a tensor of the given shape.
pub fn parse_feature_maps_csv(text: &str, shape: &[usize]) -> Result<Tensor> {
    let mut data = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let value = line
            .rsplit(',')
            .next()
            .and_then(|v| v.parse::<f32>().ok())
            .ok_or_else(|| Error::invalid(format!("bad feature-map row {line:?}")))?;
        data.push(value as Real);
    }
    Tensor::new(shape.to_vec(), data)
}

/// Writes `layer{L}_maps.csv` and `layer{L}_map{F}.pgm` (min-max scaled per map).
pub fn export_feature_maps(network: &Network, input: &Tensor, layer: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let maps = feature_maps(network, input, layer)?;
    let (h, w) = (maps.shape()[1], maps.shape()[2]);
    let mut written = Vec::new();
    let csv = dir.join(format!("layer{layer}_maps.csv"));
    write_atomic(&csv, feature_maps_csv(&maps).as_bytes())?;
    written.push(csv);
    for (f, plane) in maps.data().chunks(h * w).enumerate() {
        let (lo, hi) = min_max(plane);
        let path = dir.join(format!("layer{layer}_map{f}.pgm"));
        Gray::new(w, h, scale_to_bytes(plane, lo, hi))?.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Mean `|W|` of the first dense layer over every hidden unit and the
/// `2·frames` input columns belonging to each landmark. Sorted by descending
/// score, ties by ascending index, truncated to `top_k`.
pub fn rank_landmarks(network: &Network, points: usize, frames: usize, top_k: usize) -> Result<Vec<(usize, Real)>> {
    let fc = match network.spec_layer(0)? {
        Layer::FullyConnected(fc) => fc,
        other => return Err(Error::invalid(format!("first layer is {}, not fully connected", other.kind()))),
    };
    let dim = 2 * points * frames;
    if fc.inputs() != dim || network.input_shape() != [dim] {
        return Err(Error::invalid(format!(
            "first layer takes {} inputs but {points} points x {frames} frames need {dim}",
            fc.inputs()
        )));
    }
    let mut sums = vec![0.0; points];
    for row in fc.weight.data().chunks(dim) {
        for (d, w) in row.iter().enumerate() {
            sums[(d / 2) % points] += w.abs();
        }
    }
    let count = (fc.outputs() * 2 * frames) as Real;
    let mut scores: Vec<(usize, Real)> = sums.into_iter().map(|s| s / count).enumerate().collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores.truncate(top_k);
    Ok(scores)
}

/// One input to [`activations_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledInput {
    pub id: String,
    pub label: usize,
    pub input: Tensor,
}

/// `id,label,a0,a1,…` per input, activations of spec layer `layer`.
pub fn activations_csv(network: &Network, inputs: &[LabelledInput], layer: usize) -> Result<String> {
    let mut rows = Vec::with_capacity(inputs.len());
    for item in inputs {
        rows.push((item, network.activations(&item.input, layer)?));
    }
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut out = String::from("id,label");
    for k in 0..width {
        write!(out, ",a{k}").unwrap();
    }
    out.push('\n');
    for (item, act) in rows {
        write!(out, "{},{}", item.id, item.label).unwrap();
        for &v in act.data() {
            write!(out, ",{}", format_value(v)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_activations(network: &Network, inputs: &[LabelledInput], layer: usize, path: &Path) -> Result<()> {
    write_atomic(path, activations_csv(network, inputs, layer)?.as_bytes())
}
