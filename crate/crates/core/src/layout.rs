//! Block partition geometry and first-order interpolation weights.
//!
//! The observed image is split into overlapping blocks around a grid of PSF
//! sample points. Each block also owns an extended estimate region: the
//! observed block dilated by the convolution margin `(psf - 1) / 2` per side,
//! expressed in a single global estimate domain that extends the observed
//! domain by the same margin. Per-block weights are separable products of 1D
//! ramps and form a partition of unity over the whole estimate domain.
//!
//! Two regimes are supported:
//! - `SmoothVariant`: blocks span three consecutive grid points, so adjacent
//!   blocks overlap by half their size and an interior pixel is covered by
//!   four blocks. Weights are hats centered on the grid points.
//! - `ShiftInvariant` / `Piecewise`: near-equal contiguous tiles expanded by a
//!   configurable overlap; weights ramp across the shared strips. Grid points
//!   sit at tile centers, making tile boundaries the midpoints between
//!   adjacent grid points.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::image::{DomainTag, Image, IndexSet, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ShiftInvariant,
    Piecewise,
    SmoothVariant,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ShiftInvariant => "shift_invariant",
            Regime::Piecewise => "piecewise",
            Regime::SmoothVariant => "smooth_variant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shift_invariant" => Ok(Regime::ShiftInvariant),
            "piecewise" => Ok(Regime::Piecewise),
            "smooth_variant" => Ok(Regime::SmoothVariant),
            other => Err(CoreError::config(format!("unknown regime: {other}"))),
        }
    }
}

/// 1D weight profile: optional rising ramp, flat 1 in between, optional
/// falling ramp. Anchors are in observed-axis coordinates; evaluation clamps,
/// so border blocks extend with weight 1 into the estimate margin.
#[derive(Debug, Clone)]
struct AxisProfile {
    /// (zero_at, one_at); `None` means the profile is 1 from the domain edge.
    rise: Option<(f64, f64)>,
    /// (one_at, zero_at); `None` means the profile stays 1 to the domain edge.
    fall: Option<(f64, f64)>,
}

impl AxisProfile {
    fn eval(&self, s: f64) -> f64 {
        let up = match self.rise {
            None => 1.0,
            Some((zero, one)) => ((s - zero) / (one - zero)).clamp(0.0, 1.0),
        };
        let down = match self.fall {
            None => 1.0,
            Some((one, zero)) => ((zero - s) / (zero - one)).clamp(0.0, 1.0),
        };
        up * down
    }

    /// First/last integer observed coordinate with positive weight;
    /// `None` means unbounded on that side.
    fn positive_span(&self) -> (Option<i64>, Option<i64>) {
        let first = self.rise.map(|(zero, _)| zero.floor() as i64 + 1);
        let last = self.fall.map(|(_, zero)| zero.ceil() as i64 - 1);
        (first, last)
    }
}

#[derive(Debug, Clone)]
struct AxisBlock {
    /// Observed-coordinate span `[start, end)`.
    start: i64,
    end: i64,
    grid: usize,
    profile: AxisProfile,
}

fn smooth_axis(points: &[usize], dim: usize) -> Vec<AxisBlock> {
    let g = points;
    let n = g.len();
    (0..n)
        .map(|i| AxisBlock {
            start: if i == 0 { 0 } else { g[i - 1] as i64 },
            end: if i + 1 == n { dim as i64 } else { g[i + 1] as i64 },
            grid: g[i],
            profile: AxisProfile {
                rise: (i > 0).then(|| (g[i - 1] as f64, g[i] as f64)),
                fall: (i + 1 < n).then(|| (g[i] as f64, g[i + 1] as f64)),
            },
        })
        .collect()
}

fn tile_axis(count: usize, dim: usize, overlap: usize) -> Result<Vec<AxisBlock>> {
    // near-equal tiles; remainder pixels land in the rounding
    let bounds: Vec<i64> = (0..=count)
        .map(|k| ((k as f64) * (dim as f64) / (count as f64)).round() as i64)
        .collect();
    let min_tile = (0..count)
        .map(|i| bounds[i + 1] - bounds[i])
        .min()
        .unwrap_or(0);
    if overlap as i64 > min_tile {
        return Err(CoreError::layout(format!(
            "overlap {overlap} larger than the smallest block ({min_tile})"
        )));
    }
    let half_lo = (overlap / 2) as i64;
    let half_hi = (overlap as i64) - half_lo;
    let mut blocks = Vec::with_capacity(count);
    for i in 0..count {
        let start = if i == 0 { 0 } else { bounds[i] - half_lo };
        let end = if i + 1 == count {
            dim as i64
        } else {
            bounds[i + 1] + half_hi
        };
        // ramp across the shared strip [neighbor start, this end)
        let rise = (i > 0).then(|| {
            let strip_lo = bounds[i] - half_lo; // own start
            let strip_hi = bounds[i] + half_hi; // previous block's end
            (strip_lo as f64 - 1.0, strip_hi as f64)
        });
        let fall = (i + 1 < count).then(|| {
            let strip_lo = bounds[i + 1] - half_lo;
            let strip_hi = bounds[i + 1] + half_hi;
            (strip_lo as f64 - 1.0, strip_hi as f64)
        });
        blocks.push(AxisBlock {
            start,
            end,
            grid: (bounds[i] + (bounds[i + 1] - bounds[i] - 1) / 2) as usize,
            profile: AxisProfile { rise, fall },
        });
    }
    Ok(blocks)
}

/// One block of the partition.
#[derive(Debug, Clone)]
pub struct BlockInfo {
    pub id: usize,
    /// (row, col) position in the block grid.
    pub grid_pos: (usize, usize),
    /// PSF sample point, observed coordinates.
    pub grid_point: (usize, usize),
    /// Observed block, observed coordinates.
    pub observed: Region,
    /// Estimate block (the index set the block solves for), estimate coordinates.
    pub estimate: Region,
    /// Sub-region of `estimate` where this block's weight is positive.
    pub weight_support: Region,
    /// Ids of blocks whose weight support intersects ours.
    pub neighbors: Vec<usize>,
}

impl BlockInfo {
    pub fn estimate_index_set(&self) -> IndexSet {
        IndexSet {
            region: self.estimate,
            domain: DomainTag::Estimate,
        }
    }

    pub fn observed_index_set(&self) -> IndexSet {
        IndexSet {
            region: self.observed,
            domain: DomainTag::Observed,
        }
    }
}

/// A symmetric overlap record between two blocks: the shared weight-support
/// rectangle in estimate coordinates, plus the same rectangle in each block's
/// local estimate frame.
#[derive(Debug, Clone, Copy)]
pub struct OverlapPair {
    pub a: usize,
    pub b: usize,
    pub shared: Region,
    pub in_a: Region,
    pub in_b: Region,
}

#[derive(Debug, Clone)]
pub struct BlockLayout {
    observed_h: usize,
    observed_w: usize,
    psf_size: usize,
    grid_rows: usize,
    grid_cols: usize,
    regime: Regime,
    overlap: usize,
    blocks: Vec<BlockInfo>,
    row_profiles: Vec<AxisProfile>,
    col_profiles: Vec<AxisProfile>,
    warnings: Vec<String>,
}

/// Computes the block geometry.
///
/// `overlap_override` applies to the tile regimes and is the total shared
/// width between adjacent blocks; the default is `ceil(psf/2) + 1`, slightly
/// larger than half the PSF. The smooth shift-variant regime derives overlaps
/// from the grid itself (half-block overlaps) and ignores the override.
pub fn build_layout(
    observed_h: usize,
    observed_w: usize,
    grid_rows: usize,
    grid_cols: usize,
    psf_size: usize,
    regime: Regime,
    overlap_override: Option<usize>,
) -> Result<BlockLayout> {
    if grid_rows == 0 || grid_cols == 0 {
        return Err(CoreError::layout("block grid must be at least 1x1"));
    }
    if psf_size % 2 == 0 {
        return Err(CoreError::layout("psf size must be odd"));
    }
    if grid_rows > observed_h || grid_cols > observed_w {
        return Err(CoreError::layout(format!(
            "grid {grid_rows}x{grid_cols} does not fit image {observed_h}x{observed_w}"
        )));
    }
    let margin = ((psf_size - 1) / 2) as i64;
    // default: ceil(psf/2) + 1, slightly larger than half the PSF
    let overlap = overlap_override.unwrap_or(psf_size / 2 + 2);
    let (row_axis, col_axis) = match regime {
        Regime::SmoothVariant => {
            let points = crate::psf::grid_points(grid_rows, grid_cols, observed_h, observed_w)?;
            let rows: Vec<usize> = (0..grid_rows).map(|r| points[r * grid_cols].0).collect();
            let cols: Vec<usize> = (0..grid_cols).map(|c| points[c].1).collect();
            (smooth_axis(&rows, observed_h), smooth_axis(&cols, observed_w))
        }
        Regime::ShiftInvariant | Regime::Piecewise => (
            tile_axis(grid_rows, observed_h, overlap)?,
            tile_axis(grid_cols, observed_w, overlap)?,
        ),
    };

    let mut warnings = Vec::new();
    let mut blocks = Vec::with_capacity(grid_rows * grid_cols);
    for (ri, rb) in row_axis.iter().enumerate() {
        for (ci, cb) in col_axis.iter().enumerate() {
            let id = ri * grid_cols + ci;
            let obs_h = (rb.end - rb.start) as usize;
            let obs_w = (cb.end - cb.start) as usize;
            if (obs_h as i64) < 2 * psf_size as i64 || (obs_w as i64) < 2 * psf_size as i64 {
                warnings.push(format!(
                    "block {id} is {obs_h}x{obs_w}, smaller than twice the psf ({psf_size})"
                ));
            }
            let observed = Region::new(rb.start, cb.start, obs_h, obs_w);
            // estimate coordinates = observed coordinates + margin
            let estimate = Region::new(
                rb.start,
                cb.start,
                obs_h + 2 * margin as usize,
                obs_w + 2 * margin as usize,
            );
            let weight_support = support_region(rb, cb, margin);
            blocks.push(BlockInfo {
                id,
                grid_pos: (ri, ci),
                grid_point: (rb.grid, cb.grid),
                observed,
                estimate,
                weight_support,
                neighbors: Vec::new(),
            });
        }
    }

    let mut layout = BlockLayout {
        observed_h,
        observed_w,
        psf_size,
        grid_rows,
        grid_cols,
        regime,
        overlap,
        blocks,
        row_profiles: row_axis.into_iter().map(|b| b.profile).collect(),
        col_profiles: col_axis.into_iter().map(|b| b.profile).collect(),
        warnings,
    };
    let pairs = layout.overlap_pairs();
    for p in &pairs {
        layout.blocks[p.a].neighbors.push(p.b);
        layout.blocks[p.b].neighbors.push(p.a);
    }
    for b in &mut layout.blocks {
        b.neighbors.sort_unstable();
    }
    Ok(layout)
}

fn support_region(rb: &AxisBlock, cb: &AxisBlock, margin: i64) -> Region {
    let span = |ab: &AxisBlock| -> (i64, i64) {
        let (first, last) = ab.profile.positive_span();
        let lo = first.unwrap_or(ab.start - margin).max(ab.start - margin);
        let hi = last.unwrap_or(ab.end + margin - 1).min(ab.end + margin - 1);
        (lo, hi)
    };
    let (r_lo, r_hi) = span(rb);
    let (c_lo, c_hi) = span(cb);
    // shift into estimate coordinates
    Region::new(
        r_lo + margin,
        c_lo + margin,
        (r_hi - r_lo + 1) as usize,
        (c_hi - c_lo + 1) as usize,
    )
}

impl BlockLayout {
    pub fn observed_h(&self) -> usize {
        self.observed_h
    }

    pub fn observed_w(&self) -> usize {
        self.observed_w
    }

    /// Convolution margin per side, `(psf - 1) / 2`.
    pub fn margin(&self) -> usize {
        (self.psf_size - 1) / 2
    }

    pub fn psf_size(&self) -> usize {
        self.psf_size
    }

    pub fn estimate_h(&self) -> usize {
        self.observed_h + 2 * self.margin()
    }

    pub fn estimate_w(&self) -> usize {
        self.observed_w + 2 * self.margin()
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, id: usize) -> &BlockInfo {
        &self.blocks[id]
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Weight of block `id` at an estimate-domain pixel.
    pub fn weight_at(&self, id: usize, est_row: i64, est_col: i64) -> f64 {
        let (ri, ci) = self.blocks[id].grid_pos;
        let m = self.margin() as f64;
        self.row_profiles[ri].eval(est_row as f64 - m) * self.col_profiles[ci].eval(est_col as f64 - m)
    }

    /// All block pairs whose weight supports intersect (the pixels the
    /// restricted-consensus constraint actually couples), each with the shared
    /// rectangle in global estimate coordinates and in both local frames.
    pub fn overlap_pairs(&self) -> Vec<OverlapPair> {
        let mut pairs = Vec::new();
        for a in 0..self.blocks.len() {
            for b in a + 1..self.blocks.len() {
                let sa = &self.blocks[a].weight_support;
                let sb = &self.blocks[b].weight_support;
                if let Some(shared) = sa.intersect(sb) {
                    pairs.push(OverlapPair {
                        a,
                        b,
                        shared,
                        in_a: shared.relative_to(&self.blocks[a].estimate),
                        in_b: shared.relative_to(&self.blocks[b].estimate),
                    });
                }
            }
        }
        pairs
    }

    /// Number of blocks whose observed region contains the observed pixel.
    pub fn observed_cover_count(&self, row: i64, col: i64) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.observed.contains(row, col))
            .count()
    }

    /// Serializes the layout as a key=value manifest.
    pub fn save_manifest(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "observed_h={}", self.observed_h).unwrap();
        writeln!(s, "observed_w={}", self.observed_w).unwrap();
        writeln!(s, "psf_size={}", self.psf_size).unwrap();
        writeln!(s, "grid_rows={}", self.grid_rows).unwrap();
        writeln!(s, "grid_cols={}", self.grid_cols).unwrap();
        writeln!(s, "regime={}", self.regime.as_str()).unwrap();
        writeln!(s, "overlap={}", self.overlap).unwrap();
        for b in &self.blocks {
            let r = &b.observed;
            writeln!(
                s,
                "block.{}.observed={},{},{},{}",
                b.id, r.top, r.left, r.height, r.width
            )
            .unwrap();
            let r = &b.estimate;
            writeln!(
                s,
                "block.{}.estimate={},{},{},{}",
                b.id, r.top, r.left, r.height, r.width
            )
            .unwrap();
            writeln!(s, "block.{}.grid_point={},{}", b.id, b.grid_point.0, b.grid_point.1).unwrap();
            let ids: Vec<String> = b.neighbors.iter().map(|n| n.to_string()).collect();
            writeln!(s, "block.{}.neighbors={}", b.id, ids.join(",")).unwrap();
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Rebuilds a layout from a manifest and cross-checks the stored block
    /// geometry against the reconstruction.
    pub fn load_manifest(path: &Path) -> Result<BlockLayout> {
        let text = std::fs::read_to_string(path)?;
        let mut kv = std::collections::BTreeMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |key: &str| -> Result<&String> {
            kv.get(key)
                .ok_or_else(|| CoreError::Format(format!("manifest missing {key}")))
        };
        let parse = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| CoreError::Format(format!("bad value for {key}")))
        };
        let layout = build_layout(
            parse("observed_h")?,
            parse("observed_w")?,
            parse("grid_rows")?,
            parse("grid_cols")?,
            parse("psf_size")?,
            Regime::parse(get("regime")?)?,
            Some(parse("overlap")?),
        )?;
        for b in &layout.blocks {
            let key = format!("block.{}.observed", b.id);
            let r = &b.observed;
            let expect = format!("{},{},{},{}", r.top, r.left, r.height, r.width);
            if get(&key)? != &expect {
                return Err(CoreError::Format(format!(
                    "manifest block {} disagrees with reconstruction: {} vs {}",
                    b.id,
                    get(&key)?,
                    expect
                )));
            }
        }
        Ok(layout)
    }
}

/// Per-block interpolation weights over the estimate blocks.
#[derive(Debug, Clone)]
pub struct WeightField {
    images: Vec<Image>,
}

/// Materializes the block weights of a layout.
pub fn build_weights(layout: &BlockLayout) -> WeightField {
    let images = layout
        .blocks()
        .iter()
        .map(|b| {
            Image::from_fn(b.estimate.height, b.estimate.width, |r, c| {
                layout.weight_at(b.id, b.estimate.top + r as i64, b.estimate.left + c as i64)
            })
        })
        .collect();
    WeightField { images }
}

impl WeightField {
    /// Weight image of block `id`, covering its estimate region.
    pub fn block(&self, id: usize) -> &Image {
        &self.images[id]
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}
