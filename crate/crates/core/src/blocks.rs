//! Sub-sampled block index sets, block averages of the local spectra and the
//! local long-run variance of those averages.
//!
//! Every set holds exactly `M_S` anchors spaced `m_S` apart.

use serde::{Deserialize, Serialize};

use crate::config::{LrvKernel, SpectralConfig};
use crate::error::{Error, Result};
use crate::spectral::{LocalSpectrum, Side, SpectralEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Sub-sample of block `r`, centered near `r·m_T`.
    Block,
    /// The `M_S` anchors ending just before a split time.
    LeftOfSplit,
    /// The `M_S` anchors starting right after a split time.
    RightOfSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndexSet {
    pub kind: BlockKind,
    /// Block number for [`BlockKind::Block`], split time otherwise.
    pub anchor: usize,
    /// Ascending 1-based time indices.
    pub indices: Vec<usize>,
}

fn strided(start: usize, config: &SpectralConfig) -> Vec<usize> {
    (0..config.points_per_block)
        .map(|i| start + i * config.stride)
        .collect()
}

/// Sub-sample `S_r` of block `r ∈ 1..=M_T`: `M_S` points starting at
/// `r·m_T - ⌊m_T/2⌋ + ⌊n_T/2⌋ + 1`.
pub fn block_set(r: usize, config: &SpectralConfig) -> Result<BlockIndexSet> {
    if r == 0 || r > config.n_blocks {
        return Err(Error::Index(format!(
            "block {r} outside 1..={}",
            config.n_blocks
        )));
    }
    let start = r * config.block_len - config.block_len / 2 + config.window_len / 2 + 1;
    let indices = strided(start, config);
    let last = *indices.last().unwrap();
    if start < config.window_len || last + config.window_len > config.sample_len {
        return Err(Error::Index(format!(
            "block {r} spans [{start}, {last}], outside [{}, {}]",
            config.window_len,
            config.sample_len.saturating_sub(config.window_len)
        )));
    }
    Ok(BlockIndexSet {
        kind: BlockKind::Block,
        anchor: r,
        indices,
    })
}

/// Left and right sets around the split time `r`:
/// `{r - m_T + 1 + i·m_S}` and `{r + 1 + i·m_S}` for `i < M_S`.
pub fn lr_sets(r: usize, config: &SpectralConfig) -> Result<(BlockIndexSet, BlockIndexSet)> {
    if r + 1 < config.block_len || r + 1 - config.block_len < config.window_len {
        return Err(Error::Index(format!(
            "split {r}: left set would start before t = {}",
            config.window_len
        )));
    }
    let left = strided(r + 1 - config.block_len, config);
    let right = strided(r + 1, config);
    let last = *right.last().unwrap();
    if last + config.window_len > config.sample_len {
        return Err(Error::Index(format!(
            "split {r}: right set ends at {last}, window exceeds T = {}",
            config.sample_len
        )));
    }
    Ok((
        BlockIndexSet {
            kind: BlockKind::LeftOfSplit,
            anchor: r,
            indices: left,
        },
        BlockIndexSet {
            kind: BlockKind::RightOfSplit,
            anchor: r,
            indices: right,
        },
    ))
}

/// Whether `lr_sets(r)` would succeed.
pub fn split_is_valid(r: usize, config: &SpectralConfig) -> bool {
    lr_sets(r, config).is_ok()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Result of a kernel long-run variance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRunVariance {
    /// Floored value, `max(raw, 0)`.
    pub value: f64,
    /// Kernel-weighted sum before flooring.
    pub raw: f64,
}

impl LongRunVariance {
    pub fn floored(&self) -> bool {
        self.raw < 0.0
    }
}

/// Autocovariances `Γ̂(0), ..., Γ̂(M-1)` of the demeaned sequence, divisor
/// `M` at every lag.
pub fn autocovariances(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    (0..n)
        .map(|lag| {
            centered[lag..]
                .iter()
                .zip(&centered[..n - lag])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Kernel long-run variance `Σ_{|j| < M} K₁(b·j) Γ̂(j)` of a short
/// sequence.
pub fn long_run_variance(values: &[f64], kernel: LrvKernel, bandwidth: f64) -> LongRunVariance {
    let gamma = autocovariances(values);
    let mut raw = gamma[0];
    for (lag, g) in gamma.iter().enumerate().skip(1) {
        let w = kernel.eval(bandwidth * lag as f64);
        if w != 0.0 {
            raw += 2.0 * w * g;
        }
    }
    LongRunVariance {
        value: raw.max(0.0),
        raw,
    }
}

fn gather(spectrum: &LocalSpectrum, set: &BlockIndexSet, column: usize) -> Result<Vec<f64>> {
    set.indices
        .iter()
        .map(|&j| spectrum.get(j, column))
        .collect()
}

/// Average of the smoothed estimates over the anchors of `set` at the
/// frequency column `column` of `spectrum`.
pub fn block_average(spectrum: &LocalSpectrum, set: &BlockIndexSet, column: usize) -> Result<f64> {
    Ok(mean(&gather(spectrum, set, column)?))
}

/// Local long-run variance of the sub-sampled estimates in `set`.
pub fn lrv_estimate(
    spectrum: &LocalSpectrum,
    set: &BlockIndexSet,
    column: usize,
    config: &SpectralConfig,
) -> Result<LongRunVariance> {
    if set.indices.len() < 2 {
        return Err(Error::Size("long-run variance needs at least 2 points".into()));
    }
    let values = gather(spectrum, set, column)?;
    Ok(long_run_variance(&values, config.lrv_kernel, config.lrv_bandwidth))
}

/// Block averages `f̃_{L,r}`, `f̃_{R,r}` and long-run standard deviations
/// `σ̂_{L,r}` for blocks `r = 1..=M_T - 1`, at each engine frequency.
///
/// Row `r - 1` holds block `r`. Right averages of block 1 and left
/// quantities of block `M_T - 1` are computed for completeness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAverages {
    pub frequencies: Vec<f64>,
    pub f_tilde_left: Vec<Vec<f64>>,
    pub f_tilde_right: Vec<Vec<f64>>,
    pub sigma_left: Vec<Vec<f64>>,
    /// Number of (block, frequency) cells whose raw variance was negative
    /// and floored to zero.
    pub floored_cells: usize,
}

impl BlockAverages {
    pub fn compute(engine: &SpectralEngine, config: &SpectralConfig) -> Result<Self> {
        let n_freq = engine.frequencies().len();
        let blocks = config.n_blocks - 1;
        let mut f_tilde_left = Vec::with_capacity(blocks);
        let mut f_tilde_right = Vec::with_capacity(blocks);
        let mut sigma_left = Vec::with_capacity(blocks);
        let mut floored_cells = 0;
        let mut column = vec![0.0; config.points_per_block];
        for r in 1..=blocks {
            let set = block_set(r, config)?;
            let mut fl = vec![0.0; n_freq];
            let mut fr = vec![0.0; n_freq];
            let mut sl = vec![0.0; n_freq];
            let left_rows: Vec<&[f64]> = set
                .indices
                .iter()
                .map(|&j| engine.smoothed(j, Side::Left))
                .collect::<Result<_>>()?;
            let right_rows: Vec<&[f64]> = set
                .indices
                .iter()
                .map(|&j| engine.smoothed(j, Side::Right))
                .collect::<Result<_>>()?;
            for k in 0..n_freq {
                for (c, row) in column.iter_mut().zip(&left_rows) {
                    *c = row[k];
                }
                fl[k] = mean(&column);
                let lrv = long_run_variance(&column, config.lrv_kernel, config.lrv_bandwidth);
                if lrv.floored() {
                    floored_cells += 1;
                }
                sl[k] = lrv.value.sqrt();
                fr[k] = mean(&right_rows.iter().map(|row| row[k]).collect::<Vec<_>>());
            }
            f_tilde_left.push(fl);
            f_tilde_right.push(fr);
            sigma_left.push(sl);
        }
        Ok(Self {
            frequencies: engine.frequencies().to_vec(),
            f_tilde_left,
            f_tilde_right,
            sigma_left,
            floored_cells,
        })
    }
}

/// Sums of the smoothed estimates over the left and right sets of split
/// `r`, at every engine frequency.
pub fn split_sums(
    engine: &SpectralEngine,
    r: usize,
    config: &SpectralConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (left, right) = lr_sets(r, config)?;
    let n_freq = engine.frequencies().len();
    let mut sum_l = vec![0.0; n_freq];
    let mut sum_r = vec![0.0; n_freq];
    for &j in &left.indices {
        for (acc, v) in sum_l.iter_mut().zip(engine.smoothed(j, Side::Left)?) {
            *acc += v;
        }
    }
    for &j in &right.indices {
        for (acc, v) in sum_r.iter_mut().zip(engine.smoothed(j, Side::Right)?) {
            *acc += v;
        }
    }
    Ok((sum_l, sum_r))
}
