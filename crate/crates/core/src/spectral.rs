//! Tapered local DFTs, local periodograms and their frequency-smoothed
//! versions.
//!
//! Every estimate is anchored at a 1-based time index `j`. The left window
//! covers `X_{j-n+1}, ..., X_j`; the right window covers
//! `X_{j+1}, ..., X_{j+n}` read in reverse order.
//!
//! The functions [`local_dft`], [`local_periodogram`] and
//! [`smooth_local_periodogram`] evaluate the defining finite sums directly
//! and serve as the reference. [`SpectralEngine`] computes the same
//! quantities through an FFT of each window and a precomputed smoothing
//! matrix, caching the results per anchor.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::blocks::block_set;
use crate::config::{SmootherKernel, SpectralConfig, Taper};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::series::TimeSeries;

/// Which side of the anchor a local window looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

/// Taper weights `h(s/n)` for `s = 0..n` together with `Σ h²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperWindow {
    weights: Vec<f64>,
    h2_sum: f64,
}

impl TaperWindow {
    pub fn new(taper: Taper, len: usize) -> Self {
        let weights = match taper {
            Taper::Rectangular => vec![1.0; len],
        };
        let h2_sum = weights.iter().map(|w| w * w).sum();
        Self { weights, h2_sum }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `H_{2,n}(0) = Σ h(s/n)²`.
    pub fn h2_sum(&self) -> f64 {
        self.h2_sum
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Checks that the window anchored at `j` fits in `1..=len`.
pub(crate) fn check_window(len: usize, j: usize, side: Side, window: usize) -> Result<()> {
    let ok = match side {
        Side::Left => j >= window && j <= len,
        Side::Right => j + window <= len,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Index(format!(
            "{side} window of length {window} anchored at t = {j} leaves [1, {len}]"
        )))
    }
}

/// 0-based position in the series of the `s`-th window term.
#[inline]
fn window_pos(j: usize, side: Side, window: usize, s: usize) -> usize {
    match side {
        Side::Left => j + s - window,
        Side::Right => j + window - s - 1,
    }
}

/// Local tapered DFT `Σ_s h(s/n) X_{·} e^{-iωs}` by direct summation.
pub fn local_dft(
    x: &TimeSeries,
    j: usize,
    side: Side,
    omega: f64,
    taper: &TaperWindow,
) -> Result<Complex64> {
    let n = taper.len();
    check_window(x.len(), j, side, n)?;
    let values = x.values();
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, &h) in taper.weights().iter().enumerate() {
        let phase = -omega * s as f64;
        acc += Complex64::new(phase.cos(), phase.sin()) * (h * values[window_pos(j, side, n, s)]);
    }
    Ok(acc)
}

/// Local periodogram `|d|² / (2π Σh²)`.
pub fn local_periodogram(
    x: &TimeSeries,
    j: usize,
    side: Side,
    omega: f64,
    taper: &TaperWindow,
) -> Result<f64> {
    let d = local_dft(x, j, side, omega, taper)?;
    Ok(d.norm_sqr() / (2.0 * PI * taper.h2_sum()))
}

/// Periodized smoothing weight `W_T(ω) = Σ_k b⁻¹ W(b⁻¹(ω + 2πk))`.
pub fn periodized_weight(kernel: SmootherKernel, bandwidth: f64, omega: f64) -> f64 {
    let reach = kernel.support() * bandwidth;
    let k_lo = ((-reach - omega) / (2.0 * PI)).ceil() as i64;
    let k_hi = ((reach - omega) / (2.0 * PI)).floor() as i64;
    (k_lo..=k_hi)
        .map(|k| kernel.eval((omega + 2.0 * PI * k as f64) / bandwidth) / bandwidth)
        .sum()
}

/// Smoothed local periodogram at `omega`, evaluated from the defining sum
/// over the Fourier frequencies `2πs/n`, `s = 1..n-1`.
pub fn smooth_local_periodogram(
    x: &TimeSeries,
    j: usize,
    side: Side,
    omega: f64,
    config: &SpectralConfig,
) -> Result<f64> {
    let n = config.window_len;
    let taper = TaperWindow::new(config.taper, n);
    check_window(x.len(), j, side, n)?;
    let mut acc = 0.0;
    for s in 1..n {
        let fourier = 2.0 * PI * s as f64 / n as f64;
        let w = periodized_weight(config.smoother_kernel, config.freq_bandwidth, omega - fourier);
        if w != 0.0 {
            acc += w * local_periodogram(x, j, side, fourier, &taper)?;
        }
    }
    Ok(acc * 2.0 * PI / n as f64)
}

/// Weights mapping the `n - 1` non-zero Fourier ordinates of a window to
/// smoothed estimates at a list of target frequencies.
#[derive(Debug, Clone)]
pub struct SmoothingMatrix {
    frequencies: Vec<f64>,
    /// Row-major `[target][s - 1]`.
    weights: Vec<f64>,
    window_len: usize,
}

impl SmoothingMatrix {
    pub fn new(config: &SpectralConfig, frequencies: &[f64]) -> Self {
        let n = config.window_len;
        let scale = 2.0 * PI / n as f64;
        let mut weights = Vec::with_capacity(frequencies.len() * (n - 1));
        for &omega in frequencies {
            for s in 1..n {
                let fourier = 2.0 * PI * s as f64 / n as f64;
                weights.push(
                    scale
                        * periodized_weight(
                            config.smoother_kernel,
                            config.freq_bandwidth,
                            omega - fourier,
                        ),
                );
            }
        }
        Self {
            frequencies: frequencies.to_vec(),
            weights,
            window_len: n,
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Applies the weights to ordinates `I(2πs/n)`, `s = 1..n-1`.
    pub fn apply(&self, ordinates: &[f64], out: &mut Vec<f64>) {
        let m = self.window_len - 1;
        debug_assert_eq!(ordinates.len(), m);
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(m)
                .map(|row| row.iter().zip(ordinates).map(|(w, i)| w * i).sum::<f64>()),
        );
    }
}

/// FFT-based evaluator of smoothed local spectra with a per-anchor cache.
///
/// Safe to share across threads: each anchor is computed at most once and
/// the cached value does not depend on which thread filled it.
pub struct SpectralEngine {
    values: Vec<f64>,
    window_len: usize,
    taper: TaperWindow,
    fft: Arc<dyn Fft<f64>>,
    smoothing: SmoothingMatrix,
    left: Vec<OnceLock<Box<[f64]>>>,
    right: Vec<OnceLock<Box<[f64]>>>,
}

impl fmt::Debug for SpectralEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralEngine")
            .field("len", &self.values.len())
            .field("window_len", &self.window_len)
            .field("frequencies", &self.smoothing.frequencies())
            .finish()
    }
}

impl SpectralEngine {
    /// Prepares an engine over `x` (used as given, without demeaning) for
    /// the target `frequencies`.
    pub fn new(x: &TimeSeries, config: &SpectralConfig, frequencies: &[f64]) -> Self {
        let n = config.window_len;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let len = x.len();
        Self {
            values: x.values().to_vec(),
            window_len: n,
            taper: TaperWindow::new(config.taper, n),
            fft,
            smoothing: SmoothingMatrix::new(config, frequencies),
            left: (0..=len).map(|_| OnceLock::new()).collect(),
            right: (0..=len).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        self.smoothing.frequencies()
    }

    pub fn series_len(&self) -> usize {
        self.values.len()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Local periodogram ordinates at `2πs/n` for `s = 1..n-1`.
    pub fn fourier_ordinates(&self, j: usize, side: Side) -> Result<Vec<f64>> {
        check_window(self.values.len(), j, side, self.window_len)?;
        let n = self.window_len;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|s| {
                Complex64::new(
                    self.taper.weights()[s] * self.values[window_pos(j, side, n, s)],
                    0.0,
                )
            })
            .collect();
        self.fft.process(&mut buf);
        let norm = 2.0 * PI * self.taper.h2_sum();
        Ok(buf[1..].iter().map(|d| d.norm_sqr() / norm).collect())
    }

    /// Smoothed estimates at every target frequency for the anchor `j`.
    pub fn smoothed(&self, j: usize, side: Side) -> Result<&[f64]> {
        let slots = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        let slot = slots.get(j).ok_or_else(|| {
            Error::Index(format!("anchor t = {j} beyond the series end"))
        })?;
        if let Some(v) = slot.get() {
            return Ok(v);
        }
        let ordinates = self.fourier_ordinates(j, side)?;
        let mut out = Vec::new();
        self.smoothing.apply(&ordinates, &mut out);
        Ok(slot.get_or_init(|| out.into_boxed_slice()))
    }

    /// Smoothed estimate at target frequency position `k`.
    pub fn smoothed_at(&self, j: usize, side: Side, k: usize) -> Result<f64> {
        Ok(self.smoothed(j, side)?[k])
    }
}

/// Smoothed local spectra on a rectangular (time × frequency) lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSpectrum {
    pub side: Side,
    time_indices: Vec<usize>,
    frequencies: Vec<f64>,
    /// Row-major `[time][frequency]`.
    estimates: Vec<f64>,
}

impl LocalSpectrum {
    pub fn new(
        side: Side,
        time_indices: Vec<usize>,
        frequencies: Vec<f64>,
        estimates: Vec<f64>,
    ) -> Result<Self> {
        if estimates.len() != time_indices.len() * frequencies.len() {
            return Err(Error::Size(format!(
                "{} estimates for a {}×{} lattice",
                estimates.len(),
                time_indices.len(),
                frequencies.len()
            )));
        }
        if time_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Index("time indices must be strictly increasing".into()));
        }
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("non-finite spectral estimate".into()));
        }
        Ok(Self {
            side,
            time_indices,
            frequencies,
            estimates,
        })
    }

    pub fn time_indices(&self) -> &[usize] {
        &self.time_indices
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn row(&self, j: usize) -> Result<&[f64]> {
        let r = self
            .time_indices
            .binary_search(&j)
            .map_err(|_| Error::Index(format!("time index {j} not in spectrum")))?;
        let w = self.frequencies.len();
        Ok(&self.estimates[r * w..(r + 1) * w])
    }

    pub fn get(&self, j: usize, k: usize) -> Result<f64> {
        self.row(j)?
            .get(k)
            .copied()
            .ok_or_else(|| Error::Index(format!("frequency column {k} out of range")))
    }

    /// Column position of `omega` (exact match).
    pub fn column_of(&self, omega: f64) -> Result<usize> {
        self.frequencies
            .iter()
            .position(|&w| w == omega)
            .ok_or_else(|| Error::Index(format!("frequency {omega} not in spectrum")))
    }

    /// Returns a copy with every estimate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            estimates: self.estimates.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Writes the lattice as CSV: a header `t,<ω₁>,...`, then one row per
    /// time index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for w in &self.frequencies {
            write!(out, ",{w}")?;
        }
        writeln!(out)?;
        let w = self.frequencies.len();
        for (r, t) in self.time_indices.iter().enumerate() {
            write!(out, "{t}")?;
            for v in &self.estimates[r * w..(r + 1) * w] {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Anchors needed by the block statistics: the union of the sub-sampled
/// sets of blocks `1..M_T-1`.
pub fn required_anchors(config: &SpectralConfig) -> Result<Vec<usize>> {
    let mut all = Vec::new();
    for r in 1..config.n_blocks {
        all.extend(block_set(r, config)?.indices);
    }
    all.sort_unstable();
    all.dedup();
    Ok(all)
}

/// Evaluates the smoothed local spectrum of `x` on every anchor required by
/// the block statistics and every frequency of the full grid.
pub fn spectrum_field(
    x: &TimeSeries,
    side: Side,
    config: &SpectralConfig,
    grid: &FrequencyGrid,
) -> Result<LocalSpectrum> {
    if config.sample_len != x.len() {
        return Err(Error::Config(format!(
            "configuration built for T = {} applied to a series of length {}",
            config.sample_len,
            x.len()
        )));
    }
    let anchors = required_anchors(config).map_err(|e| match e {
        Error::Index(msg) => Error::Size(msg),
        other => other,
    })?;
    let engine = SpectralEngine::new(x, config, grid.full());
    let mut estimates = Vec::with_capacity(anchors.len() * grid.full().len());
    for &j in &anchors {
        estimates.extend_from_slice(engine.smoothed(j, side)?);
    }
    LocalSpectrum::new(side, anchors, grid.full().to_vec(), estimates)
}
