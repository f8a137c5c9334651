use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::SpectralConfig;
use crate::error::{Error, Result};

/// Frequencies searched by the double-sup statistics.
///
/// `full` is an evenly spaced grid from `-π` to `π - ε`; `thinned` keeps
/// every `stride`-th point of it (endpoints always included) so that the
/// smoothed estimates entering a maximum are approximately independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    full: Vec<f64>,
    thinned_indices: Vec<usize>,
    stride: usize,
    n_thinned_effective: usize,
}

impl FrequencyGrid {
    pub fn for_config(config: &SpectralConfig) -> Result<Self> {
        let stride = (config.window_len as f64 * config.freq_bandwidth).floor() as usize + 1;
        Self::new(config.n_omega, config.epsilon_grid, stride)
    }

    pub fn new(n_omega: usize, epsilon: f64, stride: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < PI) {
            return Err(Error::Grid(format!("epsilon {epsilon} outside (0, π)")));
        }
        if stride == 0 || stride >= n_omega {
            return Err(Error::Grid(format!(
                "thinning stride {stride} must be in [1, {n_omega})"
            )));
        }
        if n_omega < 4 {
            return Err(Error::Grid(format!("grid size {n_omega} < 4")));
        }
        let step = (2.0 * PI - epsilon) / (n_omega - 1) as f64;
        let full: Vec<f64> = (0..n_omega)
            .map(|k| {
                if k == n_omega - 1 {
                    PI - epsilon
                } else {
                    -PI + k as f64 * step
                }
            })
            .collect();
        let mut thinned_indices: Vec<usize> = (0..n_omega).step_by(stride).collect();
        if *thinned_indices.last().unwrap() != n_omega - 1 {
            thinned_indices.push(n_omega - 1);
        }
        Ok(Self {
            full,
            thinned_indices,
            stride,
            n_thinned_effective: n_omega / stride,
        })
    }

    /// A degenerate grid holding a single frequency; the thinned set is
    /// that frequency and `n'_ω = 1`.
    pub fn single(omega: f64) -> Self {
        Self {
            full: vec![omega],
            thinned_indices: vec![0],
            stride: 1,
            n_thinned_effective: 1,
        }
    }

    /// Builds a grid from explicit frequencies, all of which enter the
    /// thinned set.
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Grid("empty frequency list".into()));
        }
        let n = frequencies.len();
        Ok(Self {
            full: frequencies,
            thinned_indices: (0..n).collect(),
            stride: 1,
            n_thinned_effective: n,
        })
    }

    /// All grid frequencies `Π`.
    pub fn full(&self) -> &[f64] {
        &self.full
    }

    /// Positions in [`full`](Self::full) of the thinned set `Π'`.
    pub fn thinned_indices(&self) -> &[usize] {
        &self.thinned_indices
    }

    /// The thinned frequencies `Π'`.
    pub fn thinned(&self) -> Vec<f64> {
        self.thinned_indices.iter().map(|&i| self.full[i]).collect()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// `n'_ω = ⌊n_ω / stride⌋`, the count used in the double-sup centering.
    pub fn n_thinned_effective(&self) -> usize {
        self.n_thinned_effective
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_four_keeps_first_fifth_and_last() {
        let g = FrequencyGrid::new(8, PI / 8.0, 4).unwrap();
        assert_eq!(g.thinned_indices(), &[0, 4, 7]);
        assert_eq!(g.full()[0], -PI);
        assert!((g.full()[7] - (PI - PI / 8.0)).abs() < 1e-15);
        assert_eq!(g.n_thinned_effective(), 2);
    }

    #[test]
    fn stride_one_keeps_everything() {
        let g = FrequencyGrid::new(4, PI / 4.0, 1).unwrap();
        assert_eq!(g.thinned(), g.full().to_vec());
    }

    #[test]
    fn oversized_stride_is_rejected() {
        assert!(matches!(
            FrequencyGrid::new(2, PI / 2.0, 4),
            Err(Error::Grid(_))
        ));
        assert!(FrequencyGrid::new(8, 0.0, 2).is_err());
    }

    #[test]
    fn default_grids_are_even_and_avoid_zero() {
        for t in [64, 250, 500, 1000, 2000, 5000] {
            let cfg = SpectralConfig::default_for(t, None).unwrap();
            let g = FrequencyGrid::for_config(&cfg).unwrap();
            let f = g.full();
            let step = f[1] - f[0];
            for w in f.windows(2) {
                assert!(((w[1] - w[0]) - step).abs() < 1e-12);
            }
            // 2ω ≡ 0 (mod 2π) only at the left endpoint -π.
            for &w in &f[1..] {
                let r = (2.0 * w).rem_euclid(2.0 * PI);
                assert!(r > 1e-9 && (2.0 * PI - r) > 1e-9, "T={t} ω={w}");
            }
            assert_eq!(g.thinned_indices()[0], 0);
            assert_eq!(*g.thinned_indices().last().unwrap(), f.len() - 1);
        }
    }
}
