use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style mel filterbank over the one-sided FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `weights[band]` is a sparse list of `(bin, weight)`.
    weights: Vec<Vec<(usize, f64)>>,
    /// `spread[bin]` lists `(band, weight / total weight at bin)`.
    spread: Vec<Vec<(usize, f64)>>,
    num_bins: usize,
}

impl MelFilterbank {
    pub fn new(num_bands: usize, fft_size: usize, sample_rate: u32) -> Self {
        let num_bins = fft_size / 2 + 1;
        let nyquist = f64::from(sample_rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..num_bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (num_bands + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let weights: Vec<Vec<(usize, f64)>> = (0..num_bands)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..num_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        let mut spread = vec![Vec::new(); num_bins];
        for (b, band) in weights.iter().enumerate() {
            for &(k, w) in band {
                spread[k].push((b, w));
            }
        }
        for entries in &mut spread {
            let total: f64 = entries.iter().map(|e| e.1).sum();
            entries.iter_mut().for_each(|e| e.1 /= total);
        }
        Self {
            weights,
            spread,
            num_bins,
        }
    }

    /// Process-wide filterbank for these parameters, built on first use.
    pub fn shared(num_bands: usize, fft_size: usize, sample_rate: u32) -> Arc<Self> {
        type Key = (usize, usize, u32);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<MelFilterbank>>>> = OnceLock::new();
        let mut cache = CACHE
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|p| p.into_inner());
        Arc::clone(
            cache
                .entry((num_bands, fft_size, sample_rate))
                .or_insert_with(|| Arc::new(Self::new(num_bands, fft_size, sample_rate))),
        )
    }

    pub fn num_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Projects one frame of bin powers onto the bands.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|band| band.iter().map(|&(k, w)| w * power[k]).sum())
            .collect()
    }

    /// Spreads per-band values back onto bins, normalized by the total
    /// filter weight at each bin. Bins no filter touches take `fill`.
    pub fn expand(&self, band_values: &[f64], fill: f64) -> Vec<f64> {
        self.spread
            .iter()
            .map(|entries| {
                if entries.is_empty() {
                    fill
                } else {
                    entries.iter().map(|&(b, w)| w * band_values[b]).sum()
                }
            })
            .collect()
    }
}
