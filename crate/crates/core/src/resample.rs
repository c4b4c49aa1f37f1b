//! Fourier-domain resampling of series to a new length: forward DFT,
//! spectrum truncation or zero-padding with explicit Nyquist-bin handling,
//! inverse DFT, real part, amplitude rescaled by `target / source`.
//!
//! Nyquist rules for even lengths: upsampling splits the source Nyquist bin
//! evenly between the two frequencies it unfolds into; downsampling folds the
//! positive and negative bins that alias onto the new Nyquist frequency
//! (their sum is real for real input, so the output stays real).

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

/// Resample one series to `target` points.
pub fn resample_series(x: &[f32], target: usize) -> Result<Vec<f32>> {
    if target < 2 {
        return Err(Error::Invalid(format!("resample target must be >= 2, got {target}")));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::Invalid("cannot resample an empty series".into()));
    }
    let mut planner = FftPlanner::<f64>::new();

    let mut spectrum: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let m = target;
    let keep = n.min(m);
    let mut out_spec = vec![Complex64::new(0.0, 0.0); m];
    out_spec[0] = spectrum[0];
    let positive = (keep - 1) / 2;
    for k in 1..=positive {
        out_spec[k] = spectrum[k];
        out_spec[m - k] = spectrum[n - k];
    }
    if keep % 2 == 0 {
        let half = keep / 2;
        use std::cmp::Ordering;
        match m.cmp(&n) {
            Ordering::Equal => out_spec[half] = spectrum[half],
            Ordering::Greater => {
                // Upsampling from even length: split the Nyquist bin evenly.
                let v = spectrum[half] * 0.5;
                out_spec[half] = v;
                out_spec[m - half] = v;
            }
            Ordering::Less => {
                // Downsampling to even length: fold the aliasing pair.
                out_spec[half] = spectrum[half] + spectrum[n - half];
            }
        }
    }

    planner.plan_fft_inverse(m).process(&mut out_spec);
    // Unnormalized inverse gives m * signal; amplitude rescale multiplies by
    // m / n, so the net factor is 1 / n.
    let scale = 1.0 / n as f64;
    Ok(out_spec.iter().map(|c| (c.re * scale) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_stays_constant() {
        for (n, m) in [(5usize, 12usize), (8, 3), (7, 7), (1, 4)] {
            let x = vec![2.5f32; n];
            let y = resample_series(&x, m).unwrap();
            assert_eq!(y.len(), m);
            for v in y {
                assert!((v - 2.5).abs() < 1e-5, "{n} -> {m}");
            }
        }
    }

    #[test]
    fn same_length_is_identity_within_rounding() {
        let x: Vec<f32> = (0..31).map(|t| ((t as f32) * 0.7).sin() + 0.3 * (t as f32 * 1.9).cos()).collect();
        let y = resample_series(&x, 31).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn cosine_upsample_interpolates_exactly() {
        // One full period over 8 points, upsampled to 16: original samples
        // reappear at the even output indices.
        let x: Vec<f32> = (0..8).map(|t| (2.0 * std::f32::consts::PI * t as f32 / 8.0).cos()).collect();
        let y = resample_series(&x, 16).unwrap();
        for (s, &orig) in x.iter().enumerate() {
            assert!((y[2 * s] - orig).abs() < 1e-4, "index {s}: {} vs {orig}", y[2 * s]);
        }
    }

    #[test]
    fn tiny_target_rejected() {
        assert!(resample_series(&[1.0, 2.0], 1).is_err());
        assert!(resample_series(&[1.0, 2.0], 0).is_err());
    }
}
