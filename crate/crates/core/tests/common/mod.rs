#![allow(dead_code)]

use std::f64::consts::PI;

use huevitals::estimator::VitalsEstimate;
use huevitals::roi::LandmarkTrack;
use huevitals::synth::Scene;

/// Magnitudes |X_k|, k = 0..=n/2, of the textbook DFT of `x`.
pub fn dft_mags(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                // reduce k*j mod n first so the angle stays small
                let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Mean-removed, Hann-windowed, zero-padded input as the spectrum sees it.
pub fn prepared(values: &[f64], pad: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut out: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - mean) * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    out.resize((n * pad).next_power_of_two(), 0.0);
    out
}

pub fn landmark_track(scene: &Scene) -> LandmarkTrack {
    (0..scene.frame_count()).map(|i| scene.landmarks(i)).collect()
}

/// Checks warm-up, band bounds and trailing-mean smoothing on one stream.
/// Returns a description of the first violation.
pub fn check_estimator_contract(
    estimates: &[VitalsEstimate],
    hr_warmup: f64,
    rr_warmup: f64,
    smooth_n: usize,
) -> Result<(), String> {
    let mut hr_raws: Vec<f64> = Vec::new();
    let mut rr_raws: Vec<f64> = Vec::new();
    let mean_tail = |v: &[f64]| {
        let tail = &v[v.len().saturating_sub(smooth_n)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    for e in estimates {
        let t = e.t_s as f64;
        if e.hr_bpm.is_some() && t < hr_warmup {
            return Err(format!("HR at t={t}"));
        }
        if e.rr_bpm.is_some() && t < rr_warmup {
            return Err(format!("RR at t={t}"));
        }
        if let Some(r) = e.hr_raw {
            hr_raws.push(r);
            if e.hr_bpm != Some(mean_tail(&hr_raws)) {
                return Err(format!("HR smoothing at t={t}: {:?}", e.hr_bpm));
            }
        } else if e.hr_bpm.is_some() {
            return Err(format!("smoothed HR without raw at t={t}"));
        }
        if let Some(r) = e.rr_raw {
            rr_raws.push(r);
            if e.rr_bpm != Some(mean_tail(&rr_raws)) {
                return Err(format!("RR smoothing at t={t}: {:?}", e.rr_bpm));
            }
        } else if e.rr_bpm.is_some() {
            return Err(format!("smoothed RR without raw at t={t}"));
        }
        if e.hr_bpm.is_some_and(|v| !(48.0..=132.0).contains(&v)) {
            return Err(format!("HR {:?} out of band at t={t}", e.hr_bpm));
        }
        if e.rr_bpm.is_some_and(|v| !(10.8..=30.0).contains(&v)) {
            return Err(format!("RR {:?} out of band at t={t}", e.rr_bpm));
        }
        if (e.hr_bpm.is_none() || e.rr_bpm.is_none()) && e.reason.is_none() {
            return Err(format!("absent value without reason at t={t}"));
        }
    }
    Ok(())
}

pub fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}
