use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Patch;
use crate::transfer::ConvNet;

/// Published onboard figures, kept as reference metadata next to local measurements.
pub const REFERENCE_MS: f64 = 40.5;
pub const REFERENCE_FPS: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub median_ms: f64,
    pub p95_ms: f64,
    /// Inferences per second at the median latency.
    pub fps: f64,
    /// Timed inferences over their total wall time.
    pub throughput_fps: f64,
    pub patches: usize,
    pub reps: usize,
    pub warmup: usize,
    pub hardware_descriptor: String,
    pub reference_ms: f64,
    pub reference_fps: f64,
}

impl BenchReport {
    /// Relative gap between `fps` and 1000 / `median_ms`.
    pub fn fps_consistency(&self) -> f64 {
        let implied = 1000.0 / self.median_ms;
        (self.fps - implied).abs() / implied
    }
}

pub fn hardware_descriptor() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "{model}; {cores} logical cores; {}-{}; single worker",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // nearest rank
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Single-patch latency on the calling thread: `warmup` untimed passes, then
/// `reps` sweeps over `patches`, one timing per inference.
pub fn bench(net: &ConvNet, patches: &[Patch], warmup: usize, reps: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::invalid("bench needs reps >= 1"));
    }
    if patches.is_empty() {
        return Err(Error::invalid("bench needs at least one patch"));
    }
    for p in patches.iter().cycle().take(warmup) {
        net.infer_patch(p)?;
    }
    let mut times = Vec::with_capacity(reps * patches.len());
    for _ in 0..reps {
        for p in patches {
            let t = Instant::now();
            std::hint::black_box(net.infer_patch(std::hint::black_box(p))?);
            times.push(t.elapsed().as_secs_f64() * 1e3);
        }
    }
    let total_ms: f64 = times.iter().sum();
    let throughput_fps = times.len() as f64 / (total_ms / 1e3);
    times.sort_by(f64::total_cmp);
    let median_ms = percentile(&times, 0.5);
    Ok(BenchReport {
        median_ms,
        p95_ms: percentile(&times, 0.95),
        fps: 1000.0 / median_ms,
        throughput_fps,
        patches: patches.len(),
        reps,
        warmup,
        hardware_descriptor: hardware_descriptor(),
        reference_ms: REFERENCE_MS,
        reference_fps: REFERENCE_FPS,
    })
}
