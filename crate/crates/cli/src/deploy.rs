//! transfer, quantize and bench.

use std::path::Path;

use anyhow::{bail, Context};

use seawatch::quantbench::{self, compare_quantized, quantize_fp16};
use seawatch::regressor::Regressor;
use seawatch::transfer::{fc_to_cnn, verify_equivalence, ConvNet};

use crate::io::{load_patches, write_json};

const VERIFY_PATCHES: usize = 8;

pub fn transfer(
    model: &Path,
    out: &Path,
    patches: Option<&Path>,
    tol: f64,
    report: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let reg = Regressor::read(model).with_context(|| format!("loading model {}", model.display()))?;
    let mut net = fc_to_cnn(&reg)?;
    let patches = load_patches(patches, VERIFY_PATCHES, seed)?;
    let rep = verify_equivalence(&reg, &net, &patches, tol)?;
    if let Some(path) = report {
        write_json(path, &rep)?;
    }
    if rep.vacuous {
        bail!("equivalence check saw no cells; refusing to write {}", out.display());
    }
    if !rep.passed {
        let w = rep.worst.as_ref();
        bail!(
            "transferred network deviates by {:.3e} (tolerance {tol:.1e}) at {:?}; refusing to write {}",
            rep.max_abs_deviation,
            w.map(|d| (d.patch, d.row, d.col)),
            out.display()
        );
    }
    net.equivalence_report_sha256 = Some(rep.sha256()?);
    net.write(out)?;
    println!(
        "wrote {} ({} layers, {} parameters); max deviation {:.3e} over {} cells",
        out.display(),
        net.depth(),
        net.parameter_count(),
        rep.max_abs_deviation,
        rep.n_cells
    );
    Ok(())
}

pub fn quantize(
    net: &Path,
    out: &Path,
    patches: Option<&Path>,
    max_deviation: f64,
    report: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let net32 = ConvNet::read(net).with_context(|| format!("loading network {}", net.display()))?;
    let net16 = quantize_fp16(&net32)?;
    let patches = load_patches(patches, VERIFY_PATCHES, seed)?;
    let rep = compare_quantized(&net32, &net16, &patches, max_deviation)?;
    if let Some(path) = report {
        write_json(path, &rep)?;
    }
    if !rep.passed {
        bail!(
            "binary16 maps deviate by {:.4} (limit {max_deviation}); refusing to write {}",
            rep.max_map_deviation,
            out.display()
        );
    }
    net16.write(out)?;
    println!(
        "wrote {}: {} -> {} bytes, max map deviation {:.3e}",
        out.display(),
        rep.model_bytes_fp32,
        rep.model_bytes_fp16,
        rep.max_map_deviation
    );
    Ok(())
}

pub fn bench(
    net: &Path,
    patches: Option<&Path>,
    count: usize,
    reps: usize,
    warmup: usize,
    report: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let net = ConvNet::read(net).with_context(|| format!("loading network {}", net.display()))?;
    let patches = load_patches(patches, count, seed)?;
    let rep = quantbench::bench(&net, &patches, warmup, reps)?;
    if let Some(path) = report {
        write_json(path, &rep)?;
    }
    println!(
        "{:?} network: median {:.2} ms, p95 {:.2} ms, {:.1} FPS (reference {} ms, {} FPS) on {}",
        net.dtype,
        rep.median_ms,
        rep.p95_ms,
        rep.fps,
        rep.reference_ms,
        rep.reference_fps,
        rep.hardware_descriptor
    );
    Ok(())
}
