//! FP16 weight quantization, model-size accounting and latency benchmarking of
//! the deployed ConvNet.

mod bench;
mod quant;

pub use bench::{bench, hardware_descriptor, BenchReport, REFERENCE_FPS, REFERENCE_MS};
pub use quant::{
    compare_quantized, quantize_fp16, quantize_value, QuantReport, DEFAULT_MAX_DEVIATION,
};
