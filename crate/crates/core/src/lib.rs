//! Sequence modeling with class-based linear-time attention.
//!
//! The crate bundles a minimal reverse-mode tensor engine, two attention
//! layers (an O(t) class-averaging mechanism and the usual O(t^2)
//! multi-head dot-product reference), a weight-shared decoder language
//! model, a character-level data pipeline, an adadelta training loop,
//! and a single-core runtime-scaling benchmark.

pub mod attention;
pub mod bench;
pub mod data;
pub mod error;
pub mod model;
pub mod oracle;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{DType, Elem, GraphStats, Tensor, TokenBatch};

/// Keep large freed buffers mapped for reuse instead of returning them
/// to the kernel on every drop. Forward passes allocate and free
/// hundreds of megabytes of short-lived tensors; without this the
/// repeated page faulting dominates big-tensor wall times and bends
/// the timing curves superlinear.
pub fn retain_large_allocations() {
    #[cfg(target_os = "linux")]
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}
