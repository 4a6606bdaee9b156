//! Single-core runtime-scaling harness for isolated attention layers:
//! wall-clock forward timings over a grid of sequence lengths, log-log
//! slope fits, and the length where the linear layer overtakes the
//! quadratic one.

#[cfg(test)]
mod tests;

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    agglo_full, agglo_masked, full_attention, AggloAttentionParams, FullAttentionParams,
};
use crate::error::{Error, Result};
use crate::model::AttentionKind;
use crate::tensor::{alloc_stats, Elem, Tensor};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub batch: usize,
    pub d_model: usize,
    pub heads_or_classes: usize,
    pub seq_lengths: Vec<usize>,
    pub replicas: usize,
    pub warmup: usize,
    pub masked: bool,
    pub seed: u64,
    /// Also run backward through a sum loss inside the timed region.
    pub time_backward: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            batch: 32,
            d_model: 512,
            heads_or_classes: 8,
            seq_lengths: vec![64, 128, 256, 512, 1024, 2048],
            replicas: 5,
            warmup: 1,
            masked: true,
            seed: 0,
            time_backward: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_lengths.is_empty() || self.seq_lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "seq_lengths must be strictly increasing, got {:?}",
                self.seq_lengths
            )));
        }
        if self.replicas < 2 {
            return Err(Error::config("replicas must be >= 2".to_string()));
        }
        if self.batch == 0 || self.d_model == 0 || self.heads_or_classes == 0 {
            return Err(Error::config(
                "batch, d_model, heads_or_classes must be positive".to_string(),
            ));
        }
        if self.d_model % self.heads_or_classes != 0 {
            return Err(Error::config(format!(
                "d_model {} not divisible by heads_or_classes {}",
                self.d_model, self.heads_or_classes
            )));
        }
        Ok(())
    }
}

/// One timing observation, forward pass only unless backward timing was
/// requested.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub kind: AttentionKind,
    pub masked: bool,
    pub seq_len: usize,
    pub replica: usize,
    pub seconds: f64,
    /// Largest single tensor allocated during the timed pass, from the
    /// allocation hook.
    pub max_alloc_elems: u64,
}

#[derive(Debug, Clone)]
pub struct SkippedRecord {
    pub kind: AttentionKind,
    pub seq_len: usize,
    pub replica: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BenchMeta {
    pub machine: String,
    pub pinned: bool,
    pub seed: u64,
    pub dtype: &'static str,
    pub masked: bool,
    pub batch: usize,
    pub d_model: usize,
    pub heads_or_classes: usize,
    pub replicas: usize,
    pub warmup: usize,
    pub time_backward: bool,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<SkippedRecord>,
    pub meta: BenchMeta,
}

/// Pin the calling thread to one logical core; false when the platform
/// refuses.
pub fn pin_to_core(core: usize) -> bool {
    #[cfg(target_os = "linux")]
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = core;
        false
    }
}

fn machine_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1).map(|v| v.trim().to_string()))
        })
        .unwrap_or_else(|| "unknown cpu".to_string());
    let cores = std::thread::available_parallelism()
        .map(|n| n.get().to_string())
        .unwrap_or_else(|_| "?".to_string());
    format!(
        "{} ({} logical cores, {} {})",
        cpu,
        cores,
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

fn derive_seed(seed: u64, t: usize, replica: usize, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((t as u64) << 20)
        .wrapping_add((replica as u64) << 4)
        .wrapping_add(salt)
}

/// Fresh random layer input for one (seq_len, replica) cell. The same
/// tensor feeds both attention kinds.
pub fn bench_input<E: Elem>(config: &BenchConfig, t: usize, replica: usize) -> Tensor<E> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t, replica, 1));
    let n = config.batch * t * config.d_model;
    let values: Vec<E> = (0..n)
        .map(|_| E::from_f64(rng.gen_range(-1.0..1.0)))
        .collect();
    Tensor::new(&[config.batch, t, config.d_model], values).expect("input shape")
}

/// Rough peak-bytes estimate for one forward pass, probed before the
/// attempt so an impossible cell is skipped instead of aborting.
fn estimated_peak_bytes<E: Elem>(kind: AttentionKind, config: &BenchConfig, t: usize) -> usize {
    let e = std::mem::size_of::<E>();
    let (b, d) = (config.batch, config.d_model);
    match kind {
        // logits chain dominates: a few [b, t, t] buffers live at once
        AttentionKind::Full => (3 * b * t * t + 8 * b * t * d) * e,
        AttentionKind::Agglomerative => 14 * b * t * d * e,
    }
}

fn preflight(bytes: usize) -> std::result::Result<(), String> {
    let mut probe: Vec<u8> = Vec::new();
    probe
        .try_reserve_exact(bytes)
        .map_err(|_| format!("allocation probe of {bytes} bytes failed"))
}

struct TimedPass {
    seconds: f64,
    max_alloc_elems: u64,
}

/// Time a forward closure: warmups excluded, then at least one pass,
/// widened to three when a single pass is under the 10 ms noise floor;
/// reports the mean per pass.
fn time_passes<E: Elem>(run: &dyn Fn() -> Result<Tensor<E>>, warmup: usize) -> Result<TimedPass> {
    for _ in 0..warmup {
        black_box(run()?);
    }
    alloc_stats::reset();
    let started = Instant::now();
    black_box(run()?);
    let first = started.elapsed().as_secs_f64();
    let max_alloc_elems = alloc_stats::max_single_elems();
    if first >= 0.010 {
        return Ok(TimedPass {
            seconds: first,
            max_alloc_elems,
        });
    }
    let mut total = first;
    let mut passes = 1;
    while passes < 3 {
        let started = Instant::now();
        black_box(run()?);
        total += started.elapsed().as_secs_f64();
        passes += 1;
    }
    Ok(TimedPass {
        seconds: total / passes as f64,
        max_alloc_elems,
    })
}

/// Run the full timing grid. Inputs and weights are freshly seeded per
/// (kind, seq_len, replica); the process is pinned to core 0 where the
/// platform permits, and the pinning outcome lands in the metadata.
pub fn run_bench<E: Elem>(config: &BenchConfig) -> Result<BenchRun> {
    config.validate()?;
    crate::retain_large_allocations();
    let pinned = pin_to_core(0);
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &t in &config.seq_lengths {
        for replica in 0..config.replicas {
            let x = bench_input::<E>(config, t, replica);
            for kind in [AttentionKind::Full, AttentionKind::Agglomerative] {
                if let Err(reason) = preflight(estimated_peak_bytes::<E>(kind, config, t)) {
                    skipped.push(SkippedRecord {
                        kind,
                        seq_len: t,
                        replica,
                        reason,
                    });
                    continue;
                }
                let salt = match kind {
                    AttentionKind::Full => 2,
                    AttentionKind::Agglomerative => 3,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t, replica, salt));
                let timed = match kind {
                    AttentionKind::Full => {
                        let params = FullAttentionParams::<E>::init(
                            config.d_model,
                            config.heads_or_classes,
                            &mut rng,
                        )?
                        .detached();
                        let masked = config.masked;
                        let backward = config.time_backward;
                        let x = &x;
                        time_passes(
                            &move || {
                                let out = full_attention(x, x, &params, masked)?;
                                if backward {
                                    out.sum_all().backward()?;
                                }
                                Ok(out)
                            },
                            config.warmup,
                        )?
                    }
                    AttentionKind::Agglomerative => {
                        let params = AggloAttentionParams::<E>::init(
                            config.d_model,
                            config.heads_or_classes,
                            &mut rng,
                        )?
                        .detached();
                        let masked = config.masked;
                        let backward = config.time_backward;
                        let x = &x;
                        time_passes(
                            &move || {
                                let out = if masked {
                                    agglo_masked(x, x, &params)?
                                } else {
                                    agglo_full(x, x, &params)?
                                };
                                if backward {
                                    out.sum_all().backward()?;
                                }
                                Ok(out)
                            },
                            config.warmup,
                        )?
                    }
                };
                records.push(BenchRecord {
                    kind,
                    masked: config.masked,
                    seq_len: t,
                    replica,
                    seconds: timed.seconds,
                    max_alloc_elems: timed.max_alloc_elems,
                });
            }
        }
    }
    Ok(BenchRun {
        records,
        skipped,
        meta: BenchMeta {
            machine: machine_description(),
            pinned,
            seed: config.seed,
            dtype: E::DTYPE.name(),
            masked: config.masked,
            batch: config.batch,
            d_model: config.d_model,
            heads_or_classes: config.heads_or_classes,
            replicas: config.replicas,
            warmup: config.warmup,
            time_backward: config.time_backward,
        },
    })
}

/// Mean seconds per (kind, seq_len), sorted by length.
pub fn mean_times(records: &[BenchRecord], kind: AttentionKind) -> Vec<(usize, f64)> {
    let mut sums: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for r in records.iter().filter(|r| r.kind == kind) {
        let e = sums.entry(r.seq_len).or_insert((0.0, 0));
        e.0 += r.seconds;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(t, (s, n))| (t, s / n as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub kind: AttentionKind,
    pub slope: f64,
    pub stderr: f64,
    pub lengths_used: Vec<usize>,
}

/// Ordinary least squares of log mean seconds against log length over
/// the largest half of the grid (at least three points), where the
/// asymptotic regime dominates constant overheads.
pub fn fit_scaling(records: &[BenchRecord]) -> Result<Vec<ScalingFit>> {
    let mut fits = Vec::new();
    for kind in [AttentionKind::Full, AttentionKind::Agglomerative] {
        let means = mean_times(records, kind);
        if means.is_empty() {
            continue;
        }
        if means.len() < 3 {
            return Err(Error::contract(format!(
                "scaling fit for {} needs >= 3 distinct sequence lengths, got {}",
                kind.name(),
                means.len()
            )));
        }
        let keep = (means.len().div_ceil(2)).max(3).min(means.len());
        let tail = &means[means.len() - keep..];
        let xs: Vec<f64> = tail.iter().map(|(t, _)| (*t as f64).ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|(_, s)| s.ln()).collect();
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let sxy: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xbar) * (y - ybar))
            .sum();
        let slope = sxy / sxx;
        let intercept = ybar - slope * xbar;
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        let dof = (xs.len() as f64 - 2.0).max(1.0);
        let stderr = (ss_res / dof / sxx).sqrt();
        fits.push(ScalingFit {
            kind,
            slope,
            stderr,
            lengths_used: tail.iter().map(|(t, _)| *t).collect(),
        });
    }
    Ok(fits)
}

/// Smallest measured length at which the class-averaging layer is at
/// least as fast as full attention; None when it never is in range.
pub fn crossover(records: &[BenchRecord]) -> Result<Option<usize>> {
    let agglo = mean_times(records, AttentionKind::Agglomerative);
    let full = mean_times(records, AttentionKind::Full);
    if agglo.is_empty() || full.is_empty() {
        return Err(Error::contract(
            "crossover needs measurements for both attention kinds".to_string(),
        ));
    }
    let full_map: std::collections::BTreeMap<usize, f64> = full.into_iter().collect();
    for (t, a) in agglo {
        if let Some(&f) = full_map.get(&t) {
            if a <= f {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

/// Fraction of adjacent-length mean-time inversions allowed by noise.
pub fn is_monotone_within(records: &[BenchRecord], kind: AttentionKind, tolerance: f64) -> bool {
    let means = mean_times(records, kind);
    means
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 * (1.0 - tolerance))
}

pub fn write_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "kind,masked,seq_len,replica,seconds")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{:.9}",
            r.kind.name(),
            r.masked,
            r.seq_len,
            r.replica,
            r.seconds
        )?;
    }
    Ok(())
}

pub fn write_meta(
    run: &BenchRun,
    fits: &[ScalingFit],
    cross: Option<usize>,
    path: &Path,
) -> Result<()> {
    let m = &run.meta;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "machine={}", m.machine)?;
    writeln!(f, "pinned={}", m.pinned)?;
    writeln!(f, "seed={}", m.seed)?;
    writeln!(f, "dtype={}", m.dtype)?;
    writeln!(f, "masked={}", m.masked)?;
    writeln!(f, "batch={}", m.batch)?;
    writeln!(f, "d_model={}", m.d_model)?;
    writeln!(f, "heads_or_classes={}", m.heads_or_classes)?;
    writeln!(f, "replicas={}", m.replicas)?;
    writeln!(f, "warmup={}", m.warmup)?;
    writeln!(f, "time_backward={}", m.time_backward)?;
    for fit in fits {
        writeln!(
            f,
            "slope_{}={:.4} stderr={:.4} lengths={:?}",
            fit.kind.name(),
            fit.slope,
            fit.stderr,
            fit.lengths_used
        )?;
    }
    match cross {
        Some(t) => writeln!(f, "crossover={t}")?,
        None => writeln!(f, "crossover=none")?,
    }
    for s in &run.skipped {
        writeln!(
            f,
            "skipped kind={} seq_len={} replica={} reason={}",
            s.kind.name(),
            s.seq_len,
            s.replica,
            s.reason
        )?;
    }
    Ok(())
}
