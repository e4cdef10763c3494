//! Evaluation plumbing: request and result types, the backend trait, the
//! genome-keyed result cache, and deterministic fan-out of a batch over a
//! fixed-size worker pool.

pub mod external;
pub mod surrogate;

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{cost_of, Genome, SpaceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Surrogate,
    External,
    Cache,
}

/// Raw quality pair as produced by a backend, before canonicalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quality {
    pub psnr: f64,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub genome: Genome,
    pub arch: String,
    pub scale: u32,
}

/// Canonical evaluation record. The stored mse is authoritative and psnr
/// is always re-derived from it, so equal genomes can never disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub psnr: f64,
    pub mse: f64,
    pub multi_adds: u64,
    pub params: u64,
    pub source: Source,
}

/// What a single backend call produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawOutcome {
    Done(Quality),
    /// Both the original request and its one retry timed out.
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutcome {
    Done(EvalResult),
    TimedOut,
}

pub trait Backend: Send + Sync {
    fn evaluate(&self, req: &EvalRequest) -> Result<RawOutcome>;
    fn kind(&self) -> Source;
}

/// Re-derives psnr from the authoritative mse.
pub fn canonical_psnr(mse: f64) -> Result<f64> {
    if !(mse.is_finite() && mse > 0.0) {
        return Err(Error::Protocol(format!("mse must be finite and positive, got {mse}")));
    }
    Ok(-10.0 * mse.log10())
}

#[derive(Debug, Default)]
pub struct EvalCache {
    map: HashMap<Genome, EvalResult>,
}

impl EvalCache {
    pub fn new() -> Self {
        EvalCache::default()
    }

    pub fn get(&self, genome: &Genome) -> Option<&EvalResult> {
        self.map.get(genome)
    }

    pub fn insert(&mut self, genome: Genome, result: EvalResult) {
        self.map.insert(genome, result);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Outcome of [`evaluate_batch`]: per-input outcomes aligned with the
/// request order, plus the genomes freshly evaluated by this call in
/// dispatch order.
#[derive(Debug)]
pub struct BatchOutcome {
    pub outcomes: Vec<EvalOutcome>,
    pub fresh: Vec<Genome>,
    pub timed_out: usize,
}

/// Deduplicates the batch, serves cache hits, and fans the remaining
/// unique genomes out over `workers` threads. Results are committed in
/// request order, so the outcome is independent of thread scheduling.
pub fn evaluate_batch(
    genomes: &[Genome],
    space: &SpaceConfig,
    workers: usize,
    backend: &dyn Backend,
    cache: &mut EvalCache,
) -> Result<BatchOutcome> {
    let mut misses: Vec<(Genome, EvalRequest, u64, u64)> = Vec::new();
    let mut seen: HashSet<&Genome> = HashSet::new();
    for genome in genomes {
        if cache.get(genome).is_some() || !seen.insert(genome) {
            continue;
        }
        let report = cost_of(genome, space)?;
        let req = EvalRequest {
            genome: genome.clone(),
            arch: genome.arch_string(),
            scale: space.scale,
        };
        misses.push((genome.clone(), req, report.params, report.multi_adds));
    }

    let slots: Vec<Mutex<Option<Result<RawOutcome>>>> =
        misses.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let threads = workers.max(1).min(misses.len());
    if threads > 0 {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    if i >= misses.len() {
                        break;
                    }
                    let outcome = backend.evaluate(&misses[i].1);
                    *slots[i].lock().expect("eval slot poisoned") = Some(outcome);
                });
            }
        });
    }

    let mut fresh = Vec::new();
    let mut timed_out_set: HashSet<Genome> = HashSet::new();
    for ((genome, _, params, multi_adds), slot) in misses.iter().zip(&slots) {
        let raw = slot
            .lock()
            .expect("eval slot poisoned")
            .take()
            .expect("every slot is filled before the scope ends");
        match raw? {
            RawOutcome::Done(quality) => {
                let psnr = canonical_psnr(quality.mse)?;
                cache.insert(
                    genome.clone(),
                    EvalResult {
                        psnr,
                        mse: quality.mse,
                        multi_adds: *multi_adds,
                        params: *params,
                        source: backend.kind(),
                    },
                );
                fresh.push(genome.clone());
            }
            RawOutcome::TimedOut => {
                timed_out_set.insert(genome.clone());
            }
        }
    }

    let fresh_set: HashSet<&Genome> = fresh.iter().collect();
    let timed_out = timed_out_set.len();
    let outcomes = genomes
        .iter()
        .map(|genome| {
            if timed_out_set.contains(genome) {
                return EvalOutcome::TimedOut;
            }
            let mut result = *cache.get(genome).expect("evaluated or cached above");
            if !fresh_set.contains(genome) {
                result.source = Source::Cache;
            }
            EvalOutcome::Done(result)
        })
        .collect();

    Ok(BatchOutcome { outcomes, fresh, timed_out })
}
