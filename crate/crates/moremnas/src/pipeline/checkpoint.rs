//! Versioned, hash-sealed JSON checkpoints. Computed floats are stored as
//! 16-digit hex bit patterns and the payload is hashed byte-for-byte, so a
//! save/load/save cycle is byte-identical and silent corruption is caught.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::controller::{ControllerParams, ReinforceConfig};
use crate::error::{Error, Result};
use crate::eval::surrogate::SurrogateConfig;
use crate::genetic::{InitMode, MutationProbabilities};
use crate::moo::{ConstraintBounds, Individual, ObjectiveVector, Provenance};
use crate::pipeline::{
    ArchiveEntry, BackendSpec, Counters, GenStats, SearchConfig, SearchState,
};
use crate::space::{Genome, SpaceConfig};

pub const SCHEMA_VERSION: u64 = 1;

/// An f64 carried as its exact bit pattern in 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexF64(pub f64);

impl Serialize for HexF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:016x}", self.0.to_bits()))
    }
}

impl<'de> Deserialize<'de> for HexF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() != 16 {
            return Err(D::Error::custom(format!("expected 16 hex digits, got {text:?}")));
        }
        let bits = u64::from_str_radix(&text, 16).map_err(D::Error::custom)?;
        Ok(HexF64(f64::from_bits(bits)))
    }
}

#[derive(Serialize, Deserialize)]
struct RngRecord {
    seed: u64,
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
struct IndividualRecord {
    genome: Vec<u16>,
    objectives: Vec<HexF64>,
    violation: HexF64,
    rank: Option<usize>,
    crowding: Option<HexF64>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ArchiveRecord {
    genome: Vec<u16>,
    psnr: HexF64,
    mse: HexF64,
    params: u64,
    multi_adds: u64,
    violation: HexF64,
    generation: usize,
}

#[derive(Serialize, Deserialize)]
struct ControllerRecord {
    vocab: usize,
    d_e: usize,
    d_h: usize,
    theta: Vec<HexF64>,
}

#[derive(Serialize, Deserialize)]
struct GenStatsRecord {
    generation: usize,
    evaluated: usize,
    cache_hits: usize,
    timeouts: usize,
    precheck_skips: usize,
    feasible: usize,
    best_psnr: HexF64,
}

/// The configuration as it affects results. Worker count is deliberately
/// absent: it only changes wall time, and checkpoints from runs with
/// different pool sizes must compare equal.
#[derive(Serialize, Deserialize)]
struct ConfigEcho {
    seed: u64,
    population: usize,
    generations: usize,
    space: SpaceConfig,
    bounds: ConstraintBounds,
    probs: MutationProbabilities,
    rl: ReinforceConfig,
    surrogate: SurrogateConfig,
    backend: BackendSpec,
    crossover_k: usize,
    init_mode: InitMode,
    dry_run: bool,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    config: ConfigEcho,
    generation: usize,
    rng: RngRecord,
    population: Vec<IndividualRecord>,
    archive: Vec<ArchiveRecord>,
    controller: ControllerRecord,
    baseline: Option<HexF64>,
    counters: Counters,
    history: Vec<GenStatsRecord>,
}

fn payload_of(state: &SearchState) -> Payload {
    let cfg = &state.cfg;
    Payload {
        config: ConfigEcho {
            seed: cfg.seed,
            population: cfg.population,
            generations: cfg.generations,
            space: cfg.space.clone(),
            bounds: cfg.bounds.clone(),
            probs: cfg.probs,
            rl: cfg.rl.clone(),
            surrogate: cfg.surrogate,
            backend: cfg.backend.clone(),
            crossover_k: cfg.crossover_k,
            init_mode: cfg.init_mode,
            dry_run: cfg.dry_run,
        },
        generation: state.generation,
        rng: RngRecord {
            seed: cfg.seed,
            word_pos: format!("{:032x}", state.rng.get_word_pos()),
        },
        population: state
            .population
            .iter()
            .map(|i| IndividualRecord {
                genome: i.genome.cells().to_vec(),
                objectives: i.objectives.values.iter().map(|&v| HexF64(v)).collect(),
                violation: HexF64(i.violation),
                rank: i.rank,
                crowding: i.crowding.map(HexF64),
                provenance: i.provenance,
            })
            .collect(),
        archive: state
            .archive
            .iter()
            .map(|e| ArchiveRecord {
                genome: e.genome.cells().to_vec(),
                psnr: HexF64(e.psnr),
                mse: HexF64(e.mse),
                params: e.params,
                multi_adds: e.multi_adds,
                violation: HexF64(e.violation),
                generation: e.generation,
            })
            .collect(),
        controller: ControllerRecord {
            vocab: state.controller.vocab,
            d_e: state.controller.d_e,
            d_h: state.controller.d_h,
            theta: state.controller.flatten().iter().map(|&v| HexF64(v)).collect(),
        },
        baseline: state.baseline.map(HexF64),
        counters: state.counters,
        history: state
            .history
            .iter()
            .map(|s| GenStatsRecord {
                generation: s.generation,
                evaluated: s.evaluated,
                cache_hits: s.cache_hits,
                timeouts: s.timeouts,
                precheck_skips: s.precheck_skips,
                feasible: s.feasible,
                best_psnr: HexF64(s.best_psnr),
            })
            .collect(),
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes, seals, and atomically replaces `path`.
pub fn save_checkpoint(state: &SearchState, path: &Path) -> Result<()> {
    let payload = serde_json::to_string(&payload_of(state))?;
    let hash = hex_string(&Sha256::digest(payload.as_bytes()));
    let full = format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"sha256\":\"{hash}\",\"payload\":{payload}}}"
    );
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, full.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Deserialize)]
struct EnvelopeIn {
    schema_version: u64,
    sha256: String,
    payload: Box<RawValue>,
}

/// Verifies the version and seal, then rebuilds the search state. The
/// worker count is not part of a checkpoint; pass one or accept the
/// default.
pub fn load_checkpoint(path: &Path, workers: Option<usize>) -> Result<SearchState> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let envelope: EnvelopeIn = serde_json::from_str(&text)?;
    if envelope.schema_version != SCHEMA_VERSION {
        return Err(Error::CheckpointVersion {
            got: envelope.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let computed = hex_string(&Sha256::digest(envelope.payload.get().as_bytes()));
    if !computed.eq_ignore_ascii_case(&envelope.sha256) {
        return Err(Error::CheckpointIntegrity { stored: envelope.sha256, computed });
    }
    let payload: Payload = serde_json::from_str(envelope.payload.get())?;
    restore(payload, workers)
}

fn restore(payload: Payload, workers: Option<usize>) -> Result<SearchState> {
    let echo = payload.config;
    let cfg = SearchConfig {
        seed: echo.seed,
        population: echo.population,
        generations: echo.generations,
        space: echo.space,
        bounds: echo.bounds,
        probs: echo.probs,
        rl: echo.rl,
        surrogate: echo.surrogate,
        backend: echo.backend,
        workers: workers.unwrap_or_else(|| SearchConfig::default().workers),
        crossover_k: echo.crossover_k,
        init_mode: echo.init_mode,
        dry_run: echo.dry_run,
    };
    if payload.rng.seed != cfg.seed {
        return Err(Error::CheckpointField {
            field: "rng.seed",
            reason: "does not match the config seed".into(),
        });
    }
    let word_pos = u128::from_str_radix(&payload.rng.word_pos, 16).map_err(|e| {
        Error::CheckpointField { field: "rng.word_pos", reason: e.to_string() }
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_word_pos(word_pos);
    let population = payload
        .population
        .into_iter()
        .map(|rec| -> Result<Individual> {
            Ok(Individual {
                genome: Genome::new(rec.genome)?,
                objectives: ObjectiveVector::new(
                    rec.objectives.into_iter().map(|h| h.0).collect(),
                    1,
                )?,
                violation: rec.violation.0,
                rank: rec.rank,
                crowding: rec.crowding.map(|h| h.0),
                provenance: rec.provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let archive = payload
        .archive
        .into_iter()
        .map(|rec| -> Result<ArchiveEntry> {
            Ok(ArchiveEntry {
                genome: Genome::new(rec.genome)?,
                psnr: rec.psnr.0,
                mse: rec.mse.0,
                params: rec.params,
                multi_adds: rec.multi_adds,
                violation: rec.violation.0,
                generation: rec.generation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let controller = ControllerParams::from_flat(
        payload.controller.vocab,
        payload.controller.d_e,
        payload.controller.d_h,
        payload.controller.theta.into_iter().map(|h| h.0).collect(),
    )?;
    let history = payload
        .history
        .into_iter()
        .map(|r| GenStats {
            generation: r.generation,
            evaluated: r.evaluated,
            cache_hits: r.cache_hits,
            timeouts: r.timeouts,
            precheck_skips: r.precheck_skips,
            feasible: r.feasible,
            best_psnr: r.best_psnr.0,
        })
        .collect();
    SearchState::from_parts(
        cfg,
        rng,
        payload.generation,
        population,
        archive,
        controller,
        payload.baseline.map(|h| h.0),
        payload.counters,
        history,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::run_search;
    use tempfile::tempdir;

    fn small_cfg() -> SearchConfig {
        SearchConfig { seed: 3, population: 4, generations: 2, workers: 2, ..SearchConfig::default() }
    }

    #[test]
    fn hex_f64_roundtrips_every_bit_pattern() {
        for v in [
            0.0,
            -0.0,
            1.5,
            -1.5e-300,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NAN,
            f64::MIN_POSITIVE,
        ] {
            let json = serde_json::to_string(&HexF64(v)).unwrap();
            let back: HexF64 = serde_json::from_str(&json).unwrap();
            assert_eq!(back.0.to_bits(), v.to_bits());
        }
        assert!(serde_json::from_str::<HexF64>("\"nothexnothexnoth\"").is_err());
        assert!(serde_json::from_str::<HexF64>("\"00\"").is_err());
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let state = run_search(small_cfg()).unwrap();
        save_checkpoint(&state, &a).unwrap();
        let restored = load_checkpoint(&a, Some(state.cfg.workers)).unwrap();
        save_checkpoint(&restored, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(restored.cache.len(), restored.archive.len());
    }

    #[test]
    fn tampering_breaks_the_seal() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.json");
        save_checkpoint(&run_search(small_cfg()).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("\"seed\":3", "\"seed\":4");
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::CheckpointIntegrity { .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_checkpoint(&run_search(small_cfg()).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replace("\"schema_version\":1", "\"schema_version\":9");
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::CheckpointVersion { got: 9, .. })));
    }

    #[test]
    fn bad_word_pos_is_a_field_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("e.json");
        save_checkpoint(&run_search(small_cfg()).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["payload"]["rng"]["word_pos"] = "definitely not hex".into();
        // Re-seal over the edited payload so only the field check can fail.
        let payload = serde_json::to_string(&v["payload"]).unwrap();
        let hash = hex_string(&Sha256::digest(payload.as_bytes()));
        let full = format!(
            "{{\"schema_version\":{SCHEMA_VERSION},\"sha256\":\"{hash}\",\"payload\":{payload}}}"
        );
        std::fs::write(&path, full).unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(Error::CheckpointField { field: "rng.word_pos", .. })
        ));
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let dir = tempdir().unwrap();
        let full = dir.path().join("full.json");
        let resumed = dir.path().join("resumed.json");
        let cfg = SearchConfig { generations: 4, ..small_cfg() };

        let straight = run_search(cfg.clone()).unwrap();
        save_checkpoint(&straight, &full).unwrap();

        let mut interrupted = SearchState::new(cfg).unwrap();
        interrupted.step().unwrap();
        interrupted.step().unwrap();
        let part = dir.path().join("part.json");
        save_checkpoint(&interrupted, &part).unwrap();
        let mut restored = load_checkpoint(&part, Some(2)).unwrap();
        restored.run_to_completion().unwrap();
        save_checkpoint(&restored, &resumed).unwrap();

        assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&resumed).unwrap());
    }

    #[test]
    fn workers_default_when_absent() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.json");
        save_checkpoint(&run_search(small_cfg()).unwrap(), &path).unwrap();
        let state = load_checkpoint(&path, None).unwrap();
        assert_eq!(state.cfg.workers, SearchConfig::default().workers);
    }
}
