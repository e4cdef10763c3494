//! Deterministic analytic stand-in for a trainer: psnr rises with model
//! capacity through two saturating exponentials, plus small structural
//! bonuses and a hash-seeded noise term so equal-cost genomes still
//! separate.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{Backend, EvalRequest, Quality, RawOutcome, Source};
use crate::space::{cost_of, decode_operator, Genome, SpaceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub base: f64,
    pub params_gain: f64,
    pub params_scale: f64,
    pub madds_gain: f64,
    pub madds_scale: f64,
    pub skip_bonus: f64,
    pub k3_bonus: f64,
    pub noise_amp: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            base: 27.0,
            params_gain: 5.0,
            params_scale: 5e5,
            madds_gain: 2.0,
            madds_scale: 3e11,
            skip_bonus: 0.3,
            k3_bonus: 0.1,
            noise_amp: 0.2,
        }
    }
}

const FNV_OFFSET_BASIS: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET_BASIS;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of the genome as little-endian u32 cells, strictly left to right.
pub fn genome_hash(genome: &Genome) -> u64 {
    let mut bytes = Vec::with_capacity(genome.len() * 4);
    for &cell in genome.cells() {
        bytes.extend_from_slice(&(cell as u32).to_le_bytes());
    }
    fnv1a64(&bytes)
}

pub fn surrogate_psnr(genome: &Genome, space: &SpaceConfig, cfg: &SurrogateConfig) -> Result<f64> {
    let report = cost_of(genome, space)?;
    let mut skip = 0usize;
    let mut k3 = 0usize;
    for &cell in genome.cells() {
        let op = decode_operator(cell)?;
        if op.skip {
            skip += 1;
        }
        if op.kernel == 3 {
            k3 += 1;
        }
    }
    let n = genome.len() as f64;
    let p = report.params as f64;
    let f = report.multi_adds as f64;
    let noise = (genome_hash(genome) % 1000) as f64 / 1000.0 - 0.5;
    Ok(cfg.base
        + cfg.params_gain * (1.0 - (-p / cfg.params_scale).exp())
        + cfg.madds_gain * (1.0 - (-f / cfg.madds_scale).exp())
        + cfg.skip_bonus * skip as f64 / n
        + cfg.k3_bonus * k3 as f64 / n
        + cfg.noise_amp * noise)
}

#[derive(Debug, Clone)]
pub struct SurrogateBackend {
    pub cfg: SurrogateConfig,
    pub space: SpaceConfig,
}

impl SurrogateBackend {
    pub fn new(cfg: SurrogateConfig, space: SpaceConfig) -> Self {
        SurrogateBackend { cfg, space }
    }
}

impl Backend for SurrogateBackend {
    fn evaluate(&self, req: &EvalRequest) -> Result<RawOutcome> {
        let psnr = surrogate_psnr(&req.genome, &self.space, &self.cfg)?;
        let mse = 10f64.powf(-psnr / 10.0);
        Ok(RawOutcome::Done(Quality { psnr, mse }))
    }

    fn kind(&self) -> Source {
        Source::Surrogate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate_batch, EvalCache, EvalOutcome};

    fn genome(cells: &[u16]) -> Genome {
        Genome::new(cells.to_vec()).unwrap()
    }

    #[test]
    fn fnv_matches_independent_arithmetic() {
        // Same fold written with u128 arithmetic instead of wrapping_mul.
        let wide = |bytes: &[u8]| -> u64 {
            let mut h: u128 = FNV_OFFSET_BASIS as u128;
            for &b in bytes {
                h ^= b as u128;
                h = (h * FNV_PRIME as u128) % (1u128 << 64);
            }
            h as u64
        };
        for bytes in [&b""[..], b"a", b"foobar", &[0, 0, 0, 0], &[1, 0, 0, 0, 2, 0, 0, 0]] {
            assert_eq!(fnv1a64(bytes), wide(bytes));
        }
        assert_eq!(fnv1a64(b""), FNV_OFFSET_BASIS);
    }

    #[test]
    fn hash_is_order_sensitive() {
        let a = genome_hash(&genome(&[1, 2, 3, 4, 5, 6, 7]));
        let b = genome_hash(&genome(&[7, 6, 5, 4, 3, 2, 1]));
        assert_ne!(a, b);
    }

    #[test]
    fn psnr_is_deterministic_and_bounded() {
        let space = SpaceConfig::default();
        let cfg = SurrogateConfig::default();
        let g = genome(&[62, 74, 53, 96, 92, 165, 86]);
        let a = surrogate_psnr(&g, &space, &cfg).unwrap();
        let b = surrogate_psnr(&g, &space, &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        // base - noise_amp/2 <= psnr <= base + gains + bonuses + noise_amp/2
        assert!(a > cfg.base - cfg.noise_amp);
        assert!(a < cfg.base + cfg.params_gain + cfg.madds_gain + cfg.skip_bonus + cfg.k3_bonus + cfg.noise_amp);
    }

    #[test]
    fn bigger_models_score_higher_modulo_noise() {
        let space = SpaceConfig::default();
        let cfg = SurrogateConfig { noise_amp: 0.0, ..SurrogateConfig::default() };
        // Same structure, filters 16 everywhere vs 64 everywhere.
        let small = genome(&[0; 7]);
        let big = genome(&[18; 7]);
        let lo = surrogate_psnr(&small, &space, &cfg).unwrap();
        let hi = surrogate_psnr(&big, &space, &cfg).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn backend_roundtrip_through_batch() {
        let space = SpaceConfig::default();
        let backend = SurrogateBackend::new(SurrogateConfig::default(), space.clone());
        let mut cache = EvalCache::new();
        let g = genome(&[10, 20, 30, 40, 50, 60, 70]);
        let out = evaluate_batch(&[g.clone()], &space, 1, &backend, &mut cache).unwrap();
        match &out.outcomes[0] {
            EvalOutcome::Done(r) => {
                assert_eq!(r.source, Source::Surrogate);
                let direct = surrogate_psnr(&g, &space, &SurrogateConfig::default()).unwrap();
                assert!((r.psnr - direct).abs() < 1e-9);
                assert_eq!(r.mse, 10f64.powf(-direct / 10.0));
                let report = cost_of(&g, &space).unwrap();
                assert_eq!(r.params, report.params);
                assert_eq!(r.multi_adds, report.multi_adds);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}
