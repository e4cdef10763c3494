//! Population initialization, cell-level crossover, and the three-branch
//! hierarchical mutation dispatcher (natural / reinforced / prior), with
//! the reinforced branch split between the controller and roulette
//! sampling over per-operator cost weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{sample_genome, ControllerParams, Episode};
use crate::error::{Error, Result};
use crate::moo::Provenance;
use crate::space::{cost_of, Genome, SpaceConfig, NUM_OPERATORS};

/// Smoothing constant for the log-gap roulette weights.
pub const DEFAULT_ROULETTE_EPSILON: f64 = 0.1;

/// Per-cell resample rate of natural mutation; at least one cell always
/// changes.
pub const NATURAL_CELL_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationProbabilities {
    /// Natural branch.
    pub p_rm: f64,
    /// Reinforced-dominant branch.
    pub p_re: f64,
    /// Prior-regularized branch.
    pub p_pr: f64,
    /// Controller share within the reinforced branch.
    pub p_m: f64,
    /// Roulette share within the reinforced branch.
    pub p_km: f64,
    /// Probability that an offspring is mutated at all.
    pub mutation_ratio: f64,
}

impl Default for MutationProbabilities {
    fn default() -> Self {
        MutationProbabilities { p_rm: 0.50, p_re: 0.45, p_pr: 0.05, p_m: 0.75, p_km: 0.25, mutation_ratio: 0.8 }
    }
}

impl MutationProbabilities {
    pub fn validate(&self) -> Result<()> {
        let all = [self.p_rm, self.p_re, self.p_pr, self.p_m, self.p_km, self.mutation_ratio];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("mutation probabilities must lie in [0, 1]".into()));
        }
        if (self.p_rm + self.p_re + self.p_pr - 1.0).abs() > 1e-9 {
            return Err(Error::Config("p_rm + p_re + p_pr must equal 1".into()));
        }
        if (self.p_m + self.p_km - 1.0).abs() > 1e-9 {
            return Err(Error::Config("p_m + p_km must equal 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// One operator drawn per genome and repeated across all cells.
    Repeated,
    /// Every cell drawn independently.
    PerCell,
}

/// Uniform initialization: one index drawn uniformly and repeated across
/// the genome (or fully independent cells under [`InitMode::PerCell`]).
/// Batch duplicates are re-drawn up to 10 times, then accepted.
pub fn uniform_init<R: Rng>(count: usize, n: usize, mode: InitMode, rng: &mut R) -> Vec<Genome> {
    let mut batch: Vec<Genome> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut genome = draw_uniform(n, mode, rng);
        for _ in 0..10 {
            if !batch.contains(&genome) {
                break;
            }
            genome = draw_uniform(n, mode, rng);
        }
        batch.push(genome);
    }
    batch
}

fn draw_uniform<R: Rng>(n: usize, mode: InitMode, rng: &mut R) -> Genome {
    let cells = match mode {
        InitMode::Repeated => vec![rng.random_range(0..NUM_OPERATORS); n],
        InitMode::PerCell => (0..n).map(|_| rng.random_range(0..NUM_OPERATORS)).collect(),
    };
    Genome::new(cells).expect("indices drawn in range")
}

/// The literal one-gene exchange: the child is x with a single uniformly
/// chosen cell replaced by y's cell at the same position.
pub fn single_point_crossover<R: Rng>(x: &Genome, y: &Genome, rng: &mut R) -> Result<Genome> {
    if x.len() != y.len() {
        return Err(Error::GenomeLength { got: y.len(), expected: x.len() });
    }
    let pos = rng.random_range(0..x.len());
    let mut cells = x.cells().to_vec();
    cells[pos] = y.cells()[pos];
    Genome::new(cells)
}

/// k distinct positions drawn without replacement (partial Fisher-Yates),
/// each replaced by y's cell. With k = 1 this consumes exactly one draw
/// and so reduces to [`single_point_crossover`] on the same stream.
pub fn k_point_crossover<R: Rng>(x: &Genome, y: &Genome, k: usize, rng: &mut R) -> Result<Genome> {
    if x.len() != y.len() {
        return Err(Error::GenomeLength { got: y.len(), expected: x.len() });
    }
    let n = x.len();
    if k < 1 || k > n {
        return Err(Error::Config(format!("crossover k={k} out of range [1, {n}]")));
    }
    let mut positions: Vec<usize> = (0..n).collect();
    for j in 0..k {
        let pick = rng.random_range(j..n);
        positions.swap(j, pick);
    }
    let mut cells = x.cells().to_vec();
    for &pos in &positions[..k] {
        cells[pos] = y.cells()[pos];
    }
    Genome::new(cells)
}

/// Each cell is independently resampled with probability
/// [`NATURAL_CELL_RATE`]; if the child ends up identical to the parent,
/// one uniformly chosen cell is forced to a different index.
pub fn natural_mutation<R: Rng>(parent: &Genome, rng: &mut R) -> Genome {
    let mut cells = parent.cells().to_vec();
    for c in &mut cells {
        if rng.random_bool(NATURAL_CELL_RATE) {
            *c = rng.random_range(0..NUM_OPERATORS);
        }
    }
    if cells == parent.cells() {
        let pos = rng.random_range(0..cells.len());
        // A uniform non-zero shift lands on a different index in one draw.
        let offset = rng.random_range(1..NUM_OPERATORS);
        cells[pos] = (parent.cells()[pos] + offset) % NUM_OPERATORS;
    }
    Genome::new(cells).expect("indices drawn in range")
}

/// Normalized log-gap weights: w_i is proportional to
/// log10(c_max) - log10(c_i) + epsilon, so cheaper operators are favored
/// while the 1000x cost spread is compressed.
pub fn roulette_weights(costs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if costs.is_empty() {
        return Err(Error::Config("roulette needs at least one cost".into()));
    }
    if let Some(bad) = costs.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::Config(format!("roulette costs must be positive, got {bad}")));
    }
    let max_log = costs.iter().map(|c| c.log10()).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = costs.iter().map(|c| max_log - c.log10() + epsilon).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// One weight table per cheap objective over the 192 operators.
#[derive(Debug, Clone, PartialEq)]
pub struct RouletteWeights {
    pub params_w: Vec<f64>,
    pub multi_adds_w: Vec<f64>,
}

impl RouletteWeights {
    /// Costs each operator as a single-cell probe fed by the head output,
    /// so the tables depend only on the space configuration.
    pub fn from_space(space: &SpaceConfig, epsilon: f64) -> Result<Self> {
        let probe_cfg = SpaceConfig { n: 1, ..space.clone() };
        let mut params_costs = Vec::with_capacity(NUM_OPERATORS as usize);
        let mut madds_costs = Vec::with_capacity(NUM_OPERATORS as usize);
        for i in 0..NUM_OPERATORS {
            let probe = Genome::new(vec![i]).expect("probe index in range");
            let report = cost_of(&probe, &probe_cfg)?;
            params_costs.push(report.cell_params(0) as f64);
            madds_costs.push(report.cell_multi_adds(0) as f64);
        }
        Ok(RouletteWeights {
            params_w: roulette_weights(&params_costs, epsilon)?,
            multi_adds_w: roulette_weights(&madds_costs, epsilon)?,
        })
    }
}

fn categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

/// n cells sampled i.i.d. from one of the two weight tables, chosen
/// uniformly per genome.
pub fn roulette_genome<R: Rng>(weights: &RouletteWeights, n: usize, rng: &mut R) -> Genome {
    let table = if rng.random_range(0..2u8) == 0 { &weights.params_w } else { &weights.multi_adds_w };
    let cells = (0..n).map(|_| categorical(table, rng) as u16).collect();
    Genome::new(cells).expect("weights cover valid indices only")
}

pub struct MutationContext<'a> {
    pub controller: &'a ControllerParams,
    pub roulette: &'a RouletteWeights,
}

#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub genome: Genome,
    pub provenance: Provenance,
    /// Present only for controller-sampled children; carries the log-probs
    /// needed for the delayed REINFORCE update.
    pub episode: Option<Episode>,
}

/// Branch dispatch is one categorical draw in the fixed order (natural,
/// reinforced, prior); the reinforced branch spends a second draw on the
/// controller/roulette split. The controller and roulette branches ignore
/// the parent entirely; prior regularization copies one of its cells
/// everywhere.
pub fn hierarchical_mutate<R: Rng>(
    parent: &Genome,
    probs: &MutationProbabilities,
    ctx: &MutationContext<'_>,
    rng: &mut R,
) -> Result<MutationOutcome> {
    let u: f64 = rng.random();
    if u < probs.p_rm {
        return Ok(MutationOutcome {
            genome: natural_mutation(parent, rng),
            provenance: Provenance::NaturalMut,
            episode: None,
        });
    }
    if u < probs.p_rm + probs.p_re {
        let v: f64 = rng.random();
        if v < probs.p_m {
            let episode = sample_genome(ctx.controller, parent.len(), rng);
            let genome = Genome::new(episode.actions.clone())?;
            return Ok(MutationOutcome { genome, provenance: Provenance::ReinforcedMut, episode: Some(episode) });
        }
        return Ok(MutationOutcome {
            genome: roulette_genome(ctx.roulette, parent.len(), rng),
            provenance: Provenance::RouletteMut,
            episode: None,
        });
    }
    let pos = rng.random_range(0..parent.len());
    let genome = Genome::new(vec![parent.cells()[pos]; parent.len()])?;
    Ok(MutationOutcome { genome, provenance: Provenance::PriorMut, episode: None })
}
