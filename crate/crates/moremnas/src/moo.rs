//! Constrained multi-objective machinery: domination, fast non-dominated
//! sorting, forward-gap crowding distance, elitist environmental selection,
//! tournament mating selection, and exact hypervolume for K <= 3.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Genome;

/// Objective values in minimization form. Default layout is
/// (-psnr, multi_adds, params); the first `m_hard` entries come from an
/// evaluator, the rest are analytic.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector {
    pub values: Vec<f64>,
    pub m_hard: usize,
}

impl ObjectiveVector {
    pub fn new(values: Vec<f64>, m_hard: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "objective vector" });
        }
        if m_hard > values.len() {
            return Err(Error::ObjectiveArity { a: m_hard, b: values.len() });
        }
        Ok(ObjectiveVector { values, m_hard })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pareto domination under minimization: no worse everywhere, strictly
/// better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::ObjectiveArity { a: a.len(), b: b.len() });
    }
    Ok(dominates_values(&a.values, &b.values))
}

fn dominates_values(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Optional box constraints on the objective triple. Absent bounds read as
/// unbounded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintBounds {
    pub psnr_min: Option<f64>,
    pub psnr_max: Option<f64>,
    pub flops_min: Option<f64>,
    pub flops_max: Option<f64>,
    pub params_min: Option<f64>,
    pub params_max: Option<f64>,
}

impl ConstraintBounds {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("psnr", self.psnr_min, self.psnr_max),
            ("flops", self.flops_min, self.flops_max),
            ("params", self.params_min, self.params_max),
        ];
        for (name, lo, hi) in pairs {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    return Err(Error::Config(format!("{name} bounds inverted: {lo} > {hi}")));
                }
            }
        }
        Ok(())
    }

    /// Summed normalized violation; 0 means feasible. Each deficit is
    /// divided by its bound magnitude (raw if the bound is 0). Unevaluated
    /// individuals pass psnr = 0.0, which charges the full psnr_min term.
    pub fn violation(&self, psnr: f64, multi_adds: f64, params: f64) -> f64 {
        fn term(deficit: f64, bound: f64) -> f64 {
            let norm = if bound == 0.0 { 1.0 } else { bound.abs() };
            deficit.max(0.0) / norm
        }
        let mut v = 0.0;
        if let Some(b) = self.psnr_min {
            v += term(b - psnr, b);
        }
        if let Some(b) = self.psnr_max {
            v += term(psnr - b, b);
        }
        if let Some(b) = self.flops_min {
            v += term(b - multi_adds, b);
        }
        if let Some(b) = self.flops_max {
            v += term(multi_adds - b, b);
        }
        if let Some(b) = self.params_min {
            v += term(b - params, b);
        }
        if let Some(b) = self.params_max {
            v += term(params - b, b);
        }
        v
    }

    /// Violation from the analytic objectives alone, used to pre-check
    /// offspring before spending an evaluation on them.
    pub fn cheap_violation(&self, multi_adds: f64, params: f64) -> f64 {
        ConstraintBounds { psnr_min: None, psnr_max: None, ..self.clone() }.violation(0.0, multi_adds, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Init,
    Crossover,
    NaturalMut,
    ReinforcedMut,
    RouletteMut,
    PriorMut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub violation: f64,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
    pub provenance: Provenance,
}

impl Individual {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Feasibility-first comparison: feasible beats infeasible, two infeasibles
/// compare by violation, two feasibles by Pareto domination.
pub fn constrained_dominates(a: &Individual, b: &Individual) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates_values(&a.objectives.values, &b.objectives.values),
    }
}

/// NSGA-II front assignment with the bookkeeping scheme (domination lists
/// plus counters). Sets each individual's rank; returns fronts as index
/// lists into `pop`.
pub fn fast_nondominated_sort(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let k = pop[0].objectives.len();
    if let Some(bad) = pop.iter().find(|i| i.objectives.len() != k) {
        return Err(Error::ObjectiveArity { a: k, b: bad.objectives.len() });
    }
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            if constrained_dominates(&pop[p], &pop[q]) {
                dominated_by[p].push(q);
                counts[q] += 1;
            } else if constrained_dominates(&pop[q], &pop[p]) {
                dominated_by[q].push(p);
                counts[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        for &i in &current {
            pop[i].rank = Some(rank);
        }
        let mut next = Vec::new();
        for &i in &current {
            for &q in &dominated_by[i] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
        rank += 1;
    }
    Ok(fronts)
}

/// Forward-gap crowding distance. Per objective the front is sorted
/// ascending (ties broken by genome order); position j contributes
/// (f[j+1] - f[j]) / (f_max - f_min), the maximum position contributes
/// +inf, and a degenerate objective (max == min) contributes 0 elsewhere.
/// Coincident points therefore receive distinct distances.
pub fn crowding_distance(front: &[Individual]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0f64; n];
    if n == 0 {
        return dist;
    }
    let k = front[0].objectives.len();
    for obj in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let fa = front[a].objectives.values[obj];
            let fb = front[b].objectives.values[obj];
            fa.partial_cmp(&fb)
                .expect("objectives are finite")
                .then_with(|| front[a].genome.cmp(&front[b].genome))
        });
        let lo = front[order[0]].objectives.values[obj];
        let hi = front[order[n - 1]].objectives.values[obj];
        let span = hi - lo;
        for j in 0..n {
            let idx = order[j];
            if j == n - 1 {
                dist[idx] = f64::INFINITY;
            } else if span > 0.0 {
                let gap = front[order[j + 1]].objectives.values[obj] - front[idx].objectives.values[obj];
                dist[idx] += gap / span;
            }
        }
    }
    dist
}

/// Elitist survivor selection over parents plus offspring: whole fronts in
/// rank order, the straddling front truncated by descending crowding.
/// Deterministic given input order; sets rank and crowding on survivors.
pub fn environmental_selection(pool: Vec<Individual>, n: usize) -> Result<Vec<Individual>> {
    if pool.len() < n {
        return Err(Error::Config(format!(
            "environmental selection needs at least {n} individuals, got {}",
            pool.len()
        )));
    }
    let mut pool = pool;
    let fronts = fast_nondominated_sort(&mut pool)?;
    let mut keep: Vec<Individual> = Vec::with_capacity(n);
    for front in fronts {
        let members: Vec<Individual> = front.iter().map(|&i| pool[i].clone()).collect();
        let dist = crowding_distance(&members);
        let mut members: Vec<Individual> = members
            .into_iter()
            .zip(&dist)
            .map(|(mut ind, &d)| {
                ind.crowding = Some(d);
                ind
            })
            .collect();
        if keep.len() + members.len() <= n {
            keep.append(&mut members);
            if keep.len() == n {
                break;
            }
        } else {
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by(|&a, &b| {
                members[b]
                    .crowding
                    .unwrap()
                    .partial_cmp(&members[a].crowding.unwrap())
                    .expect("crowding is never NaN")
                    .then_with(|| members[a].genome.cmp(&members[b].genome))
            });
            for &i in order.iter().take(n - keep.len()) {
                keep.push(members[i].clone());
            }
            break;
        }
    }
    Ok(keep)
}

/// Two uniform draws (with replacement); lower rank wins, then larger
/// crowding, then lexicographically smaller genome. Returns an index.
pub fn binary_tournament<R: Rng>(pop: &[Individual], rng: &mut R) -> Result<usize> {
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    tournament_winner(pop, a, b)
}

fn tournament_winner(pop: &[Individual], a: usize, b: usize) -> Result<usize> {
    let rank = |i: usize| pop[i].rank.ok_or(Error::Unranked);
    let crowd = |i: usize| pop[i].crowding.ok_or(Error::Unranked);
    let (ra, rb) = (rank(a)?, rank(b)?);
    if ra != rb {
        return Ok(if ra < rb { a } else { b });
    }
    let (ca, cb) = (crowd(a)?, crowd(b)?);
    if ca != cb {
        return Ok(if ca > cb { a } else { b });
    }
    Ok(if pop[b].genome < pop[a].genome { b } else { a })
}

/// Exact hypervolume of the region dominated by `points` and bounded by
/// `ref_point`, for 2 or 3 objectives. Every point must be no worse than
/// the reference in every coordinate.
pub fn hypervolume(points: &[ObjectiveVector], ref_point: &ObjectiveVector) -> Result<f64> {
    let k = ref_point.len();
    if k != 2 && k != 3 {
        return Err(Error::HypervolumeArity(k));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != k {
            return Err(Error::ObjectiveArity { a: p.len(), b: k });
        }
        if p.values.iter().zip(&ref_point.values).any(|(v, r)| v > r) {
            return Err(Error::HypervolumeReference { index: i });
        }
    }
    let vals: Vec<&[f64]> = points.iter().map(|p| p.values.as_slice()).collect();
    Ok(match k {
        2 => hv2(&vals.iter().map(|v| [v[0], v[1]]).collect::<Vec<_>>(), ref_point.values[0], ref_point.values[1]),
        _ => hv3(&vals, &ref_point.values),
    })
}

/// Staircase sweep: points sorted by x, a point enters the staircase only
/// if it improves the best y seen so far; each step contributes a strip up
/// to the next step (or the reference).
fn hv2(points: &[[f64; 2]], ref_x: f64, ref_y: f64) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
    let mut stairs: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    let mut best_y = f64::INFINITY;
    for p in pts {
        if p[1] < best_y {
            best_y = p[1];
            stairs.push(p);
        }
    }
    let mut hv = 0.0;
    for (i, p) in stairs.iter().enumerate() {
        let next_x = if i + 1 < stairs.len() { stairs[i + 1][0] } else { ref_x };
        hv += (next_x - p[0]) * (ref_y - p[1]);
    }
    hv
}

/// Slab decomposition along the third axis: within [z_s, z_{s+1}) the
/// cross-section is the 2-D hypervolume of the points already active.
fn hv3(points: &[&[f64]], r: &[f64]) -> f64 {
    let mut zs: Vec<f64> = points.iter().map(|p| p[2]).collect();
    zs.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
    zs.dedup();
    let mut hv = 0.0;
    for (s, &z) in zs.iter().enumerate() {
        let z_hi = if s + 1 < zs.len() { zs[s + 1] } else { r[2] };
        if z_hi <= z {
            continue;
        }
        let active: Vec<[f64; 2]> = points.iter().filter(|p| p[2] <= z).map(|p| [p[0], p[1]]).collect();
        hv += hv2(&active, r[0], r[1]) * (z_hi - z);
    }
    hv
}
