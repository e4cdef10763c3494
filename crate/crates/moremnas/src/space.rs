//! Cell-indexed search space: operator codec, macro-architecture expansion,
//! and the analytic cost model (parameter and multiply-add counts).

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct cell operators: 4 conv types x 2 kernels x 4 filter widths
/// x 2 skip choices x 3 repeat counts.
pub const NUM_OPERATORS: u16 = 192;

pub const KERNELS: [u32; 2] = [1, 3];
pub const FILTERS: [u32; 4] = [16, 32, 48, 64];
pub const REPEATS: [u32; 3] = [1, 2, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvType {
    Conv2D,
    InvBottleneckE2,
    GroupConvG2,
    GroupConvG4,
}

impl ConvType {
    pub const ALL: [ConvType; 4] = [
        ConvType::Conv2D,
        ConvType::InvBottleneckE2,
        ConvType::GroupConvG2,
        ConvType::GroupConvG4,
    ];

    pub fn groups(self) -> u32 {
        match self {
            ConvType::Conv2D | ConvType::InvBottleneckE2 => 1,
            ConvType::GroupConvG2 => 2,
            ConvType::GroupConvG4 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConvType::Conv2D => "conv",
            ConvType::InvBottleneckE2 => "invertBotConE2",
            ConvType::GroupConvG2 => "groupConG2",
            ConvType::GroupConvG4 => "groupConG4",
        }
    }
}

/// One decoded cell choice. Bijective with an index in [0, 192).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorDescriptor {
    pub conv_type: ConvType,
    pub kernel: u32,
    pub filters: u32,
    pub skip: bool,
    pub repeats: u32,
}

impl OperatorDescriptor {
    /// Pretty label, e.g. `invertBotConE2_f48_k1_b4_noskip`.
    pub fn label(&self) -> String {
        format!(
            "{}_f{}_k{}_b{}_{}",
            self.conv_type.label(),
            self.filters,
            self.kernel,
            self.repeats,
            if self.skip { "isskip" } else { "noskip" }
        )
    }
}

/// Mixed-radix digit order (conv_type, kernel, filters, skip, repeats),
/// least-significant digit = repeats. The order is fixed so that stored
/// genomes stay portable across builds.
pub fn decode_operator(index: u16) -> Result<OperatorDescriptor> {
    if index >= NUM_OPERATORS {
        return Err(Error::OperatorIndex { index: index as u32, size: NUM_OPERATORS as u32 });
    }
    let i = index as usize;
    let b = i % 3;
    let i = i / 3;
    let s = i % 2;
    let i = i / 2;
    let f = i % 4;
    let i = i / 4;
    let k = i % 2;
    let ct = i / 2;
    Ok(OperatorDescriptor {
        conv_type: ConvType::ALL[ct],
        kernel: KERNELS[k],
        filters: FILTERS[f],
        skip: s == 1,
        repeats: REPEATS[b],
    })
}

/// Exact inverse of [`decode_operator`].
pub fn encode_operator(op: &OperatorDescriptor) -> Result<u16> {
    let ct = ConvType::ALL
        .iter()
        .position(|c| *c == op.conv_type)
        .expect("closed enum");
    let k = position("kernel", &KERNELS, op.kernel)?;
    let f = position("filters", &FILTERS, op.filters)?;
    let s = op.skip as usize;
    let b = position("repeats", &REPEATS, op.repeats)?;
    Ok(((((ct * 2 + k) * 4 + f) * 2 + s) * 3 + b) as u16)
}

fn position(field: &'static str, set: &[u32], value: u32) -> Result<usize> {
    set.iter()
        .position(|v| *v == value)
        .ok_or(Error::DescriptorField { field, value })
}

/// Fixed-length vector of cell indices, each in [0, 192). Ordered
/// lexicographically, which the selection tie-break rules rely on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<u16>);

impl Genome {
    pub fn new(cells: Vec<u16>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyGenome);
        }
        for &c in &cells {
            if c >= NUM_OPERATORS {
                return Err(Error::OperatorIndex { index: c as u32, size: NUM_OPERATORS as u32 });
            }
        }
        Ok(Genome(cells))
    }

    pub fn cells(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cell labels joined with `|`; the `arch` field of evaluator requests.
    pub fn arch_string(&self) -> String {
        self.0
            .iter()
            .map(|&c| decode_operator(c).expect("validated at construction").label())
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", text.join(","))
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |tok: &str| -> Result<u16> {
            let idx: u16 = tok.trim().parse().map_err(|e| Error::GenomeParse {
                text: s.to_string(),
                reason: format!("bad index {tok:?}: {e}"),
            })?;
            if idx >= NUM_OPERATORS {
                return Err(Error::GenomeParse {
                    text: s.to_string(),
                    reason: format!("index {idx} out of range [0, {NUM_OPERATORS})"),
                });
            }
            Ok(idx)
        };
        let cells = s.split(',').map(parse).collect::<Result<Vec<_>>>()?;
        Genome::new(cells)
    }
}

/// Fixed macro-architecture surrounding the searched cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpaceConfig {
    pub n: usize,
    pub head_filters: u32,
    pub scale: u32,
    pub eval_width: u32,
    pub eval_height: u32,
    pub input_channels: u32,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            n: 7,
            head_filters: 32,
            scale: 2,
            eval_width: 480,
            eval_height: 480,
            input_channels: 1,
        }
    }
}

impl SpaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("space.n must be >= 1".into()));
        }
        if self.scale < 1 {
            return Err(Error::Config("space.scale must be >= 1".into()));
        }
        if self.eval_width < 1 || self.eval_height < 1 {
            return Err(Error::Config("space eval dimensions must be >= 1".into()));
        }
        if self.input_channels < 1 {
            return Err(Error::Config("space.input_channels must be >= 1".into()));
        }
        // Grouped cell convolutions must be able to consume the head output.
        if self.head_filters < 1 || self.head_filters % 4 != 0 {
            return Err(Error::Config("space.head_filters must be a positive multiple of 4".into()));
        }
        Ok(())
    }
}

/// 192^n, arbitrary precision.
pub fn space_size(cfg: &SpaceConfig) -> BigUint {
    BigUint::from(NUM_OPERATORS).pow(cfg.n as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    Conv { kernel: u32, c_in: u32, c_out: u32, groups: u32 },
    PixelShuffle { scale: u32 },
    ResidualAdd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub label: String,
    /// 0-based index of the owning cell; None for head/tail layers.
    pub cell: Option<usize>,
    pub op: LayerOp,
}

fn conv_layer(label: String, cell: Option<usize>, kernel: u32, c_in: u32, c_out: u32, groups: u32) -> LayerSpec {
    LayerSpec { label, cell, op: LayerOp::Conv { kernel, c_in, c_out, groups } }
}

/// Expands a genome into the full layer list: head conv, chained cells,
/// 1x1 adapter on channel mismatch, global residual add, upsample conv,
/// pixel shuffle. Cell i's input channels are cell i-1's filters; cell 1
/// reads the head output.
pub fn build_architecture(g: &Genome, cfg: &SpaceConfig) -> Result<Vec<LayerSpec>> {
    if g.len() != cfg.n {
        return Err(Error::GenomeLength { got: g.len(), expected: cfg.n });
    }
    let mut layers = Vec::new();
    layers.push(conv_layer("head".into(), None, 3, cfg.input_channels, cfg.head_filters, 1));

    let mut c = cfg.head_filters;
    for (ci, &idx) in g.cells().iter().enumerate() {
        let op = decode_operator(idx)?;
        let cell_in = c;
        for r in 0..op.repeats {
            let block_in = if r == 0 { cell_in } else { op.filters };
            let at = |part: &str| format!("cell{}.rep{}.{}", ci + 1, r + 1, part);
            match op.conv_type {
                ConvType::Conv2D | ConvType::GroupConvG2 | ConvType::GroupConvG4 => {
                    layers.push(conv_layer(
                        at("conv"),
                        Some(ci),
                        op.kernel,
                        block_in,
                        op.filters,
                        op.conv_type.groups(),
                    ));
                }
                ConvType::InvBottleneckE2 => {
                    layers.push(conv_layer(at("expand"), Some(ci), 1, block_in, 2 * block_in, 1));
                    layers.push(conv_layer(at("mid"), Some(ci), op.kernel, 2 * block_in, 2 * block_in, 1));
                    layers.push(conv_layer(at("project"), Some(ci), 1, 2 * block_in, op.filters, 1));
                }
            }
        }
        // Skip wraps the whole cell: identity when channels already match,
        // otherwise a counted 1x1 projection.
        if op.skip && cell_in != op.filters {
            layers.push(conv_layer(format!("cell{}.skip_proj", ci + 1), Some(ci), 1, cell_in, op.filters, 1));
        }
        c = op.filters;
    }

    if c != cfg.head_filters {
        layers.push(conv_layer("adapter".into(), None, 1, c, cfg.head_filters, 1));
    }
    layers.push(LayerSpec { label: "global_residual".into(), cell: None, op: LayerOp::ResidualAdd });
    layers.push(conv_layer(
        "upsample".into(),
        None,
        3,
        cfg.head_filters,
        cfg.scale * cfg.scale * cfg.input_channels,
        1,
    ));
    layers.push(LayerSpec {
        label: "pixel_shuffle".into(),
        cell: None,
        op: LayerOp::PixelShuffle { scale: cfg.scale },
    });
    Ok(layers)
}

/// Bias-free convolution cost: params = k^2 * c_in * c_out / groups,
/// multi-adds = params * out_w * out_h.
pub fn conv_cost(kernel: u32, c_in: u32, c_out: u32, groups: u32, out_w: u32, out_h: u32) -> Result<(u64, u64)> {
    if kernel < 1 || c_in < 1 || c_out < 1 || groups < 1 || out_w < 1 || out_h < 1 {
        return Err(Error::Config("conv_cost arguments must all be >= 1".into()));
    }
    if c_in % groups != 0 || c_out % groups != 0 {
        return Err(Error::GroupDivision { groups, c_in, c_out });
    }
    let params = (kernel as u64) * (kernel as u64) * (c_in as u64) * (c_out as u64) / (groups as u64);
    let multi_adds = params * (out_w as u64) * (out_h as u64);
    Ok((params, multi_adds))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub label: String,
    pub cell: Option<usize>,
    pub kernel: u32,
    pub c_in: u32,
    pub c_out: u32,
    pub params: u64,
    pub multi_adds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub params: u64,
    pub multi_adds: u64,
    pub per_layer: Vec<LayerCost>,
}

impl CostReport {
    pub fn cell_params(&self, cell: usize) -> u64 {
        self.per_layer.iter().filter(|l| l.cell == Some(cell)).map(|l| l.params).sum()
    }

    pub fn cell_multi_adds(&self, cell: usize) -> u64 {
        self.per_layer.iter().filter(|l| l.cell == Some(cell)).map(|l| l.multi_adds).sum()
    }

    /// Plain-text audit table, one row per layer.
    pub fn audit_table(&self) -> String {
        let mut out = String::from("layer                     kernel  c_in  c_out      params      multi_adds\n");
        for l in &self.per_layer {
            out.push_str(&format!(
                "{:<25} {:>6} {:>5} {:>6} {:>11} {:>15}\n",
                l.label, l.kernel, l.c_in, l.c_out, l.params, l.multi_adds
            ));
        }
        out.push_str(&format!(
            "{:<25} {:>6} {:>5} {:>6} {:>11} {:>15}\n",
            "total", "", "", "", self.params, self.multi_adds
        ));
        out
    }
}

/// Sums conv_cost over the expanded layer list. Every convolution runs in
/// the low-resolution domain (eval_width x eval_height); pixel shuffle and
/// the residual add are free.
pub fn cost_of(g: &Genome, cfg: &SpaceConfig) -> Result<CostReport> {
    let layers = build_architecture(g, cfg)?;
    let mut per_layer = Vec::with_capacity(layers.len());
    let mut params = 0u64;
    let mut multi_adds = 0u64;
    for layer in layers {
        let row = match layer.op {
            LayerOp::Conv { kernel, c_in, c_out, groups } => {
                let (p, m) = conv_cost(kernel, c_in, c_out, groups, cfg.eval_width, cfg.eval_height)?;
                LayerCost { label: layer.label, cell: layer.cell, kernel, c_in, c_out, params: p, multi_adds: m }
            }
            LayerOp::PixelShuffle { scale } => LayerCost {
                label: layer.label,
                cell: layer.cell,
                kernel: 0,
                c_in: scale * scale * cfg.input_channels,
                c_out: cfg.input_channels,
                params: 0,
                multi_adds: 0,
            },
            LayerOp::ResidualAdd => LayerCost {
                label: layer.label,
                cell: layer.cell,
                kernel: 0,
                c_in: cfg.head_filters,
                c_out: cfg.head_filters,
                params: 0,
                multi_adds: 0,
            },
        };
        params += row.params;
        multi_adds += row.multi_adds;
        per_layer.push(row);
    }
    Ok(CostReport { params, multi_adds, per_layer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn decode_first_and_last() {
        let first = decode_operator(0).unwrap();
        assert_eq!(
            first,
            OperatorDescriptor { conv_type: ConvType::Conv2D, kernel: 1, filters: 16, skip: false, repeats: 1 }
        );
        let last = decode_operator(191).unwrap();
        assert_eq!(
            last,
            OperatorDescriptor { conv_type: ConvType::GroupConvG4, kernel: 3, filters: 64, skip: true, repeats: 4 }
        );
        assert!(decode_operator(192).is_err());
    }

    #[test]
    fn codec_roundtrip_exhaustive_and_distinct() {
        let mut seen = HashSet::new();
        for i in 0..NUM_OPERATORS {
            let op = decode_operator(i).unwrap();
            assert_eq!(encode_operator(&op).unwrap(), i);
            assert!(seen.insert(op), "descriptor for {i} repeats an earlier one");
        }
        assert_eq!(seen.len(), 192);
    }

    #[test]
    fn encode_rejects_foreign_fields() {
        let op = OperatorDescriptor { conv_type: ConvType::Conv2D, kernel: 2, filters: 16, skip: false, repeats: 1 };
        assert!(matches!(encode_operator(&op), Err(Error::DescriptorField { field: "kernel", .. })));
    }

    #[test]
    fn roundtrip_random_descriptors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let op = OperatorDescriptor {
                conv_type: ConvType::ALL[rng.random_range(0..4)],
                kernel: KERNELS[rng.random_range(0..2)],
                filters: FILTERS[rng.random_range(0..4)],
                skip: rng.random_bool(0.5),
                repeats: REPEATS[rng.random_range(0..3)],
            };
            assert_eq!(decode_operator(encode_operator(&op).unwrap()).unwrap(), op);
        }
    }

    #[test]
    fn space_size_powers() {
        let mut cfg = SpaceConfig::default();
        cfg.n = 1;
        assert_eq!(space_size(&cfg), BigUint::from(192u32));
        cfg.n = 2;
        assert_eq!(space_size(&cfg), BigUint::from(36864u32));
        cfg.n = 7;
        assert_eq!(space_size(&cfg), BigUint::from(9_618_527_719_784_448u64));
    }

    #[test]
    fn genome_text_roundtrip() {
        let g: Genome = "12,0,85,191,3,3,77".parse().unwrap();
        assert_eq!(g.to_string(), "12,0,85,191,3,3,77");
        assert!("12,500,3".parse::<Genome>().is_err());
        assert!("12,x,3".parse::<Genome>().is_err());
        assert!(Genome::new(vec![]).is_err());
        assert!(Genome::new(vec![192]).is_err());
    }

    #[test]
    fn arch_string_mirrors_labels() {
        let op = OperatorDescriptor {
            conv_type: ConvType::InvBottleneckE2,
            kernel: 1,
            filters: 48,
            skip: false,
            repeats: 4,
        };
        let idx = encode_operator(&op).unwrap();
        let g = Genome::new(vec![idx, 0]).unwrap();
        assert_eq!(g.arch_string(), "invertBotConE2_f48_k1_b4_noskip|conv_f16_k1_b1_noskip");
    }

    fn random_genome(rng: &mut ChaCha8Rng, n: usize) -> Genome {
        Genome::new((0..n).map(|_| rng.random_range(0..NUM_OPERATORS)).collect()).unwrap()
    }

    #[test]
    fn chaining_holds_on_random_genomes() {
        let cfg = SpaceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let g = random_genome(&mut rng, cfg.n);
            let layers = build_architecture(&g, &cfg).unwrap();
            // Main-path convolutions must chain channel-exactly; the skip
            // projection is a parallel branch and the shuffle is not a conv.
            let main: Vec<&LayerSpec> = layers
                .iter()
                .filter(|l| {
                    matches!(l.op, LayerOp::Conv { .. }) && !l.label.ends_with("skip_proj")
                })
                .collect();
            for w in main.windows(2) {
                let (LayerOp::Conv { c_out, .. }, LayerOp::Conv { c_in, .. }) = (w[0].op, w[1].op) else {
                    unreachable!()
                };
                assert_eq!(c_out, c_in, "{} -> {}", w[0].label, w[1].label);
            }
            // The skip projection, when present, bridges cell input to cell output.
            for l in &layers {
                if l.label.ends_with("skip_proj") {
                    let LayerOp::Conv { kernel, .. } = l.op else { unreachable!() };
                    assert_eq!(kernel, 1);
                }
            }
        }
    }

    #[test]
    fn skip_identity_emits_no_projection() {
        // Conv2D k1 f32 skip b1 placed first: input 32 == filters 32.
        let matched = OperatorDescriptor { conv_type: ConvType::Conv2D, kernel: 1, filters: 32, skip: true, repeats: 1 };
        let mismatched = OperatorDescriptor { conv_type: ConvType::Conv2D, kernel: 1, filters: 16, skip: true, repeats: 1 };
        let cfg = SpaceConfig { n: 1, ..SpaceConfig::default() };
        let g = Genome::new(vec![encode_operator(&matched).unwrap()]).unwrap();
        let layers = build_architecture(&g, &cfg).unwrap();
        assert!(!layers.iter().any(|l| l.label.ends_with("skip_proj")));
        let g = Genome::new(vec![encode_operator(&mismatched).unwrap()]).unwrap();
        let layers = build_architecture(&g, &cfg).unwrap();
        assert!(layers.iter().any(|l| l.label.ends_with("skip_proj")));
    }

    #[test]
    fn conv_cost_degenerate_grouped() {
        // Fully grouped 1x1 at 1x1 output: params = multi_adds = c_in.
        let (p, m) = conv_cost(1, 8, 8, 8, 1, 1).unwrap();
        assert_eq!((p, m), (8, 8));
        assert!(matches!(conv_cost(3, 10, 16, 4, 1, 1), Err(Error::GroupDivision { .. })));
        assert!(conv_cost(0, 8, 8, 1, 1, 1).is_err());
    }

    #[test]
    fn srcnn_and_vdsr_anchor_rows() {
        // Baselines operate in the upscaled domain: 960x960 for x2.
        let srcnn = [(9, 1, 64), (5, 64, 32), (5, 32, 1)];
        let (mut p, mut m) = (0u64, 0u64);
        for (k, ci, co) in srcnn {
            let (lp, lm) = conv_cost(k, ci, co, 1, 960, 960).unwrap();
            p += lp;
            m += lm;
        }
        assert_eq!(p, 57_184);
        assert_eq!(m, 52_700_774_400);

        let (mut p, mut m) = (0u64, 0u64);
        let mut vdsr = vec![(3u32, 1u32, 64u32)];
        vdsr.extend(std::iter::repeat((3, 64, 64)).take(18));
        vdsr.push((3, 64, 1));
        for (k, ci, co) in vdsr {
            let (lp, lm) = conv_cost(k, ci, co, 1, 960, 960).unwrap();
            p += lp;
            m += lm;
        }
        assert_eq!(p, 664_704);
        assert_eq!(m, 612_591_206_400);
    }

    #[test]
    fn all_zero_genome_hand_sum() {
        // head 288 + cell1 512 (input is the 32-channel head output) +
        // 6 x 256 + adapter 512 + upsample 1152 = 4000.
        let cfg = SpaceConfig::default();
        let g = Genome::new(vec![0; 7]).unwrap();
        let report = cost_of(&g, &cfg).unwrap();
        assert_eq!(report.params, 4000);
        assert_eq!(report.multi_adds, 4000 * 480 * 480);
        assert_eq!(report.per_layer[0].params, 288);
        assert_eq!(report.per_layer[1].params, 512);
        assert!(report.per_layer.iter().any(|l| l.label == "adapter" && l.params == 512));
        assert!(report.per_layer.iter().any(|l| l.label == "upsample" && l.params == 1152));
    }

    #[test]
    fn report_totals_equal_layer_sums() {
        let cfg = SpaceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let g = random_genome(&mut rng, cfg.n);
            let r = cost_of(&g, &cfg).unwrap();
            assert_eq!(r.params, r.per_layer.iter().map(|l| l.params).sum::<u64>());
            assert_eq!(r.multi_adds, r.per_layer.iter().map(|l| l.multi_adds).sum::<u64>());
            // All in-space layers run at LR resolution, so the ratio is exact.
            assert_eq!(r.multi_adds, r.params * 480 * 480);
        }
    }

    #[test]
    fn cell_body_params_monotone_in_filters() {
        // The cell body (skip projection excluded) never shrinks when the
        // filter width grows. The full total can shrink because a wider
        // last cell may drop the 1x1 adapter, and a matching skip drops
        // its projection; those are architectural, not per-block, effects.
        let cfg = SpaceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let mut cells: Vec<u16> = (0..cfg.n).map(|_| rng.random_range(0..NUM_OPERATORS)).collect();
            let pos = rng.random_range(0..cfg.n);
            let mut op = decode_operator(cells[pos]).unwrap();
            let f_idx = FILTERS.iter().position(|f| *f == op.filters).unwrap();
            if f_idx == FILTERS.len() - 1 {
                continue;
            }
            let g_small = Genome::new(cells.clone()).unwrap();
            op.filters = FILTERS[f_idx + 1];
            cells[pos] = encode_operator(&op).unwrap();
            let g_big = Genome::new(cells).unwrap();
            let body = |g: &Genome, c: usize| -> u64 {
                cost_of(g, &cfg)
                    .unwrap()
                    .per_layer
                    .iter()
                    .filter(|l| l.cell == Some(c) && !l.label.ends_with("skip_proj"))
                    .map(|l| l.params)
                    .sum()
            };
            assert!(body(&g_big, pos) >= body(&g_small, pos));
        }
    }

    #[test]
    fn audit_table_lists_every_layer() {
        let cfg = SpaceConfig::default();
        let g = Genome::new(vec![0; 7]).unwrap();
        let report = cost_of(&g, &cfg).unwrap();
        let table = report.audit_table();
        assert!(table.contains("head"));
        assert!(table.contains("pixel_shuffle"));
        assert!(table.contains("total"));
        assert_eq!(table.lines().count(), report.per_layer.len() + 2);
    }
}
