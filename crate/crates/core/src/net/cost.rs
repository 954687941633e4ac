//! Parameter and multiply-add accounting.
//!
//! One multiply-accumulate counts as one multi-add. Convolutions are costed
//! at their output extent; dense layers cost `in * out`; batchnorm, ReLU,
//! pooling, sigmoid and softmax are free. Batchnorm contributes two trainable
//! parameters per channel (running statistics are not counted).

use std::fmt::Write as _;

use num_rational::Ratio;

use super::config::{LayerKind, NetworkConfig, PlannedLayer};
use crate::error::Result;

/// Weights of a square-kernel convolution with `m` inputs and `n` outputs.
pub fn conv_params(kind: LayerKind, kernel: u64, m: u64, n: u64) -> u64 {
    match kind {
        LayerKind::ConvStandard => kernel * kernel * m * n,
        LayerKind::ConvDw => kernel * kernel * m,
        LayerKind::ConvPw => m * n,
        _ => 0,
    }
}

/// Multi-adds of a convolution evaluated at output side `df`.
pub fn conv_multiadds(kind: LayerKind, kernel: u64, m: u64, n: u64, df: u64) -> u64 {
    conv_params(kind, kernel, m, n) * df * df
}

/// Cost of a standard `dk x dk` convolution from `m` to `n` channels at
/// output side `df`.
pub fn standard_cost(dk: u64, m: u64, n: u64, df: u64) -> u64 {
    dk * dk * m * n * df * df
}

/// Cost of the depthwise + pointwise pair replacing [`standard_cost`].
pub fn separable_cost(dk: u64, m: u64, n: u64, df: u64) -> u64 {
    dk * dk * m * df * df + m * n * df * df
}

/// Separable over standard cost as an exact fraction.
pub fn reduction_ratio_exact(dk: u64, m: u64, n: u64, df: u64) -> Ratio<u128> {
    Ratio::new(
        separable_cost(dk, m, n, df) as u128,
        standard_cost(dk, m, n, df) as u128,
    )
}

/// Separable over standard cost; algebraically `1/n + 1/dk^2`.
pub fn reduction_ratio(dk: u64, m: u64, n: u64, df: u64) -> f64 {
    separable_cost(dk, m, n, df) as f64 / standard_cost(dk, m, n, df) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub row: usize,
    pub kind: LayerKind,
    pub description: String,
    pub stride: usize,
    pub input: super::Extent,
    pub output: super::Extent,
    /// Includes the parameters of the batchnorm following a convolution.
    pub params: u64,
    pub multiadds: u64,
}

/// A depthwise layer directly followed by a pointwise layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePair {
    pub dw_index: usize,
    pub kernel: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub out_side: u64,
    pub separable_multiadds: u64,
    pub standard_multiadds: u64,
}

impl SeparablePair {
    pub fn ratio(&self) -> Ratio<u128> {
        Ratio::new(self.separable_multiadds as u128, self.standard_multiadds as u128)
    }

    /// `1/N + 1/D_K^2`.
    pub fn closed_form(&self) -> Ratio<u128> {
        Ratio::new(1, self.out_channels as u128) + Ratio::new(1, (self.kernel * self.kernel) as u128)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub name: String,
    pub bits: usize,
    pub classes: usize,
    pub rows: Vec<CostRow>,
    pub total_params: u64,
    pub total_multiadds: u64,
    /// The same backbone with the classifier fed straight from the pooled
    /// features (no latent layer), as in a plain classification network.
    pub reference_params: u64,
    pub reference_multiadds: u64,
    pub pairs: Vec<SeparablePair>,
}

pub fn cost_report(config: &NetworkConfig) -> Result<CostReport> {
    let plan = config.plan()?;
    let mut rows: Vec<CostRow> = Vec::new();
    let mut pairs = Vec::new();
    let mut backbone_params = 0;
    let mut backbone_multiadds = 0;
    let mut pooled = 0;
    let convs: Vec<&PlannedLayer> = plan.iter().filter(|p| p.kind.is_conv()).collect();
    for layer in &plan {
        let (m, n) = (layer.input.channels as u64, layer.output.channels as u64);
        let (params, multiadds, description) = match layer.kind {
            LayerKind::ConvStandard | LayerKind::ConvDw | LayerKind::ConvPw => {
                let k = layer.kernel as u64;
                let df = layer.output.height as u64;
                debug_assert_eq!(layer.output.height, layer.output.width);
                let desc = match layer.kind {
                    LayerKind::ConvDw => format!("{k}x{k}x{m} dw"),
                    _ => format!("{k}x{k}x{m}x{n}"),
                };
                // batchnorm gamma and beta
                let p = conv_params(layer.kind, k, m, n) + 2 * n;
                let madds = conv_multiadds(layer.kind, k, m, n, df);
                backbone_params += p;
                backbone_multiadds += madds;
                (p, madds, desc)
            }
            LayerKind::AvgPoolGlobal => {
                pooled = m;
                (0, 0, format!("pool {}x{}", layer.input.height, layer.input.width))
            }
            LayerKind::Dense => (m * n + n, m * n, format!("{m}x{n}")),
            LayerKind::Sigmoid => (0, 0, "in place".to_string()),
            LayerKind::Softmax => (0, 0, "classifier".to_string()),
            LayerKind::BatchNorm | LayerKind::Relu => continue,
        };
        rows.push(CostRow {
            row: layer.row,
            kind: layer.kind,
            description,
            stride: layer.stride,
            input: layer.input,
            output: layer.output,
            params,
            multiadds,
        });
    }
    for w in convs.windows(2) {
        let (dw, pw) = (w[0], w[1]);
        if dw.kind == LayerKind::ConvDw && pw.kind == LayerKind::ConvPw && dw.output == pw.input {
            let k = dw.kernel as u64;
            let m = dw.input.channels as u64;
            let n = pw.output.channels as u64;
            let df = pw.output.height as u64;
            pairs.push(SeparablePair {
                dw_index: rows
                    .iter()
                    .position(|r| r.row == dw.row && r.input == dw.input && r.kind == dw.kind)
                    .unwrap_or(0),
                kernel: k,
                in_channels: m,
                out_channels: n,
                out_side: df,
                separable_multiadds: conv_multiadds(LayerKind::ConvDw, k, m, m, dw.output.height as u64)
                    + conv_multiadds(LayerKind::ConvPw, 1, m, n, df),
                standard_multiadds: standard_cost(k, m, n, df),
            });
        }
    }
    let total_params = rows.iter().map(|r| r.params).sum();
    let total_multiadds = rows.iter().map(|r| r.multiadds).sum();
    let classes = config.classes as u64;
    Ok(CostReport {
        name: config.name.clone(),
        bits: config.bits,
        classes: config.classes,
        rows,
        total_params,
        total_multiadds,
        reference_params: backbone_params + pooled * classes + classes,
        reference_multiadds: backbone_multiadds + pooled * classes,
        pairs,
    })
}

pub fn count_params(config: &NetworkConfig) -> Result<u64> {
    Ok(cost_report(config)?.total_params)
}

pub fn count_multiadds(config: &NetworkConfig) -> Result<u64> {
    Ok(cost_report(config)?.total_multiadds)
}

impl CostReport {
    /// Size of all parameters stored as 32-bit floats.
    pub fn model_bytes_f32(&self) -> u64 {
        self.total_params * 4
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "network: {} (bits={}, classes={})", self.name, self.bits, self.classes);
        let _ = writeln!(
            s,
            "{:<4} {:<14} {:<22} {:<16} {:<16} {:>12} {:>14}",
            "row", "type/stride", "filter shape", "input size", "output size", "params", "multi-adds"
        );
        for r in &self.rows {
            let ty = if r.kind.is_conv() {
                format!("{} / s{}", r.kind.keyword(), r.stride)
            } else {
                r.kind.keyword().to_string()
            };
            let _ = writeln!(
                s,
                "{:<4} {:<14} {:<22} {:<16} {:<16} {:>12} {:>14}",
                r.row,
                ty,
                r.description,
                r.input.to_string(),
                r.output.to_string(),
                r.params,
                r.multiadds
            );
        }
        let _ = writeln!(
            s,
            "total: {} params ({:.3}M), {} multi-adds ({:.1}M), {:.1} MB as f32",
            self.total_params,
            self.total_params as f64 / 1e6,
            self.total_multiadds,
            self.total_multiadds as f64 / 1e6,
            self.model_bytes_f32() as f64 / 1e6
        );
        let _ = writeln!(
            s,
            "without latent layer: {} params ({:.3}M), {} multi-adds ({:.1}M)",
            self.reference_params,
            self.reference_params as f64 / 1e6,
            self.reference_multiadds,
            self.reference_multiadds as f64 / 1e6
        );
        for p in &self.pairs {
            let r = p.ratio();
            let _ = writeln!(
                s,
                "separable {}x{} {}->{} @{}: {} / {} = {}/{} ({:.6}, {:.2}x fewer)",
                p.kernel,
                p.kernel,
                p.in_channels,
                p.out_channels,
                p.out_side,
                p.separable_multiadds,
                p.standard_multiadds,
                r.numer(),
                r.denom(),
                *r.numer() as f64 / *r.denom() as f64,
                *r.denom() as f64 / *r.numer() as f64
            );
        }
        s
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name={}", self.name);
        let _ = writeln!(s, "bits={}", self.bits);
        let _ = writeln!(s, "classes={}", self.classes);
        let _ = writeln!(s, "params_total={}", self.total_params);
        let _ = writeln!(s, "multiadds_total={}", self.total_multiadds);
        let _ = writeln!(s, "model_bytes_f32={}", self.model_bytes_f32());
        let _ = writeln!(s, "reference_params_total={}", self.reference_params);
        let _ = writeln!(s, "reference_multiadds_total={}", self.reference_multiadds);
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "layer.{i}.row={} layer.{i}.kind={} layer.{i}.input={} layer.{i}.output={} layer.{i}.params={} layer.{i}.multiadds={}",
                r.row,
                r.kind.keyword(),
                r.input,
                r.output,
                r.params,
                r.multiadds
            );
        }
        for (i, p) in self.pairs.iter().enumerate() {
            let r = p.ratio();
            let _ = writeln!(
                s,
                "pair.{i}.kernel={} pair.{i}.m={} pair.{i}.n={} pair.{i}.df={} pair.{i}.ratio={}/{}",
                p.kernel,
                p.in_channels,
                p.out_channels,
                p.out_side,
                r.numer(),
                r.denom()
            );
        }
        s
    }
}
