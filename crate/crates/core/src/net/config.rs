//! Declarative network descriptions and their text format.
//!
//! ```text
//! # comment
//! name   <identifier>
//! input  <H>x<W>x<C>
//! bits   <K>                 latent (hash) width
//! classes <count>
//! conv   <stride> <out_ch>   <kernel> [repeat] [in=HxWxC]
//! dw     <stride> <channels> <kernel> [repeat] [in=HxWxC]
//! pw     <stride> <out_ch>   1        [repeat] [in=HxWxC]
//! avgpool                                      [in=HxWxC]
//! dense  <out>                                 [in=HxWxC]
//! sigmoid                                      [in=HxWxC]
//! softmax                                      [in=HxWxC]
//! ```
//!
//! Every convolution row is implicitly followed by batchnorm and ReLU. The
//! optional `in=` annotation states the input size the row expects; it is
//! checked against the computed shape chain. Header lines may appear anywhere.
//! The layer rows must end with the hashing head
//! `avgpool, dense <bits>, sigmoid, dense <classes>, softmax`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{default_padding, output_extent};

pub const BUILTIN_CONFIGS: [(&str, &str); 3] = [
    ("table1-verbatim", include_str!("../../configs/table1-verbatim.cfg")),
    ("mobilenet-standard", include_str!("../../configs/mobilenet-standard.cfg")),
    ("toy", include_str!("../../configs/toy.cfg")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    ConvStandard,
    ConvDw,
    ConvPw,
    BatchNorm,
    Relu,
    AvgPoolGlobal,
    Dense,
    Sigmoid,
    Softmax,
}

impl LayerKind {
    pub fn keyword(self) -> &'static str {
        match self {
            LayerKind::ConvStandard => "conv",
            LayerKind::ConvDw => "dw",
            LayerKind::ConvPw => "pw",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::AvgPoolGlobal => "avgpool",
            LayerKind::Dense => "dense",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn is_conv(self) -> bool {
        matches!(self, LayerKind::ConvStandard | LayerKind::ConvDw | LayerKind::ConvPw)
    }
}

/// Spatial/channel extent of a single image: `height x width x channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Extent {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Extent {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Extent {
            height,
            width,
            channels,
        }
    }

    pub fn numel(&self) -> usize {
        self.height * self.width * self.channels
    }

    fn parse(s: &str) -> Option<Extent> {
        let mut it = s.split('x').map(|p| p.parse::<usize>().ok().filter(|&v| v > 0));
        let ext = Extent::new(it.next()??, it.next()??, it.next()??);
        it.next().is_none().then_some(ext)
    }
}

impl std::fmt::Display for Extent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// One row of a config file. Equality ignores the source line.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Conv rows only.
    pub stride: Option<usize>,
    /// Output channels for conv rows, output features for dense rows.
    pub out: Option<usize>,
    /// Conv rows only; square kernel side.
    pub kernel: Option<usize>,
    pub repeat: usize,
    pub expect_input: Option<Extent>,
    /// 1-based source line, 0 for programmatically built rows.
    pub line: usize,
}

impl PartialEq for LayerSpec {
    fn eq(&self, o: &Self) -> bool {
        (self.kind, self.stride, self.out, self.kernel, self.repeat, self.expect_input)
            == (o.kind, o.stride, o.out, o.kernel, o.repeat, o.expect_input)
    }
}

impl Eq for LayerSpec {}

impl LayerSpec {
    pub fn conv(kind: LayerKind, stride: usize, out: usize, kernel: usize) -> Self {
        LayerSpec {
            kind,
            stride: Some(stride),
            out: Some(out),
            kernel: Some(kernel),
            repeat: 1,
            expect_input: None,
            line: 0,
        }
    }

    pub fn simple(kind: LayerKind) -> Self {
        LayerSpec {
            kind,
            stride: None,
            out: None,
            kernel: None,
            repeat: 1,
            expect_input: None,
            line: 0,
        }
    }

    pub fn dense(out: usize) -> Self {
        LayerSpec {
            out: Some(out),
            ..Self::simple(LayerKind::Dense)
        }
    }

    /// Canonical text form of the row.
    pub fn to_text(&self) -> String {
        let mut s = self.kind.keyword().to_string();
        if self.kind.is_conv() {
            let _ = write!(
                s,
                " {} {} {}",
                self.stride.unwrap_or(1),
                self.out.unwrap_or(0),
                self.kernel.unwrap_or(1)
            );
            if self.repeat != 1 {
                let _ = write!(s, " {}", self.repeat);
            }
        } else if let Some(out) = self.out {
            let _ = write!(s, " {out}");
        }
        if let Some(e) = self.expect_input {
            let _ = write!(s, " in={e}");
        }
        s
    }
}

/// A layer row after repeat expansion, with its resolved input and output sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedLayer {
    /// 1-based index of the config row this came from.
    pub row: usize,
    pub kind: LayerKind,
    pub stride: usize,
    pub kernel: usize,
    pub input: Extent,
    pub output: Extent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub name: String,
    pub input: Extent,
    pub bits: usize,
    pub classes: usize,
    pub rows: Vec<LayerSpec>,
}

fn parse_field(line: usize, what: &str, tok: Option<&str>) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::ConfigParse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::ConfigParse {
            line,
            message: format!("{what} must be a positive integer, got `{tok}`"),
        })
}

impl NetworkConfig {
    pub fn builtin(name: &str) -> Option<NetworkConfig> {
        BUILTIN_CONFIGS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| NetworkConfig::parse(text).expect("builtin configs are valid"))
    }

    /// Resolves a builtin name first, then a file path.
    pub fn load(name_or_path: &str) -> Result<NetworkConfig> {
        if let Some(cfg) = Self::builtin(name_or_path) {
            return Ok(cfg);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<NetworkConfig> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.plan()?;
        Ok(cfg)
    }

    /// Parses the text without validating the shape chain.
    pub fn parse_unchecked(text: &str) -> Result<NetworkConfig> {
        let (mut name, mut input, mut bits, mut classes) = (None, None, None, None);
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks: Vec<&str> = content.split_whitespace().collect();
            let mut expect_input = None;
            if let Some(pos) = toks.iter().position(|t| t.starts_with("in=")) {
                let t = toks.remove(pos);
                expect_input = Some(Extent::parse(&t[3..]).ok_or_else(|| Error::ConfigParse {
                    line,
                    message: format!("bad input size `{t}`, expected in=HxWxC"),
                })?);
            }
            let keyword = toks[0];
            let mut args = toks[1..].iter().copied();
            let too_many = |n: usize| -> Result<()> {
                if toks.len() > n + 1 {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("`{keyword}` takes at most {n} arguments"),
                    });
                }
                Ok(())
            };
            match keyword {
                "name" => {
                    too_many(1)?;
                    name = Some(
                        args.next()
                            .ok_or_else(|| Error::ConfigParse {
                                line,
                                message: "missing name".into(),
                            })?
                            .to_string(),
                    );
                }
                "input" => {
                    too_many(1)?;
                    let tok = args.next().unwrap_or("");
                    input = Some(Extent::parse(tok).ok_or_else(|| Error::ConfigParse {
                        line,
                        message: format!("bad input size `{tok}`, expected HxWxC"),
                    })?);
                }
                "bits" => {
                    too_many(1)?;
                    bits = Some(parse_field(line, "bits", args.next())?);
                }
                "classes" => {
                    too_many(1)?;
                    classes = Some(parse_field(line, "classes", args.next())?);
                }
                "conv" | "dw" | "pw" => {
                    too_many(4)?;
                    let kind = match keyword {
                        "conv" => LayerKind::ConvStandard,
                        "dw" => LayerKind::ConvDw,
                        _ => LayerKind::ConvPw,
                    };
                    let stride = parse_field(line, "stride", args.next())?;
                    let out = parse_field(line, "channel count", args.next())?;
                    let kernel = parse_field(line, "kernel", args.next())?;
                    let repeat = match args.next() {
                        Some(t) => parse_field(line, "repeat", Some(t))?,
                        None => 1,
                    };
                    rows.push(LayerSpec {
                        repeat,
                        expect_input,
                        line,
                        ..LayerSpec::conv(kind, stride, out, kernel)
                    });
                }
                "dense" => {
                    too_many(1)?;
                    let out = parse_field(line, "output width", args.next())?;
                    rows.push(LayerSpec {
                        expect_input,
                        line,
                        ..LayerSpec::dense(out)
                    });
                }
                "avgpool" | "sigmoid" | "softmax" => {
                    too_many(0)?;
                    let kind = match keyword {
                        "avgpool" => LayerKind::AvgPoolGlobal,
                        "sigmoid" => LayerKind::Sigmoid,
                        _ => LayerKind::Softmax,
                    };
                    rows.push(LayerSpec {
                        expect_input,
                        line,
                        ..LayerSpec::simple(kind)
                    });
                }
                "batchnorm" | "relu" => {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("`{keyword}` is implicit after every conv row"),
                    })
                }
                other => {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("unknown keyword `{other}`"),
                    })
                }
            }
        }
        let missing = |what: &str| Error::Config(format!("missing `{what}` header"));
        Ok(NetworkConfig {
            name: name.ok_or_else(|| missing("name"))?,
            input: input.ok_or_else(|| missing("input"))?,
            bits: bits.ok_or_else(|| missing("bits"))?,
            classes: classes.ok_or_else(|| missing("classes"))?,
            rows,
        })
    }

    /// Canonical text; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "name {}\ninput {}\nbits {}\nclasses {}\n",
            self.name, self.input, self.bits, self.classes
        );
        for row in &self.rows {
            s.push_str(&row.to_text());
            s.push('\n');
        }
        s
    }

    /// Replaces the latent width, keeping the head rows consistent.
    pub fn with_bits(mut self, bits: usize) -> Self {
        let old = self.bits;
        self.bits = bits;
        if let Some(row) = self.hash_row_mut() {
            if row.out == Some(old) {
                row.out = Some(bits);
                row.expect_input = None;
            }
        }
        if let Some(row) = self.rows.iter_mut().rev().find(|r| r.kind == LayerKind::Dense) {
            row.expect_input = None;
        }
        if let Some(row) = self.rows.iter_mut().find(|r| r.kind == LayerKind::Sigmoid) {
            row.expect_input = None;
        }
        self
    }

    /// Replaces the class count, keeping the classifier rows consistent.
    pub fn with_classes(mut self, classes: usize) -> Self {
        let old = self.classes;
        self.classes = classes;
        if let Some(row) = self.rows.iter_mut().rev().find(|r| r.kind == LayerKind::Dense) {
            if row.out == Some(old) {
                row.out = Some(classes);
            }
        }
        if let Some(row) = self.rows.iter_mut().find(|r| r.kind == LayerKind::Softmax) {
            row.expect_input = None;
        }
        self
    }

    fn hash_row_mut(&mut self) -> Option<&mut LayerSpec> {
        self.rows.iter_mut().find(|r| r.kind == LayerKind::Dense)
    }

    fn chain_error(&self, row: usize, message: String) -> Error {
        let spec = &self.rows[row - 1];
        let text = if spec.line > 0 {
            format!("line {}: {}", spec.line, spec.to_text())
        } else {
            spec.to_text()
        };
        Error::ShapeChain { row, text, message }
    }

    /// Validates the topology and shape chain, expanding repeats and adding
    /// the implicit batchnorm/ReLU after every convolution.
    pub fn plan(&self) -> Result<Vec<PlannedLayer>> {
        let head_kinds = [
            LayerKind::AvgPoolGlobal,
            LayerKind::Dense,
            LayerKind::Sigmoid,
            LayerKind::Dense,
            LayerKind::Softmax,
        ];
        let n_conv = self.rows.iter().take_while(|r| r.kind.is_conv()).count();
        if n_conv == 0 {
            return Err(Error::Config("config has no convolution rows".into()));
        }
        let head: Vec<LayerKind> = self.rows[n_conv..].iter().map(|r| r.kind).collect();
        if head != head_kinds {
            let names: Vec<&str> = head.iter().map(|k| k.keyword()).collect();
            return Err(Error::Config(format!(
                "after the convolution rows expected `avgpool, dense {}, sigmoid, dense {}, softmax`, found `{}`",
                self.bits,
                self.classes,
                names.join(", ")
            )));
        }
        if self.rows[n_conv + 1].out != Some(self.bits) {
            return Err(self.chain_error(
                n_conv + 2,
                format!("latent dense layer must have `bits` = {} outputs", self.bits),
            ));
        }
        if self.rows[n_conv + 3].out != Some(self.classes) {
            return Err(self.chain_error(
                n_conv + 4,
                format!("classifier must have `classes` = {} outputs", self.classes),
            ));
        }

        let mut plan = Vec::new();
        let mut cur = self.input;
        for (idx, spec) in self.rows.iter().enumerate() {
            let row = idx + 1;
            if let Some(exp) = spec.expect_input {
                if exp != cur {
                    return Err(self.chain_error(row, format!("expects input {exp} but receives {cur}")));
                }
            }
            for _ in 0..spec.repeat {
                let input = cur;
                let (output, stride, kernel) = match spec.kind {
                    LayerKind::ConvStandard | LayerKind::ConvDw | LayerKind::ConvPw => {
                        let stride = spec.stride.unwrap_or(1);
                        let kernel = spec.kernel.unwrap_or(1);
                        let out = spec.out.unwrap_or(0);
                        if !(stride == 1 || stride == 2) {
                            return Err(self.chain_error(row, format!("stride must be 1 or 2, got {stride}")));
                        }
                        if spec.kind == LayerKind::ConvPw && kernel != 1 {
                            return Err(self.chain_error(row, "pointwise kernel must be 1".into()));
                        }
                        if spec.kind == LayerKind::ConvDw && out != cur.channels {
                            return Err(self.chain_error(
                                row,
                                format!("depthwise channels {out} must equal input channels {}", cur.channels),
                            ));
                        }
                        let pad = default_padding(kernel);
                        let h = output_extent(cur.height, kernel, stride, pad);
                        let w = output_extent(cur.width, kernel, stride, pad);
                        let (Some(h), Some(w)) = (h, w) else {
                            return Err(self.chain_error(
                                row,
                                format!("input {cur} too small for a {kernel}x{kernel} kernel"),
                            ));
                        };
                        (Extent::new(h, w, out), stride, kernel)
                    }
                    LayerKind::AvgPoolGlobal => {
                        if cur.height != cur.width {
                            return Err(self.chain_error(row, format!("avgpool needs a square input, got {cur}")));
                        }
                        (Extent::new(1, 1, cur.channels), 1, cur.height)
                    }
                    LayerKind::Dense => (Extent::new(1, 1, spec.out.unwrap_or(0)), 1, 1),
                    _ => (cur, 1, 1),
                };
                plan.push(PlannedLayer {
                    row,
                    kind: spec.kind,
                    stride,
                    kernel,
                    input,
                    output,
                });
                if spec.kind.is_conv() {
                    for kind in [LayerKind::BatchNorm, LayerKind::Relu] {
                        plan.push(PlannedLayer {
                            row,
                            kind,
                            stride: 1,
                            kernel: 1,
                            input: output,
                            output,
                        });
                    }
                }
                cur = output;
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_roundtrip() {
        for (name, _) in BUILTIN_CONFIGS {
            let cfg = NetworkConfig::builtin(name).unwrap();
            assert_eq!(cfg.name, name);
            let again = NetworkConfig::parse(&cfg.to_text()).unwrap();
            let strip = |c: &NetworkConfig| {
                let mut c = c.clone();
                c.rows.iter_mut().for_each(|r| r.line = 0);
                c
            };
            assert_eq!(strip(&again), strip(&cfg));
        }
    }

    #[test]
    fn verbatim_config_input_sizes() {
        let cfg = NetworkConfig::builtin("table1-verbatim").unwrap();
        let plan = cfg.plan().unwrap();
        let mut sizes: Vec<usize> = plan.iter().map(|p| p.input.height).collect();
        sizes.dedup();
        assert_eq!(sizes, vec![224, 112, 56, 28, 14, 7, 1]);
        let convs = plan.iter().filter(|p| p.kind.is_conv()).count();
        assert_eq!(convs, 19);
    }

    #[test]
    fn mismatched_chain_names_the_row() {
        let text = "name bad\ninput 56x56x3\nbits 8\nclasses 2\n\
                    conv 1 8 3 in=56x56x3\n\
                    dw 1 8 3 in=28x28x8\n\
                    avgpool\ndense 8\nsigmoid\ndense 2\nsoftmax\n";
        match NetworkConfig::parse(text) {
            Err(Error::ShapeChain { row, text, message }) => {
                assert_eq!(row, 2);
                assert!(text.contains("line 6"), "{text}");
                assert!(message.contains("28x28x8"), "{message}");
                assert!(message.contains("56x56x8"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depthwise_channel_mismatch() {
        let text = "name bad\ninput 8x8x3\nbits 4\nclasses 2\nconv 1 8 3\ndw 1 16 3\navgpool\ndense 4\nsigmoid\ndense 2\nsoftmax\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::ShapeChain { row: 2, .. })));
    }

    #[test]
    fn head_topology_enforced() {
        let text = "name bad\ninput 8x8x3\nbits 4\nclasses 2\nconv 1 8 3\navgpool\ndense 2\nsoftmax\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::Config(_))));
        let text = "name bad\ninput 8x8x3\nbits 4\nclasses 2\nconv 1 8 3\navgpool\ndense 5\nsigmoid\ndense 2\nsoftmax\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::ShapeChain { row: 3, .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "name x\ninput 8x8x3\nbits 4\nclasses 2\nconv 1 8\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::ConfigParse { line: 5, .. })));
        let text = "name x\ninput 8x8\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::ConfigParse { line: 2, .. })));
        let text = "name x\nrelu\n";
        assert!(matches!(NetworkConfig::parse(text), Err(Error::ConfigParse { line: 2, .. })));
        assert!(matches!(NetworkConfig::parse("name x\n"), Err(Error::Config(_))));
    }

    #[test]
    fn repeat_expands() {
        let text = "name r\ninput 8x8x4\nbits 4\nclasses 2\ndw 1 4 3 3\navgpool\ndense 4\nsigmoid\ndense 2\nsoftmax\n";
        let plan = NetworkConfig::parse(text).unwrap().plan().unwrap();
        assert_eq!(plan.iter().filter(|p| p.kind == LayerKind::ConvDw).count(), 3);
        assert!(plan.iter().filter(|p| p.kind == LayerKind::ConvDw).all(|p| p.row == 1));
    }

    #[test]
    fn overrides_keep_head_consistent() {
        let cfg = NetworkConfig::builtin("table1-verbatim").unwrap().with_bits(32).with_classes(7);
        cfg.plan().unwrap();
        assert_eq!(cfg.bits, 32);
        assert_eq!(cfg.classes, 7);
    }
}
