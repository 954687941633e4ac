//! Binary codes: thresholding latent activations, bit packing, Hamming
//! distance and the text code-file format.
//!
//! Bit `j` of a K-bit code lives in word `j / 64` at bit position `j % 64`
//! (bit 0 is the least significant bit of word 0). Padding bits above `K` are
//! always zero, so equal codes have equal words and equal bytes.
//!
//! Code file:
//!
//! ```text
//! bits 16
//! count 3
//! labels red,green,blue
//! img_000,0,8f03
//! img_001,2,00ff
//! img_002,1,ffff
//! ```
//!
//! Each record is `image_id,label_index,hex`. The hex string has
//! `ceil(K / 4)` lowercase digits and reads as the number `sum(bit_j * 2^j)`,
//! most significant digit first. Lines starting with `#` are comments.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackedBits {
    len: usize,
    words: Vec<u64>,
}

impl PackedBits {
    pub fn zeros(len: usize) -> Self {
        PackedBits {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit {j} out of range for {} bits", self.len);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit {j} out of range for {} bits", self.len);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    /// Little-endian bytes, `ceil(len / 8)` of them.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(self.len.div_ceil(8));
        bytes
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn complement(&self) -> PackedBits {
        let mut out = PackedBits {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_padding();
        out
    }

    fn clear_padding(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let nibble = (self.words[d / 16] >> ((d % 16) * 4)) & 0xf;
            let _ = write!(s, "{nibble:x}");
        }
        s
    }

    /// Parses [`PackedBits::to_hex`] output; rejects set padding bits.
    pub fn from_hex(len: usize, hex: &str) -> Option<PackedBits> {
        let digits = len.div_ceil(4);
        if hex.len() != digits {
            return None;
        }
        let mut out = PackedBits::zeros(len);
        for (i, c) in hex.chars().enumerate() {
            let d = digits - 1 - i;
            let v = match c {
                '0'..='9' | 'a'..='f' => c.to_digit(16)? as u64,
                _ => return None,
            };
            out.words[d / 16] |= v << ((d % 16) * 4);
        }
        let expected = {
            let mut c = out.clone();
            c.clear_padding();
            c
        };
        (expected == out).then_some(out)
    }
}

pub fn pack_bits(bits: &[bool]) -> PackedBits {
    let mut out = PackedBits::zeros(bits.len());
    for (j, &b) in bits.iter().enumerate() {
        if b {
            out.words[j / 64] |= 1 << (j % 64);
        }
    }
    out
}

pub fn unpack_bits(bits: &PackedBits) -> Vec<bool> {
    (0..bits.len()).map(|j| bits.get(j)).collect()
}

/// Thresholds sigmoid activations: bit `j` is set iff activation `j > 0.5`.
pub fn binarize(activations: &[f64]) -> PackedBits {
    let mut out = PackedBits::zeros(activations.len());
    for (j, &a) in activations.iter().enumerate() {
        if a - 0.5 > 0.0 {
            out.words[j / 64] |= 1 << (j % 64);
        }
    }
    out
}

/// [`binarize`] with a length check against the code width.
pub fn binarize_checked(activations: &[f64], bits: usize) -> Result<PackedBits> {
    if activations.len() != bits {
        return Err(Error::BitsMismatch(activations.len(), bits));
    }
    Ok(binarize(activations))
}

pub fn hamming_bits(a: &PackedBits, b: &PackedBits) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::BitsMismatch(a.len, b.len));
    }
    Ok(a.words.iter().zip(&b.words).map(|(x, y)| (x ^ y).count_ones()).sum())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCode {
    pub image_id: String,
    pub label: usize,
    pub bits: PackedBits,
}

impl BinaryCode {
    pub fn new(image_id: impl Into<String>, label: usize, bits: PackedBits) -> Self {
        BinaryCode {
            image_id: image_id.into(),
            label,
            bits,
        }
    }
}

pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    hamming_bits(&a.bits, &b.bits)
}

/// An ordered set of equal-width codes with unique image ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    bits: usize,
    labels: Vec<String>,
    codes: Vec<BinaryCode>,
    ids: HashSet<String>,
}

impl CodeBook {
    pub fn new(bits: usize, labels: Vec<String>) -> Self {
        CodeBook {
            bits,
            labels,
            codes: Vec::new(),
            ids: HashSet::new(),
        }
    }

    pub fn from_codes(bits: usize, labels: Vec<String>, codes: impl IntoIterator<Item = BinaryCode>) -> Result<Self> {
        let mut book = Self::new(bits, labels);
        for c in codes {
            book.push(c)?;
        }
        Ok(book)
    }

    pub fn push(&mut self, code: BinaryCode) -> Result<()> {
        if code.bits.len() != self.bits {
            return Err(Error::BitsMismatch(code.bits.len(), self.bits));
        }
        if !self.labels.is_empty() && code.label >= self.labels.len() {
            return Err(Error::LabelOutOfRange {
                label: code.label,
                classes: self.labels.len(),
            });
        }
        if !self.ids.insert(code.image_id.clone()) {
            return Err(Error::InvalidArgument(format!("duplicate image id `{}`", code.image_id)));
        }
        self.codes.push(code);
        Ok(())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn codes(&self) -> &[BinaryCode] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&BinaryCode> {
        self.codes.iter().find(|c| c.image_id == image_id)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "bits {}\ncount {}\nlabels {}\n",
            self.bits,
            self.codes.len(),
            self.labels.join(",")
        );
        for c in &self.codes {
            let _ = writeln!(s, "{},{},{}", c.image_id, c.label, c.bits.to_hex());
        }
        s
    }

    pub fn parse(text: &str) -> Result<CodeBook> {
        let err = |line: usize, message: String| Error::CodeFile { line, message };
        let mut bits = None;
        let mut count = None;
        let mut labels: Option<Vec<String>> = None;
        let mut book: Option<CodeBook> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            if book.is_none() {
                let (key, value) = content.split_once(' ').unwrap_or((content, ""));
                match key {
                    "bits" => {
                        bits = Some(value.trim().parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(|| {
                            err(line, format!("bad bit count `{value}`"))
                        })?);
                        continue;
                    }
                    "count" => {
                        count = Some(
                            value
                                .trim()
                                .parse::<usize>()
                                .map_err(|_| err(line, format!("bad count `{value}`")))?,
                        );
                        continue;
                    }
                    "labels" => {
                        let v = value.trim();
                        labels = Some(if v.is_empty() {
                            vec![]
                        } else {
                            v.split(',').map(|s| s.trim().to_string()).collect()
                        });
                        continue;
                    }
                    _ => {
                        let k = bits.ok_or_else(|| err(line, "record before `bits` header".into()))?;
                        book = Some(CodeBook::new(k, labels.take().unwrap_or_default()));
                    }
                }
            }
            let book = book.as_mut().expect("initialized above");
            let mut parts = content.split(',');
            let (Some(id), Some(label), Some(hex), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err(line, "expected `image_id,label,hex`".into()));
            };
            let label = label
                .trim()
                .parse::<usize>()
                .map_err(|_| err(line, format!("bad label `{label}`")))?;
            let code = PackedBits::from_hex(book.bits, hex.trim())
                .ok_or_else(|| err(line, format!("bad {}-bit hex code `{hex}`", book.bits)))?;
            book.push(BinaryCode::new(id.trim(), label, code))
                .map_err(|e| err(line, e.to_string()))?;
        }
        let book = match book {
            Some(b) => b,
            None => CodeBook::new(
                bits.ok_or_else(|| err(0, "missing `bits` header".into()))?,
                labels.unwrap_or_default(),
            ),
        };
        if let Some(n) = count {
            if n != book.len() {
                return Err(err(0, format!("header declares {n} records, found {}", book.len())));
            }
        }
        Ok(book)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CodeBook> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarize_examples() {
        let b = binarize(&[0.9, 0.1, 0.5001, 0.5]);
        assert_eq!(unpack_bits(&b), vec![true, false, true, false]);
        assert_eq!(binarize(&[0.5; 16]).count_ones(), 0);
        assert!(binarize_checked(&[0.2; 3], 4).is_err());
    }

    #[test]
    fn hamming_examples() {
        let a = BinaryCode::new("a", 0, pack_bits(&[true, false, true, true, false, false, true, false, true, true, false, true, false, false, true, true]));
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        let c = BinaryCode::new("c", 0, a.bits.complement());
        assert_eq!(hamming(&a, &c).unwrap(), 16);
        let short = BinaryCode::new("s", 0, PackedBits::zeros(8));
        assert!(matches!(hamming(&a, &short), Err(Error::BitsMismatch(16, 8))));
    }

    #[test]
    fn packing_layout() {
        let all = pack_bits(&[true; 64]);
        assert_eq!(all.words(), &[u64::MAX]);
        let ten = pack_bits(&[true; 10]);
        let bytes = ten.to_bytes();
        assert_eq!(bytes, vec![0xff, 0x03]);
        assert_eq!(bytes[1] & 0xfc, 0);
        assert_eq!(pack_bits(&[true, false, false]).words(), &[1]);
    }

    #[test]
    fn hex_layout() {
        let mut b = PackedBits::zeros(10);
        b.set(0, true);
        b.set(9, true);
        assert_eq!(b.to_hex(), "201");
        assert_eq!(PackedBits::from_hex(10, "201"), Some(b));
        // bit 10 would be padding
        assert_eq!(PackedBits::from_hex(10, "401"), None);
        assert_eq!(PackedBits::from_hex(10, "20"), None);
        assert_eq!(PackedBits::from_hex(10, "2G1"), None);
        let wide = pack_bits(&[true; 70]);
        assert_eq!(wide.to_hex(), format!("3f{}", "f".repeat(16)));
    }

    #[test]
    fn code_file_roundtrip_and_errors() {
        let labels = vec!["red".to_string(), "green".to_string()];
        let book = CodeBook::from_codes(
            12,
            labels,
            [
                BinaryCode::new("a", 0, PackedBits::from_hex(12, "abc").unwrap()),
                BinaryCode::new("b", 1, PackedBits::from_hex(12, "00f").unwrap()),
            ],
        )
        .unwrap();
        let text = book.to_text();
        assert_eq!(text, "bits 12\ncount 2\nlabels red,green\na,0,abc\nb,1,00f\n");
        assert_eq!(CodeBook::parse(&text).unwrap(), book);

        let bad = "bits 12\ncount 2\nlabels red,green\na,0,abc\nb,1,zzz\n";
        assert!(matches!(CodeBook::parse(bad), Err(Error::CodeFile { line: 5, .. })));
        let dup = "bits 12\nlabels\na,0,abc\na,1,001\n";
        assert!(matches!(CodeBook::parse(dup), Err(Error::CodeFile { line: 4, .. })));
        let count = "bits 12\ncount 3\na,0,abc\n";
        assert!(matches!(CodeBook::parse(count), Err(Error::CodeFile { .. })));
        let label = "bits 4\nlabels x\na,1,f\n";
        assert!(matches!(CodeBook::parse(label), Err(Error::CodeFile { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let packed = pack_bits(&bits);
            prop_assert_eq!(unpack_bits(&packed), bits.clone());
            prop_assert_eq!(PackedBits::from_hex(bits.len(), &packed.to_hex()), Some(packed));
        }

        #[test]
        fn binarize_is_monotone(acts in proptest::collection::vec(0.0f64..1.0, 1..64), j in 0usize..64, bump in 0.0f64..0.6) {
            let j = j % acts.len();
            let before = binarize(&acts);
            let mut raised = acts.clone();
            raised[j] = (raised[j] + bump).min(1.0);
            let after = binarize(&raised);
            prop_assert!(!before.get(j) || after.get(j));
        }
    }
}
