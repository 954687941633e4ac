//! Hamming-ranked retrieval and mean average precision.
//!
//! Every query is ranked against the codebook with its own image id
//! excluded (leave-one-out). Equal distances keep codebook insertion order.
//! Average precision at `k` is
//!
//! ```text
//! AP@k = sum_{i <= k} rel(i) * precision@i / norm
//! ```
//!
//! where `norm` defaults to `min(R, k)` and `R` is the number of items in the
//! codebook sharing the query's label (excluding the query). Queries with
//! `R = 0` are left out of the mean and counted separately.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::codes::{binarize_checked, hamming_bits, BinaryCode, CodeBook};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::tensor::Tensor;

pub const DEFAULT_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub image_id: String,
    pub label: usize,
    pub distance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalResult {
    pub query_id: String,
    pub neighbors: Vec<Neighbor>,
}

impl RetrievalResult {
    pub fn relevance(&self, label: usize) -> Vec<bool> {
        self.neighbors.iter().map(|n| n.label == label).collect()
    }
}

/// Top-`k` codes by Hamming distance to `q`, excluding `q`'s own id.
pub fn query(book: &CodeBook, q: &BinaryCode, k: usize) -> Result<RetrievalResult> {
    if q.bits.len() != book.bits() {
        return Err(Error::BitsMismatch(q.bits.len(), book.bits()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if book.is_empty() {
        return Err(Error::EmptyCodeBook);
    }
    let mut ranked: Vec<(u32, usize)> = book
        .codes()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.image_id != q.image_id)
        .map(|(i, c)| Ok((hamming_bits(&q.bits, &c.bits)?, i)))
        .collect::<Result<_>>()?;
    // stable: ties stay in insertion order
    ranked.sort_by_key(|&(d, _)| d);
    ranked.truncate(k);
    Ok(RetrievalResult {
        query_id: q.image_id.clone(),
        neighbors: ranked
            .into_iter()
            .map(|(distance, i)| {
                let c = &book.codes()[i];
                Neighbor {
                    image_id: c.image_id.clone(),
                    label: c.label,
                    distance,
                }
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApNormalization {
    /// Divide by `min(R, k)`: a perfect ranking scores 1.
    #[default]
    MinRk,
    /// Divide by `k`.
    K,
    /// Divide by `R`.
    R,
}

impl ApNormalization {
    pub fn name(self) -> &'static str {
        match self {
            ApNormalization::MinRk => "min-r-k",
            ApNormalization::K => "k",
            ApNormalization::R => "r",
        }
    }
}

impl FromStr for ApNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-r-k" => Ok(ApNormalization::MinRk),
            "k" => Ok(ApNormalization::K),
            "r" => Ok(ApNormalization::R),
            other => Err(Error::InvalidArgument(format!(
                "unknown AP normalization `{other}` (expected min-r-k, k or r)"
            ))),
        }
    }
}

/// Average precision of a ranked relevance list truncated at `k`.
///
/// `relevant_total` is `R`; returns `None` when it is zero.
pub fn average_precision(relevance: &[bool], relevant_total: usize, k: usize, norm: ApNormalization) -> Option<f64> {
    if relevant_total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().take(k).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    let denom = match norm {
        ApNormalization::MinRk => relevant_total.min(k),
        ApNormalization::K => k,
        ApNormalization::R => relevant_total,
    };
    Some(sum / denom as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryScore {
    pub image_id: String,
    pub label: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_query: Vec<QueryScore>,
    pub map: f64,
    pub k: usize,
    pub bits: usize,
    pub num_queries: usize,
    /// Queries with no relevant item in the codebook.
    pub num_excluded: usize,
    pub normalization: ApNormalization,
}

impl EvalReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ap = sum(rel_i * precision@i) / {}", match self.normalization {
            ApNormalization::MinRk => "min(R, k)",
            ApNormalization::K => "k",
            ApNormalization::R => "R",
        });
        let _ = writeln!(s, "map={:?}", self.map);
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "K={}", self.bits);
        let _ = writeln!(s, "num_queries={}", self.num_queries);
        let _ = writeln!(s, "num_excluded={}", self.num_excluded);
        let _ = writeln!(s, "ap_normalization={}", self.normalization.name());
        s
    }

    pub fn per_query_csv(&self) -> String {
        let mut s = String::from("image_id,label,ap\n");
        for q in &self.per_query {
            let _ = writeln!(s, "{},{},{:?}", q.image_id, q.label, q.ap);
        }
        s
    }
}

/// MAP@k of `queries` against `book`.
pub fn evaluate_map(book: &CodeBook, queries: &[BinaryCode], k: usize, norm: ApNormalization) -> Result<EvalReport> {
    if book.is_empty() {
        return Err(Error::EmptyCodeBook);
    }
    let scores: Vec<Option<QueryScore>> = queries
        .par_iter()
        .map(|q| {
            let result = query(book, q, k)?;
            let relevant_total = book
                .codes()
                .iter()
                .filter(|c| c.label == q.label && c.image_id != q.image_id)
                .count();
            Ok(
                average_precision(&result.relevance(q.label), relevant_total, k, norm).map(|ap| QueryScore {
                    image_id: q.image_id.clone(),
                    label: q.label,
                    ap,
                }),
            )
        })
        .collect::<Result<_>>()?;
    let num_excluded = scores.iter().filter(|s| s.is_none()).count();
    let per_query: Vec<QueryScore> = scores.into_iter().flatten().collect();
    let map = if per_query.is_empty() {
        0.0
    } else {
        per_query.iter().map(|q| q.ap).sum::<f64>() / per_query.len() as f64
    };
    Ok(EvalReport {
        num_queries: per_query.len(),
        per_query,
        map,
        k,
        bits: book.bits(),
        num_excluded,
        normalization: norm,
    })
}

/// Every code in the book queries the rest of the book.
pub fn evaluate_leave_one_out(book: &CodeBook, k: usize, norm: ApNormalization) -> Result<EvalReport> {
    evaluate_map(book, book.codes(), k, norm)
}

/// Batch size used for inference while encoding.
const ENCODE_BATCH: usize = 32;

/// Runs inference over the dataset and binarizes the latent activations.
/// Codebook order matches dataset order.
pub fn encode_dataset(net: &Network, dataset: &Dataset) -> Result<CodeBook> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bits = net.bits();
    let chunks: Vec<Vec<BinaryCode>> = dataset
        .records()
        .par_chunks(ENCODE_BATCH)
        .map(|chunk| {
            let images: Vec<&Tensor> = chunk.iter().map(|r| &r.image).collect();
            let latent = net.latent(&crate::data::stack(&images)?)?;
            chunk
                .iter()
                .zip(latent.data().chunks_exact(bits))
                .map(|(r, act)| Ok(BinaryCode::new(r.id.clone(), r.label, binarize_checked(act, bits)?)))
                .collect()
        })
        .collect::<Result<_>>()?;
    CodeBook::from_codes(bits, dataset.labels().to_vec(), chunks.into_iter().flatten())
}
