//! Deep hashing on a depthwise-separable convolutional network.
//!
//! A MobileNet-style backbone feeds a global average pool into a sigmoid
//! latent layer of `K` units and a softmax classifier. Training minimizes
//! classification cross-entropy; afterwards the latent activations are
//! thresholded at 0.5 to give `K`-bit codes, which are ranked by Hamming
//! distance for retrieval and scored by MAP@k.
//!
//! Everything is implemented from scratch in `f64` on the CPU:
//!
//! - [`tensor`]: dense `[B, C, H, W]` arrays.
//! - [`layers`]: standard, depthwise and pointwise convolution, batchnorm,
//!   ReLU, global average pooling, dense, sigmoid and softmax cross-entropy,
//!   each with forward and backward passes.
//! - [`net`]: a text config format, shape planning, cost accounting,
//!   network assembly and binary checkpoints.
//! - [`codes`]: binarization, packed codes, Hamming distance, code files.
//! - [`retrieval`]: Hamming ranking and MAP.
//! - [`data`]: manifests, PPM/PGM decoding, resizing, a synthetic dataset.
//! - [`train`]: mini-batch SGD with a step learning-rate schedule.
//! - [`gradcheck`]: finite-difference checks of the backward passes.
//! - [`cli`]: the `mobilehash` command.
//!
//! The `examples/` directory has one runnable program per capability:
//! `cost_report`, `gradient_check`, `synthetic_dataset`, `train_toy`,
//! `hash_retrieval` and `checkpoint`.
//!
//! ```
//! use mobilehash::net::{cost_report, NetworkConfig};
//!
//! let cfg = NetworkConfig::builtin("mobilenet-standard").unwrap();
//! let report = cost_report(&cfg).unwrap();
//! assert_eq!(report.reference_params, 4_231_976);
//! ```

pub mod cli;
pub mod codes;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod net;
pub mod retrieval;
pub mod tensor;
pub mod train;

pub use codes::{binarize, hamming, BinaryCode, CodeBook, PackedBits};
pub use data::{generate_synthetic, load_manifest, Dataset, ImageRecord};
pub use error::{Error, Result};
pub use net::{cost_report, Network, NetworkConfig};
pub use retrieval::{evaluate_leave_one_out, evaluate_map, query, ApNormalization, EvalReport};
pub use tensor::Tensor;
pub use train::{lr_at, sgd_step, train, TrainConfig, TrainLog};
