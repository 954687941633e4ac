//! Binary checkpoints, little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "MBHASHCK"
//! version      u32      1
//! step         u64      completed training steps
//! config_len   u64
//! config       config_len bytes of canonical config text (UTF-8)
//! tensor_count u64
//! tensors      tensor_count serialized tensors, layer order; per layer:
//!              conv: weights; batchnorm: gamma, beta, running mean,
//!              running variance; dense: weight, bias
//! ```
//!
//! Values are stored as `f32`, so a network survives a save/load round trip
//! bit-exactly once its tensors have been rounded to `f32`.

use std::io::{Read, Write};
use std::path::Path;

use super::config::NetworkConfig;
use super::network::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MBHASHCK";
pub const VERSION: u32 = 1;

impl Network {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.step().to_le_bytes())?;
        let text = self.config().to_text();
        w.write_all(&(text.len() as u64).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        let tensors: Vec<&Tensor> = self.layers().iter().flat_map(|l| l.state()).collect();
        w.write_all(&(tensors.len() as u64).to_le_bytes())?;
        for t in tensors {
            t.write_to(w)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Network> {
        let (config, step, tensors) = read_parts(bytes)?;
        let mut net = Network::build(&config, 0)?;
        fill(&mut net, tensors, |layer, msg| {
            Error::CorruptCheckpoint(format!("layer {layer}: {msg}"))
        })?;
        net.set_step(step);
        Ok(net)
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }

    /// Loads parameters into a network built from `expected`. Fails with the
    /// first layer whose stored tensors do not fit.
    pub fn load_checkpoint_into(path: impl AsRef<Path>, expected: &NetworkConfig) -> Result<Network> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (_, step, tensors) = read_parts(&bytes)?;
        let mut net = Network::build(expected, 0)?;
        fill(&mut net, tensors, |layer, message| Error::CheckpointMismatch { layer, message })?;
        net.set_step(step);
        Ok(net)
    }
}

fn fill(net: &mut Network, tensors: Vec<Tensor>, err: impl Fn(String, String) -> Error) -> Result<()> {
    let mut it = tensors.into_iter();
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        let name = format!("#{i} ({})", layer.name());
        for slot in layer.state_mut() {
            let t = it
                .next()
                .ok_or_else(|| err(name.clone(), "checkpoint has fewer tensors than the network".into()))?;
            if t.shape() != slot.shape() {
                return Err(err(
                    name,
                    format!("stored shape {:?}, expected {:?}", t.shape(), slot.shape()),
                ));
            }
            *slot = t;
        }
    }
    if it.next().is_some() {
        return Err(err(
            "(end)".into(),
            "checkpoint has more tensors than the network".into(),
        ));
    }
    Ok(())
}

fn read_parts(bytes: &[u8]) -> Result<(NetworkConfig, u64, Vec<Tensor>)> {
    let mut r = bytes;
    let truncated = |what: &str| Error::CorruptCheckpoint(format!("truncated {what}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if &magic != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let mut word4 = [0u8; 4];
    r.read_exact(&mut word4).map_err(|_| truncated("version"))?;
    let version = u32::from_le_bytes(word4);
    if version != VERSION {
        return Err(Error::CorruptCheckpoint(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|_| truncated("step"))?;
    let step = u64::from_le_bytes(word);
    r.read_exact(&mut word).map_err(|_| truncated("config length"))?;
    let len = u64::from_le_bytes(word) as usize;
    if len > r.len() {
        return Err(truncated("config"));
    }
    let (text, rest) = r.split_at(len);
    r = rest;
    let text = std::str::from_utf8(text).map_err(|_| Error::CorruptCheckpoint("config is not UTF-8".into()))?;
    let config = NetworkConfig::parse(text)
        .map_err(|e| Error::CorruptCheckpoint(format!("embedded config: {e}")))?;
    r.read_exact(&mut word).map_err(|_| truncated("tensor count"))?;
    let count = u64::from_le_bytes(word) as usize;
    let mut tensors = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        tensors.push(Tensor::read_from(&mut r)?);
    }
    if !r.is_empty() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", r.len())));
    }
    Ok((config, step, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> NetworkConfig {
        NetworkConfig::builtin("toy").unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact_after_rounding() {
        let mut net = Network::build(&toy(), 5).unwrap();
        net.round_to_f32();
        net.set_step(17);
        let loaded = Network::from_checkpoint_bytes(&net.to_checkpoint_bytes()).unwrap();
        assert_eq!(loaded, net);
        assert_eq!(loaded.step(), 17);
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let bytes = Network::build(&toy(), 5).unwrap().to_checkpoint_bytes();
        for cut in [0, 4, 12, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                Network::from_checkpoint_bytes(&bytes[..cut]),
                Err(Error::CorruptCheckpoint(_))
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Network::from_checkpoint_bytes(&extra).is_err());
        let mut bad_version = bytes;
        bad_version[8] = 9;
        match Network::from_checkpoint_bytes(&bad_version) {
            Err(Error::CorruptCheckpoint(m)) => assert!(m.contains("version")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_config_names_layer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ckpt");
        Network::build(&toy(), 5).unwrap().save_checkpoint(&path).unwrap();
        let other = toy().with_bits(32);
        match Network::load_checkpoint_into(&path, &other) {
            Err(Error::CheckpointMismatch { layer, .. }) => assert!(layer.contains("dense 128x32"), "{layer}"),
            other => panic!("{other:?}"),
        }
        let same = Network::load_checkpoint_into(&path, &toy()).unwrap();
        assert_eq!(same.layers().len(), Network::build(&toy(), 0).unwrap().layers().len());
    }
}
