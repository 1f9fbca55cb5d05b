//! Versioned checkpoint container.
//!
//! ```text
//! SSHFD-CKPT/1
//! key=value              (metadata: model kind, configs, layer specs, ...)
//! block=name:count       (one line per parameter block, payload order)
//! payload_sha256=<hex>
//! end
//! <payload: every block as little-endian f32, concatenated>
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::mlp::Mlp;
use crate::nn::tensor::Scalar;

pub const FORMAT_TAG: &str = "SSHFD-CKPT/1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    meta: Vec<(String, String)>,
    blocks: Vec<(String, Vec<f32>)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        assert!(!key.contains('=') && !key.contains('\n') && !value.contains('\n'));
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| bad(format!("missing header key {key:?}")))
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn push_block(&mut self, name: impl Into<String>, values: Vec<f32>) {
        self.blocks.push((name.into(), values));
    }

    pub fn block(&self, name: &str) -> Option<&[f32]> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn blocks(&self) -> &[(String, Vec<f32>)] {
        &self.blocks
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        for (_, v) in &self.blocks {
            for x in v {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        let mut head = String::new();
        head.push_str(FORMAT_TAG);
        head.push('\n');
        for (k, v) in &self.meta {
            head.push_str(&format!("{k}={v}\n"));
        }
        for (n, v) in &self.blocks {
            head.push_str(&format!("block={n}:{}\n", v.len()));
        }
        head.push_str(&format!("payload_sha256={}\n", hex(&Sha256::digest(&payload))));
        head.push_str("end\n");
        let mut out = head.into_bytes();
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
        };
        let tag = next_line()?;
        if tag != FORMAT_TAG {
            return Err(bad(format!("unknown format tag {tag:?}")));
        }
        let mut ckpt = Checkpoint::new();
        let mut layout: Vec<(String, usize)> = Vec::new();
        let mut digest = None;
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            match k {
                "block" => {
                    let (n, c) = v.rsplit_once(':').ok_or_else(|| bad(format!("malformed block {v:?}")))?;
                    let c = c.parse().map_err(|_| bad(format!("malformed block size {c:?}")))?;
                    layout.push((n.to_string(), c));
                }
                "payload_sha256" => digest = Some(v.to_string()),
                _ => ckpt.meta.push((k.to_string(), v.to_string())),
            }
        }
        let payload = &bytes[pos..];
        let expected: usize = layout.iter().map(|(_, c)| c * 4).sum();
        if payload.len() != expected {
            return Err(bad(format!("payload has {} bytes, header declares {expected}", payload.len())));
        }
        match digest {
            Some(d) if d == hex(&Sha256::digest(payload)) => {}
            Some(_) => return Err(bad("payload checksum mismatch")),
            None => return Err(bad("missing payload checksum")),
        }
        let mut off = 0;
        for (name, count) in layout {
            let vals = payload[off..off + 4 * count]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            off += 4 * count;
            ckpt.blocks.push((name, vals));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Records the layer list and every state array of `net` under `prefix`.
    pub fn put_mlp<T: Scalar>(&mut self, prefix: &str, net: &Mlp<T>) {
        let specs: Vec<String> = net.specs().iter().map(|s| s.to_string()).collect();
        self.set(&format!("layers.{prefix}"), specs.join(","));
        for (name, vals) in net.state() {
            self.push_block(
                format!("{prefix}.{name}"),
                vals.iter().map(|v| v.as_f64() as f32).collect(),
            );
        }
    }

    /// Fills `net` from the blocks stored under `prefix`, after checking that
    /// the stored layer list matches the network's.
    pub fn fill_mlp<T: Scalar>(&self, prefix: &str, net: &mut Mlp<T>) -> Result<()> {
        let stored: Vec<LayerSpec> = self
            .require(&format!("layers.{prefix}"))?
            .split(',')
            .map(str::parse)
            .collect::<Result<_>>()?;
        if stored.as_slice() != net.specs() {
            return Err(bad(format!("layer list for {prefix:?} does not match the configured network")));
        }
        for (name, dst) in net.state_mut() {
            let key = format!("{prefix}.{name}");
            let src = self.block(&key).ok_or_else(|| bad(format!("missing block {key:?}")))?;
            if src.len() != dst.len() {
                return Err(bad(format!("block {key:?} has {} values, expected {}", src.len(), dst.len())));
            }
            for (d, s) in dst.iter_mut().zip(src) {
                *d = T::from_f64_lossy(*s as f64);
            }
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;
    use crate::rng::seeded;

    fn net(seed: u64) -> Mlp<f32> {
        Mlp::new(
            vec![
                LayerSpec::linear(3, 4),
                LayerSpec::batchnorm(4),
                LayerSpec::relu(4),
                LayerSpec::linear(4, 2),
            ],
            &mut seeded(seed),
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_reproduces_outputs_bitwise() {
        let a = net(1);
        let mut ck = Checkpoint::new();
        ck.set("model", "test");
        ck.put_mlp("body", &a);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let mut b = net(2);
        back.fill_mlp("body", &mut b).unwrap();
        let x = Tensor::matrix(2, 3, vec![0.1, -0.7, 2.0, 1.5, 0.0, -3.0]).unwrap();
        let ya = a.infer(&x).unwrap();
        let yb = b.infer(&x).unwrap();
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ya), bits(&yb));
    }

    #[test]
    fn corruption_is_detected() {
        let mut ck = Checkpoint::new();
        ck.put_mlp("body", &net(1));
        let mut bytes = ck.to_bytes();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"NOT-A-CKPT\nend\n").is_err());
    }

    #[test]
    fn layer_mismatch_is_rejected() {
        let mut ck = Checkpoint::new();
        ck.put_mlp("body", &net(1));
        let mut other = Mlp::<f32>::new(vec![LayerSpec::linear(3, 2)], &mut seeded(0)).unwrap();
        assert!(ck.fill_mlp("body", &mut other).is_err());
    }
}
