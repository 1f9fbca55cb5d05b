use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Linear,
    Batchnorm,
    Relu,
    Dropout,
    ResidualBegin,
    ResidualEnd,
}

impl LayerKind {
    fn tag(self) -> &'static str {
        match self {
            LayerKind::Linear => "linear",
            LayerKind::Batchnorm => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::Dropout => "dropout",
            LayerKind::ResidualBegin => "res_begin",
            LayerKind::ResidualEnd => "res_end",
        }
    }
}

/// One entry of a sequential network. Non-linear layers keep their width
/// (`in_dim == out_dim`). A `ResidualBegin` saves its input and the matching
/// `ResidualEnd` adds it back onto the activation flowing through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub dropout_p: f64,
}

impl LayerSpec {
    fn same(kind: LayerKind, dim: usize) -> Self {
        Self {
            kind,
            in_dim: dim,
            out_dim: dim,
            dropout_p: 0.0,
        }
    }

    pub fn linear(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: LayerKind::Linear,
            in_dim,
            out_dim,
            dropout_p: 0.0,
        }
    }

    pub fn batchnorm(dim: usize) -> Self {
        Self::same(LayerKind::Batchnorm, dim)
    }

    pub fn relu(dim: usize) -> Self {
        Self::same(LayerKind::Relu, dim)
    }

    pub fn dropout(dim: usize, p: f64) -> Self {
        Self {
            dropout_p: p,
            ..Self::same(LayerKind::Dropout, dim)
        }
    }

    pub fn residual_begin(dim: usize) -> Self {
        Self::same(LayerKind::ResidualBegin, dim)
    }

    pub fn residual_end(dim: usize) -> Self {
        Self::same(LayerKind::ResidualEnd, dim)
    }

    /// Trainable scalars held by this layer (running statistics excluded).
    pub fn parameter_count(&self) -> usize {
        match self.kind {
            LayerKind::Linear => self.in_dim * self.out_dim + self.out_dim,
            LayerKind::Batchnorm => 2 * self.out_dim,
            _ => 0,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::Linear => write!(f, "linear:{}:{}", self.in_dim, self.out_dim),
            LayerKind::Dropout => write!(f, "dropout:{}:{}", self.out_dim, self.dropout_p),
            k => write!(f, "{}:{}", k.tag(), self.out_dim),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Checkpoint(format!("malformed layer spec {s:?}"));
        let dim = |i: usize| -> Result<usize> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let spec = match (parts[0], parts.len()) {
            ("linear", 3) => LayerSpec::linear(dim(1)?, dim(2)?),
            ("dropout", 3) => LayerSpec::dropout(dim(1)?, parts[2].parse().map_err(|_| bad())?),
            ("batchnorm", 2) => LayerSpec::batchnorm(dim(1)?),
            ("relu", 2) => LayerSpec::relu(dim(1)?),
            ("res_begin", 2) => LayerSpec::residual_begin(dim(1)?),
            ("res_end", 2) => LayerSpec::residual_end(dim(1)?),
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// Checks that widths chain, dropout probabilities are in `[0, 1)` and
/// residual markers pair up around equal-width activations.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("network has no layers".into()));
    }
    let mut open: Vec<(usize, usize)> = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::Config(format!("layer {i} ({s}) has a zero dimension")));
        }
        if s.kind != LayerKind::Linear && s.in_dim != s.out_dim {
            return Err(Error::Config(format!("layer {i} ({s}) must preserve width")));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(Error::Config(format!(
                "layer {i} expects width {} but receives {}",
                s.in_dim,
                specs[i - 1].out_dim
            )));
        }
        match s.kind {
            LayerKind::Dropout if !(0.0..1.0).contains(&s.dropout_p) => {
                return Err(Error::Config(format!("dropout probability {} not in [0,1)", s.dropout_p)));
            }
            LayerKind::ResidualBegin => open.push((i, s.out_dim)),
            LayerKind::ResidualEnd => match open.pop() {
                Some((_, w)) if w == s.out_dim => {}
                Some((b, w)) => {
                    return Err(Error::Config(format!(
                        "residual span {b}..{i} joins widths {w} and {}",
                        s.out_dim
                    )))
                }
                None => return Err(Error::Config(format!("residual end at layer {i} has no begin"))),
            },
            _ => {}
        }
    }
    if let Some((b, _)) = open.pop() {
        return Err(Error::Config(format!("residual begin at layer {b} is never closed")));
    }
    Ok(())
}

pub fn parameter_count(specs: &[LayerSpec]) -> usize {
    specs.iter().map(LayerSpec::parameter_count).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form_roundtrips() {
        for s in [
            LayerSpec::linear(34, 1024),
            LayerSpec::batchnorm(8),
            LayerSpec::relu(8),
            LayerSpec::dropout(8, 0.5),
            LayerSpec::residual_begin(8),
            LayerSpec::residual_end(8),
        ] {
            assert_eq!(s.to_string().parse::<LayerSpec>().unwrap(), s);
        }
        assert!("conv:3:3".parse::<LayerSpec>().is_err());
    }

    #[test]
    fn validation_catches_bad_graphs() {
        assert!(validate_specs(&[LayerSpec::linear(2, 3), LayerSpec::relu(4)]).is_err());
        assert!(validate_specs(&[LayerSpec::dropout(2, 1.0)]).is_err());
        assert!(validate_specs(&[LayerSpec::residual_begin(2)]).is_err());
        assert!(validate_specs(&[LayerSpec::residual_end(2)]).is_err());
        assert!(validate_specs(&[
            LayerSpec::residual_begin(2),
            LayerSpec::linear(2, 3),
            LayerSpec::residual_end(3)
        ])
        .is_err());
        assert!(validate_specs(&[
            LayerSpec::residual_begin(2),
            LayerSpec::linear(2, 2),
            LayerSpec::residual_end(2)
        ])
        .is_ok());
        assert!(validate_specs(&[LayerSpec::linear(0, 2)]).is_err());
    }
}
