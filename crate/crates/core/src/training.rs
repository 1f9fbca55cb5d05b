//! Pieces shared by the two training loops: minibatch plans, per-epoch
//! history rows and their CSV form.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::derived;

/// Index batches for one epoch: a seeded shuffle of `0..n` cut into chunks.
/// A trailing chunk of a single sample is merged into the previous one,
/// because batchnorm statistics over one row are degenerate.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derived(seed, epoch as u64));
    let mut out: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// One-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Validation metric after the epoch, `NaN` when no validation split.
    pub val_metric: f64,
}

pub fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("training loss became {loss} in epoch {}", epoch + 1)))
    }
}

/// Writes `epoch,lr,train_loss,<metric_name>` rows.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], metric_name: &str, mut w: W) -> Result<()> {
    writeln!(w, "epoch,lr,train_loss,{metric_name}")?;
    for h in history {
        writeln!(w, "{},{},{},{}", h.epoch, h.lr, h.train_loss, h.val_metric)?;
    }
    Ok(())
}

pub fn read_history_csv<R: BufRead>(r: R) -> Result<Vec<EpochRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::data(format!("history line {}: {line:?}", n + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        out.push(EpochRecord {
            epoch: f[0].parse().map_err(|_| bad())?,
            lr: f[1].parse().map_err(|_| bad())?,
            train_loss: f[2].parse().map_err(|_| bad())?,
            val_metric: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}
