use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Loss value together with its gradient with respect to the prediction.
#[derive(Debug, Clone)]
pub struct Loss<T> {
    pub value: T,
    pub grad: Tensor<T>,
}

/// Mean of squared differences over every element.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Loss<T>> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse operands differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = T::from_usize(pred.len().max(1)).unwrap();
    let two = T::from_f64_lossy(2.0);
    let mut sum = T::zero();
    let grad: Vec<T> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum = sum + d * d;
            two * d / n
        })
        .collect();
    Ok(Loss {
        value: sum / n,
        grad: Tensor::new(pred.shape().to_vec(), grad)?,
    })
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<T> {
    let c = logits.cols();
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(c.max(1)) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}

/// Softmax cross-entropy averaged over the batch. The gradient with respect to
/// the logits is `(softmax − one_hot) / batch`.
pub fn cross_entropy_loss<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<Loss<T>> {
    let (rows, classes) = (logits.rows(), logits.cols());
    if logits.shape().len() != 2 || labels.len() != rows {
        return Err(Error::shape(format!(
            "{} labels for logits of shape {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    let mut probs = softmax_rows(logits);
    let n = T::from_usize(rows.max(1)).unwrap();
    let mut total = T::zero();
    for (r, &label) in labels.iter().enumerate() {
        let row = &mut probs[r * classes..(r + 1) * classes];
        // log p computed from the logits directly for accuracy near p = 1
        let lr = logits.row(r);
        let m = lr.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + lr.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total = total + lse - lr[label];
        row[label] = row[label] - T::one();
        row.iter_mut().for_each(|v| *v = *v / n);
    }
    Ok(Loss {
        value: total / n,
        grad: Tensor::matrix(rows, classes, probs)?,
    })
}
