use crate::linalg::Mat;

/// Offset used when recovering softplus pre-images from a dense generator.
pub const PREIMAGE_EPS: f64 = 1e-6;

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of softplus on `y > 0`: `log(e^y − 1)`.
pub fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    y + (-(-y).exp_m1()).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `G = softplus(Gp) − softplus(Gn)` entrywise.
pub fn softplus_map(pos: &Mat, neg: &Mat) -> Mat {
    assert_eq!(pos.shape(), neg.shape(), "pre-image shapes differ");
    pos.zip_map(neg, |a, b| softplus(a) - softplus(b))
}

/// Column-wise softmax with max-shift.
pub fn softmax_cols(logits: &Mat) -> Mat {
    let mut out = logits.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let total = col.sum();
        col /= total;
    }
    out
}

/// Pull a gradient w.r.t. the softmax output `y` back to the logits:
/// `dz = y ⊙ (dy − ⟨y, dy⟩)` per column.
pub fn softmax_cols_backward(y: &Mat, dy: &Mat) -> Mat {
    let mut dz = Mat::zeros(y.nrows(), y.ncols());
    for j in 0..y.ncols() {
        let yc = y.column(j);
        let dyc = dy.column(j);
        let inner = yc.dot(&dyc);
        for i in 0..y.nrows() {
            dz[(i, j)] = yc[i] * (dyc[i] - inner);
        }
    }
    dz
}
