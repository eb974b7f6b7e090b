//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;

/// Thin SVD with singular values sorted in descending order.
pub struct ThinSvd {
    pub u: Mat,
    pub singular_values: DVector<f64>,
    pub v_t: Mat,
}

pub fn thin_svd(m: &Mat) -> ThinSvd {
    let svd = m.clone().svd(true, true);
    ThinSvd {
        u: svd.u.expect("u requested"),
        singular_values: svd.singular_values,
        v_t: svd.v_t.expect("v_t requested"),
    }
}

pub fn frob_sq(m: &Mat) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Columns of `m` where `mask` is true.
pub fn select_columns(m: &Mat, mask: &[bool]) -> Mat {
    debug_assert_eq!(m.ncols(), mask.len());
    let cols: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(j, &keep)| keep.then_some(j))
        .collect();
    m.select_columns(cols.iter())
}

/// Row-wise concatenation.
pub fn vstack(parts: &[&Mat]) -> Mat {
    let ncols = parts.first().map_or(0, |m| m.ncols());
    let nrows = parts.iter().map(|m| m.nrows()).sum();
    let mut out = Mat::zeros(nrows, ncols);
    let mut offset = 0;
    for m in parts {
        out.view_mut((offset, 0), (m.nrows(), ncols)).copy_from(*m);
        offset += m.nrows();
    }
    out
}

/// Largest absolute deviation of `m m^T` from the identity.
pub fn row_orthonormality_error(m: &Mat) -> f64 {
    let gram = m * m.transpose();
    let k = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Largest absolute deviation of `m^T m` from the identity.
pub fn col_orthonormality_error(m: &Mat) -> f64 {
    row_orthonormality_error(&m.transpose())
}

/// Flip each column so its largest-magnitude entry is positive.
pub fn fix_column_signs(m: &mut Mat) {
    for mut col in m.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}
