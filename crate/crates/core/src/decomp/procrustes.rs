use crate::error::{Error, Result};
use crate::linalg::{thin_svd, Mat};

/// Singular values at or below this fraction of the largest count as zero.
const DEGENERATE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProcrustesSolution {
    /// K × P with orthonormal rows.
    pub s: Mat,
    /// Singular values of `(X^T X̃) G`, descending.
    pub singular_values: Vec<f64>,
    /// Some singular value is (numerically) zero, so `s` is one of many
    /// minimizers.
    pub degenerate: bool,
}

/// Row-orthonormal `S` minimizing `||X − X̃ G S||_F²` for fixed `G`:
/// with `(X^T X̃) G = U Σ V^T`, `S = V U^T`.
pub fn procrustes_update(x: &Mat, x_tilde: &Mat, g: &Mat) -> Result<ProcrustesSolution> {
    if x.nrows() != x_tilde.nrows() || x_tilde.ncols() != g.nrows() {
        return Err(Error::Shape(format!(
            "X {}x{}, X̃ {}x{}, G {}x{}",
            x.nrows(),
            x.ncols(),
            x_tilde.nrows(),
            x_tilde.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    procrustes_from_sources(x, &(x_tilde * g))
}

/// Same as [`procrustes_update`] given the sources `X̃ G` (N × K).
pub fn procrustes_from_sources(x: &Mat, sources: &Mat) -> Result<ProcrustesSolution> {
    let (p, k) = (x.ncols(), sources.ncols());
    if x.nrows() != sources.nrows() {
        return Err(Error::Shape(format!(
            "X has {} rows but sources have {}",
            x.nrows(),
            sources.nrows()
        )));
    }
    if k == 0 || k > p {
        return Err(Error::Shape(format!("need 1 <= K <= P, got K={k}, P={p}")));
    }
    let m = x.transpose() * sources;
    let svd = thin_svd(&m);
    let s = svd.v_t.transpose() * svd.u.transpose();
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let smallest = singular_values.last().copied().unwrap_or(0.0);
    let degenerate = largest == 0.0 || smallest <= DEGENERATE_RTOL * largest;
    Ok(ProcrustesSolution {
        s,
        singular_values,
        degenerate,
    })
}
