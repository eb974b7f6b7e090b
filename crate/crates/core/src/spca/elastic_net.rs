//! Cyclic coordinate descent for
//! `||r − D g||² + λ2 ||g||² + λ1 ||g||_1`.

use nalgebra::DVector;

use crate::decomp::RegPair;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Stop when no coordinate moved more than this in a sweep.
pub const CD_TOL: f64 = 1e-10;
pub const CD_MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ElasticNetSolution {
    pub coef: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// An all-zero design column met an unpenalized coordinate; that
    /// coefficient was pinned to zero.
    pub degenerate: bool,
}

fn soft_threshold(c: f64, t: f64) -> f64 {
    if c > t {
        c - t
    } else if c < -t {
        c + t
    } else {
        0.0
    }
}

/// Exact minimizer on the face where the `active` coordinates keep their
/// current signs and the rest stay zero: solves
/// `(Q_AA + λ2 I) g_A = c_A − (λ1/2) sign(g_A)`. `None` when that system is
/// not positive definite or the solution leaves the face.
fn face_minimizer(
    gram: &Mat,
    xty: &DVector<f64>,
    reg: RegPair,
    g: &DVector<f64>,
    active: &[usize],
) -> Option<DVector<f64>> {
    let n = active.len();
    let m = Mat::from_fn(n, n, |a, b| {
        gram[(active[a], active[b])] + if a == b { reg.lambda2 } else { 0.0 }
    });
    let rhs = DVector::from_fn(n, |a, _| xty[active[a]] - 0.5 * reg.lambda1 * g[active[a]].signum());
    let solved = m.cholesky()?.solve(&rhs);
    let same_face = active
        .iter()
        .zip(solved.iter())
        .all(|(&j, &v)| v.is_finite() && v != 0.0 && v.signum() == g[j].signum());
    same_face.then_some(solved)
}

pub fn elastic_net_cd(
    design: &Mat,
    response: &DVector<f64>,
    reg: RegPair,
    warm_start: &DVector<f64>,
) -> Result<ElasticNetSolution> {
    if design.nrows() != response.len() || design.ncols() != warm_start.len() {
        return Err(Error::Shape(format!(
            "design {}x{}, response {}, warm start {}",
            design.nrows(),
            design.ncols(),
            response.len(),
            warm_start.len()
        )));
    }
    reg.validate()?;
    let gram = design.transpose() * design;
    let xty = design.transpose() * response;
    Ok(elastic_net_cd_gram(&gram, &xty, reg, warm_start))
}

/// Covariance-form coordinate descent given `Q = DᵀD` and `c = Dᵀr`.
/// The partial-residual inner product of coordinate j is
/// `c_j − (Q g)_j + Q_jj g_j`.
pub fn elastic_net_cd_gram(
    gram: &Mat,
    xty: &DVector<f64>,
    reg: RegPair,
    warm_start: &DVector<f64>,
) -> ElasticNetSolution {
    let p = xty.len();
    let half_l1 = 0.5 * reg.lambda1;
    let mut g = warm_start.clone();
    let mut degenerate = false;
    for j in 0..p {
        if gram[(j, j)] + reg.lambda2 <= 0.0 {
            if reg.lambda1 == 0.0 {
                degenerate = true;
            }
            g[j] = 0.0;
        }
    }
    let mut qg = gram * &g;
    let mut sweeps = 0;
    let mut converged = false;
    let update = |j: usize, g: &mut DVector<f64>, qg: &mut DVector<f64>| -> f64 {
        let d = gram[(j, j)];
        let denom = d + reg.lambda2;
        if denom <= 0.0 {
            return 0.0;
        }
        let old = g[j];
        let new = soft_threshold(xty[j] - qg[j] + d * old, half_l1) / denom;
        let delta = new - old;
        if delta != 0.0 {
            g[j] = new;
            qg.axpy(delta, &gram.column(j), 1.0);
        }
        delta.abs()
    };
    // full sweeps alternate with sweeps over the nonzero coordinates only,
    // until a full sweep moves nothing
    'outer: while sweeps < CD_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            max_change = max_change.max(update(j, &mut g, &mut qg));
        }
        if max_change < CD_TOL {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| g[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        if let Some(solved) = face_minimizer(gram, xty, reg, &g, &active) {
            for (&j, &v) in active.iter().zip(solved.iter()) {
                g[j] = v;
            }
            qg = gram * &g;
            continue;
        }
        if active.len() == p {
            continue;
        }
        loop {
            if sweeps >= CD_MAX_SWEEPS {
                break 'outer;
            }
            sweeps += 1;
            let mut max_change = 0.0f64;
            for &j in &active {
                max_change = max_change.max(update(j, &mut g, &mut qg));
            }
            if max_change < CD_TOL {
                break;
            }
        }
    }
    ElasticNetSolution {
        coef: g,
        sweeps,
        converged,
        degenerate,
    }
}
