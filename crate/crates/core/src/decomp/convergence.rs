pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_WINDOW: usize = 5;

/// Relative gap between the lowest and second-lowest value among the last
/// `window` entries falls below `tol`.
pub fn converged(values: &[f64], tol: f64, window: usize) -> bool {
    if window < 2 || values.len() < window {
        return false;
    }
    let mut lowest = f64::INFINITY;
    let mut second = f64::INFINITY;
    for &v in &values[values.len() - window..] {
        if v < lowest {
            second = lowest;
            lowest = v;
        } else if v < second {
            second = v;
        }
    }
    (second - lowest) / lowest.abs().max(1e-300) < tol
}
