//! Shared helpers for the integration suites.

/// Dynamic time warping distance by exhaustive path enumeration:
/// every monotone, continuous, boundary-anchored path with steps
/// {(1,0), (0,1), (1,1)} is costed and the minimum taken. Exponential;
/// intended for sequences of length <= 6 as an oracle for the
/// dynamic-programming kernel, which it never calls.
///
/// Costs accumulate in path order from the start, the same association
/// the forward dynamic program produces, so agreement is exact rather
/// than within-epsilon.
pub fn dtw_exhaustive(x: &[f64], y: &[f64]) -> f64 {
    assert!(!x.is_empty() && !y.is_empty());
    let mut best = f64::INFINITY;
    walk(x, y, 0, 0, 0.0, &mut best);
    best
}

fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
    let acc = acc + (x[i] - y[j]).abs();
    let at_end_x = i == x.len() - 1;
    let at_end_y = j == y.len() - 1;
    if at_end_x && at_end_y {
        if acc < *best {
            *best = acc;
        }
        return;
    }
    if !at_end_x {
        walk(x, y, i + 1, j, acc, best);
    }
    if !at_end_y {
        walk(x, y, i, j + 1, acc, best);
    }
    if !at_end_x && !at_end_y {
        walk(x, y, i + 1, j + 1, acc, best);
    }
}

#[allow(dead_code)]
pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
