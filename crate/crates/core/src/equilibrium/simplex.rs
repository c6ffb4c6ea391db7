use crate::error::{Error, Result};

/// Euclidean projection of `values` onto `{f ≥ 0, Σ f = total}`.
///
/// Sort-and-threshold rule: with `u` sorted in decreasing order, the support
/// size is the largest `j` with `u_j > (Σ_{i≤j} u_i − total) / j` and the
/// shift is that average. Runs in `O(n log n)`.
pub fn project_simplex(values: &[f64], total: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("cannot project an empty vector".into()));
    }
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::Domain(format!("simplex total must be finite and non-negative, got {total}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cannot project non-finite values".into()));
    }
    let mut out = values.to_vec();
    project_in_place(&mut out, total);
    Ok(out)
}

pub(crate) fn project_in_place(values: &mut [f64], total: f64) {
    if total == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    if values.len() == 1 {
        values[0] = total;
        return;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (j + 1) as f64;
        if *u > t {
            theta = t;
        } else {
            break;
        }
    }
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - theta).max(0.0);
        sum += *v;
    }
    // rounding in the shift can leave Σ off by a few ulps
    if sum > 0.0 && sum != total {
        let scale = total / sum;
        values.iter_mut().for_each(|v| *v *= scale);
    }
}
