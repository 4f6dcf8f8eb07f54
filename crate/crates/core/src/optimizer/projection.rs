/// Euclidean projection onto the probability simplex by sorting and
/// thresholding: find the largest `rho` with `u_rho > (sum_{<=rho} u - 1) / rho`
/// over the descending sort `u`, then shift and clip.
pub fn project_row_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // rounding
    let sum: f64 = out.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        out.iter_mut().for_each(|x| *x /= sum);
    }
    out
}
