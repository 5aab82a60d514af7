//! Derivative-free minimization of a mixing parameter on `[0, 1]`.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` over `[0, 1]`: `samples` equally spaced probes (endpoints
/// included), then golden-section refinement on the bracket around the best
/// probe. Returns `(t, f(t))`.
///
/// The result is never worse than the best probe, in particular never worse
/// than `f(0)`.
pub fn minimize_unit_interval(mut f: impl FnMut(f64) -> f64, samples: usize, tol: f64) -> (f64, f64) {
    let samples = samples.max(2);
    let step = 1.0 / (samples - 1) as f64;
    let probes: Vec<(f64, f64)> = (0..samples)
        .map(|k| {
            let t = if k == samples - 1 { 1.0 } else { k as f64 * step };
            (t, f(t))
        })
        .collect();
    let (best_k, &(mut best_t, mut best_f)) = probes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("at least two probes");

    let mut lo = if best_k == 0 { 0.0 } else { probes[best_k - 1].0 };
    let mut hi = if best_k == samples - 1 { 1.0 } else { probes[best_k + 1].0 };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v < best_f {
            best_t = t;
            best_f = v;
        }
    }
    (best_t, best_f)
}
