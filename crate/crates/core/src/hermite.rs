//! Harmonic-oscillator eigenfunctions in the x = (a + a†)/√2 convention.

const RESCALE: f64 = 1e150;

/// Fills `out[n]` with ψ_n(x) for n < out.len().
///
/// Upward three-term recursion on an unscaled sequence; the Gaussian factor is
/// carried as a log offset so large |x| never overflows the intermediate terms.
pub fn hermite_functions_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut log_scale = -0.25 * std::f64::consts::PI.ln() - 0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out[n + 1] = if cur == 0.0 {
            0.0
        } else {
            cur.signum() * (cur.abs().ln() + log_scale).exp()
        };
    }
}

pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    hermite_functions_into(x, &mut out);
    out
}
