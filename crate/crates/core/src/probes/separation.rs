use serde::{Deserialize, Serialize};

/// Inputs to the separation-length diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationInputs {
    /// `alpha_k` for `k = 1, 2, ...`; the last value is reused past the end.
    pub alphas: Vec<f64>,
    pub m_d: f64,
    pub l_d: f64,
    pub p_m: f64,
    pub n_e: usize,
    pub episodes: usize,
    /// Change points `nu_1 < ... < nu_N`.
    pub change_points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub inputs: SeparationInputs,
    /// `m_k` for each segment `k = 1..=N+1`.
    pub m: Vec<u64>,
    /// `l_k` for each segment.
    pub l: Vec<u64>,
    /// Flag `k - 1` checks the separation ahead of `nu_k`.
    pub flags: Vec<bool>,
    pub all_hold: bool,
}

fn samples_needed(base: f64, p_m: f64, n_e: f64, log_t: f64) -> f64 {
    base * n_e / p_m
        + n_e * n_e * log_t / (4.0 * p_m * p_m)
        + (base * log_t * n_e.powi(3) / (2.0 * p_m.powi(3)) + log_t * log_t * n_e.powi(4) / (16.0 * p_m.powi(4))).sqrt()
}

/// `m_k = ceil(1/alpha_k) * ceil(m_D N_e/p_m + N_e^2 ln T/(4 p_m^2)
/// + sqrt(m_D ln T N_e^3/(2 p_m^3) + (ln T)^2 N_e^4/(16 p_m^4)))`,
/// `l_k` likewise with `l_D`, and the flags `nu_1 >= m_1`,
/// `nu_k - nu_{k-1} >= l_{k-1} + m_k`.
pub fn separation_requirements(inputs: SeparationInputs) -> SeparationReport {
    assert!(inputs.p_m > 0.0 && inputs.p_m <= 1.0, "p_m must lie in (0, 1]");
    assert!(inputs.n_e >= 1 && !inputs.alphas.is_empty());
    let log_t = (inputs.episodes as f64).ln();
    let n_e = inputs.n_e as f64;
    let segments = inputs.change_points.len() + 1;
    let mut m = Vec::with_capacity(segments);
    let mut l = Vec::with_capacity(segments);
    for k in 0..segments {
        let alpha = inputs.alphas[k.min(inputs.alphas.len() - 1)];
        let period = (1.0 / alpha).ceil() as u64;
        m.push(period * samples_needed(inputs.m_d, inputs.p_m, n_e, log_t).ceil() as u64);
        l.push(period * samples_needed(inputs.l_d, inputs.p_m, n_e, log_t).ceil() as u64);
    }
    let mut flags = Vec::with_capacity(inputs.change_points.len());
    for (i, &nu) in inputs.change_points.iter().enumerate() {
        let ok = if i == 0 {
            nu as u64 >= m[0]
        } else {
            (nu - inputs.change_points[i - 1]) as u64 >= l[i - 1] + m[i]
        };
        flags.push(ok);
    }
    SeparationReport {
        all_hold: flags.iter().all(|&f| f),
        inputs,
        m,
        l,
        flags,
    }
}
