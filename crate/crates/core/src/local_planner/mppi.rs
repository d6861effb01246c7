//! Model predictive path integral control over the stage cost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{dubins_step, stage_cost, KinematicParams, RobotState, StageContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MppiParams {
    pub samples: usize,
    pub horizon: usize,
    /// Standard deviation of the noise on [v, alpha].
    pub sigma: [f64; 2],
    pub lambda: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self { samples: 512, horizon: 30, sigma: [0.5, 1.0], lambda: 1.0 }
    }
}

/// States visited by applying `controls` from `x` (excluding `x`).
pub fn rollout(x: &RobotState, controls: &[[f64; 2]], k: &KinematicParams) -> Vec<RobotState> {
    let mut out = Vec::with_capacity(controls.len());
    let mut s = *x;
    for &u in controls {
        s = dubins_step(&s, u, k);
        out.push(s);
    }
    out
}

/// Summed stage cost of a rollout from `x`.
pub fn trajectory_cost(x: &RobotState, states: &[RobotState], ctx: &StageContext) -> f64 {
    let mut prev = x;
    let mut total = 0.0;
    for (t, s) in states.iter().enumerate() {
        total += stage_cost(s, prev, ctx, t, t + 1 == states.len());
        prev = s;
    }
    total
}

/// One MPPI update of `nominal` (padded or cut to the horizon). Returns the
/// importance-weighted control sequence.
pub fn mppi_plan(
    x: &RobotState,
    ctx: &StageContext,
    k: &KinematicParams,
    nominal: &[[f64; 2]],
    params: &MppiParams,
    seed: u64,
) -> Vec<[f64; 2]> {
    let h = params.horizon.max(1);
    let mut base: Vec<[f64; 2]> = nominal.iter().copied().take(h).collect();
    let pad = base.last().copied().unwrap_or([0.0, 0.0]);
    base.resize(h, pad);
    let n = params.samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |s: f64| Normal::new(0.0, s.max(0.0)).expect("finite sigma");
    let (nv, na) = (noise(params.sigma[0]), noise(params.sigma[1]));

    let mut seqs = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        let u: Vec<[f64; 2]> = if i == 0 && n > 1 {
            // keep the unperturbed nominal among the candidates
            base.clone()
        } else {
            base.iter().map(|b| [b[0] + nv.sample(&mut rng), b[1] + na.sample(&mut rng)]).collect()
        };
        let states = rollout(x, &u, k);
        costs.push(trajectory_cost(x, &states, ctx));
        seqs.push(u);
    }
    let s_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda = params.lambda.max(1e-12);
    let weights: Vec<f64> = costs.iter().map(|&s| (-(s - s_min) / lambda).exp()).collect();
    let total: f64 = weights.iter().sum();
    (0..h)
        .map(|t| {
            let mut acc = [0.0, 0.0];
            for (w, u) in weights.iter().zip(&seqs) {
                acc[0] += w * u[t][0];
                acc[1] += w * u[t][1];
            }
            [acc[0] / total, acc[1] / total]
        })
        .collect()
}
