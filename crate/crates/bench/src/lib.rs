//! Deterministic fixtures for the benchmarks.

use stormarket_core::{DemandCurve, ResProfile, Scenario, StorageParams};

/// A day of `horizon` hours with `blocks`-step curves, a double demand peak
/// and a midday renewable hump.
pub fn synthetic_day(horizon: usize, blocks: usize) -> (Vec<DemandCurve>, ResProfile) {
    let mut curves = Vec::with_capacity(horizon);
    let mut res = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let phase = t as f64 / horizon as f64 * std::f64::consts::TAU;
        let load = 4000.0 + 800.0 * phase.sin() + 400.0 * (2.0 * phase).cos();
        let pairs: Vec<(f64, f64)> = (0..blocks)
            .map(|j| {
                let frac = (j + 1) as f64 / blocks as f64;
                (3000.0 * (1.0 - frac).powi(2) + 5.0, load * frac)
            })
            .collect();
        curves.push(DemandCurve::from_pairs(t + 1, &pairs));
        res.push((3500.0 * (phase - 1.0).cos()).max(0.0) + 1500.0);
    }
    (curves, ResProfile::new(res))
}

/// `n` equal lossy players with `levels` offer levels each.
pub fn players(n: usize, levels: u32) -> Vec<StorageParams> {
    (1..=n)
        .map(|id| StorageParams::new(id, 300.0, 1200.0, levels).with_eta(0.9).with_oc(0.5))
        .collect()
}

pub fn scenario(horizon: usize, blocks: usize, n: usize, levels: u32) -> Scenario {
    let (curves, res) = synthetic_day(horizon, blocks);
    Scenario::new(curves, res, players(n, levels))
}
