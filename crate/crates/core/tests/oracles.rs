mod common;

use common::*;

#[test]
fn particle_filter_tracks_kalman_on_random_walk() {
    for seed in 0..3 {
        let (truth, obs) = random_walk(seed, 1000, 0.07, 0.05);
        let kf = rmse(&kalman_1d(&obs, 0.07, 0.05), &truth);
        let pf = rmse(&particle_filter_1d(&obs, 500, 0.07, 0.05, seed), &truth);
        eprintln!("seed {seed}: kalman {kf:.5} pf {pf:.5} ratio {:.4}", pf / kf);
        assert!(pf <= 1.15 * kf);
        assert!(kf < rmse(&obs, &truth));
    }
}

#[test]
fn kalman_oracle_reaches_steady_state_gain() {
    // Riccati fixed point: P = (P + q) r / (P + q + r).
    let (q, r) = (0.07f64.powi(2), 0.05f64.powi(2));
    let p = (-q + (q * q + 4.0 * q * r).sqrt()) / 2.0;
    let k = (p + q) / (p + q + r);
    let obs = vec![1.0; 12];
    let est = kalman_1d(&obs, 0.07, 0.05);
    // Constant observations: the error shrinks by (1 - k) each step.
    let tail = (1.0 - est[11]) / (1.0 - est[10]);
    assert!((tail - (1.0 - k)).abs() < 1e-6, "{tail} vs {}", 1.0 - k);
}

#[test]
fn grid_filter_beats_raw_observations() {
    for seed in 0..3 {
        let (raw, est) = grid_tracking(seed, 500, 500);
        eprintln!("seed {seed}: raw {raw:.5} est {est:.5}");
        assert!(est < raw);
    }
}
