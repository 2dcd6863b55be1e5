use evinterp::flow::{AnyTimeFlow, Direction};
use evinterp::scene::Scene;

/// Analytic any-time flows of interval 0, forward and backward.
pub fn true_any_time(scene: &Scene, bins: usize) -> (AnyTimeFlow, AnyTimeFlow) {
    let tau = |u: f64| scene.tau(0, u);
    let u = |k: usize| k as f64 / (bins - 1) as f64;
    let fwd = AnyTimeFlow {
        direction: Direction::Forward,
        fields: (0..bins).map(|k| scene.flow(tau(0.0), tau(u(k)))).collect(),
        valid: Vec::new(),
    };
    let bwd = AnyTimeFlow {
        direction: Direction::Backward,
        fields: (0..bins)
            .map(|k| scene.flow(tau(1.0), tau(1.0 - u(k))))
            .collect(),
        valid: Vec::new(),
    };
    (fwd, bwd)
}
