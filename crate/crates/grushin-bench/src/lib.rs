//! Shared fixtures for the benchmark targets.

use grushin::testfn::schwartz_draw;
use grushin::{GridFunction, GrushinConfig, TransformPlan};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// The geometry every identity is certified on.
pub fn desk_config() -> Arc<GrushinConfig> {
    Arc::new(GrushinConfig::desk_default())
}

/// Quarter-resolution geometry, cheap enough to rebuild the plan inside a
/// benchmark loop.
pub fn medium_config() -> Arc<GrushinConfig> {
    let mut cfg = GrushinConfig::desk_default();
    cfg.hermite_cutoff = 32;
    cfg.x_prime_grid.points = 128;
    cfg.x_doubleprime_grid.points = 128;
    cfg.validate().expect("valid medium geometry");
    Arc::new(cfg)
}

pub fn desk_plan() -> Arc<TransformPlan> {
    Arc::new(TransformPlan::new(desk_config()).expect("desk plan"))
}

/// Deterministic smooth input at the plan's geometry.
pub fn sample_input(plan: &TransformPlan) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    schwartz_draw(plan.config().clone(), &mut rng).expect("sample draw")
}
