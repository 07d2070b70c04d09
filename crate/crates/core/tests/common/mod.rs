use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed property configuration, so runs are reproducible.
pub fn seeded(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x7e7a),
        failure_persistence: None,
        ..Config::default()
    }
}
