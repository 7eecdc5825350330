//! Analytic gradients vs central finite differences on random tiny models.

use neurovol::testing::gradient_check_tiny;

#[test]
fn gradients_match_finite_differences_over_many_seeds() {
    let mut worst = 0.0_f64;
    let mut total = 0;
    for seed in 0..20 {
        let outcome = gradient_check_tiny(seed);
        assert!(
            outcome.max_rel_err <= 1e-4,
            "seed {seed}: max relative error {}",
            outcome.max_rel_err
        );
        worst = worst.max(outcome.max_rel_err);
        total += outcome.params_checked;
    }
    // tiny config has well over a hundred parameters per model
    assert!(total >= 20 * 100, "checked only {total} parameters");
    println!("checked {total} parameters, worst relative error {worst:.3e}");
}
