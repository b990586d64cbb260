use powertail::gof::gof_pvalue;
use powertail::growth::*;
use powertail::rng::derive_seed;
use powertail::FitOptions;

fn measured(gamma: f64, seed: u64) -> f64 {
    let d = simulate_copy(&GrowthConfig::copy(200_000, gamma, seed)).unwrap();
    assert_eq!(d.total(), d.expected_total());
    measure_exponent(&d, &FitOptions::discrete()).unwrap().alpha
}

#[test]
fn copy_model_pure_exploitation() {
    let a = measured(0.0, 1);
    assert!((a - 2.0).abs() <= 0.15, "{a}");
}

#[test]
fn copy_model_mixed_exploration() {
    let a = measured(0.2, 4);
    assert!((a - 2.25).abs() <= 0.15, "{a}");
}

#[test]
fn copy_model_half_exploration() {
    let a = measured(0.5, 2);
    assert!((a - 3.0).abs() <= 0.2, "{a}");
}

#[test]
fn ba_exponents() {
    let d = simulate_ba(&GrowthConfig::ba(200_000, 2, 1)).unwrap();
    assert_eq!(d.total(), 2 * 2 * (200_000 - 3) + 6);
    let (lo, hi) = BA_SLOPE_WINDOW;
    let slope = ccdf_slope(&d.counts, lo, hi).unwrap();
    assert!((slope + 2.0).abs() <= 0.1, "{slope}");
    let fit = measure_exponent(&d, &FitOptions::discrete()).unwrap();
    assert!((fit.alpha - 3.0).abs() <= 0.15, "{}", fit.alpha);
}

#[test]
fn sweep_matches_prediction_and_is_monotone() {
    let rows = gamma_sweep(&[0.0, 0.2, 0.5], 200_000, 5, 20_250_301).unwrap();
    for (row, tol) in rows.iter().zip([0.15, 0.15, 0.2]) {
        assert!((row.alpha_mean - row.alpha_pred).abs() <= tol, "{row:?}");
    }
    assert!(rows.windows(2).all(|w| w[0].alpha_mean <= w[1].alpha_mean));
}

#[test]
fn uniform_attachment_is_not_power_law() {
    let opts = FitOptions::discrete();
    let mut rejected = 0;
    for i in 0..10u64 {
        let d = simulate_copy(&GrowthConfig::copy(100_000, 1.0, derive_seed(77, i))).unwrap();
        let fit = measure_exponent(&d, &opts).unwrap();
        let g = gof_pvalue(&d.sample().unwrap(), &fit, 100, i, &opts).unwrap();
        if g.p_value < 0.1 {
            rejected += 1;
        }
    }
    assert!(rejected >= 8, "only {rejected}/10 rejected");
}
