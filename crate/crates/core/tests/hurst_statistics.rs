//! Monte Carlo checks of the Hurst estimators on exactly synthesized fBm.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slowfast_core::fbm::{sigma_star_sq, sigma_star_star_sq, FbmSynthesizer};
use slowfast_core::hurst::{estimate_h1, estimate_h2, normalized_qv};
use slowfast_core::stats::{mean, sample_sd};
use slowfast_core::{HurstIndex, ObservationSeries};

fn scalar() -> DMatrix<f64> {
    DMatrix::from_element(1, 1, 1.0)
}

fn paths(steps: usize, hurst: f64, reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let synth = FbmSynthesizer::new(steps, 1.0, HurstIndex::new(hurst).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| synth.sample(1, &mut rng).values.remove(0)).collect()
}

#[test]
fn h1_lands_within_three_sd() {
    let (eps, n) = (0.1f64, 10_000);
    let scale = eps.sqrt();
    let mut inside = 0;
    let all = paths(n, 0.85, 200, 1);
    for p in &all {
        let obs = ObservationSeries::scalar(1.0, p.iter().map(|v| scale * v).collect()).unwrap();
        let est = estimate_h1(&obs, eps, &scalar()).unwrap();
        if (est.point - 0.85).abs() < 3.0 * est.theoretical_sd.unwrap() {
            inside += 1;
        }
    }
    assert!(inside >= 198, "{inside} of 200");
}

#[test]
fn clt_scalings_match_limit_variances() {
    let h = HurstIndex::new(0.85).unwrap();
    let n = 1 << 13;
    let reps = 600;
    let fine = paths(2 * n, 0.85, reps, 2);
    let mut z1 = Vec::with_capacity(reps);
    let mut z2 = Vec::with_capacity(reps);
    for p in &fine {
        let obs = ObservationSeries::scalar(1.0, p.clone()).unwrap();
        let coarse = obs.subsample(n).unwrap();
        let h1 = estimate_h1(&coarse, 1.0, &scalar()).unwrap().point;
        z1.push(2.0 * (n as f64).sqrt() * (n as f64).ln() * (h1 - 0.85));
        let h2 = estimate_h2(&obs, None).unwrap().point;
        z2.push(2.0 * std::f64::consts::LN_2 * (n as f64).sqrt() * (h2 - 0.85));
    }
    let s1 = sigma_star_sq(h, &scalar()).unwrap().sqrt();
    let s2 = sigma_star_star_sq(h, &scalar()).unwrap().sqrt();
    // The normalization 2√n ln(n/T) keeps only the leading term of
    // d ln φ/dH = −2 ln(n/T) − 4^H ln 4/(4 − 4^H). At n = 2¹³ the dropped term
    // is a third of the kept one, so the sd of Ĥ₁ sits well below the
    // asymptotic value. The delta method with the full derivative is the oracle.
    let lead = 2.0 * (n as f64).ln();
    let shrink = lead / (lead + 4f64.powf(0.85) * 4f64.ln() / (4.0 - 4f64.powf(0.85)));
    let r1 = sample_sd(&z1).unwrap() / (s1 * shrink);
    let r2 = sample_sd(&z2).unwrap() / s2;
    assert!((r1 - 1.0).abs() < 0.15, "h1 ratio {r1} (shrink {shrink})");
    assert!((r2 - 1.0).abs() < 0.15, "h2 ratio {r2}");
    eprintln!("h1 ratio {r1}, h2 ratio {r2}, shrink {shrink}");
}

#[test]
fn normalized_qv_clt_variance() {
    let h = HurstIndex::new(0.85).unwrap();
    let n = 1 << 12;
    let reps = 2000;
    let z: Vec<f64> = paths(n, 0.85, reps, 3)
        .into_iter()
        .map(|p| {
            let obs = ObservationSeries::scalar(1.0, p).unwrap();
            (n as f64).sqrt() * (normalized_qv(&obs, &scalar(), h).unwrap() - 1.0)
        })
        .collect();
    let var = sample_sd(&z).unwrap().powi(2);
    let want = sigma_star_sq(h, &scalar()).unwrap();
    assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
    assert!(mean(&z).unwrap().abs() < 0.2);
}

#[test]
fn normalized_qv_is_near_one_at_fine_resolution() {
    let h = HurstIndex::new(0.85).unwrap();
    for p in paths(1 << 14, 0.85, 5, 4) {
        let obs = ObservationSeries::scalar(1.0, p).unwrap();
        let v = normalized_qv(&obs, &scalar(), h).unwrap();
        assert!((v - 1.0).abs() < 0.05, "{v}");
        let c = 3.7;
        let w = normalized_qv(&obs.scaled(c), &DMatrix::from_element(1, 1, c), h).unwrap();
        assert!((v - w).abs() < 1e-12);
    }
}

#[test]
fn scale_invariances() {
    let p = paths(1000, 0.8, 1, 5).remove(0);
    let obs = ObservationSeries::scalar(1.0, p).unwrap();
    let c = 0.013;
    let a = estimate_h1(&obs, 0.2, &scalar()).unwrap().point;
    let b = estimate_h1(&obs.scaled(c), 0.2 * c * c, &scalar()).unwrap().point;
    assert!((a - b).abs() < 1e-12);
    let a = estimate_h2(&obs, None).unwrap().point;
    let b = estimate_h2(&obs.scaled(-42.0), None).unwrap().point;
    assert!((a - b).abs() < 1e-12);
}
