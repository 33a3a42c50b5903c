mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermident_core::evaluation::*;
use thermident_core::identification::*;
use thermident_core::simulation::TimeSeriesDataset;
use thermident_core::twin::{self, Noise};
use thermident_core::{Error, Execution};

use common::probe;

fn fixture() -> ScorePair {
    ScorePair::read_json(concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference_scores.json")).unwrap()
}

#[test]
fn rms_of_hand_computed_cases() {
    let p = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![3.0, 0.0])];
    let m = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![0.0, 4.0])];
    let r = rms_by_zone(&p, &m).unwrap();
    assert!((r[0] - 5f64.sqrt()).abs() < 1e-12);
    assert!((r[1] - 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(rms_by_zone(&p, &p).unwrap(), DVector::zeros(2));
}

#[test]
fn rms_skips_missing_pairs() {
    let p = vec![DVector::from_vec(vec![1.0, f64::NAN]), DVector::from_vec(vec![2.0, 2.0])];
    let m = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![0.0, 0.0])];
    let r = rms_by_zone(&p, &m).unwrap();
    assert!((r[0] - 2.5f64.sqrt()).abs() < 1e-12);
    assert!((r[1] - 2.0).abs() < 1e-12);
    let all_missing = vec![DVector::from_vec(vec![f64::NAN])];
    assert!(matches!(rms_by_zone(&all_missing, &all_missing), Err(Error::EmptyOverlap)));
}

#[test]
fn rms_rejects_length_mismatch() {
    let p = vec![DVector::zeros(2); 3];
    let m = vec![DVector::zeros(2); 2];
    assert!(rms_by_zone(&p, &m).is_err());
}

proptest! {
    #[test]
    fn rms_is_nonnegative_and_scales(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<_> = (0..20).map(|_| probe(&mut rng, 3, -1.0, 1.0)).collect();
        let m: Vec<_> = (0..20).map(|_| probe(&mut rng, 3, -1.0, 1.0)).collect();
        let r = rms_by_zone(&p, &m).unwrap();
        let ps: Vec<_> = p.iter().map(|v| v * scale).collect();
        let ms: Vec<_> = m.iter().map(|v| v * scale).collect();
        let rs = rms_by_zone(&ps, &ms).unwrap();
        for z in 0..3 {
            prop_assert!(r[z] >= 0.0);
            prop_assert!((rs[z] - scale * r[z]).abs() < 1e-9 * (1.0 + rs[z]));
        }
    }
}

/// Double loop over starts and leads, squared errors summed per zone.
fn naive_pooled(ds: &TimeSeriesDataset, starts: &[usize], outputs: &[Vec<DVector<f64>>]) -> Vec<f64> {
    let zones = ds.zones();
    let mut sum = vec![0.0; zones];
    let mut n = vec![0usize; zones];
    for (i, &s) in starts.iter().enumerate() {
        for (l, yhat) in outputs[i].iter().enumerate() {
            for z in 0..zones {
                let e = yhat[z] - ds.y[s + l + 1][z];
                if e.is_finite() {
                    sum[z] += e * e;
                    n[z] += 1;
                }
            }
        }
    }
    sum.iter().zip(&n).map(|(s, c)| (s / *c as f64).sqrt()).collect()
}

fn test_week() -> (thermident_core::model::DiscreteModel, TimeSeriesDataset) {
    let dm = ModelSettings::default().discrete_model(&twin::building(), &twin::reference_parameters()).unwrap();
    let noise = Noise { measurement_std: 0.05, ..Noise::NONE };
    let ds = twin::regular_weeks(&twin::reference_parameters(), Some(&twin::ig_model()), 0, 1, 9, noise).unwrap();
    (dm, ds.slice(0..400))
}

#[test]
fn pooled_rms_matches_a_double_loop_for_both_poolings() {
    let (dm, ds) = test_week();
    for pooling in [Pooling::Anchored, Pooling::Sliding] {
        let settings = PredictionSettings { horizon: 12, warmup: 96, period: 48, pooling, ..Default::default() };
        let preds = predict_online_ig(&dm, &ds, &settings, Execution::Sequential).unwrap();
        if pooling == Pooling::Anchored {
            assert!(preds.starts.windows(2).all(|w| w[1] - w[0] == 48));
        } else {
            assert!(preds.starts.windows(2).all(|w| w[1] - w[0] == 1));
        }
        let mut acc = ErrorAccumulator::new(6, 12);
        acc.add_predictions(&preds, &ds).unwrap();
        let got = acc.pooled_rms().unwrap();
        let want = naive_pooled(&ds, &preds.starts, &preds.outputs);
        for z in 0..6 {
            assert!((got[z] - want[z]).abs() < 1e-12);
        }
        assert_eq!(acc.samples(), preds.starts.len() * 12 * 6);
    }
}

#[test]
fn merged_accumulators_equal_one_pass() {
    let (dm, ds) = test_week();
    let settings = PredictionSettings { horizon: 4, pooling: Pooling::Sliding, ..Default::default() };
    let preds = predict_online_ig(&dm, &ds, &settings, Execution::Sequential).unwrap();
    let mut whole = ErrorAccumulator::new(6, 4);
    whole.add_predictions(&preds, &ds).unwrap();
    let half = preds.starts.len() / 2;
    let mut parts = [ErrorAccumulator::new(6, 4), ErrorAccumulator::new(6, 4)];
    for (i, &s) in preds.starts.iter().enumerate() {
        for (l, yhat) in preds.outputs[i].iter().enumerate() {
            parts[usize::from(i >= half)].add(l, yhat, &ds.y[s + l + 1]);
        }
    }
    let [mut a, b] = parts;
    a.merge(&b).unwrap();
    assert!((a.pooled_rms().unwrap() - whole.pooled_rms().unwrap()).amax() < 1e-12);
    assert!(a.merge(&ErrorAccumulator::new(6, 3)).is_err());
}

#[test]
fn horizon_curve_rows_match_per_lead_rms() {
    let (dm, ds) = test_week();
    let base = PredictionSettings::default();
    let curve = horizon_curve(&dm, Predictor::Online, &ds, 6, Pooling::Sliding, &base, Execution::Sequential).unwrap();
    let settings = PredictionSettings { horizon: 6, pooling: Pooling::Sliding, ..base };
    let preds = predict_online_ig(&dm, &ds, &settings, Execution::Sequential).unwrap();
    for lead in 0..6 {
        let p: Vec<_> = preds.outputs.iter().map(|o| o[lead].clone()).collect();
        let m: Vec<_> = preds.starts.iter().map(|s| ds.y[s + lead + 1].clone()).collect();
        let r = rms_by_zone(&p, &m).unwrap();
        for z in 0..6 {
            assert!((curve.rms[lead][z] - r[z]).abs() < 1e-12);
        }
    }
    assert_eq!(curve.horizons, (1..=6).collect::<Vec<_>>());
}

#[test]
fn reference_table_gives_the_reported_improvement() {
    let pair = fixture();
    let report = compare_predictors(&pair.fixed, &pair.online, "ref", &[]).unwrap();
    // independent arithmetic on the table
    let f: f64 = pair.fixed.per_zone_rms.iter().sum::<f64>() / 6.0;
    let o: f64 = pair.online.per_zone_rms.iter().sum::<f64>() / 6.0;
    let expected = 100.0 * (f - o) / f;
    assert!((report.improvement_mean - expected).abs() < 1e-9);
    assert!((report.improvement_mean - 36.5).abs() <= 0.1, "{}", report.improvement_mean);
    assert!((report.improvement_per_zone[2] - 100.0 * (0.48 - 0.15) / 0.48).abs() < 1e-9);
}

#[test]
fn identical_predictors_show_no_improvement() {
    let pair = fixture();
    let report = compare_predictors(&pair.fixed, &pair.fixed, "", &[1]).unwrap();
    assert_eq!(report.improvement_mean, 0.0);
    assert!(report.improvement_per_zone.iter().all(|v| *v == 0.0));
}

#[test]
fn mismatched_scores_are_rejected() {
    let pair = fixture();
    let mut other = pair.online.clone();
    other.cadence = "1-step".into();
    assert!(matches!(compare_predictors(&pair.fixed, &other, "", &[]), Err(Error::Mismatch(_))));
    let mut other = pair.online.clone();
    other.zone_ids.swap(0, 1);
    assert!(matches!(compare_predictors(&pair.fixed, &other, "", &[]), Err(Error::Mismatch(_))));
    let mut other = pair.online.clone();
    other.dataset = "elsewhere".into();
    assert!(compare_predictors(&pair.fixed, &other, "", &[]).is_err());
    let mut other = pair.online.clone();
    other.per_zone_rms.pop();
    assert!(matches!(compare_predictors(&pair.fixed, &other, "", &[]), Err(Error::Dimension(_))));
}

#[test]
fn report_is_reproducible_and_round_trips() {
    let pair = fixture();
    let a = compare_predictors(&pair.fixed, &pair.online, "abc", &[1, 2]).unwrap();
    let b = compare_predictors(&pair.fixed, &pair.online, "abc", &[1, 2]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    a.write_json(&pa).unwrap();
    b.write_json(&pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    assert_eq!(EvaluationReport::read_json(&pa).unwrap(), a);
    let csv = dir.path().join("zones.csv");
    a.write_zone_csv(&csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("abc"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 8);
}

#[test]
fn sign_test_matches_the_binomial_tail() {
    // P(X >= 9) for X ~ Bin(10, 1/2) = 11 / 1024
    let mut d = vec![1.0; 9];
    d.push(-1.0);
    assert!((sign_test(&d) - 11.0 / 1024.0).abs() < 1e-12);
    d.push(0.0);
    assert!((sign_test(&d) - 11.0 / 1024.0).abs() < 1e-12);
}

#[test]
fn chi_square_band_brackets_the_mean() {
    let (lo, hi) = chi_square_band(100.0, 0.95);
    assert!(lo < 100.0 && hi > 100.0);
    assert!((lo - 74.22).abs() < 0.01 && (hi - 129.56).abs() < 0.01);
}

#[test]
fn ig_overlay_has_a_row_per_slot_and_series() {
    let (dm, _) = test_week();
    let full = twin::regular_weeks(&twin::reference_parameters(), Some(&twin::ig_model()), 0, 2, 3, Noise::NONE).unwrap();
    let weeks = vec![full.slice(0..672), full.slice(672..1344)];
    let profile = estimate_fixed_ig(&dm, &weeks, &IgSettings::default(), Execution::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overlay.csv");
    write_ig_overlay_csv(&dm, &profile, &path, None).unwrap();
    let rows = std::fs::read_to_string(&path).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + profile.slots() * 3);
}

#[test]
fn exact_gains_give_near_zero_one_step_error() {
    let p = twin::reference_parameters();
    let dm = ModelSettings::default().discrete_model(&twin::building(), &p).unwrap();
    let ds = twin::regular_weeks(&p, Some(&twin::ig_model()), 0, 1, 4, Noise::NONE).unwrap();
    let truth = ds.truth.as_ref().unwrap();
    let slots = slots_per_week(ds.dt);
    let mut week = vec![None; slots];
    for (k, t) in ds.timestamps.iter().enumerate() {
        week[slot_of(t, ds.dt)] = Some(truth.f_ig[k].clone());
    }
    let profile = InternalGainsProfile::from_weekly(ds.dt, ds.zone_ids.clone(), p.c_ig.clone(), vec![week]).unwrap();
    let settings = PredictionSettings {
        horizon: 1,
        pooling: Pooling::Sliding,
        kalman: thermident_core::simulation::KalmanConfig::noiseless(),
        ..Default::default()
    };
    let curve = horizon_curve(&dm, Predictor::Fixed(&profile), &ds, 1, Pooling::Sliding, &settings, Execution::Sequential).unwrap();
    assert!(curve.mean[0] < 1e-4, "{}", curve.mean[0]);
}

#[test]
fn most_variable_zone_degrades_fastest() {
    let p = twin::reference_parameters();
    let dm = ModelSettings::default().discrete_model(&twin::building(), &p).unwrap();
    let mut ig = twin::ig_model();
    ig.noise_std[0] *= 2.0;
    ig.daily_std[0] *= 1.5;
    let noise = Noise { measurement_std: 0.05, ..Noise::NONE };
    let train = twin::regular_weeks(&p, Some(&ig), 0, 4, 31, noise).unwrap();
    let weeks: Vec<_> = (0..4).map(|w| train.slice(w * 672..(w + 1) * 672)).collect();
    let profile = estimate_fixed_ig(&dm, &weeks, &IgSettings::default(), Execution::default()).unwrap();
    let test = twin::regular_weeks(&p, Some(&ig), 4, 1, 32, noise).unwrap();
    let curve =
        horizon_curve(&dm, Predictor::Fixed(&profile), &test, 48, Pooling::Sliding, &PredictionSettings::default(), Execution::default())
            .unwrap();
    let slopes = curve.growth_slopes();
    let fastest = (0..6).max_by(|&a, &b| slopes[a].total_cmp(&slopes[b])).unwrap();
    assert_eq!(curve.zone_ids[fastest], "NW", "{slopes:?}");
}
