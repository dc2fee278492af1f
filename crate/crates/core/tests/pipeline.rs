use chrono::{Duration, NaiveDate};
use ensdiv::data::{AlignedPanel, SeriesKey};
use ensdiv::ensemble::{fit_combiner, MissingModels, Strategy};
use ensdiv::residuals::{
    agglomerative_cluster, average_offdiagonal, cluster_summary, compute_residuals, pairwise_correlations,
    rolling_correlations, Linkage, MissingPolicy, Pooling, ResidualPanel,
};
use ensdiv::skill::{evaluate_skill, BaselineHorizon, Metric};
use ensdiv::synthetic::{generate, CorrelationStructure, ErrorScale, SimConfig, TruthProcess};

fn block(sizes: Vec<usize>, within: f64, between: f64, dates: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::equicorrelated(sizes.iter().sum(), dates, 0.0, ErrorScale::TargetSkill(0.9), seed);
    c.correlation = CorrelationStructure::Block {
        blocks: sizes.len(),
        within,
        between,
        sizes,
    };
    c.truth = TruthProcess::RandomWalk {
        start: 1000.0,
        step_sd: 1.0,
    };
    c
}

#[test]
fn rolling_windows_track_a_regime_switch() {
    let calm = SimConfig::equicorrelated(5, 104, 0.1, ErrorScale::Sigma(1.0), 4);
    let herd = SimConfig::equicorrelated(5, 104, 0.85, ErrorScale::Sigma(1.0), 4);
    let a = generate::<f64>(&calm).unwrap().panel.errors;
    let b = generate::<f64>(&herd).unwrap().panel.errors;
    let rows: Vec<(String, Vec<Option<f64>>)> = (0..5)
        .map(|i| (format!("m{i}"), a[i].iter().chain(&b[i]).map(|v| Some(*v)).collect()))
        .collect();
    let res = ResidualPanel::weekly(NaiveDate::from_ymd_opt(2020, 1, 4).unwrap(), rows);
    let windows = rolling_correlations(&res, 52, 52, 52).unwrap();
    assert_eq!(windows.len(), 4);
    let avg: Vec<f64> = windows.iter().map(|w| average_offdiagonal(w).unwrap()).collect();
    assert!(avg[0] < 0.4 && avg[1] < 0.4, "{avg:?}");
    assert!(avg[2] > 0.65 && avg[3] > 0.65, "{avg:?}");
}

#[test]
fn blocks_recovered_through_the_pipeline() {
    for seed in 0..5 {
        let c = block(vec![3, 3, 3], 0.9, 0.1, 2_000, seed);
        let run = generate::<f64>(&c).unwrap();
        let res = compute_residuals(&run.aligned(), Pooling::All).unwrap().remove(0);
        let corr = pairwise_correlations(&res, 52).unwrap();
        let cl = agglomerative_cluster(&corr, 3, Linkage::Average, MissingPolicy::Restrict).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(cl.labels[i] == cl.labels[j], i / 3 == j / 3, "seed {seed}");
            }
        }
        let s = cluster_summary(&corr, &cl).unwrap();
        assert!((s.within_pairs.unwrap() - 0.9).abs() < 0.03);
        assert!((s.between_pairs.unwrap() - 0.1).abs() < 0.05);
    }
}

fn split(panel: &AlignedPanel<f64>, cut: NaiveDate) -> (AlignedPanel<f64>, AlignedPanel<f64>) {
    (
        panel.filter_keys(|k: &SeriesKey| k.target_date < cut),
        panel.filter_keys(|k: &SeriesKey| k.target_date >= cut),
    )
}

#[test]
fn min_variance_beats_equal_weights_out_of_sample() {
    // Unequal block sizes make equal weights over-count the large block.
    let c = block(vec![5, 2, 1], 0.8, 0.1, 20_000, 77);
    let run = generate::<f64>(&c).unwrap();
    let truth = run.truth.table();
    let (train, test) = split(&run.aligned(), c.target_date(10_000));
    let score = |s: &Strategy| {
        let fitted = fit_combiner(&train, s).unwrap();
        let f = fitted.combine(&test, MissingModels::Renormalize).unwrap();
        evaluate_skill("e", f.residuals(), &truth, BaselineHorizon::MatchForecast, Metric::Mse).unwrap()
    };
    let mv = score(&Strategy::min_variance());
    let eq = score(&Strategy::Mean);
    assert_eq!(mv.n, 10_000);
    assert!(mv.skill <= eq.skill, "{} vs {}", mv.skill, eq.skill);
}

#[test]
fn constant_input_dates_line_up() {
    let c = block(vec![2, 2], 0.5, 0.2, 30, 2);
    let run = generate::<f64>(&c).unwrap();
    let aligned = run.aligned();
    assert_eq!(aligned.row_count(), 4 * 30);
    let first = aligned.keys().into_iter().next().unwrap();
    assert_eq!(first.target_date, c.start_date);
    assert_eq!(c.target_date(1) - c.target_date(0), Duration::weeks(1));
}
