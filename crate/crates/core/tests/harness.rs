use dr_online::harness::persist::{config_hash, write_report, write_trace};
use dr_online::harness::{
    evaluate, run_grid, run_once, AdversaryKind, AdversarySpec, Environment, ExperimentSpec, Family, IntervalPlan,
    RunOptions,
};
use dr_online::learners::LearnerKind;
use dr_online::reductions::FeedbackMode;
use dr_online::surrogate::BETA;
use dr_online::Domain;

fn spec(kind: AdversaryKind, mode: FeedbackMode, learner: LearnerKind) -> ExperimentSpec {
    let adv = AdversarySpec { kind, instance_seed: 4, ..AdversarySpec::default() };
    ExperimentSpec::new(Domain::unit_box(3).unwrap(), adv, mode, learner)
}

#[test]
fn artifacts_are_byte_identical_on_rerun() {
    let s = spec(AdversaryKind::IidRandom, FeedbackMode::Bandit, LearnerKind::SoOga);
    let env = Environment::build(&s, 512).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let rec = run_once(&env, &s, 9, RunOptions::default()).unwrap();
        let (rep, _) = evaluate(&env, &rec).unwrap();
        write_trace(dir, &rec).unwrap();
        write_report(dir, &rec, &rep, &config_hash("fixed")).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn certificates_dominate_realized_regret_in_every_mode() {
    for mode in FeedbackMode::ALL {
        let mut s = spec(AdversaryKind::PiecewiseStationary, mode, LearnerKind::SoOga);
        s.adaptive = true;
        let res = run_grid(&s, &[1024], &[0, 1], RunOptions::default()).unwrap();
        for run in &res[0].runs {
            let r = &run.report;
            assert!(r.static_regret <= r.static_certificate + 1e-6, "{mode:?} {r:?}");
            assert!(r.adaptive_regret <= r.adaptive_certificate + 1e-6, "{mode:?}");
            for (x, c) in run.series.regret.iter().zip(&run.series.certificate) {
                assert!(x <= &(c + 1e-6));
            }
            assert_eq!(r.total_queries, 1024);
        }
    }
}

#[test]
fn designed_and_realized_path_lengths_agree() {
    let mut s = spec(AdversaryKind::Drifting, FeedbackMode::FirstFull, LearnerKind::Ader);
    s.dynamic = true;
    for t in [256, 2048] {
        let env = Environment::build(&s, t).unwrap();
        let designed = env.sequence.designed_path_length.unwrap();
        assert!(designed > 0.0);
        assert!((env.path_length - designed).abs() <= 0.05 * designed, "{t}: {} vs {designed}", env.path_length);
        let rec = run_once(&env, &s, 0, RunOptions::default()).unwrap();
        let (r, _) = evaluate(&env, &rec).unwrap();
        assert!(r.dynamic_regret <= r.dynamic_certificate + 1e-6);
    }
}

#[test]
fn average_regret_certificate_decreases_with_horizon() {
    let s = spec(AdversaryKind::IidRandom, FeedbackMode::FirstFull, LearnerKind::SoOga);
    let res = run_grid(&s, &[256, 1024, 4096], &[0, 1, 2], RunOptions::default()).unwrap();
    let avg: Vec<f64> = res.iter().map(|h| h.summary.static_certificate / h.summary.horizon as f64).collect();
    assert!(avg.windows(2).all(|w| w[1] < w[0]), "{avg:?}");
}

#[test]
fn interval_plan_is_reproducible_and_valid() {
    for t in [100, 600, 5000] {
        let a = IntervalPlan::new(t, 3);
        assert_eq!(a, IntervalPlan::new(t, 3));
        assert!(!a.is_empty());
        assert!(a.intervals.iter().all(|&(s, e)| s < e && e <= t));
        assert!(a.intervals.contains(&(0, t)));
    }
}

#[test]
fn linear_family_regret_is_bounded_by_scaled_linear_regret() {
    let mut s = spec(AdversaryKind::IidRandom, FeedbackMode::FirstFull, LearnerKind::SoOga);
    s.adversary.family = Family::Linear;
    s.adversary.noise_sigma = 0.0;
    let res = run_grid(&s, &[512], &[0, 1, 2], RunOptions::default()).unwrap();
    for run in &res[0].runs {
        let r = &run.report;
        assert!(r.static_regret <= BETA * r.linear_regret + 1e-6, "{r:?}");
    }
}
