use eigsgd::config::ConsistencyKind;
use eigsgd::{FigurePreset, Method, Scale, StepSchedule};

#[test]
fn fig2_expansion() {
    let c = FigurePreset::Fig2.config();
    assert_eq!((c.problem.rows, c.problem.cols), (30, 20));
    assert_eq!((c.problem.sigma_min, c.problem.sigma_max), (0.1, 1.0));
    assert_eq!(c.problem.consistency, ConsistencyKind::Consistent);
    assert_eq!(c.method.kind, Method::Sgd);
    assert_eq!(c.schedule, Some(StepSchedule::Harmonic { a: 0.5, b: 20.0 }));
    assert_eq!(c.run.probes, vec![1, 10, 20]);
    assert_eq!(c.run.iters, 10_000);
    assert_eq!(c.run.repetitions, 20);
}

#[test]
fn every_preset_validates_at_both_scales() {
    for p in FigurePreset::ALL {
        let c = p.config();
        c.validate().unwrap();
        assert_eq!(p.name().parse::<FigurePreset>().unwrap(), p);
        let d = c.at_scale(Scale::Desk).unwrap();
        d.validate().unwrap();
        assert!(d.problem.rows <= 1000 && d.run.iters <= 100_000, "{}", p.name());
        assert_eq!(
            (d.problem.sigma_min, d.problem.sigma_max),
            (c.problem.sigma_min, c.problem.sigma_max)
        );
    }
}

#[test]
fn large_presets() {
    let c = FigurePreset::Fig1.config();
    assert_eq!((c.problem.rows, c.problem.cols), (300, 150));
    assert_eq!(c.method.kind, Method::Kaczmarz);
    assert_eq!(c.run.probes, vec![1, 135, 150]);

    let c = FigurePreset::Fig4.config();
    assert_eq!((c.problem.rows, c.problem.cols, c.run.iters), (10_000, 3000, 1_000_000));
    assert_eq!(c.schedule, Some(StepSchedule::Harmonic { a: 0.5, b: 150.0 }));
    let d = c.at_scale(Scale::Desk).unwrap();
    assert_eq!((d.problem.rows, d.problem.cols, d.run.iters), (1000, 300, 100_000));

    let c = FigurePreset::Fig8.config();
    assert_eq!((c.problem.rows, c.problem.cols), (10_000, 2000));
    assert_eq!(
        c.schedule,
        Some(StepSchedule::Polynomial { a: 0.06, b: 50.0, gamma: 0.7 })
    );
}

#[test]
fn polynomial_presets() {
    for p in [FigurePreset::Fig5, FigurePreset::Fig6, FigurePreset::Fig7] {
        let c = p.config();
        assert_eq!(
            c.schedule,
            Some(StepSchedule::Polynomial { a: 0.2, b: 5.0, gamma: 0.8 })
        );
    }
    assert_eq!(FigurePreset::Fig6.config().problem.consistency, ConsistencyKind::Inconsistent);
    assert_eq!(FigurePreset::Fig3.config().problem.consistency, ConsistencyKind::Inconsistent);
}
