use uma_core::alternating::{Blocks, OptimizeOptions};
use uma_core::bench::*;
use uma_core::scenario::{beamforming_gain, Scenario};

fn reference() -> Scenario {
    Scenario::default()
}

#[test]
fn baselines_keep_their_fixed_variables() {
    let s = reference();
    let fpa = run_scheme(&s, Scheme::Fpa, &BenchOptions::default()).unwrap();
    assert_eq!(fpa.config.height, s.min_height);
    let x0 = uma_core::alternating::init_apv(&s).unwrap();
    assert_eq!(fpa.config.apv, x0);

    let opts = BenchOptions {
        fixed_height: Some(12.5),
        ..Default::default()
    };
    let ma = run_scheme(&s, Scheme::Ma, &opts).unwrap();
    assert_eq!(ma.config.height, 12.5);
}

#[test]
fn stored_gains_match_config() {
    let s = reference();
    let r = run_scheme(&s, Scheme::UmaAh, &BenchOptions::default()).unwrap();
    for (g, a) in r.su_gains.iter().zip(s.su_angles(r.config.height).unwrap()) {
        let again = beamforming_gain(&r.config.awv, &r.config.apv, a, s.wavelength).unwrap();
        assert!((g - again).abs() <= 1e-9);
    }
    let min = r.su_gains.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - r.delta).abs() <= 1e-9);
}

#[test]
fn empty_block_set_returns_initial_gain() {
    let s = reference();
    let opts = BenchOptions {
        optimize: OptimizeOptions {
            blocks: Blocks::NONE,
            ..Default::default()
        },
        ..Default::default()
    };
    // scheme flags take precedence over the caller's block set
    let r = run_scheme(&s, Scheme::Fpa, &opts).unwrap();
    assert!(r.trace.records.len() > 1);
    let start = uma_core::alternating::initial_config(
        &s,
        &scheme_options(&s, Scheme::Fpa, &opts).unwrap(),
    )
    .unwrap();
    assert_eq!(r.trace.records[0].delta, s.min_su_gain(&start).unwrap());
}

#[test]
fn pattern_peaks_match_user_gains() {
    let s = reference();
    let angles = s.su_angles(s.min_height).unwrap();
    let out = beam_pattern_experiment(&s, &[Scheme::Fpa, Scheme::Ma], &angles, &BenchOptions::default())
        .unwrap();
    for p in &out {
        for (g, su) in p.gains.iter().zip(&p.result.su_gains) {
            assert!((g - su).abs() <= 1e-12);
        }
        assert!(p.result.pu_gains.iter().all(|&g| g <= s.interference_cap + 1e-3));
    }
}

#[test]
fn sweep_single_point_and_errors() {
    let s = reference();
    let c = height_sweep(&s, Scheme::Fpa, &[11.0], &BenchOptions::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].height, 11.0);
    assert!(height_sweep(&s, Scheme::Uma, &[11.0], &BenchOptions::default()).is_err());
    assert!(height_sweep(&s, Scheme::Ma, &[], &BenchOptions::default()).is_err());
    assert!(height_sweep(&s, Scheme::Ma, &[9.0], &BenchOptions::default()).is_err());
}

#[test]
fn traces_cover_every_pair_in_order() {
    let s = reference();
    let opts = BenchOptions {
        optimize: OptimizeOptions {
            max_outer_iters: 5,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = iteration_trace_experiment(&s, &[Scheme::UmaAh, Scheme::Fpa], &[0.05, 0.1], &opts)
        .unwrap();
    let keys: Vec<(Scheme, f64)> = out.iter().map(|r| (r.scheme, r.eta)).collect();
    assert_eq!(
        keys,
        vec![
            (Scheme::UmaAh, 0.05),
            (Scheme::UmaAh, 0.1),
            (Scheme::Fpa, 0.05),
            (Scheme::Fpa, 0.1)
        ]
    );
    for r in &out {
        let d = r.trace.deltas();
        assert!(d.windows(2).all(|p| p[1] >= p[0] - 1e-9));
        assert!(r.pu_gains.iter().all(|&g| g <= r.eta + 1e-6));
    }
}

#[test]
fn multistart_is_seeded() {
    let s = reference();
    let opts = BenchOptions {
        optimize: OptimizeOptions {
            max_outer_iters: 5,
            ..Default::default()
        },
        ..Default::default()
    };
    let a = multistart(&s, Scheme::UmaAh, &opts, &[1, 2, 3]).unwrap();
    let b = multistart(&s, Scheme::UmaAh, &opts, &[1, 2, 3]).unwrap();
    assert_eq!(a, b);
    for seed in [1, 2, 3] {
        let one = multistart(&s, Scheme::UmaAh, &opts, &[seed]).unwrap();
        assert!(one.delta <= a.delta);
    }
    assert!(multistart(&s, Scheme::UmaAh, &opts, &[]).is_err());
}
