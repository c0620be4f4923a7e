use dcmg::control::ControlMode;
use dcmg::converter::{PrimaryLoops, DEFAULT_CURRENT_GAINS, DEFAULT_VOLTAGE_GAINS, DUTY_MAX};
use dcmg::{
    control_step, decentralized_reference, golden, plant_step, run_scenario, ConverterParams,
    ConverterState, LoadProfile, PlantModel, Scenario, TimeSeries,
};
use proptest::prelude::*;

fn golden_runs() -> Vec<(Scenario, TimeSeries)> {
    [golden::fig3(), golden::hil()]
        .into_iter()
        .map(|sc| {
            let ts = run_scenario(&sc).unwrap();
            (sc, ts)
        })
        .collect()
}

#[test]
fn recorded_samples_are_ordered_and_power_consistent() {
    for (sc, ts) in golden_runs() {
        for pair in ts.samples.windows(2) {
            assert!(
                pair[1].t > pair[0].t,
                "{}: t not increasing at {}",
                sc.name,
                pair[1].t
            );
        }
        for s in &ts.samples {
            for c in &s.converters {
                let p = c.v_term * c.i_branch;
                assert!((c.p_term - p).abs() <= 1e-9 * p.abs().max(1.0));
                if !c.connected {
                    assert_eq!(c.i_branch, 0.0);
                }
            }
        }
    }
}

#[test]
fn feeder_losses_close_the_power_balance() {
    for (sc, ts) in golden_runs() {
        for w in &sc.windows {
            let inside: Vec<_> = ts.samples.iter().filter(|s| w.contains(s.t)).collect();
            let n = inside.len() as f64;
            let mean = |f: &dyn Fn(&dcmg::engine::Sample) -> f64| {
                inside.iter().map(|s| f(s)).sum::<f64>() / n
            };
            let gap = mean(&|s| s.converters.iter().map(|c| c.p_term).sum::<f64>() - s.p_load);
            let losses = mean(&|s| {
                s.converters
                    .iter()
                    .zip(&sc.feeders)
                    .map(|(c, f)| c.i_branch * c.i_branch * f.r_true)
                    .sum()
            });
            assert!(
                (gap - losses).abs() <= 0.01 * losses.abs().max(1e-9),
                "{} [{}, {}]: gap {gap} losses {losses}",
                sc.name,
                w.start,
                w.end
            );
        }
    }
}

#[test]
fn centralized_corrections_are_identical_across_converters() {
    for (sc, ts) in golden_runs() {
        for s in ts
            .samples
            .iter()
            .filter(|s| s.mode == ControlMode::Centralized)
        {
            let first = s.converters[0].v_ref;
            assert!(
                s.converters.iter().all(|c| c.v_ref == first),
                "{} t={}: references differ",
                sc.name,
                s.t
            );
        }
    }
}

#[test]
fn events_land_on_the_first_step_at_or_after_them() {
    let mut sc = Scenario::uniform(
        2,
        LoadProfile::constant_current(vec![(0.0, 5.0), (0.10001, 9.0)]),
        ControlMode::None,
        0.2,
    )
    .with_model(PlantModel::IdealSource);
    sc.decimate = sc.plant_dt;
    let ts = run_scenario(&sc).unwrap();
    let first = ts.samples.iter().find(|s| s.i_load == 9.0).unwrap();
    assert!((first.t - 0.10002).abs() < 1e-12, "{}", first.t);

    // coarser than the event spacing: neither step may be skipped
    let mut sc = Scenario::uniform(
        1,
        LoadProfile::constant_current(vec![(0.0, 1.0), (0.050001, 2.0), (0.050002, 3.0)]),
        ControlMode::None,
        0.1,
    );
    sc.decimate = sc.plant_dt;
    let ts = run_scenario(&sc).unwrap();
    assert!(ts.samples.iter().any(|s| s.i_load == 3.0));
    assert_eq!(ts.samples.last().unwrap().i_load, 3.0);
}

fn settled_error(mode: ControlMode, load: f64, model: PlantModel) -> f64 {
    let sc = Scenario::uniform(
        3,
        LoadProfile::constant_current(vec![(0.0, load)]),
        mode,
        0.5,
    )
    .with_model(model);
    let ts = run_scenario(&sc).unwrap();
    ts.samples
        .iter()
        .filter(|s| s.t >= 0.3)
        .map(|s| (s.v_pcc - 400.0).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn secondary_removes_steady_error(load in 0.0..30.0f64) {
        let err = settled_error(ControlMode::Centralized, load, PlantModel::AveragedBoost);
        prop_assert!(err <= 0.1, "load {load}: {err}");
    }

    #[test]
    fn tracking_holds_up_to_rated_current(i_out in 0.0..12.5f64, v_ref in 396.0..404.0f64) {
        for model in [PlantModel::AveragedBoost, PlantModel::IdealSource] {
            let p = ConverterParams { model, ..ConverterParams::default() };
            let mut loops = PrimaryLoops::new(&p, DEFAULT_VOLTAGE_GAINS, DEFAULT_CURRENT_GAINS);
            let mut s = ConverterState::precharged(&p, 400.0);
            let ts = p.control_period();
            for _ in 0..5000 {
                let out = control_step(&mut s, &p, &mut loops, v_ref, ts).unwrap();
                prop_assert!((0.0..=DUTY_MAX).contains(&out.duty));
                prop_assert!(out.i_ref.abs() <= p.current_ref_limit());
                for _ in 0..10 {
                    s = plant_step(&s, &p, i_out, ts / 10.0);
                }
            }
            prop_assert!((s.v_out - v_ref).abs() < 0.5, "{model}: {} vs {v_ref}", s.v_out);
            if model == PlantModel::AveragedBoost && i_out > 0.5 {
                let p_in = p.v_in * s.i_ind;
                let p_out = s.v_out * i_out;
                prop_assert!((p_in - p_out).abs() <= 0.01 * p_out);
            }
        }
    }
}

#[test]
fn compensation_uses_only_local_measurements() {
    let sc = golden::fig3();
    let ts = run_scenario(&sc).unwrap();
    for s in ts
        .samples
        .iter()
        .filter(|s| s.mode == ControlMode::Decentralized)
    {
        for (c, f) in s.converters.iter().zip(&sc.feeders) {
            let local =
                decentralized_reference(sc.v_dc_nominal, c.i_branch, f.r_est) - sc.v_dc_nominal;
            assert!(
                (c.comp - local).abs() < 1e-9,
                "t={}: {} vs {local}",
                s.t,
                c.comp
            );
        }
    }
}

#[test]
fn mismatch_at_unit_ratio_is_exact() {
    let sc = Scenario::uniform(
        2,
        LoadProfile::constant_current(vec![(0.0, 20.0)]),
        ControlMode::Decentralized,
        1.0,
    )
    .with_model(PlantModel::IdealSource);
    let v = run_scenario(&sc).unwrap().samples.last().unwrap().v_pcc;
    assert!((v - 400.0).abs() < 1e-6, "{v}");
}
