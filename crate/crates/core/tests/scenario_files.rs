use dcmg::series_csv::{header, to_csv_string};
use dcmg::{
    compute_metrics, golden, parse_scenario, run_scenario, to_toml, ExpectationTable, LossPolicy,
    PlantModel, ScenarioError,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn written_scenarios_read_back_unchanged(
        r in proptest::collection::vec(0.01..5.0f64, 3),
        est_scale in 0.0..2.0f64,
        loads in proptest::collection::vec(0.0..40.0f64, 1..5),
        kp in 0.0..20.0f64,
        ki in 0.0..1000.0f64,
        v_in in 50.0..390.0f64,
        ideal in any::<bool>(),
        hold in any::<bool>(),
        delay in 0usize..4,
    ) {
        let mut sc = golden::fig3();
        for (f, r) in sc.feeders.iter_mut().zip(&r) {
            f.r_true = *r;
            f.r_est = r * est_scale;
        }
        sc.load.steps = loads.iter().enumerate().map(|(k, &i)| (k as f64 * 0.5, i)).collect();
        sc.converters[1].voltage_gains.kp = kp;
        sc.converters[2].current_gains.ki = ki;
        sc.converters[0].params.v_in = v_in;
        if ideal {
            sc = sc.with_model(PlantModel::IdealSource);
        }
        sc.link.on_loss = if hold { LossPolicy::Hold } else { LossPolicy::Zero };
        sc.link.delay = delay;

        let text = to_toml(&sc);
        let back = parse_scenario(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, sc);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let _ = parse_scenario(&text);
        let _ = ExpectationTable::parse(&text);
    }
}

#[test]
fn bundled_scenarios_round_trip() {
    for sc in [golden::fig3(), golden::hil()] {
        assert_eq!(parse_scenario(&to_toml(&sc)).unwrap(), sc);
    }
}

#[test]
fn csv_rows_match_header_arity() {
    let sc = golden::hil();
    let csv = to_csv_string(&run_scenario(&sc).unwrap());
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), header(2));
    let width = header(2).split(',').count();
    let mut rows = 0;
    for line in lines {
        assert_eq!(line.split(',').count(), width, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4001);
}

#[test]
fn verify_outcomes_repeat() {
    let sc = golden::fig3().with_model(PlantModel::IdealSource);
    let table = golden::fig3_expectations();
    let verdicts = || {
        let ts = run_scenario(&sc).unwrap();
        let m = compute_metrics(&ts, &table.windows()).unwrap();
        table
            .evaluate(&m)
            .iter()
            .map(|o| o.pass)
            .collect::<Vec<_>>()
    };
    let first = verdicts();
    assert!(first.iter().all(|&p| p));
    assert_eq!(first, verdicts());
}

#[test]
fn omitted_gains_take_defaults() {
    let sc = parse_scenario(
        "[engine]\nduration = 1.0\n[converter.1]\n[feeder.1]\nr = 0.4\n[load]\nkind = \"constant-current\"\nsteps = [[0.0, 5.0]]\n[schedule]\nmodes = [[0.0, \"none\"]]\n",
    )
    .unwrap();
    let c = &sc.converters[0];
    assert_eq!((c.current_gains.kp, c.current_gains.ki), (1.0, 500.0));
    assert_eq!((c.voltage_gains.kp, c.voltage_gains.ki), (7.0, 100.0));
    assert_eq!((sc.secondary.gains.kp, sc.secondary.gains.ki), (1.5, 150.0));
}

#[test]
fn validation_errors_name_the_offender() {
    let text = golden::FIG3_TOML.replacen("r = 0.4", "r = -0.4", 1);
    let err = parse_scenario(&text).unwrap_err();
    assert!(matches!(err, ScenarioError::Validation(_)));
    assert!(err.to_string().contains("feeder.1"), "{err}");
}

#[test]
fn expectation_paths_beyond_the_converter_count_are_rejected() {
    let table = ExpectationTable::parse("0.2,0.5,converter.4.i.mean,1,0.1\n").unwrap();
    assert!(table.resolve(3).is_err());
    assert!(table.resolve(4).is_ok());
}
