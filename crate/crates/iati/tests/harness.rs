use iati::harness::{
    apply_axis, read_csv, run_experiment_with_workers, summarize, sweep, write_csv,
    write_sweep_csv, SweepAxis,
};
use iati::ExperimentConfig;
use iati_core::{decode_only, run_scheme, ChannelModel};

fn config(n: usize, k: usize, channel: &str, trials: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(n, k, channel.parse().unwrap());
    c.trials = trials;
    c.seed = 17;
    c
}

fn values(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[test]
fn single_noiseless_trial() {
    let report = run_experiment_with_workers(&config(4, 1, "noiseless", 1), 1).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!((report.rows[0].fp, report.rows[0].fn_), (0, 0));
}

#[test]
fn worker_count_does_not_change_rows() {
    let c = config(2048, 8, "bsc:0.1", 12);
    let one = run_experiment_with_workers(&c, 1).unwrap();
    let three = run_experiment_with_workers(&c, 3).unwrap();
    assert_eq!(one, three);
}

#[test]
fn summary_is_recomputable_from_csv() {
    let c = config(2048, 8, "z:0.1", 10);
    let report = run_experiment_with_workers(&c, 2).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &report.rows).unwrap();
    let rows = read_csv(buf.as_slice()).unwrap();
    assert_eq!(rows, report.rows);
    assert_eq!(
        summarize(&rows, c.channel.capacity().unwrap()),
        report.summary
    );
    let ratio = report.summary.ratio.unwrap();
    assert!(ratio > 1.0);
}

#[test]
fn trial_rows_match_direct_runs() {
    let c = config(1024, 4, "bsc:0.05", 3);
    let report = run_experiment_with_workers(&c, 1).unwrap();
    for row in &report.rows {
        let seed = iati_core::seeding::trial_seed(c.seed, row.trial);
        let (r, t) = run_scheme(c.n, c.k, &c.channel, &c.scheme(), seed).unwrap();
        assert_eq!(row.tests_total, r.total_tests);
        assert_eq!(decode_only(&t).unwrap(), r.estimate);
    }
}

#[test]
fn errors_grow_with_noise() {
    let template = config(4096, 16, "bsc:0.05", 30);
    let points = sweep(&template, SweepAxis::P, &values(&["0", "0.05", "0.1"])).unwrap();
    assert_eq!(points.len(), 3);
    for w in points.windows(2) {
        let (a, b) = (
            &w[0].report.summary.mistakes_per_k,
            &w[1].report.summary.mistakes_per_k,
        );
        assert!(b.mean + 2.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() >= a.mean);
    }
}

#[test]
fn identification_tests_grow_with_epsilon() {
    let template = config(4096, 16, "bsc:0.05", 5);
    let points = sweep(
        &template,
        SweepAxis::Epsilon,
        &values(&["0.1", "0.5", "1.0"]),
    )
    .unwrap();
    // isolation is unaffected by epsilon, so exact teams and their count match
    for w in points.windows(2) {
        for (a, b) in w[0].report.rows.iter().zip(&w[1].report.rows) {
            assert_eq!(a.tests_isolation, b.tests_isolation);
            assert!(b.tests_identification > a.tests_identification);
        }
    }
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, SweepAxis::Epsilon, &points).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().nth(1).unwrap().starts_with("epsilon,0.1,0,"));
}

#[test]
fn sweep_rejects_bad_input() {
    let template = config(1024, 4, "bsc:0.05", 1);
    assert!(sweep(&template, SweepAxis::P, &[]).is_err());
    assert!(apply_axis(&template, SweepAxis::P, "0.7").is_err());
    assert!(apply_axis(&template, SweepAxis::K, "2048").is_err());
    assert!(apply_axis(&template, SweepAxis::F, "x").is_err());
    let tabulated = ExperimentConfig::new(
        64,
        2,
        ChannelModel::tabulated(vec![0.9, 0.1], vec![0.2, 0.8]).unwrap(),
    );
    assert!(apply_axis(&tabulated, SweepAxis::P, "0.1").is_err());
    let c = apply_axis(&template, SweepAxis::C, "2").unwrap();
    assert_eq!(
        c.block_length,
        iati_core::BlockLengthPolicy::FullLog { c: 2.0 }
    );
}
