use fdp_envelopes::harness::io::{emit_csv, load_pvalues_csv, write_batch_csv};
use fdp_envelopes::harness::{consistency_curve, parse_methods, run_experiment, ExperimentConfig, LordConfig, ModelConfig, Setting};
use fdp_envelopes::models::true_fdp;
use fdp_envelopes::topk::PValueBatch;
use fdp_envelopes::FdpError;

fn dense(m_grid: Vec<usize>, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::Topk,
        model: ModelConfig::dense_gaussian(0.5, 1.5),
        m_grid,
        alpha_grid: vec![0.2],
        delta: 0.25,
        replications: reps,
        methods: parse_methods("simes,dkw,wellner").unwrap(),
        seed: 7,
        lord: LordConfig::default(),
        interpolation_max_m: 100_000,
        timing: false,
    }
}

#[test]
fn simes_median_is_alpha_over_delta() {
    let rows = run_experiment(&dense(vec![100, 1000], 200)).unwrap();
    for r in rows.iter().filter(|r| r.method == "simes") {
        assert_eq!(r.median, 0.8);
        assert_eq!((r.q25, r.q75), (0.8, 0.8));
    }
    assert!(rows.iter().all(|r| r.q25 <= r.median && r.median <= r.q75));
}

#[test]
fn single_replication_is_deterministic() {
    let mut cfg = dense(vec![300], 1);
    cfg.methods = parse_methods("kr").unwrap();
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a, run_experiment(&cfg).unwrap());
}

#[test]
fn csv_output_identical_across_thread_counts() {
    let cfg = dense(vec![200, 400], 50);
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rows = pool.install(|| run_experiment(&cfg)).unwrap();
        let mut buf = Vec::new();
        emit_csv(&rows, &mut buf).unwrap();
        buf
    };
    let one = render(1);
    assert_eq!(one, render(3));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("m,alpha,method,q25,median,q75,coverage_rate,mean_rejections\n"));
}

#[test]
fn timing_adds_wall_time_column() {
    let mut cfg = dense(vec![100], 5);
    cfg.timing = true;
    let rows = run_experiment(&cfg).unwrap();
    let mut buf = Vec::new();
    emit_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().lines().next().unwrap().ends_with(",wall_time"));
}

#[test]
fn simes_consistency_series_is_flat() {
    let rows = run_experiment(&dense(vec![100, 200, 400], 20)).unwrap();
    let curves = consistency_curve(&rows).unwrap();
    let simes = curves.iter().find(|c| c.method == "simes").unwrap();
    assert!(simes.points.iter().all(|&(_, g)| (g - 0.6).abs() < 1e-12));
    assert!(consistency_curve(&rows[..2]).is_err());
}

#[test]
fn file_roundtrip_and_missing_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let batch = PValueBatch::new(vec![0.01, 0.2, 0.73], None).unwrap();
    write_batch_csv(&batch, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_pvalues_csv(&path).unwrap();
    assert_eq!(back, batch);
    let order = back.sorted().perm;
    assert!(matches!(true_fdp(&order, &[1, 2], back.labels()), Err(FdpError::MissingLabels)));
}

#[test]
fn out_of_range_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "index,pvalue\n0,0.3\n1,1.2\n").unwrap();
    match load_pvalues_csv(&path) {
        Err(FdpError::Parse { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("1.2"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = dense(vec![], 10);
    assert!(matches!(run_experiment(&cfg), Err(FdpError::Config(_))));
    cfg.m_grid = vec![10];
    cfg.replications = 0;
    assert!(run_experiment(&cfg).is_err());
}
