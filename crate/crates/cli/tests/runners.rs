use ecmimo::rng::stream;
use ecmimo::*;
use ecmimo_cli::*;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn col(t: &Table, name: &str) -> Vec<String> {
    let c = t.column(name).unwrap();
    t.rows.iter().map(|r| r[c].clone()).collect()
}

fn fcol(t: &Table, name: &str) -> Vec<f64> {
    col(t, name).iter().map(|s| s.parse().unwrap()).collect()
}

fn with_workers<R: Send>(w: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(f)
}

const RATE: &str = r#"
experiment = "rate-sweep"
system.m = 4
system.r = 4
snr.grid_db = [0.0, 8.0]
detectors = ["exact:budget=100", "mmse", "ec-sl"]
run.samples = 300
run.channels = 3
run.seed = 5
"#;

#[test]
fn rate_sweep_omits_over_budget_exact_rows() {
    let t = run_rate_sweep(&cfg(RATE)).unwrap();
    assert_eq!(t.columns, ["snr_db", "detector", "avg_mi", "stderr", "capacity"]);
    assert_eq!(col(&t, "detector"), ["mmse", "ec-sl", "mmse", "ec-sl"]);
    let t = run_rate_sweep(&cfg(&RATE.replace("budget=100", "budget=256"))).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert!(fcol(&t, "avg_mi").iter().all(|&x| (0.0..=2.0).contains(&x)));
}

#[test]
fn rate_sweep_capacity_is_the_realization_average() {
    let c = cfg(RATE);
    let t = run_rate_sweep(&c).unwrap();
    for (row, snr) in [(0, 0.0), (2, 8.0)] {
        let s2 = snr_to_sigma_w2(snr, 4, 4, 1.0).unwrap();
        let want: f64 = (0..3u64)
            .map(|k| {
                let ch = ComplexChannel::<f64>::sample(4, 4, s2, &mut child_rng(5, &[stream::CHANNEL, k])).unwrap();
                capacity_per_antenna(&ch, 10f64.powf(snr / 10.0)).unwrap()
            })
            .sum::<f64>()
            / 3.0;
        assert!((fcol(&t, "capacity")[row] - want).abs() < 1e-12);
    }
}

#[test]
fn rate_sweep_is_deterministic_across_worker_counts() {
    let c = cfg(RATE);
    let a = with_workers(1, || run_rate_sweep(&c).unwrap());
    let b = with_workers(3, || run_rate_sweep(&c).unwrap());
    assert_eq!(a, b);
    let mut other = c.clone();
    other.run.seed = 6;
    assert_ne!(run_rate_sweep(&other).unwrap().rows, a.rows);
}

const CONVERGE: &str = r#"
experiment = "convergence-trace"
snr.grid_db = [6.0]
detectors = ["ec-sl:beta=0.2,iters=30,floor=false", "ec-sl:beta=0.95,iters=30,floor=false", "ec-sl:beta=0.95,iters=30", "ec-dl:iters=30"]
run.instances = 200
"#;

#[test]
fn convergence_trace_shape_and_shared_start() {
    let t = run_convergence_trace(&cfg(CONVERGE)).unwrap();
    assert_eq!(t.columns, ["snr_db", "detector", "iter", "delta_u", "delta_u2"]);
    assert_eq!(t.rows.len(), 4 * 31);
    let (du, iters, dets) = (fcol(&t, "delta_u"), col(&t, "iter"), col(&t, "detector"));
    let starts: Vec<f64> = (0..t.rows.len()).filter(|&i| iters[i] == "0" && dets[i].starts_with("ec-sl")).map(|i| du[i]).collect();
    assert_eq!(starts.len(), 3);
    assert!(starts.iter().all(|&x| x == starts[0]));
    assert!(du.iter().all(|&x| x >= 0.0));
}

#[test]
fn slow_damping_trace_decreases_after_iteration_three() {
    let t = run_convergence_trace(&cfg(CONVERGE)).unwrap();
    let du = fcol(&t, "delta_u");
    let slow = &du[..31];
    for k in 3..30 {
        assert!(slow[k + 1] <= 1.1 * slow[k], "iteration {k}: {} -> {}", slow[k], slow[k + 1]);
    }
    assert!(slow[30] < slow[3]);
}

const BER: &str = r#"
experiment = "coded-ber"
system.m = 2
system.r = 2
snr.grid_db = [2.0, 5.0]
detectors = ["mmse", "ec-sl"]
run.words = 40
code.n = 120
"#;

#[test]
fn coded_ber_columns_and_ranges() {
    let c = cfg(BER);
    let t = run_coded_ber(&c).unwrap();
    assert_eq!(t.columns, ["snr_c_db", "detector", "ber", "word_count", "wilson_low", "wilson_high"]);
    let code = build_regular_ldpc(120, 3, 6, 1).unwrap();
    let snr_c = fcol(&t, "snr_c_db");
    for (i, snr) in [2.0, 5.0].into_iter().enumerate() {
        let want = coded_snr_correction(snr, code.rate()).unwrap();
        assert_eq!(snr_c[2 * i], want);
        assert_eq!(snr_c[2 * i + 1], want);
    }
    for ((b, lo), hi) in fcol(&t, "ber").iter().zip(fcol(&t, "wilson_low")).zip(fcol(&t, "wilson_high")) {
        assert!((0.0..=0.5 + 0.05).contains(b));
        assert!(lo <= *b && *b <= hi);
    }
    assert!(col(&t, "word_count").iter().all(|w| w == "40"));
    assert_eq!(with_workers(2, || run_coded_ber(&c).unwrap()), t);
}

#[test]
fn energy_trace_columns_and_double_loop_progress() {
    let text = r#"
experiment = "free-energy-trace"
snr.grid_db = [6.0]
detectors = ["ec-dl:iters=20"]
run.instances = 100
"#;
    let t = run_free_energy_trace(&cfg(text)).unwrap();
    assert_eq!(t.columns, ["snr_db", "detector", "instance", "iter", "logzec", "grad_q_norm", "grad_s_norm"]);
    let (inst, iter) = (col(&t, "instance"), col(&t, "iter"));
    let (gq, gs) = (fcol(&t, "grad_q_norm"), fcol(&t, "grad_s_norm"));
    let norm = |i: usize| (gq[i] * gq[i] + gs[i] * gs[i]).sqrt();
    let mut improved = 0;
    for k in 0..100 {
        let rows: Vec<usize> = (0..t.rows.len()).filter(|&i| inst[i] == k.to_string()).collect();
        let first = rows.iter().copied().find(|&i| iter[i] == "1").unwrap();
        let last = *rows.last().unwrap();
        improved += usize::from(norm(last) < norm(first));
    }
    assert!(improved >= 90, "{improved}/100");
}

#[test]
fn converged_single_loop_has_zero_gradients() {
    let text = r#"
experiment = "free-energy-trace"
snr.grid_db = [-3.0]
detectors = ["ec-sl:beta=0.5,iters=400,floor=false,tol=1e-13"]
run.instances = 5
"#;
    let t = run_free_energy_trace(&cfg(text)).unwrap();
    let (inst, gq, gs) = (col(&t, "instance"), fcol(&t, "grad_q_norm"), fcol(&t, "grad_s_norm"));
    for k in 0..5 {
        let last = (0..t.rows.len()).rev().find(|&i| inst[i] == k.to_string()).unwrap();
        assert!(gq[last] < 1e-6 && gs[last] < 1e-6, "instance {k}: {} {}", gq[last], gs[last]);
    }
    assert!(fcol(&t, "logzec").iter().all(|x| x.is_finite()));
}
