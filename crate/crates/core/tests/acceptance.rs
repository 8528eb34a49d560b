//! Acceptance report: one PASS/FAIL line per criterion. Always exits 0 so
//! the report is produced in full; failures are read from the output.

mod common;

use common::*;
use ecmimo::*;
use rand::Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: &str) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {id} {what}", if ok { "PASS" } else { "FAIL" });
    }

    fn info(&self, id: &str, what: &str) {
        println!("INFO {id} {what}");
    }
}

fn oracle_equivalence(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let m = rng.gen_range(1..=3);
        let r = rng.gen_range(1..=3);
        let order = if rng.gen_bool(0.5) { 4 } else { 16 };
        let (ch, cst, _) = instance(1000 + k, m, r, order, rng.gen_range(-5.0..25.0));
        let (naive, _) = naive_symbol_marginals(&ch, &cst);
        let out = exact_detector(&ch, &cst).unwrap();
        for (a, b) in out.symbol_pmf.iter().flatten().zip(naive.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    let el = t.elapsed();
    rep.line("1", worst < 1e-12 && el < Duration::from_secs(60), &format!("exact vs naive enumerator, 100 instances: max |diff| = {worst:.2e} (< 1e-12), {el:.1?}"));
}

fn gradient_identities(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = rng_from_seed(2);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let (ch, cst, _) = instance(2000 + k, 4, 4, 4, rng.gen_range(0.0..15.0));
        let lik = GaussianLikelihood::new(&ch).unwrap();
        let a = cst.real_alphabet();
        let pq = random_params(&mut rng, 8, 0.5..3.0);
        let fd = central_differences(&pq, 1e-5, |p| lik.log_z(p, Normalization::Reduced).unwrap());
        worst = worst.max(max_rel_err(&fd, &lik.marginals(&pq).unwrap().moments.expected_statistics(), 1e-3));
        let pr = random_params(&mut rng, 8, -2.0..4.0);
        let fd = central_differences(&pr, 1e-5, |p| log_zr(a, p));
        worst = worst.max(max_rel_err(&fd, &r_moments(a, &pr).1.expected_statistics(), 1e-3));
        let ps = random_params(&mut rng, 8, 0.5..3.0);
        let fd = central_differences(&ps, 1e-5, |p| log_zs(p).unwrap());
        worst = worst.max(max_rel_err(&fd, &s_moments(&ps).unwrap().expected_statistics(), 1e-3));
    }
    let el = t.elapsed();
    rep.line("2", worst < 1e-6 && el < Duration::from_secs(60), &format!("log Z_q/r/s gradients vs central differences, 50 instances: max rel err = {worst:.2e} (< 1e-6), {el:.1?}"));
}

fn initialization_identity(rep: &mut Report) {
    let cfg = EcConfig { max_iters: 0, ..EcConfig::recommended() };
    let same = (0..100).filter(|&k| {
        let (ch, cst, _) = instance(3000 + k, 4, 4, 16, 8.0);
        let a = mmse_detector(&ch, &cst).unwrap();
        let b = ec_single_loop(&ch, &cst, &cfg).unwrap();
        a.real_pmf == b.real_pmf && a.symbol_pmf == b.symbol_pmf && a.bit_llrs == b.bit_llrs
    });
    let n = same.count();
    rep.line("3", n == 100, &format!("zero-iteration single loop bit-identical to MMSE: {n}/100"));
}

fn mean_trace(n: u64, len: usize, run: impl Fn(&RealChannel64, &Constellation64) -> SoftOutput64 + Sync) -> Vec<f64> {
    let traces: Vec<Vec<DeltaPoint<f64>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (ch, cst, _) = instance(4000 + k, 5, 5, 4, 6.0);
            run(&ch, &cst).diagnostics.trace
        })
        .collect();
    let mut dt = DeltaTrace::new(len);
    for tr in &traces {
        dt.add(tr);
    }
    dt.means().0
}

fn convergence(rep: &mut Report) {
    let t = Instant::now();
    let n = 2000;
    let sl = |beta, iters, floor| {
        let cfg = EcConfig::single_loop(beta, iters, floor);
        mean_trace(n, iters + 1, move |ch, cst| ec_single_loop(ch, cst, &cfg).unwrap())
    };
    let dl = |iters, tol: f64| {
        let cfg = EcConfig { max_iters: iters, dl_grad_tol: tol, ..EcConfig::double_loop() };
        mean_trace(n, iters + 1, move |ch, cst| ec_double_loop(ch, cst, &cfg).unwrap())
    };
    let floor = sl(0.95, 10, true)[10];
    let plain = sl(0.95, 50, false);
    let slow = sl(0.2, 50, false)[50];
    rep.line("4a", floor < plain[10], &format!("mean Δ_u after 10 iterations, β=0.95: floor {floor:.4} < no floor {:.4}", plain[10]));
    rep.line("4b", slow < 1e-2, &format!("mean Δ_u after 50 iterations, β=0.2: {slow:.2e} (< 1e-2)"));
    let d20 = dl(20, 0.1)[20];
    rep.line("4c", d20 <= 2.0 * slow, &format!("double loop, 20 outer iterations, gradient tolerance 0.1: mean Δ_u {d20:.2e} (<= {:.2e})", 2.0 * slow));
    let d20_tight = dl(20, 0.01)[20];
    rep.info("4c", &format!("double loop with gradient tolerance 0.01: mean Δ_u {d20_tight:.2e}"));
    let d50 = dl(50, 0.1)[50];
    rep.info("4", &format!("double loop, 50 outer iterations: mean Δ_u {d50:.2e}; single loop β=0.95 no floor at 50: {:.2e}", plain[50]));
    let el = t.elapsed();
    rep.line("4t", el < Duration::from_secs(1800), &format!("convergence study over {n} instances took {el:.1?} (< 30 min)"));
}

/// Mean MI over `channels` realizations with `per_channel` samples each;
/// realization `k` is shared across detectors.
fn average_mi(snr: f64, det: &dyn Detector<f64>, channels: u64, per_channel: usize) -> f64 {
    let cst = Constellation64::new(4, 1.0).unwrap();
    let s2 = snr_to_sigma_w2(snr, 5, 4, 1.0).unwrap();
    let total: f64 = (0..channels)
        .map(|k| {
            let ch = sample_channel::<f64>(5, 5, s2, derive_seed(5, &[snr.to_bits(), k])).unwrap();
            estimate_mi(&ch, &cst, det, per_channel, derive_seed(6, &[k])).unwrap().average_mi
        })
        .sum();
    total / channels as f64
}

fn mutual_information(rep: &mut Report) {
    let t = Instant::now();
    let ec = EcSingleLoop::new(EcConfig::recommended());
    let (exact, mmse) = (ExactDetector::default(), MmseDetector::default());
    let mut worst: f64 = 0.0;
    let mut gap6 = 0.0;
    let mut detail = String::new();
    for snr in [2.0, 6.0, 10.0] {
        let (e, x, m) = (average_mi(snr, &ec, 20, 5000), average_mi(snr, &exact, 20, 5000), average_mi(snr, &mmse, 20, 5000));
        worst = worst.max((e - x).abs());
        if snr == 6.0 {
            gap6 = x - m;
        }
        detail += &format!(" {snr} dB: ec {e:.4} exact {x:.4} mmse {m:.4};");
    }
    let el = t.elapsed();
    rep.info("5", &format!("5x5 QPSK, 20 channels x 5000 samples per point:{detail} {el:.1?}"));
    rep.line("5a", worst < 0.03, &format!("max |MI(EC) - MI(exact)| over 2/6/10 dB = {worst:.4} (< 0.03)"));
    rep.line("5b", gap6 > 0.05, &format!("MI(exact) - MI(MMSE) at 6 dB = {gap6:.4} (> 0.05)"));
    rep.line("5t", el < Duration::from_secs(1800), &format!("MI study took {el:.1?} (< 30 min)"));

    let variants = [
        ("β=0.95 floor skip", EcConfig { skip_negative_precision: true, ..EcConfig::recommended() }),
        ("β=0.95 no-floor skip", EcConfig { skip_negative_precision: true, variance_floor_enabled: false, ..EcConfig::recommended() }),
    ];
    for (name, cfg) in variants {
        let det = EcSingleLoop::new(cfg);
        let vals: Vec<String> = [10.0, 20.0].iter().map(|&snr| format!("{snr} dB {:.4}", average_mi(snr, &det, 20, 5000))).collect();
        rep.info("5", &format!("EC variant {name}, 10 iterations: {}", vals.join(", ")));
    }

    let dets: [(&str, &dyn Detector<f64>); 3] = [("exact", &exact), ("ec", &ec), ("mmse", &mmse)];
    for (name, d) in dets {
        let v = average_mi(20.0, d, 20, 5000);
        rep.line("6", (v - 2.0).abs() <= 0.01, &format!("{name} MI at 20 dB = {v:.4} (2.00 ± 0.01)"));
    }
}

fn coded_ber(rep: &mut Report) {
    let t = Instant::now();
    let code = build_regular_ldpc(1024, 3, 6, 1).unwrap();
    let cst = Constellation64::new(4, 1.0).unwrap();
    let shift = 10.0 * code.rate().log10();
    let ec = EcSingleLoop::new(EcConfig::recommended());
    let mut ordered = true;
    let mut strict = false;
    for (i, snr_c) in [0.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
        let run = CodedBerRun::new(5, 5, snr_c - shift, 2000, 7);
        let a = coded_ber_run(&run, &cst, &ec, &code).unwrap();
        let b = coded_ber_run(&run, &cst, &MmseDetector::default(), &code).unwrap();
        ordered &= a.ber <= b.ber;
        if (1..=2).contains(&i) && a.wilson_high < b.wilson_low {
            strict = true;
        }
        rep.info(
            "7",
            &format!("SNR_c {:.2} dB: ec {:.3e} [{:.3e}, {:.3e}]  mmse {:.3e} [{:.3e}, {:.3e}]", a.snr_c_db, a.ber, a.wilson_low, a.wilson_high, b.ber, b.wilson_low, b.wilson_high),
        );
    }
    let el = t.elapsed();
    rep.line("7a", ordered, "coded BER(EC) <= BER(MMSE) at every SNR_c point, n=1024 (3,6), 2000 words");
    rep.line("7b", strict, "strict improvement at an interior point with disjoint 95% Wilson intervals");
    rep.line("7t", el < Duration::from_secs(7200), &format!("coded study took {el:.1?} (< 2 h)"));
}

fn scale_robustness(rep: &mut Report) {
    let cfg = EcConfig { max_iters: 10, convergence_tol: 0.0, ..EcConfig::recommended() };
    let outs: Vec<SoftOutput64> = (0..20).into_par_iter().map(|k| ec_single_loop(&instance(8000 + k, 16, 16, 64, 21.0).0, &Constellation64::new(64, 1.0).unwrap(), &cfg).unwrap()).collect();
    let finite = outs.iter().all(|o| {
        o.real_pmf.iter().flatten().chain(o.symbol_pmf.iter().flatten()).chain(&o.bit_llrs).all(|x| x.is_finite())
            && o.diagnostics.trace.iter().all(|p| p.delta_u.is_finite() && p.delta_u2.is_finite())
    });
    let mut dt = DeltaTrace::new(11);
    outs.iter().for_each(|o| dt.add(&o.diagnostics.trace));
    let (du, du2) = dt.means();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    rep.info("8", &format!("16x16 64-QAM at 21 dB, mean Δ_u per iteration: {}", fmt(&du)));
    rep.info("8", &format!("mean Δ_u² per iteration: {}", fmt(&du2)));
    rep.line("8", finite, "20 instances x 10 iterations, all outputs and traces finite");
}

fn invariants(rep: &mut Report) {
    let mut rng = rng_from_seed(9);
    // pmf normalization
    let cst = Constellation64::new(256, 1.0).unwrap();
    let worst = (0..200)
        .map(|_| {
            let p = random_params(&mut rng, 4, -40.0..40.0);
            r_moments(cst.real_alphabet(), &p).0.pmf.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    rep.line("9", worst < 1e-12, &format!("r pmf normalization: max row error {worst:.1e}"));

    // moment inversion round trip
    let worst = (0..200)
        .map(|_| {
            let p = random_params(&mut rng, 6, 0.05..50.0);
            let back = s_params_from_moments(&s_moments(&p).unwrap()).unwrap();
            max_rel_err(&back, &p, 1.0)
        })
        .fold(0.0, f64::max);
    rep.line("9", worst < 1e-12, &format!("s moment inversion round trip: max rel err {worst:.1e}"));

    // permutation equivariance (antennas 0 and 2 swapped)
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let cst = Constellation64::new(16, 1.0).unwrap();
        let ch = sample_channel::<f64>(3, 3, snr_to_sigma_w2(12.0, 3, 16, 1.0).unwrap(), 9000 + k).unwrap();
        let mut real = ch.to_real();
        let mut r2 = rng_from_seed(k);
        let sent: Vec<usize> = (0..3).map(|_| r2.gen_range(0..16)).collect();
        real.transmit_and_store(&cst.real_vector(&sent), cst.real_alphabet(), &mut r2).unwrap();
        let perm = [2, 1, 0];
        let h = (0..3).flat_map(|i| perm.iter().map(move |&j| (i, j))).map(|(i, j)| ch.entry(i, j)).collect();
        let swapped = ComplexChannel::new(3, 3, h, ch.sigma_w2()).unwrap().to_real().with_observation(real.observation().unwrap().to_vec()).unwrap();
        for d in [&ExactDetector::default() as &dyn Detector<f64>, &MmseDetector::default(), &EcSingleLoop::new(EcConfig::recommended())] {
            let (a, b) = (d.detect(&real, &cst).unwrap(), d.detect(&swapped, &cst).unwrap());
            for (new, &old) in perm.iter().enumerate() {
                for (x, y) in b.symbol_pmf[new].iter().zip(&a.symbol_pmf[old]) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    rep.line("9", worst < 1e-8, &format!("permutation equivariance of exact/MMSE/EC: max diff {worst:.1e}"));

    // fixed-point consistency
    let (ch, cst, _) = instance(9100, 2, 3, 4, 0.0);
    let lik = GaussianLikelihood::new(&ch).unwrap();
    let a = cst.real_alphabet();
    let step = |pq: &NaturalParams64, beta: f64| {
        let qm = lik.marginals(pq).unwrap();
        let pr = s_params_from_mean_var(&qm.moments.mean, &qm.variance).unwrap().sub(pq);
        let (_, rm) = r_moments(a, &pr);
        let ps = s_params_from_mean_var(&rm.mean, rm.variances()).unwrap();
        (ps.sub(&pr).damped(pq, beta), delta_metrics(&qm.moments, &rm).unwrap())
    };
    let mut pq = NaturalParams::constant(4, 0.0, 2.0);
    for _ in 0..500 {
        pq = step(&pq, 0.5).0;
    }
    let worst = [0.1, 0.5, 0.95, 1.0].iter().map(|&b| max_rel_err(&step(&pq, b).0, &pq, 1.0)).fold(0.0, f64::max);
    let (du, _) = step(&pq, 1.0).1;
    rep.line("9", du < 1e-10 && worst < 1e-8, &format!("matched point is fixed under any damping: Δ_u {du:.1e}, max change {worst:.1e}"));

    // LLR oracle
    let cst = Constellation64::new(64, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (site, _) = r_moments(cst.real_alphabet(), &random_params(&mut rng, 6, -3.0..3.0));
        let out = soft_output_from_site(&site, &cst);
        for ant in 0..3 {
            for b in 0..6 {
                let (mut p0, mut p1) = (0.0, 0.0);
                for (k, &p) in out.symbol_pmf[ant].iter().enumerate() {
                    if cst.bit(k, b) == 0 {
                        p0 += p
                    } else {
                        p1 += p
                    }
                }
                worst = worst.max((out.bit_llrs[ant * 6 + b] - (p0 / p1).ln().clamp(-40.0, 40.0)).abs());
            }
        }
    }
    rep.line("9", worst < 1e-10, &format!("bit LLRs vs symbol enumeration: max diff {worst:.1e}"));

    // encoder linearity and decoder symmetry
    let code = build_regular_ldpc(1024, 3, 6, 1).unwrap();
    let mut ok = true;
    for _ in 0..50 {
        let i1: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let i2: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let (c1, c2) = (code.encode(&i1).unwrap(), code.encode(&i2).unwrap());
        let sum: Vec<u8> = c1.iter().zip(&c2).map(|(a, b)| a ^ b).collect();
        ok &= code.is_codeword(&sum);
        let llrs: Vec<f64> = (0..code.n()).map(|_| rng.gen_range(-2.0..6.0)).collect();
        let flipped: Vec<f64> = llrs.iter().zip(&c1).map(|(&l, &b)| if b == 1 { -l } else { l }).collect();
        let (d0, d1) = (decode_bp(&code, &llrs, 50).unwrap(), decode_bp(&code, &flipped, 50).unwrap());
        ok &= d0.decoded_bits.iter().zip(&c1).map(|(a, b)| a ^ b).eq(d1.decoded_bits.iter().copied());
    }
    rep.line("9", ok, "encoder linearity and decoder codeword symmetry on 50 random words");

    // shard-merge determinism
    let ch = sample_channel::<f64>(3, 3, 0.3, 91).unwrap();
    let cst = Constellation64::new(16, 1.0).unwrap();
    let det = EcSingleLoop::new(EcConfig::recommended());
    let go = |w| rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| estimate_mi(&ch, &cst, &det, 2000, 3).unwrap());
    let (a, b, c) = (go(1), go(2), go(5));
    rep.line("9", a == b && b == c, "MI estimate identical with 1, 2 and 5 workers");
}

fn complexity(rep: &mut Report) {
    let cfg = EcConfig { max_iters: 10, convergence_tol: 0.0, ..EcConfig::recommended() };
    let per_iter = |m: usize| {
        let (ch, cst, _) = instance(10_000 + m as u64, m, m, 4, 10.0);
        let mut best = f64::INFINITY;
        let reps = (2048 / (m * m)).max(1);
        for _ in 0..5 {
            let t = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(ec_single_loop(&ch, &cst, &cfg).unwrap());
            }
            best = best.min(t.elapsed().as_secs_f64() / (reps * 10) as f64);
        }
        best
    };
    let times: Vec<(usize, f64)> = [16, 32, 64].into_iter().map(|m| (m, per_iter(m))).collect();
    for w in times.windows(2) {
        let ratio = w[1].1 / w[0].1;
        rep.line("10", ratio <= 10.0, &format!("per-iteration time m={}: {:.3e} s, m={}: {:.3e} s, ratio {ratio:.2} (<= 10)", w[0].0, w[0].1, w[1].0, w[1].1));
    }
}

fn main() {
    let t = Instant::now();
    let mut rep = Report { passed: 0, failed: 0 };
    oracle_equivalence(&mut rep);
    gradient_identities(&mut rep);
    initialization_identity(&mut rep);
    convergence(&mut rep);
    mutual_information(&mut rep);
    coded_ber(&mut rep);
    scale_robustness(&mut rep);
    invariants(&mut rep);
    complexity(&mut rep);
    println!("acceptance: {} passed, {} failed, {:.1?}", rep.passed, rep.failed, t.elapsed());
}
