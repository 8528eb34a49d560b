//! Experiment runners. Each returns a [`Table`]; results depend only on the
//! configuration and seed, never on the worker count.

use ecmimo::rng::stream;
use ecmimo::*;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::table::Table;

fn constellation(cfg: &ExperimentConfig) -> Result<Constellation64> {
    let split = if cfg.system.imag_bits_first { BitSplit::ImagFirst } else { BitSplit::RealFirst };
    Ok(Constellation64::with_labeling(cfg.system.order, cfg.system.es, split)?)
}

fn sigma_w2(cfg: &ExperimentConfig, snr_db: f64) -> Result<f64> {
    Ok(snr_to_sigma_w2(snr_db, cfg.system.m, cfg.system.order, cfg.system.es)?)
}

/// Channel realization `k`; shared by every SNR point and detector.
fn channel(cfg: &ExperimentConfig, snr_db: f64, k: usize) -> Result<ComplexChannel64> {
    let mut rng = child_rng(cfg.run.seed, &[stream::CHANNEL, k as u64]);
    Ok(ComplexChannel::sample(cfg.system.m, cfg.system.r, sigma_w2(cfg, snr_db)?, &mut rng)?)
}

/// Instance `k` at SNR point `i`: channel plus one uniform transmission.
fn instance(cfg: &ExperimentConfig, cst: &Constellation64, i: usize, k: usize) -> Result<RealChannel64> {
    use rand::Rng;
    let mut ch = channel(cfg, cfg.snr.grid_db[i], k)?.to_real();
    let mut rng = child_rng(cfg.run.seed, &[stream::SYMBOLS, i as u64, k as u64]);
    let sent: Vec<usize> = (0..cfg.system.m).map(|_| rng.gen_range(0..cst.order())).collect();
    ch.transmit_and_store(&cst.real_vector(&sent), cst.real_alphabet(), &mut rng)?;
    Ok(ch)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    match cfg.experiment {
        ExperimentKind::RateSweep => run_rate_sweep(cfg),
        ExperimentKind::ConvergenceTrace => run_convergence_trace(cfg),
        ExperimentKind::CodedBer => run_coded_ber(cfg),
        ExperimentKind::FreeEnergyTrace => run_free_energy_trace(cfg),
    }
}

/// Average mutual information per detector and SNR over channel
/// realizations, with the mean capacity of the same realizations.
pub fn run_rate_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let cst = constellation(cfg)?;
    let mut table = Table::new(vec!["snr_db", "detector", "avg_mi", "stderr", "capacity"]);
    table.meta.push(("samples_per_channel".into(), cfg.run.samples.to_string()));
    table.meta.push(("channel_realizations".into(), cfg.run.channels.to_string()));
    let size = (cfg.system.order as f64).powi(cfg.system.m as i32);
    let detectors: Vec<_> = cfg
        .detectors
        .iter()
        .filter(|d| match d.budget() {
            Some(b) if size > b as f64 => {
                log::warn!("omitting `{}`: {size} hypotheses exceed the budget of {b}", d.label());
                false
            }
            _ => true,
        })
        .map(|d| (d.label(), d.build(false)))
        .collect();
    let k = cfg.run.channels;
    for (i, &snr) in cfg.snr.grid_db.iter().enumerate() {
        let channels: Vec<ComplexChannel64> = (0..k).map(|c| channel(cfg, snr, c)).collect::<Result<_>>()?;
        let snr_lin = 10f64.powf(snr / 10.0);
        let caps: Vec<f64> = channels.iter().map(|ch| capacity_per_antenna(ch, snr_lin)).collect::<Result<_, _>>()?;
        let capacity = caps.iter().sum::<f64>() / k as f64;
        for (label, det) in &detectors {
            let mis: Vec<f64> = channels
                .par_iter()
                .enumerate()
                .map(|(c, ch)| {
                    let seed = derive_seed(cfg.run.seed, &[stream::SAMPLE, i as u64, c as u64]);
                    estimate_mi(ch, &cst, det.as_ref(), cfg.run.samples, seed).map(|e| e.average_mi)
                })
                .collect::<Result<_, _>>()?;
            let mean = mis.iter().sum::<f64>() / k as f64;
            let stderr = if k > 1 { (mis.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt() } else { 0.0 };
            table.push(vec![num(snr), label.to_string(), num(mean), num(stderr), num(capacity)]);
        }
    }
    Ok(table)
}

/// Mean `Δ_u`, `Δ_u²` per iteration and EC variant; iteration 0 is the
/// initialization. Runs that stop early hold their last value.
pub fn run_convergence_trace(cfg: &ExperimentConfig) -> Result<Table> {
    let cst = constellation(cfg)?;
    let mut table = Table::new(vec!["snr_db", "detector", "iter", "delta_u", "delta_u2"]);
    table.meta.push(("instances".into(), cfg.run.instances.to_string()));
    for (i, &snr) in cfg.snr.grid_db.iter().enumerate() {
        let instances: Vec<RealChannel64> = (0..cfg.run.instances).map(|k| instance(cfg, &cst, i, k)).collect::<Result<_>>()?;
        for spec in &cfg.detectors {
            let det = spec.build(false);
            let iters = match &spec.kind {
                crate::detector::DetectorKind::SingleLoop(c) | crate::detector::DetectorKind::DoubleLoop(c) => c.max_iters,
                _ => unreachable!("validated"),
            };
            let traces: Vec<Vec<DeltaPoint<f64>>> = instances.par_iter().map(|ch| det.detect(ch, &cst).map(|o| o.diagnostics.trace)).collect::<Result<_, _>>()?;
            let mut acc = DeltaTrace::new(iters + 1);
            traces.iter().for_each(|t| acc.add(t));
            let (du, du2) = acc.means();
            for (it, (a, b)) in du.iter().zip(&du2).enumerate() {
                table.push(vec![num(snr), spec.label().to_string(), it.to_string(), num(*a), num(*b)]);
            }
        }
    }
    Ok(table)
}

/// Coded bit error rate after LDPC decoding, per detector and SNR. Every
/// detector sees the same codewords, channels and noise at a given point.
pub fn run_coded_ber(cfg: &ExperimentConfig) -> Result<Table> {
    let cst = constellation(cfg)?;
    let c = &cfg.code;
    let code = build_regular_ldpc(c.n, c.col_weight, c.row_weight, c.seed)?;
    let mut table = Table::new(vec!["snr_c_db", "detector", "ber", "word_count", "wilson_low", "wilson_high"]);
    table.meta.push(("code".into(), format!("n={} k={} rate={} girth={}", code.n(), code.k(), code.rate(), code.girth().map_or("inf".into(), |g| g.to_string()))));
    for (i, &snr) in cfg.snr.grid_db.iter().enumerate() {
        let mut run = CodedBerRun::new(cfg.system.m, cfg.system.r, snr, cfg.run.words, derive_seed(cfg.run.seed, &[stream::CODE, i as u64]));
        run.decoder_iters = cfg.run.decoder_iters;
        run.redraw_channel = cfg.run.redraw_channel;
        for spec in &cfg.detectors {
            let res = coded_ber_run(&run, &cst, &spec.build(false), &code)?;
            table.push(vec![num(res.snr_c_db), spec.label().to_string(), num(res.ber), res.words.to_string(), num(res.wilson_low), num(res.wilson_high)]);
        }
    }
    Ok(table)
}

/// `log Z_EC` and gradient-block norms per iteration for each instance.
/// Iteration 0 is the initialization.
pub fn run_free_energy_trace(cfg: &ExperimentConfig) -> Result<Table> {
    let cst = constellation(cfg)?;
    let mut table = Table::new(vec!["snr_db", "detector", "instance", "iter", "logzec", "grad_q_norm", "grad_s_norm"]);
    for (i, &snr) in cfg.snr.grid_db.iter().enumerate() {
        let instances: Vec<RealChannel64> = (0..cfg.run.instances).map(|k| instance(cfg, &cst, i, k)).collect::<Result<_>>()?;
        for spec in &cfg.detectors {
            let det = spec.build(true);
            let traces: Vec<Vec<EnergyPoint<f64>>> = instances.par_iter().map(|ch| det.detect(ch, &cst).map(|o| o.diagnostics.energy)).collect::<Result<_, _>>()?;
            for (k, trace) in traces.iter().enumerate() {
                for (it, p) in trace.iter().enumerate() {
                    table.push(vec![num(snr), spec.label().to_string(), k.to_string(), it.to_string(), num(p.log_z_ec), num(p.grad_q_norm), num(p.grad_s_norm)]);
                }
            }
        }
    }
    Ok(table)
}
