#![allow(dead_code)]

use ecmimo::*;
use rand::Rng;

/// Random channel with one stored transmission, plus the transmitted
/// constellation indices.
pub fn instance(seed: u64, m: usize, r: usize, order: usize, snr_db: f64) -> (RealChannel64, Constellation64, Vec<usize>) {
    let cst = Constellation64::new(order, 1.0).unwrap();
    let sigma_w2 = snr_to_sigma_w2(snr_db, m, order, 1.0).unwrap();
    let mut ch = sample_channel::<f64>(m, r, sigma_w2, derive_seed(seed, &[1])).unwrap().to_real();
    let mut rng = child_rng(seed, &[2]);
    let sent: Vec<usize> = (0..m).map(|_| rng.gen_range(0..order)).collect();
    ch.transmit_and_store(&cst.real_vector(&sent), cst.real_alphabet(), &mut rng).unwrap();
    (ch, cst, sent)
}

/// Plain odometer enumeration over complex symbol vectors. Returns per-antenna
/// complex-symbol marginals and the log of the unnormalized evidence.
pub fn naive_symbol_marginals(ch: &RealChannel64, cst: &Constellation64) -> (Vec<Vec<f64>>, f64) {
    let m = ch.dim() / 2;
    let order = cst.order();
    let y = ch.observation().unwrap();
    let h = ch.h();
    let mut idx = vec![0usize; m];
    let mut log_w = Vec::new();
    let mut configs = Vec::new();
    loop {
        let u = cst.real_vector(&idx);
        let mut dist = 0.0;
        for i in 0..h.rows() {
            let mut hu = 0.0;
            for j in 0..h.cols() {
                hu += h[(i, j)] * u[j];
            }
            dist += (y[i] - hu) * (y[i] - hu);
        }
        log_w.push(-dist / (2.0 * ch.sigma2()));
        configs.push(idx.clone());
        let mut pos = 0;
        while pos < m {
            idx[pos] += 1;
            if idx[pos] < order {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == m {
            break;
        }
    }
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|w| (w - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut marg = vec![vec![0.0; order]; m];
    for (w, cfg) in weights.iter().zip(&configs) {
        for (a, &k) in cfg.iter().enumerate() {
            marg[a][k] += w / total;
        }
    }
    (marg, top + total.ln())
}

/// Max-likelihood symbol vector by brute force.
pub fn ml_decision(ch: &RealChannel64, cst: &Constellation64) -> Vec<usize> {
    let m = ch.dim() / 2;
    let order = cst.order();
    let y = ch.observation().unwrap();
    let mut best = (f64::INFINITY, vec![0; m]);
    for flat in 0..order.pow(m as u32) {
        let idx: Vec<usize> = (0..m).map(|a| (flat / order.pow(a as u32)) % order).collect();
        let hu = ch.h().mul_vec(&cst.real_vector(&idx));
        let d: f64 = y.iter().zip(&hu).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, idx);
        }
    }
    best.1
}

pub fn random_params(rng: &mut impl Rng, n: usize, lambda: std::ops::Range<f64>) -> NaturalParams64 {
    NaturalParams::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(), (0..n).map(|_| rng.gen_range(lambda.clone())).collect()).unwrap()
}

/// Central differences of `f` along each `γ` and `Λ` coordinate.
pub fn central_differences(p: &NaturalParams64, h: f64, f: impl Fn(&NaturalParams64) -> f64) -> NaturalParams64 {
    let n = p.len();
    let mut g = NaturalParams::constant(n, 0.0, 0.0);
    for i in 0..n {
        let (mut a, mut b) = (p.clone(), p.clone());
        a.gamma[i] += h;
        b.gamma[i] -= h;
        g.gamma[i] = (f(&a) - f(&b)) / (2.0 * h);
        let (mut a, mut b) = (p.clone(), p.clone());
        a.lambda[i] += h;
        b.lambda[i] -= h;
        g.lambda[i] = (f(&a) - f(&b)) / (2.0 * h);
    }
    g
}

/// Largest per-component relative error, with magnitudes below `floor`
/// compared absolutely.
pub fn max_rel_err(a: &NaturalParams64, b: &NaturalParams64, floor: f64) -> f64 {
    a.gamma.iter().chain(&a.lambda).zip(b.gamma.iter().chain(&b.lambda)).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}
