use crate::error::{check_len, Result};

use super::LdpcCode;

/// Default message saturation, matching the detectors' LLR clamp.
pub const DEFAULT_DECODER_CLAMP: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub decoded_bits: Vec<u8>,
    pub iterations_used: usize,
    pub syndrome_satisfied: bool,
}

/// Flooding sum-product decoding in the LLR domain, `LLR = log p(0)/p(1)`.
/// Stops as soon as the hard decision satisfies every check.
pub fn decode_bp(code: &LdpcCode, llrs: &[f64], max_iters: usize) -> Result<DecodeResult> {
    decode_bp_with_clamp(code, llrs, max_iters, DEFAULT_DECODER_CLAMP)
}

/// As [`decode_bp`], with channel LLRs and all messages saturated at
/// `±clamp`. NaN inputs are read as erasures.
pub fn decode_bp_with_clamp(code: &LdpcCode, llrs: &[f64], max_iters: usize, clamp: f64) -> Result<DecodeResult> {
    check_len(code.n(), llrs.len())?;
    let sat = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(-clamp, clamp) };
    let channel: Vec<f64> = llrs.iter().map(|&l| sat(l)).collect();
    let checks = code.checks();

    // Edge e = (check c, slot) lives at offsets[c] + slot.
    let mut offsets = Vec::with_capacity(checks.len() + 1);
    offsets.push(0);
    for c in checks {
        offsets.push(offsets.last().unwrap() + c.len());
    }
    let edges = *offsets.last().unwrap();
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); code.n()];
    for (c, row) in checks.iter().enumerate() {
        for (slot, &v) in row.iter().enumerate() {
            var_edges[v].push(offsets[c] + slot);
        }
    }
    let edge_var: Vec<usize> = checks.iter().flatten().copied().collect();

    let mut c2v = vec![0.0f64; edges];
    let mut v2c = vec![0.0f64; edges];
    let mut posterior = channel.clone();
    let mut bits: Vec<u8> = posterior.iter().map(|&l| u8::from(l < 0.0)).collect();
    let mut tanhs = Vec::new();
    let mut iterations = 0;
    let mut satisfied = code.is_codeword(&bits);

    while iterations < max_iters {
        for (e, &v) in edge_var.iter().enumerate() {
            v2c[e] = sat(posterior[v] - c2v[e]);
        }
        for c in 0..checks.len() {
            let range = offsets[c]..offsets[c + 1];
            tanhs.clear();
            tanhs.extend(v2c[range.clone()].iter().map(|&x| (0.5 * x).tanh()));
            for (slot, e) in range.enumerate() {
                let prod: f64 = tanhs.iter().enumerate().filter(|&(s, _)| s != slot).map(|(_, &t)| t).product();
                c2v[e] = sat(2.0 * prod.atanh());
            }
        }
        for (v, es) in var_edges.iter().enumerate() {
            posterior[v] = channel[v] + es.iter().map(|&e| c2v[e]).sum::<f64>();
            bits[v] = u8::from(posterior[v] < 0.0);
        }
        iterations += 1;
        satisfied = code.is_codeword(&bits);
        if satisfied {
            break;
        }
    }
    Ok(DecodeResult { decoded_bits: bits, iterations_used: iterations, syndrome_satisfied: satisfied })
}
