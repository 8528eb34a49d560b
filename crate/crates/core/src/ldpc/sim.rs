use rand::Rng;
use rayon::prelude::*;

use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::metrics::wilson_interval;
use crate::model::{coded_snr_correction, snr_to_sigma_w2, ComplexChannel, Constellation};
use crate::rng::{child_rng, stream};
use crate::scalar::Real;

use super::{decode_bp, LdpcCode};

/// One coded-BER measurement point.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedBerRun {
    /// Transmit antennas.
    pub m: usize,
    /// Receive antennas.
    pub r: usize,
    /// Channel SNR in dB (before rate correction).
    pub snr_db: f64,
    pub num_words: usize,
    pub seed: u64,
    /// Draw a fresh channel matrix for every codeword; otherwise one matrix
    /// serves the whole run.
    pub redraw_channel: bool,
    /// Transmit the all-zero codeword instead of random information bits.
    pub all_zero_info: bool,
    pub decoder_iters: usize,
}

impl CodedBerRun {
    pub fn new(m: usize, r: usize, snr_db: f64, num_words: usize, seed: u64) -> Self {
        Self { m, r, snr_db, num_words, seed, redraw_channel: true, all_zero_info: false, decoder_iters: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedBerResult {
    pub snr_db: f64,
    /// `snr_db + 10 log10(R)`.
    pub snr_c_db: f64,
    pub words: usize,
    pub info_bits: u64,
    pub bit_errors: u64,
    pub word_errors: u64,
    /// Words whose decoder output failed the syndrome check.
    pub unsatisfied_words: u64,
    pub ber: f64,
    /// 95% Wilson interval on the information-bit error rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

struct WordOutcome {
    bit_errors: u64,
    unsatisfied: bool,
}

/// Encodes, maps, transmits, detects and decodes `num_words` codewords and
/// counts information-bit errors.
///
/// Codeword bits fill consecutive channel uses in natural order, `m·log2 M`
/// bits per use; a trailing partial use is padded with zeros that the
/// decoder never sees. Word `w` draws its channel, bits and noise from a
/// stream keyed by `(seed, w)`, so detectors compared at the same seed see
/// identical transmissions and the result does not depend on the worker
/// count.
pub fn coded_ber_run<T, D>(run: &CodedBerRun, cst: &Constellation<T>, detector: &D, code: &LdpcCode) -> Result<CodedBerResult>
where
    T: Real,
    D: Detector<T> + ?Sized,
{
    if run.num_words == 0 {
        return Err(Error::InvalidParameter { name: "num_words", reason: "need at least one codeword".into() });
    }
    if code.k() == 0 {
        return Err(Error::InfeasibleCode("code carries no information bits".into()));
    }
    let sigma_w2 = T::lit(snr_to_sigma_w2(run.snr_db, run.m, cst.order(), cst.symbol_energy().to_f64_lossy())?);
    let fixed = if run.redraw_channel {
        None
    } else {
        Some(ComplexChannel::sample(run.m, run.r, sigma_w2, &mut child_rng(run.seed, &[stream::CHANNEL]))?.to_real())
    };
    let bits_per_use = run.m * cst.bits_per_symbol();
    let uses = code.n().div_ceil(bits_per_use);

    let outcomes: Vec<Result<WordOutcome>> = (0..run.num_words)
        .into_par_iter()
        .map(|w| {
            let mut rng = child_rng(run.seed, &[stream::CODE, w as u64]);
            let mut ch = match &fixed {
                Some(ch) => ch.clone(),
                None => ComplexChannel::sample(run.m, run.r, sigma_w2, &mut rng)?.to_real(),
            };
            let info: Vec<u8> = if run.all_zero_info { vec![0; code.k()] } else { (0..code.k()).map(|_| rng.gen_range(0..2u8)).collect() };
            let mut word = code.encode(&info)?;
            word.resize(uses * bits_per_use, 0);
            let mut llrs = Vec::with_capacity(word.len());
            for chunk in word.chunks(bits_per_use) {
                let idx: Vec<usize> = chunk.chunks(cst.bits_per_symbol()).map(|b| cst.index_from_bits(b)).collect();
                ch.transmit_and_store(&cst.real_vector(&idx), cst.real_alphabet(), &mut rng)?;
                let out = detector.detect(&ch, cst)?;
                llrs.extend(out.bit_llrs.iter().map(|l| l.to_f64_lossy()));
            }
            llrs.truncate(code.n());
            let dec = decode_bp(code, &llrs, run.decoder_iters)?;
            let decoded = code.extract_info(&dec.decoded_bits);
            let bit_errors = decoded.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
            Ok(WordOutcome { bit_errors, unsatisfied: !dec.syndrome_satisfied })
        })
        .collect();

    let (mut bit_errors, mut word_errors, mut unsatisfied) = (0u64, 0u64, 0u64);
    for o in outcomes {
        let o = o?;
        bit_errors += o.bit_errors;
        word_errors += u64::from(o.bit_errors > 0);
        unsatisfied += u64::from(o.unsatisfied);
    }
    let info_bits = (run.num_words * code.k()) as u64;
    let (wilson_low, wilson_high) = wilson_interval(bit_errors, info_bits, 1.959_963_984_540_054);
    Ok(CodedBerResult {
        snr_db: run.snr_db,
        snr_c_db: coded_snr_correction(run.snr_db, code.rate())?,
        words: run.num_words,
        info_bits,
        bit_errors,
        word_errors,
        unsatisfied_words: unsatisfied,
        ber: bit_errors as f64 / info_bits as f64,
        wilson_low,
        wilson_high,
    })
}
