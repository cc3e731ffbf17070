//! LDPC code tables, encoding and min-sum decoding over AWGN.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use cellfree_ota::ldpc::{
    expand_prototype, ieee80211_n1944_r12, parse_alist, parse_prototype_csv, read_alist, write_alist, Encoder,
    MinSumDecoder, IEEE80211_N1944_R12_CSV,
};
use cellfree_ota::rng::substream;

const ALIST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/ieee80211_n1944_r12.alist");

#[test]
fn shipped_alist_matches_expanded_prototype() {
    let from_file = read_alist(ALIST).unwrap();
    let base = parse_prototype_csv(IEEE80211_N1944_R12_CSV).unwrap();
    let expanded = expand_prototype(&base, 81).unwrap();
    assert!(from_file.same_pattern(&expanded));
    assert!(from_file.same_pattern(&ieee80211_n1944_r12()));
    assert_eq!((from_file.rows(), from_file.cols()), (972, 1944));
    assert!(parse_alist(&write_alist(&from_file)).unwrap().same_pattern(&from_file));
}

#[test]
fn random_messages_encode_to_codewords() {
    let h = ieee80211_n1944_r12();
    let enc = Encoder::new(&h).unwrap();
    assert_eq!((enc.k(), enc.n()), (972, 1944));
    let mut rng = substream(9, 400, 0);
    let mut prev: Option<(Vec<u8>, Vec<u8>)> = None;
    for _ in 0..20 {
        let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = enc.encode(&msg).unwrap();
        assert!(h.is_codeword(&cw));
        assert_eq!(enc.extract(&cw), msg);
        // linearity: the sum of two codewords is the codeword of the summed messages
        if let Some((pm, pc)) = &prev {
            let sum_msg: Vec<u8> = msg.iter().zip(pm).map(|(a, b)| a ^ b).collect();
            let sum_cw: Vec<u8> = cw.iter().zip(pc).map(|(a, b)| a ^ b).collect();
            assert_eq!(enc.encode(&sum_msg).unwrap(), sum_cw);
        }
        prev = Some((msg, cw));
    }
}

#[test]
fn codewords_are_decoder_fixed_points() {
    let h = ieee80211_n1944_r12();
    let enc = Encoder::new(&h).unwrap();
    let dec = MinSumDecoder::new(&h, 0.75, 50).unwrap();
    let mut rng = substream(9, 401, 0);
    for _ in 0..10 {
        let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = enc.encode(&msg).unwrap();
        // ln P(1)/P(0): positive for ones
        let llrs: Vec<f64> = cw.iter().map(|&b| if b == 1 { 3.0 } else { -3.0 }).collect();
        let out = dec.decode(&llrs).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.bits, cw);
    }
}

/// BPSK over AWGN at `ebn0_db`: (coded message BER, uncoded BER) over `frames` codewords.
fn awgn_ber(ebn0_db: f64, frames: usize, seed: u64) -> (f64, f64) {
    let h = ieee80211_n1944_r12();
    let enc = Encoder::new(&h).unwrap();
    let dec = MinSumDecoder::new(&h, 0.75, 50).unwrap();
    let rate = enc.k() as f64 / enc.n() as f64;
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let mut rng = substream(seed, 402, 0);
    let coded_sigma = (1.0 / (2.0 * rate * ebn0)).sqrt();
    let uncoded_sigma = (1.0 / (2.0 * ebn0)).sqrt();
    let (mut coded_err, mut uncoded_err) = (0usize, 0usize);
    for _ in 0..frames {
        let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = enc.encode(&msg).unwrap();
        let noise = Normal::new(0.0, coded_sigma).unwrap();
        // bit 1 ↦ +1
        let llrs: Vec<f64> = cw
            .iter()
            .map(|&b| {
                let y = (2.0 * b as f64 - 1.0) + noise.sample(&mut rng);
                2.0 * y / (coded_sigma * coded_sigma)
            })
            .collect();
        let out = dec.decode(&llrs).unwrap();
        coded_err += enc.extract(&out.bits).iter().zip(&msg).filter(|(a, b)| a != b).count();
        let noise = Normal::new(0.0, uncoded_sigma).unwrap();
        uncoded_err += msg
            .iter()
            .filter(|&&b| {
                let y = (2.0 * b as f64 - 1.0) + noise.sample(&mut rng);
                (y > 0.0) != (b == 1)
            })
            .count();
    }
    let bits = (frames * enc.k()) as f64;
    (coded_err as f64 / bits, uncoded_err as f64 / bits)
}

#[test]
fn awgn_waterfall_beats_uncoded() {
    let q = |x: f64| 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
    for (ebn0_db, frames) in [(1.0, 40), (2.5, 100), (4.0, 100)] {
        let (coded, uncoded) = awgn_ber(ebn0_db, frames, 1);
        let theory = q((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt());
        // uncoded BPSK agrees with Q(√(2 Eb/N0))
        let bits = (frames * 972) as f64;
        let se = (theory * (1.0 - theory) / bits).sqrt();
        assert!((uncoded - theory).abs() < 4.0 * se, "uncoded {uncoded} vs {theory}");
        if ebn0_db >= 2.5 {
            assert!(coded * 10.0 <= uncoded, "{ebn0_db} dB: coded {coded} vs uncoded {uncoded}");
        }
    }
}
