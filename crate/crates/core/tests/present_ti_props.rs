use proptest::prelude::*;

use tiwork::present_ti::{
    present_encrypt, shared_sbox_f, shared_sbox_g, ti_encrypt, CorrectionState, Key80, TrojanMode,
    SBOX,
};

fn key() -> impl Strategy<Value = Key80> {
    any::<u128>().prop_map(|k| Key80::new(k & ((1 << 80) - 1)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn shared_encryption_matches_reference(pt in any::<u64>(), k in key(), seed in any::<u64>(), prng in any::<bool>()) {
        let want = present_encrypt(pt, k);
        for mode in [TrojanMode::Nominal, TrojanMode::Triggered] {
            let (ct, log) = ti_encrypt(pt, k, mode, prng, seed).unwrap();
            prop_assert_eq!(ct, want);
            let [a, b, c] = log.initial_state;
            prop_assert_eq!(a ^ b ^ c, pt);
        }
    }
}

#[test]
fn shared_sbox_pipeline_is_exhaustively_correct() {
    for state in [CorrectionState::NOMINAL, CorrectionState::TRIGGERED] {
        for x in 0..1u32 << 12 {
            let (x1, x2, x3) = ((x & 15) as u8, (x >> 4 & 15) as u8, (x >> 8) as u8);
            let (y1, y2, y3) = shared_sbox_g(x1, x2, x3, state);
            let (z1, z2, z3) = shared_sbox_f(y1, y2, y3);
            assert_eq!(z1 ^ z2 ^ z3, SBOX[(x1 ^ x2 ^ x3) as usize]);
        }
    }
}

#[test]
fn input_masks_are_uniform_per_nibble() {
    // chi-square over the 16 values of every mask nibble, 4096 encryptions
    let n = 4096;
    let mut counts = vec![[0u32; 16]; 32];
    let key = Key80::new(0x1234).unwrap();
    for seed in 0..n {
        let (_, log) = ti_encrypt(0, key, TrojanMode::Nominal, true, seed).unwrap();
        for (s, share) in log.initial_state[..2].iter().enumerate() {
            for i in 0..16 {
                counts[s * 16 + i][((share >> (4 * i)) & 15) as usize] += 1;
            }
        }
    }
    let e = n as f64 / 16.0;
    for c in &counts {
        let chi: f64 = c.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 15 degrees of freedom, p = 1e-4
        assert!(chi < 44.3, "chi-square {chi}");
    }
}

#[test]
fn masks_off_means_zero_masks() {
    let (_, log) = ti_encrypt(0xDEAD_BEEF, Key80::new(1).unwrap(), TrojanMode::Nominal, false, 5).unwrap();
    assert_eq!(log.initial_state, [0xDEAD_BEEF, 0, 0]);
}

#[test]
fn overclocked_mode_is_an_error() {
    assert!(ti_encrypt(0, Key80::new(0).unwrap(), TrojanMode::Overclocked, true, 1).is_err());
}
