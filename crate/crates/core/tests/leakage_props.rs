use proptest::prelude::*;

use tiwork::leakage::{
    load_trace_set, run_campaign_with, save_trace_set, synthesize_trace, Acquisition,
    CampaignConfig, LeakageKind,
};
use tiwork::present_ti::{present_encrypt, seeded_rng, ti_encrypt, Key80, TrojanMode};
use tiwork::Exec;

fn config(seed: u64, mode: TrojanMode, kind: LeakageKind, sigma: f64, k: usize, acq: bool) -> CampaignConfig {
    let mut c = CampaignConfig::new(300, Key80::new(seed as u128 * 0x9E37).unwrap(), mode, true, seed);
    c.model.kind = kind;
    c.model.sigma = sigma;
    c.model.samples_per_cycle = k;
    c.fixed_pt = seed.rotate_left(17);
    if acq {
        c.acquisition = Acquisition::RandomOnly;
    }
    c
}

fn mode() -> impl Strategy<Value = TrojanMode> {
    prop_oneof![Just(TrojanMode::Nominal), Just(TrojanMode::Triggered), (0.05f64..0.95).prop_map(TrojanMode::Metastable)]
}

fn kind() -> impl Strategy<Value = LeakageKind> {
    prop_oneof![Just(LeakageKind::HammingDistance), Just(LeakageKind::HammingWeight)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn campaigns_are_deterministic(seed in any::<u64>(), m in mode(), k in kind(), spc in 1usize..4, acq in any::<bool>()) {
        let c = config(seed, m, k, 2.0, spc, acq);
        let a = run_campaign_with(&c, Exec::Parallel).unwrap();
        let b = run_campaign_with(&c, Exec::Sequential).unwrap();
        prop_assert_eq!(a.n_samples, c.model.n_samples());
        prop_assert!(a == b);
    }

    #[test]
    fn noiseless_traces_replay_from_metadata(seed in any::<u64>(), m in prop_oneof![Just(TrojanMode::Nominal), Just(TrojanMode::Triggered)], k in kind()) {
        let c = config(seed, m, k, 0.0, 1, false);
        let set = run_campaign_with(&c, Exec::Parallel).unwrap();
        for (row, meta) in set.rows().take(40) {
            let (ct, log) = ti_encrypt(meta.plaintext, c.key, m, true, meta.seed).unwrap();
            prop_assert_eq!(ct, meta.ciphertext);
            prop_assert_eq!(ct, present_encrypt(meta.plaintext, c.key));
            let replay = synthesize_trace(&log, &c.model, &mut seeded_rng(meta.seed, 7));
            prop_assert_eq!(replay.as_slice(), row);
        }
    }
}

#[test]
fn trace_files_round_trip() {
    let c = config(3, TrojanMode::Nominal, LeakageKind::HammingDistance, 2.0, 2, false);
    let set = run_campaign_with(&c, Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.bin");
    save_trace_set(&p, &set).unwrap();
    let back = load_trace_set(&p).unwrap();
    assert_eq!(back.n_samples, set.n_samples);
    assert!(back.samples == set.samples);
    // the sidecar does not carry per-trace seeds
    for (a, b) in back.meta.iter().zip(&set.meta) {
        assert_eq!((a.index, a.group, a.plaintext, a.ciphertext), (b.index, b.group, b.plaintext, b.ciphertext));
    }
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..4], b"SCTR");
    assert_eq!(bytes.len(), 4 + 2 + 8 + 4 + 1 + 4 * set.samples.len());
}
