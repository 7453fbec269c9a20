use super::*;
use crate::seed;
use proptest::prelude::*;
use rand::Rng;

fn array(paradigm: Paradigm, rows: usize, cols: usize, bits: u32) -> ComputeArray {
    let mut cfg = ArrayConfig::new(paradigm);
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.dac_bits = bits;
    cfg.adc_bits = bits;
    let mut ca = ComputeArray::new(0, cfg, 1).unwrap();
    ca.form_all(3.3).unwrap();
    ca
}

/// Float MVM computed straight from level indices and device parameters,
/// then quantized. Shares no code with the crossbar read path.
fn mvm_oracle(levels: &[Vec<u32>], x: &[u32], cfg: &ArrayConfig) -> Vec<u32> {
    let p = &cfg.device;
    let dac_max = ((1u64 << cfg.dac_bits) - 1) as f64;
    let adc_max = ((1u64 << cfg.adc_bits) - 1) as f64;
    let g = |k: u32| p.g_min_us + k as f64 * (p.g_max_us - p.g_min_us) / (p.levels - 1) as f64;
    let fs = cfg.rows as f64 * p.g_max_us * cfg.v_read_v;
    (0..cfg.cols)
        .map(|j| {
            let i: f64 = (0..cfg.rows)
                .map(|r| g(levels[r][j]) * cfg.v_read_v * x[r] as f64 / dac_max)
                .sum();
            (i / fs * adc_max).round().clamp(0.0, adc_max) as u32
        })
        .collect()
}

fn random_levels(rng: &mut impl Rng, rows: usize, cols: usize, levels: u32) -> Vec<Vec<u32>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0..levels)).collect())
        .collect()
}

#[test]
fn program_zero_levels_gives_g_min() {
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    ca.program_matrix(&vec![vec![0; 4]; 4]).unwrap();
    let g_min = ca.crossbar.params.g_min_us;
    assert!(ca.crossbar.devices().iter().all(|d| d.g_us == g_min));
}

#[test]
fn program_shape_mismatch() {
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    let err = ca.program_matrix(&vec![vec![0; 3]; 4]).unwrap_err();
    assert!(matches!(err, ArrayError::ShapeMismatch { .. }));
    let err = ca.program_matrix(&vec![vec![0; 4]; 5]).unwrap_err();
    assert!(matches!(err, ArrayError::ShapeMismatch { .. }));
}

#[test]
fn program_reports_first_unformed_device() {
    let mut cfg = ArrayConfig::new(Paradigm::CiM);
    cfg.rows = 3;
    cfg.cols = 3;
    let mut ca = ComputeArray::new(0, cfg, 0).unwrap();
    ca.crossbar.form_device(0, 0, 3.0).unwrap();
    let err = ca.program_matrix(&vec![vec![1; 3]; 3]).unwrap_err();
    assert_eq!(err, ArrayError::NotFormed { row: 0, col: 1 });
}

#[test]
fn program_matches_linear_map() {
    let mut rng = seed::rng(&[4]);
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    let levels = random_levels(&mut rng, 4, 4, 16);
    ca.program_matrix(&levels).unwrap();
    let p = ca.crossbar.params.clone();
    for r in 0..4 {
        for c in 0..4 {
            let expect = 10.0 + levels[r][c] as f64 * 90.0 / 15.0;
            assert!((ca.crossbar.device(r, c).g_us - expect).abs() < 1e-9);
            assert_eq!(
                p.level_conductance(levels[r][c]),
                ca.crossbar.device(r, c).g_us
            );
        }
    }
    assert_eq!(ca.events().sets + ca.events().resets, 16);
}

#[test]
fn mvm_zero_input() {
    let ca = array(Paradigm::CiM, 8, 8, 8);
    assert_eq!(ca.cim_mvm(&[0; 8]).unwrap(), vec![0; 8]);
}

#[test]
fn mvm_identity_scales_input() {
    let n = 4;
    let mut ca = array(Paradigm::CiM, n, n, 8);
    let top = ca.crossbar.params.levels - 1;
    let diag: Vec<Vec<u32>> = (0..n)
        .map(|r| (0..n).map(|c| if r == c { top } else { 0 }).collect())
        .collect();
    ca.program_matrix(&diag).unwrap();
    let x = [255, 128, 17, 0];
    let y = ca.cim_mvm(&x).unwrap();
    // off-diagonal devices sit at g_min, adding (n-1)/n * sum of g_min leakage
    let g_ratio = ca.crossbar.params.g_min_us / ca.crossbar.params.g_max_us;
    let sum: u32 = x.iter().sum();
    for (j, &yj) in y.iter().enumerate() {
        let leak = g_ratio * (sum - x[j]) as f64;
        let expect = (x[j] as f64 + leak) / n as f64;
        assert!(
            (yj as f64 - expect).abs() <= 1.0,
            "col {j}: {yj} vs {expect}"
        );
    }
}

#[test]
fn mvm_matches_float_oracle() {
    let mut rng = seed::rng(&[11]);
    for _ in 0..50 {
        let mut ca = array(Paradigm::CiM, 4, 4, 12);
        let levels = random_levels(&mut rng, 4, 4, 16);
        ca.program_matrix(&levels).unwrap();
        let x: Vec<u32> = (0..4).map(|_| rng.random_range(0..4096)).collect();
        let got = ca.cim_mvm(&x).unwrap();
        let want = mvm_oracle(&levels, &x, ca.config());
        for (g, w) in got.iter().zip(&want) {
            assert!(g.abs_diff(*w) <= 1);
        }
    }
}

#[test]
fn mvm_errors() {
    let ca = array(Paradigm::CAM, 4, 4, 8);
    assert!(matches!(
        ca.cim_mvm(&[0; 4]),
        Err(ArrayError::WrongParadigm { .. })
    ));
    let ca = array(Paradigm::CiM, 4, 4, 8);
    assert!(matches!(
        ca.cim_mvm(&[256, 0, 0, 0]),
        Err(ArrayError::InputOutOfRange { .. })
    ));
    assert!(matches!(
        ca.cim_mvm(&[0; 3]),
        Err(ArrayError::ShapeMismatch { .. })
    ));
    let mut cfg = ArrayConfig::new(Paradigm::CiM);
    cfg.rows = 2;
    cfg.cols = 2;
    let virgin = ComputeArray::new(0, cfg, 0).unwrap();
    assert_eq!(
        virgin.cim_mvm(&[1, 1]),
        Err(ArrayError::NotFormed { row: 0, col: 0 })
    );
}

proptest! {
    #[test]
    fn mvm_monotone_in_levels(
        seed_value in any::<u64>(),
        row in 0usize..4,
        col in 0usize..4,
    ) {
        let mut rng = seed::rng(&[seed_value]);
        let mut ca = array(Paradigm::CiM, 4, 4, 8);
        let mut levels = random_levels(&mut rng, 4, 4, 15);
        let x: Vec<u32> = (0..4).map(|_| rng.random_range(0..256)).collect();
        ca.program_matrix(&levels).unwrap();
        let before = ca.cim_mvm(&x).unwrap();
        levels[row][col] += 1;
        ca.program_matrix(&levels).unwrap();
        let after = ca.cim_mvm(&x).unwrap();
        prop_assert!(after[col] >= before[col]);
    }
}

fn ternary_match(word: &str, key: &[bool]) -> bool {
    word.chars().zip(key).all(|(c, &k)| match c {
        'X' => true,
        '1' => k,
        '0' => !k,
        _ => unreachable!(),
    })
}

#[test]
fn cam_exact_and_mismatch() {
    let mut ca = array(Paradigm::CAM, 4, 8, 8);
    ca.cam_store(0, "1010").unwrap();
    let hit = ca.cam_search(&parse_key("1010").unwrap()).unwrap();
    assert_eq!(hit, vec![true, false, false, false]);
    let miss = ca.cam_search(&parse_key("1011").unwrap()).unwrap();
    assert!(!miss[0]);
}

#[test]
fn cam_matches_exhaustive_oracle() {
    let mut rng = seed::rng(&[21]);
    for width in 1..=8usize {
        let mut ca = array(Paradigm::CAM, 4, 2 * width, 8);
        let words: Vec<String> = (0..4)
            .map(|_| {
                (0..width)
                    .map(|_| ['0', '1', 'X'][rng.random_range(0..3)])
                    .collect()
            })
            .collect();
        for (r, w) in words.iter().enumerate() {
            ca.cam_store(r, w).unwrap();
        }
        for k in 0..(1u32 << width) {
            let key: Vec<bool> = (0..width).map(|b| k >> (width - 1 - b) & 1 == 1).collect();
            let got = ca.cam_search(&key).unwrap();
            let want: Vec<bool> = words.iter().map(|w| ternary_match(w, &key)).collect();
            assert_eq!(got, want, "width {width} key {k:b}");
        }
    }
}

#[test]
fn cam_errors() {
    let mut ca = array(Paradigm::CAM, 2, 4, 8);
    assert_eq!(
        ca.cam_store(0, "1Z"),
        Err(ArrayError::BadTernarySymbol {
            symbol: 'Z',
            position: 1
        })
    );
    assert!(matches!(
        ca.cam_store(0, "101"),
        Err(ArrayError::ShapeMismatch { .. })
    ));
    assert!(matches!(
        ca.cam_store(2, "10"),
        Err(ArrayError::RowOutOfRange { .. })
    ));
    let mut cim = array(Paradigm::CiM, 2, 4, 8);
    assert!(matches!(
        cim.cam_store(0, "10"),
        Err(ArrayError::WrongParadigm { .. })
    ));
}

fn snn_single_synapse() -> ComputeArray {
    let mut ca = array(Paradigm::SNN, 1, 1, 8);
    let top = ca.crossbar.params.levels - 1;
    ca.program_matrix(&[vec![top]]).unwrap();
    ca
}

#[test]
fn snn_zero_weights_never_spike() {
    let mut ca = array(Paradigm::SNN, 4, 4, 8);
    for _ in 0..20 {
        assert_eq!(ca.snn_step(&[true; 4]).unwrap(), vec![false; 4]);
    }
    assert!(ca.neurons().iter().all(|n| n.membrane_v == 0.0));
}

#[test]
fn snn_single_synapse_trace() {
    // w = 1, threshold 1, refractory 2, input spike every step:
    // t0 integrates to 1 and fires; t1, t2 refractory; t3 fires again.
    let mut ca = snn_single_synapse();
    let fired: Vec<bool> = (0..7).map(|_| ca.snn_step(&[true]).unwrap()[0]).collect();
    assert_eq!(fired, vec![true, false, false, true, false, false, true]);
}

#[test]
fn snn_leak_is_geometric() {
    let mut ca = array(Paradigm::SNN, 1, 1, 8);
    let mid = 5;
    ca.program_matrix(&[vec![mid]]).unwrap();
    let w = mid as f64 / 15.0;
    ca.snn_step(&[true]).unwrap();
    assert!((ca.neurons()[0].membrane_v - w).abs() < 1e-12);
    for t in 1..10 {
        ca.snn_step(&[false]).unwrap();
        let expect = w * 0.9f64.powi(t);
        assert!((ca.neurons()[0].membrane_v - expect).abs() < 1e-12);
    }
}

#[test]
fn pc_sampling() {
    let mut ca = array(Paradigm::PC, 1, 2, 8);
    let bits = ca.pc_sample(100).unwrap();
    assert_eq!(bits.len(), 2);
    assert!(bits.iter().flatten().all(|&b| !b));

    let mut cfg = ArrayConfig::new(Paradigm::PC);
    cfg.rows = 1;
    cfg.cols = 1;
    cfg.device.levels = 3;
    let mut a = ComputeArray::new(2, cfg.clone(), 99).unwrap();
    a.form_all(3.0).unwrap();
    a.program_matrix(&[vec![1]]).unwrap();
    let mut b = a.clone();
    let sa = a.pc_sample(10_000).unwrap();
    let sb = b.pc_sample(10_000).unwrap();
    assert_eq!(sa, sb);
    let mean = sa[0].iter().filter(|&&x| x).count() as f64 / 10_000.0;
    assert!((mean - 0.5).abs() <= 0.015, "mean {mean}");
}

#[test]
fn execute_empty_program() {
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    let mut port = BufferPort::new(0);
    let ex = ca.execute(&[], &mut port, 1_000_000_000).unwrap();
    assert!(ex.results.is_empty());
    assert_eq!(ex.cycles, 0);
}

#[test]
fn execute_sram_bounds() {
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    let mut port = BufferPort::new(0);
    let prog = [LocalInstr::StoreSram {
        addr: 32_768,
        data: vec![1],
    }];
    assert!(matches!(
        ca.execute(&prog, &mut port, 1_000_000_000),
        Err(ArrayError::SramOutOfRange { .. })
    ));
    let prog = [LocalInstr::StoreSram {
        addr: 32_767,
        data: vec![1],
    }];
    assert!(ca.execute(&prog, &mut port, 1_000_000_000).is_ok());
}

#[test]
fn execute_mvm_pipeline_sends_in_order() {
    let mut ca = array(Paradigm::CiM, 4, 4, 8);
    let top = ca.crossbar.params.levels - 1;
    let diag: Vec<Vec<u32>> = (0..4)
        .map(|r| (0..4).map(|c| if r == c { top } else { 0 }).collect())
        .collect();
    let mut prog = vec![
        LocalInstr::Program(ProgramData::Levels { levels: diag }),
        LocalInstr::StoreSram {
            addr: 0,
            data: vec![200, 100, 50, 25],
        },
    ];
    for i in 0..3u32 {
        prog.push(LocalInstr::LoadSram { addr: 0, len: 4 });
        prog.push(LocalInstr::Mvm { input: None });
        prog.push(LocalInstr::SendNoC {
            dst: Target::Node(7),
            tag: i,
            word: WordSource::Acc(0),
        });
    }
    let mut port = BufferPort::new(0);
    let ex = ca.execute(&prog, &mut port, 1_000_000_000).unwrap();
    assert_eq!(port.sent.len(), 3);
    let tags: Vec<u32> = port.sent.iter().map(|p| p.tag).collect();
    assert_eq!(tags, vec![0, 1, 2]);
    let first = match &ex.results[3] {
        InstrResult::Mvm { codes } => codes[0],
        other => panic!("unexpected {other:?}"),
    };
    assert!(port.sent.iter().all(|p| p.payload == first && p.dst == 7));
    // program: 4 analog cycles; store: 1 digital; 3 x (load 1 + mvm 1 analog + send 1)
    assert_eq!(ex.cycles, 4 * 10 + 1 + 3 * (1 + 10 + 1));
}

#[test]
fn execute_recv_blocks_outside_kernel() {
    let mut ca = array(Paradigm::CiM, 2, 2, 8);
    let mut port = BufferPort::new(2);
    let err = ca
        .execute(&[LocalInstr::RecvNoC], &mut port, 1_000_000_000)
        .unwrap_err();
    assert_eq!(err, ArrayError::WouldBlock { pc: 0 });
}

#[test]
fn echo_replies_to_sender() {
    let mut ca = array(Paradigm::CiM, 2, 2, 8);
    let mut port = BufferPort::new(2);
    port.inbox
        .push_back(crate::noc::NoCPacket::new(7, 2, 0xCAFE, 9));
    let prog = [
        LocalInstr::RecvNoC,
        LocalInstr::SendNoC {
            dst: Target::Sender,
            tag: 9,
            word: WordSource::Acc(0),
        },
    ];
    ca.execute(&prog, &mut port, 1_000_000_000).unwrap();
    assert_eq!(port.sent[0].dst, 7);
    assert_eq!(port.sent[0].payload, 0xCAFE);
}

#[test]
fn local_instr_json() {
    let text = r#"[
        {"op": "Program", "levels": [[0, 1], [2, 3]]},
        {"op": "Program", "ternary": ["1X"]},
        {"op": "Mvm"},
        {"op": "SendNoC", "dst": {"node": 7}, "word": {"acc": 0}},
        {"op": "SendNoC", "dst": "sender", "tag": 3, "word": {"literal": 5}},
        {"op": "RecvNoC"}
    ]"#;
    let prog: Vec<LocalInstr> = serde_json::from_str(text).unwrap();
    assert_eq!(prog.len(), 6);
    assert!(matches!(
        prog[1],
        LocalInstr::Program(ProgramData::Ternary { .. })
    ));
    let back: Vec<LocalInstr> =
        serde_json::from_str(&serde_json::to_string(&prog).unwrap()).unwrap();
    assert_eq!(prog, back);
}

#[test]
fn config_rejects_bad_converters() {
    let mut cfg = ArrayConfig::new(Paradigm::CiM);
    cfg.adc_bits = 13;
    assert!(cfg.validate().is_err());
    cfg.adc_bits = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = ArrayConfig::new(Paradigm::CiM);
    cfg.v_read_v = 1.0;
    assert!(cfg.validate().is_err());
}
