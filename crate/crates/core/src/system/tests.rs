use super::*;
use crate::arrays::{Target, WordSource};
use crate::chipdesc::reference_chip;
use crate::control::{
    reg_ca_div, reg_ca_mode, reg_rx_route, CTRL_MONITOR_OFF, MODE_OVERRIDE, REG_CTRL, ROUTE_VALID,
};
use crate::noc::Topology;

fn chip() -> System {
    System::new(&reference_chip(), 7).unwrap()
}

fn run_until(sys: &mut System, max: u64, done: impl Fn(&System) -> bool) -> u64 {
    let start = sys.cycle();
    while !done(sys) {
        assert!(
            sys.cycle() - start < max,
            "condition not reached in {max} cycles"
        );
        sys.tick().unwrap();
    }
    sys.cycle() - start
}

#[test]
fn builds_seven_arrays_in_reference_order() {
    let sys = chip();
    let got: Vec<_> = sys.arrays.iter().map(|a| a.paradigm()).collect();
    assert_eq!(got, chipdesc::REFERENCE_PARADIGMS.to_vec());
    assert!(sys.is_quiescent());
}

#[test]
fn rejects_wrong_array_count() {
    let mut desc = reference_chip();
    let idx = desc
        .blocks
        .iter()
        .position(|b| b.array.is_some() || b.name == "CA6")
        .unwrap();
    desc.blocks.remove(idx);
    assert!(matches!(
        System::new(&desc, 0),
        Err(SystemError::ArrayCount(6)) | Err(SystemError::Desc(_))
    ));
}

#[test]
fn echo_through_array_reaches_host() {
    let mut sys = chip();
    sys.load_ca(
        0,
        vec![
            LocalInstr::RecvNoC,
            LocalInstr::SendNoC {
                dst: Target::Sender,
                tag: 3,
                word: WordSource::Literal(0xCAFE_F00D),
            },
        ],
    )
    .unwrap();
    let trace = sys
        .run_sequencer(
            vec![
                SeqInstr::SendNoC {
                    dst: 0,
                    tag: 1,
                    word: SeqWord::Literal(5),
                },
                SeqInstr::AwaitNoC,
                SeqInstr::Halt,
            ],
            10_000,
        )
        .unwrap();
    assert_eq!(trace.len(), 2);
    assert_eq!(trace[1].value, Some(0xCAFE_F00D));
    run_until(&mut sys, 1000, System::is_quiescent);
    assert_eq!(sys.axi.host_rx, 0xCAFE_F00Du32.to_le_bytes());
    assert!(matches!(
        sys.ca_results(0)[0],
        InstrResult::Received {
            src: 7,
            payload: 5,
            ..
        }
    ));
    let ready: Vec<_> = sys.irq_out.events.iter().map(|e| e.cause).collect();
    assert_eq!(ready, vec![IrqCause::Ready]);
}

#[test]
fn mailbox_word_forwarded_from_host() {
    let mut sys = chip();
    sys.axi.host_send(&[0x78, 0x56, 0x34, 0x12]);
    sys.load_ca(1, vec![LocalInstr::RecvNoC]).unwrap();
    sys.run_sequencer(
        vec![
            SeqInstr::SendNoC {
                dst: 1,
                tag: 0,
                word: SeqWord::Mailbox,
            },
            SeqInstr::Halt,
        ],
        10_000,
    )
    .unwrap();
    run_until(&mut sys, 1000, |s| !s.ca_running(1));
    assert!(matches!(
        sys.ca_results(1)[0],
        InstrResult::Received {
            payload: 0x1234_5678,
            ..
        }
    ));
    assert!(sys.axi.mailbox.is_empty());
}

#[test]
fn irq_in_selects_bank_on_next_cycle() {
    let mut sys = chip();
    sys.regs.jtag_write(1, reg_ca_div(2), 4).unwrap();
    sys.tick().unwrap();
    assert_eq!(sys.active_config().ca_dividers[2], 1);
    sys.set_irq_in(true);
    sys.tick().unwrap();
    assert_eq!(sys.active_config().ca_dividers[2], 4);
    sys.set_irq_in(false);
    sys.tick().unwrap();
    assert_eq!(sys.active_config().ca_dividers[2], 1);
}

#[test]
fn irq_handle_works_across_threads() {
    let mut sys = chip();
    sys.regs.jtag_write(1, REG_CTRL, CTRL_MONITOR_OFF).unwrap();
    let line = sys.irq_in();
    std::thread::spawn(move || line.set(true)).join().unwrap();
    sys.tick().unwrap();
    assert!(!sys.active_config().monitor_enabled);
}

fn load_duration(divider: u32) -> u64 {
    let mut sys = chip();
    sys.regs.jtag_write(0, reg_ca_div(0), divider).unwrap();
    sys.tick().unwrap();
    sys.load_ca(0, vec![LocalInstr::LoadSram { addr: 0, len: 256 }])
        .unwrap();
    run_until(&mut sys, 1_000_000, |s| !s.ca_running(0))
}

#[test]
fn divider_scales_digital_latency() {
    let t1 = load_duration(1);
    let t4 = load_duration(4);
    assert!(t1 > 1);
    assert_eq!(t4, 4 * t1);
}

#[test]
fn sram_overflow_raises_soft_error() {
    let mut sys = chip();
    sys.load_ca(
        3,
        vec![LocalInstr::LoadSram {
            addr: 32_760,
            len: 16,
        }],
    )
    .unwrap();
    sys.run(4).unwrap();
    let status = &sys.ca_status()[3];
    assert!(!status.running);
    assert!(
        status.error.as_deref().unwrap().contains("SRAM"),
        "{:?}",
        status.error
    );
    let ev = &sys.irq_out.events[0];
    assert_eq!(
        (ev.source.as_str(), ev.cause, ev.cycle),
        ("CA3", IrqCause::SoftError, 0)
    );
    assert!(sys.irq_out.level);
}

#[test]
fn mode_override_reconfigures_on_run() {
    let mut sys = chip();
    sys.form_all(3.0).unwrap();
    sys.regs
        .jtag_write(
            0,
            reg_ca_mode(0),
            MODE_OVERRIDE | crate::control::paradigm_bits(crate::arrays::Paradigm::PC),
        )
        .unwrap();
    sys.tick().unwrap();
    sys.run_sequencer(
        vec![
            SeqInstr::RunCA {
                ca: 0,
                program: vec![LocalInstr::PcSample { n: 4 }],
            },
            SeqInstr::Halt,
        ],
        1000,
    )
    .unwrap();
    run_until(&mut sys, 10_000, |s| !s.ca_running(0));
    assert_eq!(sys.ca_status()[0].error, None);
    assert_eq!(sys.arrays[0].paradigm(), crate::arrays::Paradigm::PC);
    assert!(
        matches!(&sys.ca_results(0)[0], InstrResult::Samples { bits } if bits.len() == 64 && bits[0].len() == 4)
    );
}

#[test]
fn halt_raises_ready_without_trace_entry() {
    let mut sys = chip();
    let trace = sys.run_sequencer(vec![SeqInstr::Halt], 10).unwrap();
    assert!(trace.is_empty());
    assert_eq!(sys.irq_out.events.len(), 1);
    assert_eq!(sys.irq_out.events[0].cause, IrqCause::Ready);
}

#[test]
fn running_off_the_end_halts_silently() {
    let mut sys = chip();
    let trace = sys
        .run_sequencer(vec![SeqInstr::ReadReg { addr: REG_CTRL }], 10)
        .unwrap();
    assert_eq!(trace.len(), 1);
    assert!(sys.irq_out.events.is_empty());
}

#[test]
fn wait_irq_blocks_until_budget() {
    let mut sys = chip();
    let err = sys
        .run_sequencer(vec![SeqInstr::WaitIrq, SeqInstr::Halt], 100)
        .unwrap_err();
    assert_eq!(err, SystemError::CycleBudgetExhausted(100));
    sys.set_irq_in(true);
    run_until(&mut sys, 10, System::sequencer_halted);
}

#[test]
fn sequencer_runs_at_processor_clock() {
    let mut sys = chip();
    let prog = vec![SeqInstr::ReadReg { addr: REG_CTRL }; 5];
    let trace = sys.run_sequencer(prog, 100).unwrap();
    let cycles: Vec<_> = trace.iter().map(|t| t.cycle).collect();
    assert_eq!(cycles, vec![0, 2, 4, 6, 8]);
}

#[test]
fn bad_register_is_a_soft_error() {
    let mut sys = chip();
    let err = sys
        .run_sequencer(vec![SeqInstr::ReadReg { addr: 0x1000 }], 10)
        .unwrap_err();
    assert!(matches!(
        err,
        SystemError::Control(ControlError::BadAddress(0x1000))
    ));
    assert_eq!(sys.irq_out.events[0].cause, IrqCause::SoftError);
}

#[test]
fn ttl_bytes_reach_routed_node() {
    let mut sys = chip();
    sys.feed_rx([(1, 0x44), (1, 0x33), (1, 0x22), (1, 0x11)].map(|(a, b)| (b, a)));
    run_until(&mut sys, 1000, |s| {
        !s.inbox(PROCESSOR_NODE).unwrap().is_empty()
    });
    let pkt = &sys.inbox(PROCESSOR_NODE).unwrap()[0];
    assert_eq!((pkt.src, pkt.payload, pkt.tag), (8, 0x1122_3344, 1));
    // one byte per 20 beats at two beats per cycle
    assert!(sys.cycle() >= 30);
}

#[test]
fn unrouted_stream_is_discarded() {
    let mut sys = chip();
    sys.feed_rx((0..4).map(|b| (b, 0)));
    sys.run(200).unwrap();
    assert_eq!(sys.inbound_discarded(), 1);
    assert!(sys.inbox(PROCESSOR_NODE).unwrap().is_empty());
}

#[test]
fn reroute_stream_to_array() {
    let mut sys = chip();
    sys.regs
        .jtag_write(0, reg_rx_route(1), ROUTE_VALID | 4)
        .unwrap();
    sys.load_ca(4, vec![LocalInstr::RecvNoC]).unwrap();
    sys.feed_rx((0..4).map(|b| (b, 1)));
    run_until(&mut sys, 1000, |s| !s.ca_running(4));
    assert!(matches!(
        sys.ca_results(4)[0],
        InstrResult::Received { src: 8, .. }
    ));
}

#[test]
fn ring_delivers_inbound_directly() {
    let mut desc = reference_chip();
    desc.noc.topology = Topology::Ring8;
    let mut sys = System::new(&desc, 1).unwrap();
    sys.feed_rx((0..4).map(|b| (b, 1)));
    run_until(&mut sys, 1000, |s| {
        !s.inbox(PROCESSOR_NODE).unwrap().is_empty()
    });
    assert_eq!(sys.inbox(PROCESSOR_NODE).unwrap()[0].payload, 0x0302_0100);
}

#[test]
fn chip_pair_carries_word_between_hosts() {
    let a = chip();
    let b = System::new(&reference_chip(), 8).unwrap();
    let mut pair = ChipPair::new(a, b).unwrap();
    pair.a.load_sequencer(vec![
        SeqInstr::SendNoC {
            dst: 8,
            tag: 0,
            word: SeqWord::Literal(0xA5A5_0001),
        },
        SeqInstr::Halt,
    ]);
    pair.b
        .load_sequencer(vec![SeqInstr::AwaitNoC, SeqInstr::Halt]);
    for _ in 0..2000 {
        pair.tick().unwrap();
        if pair.b.is_quiescent() {
            break;
        }
    }
    assert!(pair.b.is_quiescent());
    assert_eq!(pair.b.axi.host_rx, 0xA5A5_0001u32.to_le_bytes());
    assert_eq!(pair.a.bridge().stats().tx_words, 1);
    assert!(pair.a.receiver().captured.is_empty());
}

#[test]
fn pair_rejects_reconnection() {
    let mut a = chip();
    let mut b = chip();
    bridge::connect(a.bridge_mut(), b.bridge_mut()).unwrap();
    assert!(matches!(ChipPair::new(a, b), Err(SystemError::Bridge(_))));
}

fn loaded(pattern: ReadyPattern) -> System {
    let mut sys = chip();
    sys.set_traffic(Some(TrafficSpec {
        pattern: TrafficPattern::UniformRandom,
        rate: 1.0,
    }))
    .unwrap();
    sys.set_receiver(pattern);
    sys.run(3000).unwrap();
    sys
}

#[test]
fn monitor_keeps_up_with_saturated_noc() {
    let sys = loaded(ReadyPattern::Always);
    let noc = sys.noc().stats();
    let br = sys.bridge().stats();
    assert!(noc.delivered > 2000, "{noc:?}");
    assert_eq!(br.monitor_drops, 0);
    assert_eq!(br.monitor_words, noc.delivered);
    let captured = sys.receiver().captured.len() as u64;
    assert!(br.monitor_words - captured <= 16);
}

#[test]
fn monitor_drops_when_receiver_stalls() {
    let sys = loaded(ReadyPattern::Ratio { num: 1, den: 2 });
    assert!(sys.bridge().stats().monitor_drops > 0);
}

#[test]
fn monitor_disabled_by_register() {
    let mut sys = chip();
    sys.regs.jtag_write(0, REG_CTRL, CTRL_MONITOR_OFF).unwrap();
    sys.set_traffic(Some(TrafficSpec {
        pattern: TrafficPattern::Pipeline,
        rate: 0.5,
    }))
    .unwrap();
    sys.run(500).unwrap();
    assert!(sys.noc().stats().delivered > 0);
    assert_eq!(sys.bridge().stats().monitor_words, 0);
    assert!(sys.receiver().captured.is_empty());
}

#[test]
fn traffic_is_seeded() {
    let spec = TrafficSpec {
        pattern: TrafficPattern::Hotspot {
            node: 3,
            fraction: 0.5,
        },
        rate: 0.3,
    };
    let run = |seed| {
        let mut s = System::new(&reference_chip(), seed).unwrap();
        s.set_traffic(Some(spec)).unwrap();
        s.run(400).unwrap();
        (s.noc().stats(), s.receiver().captured.clone())
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).1, run(6).1);
}

#[test]
fn traffic_spec_validated() {
    let mut sys = chip();
    let bad = TrafficSpec {
        pattern: TrafficPattern::UniformRandom,
        rate: 1.5,
    };
    assert!(matches!(
        sys.set_traffic(Some(bad)),
        Err(SystemError::Traffic(_))
    ));
    let spec: TrafficSpec =
        serde_json::from_str(r#"{"pattern":"hotspot","node":2,"fraction":0.25,"rate":0.1}"#)
            .unwrap();
    assert_eq!(
        spec.pattern,
        TrafficPattern::Hotspot {
            node: 2,
            fraction: 0.25
        }
    );
}

#[test]
fn activity_feeds_energy() {
    let mut sys = chip();
    sys.form_all(3.0).unwrap();
    sys.load_ca(
        0,
        vec![
            LocalInstr::Program(crate::arrays::ProgramData::Levels {
                levels: vec![vec![1; 64]; 64],
            }),
            LocalInstr::Mvm {
                input: Some(vec![1; 64]),
            },
        ],
    )
    .unwrap();
    run_until(&mut sys, 100_000, System::is_quiescent);
    assert_eq!(sys.ca_status()[0].error, None);
    let log = sys.activity();
    assert!(log.events.sets > 0);
    assert!(log.active[CA_ANALOG_BLOCK] > 0);
    let e = crate::budget::energy_report(sys.description(), &log).unwrap();
    assert!(e.total_pj > 0.0);
}

#[test]
fn mbist_covers_all_instances() {
    let mut sys = chip();
    sys.shared_sram[1].inject(crate::sram::StuckAt {
        addr: 100,
        bit: 3,
        value: true,
    });
    let res = sys.mbist_all();
    assert_eq!(res.len(), CA_COUNT + 2);
    assert!(res[..8].iter().all(|r| r.pass));
    assert_eq!(res[8].first_fault_addr, Some(100));
}

#[test]
fn scan_uses_chain_state() {
    let mut sys = chip();
    assert_eq!(sys.scan_check().unwrap().coverage, 1.0);
    sys.scan.scan_enable = false;
    assert!(matches!(
        sys.scan_check(),
        Err(SystemError::Control(ControlError::ScanDisabled))
    ));
}
