//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL`
//! line on stderr, bypassing the test harness capture, with its runtime.

mod common;

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::thread;
use std::time::{Duration, Instant};

use meshnoc::demo::{self, FREEZE_TARGET};
use meshnoc::endpoint::{EndpointConfig, EndpointKind};
use meshnoc::nodes::{LockClient, MemorySlave, StreamingMaster};
use meshnoc::packet::Coordinate;
use meshnoc::router::Direction;
use meshnoc::sim::{
    bisection_bound, pattern_capacity, simulate, uniform_crossing_fraction, zero_load_latency,
    Fabric, FabricConfig, MeshDims, Network, SimReport, TrafficPattern, TrafficSpec,
};
use proptest::prelude::*;

use common::{ordering_violations, random_scenario};

fn verdict(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> String) {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(body));
    let took = start.elapsed();
    let line = match &outcome {
        Ok(detail) if took <= budget => {
            format!("PASS criterion {id:02} {name} ({took:.2?} / {budget:?}): {detail}")
        }
        Ok(detail) => {
            format!("FAIL criterion {id:02} {name} over budget ({took:.2?} / {budget:?}): {detail}")
        }
        Err(_) => format!("FAIL criterion {id:02} {name} ({took:.2?})"),
    };
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    match outcome {
        Ok(_) => assert!(took <= budget, "{line}"),
        Err(e) => panic::resume_unwind(e),
    }
}

fn sweep(
    cfg: &FabricConfig,
    pattern: TrafficPattern,
    rates: &[f64],
    measure: u64,
) -> Vec<SimReport> {
    thread::scope(|s| {
        let handles: Vec<_> = rates
            .iter()
            .map(|&rate| {
                s.spawn(move || {
                    let spec = TrafficSpec {
                        measure_packets: measure,
                        drain: false,
                        max_cycles: 60_000,
                        ..TrafficSpec::new(pattern, rate)
                    };
                    simulate(cfg, &spec).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

/// Highest swept rate below the first saturated point.
fn saturation_rate(rates: &[f64], reports: &[SimReport]) -> f64 {
    let first = reports
        .iter()
        .position(|r| r.saturated)
        .unwrap_or(rates.len());
    if first == 0 {
        0.0
    } else {
        rates[first - 1]
    }
}

#[test]
fn criterion_01_golden_round_trip() {
    verdict(1, "golden round trip", Duration::from_secs(1), || {
        let run = demo::golden_roundtrip(3, EndpointConfig::default()).unwrap();
        assert!(run.passed, "{:#?}", run.trace);
        assert_eq!(run.counters(), vec![7, 8, 9], "{:#?}", run.trace);
        assert!(run.checks.iter().all(|c| c.expected == Some(c.returned)));
        assert_eq!(
            run.monitor_lines()[0],
            "cycle 7, returned=00000000, expected=000"
        );
        let single = demo::golden_roundtrip(1, EndpointConfig::default()).unwrap();
        assert_eq!(single.counters(), vec![7]);
        run.monitor_lines().join("; ")
    });
}

#[test]
fn criterion_02_turn_legality() {
    verdict(2, "turn legality", Duration::from_secs(30), || {
        let cfg = FabricConfig::default();
        let runs = [
            (TrafficPattern::UniformRandom, 0.2),
            (TrafficPattern::Transpose, 0.12),
            (TrafficPattern::NearestNeighbor, 0.5),
        ];
        let reports: Vec<SimReport> = thread::scope(|s| {
            let hs: Vec<_> = runs
                .iter()
                .map(|&(p, r)| {
                    let cfg = &cfg;
                    s.spawn(move || {
                        let spec = TrafficSpec {
                            load_fraction: 0.5,
                            measure_packets: 40_000,
                            ..TrafficSpec::new(p, r)
                        };
                        simulate(cfg, &spec).unwrap()
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let delivered: u64 = reports.iter().map(|r| r.delivered).sum();
        assert!(delivered >= 100_000, "only {delivered} delivered");
        let n = Direction::N.index();
        let mut illegal = 0;
        for r in &reports {
            for h in [r.turns_fwd, r.turns_rev] {
                illegal += h[n][Direction::W.index()] + h[n][Direction::E.index()];
            }
        }
        assert_eq!(illegal, 0);
        format!("{delivered} packets, 0 north-to-east/west hops")
    });
}

#[test]
fn criterion_03_deadlock_freedom_and_conservation() {
    verdict(
        3,
        "deadlock freedom and conservation",
        Duration::from_secs(120),
        || {
            let seeds: Vec<u64> = (0..100).collect();
            let packets: u64 = thread::scope(|s| {
                let hs: Vec<_> = seeds
                    .chunks(13)
                    .map(|chunk| {
                        s.spawn(move || {
                            let mut total = 0u64;
                            for &seed in chunk {
                                let mut sc = random_scenario(seed);
                                assert!(sc.run_and_drain(500_000), "seed {seed} did not drain");
                                let f = &sc.fabric;
                                for r in f.records() {
                                    assert!(
                                        r.delivery.is_some(),
                                        "seed {seed}: packet {} lost",
                                        r.id
                                    );
                                    assert!(
                                        r.reply_delivered.is_some(),
                                        "seed {seed}: reply {} lost",
                                        r.id
                                    );
                                }
                                assert!(
                                    f.reply_findings().is_empty(),
                                    "seed {seed}: {:?}",
                                    f.reply_findings()
                                );
                                for at in f.attached().collect::<Vec<_>>() {
                                    assert_eq!(f.outstanding(at), Some(0));
                                    if let Some(ep) = f.endpoint(at).and_then(|e| e.as_standard()) {
                                        assert_eq!(
                                            ep.credits(),
                                            ep.config().max_out_credits,
                                            "seed {seed} at {at}"
                                        );
                                    }
                                }
                                total += f.records().len() as u64;
                            }
                            total
                        })
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).sum()
            });
            format!("100 scenarios, {packets} packets delivered, all credits restored")
        },
    );
}

#[test]
fn criterion_04_ordering() {
    verdict(4, "ordering", Duration::from_secs(10), || {
        let seeds: Vec<u64> = (0..100).collect();
        thread::scope(|s| {
            for chunk in seeds.chunks(13) {
                s.spawn(move || {
                    for &seed in chunk {
                        let mut sc = random_scenario(seed);
                        sc.run_and_drain(500_000);
                        let bad = ordering_violations(sc.fabric.records());
                        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
                    }
                });
            }
        });
        let loads = demo::ordering_demo().unwrap();
        let (far, near, far2) = (loads[0], loads[1], loads[2]);
        assert!(near.fired > far.fired);
        assert!(near.returned < far.returned, "{loads:?}");
        assert!(far2.returned > far.returned);
        format!(
            "far load fired {} returned {}, near load fired {} returned {}",
            far.fired, far.returned, near.fired, near.returned
        )
    });
}

#[test]
fn criterion_05_bisection_analytics() {
    verdict(5, "bisection analytics", Duration::from_secs(30), || {
        let spec = TrafficSpec {
            measure_packets: 40_000,
            ..TrafficSpec::new(TrafficPattern::UniformRandom, 0.1)
        };
        let report = simulate(&FabricConfig::default(), &spec).unwrap();
        let want = uniform_crossing_fraction(MeshDims::square(8));
        let got = report.crossing_fraction();
        assert!((got - want).abs() / want < 0.05, "{got} vs {want}");
        let b16 = bisection_bound(16).unwrap();
        assert_eq!(b16, 0.25);
        assert_eq!(1.0 / b16, 4.0);
        format!(
            "crossing fraction {got:.4} vs {want:.4}, bound(16) = 1 per {} cycles",
            1.0 / b16
        )
    });
}

#[test]
fn criterion_06_saturation_bracketing() {
    verdict(6, "saturation bracketing", Duration::from_secs(120), || {
        let cfg = FabricConfig::default();
        let rates: Vec<f64> = (1..=20).map(|i| i as f64 * 0.025).collect();
        let reports = sweep(&cfg, TrafficPattern::UniformRandom, &rates, 20_000);
        let sat = saturation_rate(&rates, &reports);
        let lat: Vec<f64> = reports.iter().map(|r| r.latency.unwrap().mean).collect();
        assert!((0.25..=0.5).contains(&sat), "saturation at {sat}");
        for w in lat.windows(2) {
            assert!(w[1] >= w[0], "latency not monotone: {lat:?}");
        }
        let first = rates.iter().position(|&r| r > sat).unwrap();
        let zero = zero_load_latency(TrafficPattern::UniformRandom, MeshDims::square(8));
        assert!(lat[first] > 5.0 * zero, "no spike: {lat:?}");
        format!(
            "saturates above {sat:.3} (accepted {:.3}), latency {:.1} -> {:.1} cycles",
            reports[first - 1].accepted_throughput,
            lat[first - 1],
            lat[first]
        )
    });
}

#[test]
fn criterion_07_pattern_ordering() {
    verdict(7, "pattern ordering", Duration::from_secs(180), || {
        let cfg = FabricConfig::default();
        let dims = cfg.dims();
        let fractions: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let normalized: Vec<(TrafficPattern, f64)> = TrafficPattern::ALL
            .iter()
            .map(|&p| {
                let cap = pattern_capacity(p, dims).unwrap();
                let rates: Vec<f64> = fractions.iter().map(|f| f * cap).collect();
                let reports = sweep(&cfg, p, &rates, 10_000);
                (p, saturation_rate(&rates, &reports) / cap)
            })
            .collect();
        let get = |p| normalized.iter().find(|(q, _)| *q == p).unwrap().1;
        let (nn, uni, tr) = (
            get(TrafficPattern::NearestNeighbor),
            get(TrafficPattern::UniformRandom),
            get(TrafficPattern::Transpose),
        );
        assert!(
            nn > uni && uni > tr,
            "nn {nn}, uniform {uni}, transpose {tr}"
        );
        format!("normalized saturation nn {nn:.2} > uniform {uni:.2} > transpose {tr:.2}")
    });
}

#[test]
fn criterion_08_fence_and_freeze() {
    verdict(8, "fence and freeze", Duration::from_secs(5), || {
        let run = demo::golden_roundtrip(8, EndpointConfig::default()).unwrap();
        let (_, credits, max) = run.fence_exit.unwrap();
        assert_eq!(credits, max);

        let s = demo::freeze_demo(150).unwrap();
        let froze = s.iter().position(|x| x.freeze).expect("never froze");
        let thawed = froze
            + s[froze..]
                .iter()
                .position(|x| !x.freeze)
                .expect("never thawed");
        assert!(
            s[..froze].iter().any(|x| x.issued),
            "not issuing before freeze"
        );
        assert!(
            s[froze + 1..=thawed].iter().all(|x| !x.issued),
            "issued while frozen"
        );
        assert!(s[thawed + 1..].iter().any(|x| x.issued), "did not resume");
        let toggled = s
            .iter()
            .position(|x| x.arb_priority)
            .expect("never toggled");
        let restored = toggled
            + s[toggled..]
                .iter()
                .position(|x| !x.arb_priority)
                .expect("not restored");
        assert!(s[restored..].iter().all(|x| !x.arb_priority));
        format!(
            "fence exits with {credits}/{max}; {FREEZE_TARGET} frozen cycles {}..={}, arb priority toggled at {} and back at {}",
            s[froze].cycle, s[thawed].cycle, s[toggled].cycle, s[restored].cycle
        )
    });
}

#[test]
fn criterion_09_streaming_flow_control() {
    verdict(9, "streaming flow control", Duration::from_secs(10), || {
        let cap = 4u32;
        let peer_ep = EndpointKind::Standard(EndpointConfig {
            fifo_els: cap as usize,
            ..EndpointConfig::default()
        });
        let mut summary = Vec::new();
        for peer in [
            Coordinate::new(1, 0),
            Coordinate::new(7, 0),
            Coordinate::new(7, 7),
            Coordinate::new(3, 5),
        ] {
            let src = Coordinate::new(0, 0);
            let mut f = Fabric::builder(FabricConfig::default())
                .node(src, StreamingMaster::new(peer, 0, 2_000, cap, 32))
                .node_with(peer, peer_ep, MemorySlave::new(32))
                .build()
                .unwrap();
            assert!(f.run_until_quiescent(100_000).unwrap());
            let m = f.node::<StreamingMaster>(src).unwrap();
            assert_eq!(m.sent(), 2_000);
            assert!(m.peak_outstanding() <= cap, "peak {}", m.peak_outstanding());
            assert_eq!(f.backpressure_events(Network::Forward), 0, "peer {peer}");
            summary.push(format!("{peer}: peak {}", m.peak_outstanding()));
        }
        format!("capacity {cap}, zero backpressure; {}", summary.join(", "))
    });
}

fn lock_run(positions: &[Coordinate; 6], iterations: u32) {
    let lock_at = positions[4];
    let counter_at = positions[5];
    let mut b = Fabric::builder(FabricConfig::mesh(4, 4));
    for (i, &at) in positions[..4].iter().enumerate() {
        b = b.node(
            at,
            LockClient::new(i as u64 + 1, (lock_at, 0), (counter_at, 1), iterations, 32),
        );
    }
    b = b.node(lock_at, MemorySlave::new(32).with_log());
    if counter_at != lock_at {
        b = b.node(counter_at, MemorySlave::new(32));
    }
    let mut f = b.build().unwrap();
    assert!(
        f.run_until_quiescent(200_000).unwrap(),
        "lock run did not finish"
    );

    let mut holds: Vec<(u64, u64)> = Vec::new();
    for &at in &positions[..4] {
        let c = f.node::<LockClient>(at).unwrap();
        assert_eq!(c.completed(), iterations);
        assert_eq!(c.bad_releases(), 0);
        holds.extend_from_slice(c.holds());
    }
    holds.sort();
    for w in holds.windows(2) {
        assert!(w[0].1 < w[1].0, "overlapping critical sections {w:?}");
    }
    // The memory's own log must alternate acquire and release by one owner.
    let mem = f.node::<MemorySlave>(lock_at).unwrap();
    let mut owner = 0u64;
    let mut acquires = 0;
    for c in mem.commits().iter().filter(|c| c.addr == 0) {
        if c.new != c.old {
            if owner == 0 {
                assert_eq!(c.old, 0);
                owner = c.new;
                acquires += 1;
            } else {
                assert_eq!((c.old, c.new), (owner, 0), "release by a non-owner");
                owner = 0;
            }
        }
    }
    assert_eq!(owner, 0);
    assert_eq!(acquires, 4 * iterations);
    let counter = f.node::<MemorySlave>(counter_at).unwrap().read(1);
    assert_eq!(counter, 4 * iterations as u64);
}

fn distinct_positions() -> impl Strategy<Value = [Coordinate; 6]> {
    Just((0..16u32).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(|v| {
            let pick = |i: usize| Coordinate::new(v[i] % 4, v[i] / 4);
            let base = [pick(0), pick(1), pick(2), pick(3), pick(4), pick(5)];
            // Half the cases share one memory for lock and counter.
            prop_oneof![
                Just(base),
                Just({
                    let mut b = base;
                    b[5] = b[4];
                    b
                })
            ]
        })
}

#[test]
fn criterion_10_lock_correctness() {
    verdict(10, "lock correctness", Duration::from_secs(30), || {
        let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
            cases: 24,
            ..ProptestConfig::default()
        });
        runner
            .run(&distinct_positions(), |pos| {
                lock_run(&pos, 8);
                Ok(())
            })
            .unwrap();
        lock_run(
            &[
                Coordinate::new(0, 0),
                Coordinate::new(3, 0),
                Coordinate::new(0, 3),
                Coordinate::new(3, 3),
                Coordinate::new(1, 1),
                Coordinate::new(2, 2),
            ],
            25,
        );
        "24 placements plus a corner run, exclusive holds, counter matches".to_string()
    });
}
