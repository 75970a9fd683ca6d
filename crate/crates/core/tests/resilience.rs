use opsforge::resilience::{adaptive_campaign, run_test, CampaignParams, ResilienceReport};
use opsforge::simulator::{resilience_chain, FaultSpec, FaultType, Scenario};

const NON_ENTRY: [&str; 3] = ["catalog", "inventory", "payments"];

fn fault(sc: &Scenario, target: &str, fault_type: FaultType, intensity: f64) -> FaultSpec {
    FaultSpec {
        target_service: target.to_string(),
        fault_type,
        intensity,
        start_ts: sc.start_ts + 400,
        duration_s: 400,
    }
}

fn assert_invariants(r: &ResilienceReport) {
    assert_eq!(r.resilience_index, 1.0 - r.propagation);
    let expect = (r.business_degradation / r.perf_degradation.max(1e-6)).clamp(0.0, 1.0);
    assert_eq!(r.propagation, expect);
    assert!((0.0..=1.0).contains(&r.resilience_index));
    assert!(r.perf_degradation >= 0.0 && r.business_degradation >= 0.0);
}

#[test]
fn fallback_raises_resilience_under_crash() {
    let off = resilience_chain(false);
    let on = resilience_chain(true);
    for target in NON_ENTRY {
        for seed in [1, 2, 3] {
            let a = run_test(&off, &fault(&off, target, FaultType::Crash, 1.0), seed).unwrap();
            let b = run_test(&on, &fault(&on, target, FaultType::Crash, 1.0), seed).unwrap();
            assert_invariants(&a);
            assert_invariants(&b);
            assert!(
                b.resilience_index > a.resilience_index,
                "{target} seed {seed}: {b:?} vs {a:?}"
            );
        }
    }
}

#[test]
fn crash_of_a_single_point_of_failure_is_a_total_outage() {
    let sc = resilience_chain(false);
    for target in ["gateway", "catalog"] {
        let r = run_test(&sc, &fault(&sc, target, FaultType::Crash, 1.0), 4).unwrap();
        assert_eq!(r.perf_degradation, 1.0);
        assert_eq!(r.business_degradation, 1.0);
        assert_eq!(r.propagation, 1.0);
        assert_eq!(r.resilience_index, 0.0);
    }
}

#[test]
fn fault_without_perf_impact_is_fully_resilient() {
    let mut sc = resilience_chain(false);
    sc.effects.delay_factor = 0.0;
    let r = run_test(&sc, &fault(&sc, "inventory", FaultType::Delay, 1.0), 4).unwrap();
    assert!(r.perf_degradation < 1e-6, "{r:?}");
    assert_eq!(r.propagation, 0.0);
    assert_eq!(r.resilience_index, 1.0);
}

#[test]
fn mechanisms_never_lower_resilience() {
    let plain = resilience_chain(false);
    let mut guarded = resilience_chain(true);
    for e in &mut guarded.edges {
        e.retries = 2;
    }
    let mut strictly = 0;
    for fault_type in FaultType::ALL {
        for target in NON_ENTRY {
            let a = run_test(&plain, &fault(&plain, target, fault_type, 0.5), 9).unwrap();
            let b = run_test(&guarded, &fault(&guarded, target, fault_type, 0.5), 9).unwrap();
            assert_invariants(&a);
            assert_invariants(&b);
            assert!(
                b.resilience_index >= a.resilience_index - 1e-12,
                "{fault_type} on {target}: {} < {}",
                b.resilience_index,
                a.resilience_index
            );
            strictly += (b.resilience_index > a.resilience_index) as usize;
        }
    }
    assert!(strictly > 0);
}

#[test]
fn tests_are_deterministic() {
    let sc = resilience_chain(true);
    let f = fault(&sc, "payments", FaultType::Error, 0.7);
    assert_eq!(run_test(&sc, &f, 12).unwrap(), run_test(&sc, &f, 12).unwrap());
}

#[test]
fn invalid_tests_are_rejected() {
    let sc = resilience_chain(false);
    assert!(run_test(&sc, &fault(&sc, "nope", FaultType::Crash, 1.0), 1).is_err());
    assert!(run_test(&sc, &fault(&sc, "catalog", FaultType::Crash, 0.0), 1).is_err());
    let mut no_business = sc.clone();
    no_business.business_metrics.clear();
    assert!(run_test(&no_business, &fault(&sc, "catalog", FaultType::Crash, 1.0), 1).is_err());
    let mut unknown = sc.clone();
    unknown.business_metrics.push("revenue".into());
    assert!(run_test(&unknown, &fault(&sc, "catalog", FaultType::Crash, 1.0), 1).is_err());
}

fn window() -> CampaignParams {
    CampaignParams {
        start_offset_s: Some(400),
        duration_s: Some(400),
        ..CampaignParams::default()
    }
}

#[test]
fn campaign_stops_at_the_knee() {
    // Latency to a leaf scales by 1 + 0.8 i, so perf degradation is 0.8 i and
    // first reaches 0.2 at i = 0.4: runs at 0.1, 0.2 and 0.4.
    let mut sc = resilience_chain(false);
    sc.effects.delay_factor = 0.8;
    let r = adaptive_campaign(&sc, &["inventory".into()], &[FaultType::Delay], &window(), 3).unwrap();
    let cell = &r.cells[0];
    assert_eq!(cell.intensities, vec![0.1, 0.2, 0.4]);
    assert!(cell.manifested);
    assert!(
        (cell.report.perf_degradation - 0.32).abs() < 1e-9,
        "{}",
        cell.report.perf_degradation
    );
    assert_eq!(cell.report.fault.intensity, 0.4);
}

#[test]
fn campaign_single_run_when_i0_manifests() {
    let sc = resilience_chain(false);
    let r = adaptive_campaign(&sc, &["catalog".into()], &[FaultType::Crash], &window(), 3).unwrap();
    assert_eq!(r.cells[0].runs(), 1);
    assert!(r.cells[0].manifested);
}

#[test]
fn shielded_fault_is_not_manifested() {
    let mut sc = resilience_chain(false);
    sc.effects.delay_factor = 0.0;
    let r = adaptive_campaign(&sc, &["payments".into()], &[FaultType::Delay], &window(), 3).unwrap();
    let cell = &r.cells[0];
    assert!(!cell.manifested);
    assert_eq!(cell.intensities, vec![0.1, 0.2, 0.4, 0.8, 1.0]);
    assert_eq!(cell.report.propagation, 0.0);
    assert_eq!(cell.report.resilience_index, 1.0);
    assert!(r.table().contains("NOT-MANIFESTED"));
}

#[test]
fn campaign_run_count_is_bounded() {
    let sc = resilience_chain(true);
    let services: Vec<String> = sc.service_ids();
    let params = window();
    let r = adaptive_campaign(&sc, &services, &FaultType::ALL, &params, 5).unwrap();
    assert_eq!(r.cells.len(), services.len() * FaultType::ALL.len());
    let bound = services.len() * FaultType::ALL.len() * params.max_runs_per_cell();
    assert!(r.total_runs() <= bound, "{} > {bound}", r.total_runs());
    for c in &r.cells {
        assert!(c.runs() <= params.max_runs_per_cell());
        assert_invariants(&c.report);
    }
    let table = r.table();
    assert_eq!(table.lines().count(), r.cells.len() + 1);
}

#[test]
fn campaign_rejects_bad_parameters() {
    let sc = resilience_chain(false);
    let p = window();
    assert!(adaptive_campaign(&sc, &[], &[FaultType::Crash], &p, 1).is_err());
    assert!(adaptive_campaign(&sc, &["catalog".into()], &[], &p, 1).is_err());
    let flat = CampaignParams { escalation: 1.0, ..p };
    assert!(adaptive_campaign(&sc, &["catalog".into()], &[FaultType::Crash], &flat, 1).is_err());
    let zero = CampaignParams { manifest: 0.0, ..p };
    assert!(adaptive_campaign(&sc, &["catalog".into()], &[FaultType::Crash], &zero, 1).is_err());
}
