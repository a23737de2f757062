//! Invariants over randomised inputs.

use dpspon::keyrate::secure_rate;
use dpspon::link::{
    click_rate_oracle, DetectorModel, Origin, Port, TimeTag, TimeTagStream, TransmitterConfig,
};
use dpspon::raman::{odn_noise_at_bob, ChannelPlan, RamanProfile};
use dpspon::sifting::{apply_gate, GateConfig};
use dpspon::topology::{Element, FilterProfile, OdnTopology, Splitter};
use proptest::prelude::*;

const ELEMENTS: [Element; 6] = [
    Element::OnuFilter,
    Element::Drop,
    Element::Splitter,
    Element::FeederUp,
    Element::FeederDown,
    Element::CoFilter,
];

fn element() -> impl Strategy<Value = Element> {
    prop::sample::select(ELEMENTS.to_vec())
}

fn topology(feeder_km: f64, drop_km: f64, ports: u32) -> OdnTopology {
    let mut topo = OdnTopology::default();
    topo.feeder_up.length_km = feeder_km;
    topo.feeder_down.length_km = feeder_km;
    topo.drop.length_km = drop_km;
    topo.splitter = Splitter::new(ports);
    topo
}

fn upstream_noise(topo: &OdnTopology, power_dbm: f64) -> f64 {
    let plan = ChannelPlan::empty().with(ChannelPlan::upstream_c_band(1, power_dbm));
    let profile = RamanProfile::default();
    odn_noise_at_bob(&plan, topo, &FilterProfile::dwdm_measured(1310.0), &profile)
        .unwrap()
        .total_at_receiver
}

proptest! {
    #[test]
    fn path_loss_is_additive(
        head in prop::collection::vec(element(), 0..6),
        tail in prop::collection::vec(element(), 0..6),
        nm in 1260.0..1625.0f64,
        feeder in 0.0..40.0f64,
    ) {
        let topo = topology(feeder, 1.0, 16);
        let whole: Vec<Element> = head.iter().chain(&tail).copied().collect();
        let total = topo.path_loss(nm, &whole).unwrap();
        let parts = topo.path_loss(nm, &head).unwrap() + topo.path_loss(nm, &tail).unwrap();
        let elementwise: f64 = whole.iter().map(|&e| topo.element_loss(e, nm).unwrap()).sum();
        prop_assert!((total - parts).abs() <= 1e-9);
        prop_assert!((total - elementwise).abs() <= 1e-9);
        prop_assert!(total >= 0.0);
    }

    #[test]
    fn gating_is_idempotent_and_inside_the_window(
        times in prop::collection::vec(0u64..2_000_000, 1..400),
        fraction in 0.05..1.0f64,
    ) {
        let mut times = times;
        times.sort_unstable();
        let stream = TimeTagStream {
            tags: times
                .iter()
                .map(|&time_ps| TimeTag { time_ps, port: Port::Constructive, origin: Origin::Raman })
                .collect(),
            duration_s: 2e-6,
            ..TimeTagStream::default()
        };
        let gate = GateConfig { gate_fraction: fraction, ..GateConfig::default() };
        let once = apply_gate(&stream, &gate).unwrap();
        let twice = apply_gate(&once, &gate).unwrap();
        prop_assert_eq!(&once.tags, &twice.tags);
        prop_assert_eq!(once.gated_rejected, twice.gated_rejected);
        prop_assert_eq!(once.len() as u64 + once.gated_rejected, stream.len() as u64);
        let phase = once.slot_phase_ps.unwrap();
        for t in &once.tags {
            let offset = (t.time_ps as f64 - phase).rem_euclid(1000.0) - 500.0;
            prop_assert!(offset.abs() <= fraction * 500.0 + 1e-6);
        }
    }

    #[test]
    fn secure_rate_never_grows_with_qber(
        e1 in 0.0..0.15f64,
        e2 in 0.0..0.15f64,
        f in 1.0..2.0f64,
        raw in 0.0..1e5f64,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = secure_rate(raw, lo, f).unwrap();
        let r_hi = secure_rate(raw, hi, f).unwrap();
        prop_assert!(r_hi <= r_lo + 1e-9 * raw.max(1.0));
        prop_assert!(r_hi >= 0.0);
        // linear in the raw rate
        let doubled = secure_rate(2.0 * raw, lo, f).unwrap();
        prop_assert!((doubled - 2.0 * r_lo).abs() <= 1e-9 * doubled.max(1.0));
    }

    #[test]
    fn raman_noise_is_linear_in_launch_power(
        power in -10.0..10.0f64,
        extra_db in 0.0..10.0f64,
        feeder in 1.0..30.0f64,
    ) {
        let topo = topology(feeder, 1.0, 16);
        let base = upstream_noise(&topo, power);
        let louder = upstream_noise(&topo, power + extra_db);
        let expected = base * 10f64.powf(extra_db / 10.0);
        prop_assert!((louder / expected - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn doubling_the_split_halves_upstream_noise(
        exponent in 1u32..6,
        feeder in 1.0..30.0f64,
        drop in 0.1..5.0f64,
    ) {
        let n = 1 << exponent;
        let a = upstream_noise(&topology(feeder, drop, n), 2.5);
        let b = upstream_noise(&topology(feeder, drop, 2 * n), 2.5);
        prop_assert!((b / a - 0.5).abs() <= 1e-9, "ratio {}", b / a);
    }

    #[test]
    fn oracle_rates_are_consistent(
        budget in 0.0..40.0f64,
        noise in 0.0..5e4f64,
        gate in 0.05..1.0f64,
        dead_us in 0.0..50.0f64,
    ) {
        let tx = TransmitterConfig::default();
        let det = DetectorModel { dead_time_s: dead_us * 1e-6, ..DetectorModel::default() };
        let r = click_rate_oracle(&tx, budget, &det, noise, gate).unwrap();
        prop_assert!(r.live_fraction > 0.0 && r.live_fraction <= 1.0);
        prop_assert!(r.signal_rate >= 0.0 && r.background_rate >= 0.0 && r.afterpulse_rate >= 0.0);
        let sum = r.signal_rate + r.background_rate + r.afterpulse_rate;
        prop_assert!((r.total_rate - sum).abs() <= 1e-9 * sum.max(1.0));
        // more loss never gives more clicks
        let further = click_rate_oracle(&tx, budget + 1.0, &det, noise, gate).unwrap();
        prop_assert!(further.signal_rate <= r.signal_rate);
        prop_assert!(further.total_rate <= r.total_rate + 1e-9);
    }
}

#[test]
fn oracle_without_detector_effects_is_plain_poisson() {
    let tx = TransmitterConfig::default();
    let det = DetectorModel {
        dead_time_s: 0.0,
        afterpulse_prob: 0.0,
        excess_loss_db: 0.0,
        ..DetectorModel::default()
    };
    let r = click_rate_oracle(&tx, 20.0, &det, 100.0, 0.3).unwrap();
    let p_click = 1.0 - (-tx.mean_photon_number * det.overall_efficiency(20.0)).exp();
    let signal = tx.symbol_rate_hz * p_click * (0.3 / tx.carve_duty).min(1.0);
    assert!((r.signal_rate / signal - 1.0).abs() < 1e-12);
    let background = (det.dark_rate + 100.0) * 0.3;
    assert!((r.background_rate / background - 1.0).abs() < 1e-12);
    assert_eq!(r.afterpulse_rate, 0.0);
    assert_eq!(r.live_fraction, 1.0);
}
