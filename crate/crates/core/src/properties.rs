//! Randomised invariants across modules, and a sampling oracle for the
//! truncated Gaussian photon statistics.

use crate::channel::{gain_qber, ChannelParams};
use crate::cs::{g_minus, g_plus, BoundedRate};
use crate::keyrate::{sweep_model, KeyRateModel};
use crate::overlap::{tau_lower, CorrelationSpec, IntensityProtocol, ModelKind};
use crate::photon::{poisson_pmf, tg_photon_prob, Intensity, TruncatedGaussianParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn i(v: f64) -> Intensity {
    Intensity::new(v).unwrap()
}

#[test]
fn truncated_gaussian_matches_monte_carlo() {
    let p = TruncatedGaussianParams::new(0.203, 0.045, 0.068, 0.338).unwrap();
    let normal = Normal::new(p.gamma, p.sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut acc = [0.0f64; 4];
    let mut kept = 0u64;
    while kept < 10_000_000 {
        let x: f64 = normal.sample(&mut rng);
        if x <= p.lambda_lo || x >= p.lambda_hi {
            continue;
        }
        kept += 1;
        for (n, a) in acc.iter_mut().enumerate() {
            *a += poisson_pmf(n as u32, i(x));
        }
    }
    for (n, a) in acc.iter().enumerate() {
        let mc = a / kept as f64;
        let exact = tg_photon_prob(n as u32, &p).unwrap();
        // each summand lies in [0, 1]; 5 standard errors of a bounded mean
        assert!(
            (mc - exact).abs() < 5.0 * 0.5 / (kept as f64).sqrt(),
            "n={n}: {mc} vs {exact}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_sandwich(y in 0.0..=1.0f64, z in 0.0..=1.0f64) {
        let y = BoundedRate::new(y).unwrap();
        prop_assert!(g_minus(y, z).value() <= y.value() + 1e-15);
        prop_assert!(g_plus(y, z).value() >= y.value() - 1e-15);
    }

    #[test]
    fn channel_swap_symmetry(a in 0.0..1.0f64, b in 0.0..1.0f64, l in 0.0..250.0f64) {
        let ch = ChannelParams::default().at_distance(l);
        let ab = gain_qber(i(a), i(b), &ch).unwrap();
        let ba = gain_qber(i(b), i(a), &ch).unwrap();
        prop_assert!((ab.gain - ba.gain).abs() <= 1e-12 * ab.gain.max(1e-300));
        prop_assert!((ab.qber - ba.qber).abs() <= 1e-12);
        prop_assert!(ab.qber <= 0.5 + 1e-12);
    }

    #[test]
    fn gain_decreases_with_distance(a in 1e-4..1.0f64, b in 1e-4..1.0f64, l in 0.0..150.0f64, dl in 0.1..50.0f64) {
        let ch = ChannelParams::default();
        let near = gain_qber(i(a), i(b), &ch.at_distance(l)).unwrap();
        let far = gain_qber(i(a), i(b), &ch.at_distance(l + dl)).unwrap();
        prop_assert!(far.gain <= near.gain);
    }

    #[test]
    fn tau_is_a_monotone_overlap(d1 in 0.0..0.9f64, d2 in 0.0..0.9f64, kind in prop::bool::ANY) {
        let p = IntensityProtocol::default();
        let kind = if kind { ModelKind::WorstCaseInterval } else { ModelKind::TruncatedGaussian };
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let m_lo = sweep_model(&p, kind, lo, 1);
        let m_hi = sweep_model(&p, kind, hi, 1);
        for a in [p.mu, p.nu, p.omega] {
            for b in [p.mu, p.nu, p.omega] {
                let t_lo = tau_lower(a, b, &p, &m_lo).unwrap().tau();
                let t_hi = tau_lower(a, b, &p, &m_hi).unwrap().tau();
                prop_assert!((0.0..=1.0).contains(&t_hi));
                prop_assert!(t_hi <= t_lo + 1e-15);
            }
        }
    }

    #[test]
    fn rate_clamped_and_bounded(delta in 0.0..1e-3f64, l in 0.0..250.0f64) {
        let p = IntensityProtocol::default();
        let m = KeyRateModel::new(&p, &CorrelationSpec::worst_case(delta, 1)).unwrap();
        let d = m.detail(&ChannelParams::default().at_distance(l)).unwrap();
        prop_assert!(d.rate >= 0.0);
        prop_assert!(d.rate <= d.p11);
    }
}
