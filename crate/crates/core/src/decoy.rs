//! Three-intensity decoy estimation of the single-photon yield and error
//! probability from interval-valued reference gains.

use crate::cs::{g_minus, g_plus, ref_interval_from_actual, BoundedRate};
use crate::error::{invalid, Error, Result};
use crate::overlap::{IntensityProtocol, OverlapBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

/// Gains and QBERs for every intensity pair, indexed `[alice][bob]` in the
/// order `mu, nu, omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQberTable {
    pub basis: Basis,
    pub gain: [[f64; 3]; 3],
    pub qber: [[f64; 3]; 3],
}

impl GainQberTable {
    pub fn new(basis: Basis, gain: [[f64; 3]; 3], qber: [[f64; 3]; 3]) -> Result<Self> {
        for row in gain.iter().chain(qber.iter()) {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfUnitRange {
                        what: "gain/qber table entry",
                        value: v,
                    });
                }
            }
        }
        Ok(Self { basis, gain, qber })
    }

    /// `Q_ab * E_ab`.
    pub fn error_gain(&self, i: usize, j: usize) -> f64 {
        self.gain[i][j] * self.qber[i][j]
    }
}

/// Closed interval of rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInterval {
    pub lo: BoundedRate,
    pub hi: BoundedRate,
}

impl RateInterval {
    pub fn point(v: BoundedRate) -> Self {
        Self { lo: v, hi: v }
    }

    fn endpoint(&self, upper: bool) -> f64 {
        if upper {
            self.hi.value()
        } else {
            self.lo.value()
        }
    }
}

/// Reference-state intervals for `Q_ab` and `Q_ab E_ab`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefIntervalTable {
    pub basis: Basis,
    pub gain: [[RateInterval; 3]; 3],
    pub error_gain: [[RateInterval; 3]; 3],
}

/// A decoy bound together with whether it had to be clamped into `[0, 1]`.
/// A lower bound clamped at zero certifies no single-photon events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimate {
    pub value: BoundedRate,
    pub clamped: bool,
}

impl DecoyEstimate {
    fn from_raw(raw: f64) -> Self {
        Self {
            value: BoundedRate::saturating(raw),
            clamped: !(0.0..=1.0).contains(&raw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonBounds {
    pub basis: Basis,
    pub y11_lower: BoundedRate,
    pub h11_upper: BoundedRate,
}

/// Output of the full single-photon estimation for both bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimate {
    pub z: SinglePhotonBounds,
    pub x: SinglePhotonBounds,
    /// Reference-state decoy bounds before the transfer to actual states.
    pub y11_ref_z: DecoyEstimate,
    pub y11_ref_x: DecoyEstimate,
    pub h11_ref_x: DecoyEstimate,
}

const MU: usize = 0;
const NU: usize = 1;
const OM: usize = 2;

/// Pairs carrying a nonzero coefficient in the yield bound.
const YIELD_PAIRS: [(usize, usize); 7] = [
    (NU, NU),
    (NU, OM),
    (OM, NU),
    (OM, OM),
    (MU, MU),
    (MU, OM),
    (OM, MU),
];
/// Pairs entering the error-probability bound.
const ERROR_PAIRS: [(usize, usize); 4] = [(NU, NU), (NU, OM), (OM, NU), (OM, OM)];

/// Applies the reference-from-actual transfer to every gain and every
/// gain × QBER product.
pub fn ref_intervals(
    actual: &GainQberTable,
    taus: &[[OverlapBound; 3]; 3],
) -> Result<RefIntervalTable> {
    let mut gain = [[RateInterval::point(BoundedRate::ZERO); 3]; 3];
    let mut error_gain = gain;
    for i in 0..3 {
        for j in 0..3 {
            let q = BoundedRate::checked(actual.gain[i][j], "gain")?;
            let qe = BoundedRate::checked(actual.error_gain(i, j), "gain x qber")?;
            let (lo, hi) = ref_interval_from_actual(q, taus[i][j]);
            gain[i][j] = RateInterval { lo, hi };
            let (lo, hi) = ref_interval_from_actual(qe, taus[i][j]);
            error_gain[i][j] = RateInterval { lo, hi };
        }
    }
    Ok(RefIntervalTable {
        basis: actual.basis,
        gain,
        error_gain,
    })
}

fn check_ordering(protocol: &IntensityProtocol) -> Result<(f64, f64, f64)> {
    let (mu, nu, om) = (
        protocol.mu.value(),
        protocol.nu.value(),
        protocol.omega.value(),
    );
    if !(mu > nu && nu > om) {
        return Err(Error::DecoyOrdering { mu, nu, omega: om });
    }
    Ok((mu, nu, om))
}

/// Net coefficient of each reference gain in the numerator of the yield
/// bound, with the `Q^M1` and `Q^M2` combinations expanded.
fn yield_coefficients(mu: f64, nu: f64, om: f64) -> [[f64; 3]; 3] {
    let c1 = (mu * mu - om * om) * (mu - om);
    let c2 = (nu * nu - om * om) * (nu - om);
    let mut c = [[0.0; 3]; 3];
    c[NU][NU] = c1 * (2.0 * nu).exp();
    c[NU][OM] = -c1 * (nu + om).exp();
    c[OM][NU] = -c1 * (nu + om).exp();
    c[MU][MU] = -c2 * (2.0 * mu).exp();
    c[MU][OM] = c2 * (mu + om).exp();
    c[OM][MU] = c2 * (mu + om).exp();
    c[OM][OM] = (c1 - c2) * (2.0 * om).exp();
    c
}

fn error_coefficients(nu: f64, om: f64) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    c[NU][NU] = (2.0 * nu).exp();
    c[OM][OM] = (2.0 * om).exp();
    c[NU][OM] = -(nu + om).exp();
    c[OM][NU] = -(nu + om).exp();
    c
}

/// Extremises `sum c_ab x_ab` over the interval box: minimising takes the
/// lower endpoint where the coefficient is positive, maximising the upper.
fn directed_sum(coef: &[[f64; 3]; 3], box_: &[[RateInterval; 3]; 3], maximise: bool) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let c = coef[i][j];
            if c != 0.0 {
                s += c * box_[i][j].endpoint((c > 0.0) == maximise);
            }
        }
    }
    s
}

/// Lower bound on the reference single-photon yield `Y11`.
pub fn y11_ref_lower(
    intervals: &RefIntervalTable,
    protocol: &IntensityProtocol,
) -> Result<DecoyEstimate> {
    let (mu, nu, om) = check_ordering(protocol)?;
    let coef = yield_coefficients(mu, nu, om);
    let num = directed_sum(&coef, &intervals.gain, false);
    let den = (mu - om).powi(2) * (nu - om).powi(2) * (mu - nu);
    Ok(DecoyEstimate::from_raw(num / den))
}

/// Upper bound on the reference single-photon error probability `H11`.
pub fn h11_ref_upper(
    intervals: &RefIntervalTable,
    protocol: &IntensityProtocol,
) -> Result<DecoyEstimate> {
    let (_, nu, om) = check_ordering(protocol)?;
    let coef = error_coefficients(nu, om);
    let num = directed_sum(&coef, &intervals.error_gain, true);
    Ok(DecoyEstimate::from_raw(num / (nu - om).powi(2)))
}

fn min_tau(taus: &[[OverlapBound; 3]; 3], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| taus[i][j].tau())
        .fold(1.0, f64::min)
}

fn basis_bounds(
    table: &GainQberTable,
    taus: &[[OverlapBound; 3]; 3],
    protocol: &IntensityProtocol,
) -> Result<(SinglePhotonBounds, DecoyEstimate, DecoyEstimate)> {
    let iv = ref_intervals(table, taus)?;
    let y = y11_ref_lower(&iv, protocol)?;
    let h = h11_ref_upper(&iv, protocol)?;
    let bounds = SinglePhotonBounds {
        basis: table.basis,
        y11_lower: g_minus(y.value, min_tau(taus, &YIELD_PAIRS)),
        h11_upper: g_plus(h.value, min_tau(taus, &ERROR_PAIRS)),
    };
    Ok((bounds, y, h))
}

/// Single-photon yield lower bounds for both bases and the X-basis error
/// upper bound, transferred back to the actual (correlated) states with the
/// smallest overlap among the pairs entering each formula.
pub fn single_photon_bounds(
    z_table: &GainQberTable,
    x_table: &GainQberTable,
    taus: &[[OverlapBound; 3]; 3],
    protocol: &IntensityProtocol,
) -> Result<SinglePhotonEstimate> {
    if z_table.basis != Basis::Z || x_table.basis != Basis::X {
        return Err(invalid("tables", "expected a Z-basis and an X-basis table"));
    }
    let (z, y11_ref_z, _) = basis_bounds(z_table, taus, protocol)?;
    let (x, y11_ref_x, h11_ref_x) = basis_bounds(x_table, taus, protocol)?;
    Ok(SinglePhotonEstimate {
        z,
        x,
        y11_ref_z,
        y11_ref_x,
        h11_ref_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon::poisson;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const N: usize = 25;

    /// Gains and error gains from known yields, by direct summation.
    fn forward(
        yields: &[[f64; N + 1]; N + 1],
        errors: &[[f64; N + 1]; N + 1],
        p: &IntensityProtocol,
        basis: Basis,
    ) -> GainQberTable {
        let ints = [p.mu.value(), p.nu.value(), p.omega.value()];
        let mut gain = [[0.0; 3]; 3];
        let mut qber = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (mut q, mut qe) = (0.0, 0.0);
                for n in 0..=N {
                    for m in 0..=N {
                        let w = poisson(n as u32, ints[i]) * poisson(m as u32, ints[j]);
                        q += w * yields[n][m];
                        qe += w * errors[n][m];
                    }
                }
                gain[i][j] = q;
                qber[i][j] = if q > 0.0 { qe / q } else { 0.0 };
            }
        }
        GainQberTable::new(basis, gain, qber).unwrap()
    }

    fn random_yields(rng: &mut ChaCha8Rng) -> ([[f64; N + 1]; N + 1], [[f64; N + 1]; N + 1]) {
        let mut y = [[0.0; N + 1]; N + 1];
        let mut h = [[0.0; N + 1]; N + 1];
        for n in 0..=N {
            for m in 0..=N {
                y[n][m] = rng.gen::<f64>();
                h[n][m] = y[n][m] * rng.gen::<f64>();
            }
        }
        (y, h)
    }

    fn ones() -> [[OverlapBound; 3]; 3] {
        [[OverlapBound::ONE; 3]; 3]
    }

    #[test]
    fn unit_overlap_keeps_table() {
        let p = IntensityProtocol::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, h) = random_yields(&mut rng);
        let t = forward(&y, &h, &p, Basis::Z);
        let iv = ref_intervals(&t, &ones()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(iv.gain[i][j].lo.value(), t.gain[i][j]);
                assert_eq!(iv.gain[i][j].hi.value(), t.gain[i][j]);
            }
        }
    }

    #[test]
    fn zero_overlap_is_vacuous() {
        let p = IntensityProtocol::default();
        let t = GainQberTable::new(Basis::Z, [[0.2; 3]; 3], [[0.1; 3]; 3]).unwrap();
        let zero = [[OverlapBound::new(0.0).unwrap(); 3]; 3];
        let iv = ref_intervals(&t, &zero).unwrap();
        assert_eq!(
            iv.gain[0][0],
            RateInterval {
                lo: BoundedRate::ZERO,
                hi: BoundedRate::ONE
            }
        );
        assert_eq!(iv.error_gain[1][1].lo, BoundedRate::ZERO);
        let y = y11_ref_lower(&iv, &p).unwrap();
        assert_eq!(y.value, BoundedRate::ZERO);
        assert!(y.clamped);
        let h = h11_ref_upper(&iv, &p).unwrap();
        assert_eq!(h.value, BoundedRate::ONE);
    }

    #[test]
    fn single_entry_interval() {
        let mut gain = [[0.0; 3]; 3];
        gain[0][0] = 0.2;
        let t = GainQberTable::new(Basis::Z, gain, [[0.0; 3]; 3]).unwrap();
        let mut taus = ones();
        taus[0][0] = OverlapBound::new(0.9).unwrap();
        let iv = ref_intervals(&t, &taus).unwrap();
        assert!((iv.gain[0][0].lo.value() - 0.02).abs() < 1e-15);
        assert!((iv.gain[0][0].hi.value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_zero_gains() {
        let p = IntensityProtocol::default();
        let t = GainQberTable::new(Basis::Z, [[0.0; 3]; 3], [[0.0; 3]; 3]).unwrap();
        let iv = ref_intervals(&t, &ones()).unwrap();
        assert_eq!(y11_ref_lower(&iv, &p).unwrap().value, BoundedRate::ZERO);
        assert_eq!(h11_ref_upper(&iv, &p).unwrap().value, BoundedRate::ZERO);
    }

    #[test]
    fn rejects_bad_ordering() {
        let mut p = IntensityProtocol::default();
        p.nu = p.mu;
        let t = GainQberTable::new(Basis::Z, [[0.1; 3]; 3], [[0.0; 3]; 3]).unwrap();
        let iv = ref_intervals(&t, &ones()).unwrap();
        assert!(matches!(
            y11_ref_lower(&iv, &p),
            Err(Error::DecoyOrdering { .. })
        ));
        assert!(matches!(
            h11_ref_upper(&iv, &p),
            Err(Error::DecoyOrdering { .. })
        ));
    }

    #[test]
    fn oracle_inequality_on_random_yields() {
        let p = IntensityProtocol::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (y, h) = random_yields(&mut rng);
            let t = forward(&y, &h, &p, Basis::Z);
            let iv = ref_intervals(&t, &ones()).unwrap();
            let yl = y11_ref_lower(&iv, &p).unwrap().value.value();
            let hu = h11_ref_upper(&iv, &p).unwrap().value.value();
            assert!(yl <= y[1][1] + 1e-12, "{yl} > {}", y[1][1]);
            assert!(hu >= h[1][1] - 1e-12, "{hu} < {}", h[1][1]);
        }
    }

    #[test]
    fn error_bound_tracks_multiphoton_contamination() {
        // error-free table: the bound is exactly zero
        let p = IntensityProtocol::default();
        let t = GainQberTable::new(Basis::X, [[0.3; 3]; 3], [[0.0; 3]; 3]).unwrap();
        let iv = ref_intervals(&t, &ones()).unwrap();
        assert_eq!(h11_ref_upper(&iv, &p).unwrap().value, BoundedRate::ZERO);

        // errors only from three or more photons: the bound stays above the
        // true H11 = 0 and its contamination shrinks with the weak decoy
        let mut prev = f64::INFINITY;
        for nu in [0.15, 0.1, 0.05, 0.02] {
            let p = IntensityProtocol::asymptotic(0.5, nu, 0.0).unwrap();
            let mut y = [[0.0; N + 1]; N + 1];
            let mut h = [[0.0; N + 1]; N + 1];
            for n in 0..=N {
                for m in 0..=N {
                    y[n][m] = if n + m > 0 { 0.5 } else { 0.0 };
                    h[n][m] = if n + m >= 3 { 0.25 } else { 0.0 };
                }
            }
            let t = forward(&y, &h, &p, Basis::X);
            let iv = ref_intervals(&t, &ones()).unwrap();
            let hu = h11_ref_upper(&iv, &p).unwrap().value.value();
            assert!(hu >= 0.0 && hu < prev);
            prev = hu;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn basis_symmetry() {
        let p = IntensityProtocol::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (y, h) = random_yields(&mut rng);
        let z = forward(&y, &h, &p, Basis::Z);
        let x = GainQberTable {
            basis: Basis::X,
            ..z
        };
        let mut taus = ones();
        taus[1][1] = OverlapBound::new(0.999).unwrap();
        let est = single_photon_bounds(&z, &x, &taus, &p).unwrap();
        assert_eq!(est.z.y11_lower, est.x.y11_lower);
        assert_eq!(est.z.h11_upper, est.x.h11_upper);
        assert!(single_photon_bounds(&x, &z, &taus, &p).is_err());
    }

    proptest! {
        #[test]
        fn widening_never_tightens(seed in 0u64..1000, i in 0usize..3, j in 0usize..3, grow in 0.0f64..0.2) {
            let p = IntensityProtocol::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (y, h) = random_yields(&mut rng);
            let t = forward(&y, &h, &p, Basis::Z);
            let narrow = ref_intervals(&t, &ones()).unwrap();
            let mut wide = narrow;
            let widen = |iv: RateInterval| RateInterval {
                lo: BoundedRate::saturating(iv.lo.value() - grow),
                hi: BoundedRate::saturating(iv.hi.value() + grow),
            };
            wide.gain[i][j] = widen(wide.gain[i][j]);
            wide.error_gain[i][j] = widen(wide.error_gain[i][j]);
            let yn = y11_ref_lower(&narrow, &p).unwrap().value.value();
            let yw = y11_ref_lower(&wide, &p).unwrap().value.value();
            let hn = h11_ref_upper(&narrow, &p).unwrap().value.value();
            let hw = h11_ref_upper(&wide, &p).unwrap().value.value();
            prop_assert!(yw <= yn + 1e-15);
            prop_assert!(hw >= hn - 1e-15);
        }
    }
}
