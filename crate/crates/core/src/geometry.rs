//! Bures-Wasserstein geometry of centered Gaussians whose covariances are
//! diagonal in the Fourier basis.
//!
//! Such covariances commute, so every operation reduces to Euclidean
//! arithmetic on elementwise square roots of the PSDs.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::psd::Psd;

/// Wasserstein barycenter with uniform weights: `((1/K) Σ P_k^½)²`.
pub fn wasserstein_barycenter(psds: &[Psd]) -> Result<Psd> {
    let first = psds
        .first()
        .ok_or(Error::EmptyInput("barycenter of an empty list"))?;
    let mut acc = Array2::<f64>::zeros(first.shape());
    for p in psds {
        first.ensure_shape(p)?;
        Zip::from(&mut acc)
            .and(p.values())
            .for_each(|a, &v| *a += v.sqrt());
    }
    acc /= psds.len() as f64;
    Ok(Psd::from_sqrt(acc))
}

/// Point at parameter `t` on the geodesic from `src` (t = 0) to `tgt` (t = 1).
pub fn geodesic_interpolate(src: &Psd, tgt: &Psd, t: f64) -> Result<Psd> {
    src.ensure_shape(tgt)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange {
            name: "t",
            value: t,
        });
    }
    // endpoints returned verbatim so they are exact
    if t == 0.0 {
        return Ok(src.clone());
    }
    if t == 1.0 {
        return Ok(tgt.clone());
    }
    let mut out = Array2::<f64>::zeros(src.shape());
    Zip::from(&mut out)
        .and(src.values())
        .and(tgt.values())
        .for_each(|o, &p, &q| {
            let r = (1.0 - t) * p.sqrt() + t * q.sqrt();
            *o = r * r;
        });
    Ok(Psd::from_trusted(out))
}

/// Bures-Wasserstein distance `‖P^½ - Q^½‖_F`.
pub fn bures_distance(p: &Psd, q: &Psd) -> Result<f64> {
    p.ensure_shape(q)?;
    let mut acc = 0.0;
    Zip::from(p.values()).and(q.values()).for_each(|&a, &b| {
        let d = a.sqrt() - b.sqrt();
        acc += d * d;
    });
    Ok(acc.sqrt())
}

/// Running barycenter of a normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterState {
    value: Option<Psd>,
    momentum: f64,
    update_count: u64,
}

impl BarycenterState {
    pub fn empty(momentum: f64) -> Result<Self> {
        check_momentum(momentum)?;
        Ok(Self {
            value: None,
            momentum,
            update_count: 0,
        })
    }

    /// A state holding `value`, counted as one update.
    pub fn with_value(value: Psd, momentum: f64) -> Result<Self> {
        Self::restore(Some(value), momentum, 1)
    }

    /// Rebuilds a state from persisted fields.
    pub fn restore(value: Option<Psd>, momentum: f64, update_count: u64) -> Result<Self> {
        check_momentum(momentum)?;
        if value.is_some() != (update_count > 0) {
            return Err(Error::InvalidConfig(
                "barycenter update count must be zero exactly when the value is empty".into(),
            ));
        }
        Ok(Self {
            value,
            momentum,
            update_count,
        })
    }

    pub fn value(&self) -> Option<&Psd> {
        self.value.as_ref()
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_none()
    }

    /// Moves the barycenter a fraction `momentum` along the geodesic toward
    /// `batch_bary`. An empty state adopts `batch_bary` directly.
    pub fn running_update(&self, batch_bary: &Psd) -> Result<Self> {
        let value = match &self.value {
            None => batch_bary.clone(),
            Some(current) => geodesic_interpolate(current, batch_bary, self.momentum)?,
        };
        Ok(Self {
            value: Some(value),
            momentum: self.momentum,
            update_count: self.update_count + 1,
        })
    }
}

fn check_momentum(momentum: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&momentum) {
        return Err(Error::ParameterOutOfRange {
            name: "momentum",
            value: momentum,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Psd {
        Psd::new(array![[v]]).unwrap()
    }

    fn random_psd(rng: &mut ChaCha8Rng, c: usize, f: usize) -> Psd {
        Psd::new(Array2::from_shape_fn((c, f), |_| {
            rng.random_range(0.01..10.0)
        }))
        .unwrap()
    }

    #[test]
    fn barycenter_examples() {
        let b = wasserstein_barycenter(&[scalar(1.0), scalar(9.0)]).unwrap();
        assert_eq!(b.get(0, 0), 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_psd(&mut rng, 2, 5);
        let same = wasserstein_barycenter(&[p.clone(), p.clone(), p.clone()]).unwrap();
        for (a, b) in same.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-15 * b);
        }

        assert!(matches!(
            wasserstein_barycenter(&[]),
            Err(Error::EmptyInput(_))
        ));
        let q = random_psd(&mut rng, 2, 4);
        assert!(matches!(
            wasserstein_barycenter(&[p, q]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn barycenter_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psds: Vec<Psd> = (0..5).map(|_| random_psd(&mut rng, 3, 8)).collect();
        let bary = wasserstein_barycenter(&psds).unwrap();
        for m in 0..3 {
            for k in 0..8 {
                let mut s = 0.0;
                for p in &psds {
                    s += p.get(m, k).sqrt();
                }
                let expect = (s / 5.0) * (s / 5.0);
                assert!((bary.get(m, k) - expect).abs() < 1e-12 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn geodesic_examples() {
        let (p, q) = (scalar(1.0), scalar(9.0));
        assert_eq!(geodesic_interpolate(&p, &q, 0.5).unwrap().get(0, 0), 4.0);
        assert_eq!(geodesic_interpolate(&p, &q, 0.0).unwrap(), p);
        assert_eq!(geodesic_interpolate(&p, &q, 1.0).unwrap(), q);
        assert!(matches!(
            geodesic_interpolate(&p, &q, 1.5),
            Err(Error::ParameterOutOfRange { .. })
        ));
        assert!(geodesic_interpolate(&p, &q, -0.1).is_err());
    }

    #[test]
    fn running_update_examples() {
        let empty = BarycenterState::empty(0.01).unwrap();
        assert_eq!(empty.update_count(), 0);
        let b = scalar(16.0);
        let init = empty.running_update(&b).unwrap();
        assert_eq!(init.value(), Some(&b));
        assert_eq!(init.update_count(), 1);

        let s = BarycenterState::with_value(scalar(4.0), 0.01).unwrap();
        let next = s.running_update(&b).unwrap();
        assert!((next.value().unwrap().get(0, 0) - 4.0804).abs() < 1e-12);
        assert_eq!(next.update_count(), 2);

        let full = BarycenterState::with_value(scalar(4.0), 1.0).unwrap();
        assert_eq!(full.running_update(&b).unwrap().value(), Some(&b));

        assert!(s.running_update(&Psd::ones(1, 2).unwrap()).is_err());
        assert!(BarycenterState::empty(1.5).is_err());
        assert!(BarycenterState::restore(None, 0.1, 3).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(bures_distance(&scalar(1.0), &scalar(9.0)).unwrap(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_psd(&mut rng, 2, 3);
        assert_eq!(bures_distance(&p, &p).unwrap(), 0.0);
        assert!(bures_distance(&p, &Psd::ones(2, 4).unwrap()).is_err());
    }

    fn psd_strategy(c: usize, f: usize) -> impl Strategy<Value = Psd> {
        prop::collection::vec(1e-3..1e3f64, c * f)
            .prop_map(move |v| Psd::new(Array2::from_shape_vec((c, f), v).unwrap()).unwrap())
    }

    proptest! {
        #[test]
        fn barycenter_within_entry_bounds(ps in prop::collection::vec(psd_strategy(2, 4), 1..6)) {
            let bary = wasserstein_barycenter(&ps).unwrap();
            for m in 0..2 {
                for k in 0..4 {
                    let lo = ps.iter().map(|p| p.get(m, k)).fold(f64::INFINITY, f64::min);
                    let hi = ps.iter().map(|p| p.get(m, k)).fold(0.0, f64::max);
                    let v = bary.get(m, k);
                    prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn barycenter_permutation_invariant(ps in prop::collection::vec(psd_strategy(1, 3), 2..6)) {
            let forward = wasserstein_barycenter(&ps).unwrap();
            let mut rev = ps.clone();
            rev.reverse();
            let backward = wasserstein_barycenter(&rev).unwrap();
            for (a, b) in forward.values().iter().zip(backward.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * a);
            }
        }

        #[test]
        fn geodesic_composition(p in psd_strategy(2, 3), q in psd_strategy(2, 3),
                                a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let step = geodesic_interpolate(&p, &q, a).unwrap();
            let twice = geodesic_interpolate(&step, &q, b).unwrap();
            let once = geodesic_interpolate(&p, &q, a + b * (1.0 - a)).unwrap();
            for (x, y) in twice.values().iter().zip(once.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
            }
        }

        #[test]
        fn geodesic_monotone_in_t(p in psd_strategy(1, 4), q in psd_strategy(1, 4)) {
            let ts = [0.0, 0.1, 0.3, 0.5, 0.8, 1.0];
            let pts: Vec<Psd> = ts.iter().map(|&t| geodesic_interpolate(&p, &q, t).unwrap()).collect();
            for k in 0..4 {
                let up = q.get(0, k) >= p.get(0, k);
                for w in pts.windows(2) {
                    let (a, b) = (w[0].get(0, k), w[1].get(0, k));
                    let ok = if up { b >= a * (1.0 - 1e-14) } else { b <= a * (1.0 + 1e-14) };
                    prop_assert!(ok);
                }
            }
        }

        #[test]
        fn geodesic_midpoint_is_metric_midpoint(p in psd_strategy(2, 5), q in psd_strategy(2, 5)) {
            let mid = geodesic_interpolate(&p, &q, 0.5).unwrap();
            let d = bures_distance(&p, &q).unwrap();
            prop_assert!((bures_distance(&p, &mid).unwrap() - d / 2.0).abs() < 1e-12 * d.max(1.0));
            prop_assert!((bures_distance(&mid, &q).unwrap() - d / 2.0).abs() < 1e-12 * d.max(1.0));
        }

        #[test]
        fn running_update_fixed_point(p in psd_strategy(2, 4), alpha in 0.0..=1.0f64) {
            let s = BarycenterState::with_value(p.clone(), alpha).unwrap();
            let next = s.running_update(&p).unwrap();
            for (a, b) in next.value().unwrap().values().iter().zip(p.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.max(1.0));
            }
        }

        #[test]
        fn distance_axioms(p in psd_strategy(1, 3), q in psd_strategy(1, 3), r in psd_strategy(1, 3)) {
            let dpq = bures_distance(&p, &q).unwrap();
            let dqp = bures_distance(&q, &p).unwrap();
            prop_assert!(dpq >= 0.0);
            prop_assert_eq!(dpq, dqp);
            prop_assert_eq!(bures_distance(&p, &p).unwrap(), 0.0);
            let dpr = bures_distance(&p, &r).unwrap();
            let drq = bures_distance(&r, &q).unwrap();
            prop_assert!(dpq <= dpr + drq + 1e-10);
        }
    }
}
