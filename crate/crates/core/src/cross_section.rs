//! Closed-form Dirichlet spectra of the outlet cross-sections (intervals)
//! and the threshold data derived from them: the cut-off value, the set of
//! threshold outlets and the modal exponents.

use crate::error::{Error, Result};
use crate::geometry::JunctionGeometry;
use std::cmp::Ordering;
use std::f64::consts::PI;

/// Eigenvalues of -d^2/dy^2 on (0, w) with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct OutletSpectrum {
    pub width: f64,
    /// (p pi / w)^2 for p = 1..=P
    pub lambdas: Vec<f64>,
}

pub fn interval_spectrum(w: f64, p_modes: usize) -> OutletSpectrum {
    assert!(w > 0.0 && p_modes >= 1);
    let lambdas = (1..=p_modes)
        .map(|p| {
            let k = p as f64 * PI / w;
            k * k
        })
        .collect();
    OutletSpectrum { width: w, lambdas }
}

/// L2-normalized eigenfunction sqrt(2/w) sin(p pi y / w).
pub fn phi(w: f64, p: usize, y: f64) -> f64 {
    (2.0 / w).sqrt() * (p as f64 * PI * y / w).sin()
}

/// Modal exponent at the threshold. Every mode strictly above the cut-off
/// decays like e^{-kappa z}; the single propagation-threshold mode per
/// threshold outlet carries the imaginary marker kappa = -i, of modulus one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    /// kappa_1 = -i on a threshold outlet.
    ThresholdMode,
    /// kappa = sqrt(Lambda_p - lambda_dagger) > 0.
    Decaying(f64),
}

impl Kappa {
    pub fn abs(self) -> f64 {
        match self {
            Kappa::ThresholdMode => 1.0,
            Kappa::Decaying(k) => k,
        }
    }
    pub fn is_threshold(self) -> bool {
        matches!(self, Kappa::ThresholdMode)
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdInfo {
    /// Cut-off of the continuous spectrum, min over outlets of (pi/w)^2.
    pub lambda_dagger: f64,
    /// Number of outlets attaining the cut-off.
    pub n_threshold: usize,
    /// Outlet indices attaining the cut-off, ascending.
    pub threshold_outlets: Vec<usize>,
    /// Permutation of outlet indices placing threshold outlets first.
    pub order: Vec<usize>,
    /// Per outlet, per mode p = 1..=P.
    pub kappa: Vec<Vec<Kappa>>,
    pub spectra: Vec<OutletSpectrum>,
}

impl ThresholdInfo {
    pub fn is_threshold(&self, outlet: usize) -> bool {
        self.threshold_outlets.contains(&outlet)
    }
    pub fn p_modes(&self) -> usize {
        self.kappa[0].len()
    }
}

/// Width comparison: exact rational squared widths when both are available,
/// floating point with relative tolerance otherwise. The exact route keeps
/// the threshold-outlet count a discrete quantity even when two widths agree
/// to machine precision by accident.
fn cmp_width(g: &JunctionGeometry, a: usize, b: usize) -> Ordering {
    let oa = &g.outlets()[a];
    let ob = &g.outlets()[b];
    match (&oa.width_sq_exact, &ob.width_sq_exact) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => {
            let scale = oa.width.max(ob.width);
            if (oa.width - ob.width).abs() <= 1e-12 * scale {
                Ordering::Equal
            } else {
                oa.width.partial_cmp(&ob.width).unwrap()
            }
        }
    }
}

pub fn threshold(geom: &JunctionGeometry, p_modes: usize) -> Result<ThresholdInfo> {
    let n_out = geom.outlets().len();
    assert!(n_out >= 1 && p_modes >= 1);

    let mut widest = 0usize;
    for n in 1..n_out {
        if cmp_width(geom, n, widest) == Ordering::Greater {
            widest = n;
        }
    }
    let threshold_outlets: Vec<usize> = (0..n_out)
        .filter(|&n| cmp_width(geom, n, widest) == Ordering::Equal)
        .collect();
    let w_max = geom.outlets()[widest].width;
    let lambda_dagger = (PI / w_max) * (PI / w_max);

    let spectra: Vec<OutletSpectrum> = geom
        .outlets()
        .iter()
        .map(|o| interval_spectrum(o.width, p_modes))
        .collect();

    let mut kappa = Vec::with_capacity(n_out);
    for (n, sp) in spectra.iter().enumerate() {
        let is_thr = threshold_outlets.contains(&n);
        let mut ks = Vec::with_capacity(p_modes);
        for (pm1, &lam) in sp.lambdas.iter().enumerate() {
            if is_thr && pm1 == 0 {
                ks.push(Kappa::ThresholdMode);
            } else {
                let gap = lam - lambda_dagger;
                if gap <= 1e-10 * lambda_dagger {
                    // an outlet at the cut-off in floating point but not in
                    // the exact comparison: the spectral gap is numerically
                    // zero and no reliable analysis is possible
                    return Err(Error::DegenerateDomain(format!(
                        "outlet {n} mode {} sits at the threshold within \
                         floating precision; widths too close to separate",
                        pm1 + 1
                    )));
                }
                ks.push(Kappa::Decaying(gap.sqrt()));
            }
        }
        kappa.push(ks);
    }

    let mut order = threshold_outlets.clone();
    order.extend((0..n_out).filter(|n| !threshold_outlets.contains(n)));

    Ok(ThresholdInfo {
        lambda_dagger,
        n_threshold: threshold_outlets.len(),
        threshold_outlets,
        order,
        kappa,
        spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{JunctionGeometry, Rat, Vec2};
    use crate::presets;

    #[test]
    fn interval_spectrum_closed_forms() {
        let s = interval_spectrum(1.0, 3);
        let pi2 = PI * PI;
        assert!((s.lambdas[0] - pi2).abs() < 1e-14);
        assert!((s.lambdas[1] - 4.0 * pi2).abs() < 1e-13);
        assert!((s.lambdas[2] - 9.0 * pi2).abs() < 1e-13);
        let s2 = interval_spectrum(2.0, 1);
        assert!((s2.lambdas[0] - pi2 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn first_mode_is_normalized() {
        // trapezoidal rule on a fine grid
        let n = 20000;
        let mut acc = 0.0;
        for i in 0..=n {
            let y = i as f64 / n as f64;
            let v = phi(1.0, 1, y);
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * v * v / n as f64;
        }
        assert!((acc - 1.0).abs() < 1e-8);
        assert!((phi(1.0, 1, 0.5) - 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn tee_has_three_threshold_outlets() {
        let t = threshold(&presets::tee(), 4).unwrap();
        assert!((t.lambda_dagger - PI * PI).abs() < 1e-13);
        assert_eq!(t.n_threshold, 3);
        assert_eq!(t.threshold_outlets, vec![0, 1, 2]);
        assert_eq!(t.order, vec![0, 1, 2]);
        assert!(t.kappa[0][0].is_threshold());
        // kappa_2 = sqrt(4 pi^2 - pi^2) = pi sqrt(3)
        let k2 = t.kappa[0][1].abs();
        assert!((k2 - PI * 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn narrow_stem_keeps_only_wide_outlets() {
        let t = threshold(&presets::tee_narrow_stem(), 3).unwrap();
        assert!((t.lambda_dagger - PI * PI).abs() < 1e-13);
        assert_eq!(t.n_threshold, 2);
        assert_eq!(t.threshold_outlets, vec![0, 2]);
        assert_eq!(t.order, vec![0, 2, 1]);
        // stem: Lambda_1 = (pi / (1/2))^2 = 4 pi^2
        assert!((t.spectra[1].lambdas[0] - 4.0 * PI * PI).abs() < 1e-12);
        match t.kappa[1][0] {
            Kappa::Decaying(k) => assert!((k - PI * 3.0f64.sqrt()).abs() < 1e-12),
            _ => panic!("stem mode 1 must decay"),
        }
    }

    #[test]
    fn wye_uses_float_fallback() {
        let t = threshold(&presets::wye(), 2).unwrap();
        assert_eq!(t.n_threshold, 3);
        assert!((t.lambda_dagger - PI * PI).abs() < 1e-9);
    }

    #[test]
    fn float_equal_exact_unequal_is_rejected() {
        // trapezoid: left edge length 1, right edge length 1 + 1e-17, which
        // rounds to the same double but differs as a rational
        let tiny_num: i128 = 100_000_000_000_000_001;
        let tiny_den: i128 = 100_000_000_000_000_000;
        let q = Rat::new(tiny_num, tiny_den);
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0 + 1e-17),
            Vec2::new(0.0, 1.0),
        ];
        let exact = vec![
            Some((Rat::new(0, 1), Rat::new(0, 1))),
            Some((Rat::new(1, 1), Rat::new(0, 1))),
            Some((Rat::new(1, 1), q)),
            Some((Rat::new(0, 1), Rat::new(1, 1))),
        ];
        let g = JunctionGeometry::build(verts, exact, &[1, 3]).unwrap();
        let err = threshold(&g, 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateDomain(_)));
    }

    #[test]
    fn exact_comparison_beats_float_ties() {
        // same trapezoid: the exact route must pick the right edge as the
        // single widest outlet before the gap check rejects the left one
        let g = presets::strip();
        let t = threshold(&g, 2).unwrap();
        assert_eq!(t.n_threshold, 2);
    }
}
