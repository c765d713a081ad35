//! Independent ground-truth machinery used by tests and cross-checks:
//! adaptive Gauss–Kronrod quadrature, central-difference gradients, and a
//! grid-search minimizer for problems with at most three parameters.
//!
//! Nothing here shares code with the closed-form implementations it
//! validates.

use crate::error::{GviError, Result};

/// Controls for the adaptive quadrature routines.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 10_000,
        }
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule on [−1, 1].
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One G7/K15 panel; returns (kronrod estimate, |kronrod − gauss|).
fn gauss_kronrod_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let (f_plus, f_minus) = if x == 0.0 {
            let v = f(center);
            (v, 0.0)
        } else {
            (f(center + half * x), f(center - half * x))
        };
        let pair = f_plus + f_minus;
        kronrod += wk * pair;
        // Odd Kronrod indices are the embedded Gauss nodes.
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        } else if x == 0.0 {
            gauss += GAUSS_WEIGHTS[3] * f_plus;
        }
    }
    (half * kronrod, half * (kronrod - gauss).abs())
}

/// Adaptive 1-D integral of `f` over [a, b].
///
/// Returns (value, error estimate); errors with `NoConvergence` when the
/// estimate stays above tolerance after `max_subdivisions` splits.
pub fn integrate_1d(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    config: &QuadratureConfig,
) -> Result<(f64, f64)> {
    // Worst-interval-first refinement.
    let mut intervals = vec![{
        let (v, e) = gauss_kronrod_panel(&f, a, b);
        (e, a, b, v)
    }];
    for _ in 0..config.max_subdivisions {
        let total: f64 = intervals.iter().map(|t| t.3).sum();
        let err: f64 = intervals.iter().map(|t| t.0).sum();
        if err <= config.abs_tol.max(config.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .map(|(i, _)| i)
            .expect("nonempty interval list");
        let (_, lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod_panel(&f, lo, mid);
        let (v2, e2) = gauss_kronrod_panel(&f, mid, hi);
        intervals.push((e1, lo, mid, v1));
        intervals.push((e2, mid, hi, v2));
    }
    let err: f64 = intervals.iter().map(|t| t.0).sum();
    Err(GviError::NoConvergence { error: err })
}

/// Iterated 2-D integral over the rectangle [ax, bx] × [ay, by].
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    config: &QuadratureConfig,
) -> Result<(f64, f64)> {
    // Inner integrals run at a tighter tolerance so the outer estimate is honest.
    let inner_cfg = QuadratureConfig {
        abs_tol: 0.1 * config.abs_tol,
        rel_tol: 0.1 * config.rel_tol,
        max_subdivisions: config.max_subdivisions,
    };
    integrate_1d(
        |x| {
            integrate_1d(|y| f(x, y), ay, by, &inner_cfg)
                .map(|(v, _)| v)
                .unwrap_or(f64::NAN)
        },
        ax,
        bx,
        config,
    )
}

/// Central-difference gradient with step h_i = 1e-5 · max(1, |κ_i|).
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, kappa: &[f64]) -> Vec<f64> {
    finite_difference_gradient_with_step(f, kappa, 1e-5)
}

/// Central-difference gradient with caller-controlled relative step.
pub fn finite_difference_gradient_with_step(
    f: impl Fn(&[f64]) -> f64,
    kappa: &[f64],
    rel_step: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; kappa.len()];
    let mut probe = kappa.to_vec();
    for i in 0..kappa.len() {
        let h = rel_step * kappa[i].abs().max(1.0);
        probe[i] = kappa[i] + h;
        let f_plus = f(&probe);
        probe[i] = kappa[i] - h;
        let f_minus = f(&probe);
        probe[i] = kappa[i];
        grad[i] = (f_plus - f_minus) / (2.0 * h);
    }
    grad
}

/// Grid-search minimizer over a box, with one refinement pass around the
/// coarse optimum. Supports up to three dimensions.
pub fn grid_argmin(
    f: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Vec<f64> {
    assert!(
        (1..=3).contains(&bounds.len()),
        "grid search supports 1 to 3 dimensions"
    );
    assert!(resolution >= 50, "resolution must be at least 50 per axis");
    let coarse = scan(&f, bounds, resolution);
    // Refine in a ±1.5-cell box around the coarse optimum.
    let refined_bounds: Vec<(f64, f64)> = bounds
        .iter()
        .zip(&coarse)
        .map(|(&(lo, hi), &c)| {
            let cell = (hi - lo) / (resolution - 1) as f64;
            ((c - 1.5 * cell).max(lo), (c + 1.5 * cell).min(hi))
        })
        .collect();
    scan(&f, &refined_bounds, resolution)
}

fn scan(f: &impl Fn(&[f64]) -> f64, bounds: &[(f64, f64)], resolution: usize) -> Vec<f64> {
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            (0..resolution)
                .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut arg = vec![0.0; bounds.len()];
    let mut point = vec![0.0; bounds.len()];
    let mut index = vec![0usize; bounds.len()];
    loop {
        for (d, &i) in index.iter().enumerate() {
            point[d] = axes[d][i];
        }
        let value = f(&point);
        if value < best {
            best = value;
            arg.copy_from_slice(&point);
        }
        // Odometer increment.
        let mut d = 0;
        loop {
            index[d] += 1;
            if index[d] < resolution {
                break;
            }
            index[d] = 0;
            d += 1;
            if d == bounds.len() {
                return arg;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::LOG_2PI;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        let diff = (actual - expected).abs();
        assert!(
            diff <= tol,
            "expected {expected}, got {actual}, |diff|={diff}, tol={tol}"
        );
    }

    fn standard_normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x - 0.5 * LOG_2PI).exp()
    }

    #[test]
    fn normal_density_integrates_to_one() {
        let cfg = QuadratureConfig::default();
        let (v, e) = integrate_1d(standard_normal_pdf, -12.0, 12.0, &cfg).unwrap();
        assert_close(v, 1.0, 1e-10);
        assert!(e <= 1e-10);
    }

    #[test]
    fn squared_normal_density_integral() {
        let cfg = QuadratureConfig::default();
        let (v, _) = integrate_1d(|x| standard_normal_pdf(x).powi(2), -12.0, 12.0, &cfg).unwrap();
        assert_close(v, (4.0 * std::f64::consts::PI).powf(-0.5), 1e-10);
    }

    #[test]
    fn two_dimensional_product_density() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_subdivisions: 2_000,
        };
        let (v, _) = integrate_2d(
            |x, y| standard_normal_pdf(x) * standard_normal_pdf(y),
            (-10.0, 10.0),
            (-10.0, 10.0),
            &cfg,
        )
        .unwrap();
        assert_close(v, 1.0, 1e-7);
    }

    #[test]
    fn no_convergence_is_reported() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_subdivisions: 2,
        };
        // An oscillation two panel splits cannot resolve to 1e-14.
        let r = integrate_1d(|x: f64| (1000.0 * x).cos(), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(GviError::NoConvergence { .. })));
    }

    #[test]
    fn finite_difference_gradient_basics() {
        let g = finite_difference_gradient(|k| k[0] * k[0], &[3.0]);
        assert_close(g[0], 6.0, 1e-6);
        let g = finite_difference_gradient(|_| 42.0, &[1.0, -2.0, 0.5]);
        for v in g {
            assert_close(v, 0.0, 1e-12);
        }
    }

    #[test]
    fn grid_argmin_quadratic() {
        let arg = grid_argmin(|k| (k[0] - 2.0).powi(2), &[(0.0, 5.0)], 501);
        assert_close(arg[0], 2.0, 0.01);
    }

    #[test]
    fn grid_argmin_constant_shift_invariance() {
        let f = |k: &[f64]| (k[0] + 1.0).powi(2) + (k[1] - 0.5).powi(2);
        let a = grid_argmin(f, &[(-3.0, 3.0), (-3.0, 3.0)], 101);
        let b = grid_argmin(|k| f(k) + 17.0, &[(-3.0, 3.0), (-3.0, 3.0)], 101);
        assert_eq!(a, b);
    }
}
