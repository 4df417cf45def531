//! Pointwise closures of the phase-field model.

use crate::error::{Error, Result};

/// Physical and numerical parameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub rho: f64,
    pub gamma: f64,
    pub d0: f64,
    pub d_max: f64,
    pub mobility: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_dw: f64,
    pub gamma_dw: f64,
    pub m_pre: f64,
    pub n_pre: usize,
    pub diffusivity: f64,
    pub c_star: f64,
    pub k_c: f64,
    pub f_bar: f64,
    pub tau: f64,
}

impl ModelParams {
    /// Lid-driven cavity parameter set.
    pub fn cavity() -> Self {
        ModelParams {
            rho: 1.0,
            gamma: 0.01,
            d0: 1000.0,
            d_max: 0.9,
            mobility: 1.0,
            sigma: 1.0,
            epsilon: 0.03,
            delta: 0.03,
            delta_dw: 0.02,
            gamma_dw: 0.015,
            m_pre: 1e3,
            n_pre: 0,
            diffusivity: 1.0,
            c_star: 2.0,
            k_c: 0.1,
            f_bar: 0.1,
            tau: 0.02,
        }
    }

    /// Channel-flow parameter set with sharp-interface preprocessing.
    pub fn channel() -> Self {
        ModelParams {
            rho: 1e3,
            gamma: 1e-3,
            d0: 1e3,
            d_max: 0.9,
            mobility: 1e-3,
            sigma: 1.0,
            epsilon: 6e-3,
            delta: 6e-3,
            delta_dw: 4e-3,
            gamma_dw: 3e-3,
            m_pre: 1e3,
            n_pre: 5,
            diffusivity: 1.0,
            c_star: 2.0,
            k_c: 0.1,
            f_bar: 0.1,
            tau: 0.002,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("d0", self.d0),
            ("d_max", self.d_max),
            ("sigma", self.sigma),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("delta_dw", self.delta_dw),
            ("gamma_dw", self.gamma_dw),
            ("m_pre", self.m_pre),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        // mobility, diffusivity, reaction rate, and flow may be switched off
        let non_negative = [
            ("mobility", self.mobility),
            ("diffusivity", self.diffusivity),
            ("k_c", self.k_c),
            ("f_bar", self.f_bar),
            ("c_star", self.c_star),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.delta_dw > self.delta {
            return Err(Error::InvalidArgument(format!(
                "delta_dw = {} exceeds delta = {}",
                self.delta_dw, self.delta
            )));
        }
        if self.delta_dw - self.gamma_dw <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "delta_dw - gamma_dw must be positive, got {} - {}",
                self.delta_dw, self.gamma_dw
            )));
        }
        if self.d_max > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "d_max must lie in (0, 1], got {}",
                self.d_max
            )));
        }
        if 2.0 * self.delta >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "delta must be below 1/2, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Regularized fluid fraction `2 delta + (1 - 2 delta) phi`.
pub fn fluid_fraction(phi: f64, p: &ModelParams) -> f64 {
    2.0 * p.delta + (1.0 - 2.0 * p.delta) * phi
}

/// Slope of [`fluid_fraction`].
pub fn fluid_fraction_slope(p: &ModelParams) -> f64 {
    1.0 - 2.0 * p.delta
}

/// Fluid density and its regularized counterpart.
pub fn densities(phi: f64, p: &ModelParams) -> (f64, f64) {
    let rho_f = p.rho * phi;
    (rho_f, rho_f + p.rho * p.delta)
}

pub fn limiter(phi: f64, p: &ModelParams) -> f64 {
    let (d, g) = (p.delta_dw, p.gamma_dw);
    if phi <= -g {
        d * (g * g / (d - g) + (phi + g) * (-g * (2.0 * d - g)) / ((d - g) * (d - g)))
    } else if phi < 0.0 {
        d * phi * phi / (phi + d)
    } else {
        0.0
    }
}

pub fn limiter_prime(phi: f64, p: &ModelParams) -> f64 {
    let (d, g) = (p.delta_dw, p.gamma_dw);
    if phi <= -g {
        d * (-g * (2.0 * d - g)) / ((d - g) * (d - g))
    } else if phi < 0.0 {
        d * phi * (phi + 2.0 * d) / ((phi + d) * (phi + d))
    } else {
        0.0
    }
}

pub fn limiter_second(phi: f64, p: &ModelParams) -> f64 {
    let d = p.delta_dw;
    if phi <= -p.gamma_dw || phi >= 0.0 {
        0.0
    } else {
        2.0 * d.powi(3) / (phi + d).powi(3)
    }
}

pub fn double_well(phi: f64, p: &ModelParams) -> f64 {
    phi * phi * (1.0 - phi) * (1.0 - phi) + limiter(phi, p) + limiter(1.0 - phi, p)
}

pub fn double_well_prime(phi: f64, p: &ModelParams) -> f64 {
    2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi) + limiter_prime(phi, p)
        - limiter_prime(1.0 - phi, p)
}

/// Convex part `(phi - 1/2)^4 + 1/16 + l(phi) + l(1 - phi)`.
pub fn convex_part(phi: f64, p: &ModelParams) -> f64 {
    let u = phi - 0.5;
    u.powi(4) + 1.0 / 16.0 + limiter(phi, p) + limiter(1.0 - phi, p)
}

/// Concave part `-(phi - 1/2)^2 / 2`.
pub fn concave_part(phi: f64) -> f64 {
    let u = phi - 0.5;
    -0.5 * u * u
}

pub fn convex_prime(phi: f64, p: &ModelParams) -> f64 {
    let u = phi - 0.5;
    4.0 * u.powi(3) + limiter_prime(phi, p) - limiter_prime(1.0 - phi, p)
}

pub fn convex_second(phi: f64, p: &ModelParams) -> f64 {
    let u = phi - 0.5;
    12.0 * u * u + limiter_second(phi, p) + limiter_second(1.0 - phi, p)
}

pub fn concave_prime(phi: f64) -> f64 {
    -(phi - 0.5)
}

/// Implicit convex derivative at the new level plus explicit concave
/// derivative at the old level.
pub fn double_well_split_prime(phi_new: f64, phi_old: f64, p: &ModelParams) -> f64 {
    convex_prime(phi_new, p) + concave_prime(phi_old)
}

/// Drag coefficient, vanishing above `d_max`.
pub fn drag(phi_f_tilde: f64, p: &ModelParams) -> f64 {
    if phi_f_tilde <= p.d_max {
        let s = p.d_max - phi_f_tilde;
        p.d0 * s * s / (p.d_max * p.d_max)
    } else {
        0.0
    }
}

/// Coefficient multiplying `-grad mu` in the phase-field flux.
pub fn ch_flux_coeff(p: &ModelParams, preprocessing: bool) -> f64 {
    if preprocessing {
        p.m_pre * p.epsilon
    } else {
        p.mobility * p.epsilon
    }
}

pub fn reaction_rate(c: f64, p: &ModelParams) -> f64 {
    p.k_c * (c * c - 1.0)
}

pub fn reaction_rate_prime(c: f64, p: &ModelParams) -> f64 {
    2.0 * p.k_c * c
}

pub fn reaction_localization(phi: f64) -> f64 {
    (2f64.sqrt() * phi * (1.0 - phi)).max(0.0)
}

/// Circular inclusion as `(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Product of equilibrium tanh profiles, one per inclusion.
pub fn tanh_circle_ic(circles: &[Circle], epsilon: f64) -> impl Fn([f64; 2]) -> f64 + '_ {
    let width = 2f64.sqrt() * epsilon;
    move |x| {
        circles
            .iter()
            .map(|c| {
                let r = (x[0] - c.center[0]).hypot(x[1] - c.center[1]);
                0.5 * (1.0 + ((r - c.radius) / width).tanh())
            })
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t1() -> ModelParams {
        ModelParams::cavity()
    }

    #[test]
    fn fraction_and_density() {
        let p = t1();
        assert_eq!(fluid_fraction(1.0, &p), 1.0);
        assert!((fluid_fraction(0.0, &p) - 0.06).abs() < 1e-15);
        assert!((fluid_fraction(0.5, &p) - (0.5 + p.delta)).abs() < 1e-15);

        let (r, rt) = densities(0.0, &p);
        assert_eq!(r, 0.0);
        assert!((rt - 0.03).abs() < 1e-15);
        let (r, rt) = densities(1.0, &ModelParams::channel());
        assert_eq!(r, 1000.0);
        assert!((rt - 1006.0).abs() < 1e-12);
        let q = ModelParams {
            rho: 2.0,
            delta: 0.1,
            ..t1()
        };
        let (r, rt) = densities(0.5, &q);
        assert!((r - 1.0).abs() < 1e-15 && (rt - 1.2).abs() < 1e-15);
    }

    #[test]
    fn limiter_branches() {
        let p = t1();
        assert_eq!(limiter(0.3, &p), 0.0);
        let g = p.gamma_dw;
        let d = p.delta_dw;
        let outer = d * (g * g / (d - g));
        let middle = d * g * g / (-g + d);
        assert!((outer - middle).abs() < 1e-15);
        assert!((limiter(-g, &p) - 0.0009).abs() < 1e-15);
        assert!(limiter(-1e-12, &p).abs() < 1e-20);
        // two-sided continuity at the breakpoints
        for x in [-g, 0.0] {
            let h = 1e-13;
            assert!((limiter(x - h, &p) - limiter(x + h, &p)).abs() < 1e-13);
            assert!((limiter_prime(x - h, &p) - limiter_prime(x + h, &p)).abs() < 1e-10);
        }
    }

    #[test]
    fn double_well_values() {
        let p = t1();
        assert_eq!(double_well(0.0, &p), 0.0);
        assert_eq!(double_well(1.0, &p), 0.0);
        assert!((double_well(0.5, &p) - 0.0625).abs() < 1e-16);
        assert_eq!(double_well_prime(0.5, &p), 0.0);
        assert_eq!(double_well_split_prime(0.5, 0.5, &p), 0.0);
    }

    #[test]
    fn split_formula() {
        let p = t1();
        // d/dphi of (phi-1/2)^4 at 0.8 plus d/dphi of -(phi-1/2)^2/2 at 0.2
        let expect = 4.0 * 0.3f64.powi(3) + 0.3;
        assert!((double_well_split_prime(0.8, 0.2, &p) - expect).abs() < 1e-15);
    }

    #[test]
    fn drag_values() {
        let p = t1();
        assert_eq!(drag(p.d_max, &p), 0.0);
        assert!((drag(0.0, &p) - p.d0).abs() < 1e-12);
        assert!((drag(p.d_max / 2.0, &p) - p.d0 / 4.0).abs() < 1e-12);
        assert_eq!(drag(0.95, &p), 0.0);
        let h = 1e-13;
        assert!((drag(p.d_max - h, &p) - drag(p.d_max + h, &p)).abs() < 1e-13);
    }

    #[test]
    fn flux_and_reaction() {
        assert!((ch_flux_coeff(&t1(), false) - 0.03).abs() < 1e-16);
        assert!((ch_flux_coeff(&ModelParams::channel(), true) - 6.0).abs() < 1e-12);
        let p0 = ModelParams {
            mobility: 0.0,
            ..t1()
        };
        assert_eq!(ch_flux_coeff(&p0, false), 0.0);
        assert_eq!(reaction_rate(1.0, &t1()), 0.0);
        assert!((reaction_localization(0.5) - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(reaction_localization(-0.1), 0.0);
        assert_eq!(reaction_localization(1.1), 0.0);
    }

    #[test]
    fn circle_profile() {
        let deep = [Circle {
            center: [0.5, 0.5],
            radius: 0.4,
        }];
        assert!(tanh_circle_ic(&deep, 0.03)([0.5, 0.5]) < 1e-6);
        let circles = [Circle {
            center: [0.5, 0.5],
            radius: 0.2,
        }];
        let f = tanh_circle_ic(&circles, 0.03);
        assert!((f([0.7, 0.5]) - 0.5).abs() < 1e-15);
        assert!((f([1.8, 0.9]) - 1.0).abs() < 1e-6);
        let two = [
            circles[0],
            Circle {
                center: [1.65, 0.65],
                radius: 0.175,
            },
        ];
        let g = tanh_circle_ic(&two, 0.03);
        let direct = |x: [f64; 2]| -> f64 {
            two.iter()
                .map(|c| {
                    let r = ((x[0] - c.center[0]).powi(2) + (x[1] - c.center[1]).powi(2)).sqrt();
                    0.5 * (1.0 + ((r - c.radius) / (2f64.sqrt() * 0.03)).tanh())
                })
                .product()
        };
        assert!((g([1.1, 0.1]) - 1.0).abs() < 1e-6);
        assert!((g([1.1, 0.1]) - direct([1.1, 0.1])).abs() < 1e-15);
    }

    #[test]
    fn presets_validate() {
        ModelParams::cavity().validate().unwrap();
        ModelParams::channel().validate().unwrap();
        let bad = ModelParams {
            delta_dw: 0.05,
            ..t1()
        };
        assert!(bad.validate().is_err());
        let bad = ModelParams {
            gamma_dw: 0.02,
            ..t1()
        };
        assert!(bad.validate().is_err());
    }

    fn fd_check(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x: f64) {
        let h = 1e-6;
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let exact = df(x);
        let scale = exact.abs().max(1e-3);
        assert!(
            (fd - exact).abs() <= 1e-6 * scale,
            "x = {x}: fd {fd} vs exact {exact}"
        );
    }

    #[test]
    fn derivatives_near_breakpoints() {
        let p = t1();
        for x in [-p.gamma_dw, 0.0, 1.0, 1.0 + p.gamma_dw] {
            for s in [-1.0, 1.0] {
                let y = x + s * 2e-6;
                fd_check(|z| double_well(z, &p), |z| double_well_prime(z, &p), y);
            }
        }
    }

    proptest! {
        #[test]
        fn double_well_prime_matches_fd(x in -0.3f64..1.3) {
            let p = t1();
            // skip the kink neighbourhoods where the stencil straddles a branch change
            let kinks = [-p.gamma_dw, 0.0, 1.0, 1.0 + p.gamma_dw];
            prop_assume!(kinks.iter().all(|k| (x - k).abs() > 1e-5));
            fd_check(|z| double_well(z, &p), |z| double_well_prime(z, &p), x);
            fd_check(|z| convex_prime(z, &p), |z| convex_second(z, &p), x);
        }

        #[test]
        fn split_is_consistent(x in -0.3f64..1.3) {
            let p = t1();
            let w = convex_part(x, &p) + concave_part(x);
            prop_assert!((w - double_well(x, &p)).abs() < 1e-14);
            prop_assert!((double_well_split_prime(x, x, &p) - double_well_prime(x, &p)).abs() < 1e-13);
            prop_assert!(convex_second(x, &p) >= 0.0);
        }

        #[test]
        fn fraction_is_affine(x in 0.0f64..1.0) {
            let p = t1();
            let f = fluid_fraction(x, &p);
            prop_assert!(f >= 2.0 * p.delta - 1e-15 && f <= 1.0 + 1e-15);
            let mid = fluid_fraction(0.5 * (x + 1.0), &p);
            prop_assert!((mid - 0.5 * (f + 1.0)).abs() < 1e-14);
        }
    }
}
