//! Element residual and Jacobian.

use super::{AssemblyFlags, Discretization};
use crate::fespace::{p2_gradient_coeffs, p2_values, ElementGeometry, QuadratureRule};
use crate::physics::{
    self, ch_flux_coeff, convex_prime, convex_second, concave_prime, drag, fluid_fraction,
    reaction_localization, reaction_rate, reaction_rate_prime, ModelParams,
};

/// Shape function tables at the quadrature points.
#[derive(Debug, Clone)]
pub(crate) struct QuadTables {
    pub weights: Vec<f64>,
    pub lambda: Vec<[f64; 3]>,
    pub p2: Vec<[f64; 6]>,
    pub p2_grad: Vec<[[f64; 3]; 6]>,
}

impl QuadTables {
    pub fn new(q: &QuadratureRule) -> Self {
        QuadTables {
            weights: q.weights.clone(),
            lambda: q.points.clone(),
            p2: q.points.iter().map(|&l| p2_values(l)).collect(),
            p2_grad: q.points.iter().map(|&l| p2_gradient_coeffs(l)).collect(),
        }
    }
}

/// Values of the discrete fields at one quadrature point.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct PointValues {
    pub phi: f64,
    pub grad_phi: [f64; 2],
    pub mu: f64,
    pub grad_mu: [f64; 2],
    pub c: f64,
    pub grad_c: [f64; 2],
    pub v: [f64; 2],
    /// `grad_v[k][l] = d v_k / d x_l`
    pub grad_v: [[f64; 2]; 2],
    pub p: f64,
}

/// Evaluate a packed state on element `t` at quadrature point `q`, given
/// element dofs in kernel order and precomputed basis gradients.
pub(crate) fn point_values(
    x: &[f64],
    dofs: &[usize],
    reactive: bool,
    lam: &[f64; 3],
    n2: &[f64; 6],
    gpsi: &[[f64; 2]; 3],
    gn: &[[f64; 2]; 6],
) -> PointValues {
    let mut pv = PointValues::default();
    let vb = if reactive { 9 } else { 6 };
    for a in 0..3 {
        let (f, m, p) = (x[dofs[a]], x[dofs[3 + a]], x[dofs[vb + 12 + a]]);
        pv.phi += lam[a] * f;
        pv.mu += lam[a] * m;
        pv.p += lam[a] * p;
        for d in 0..2 {
            pv.grad_phi[d] += gpsi[a][d] * f;
            pv.grad_mu[d] += gpsi[a][d] * m;
        }
        if reactive {
            let c = x[dofs[6 + a]];
            pv.c += lam[a] * c;
            for d in 0..2 {
                pv.grad_c[d] += gpsi[a][d] * c;
            }
        }
    }
    for j in 0..6 {
        for k in 0..2 {
            let vj = x[dofs[vb + 2 * j + k]];
            pv.v[k] += n2[j] * vj;
            for l in 0..2 {
                pv.grad_v[k][l] += gn[j][l] * vj;
            }
        }
    }
    pv
}

pub(crate) struct ElementKernel<'a> {
    flags: AssemblyFlags,
    params: &'a ModelParams,
    nloc: usize,
    pub res: Vec<f64>,
    pub jac: Vec<f64>,
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl<'a> ElementKernel<'a> {
    pub fn new(flags: AssemblyFlags, params: &'a ModelParams) -> Self {
        let nloc = if flags.reactive { 24 } else { 21 };
        ElementKernel {
            flags,
            params,
            nloc,
            res: vec![0.0; nloc],
            jac: vec![0.0; nloc * nloc],
        }
    }

    pub fn compute(
        &mut self,
        disc: &Discretization,
        t: usize,
        dofs: &[usize],
        old: &[f64],
        guess: &[f64],
        with_jacobian: bool,
    ) {
        let nloc = self.nloc;
        self.res.fill(0.0);
        if with_jacobian {
            self.jac.fill(0.0);
        }
        let prm = self.params;
        let reactive = self.flags.reactive;
        let flow = !self.flags.preprocessing;
        let (rho, gamma, eps, sigma, delta, tau) =
            (prm.rho, prm.gamma, prm.epsilon, prm.sigma, prm.delta, prm.tau);
        let s = physics::fluid_fraction_slope(prm);
        let meps = ch_flux_coeff(prm, self.flags.preprocessing);
        let geo = ElementGeometry::new(disc.mesh.triangle_coords(t));
        let gpsi = geo.grad_lambda;
        let tb = &disc.tables;

        // local index helpers (kernel order)
        let iphi = |a: usize| a;
        let imu = |a: usize| 3 + a;
        let ic = |a: usize| 6 + a;
        let vb = if reactive { 9 } else { 6 };
        let iv = |j: usize, k: usize| vb + 2 * j + k;
        let ip = |a: usize| vb + 12 + a;

        let res = &mut self.res;
        let jac = &mut self.jac;
        let mut add = |i: usize, j: usize, v: f64| jac[i * nloc + j] += v;

        for q in 0..tb.weights.len() {
            let w = tb.weights[q] * geo.det;
            let lam = tb.lambda[q];
            let nn = tb.p2[q];
            let mut gn = [[0.0; 2]; 6];
            for j in 0..6 {
                for d in 0..2 {
                    gn[j][d] = (0..3).map(|k| tb.p2_grad[q][j][k] * gpsi[k][d]).sum();
                }
            }
            let u = point_values(guess, dofs, reactive, &lam, &nn, &gpsi, &gn);
            let o = point_values(old, dofs, reactive, &lam, &nn, &gpsi, &gn);

            let phit = fluid_fraction(u.phi, prm);
            let rhot = rho * (u.phi + delta);
            let rhot_old = rho * (o.phi + delta);
            let div_v = u.grad_v[0][0] + u.grad_v[1][1];
            // reaction, explicit localization, implicit rate
            let (react, dreact_dc) = if reactive {
                let qf = reaction_localization(o.phi) / eps;
                (-qf * reaction_rate(u.c, prm), -qf * reaction_rate_prime(u.c, prm))
            } else {
                (0.0, 0.0)
            };

            // ---- continuity rows
            if flow {
                let cont = phit * div_v + s * dot2(u.grad_phi, u.v);
                for a in 0..3 {
                    res[ip(a)] -= w * lam[a] * cont;
                }
                if with_jacobian {
                    for a in 0..3 {
                        for j in 0..6 {
                            for k in 0..2 {
                                let d = phit * gn[j][k] + s * u.grad_phi[k] * nn[j];
                                add(ip(a), iv(j, k), -w * lam[a] * d);
                            }
                        }
                        for b in 0..3 {
                            let d = s * lam[b] * div_v + s * dot2(gpsi[b], u.v);
                            add(ip(a), iphi(b), -w * lam[a] * d);
                        }
                    }
                }
            }

            // ---- momentum rows
            if flow {
                let a1 = [
                    rho * o.phi * u.v[0] - rho * meps * u.grad_mu[0],
                    rho * o.phi * u.v[1] - rho * meps * u.grad_mu[1],
                ];
                let a0 = [
                    rho * o.phi * o.v[0] - rho * meps * o.grad_mu[0],
                    rho * o.phi * o.v[1] - rho * meps * o.grad_mu[1],
                ];
                let dn = drag(fluid_fraction(o.phi, prm), prm);
                let mass = 0.5 * (rhot_old + rhot);
                for i in 0..6 {
                    let a0_gni = dot2(a0, gn[i]);
                    for k in 0..2 {
                        // gradient of (v_old . test) for test N_i e_k
                        let g_vt = [
                            nn[i] * o.grad_v[k][0] + o.v[k] * gn[i][0],
                            nn[i] * o.grad_v[k][1] + o.v[k] * gn[i][1],
                        ];
                        let visc: f64 = (0..2)
                            .map(|l| (u.grad_v[k][l] + u.grad_v[l][k]) * gn[i][l])
                            .sum();
                        let r = mass * (u.v[k] - o.v[k]) / tau * nn[i]
                            + 0.5 * dot2(a1, g_vt)
                            + 0.5 * dot2(a0, u.grad_v[k]) * nn[i]
                            - 0.5 * a0_gni * u.v[k]
                            - u.p * (phit * gn[i][k] + s * u.grad_phi[k] * nn[i])
                            + gamma * visc
                            + rho * dn * u.v[k] * nn[i]
                            + sigma * o.phi * nn[i] * u.grad_mu[k]
                            - 0.5 * rho * react * u.v[k] * nn[i];
                        res[iv(i, k)] += w * r;
                        if !with_jacobian {
                            continue;
                        }
                        let row = iv(i, k);
                        for b in 0..3 {
                            let dphi = 0.5 * rho * lam[b] * (u.v[k] - o.v[k]) / tau * nn[i]
                                - u.p * (s * lam[b] * gn[i][k] + s * gpsi[b][k] * nn[i]);
                            add(row, iphi(b), w * dphi);
                            let dmu = 0.5 * (-rho * meps) * dot2(gpsi[b], g_vt)
                                + sigma * o.phi * nn[i] * gpsi[b][k];
                            add(row, imu(b), w * dmu);
                            let dp = -lam[b] * (phit * gn[i][k] + s * u.grad_phi[k] * nn[i]);
                            add(row, ip(b), w * dp);
                            if reactive {
                                let dc = -0.5 * rho * dreact_dc * lam[b] * u.v[k] * nn[i];
                                add(row, ic(b), w * dc);
                            }
                        }
                        for j in 0..6 {
                            let nij = nn[j] * nn[i];
                            let diag = mass / tau * nij
                                + 0.5 * dot2(a0, gn[j]) * nn[i]
                                - 0.5 * a0_gni * nn[j]
                                + gamma * dot2(gn[j], gn[i])
                                + rho * dn * nij
                                - 0.5 * rho * react * nij;
                            for m in 0..2 {
                                let mut d = 0.5 * rho * o.phi * nn[j] * g_vt[m]
                                    + gamma * gn[j][k] * gn[i][m];
                                if m == k {
                                    d += diag;
                                }
                                add(row, iv(j, m), w * d);
                            }
                        }
                    }
                }
            }

            // ---- phase-field rows
            for a in 0..3 {
                let r = (u.phi - o.phi) / tau * lam[a] + meps * dot2(u.grad_mu, gpsi[a])
                    - o.phi * dot2(u.v, gpsi[a])
                    - react * lam[a];
                res[iphi(a)] += w * r;
            }
            if with_jacobian {
                for a in 0..3 {
                    for b in 0..3 {
                        add(iphi(a), iphi(b), w * lam[b] * lam[a] / tau);
                        add(iphi(a), imu(b), w * meps * dot2(gpsi[b], gpsi[a]));
                        if reactive {
                            add(iphi(a), ic(b), -w * dreact_dc * lam[b] * lam[a]);
                        }
                    }
                    for j in 0..6 {
                        for m in 0..2 {
                            add(iphi(a), iv(j, m), -w * o.phi * nn[j] * gpsi[a][m]);
                        }
                    }
                }
            }

            // ---- chemical potential rows
            let wprime = (convex_prime(u.phi, prm) + concave_prime(o.phi)) / eps;
            let wsecond = convex_second(u.phi, prm) / eps;
            for a in 0..3 {
                let r = u.mu * lam[a] - wprime * lam[a] - eps * dot2(u.grad_phi, gpsi[a]);
                res[imu(a)] += w * r;
            }
            if with_jacobian {
                for a in 0..3 {
                    for b in 0..3 {
                        add(imu(a), imu(b), w * lam[b] * lam[a]);
                        add(
                            imu(a),
                            iphi(b),
                            -w * (wsecond * lam[b] * lam[a] + eps * dot2(gpsi[b], gpsi[a])),
                        );
                    }
                }
            }

            // ---- concentration rows
            if reactive {
                let cs = prm.c_star;
                let dcoef = prm.diffusivity * (o.phi + delta);
                for a in 0..3 {
                    let r = ((u.phi + delta) * (u.c - cs) - (o.phi + delta) * (o.c - cs)) / tau
                        * lam[a]
                        + (u.c - cs) * meps * dot2(u.grad_mu, gpsi[a])
                        - o.phi * (u.c - cs) * dot2(u.v, gpsi[a])
                        + dcoef * dot2(u.grad_c, gpsi[a]);
                    res[ic(a)] += w * r;
                }
                if with_jacobian {
                    for a in 0..3 {
                        for b in 0..3 {
                            add(ic(a), iphi(b), w * lam[b] * (u.c - cs) / tau * lam[a]);
                            let dc = (u.phi + delta) * lam[b] / tau * lam[a]
                                + lam[b] * meps * dot2(u.grad_mu, gpsi[a])
                                - o.phi * lam[b] * dot2(u.v, gpsi[a])
                                + dcoef * dot2(gpsi[b], gpsi[a]);
                            add(ic(a), ic(b), w * dc);
                            add(ic(a), imu(b), w * (u.c - cs) * meps * dot2(gpsi[b], gpsi[a]));
                        }
                        for j in 0..6 {
                            for m in 0..2 {
                                add(ic(a), iv(j, m), -w * o.phi * (u.c - cs) * nn[j] * gpsi[a][m]);
                            }
                        }
                    }
                }
            }
        }
    }
}
