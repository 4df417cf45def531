use super::*;
use crate::mesh::TriMesh;
use rand::{Rng, SeedableRng};

fn disc(nx: usize, ny: usize, reactive: bool) -> Discretization {
    let mesh = Arc::new(TriMesh::rectangle(2.0, 1.0, nx, ny).unwrap());
    Discretization::new(mesh, &BoundaryTag::ALL, reactive).unwrap()
}

fn random_state(d: &Discretization, seed: u64) -> Vec<f64> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let l = d.layout;
    let mut x = vec![0.0; l.total()];
    for i in 0..l.n_p1 {
        x[l.phi() + i] = rng.gen_range(0.05..0.95);
        x[l.mu() + i] = rng.gen_range(-1.0..1.0);
        x[l.p() + i] = rng.gen_range(-1.0..1.0);
        if let Some(c) = l.c() {
            x[c + i] = rng.gen_range(0.5..2.0);
        }
    }
    for i in 0..2 * l.n_p2_nodes {
        x[l.v() + i] = rng.gen_range(-0.5..0.5);
    }
    x
}

fn fd_check(reactive: bool, preprocessing: bool) {
    let d = disc(4, 2, reactive);
    let mut prm = ModelParams::cavity();
    prm.d0 = 10.0;
    let flags = AssemblyFlags {
        preprocessing,
        reactive,
    };
    let old = random_state(&d, 1);
    let x = random_state(&d, 2);
    let none = Constraints::default();
    let (r0, j) = assemble(&d, &prm, &old, &x, flags, &none, true).unwrap();
    let j = j.unwrap().to_dense();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for col in 0..x.len() {
        let mut xp = x.clone();
        xp[col] += h;
        let mut xm = x.clone();
        xm[col] -= h;
        let rp = assemble_residual(&d, &prm, &old, &xp, flags, &none).unwrap();
        let rm = assemble_residual(&d, &prm, &old, &xm, flags, &none).unwrap();
        for row in 0..x.len() {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            let err = (fd - j[row][col]).abs() / (1.0 + fd.abs());
            worst = worst.max(err);
        }
    }
    assert!(r0.iter().all(|v| v.is_finite()));
    assert!(worst < 1e-6, "worst relative Jacobian mismatch {worst}");
}

#[test]
fn jacobian_matches_finite_differences() {
    fd_check(false, false);
}

#[test]
fn jacobian_matches_finite_differences_preprocessing() {
    fd_check(false, true);
}

#[test]
fn jacobian_matches_finite_differences_reactive() {
    fd_check(true, false);
}

#[test]
fn preprocessing_leaves_flow_rows_empty() {
    let d = disc(4, 2, false);
    let prm = ModelParams::cavity();
    let flags = AssemblyFlags {
        preprocessing: true,
        reactive: false,
    };
    let old = random_state(&d, 3);
    let x = random_state(&d, 4);
    let sys = assemble_jacobian(&d, &prm, &old, &x, flags, &Constraints::default()).unwrap();
    for &r in &sys.ns {
        assert_eq!(sys.rhs[r], 0.0);
        assert!(sys.matrix.row(r).1.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn rest_states_have_zero_residual() {
    let d = disc(6, 3, false);
    let prm = ModelParams::cavity();
    let l = d.layout;
    for phi in [0.0, 1.0] {
        let mut x = vec![0.0; l.total()];
        for i in 0..l.n_p1 {
            x[l.phi() + i] = phi;
            // mu balances the double-well derivative of a pure phase
            x[l.mu() + i] = physics_mu(phi, &prm);
        }
        let r = assemble_residual(&d, &prm, &x, &x, AssemblyFlags::default(), &Constraints::default())
            .unwrap();
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n < 1e-12, "rest residual {n} for phi={phi}");
    }
}

fn physics_mu(phi: f64, prm: &ModelParams) -> f64 {
    crate::physics::double_well_split_prime(phi, phi, prm) / prm.epsilon
}

#[test]
fn constraints_replace_rows() {
    let d = disc(4, 2, false);
    let prm = ModelParams::cavity();
    let x = random_state(&d, 5);
    let mut c = Constraints::default();
    c.push(3, 0.25);
    let sys = assemble_jacobian(&d, &prm, &x, &x, AssemblyFlags::default(), &c).unwrap();
    assert!((sys.rhs[3] - (0.25 - x[3])).abs() < 1e-15);
    let (cols, vals) = sys.matrix.row(3);
    for (&cj, &v) in cols.iter().zip(vals) {
        assert_eq!(v, if cj == 3 { 1.0 } else { 0.0 });
    }
}

#[test]
fn blocks_tile_the_matrix() {
    let d = disc(4, 2, true);
    let prm = ModelParams::cavity();
    let x = random_state(&d, 6);
    let flags = AssemblyFlags {
        preprocessing: false,
        reactive: true,
    };
    let sys = assemble_jacobian(&d, &prm, &x, &x, flags, &Constraints::default()).unwrap();
    let b = extract_blocks(&sys);
    let dense = sys.matrix.to_dense();
    let nch = sys.ch.len();
    for (i, row) in dense.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let got = match (i < nch, j < nch) {
                (true, true) => b.a_ch.get(i, j),
                (true, false) => b.c_t.get(i, j - nch),
                (false, true) => b.c_i.get(i - nch, j),
                (false, false) => b.a_ns.get(i - nch, j - nch),
            };
            assert_eq!(got, v);
        }
    }
    assert_eq!(b.a_ch.nnz() + b.a_ns.nnz() + b.c_t.nnz() + b.c_i.nnz(), sys.matrix.nnz());
}

#[test]
fn ch_block_does_not_depend_on_viscosity() {
    let d = disc(4, 2, false);
    let mut prm = ModelParams::cavity();
    let x = random_state(&d, 7);
    let old = random_state(&d, 8);
    let none = Constraints::default();
    let a = assemble_jacobian(&d, &prm, &old, &x, AssemblyFlags::default(), &none).unwrap();
    prm.gamma *= 37.0;
    let b = assemble_jacobian(&d, &prm, &old, &x, AssemblyFlags::default(), &none).unwrap();
    assert_eq!(extract_blocks(&a).a_ch.values(), extract_blocks(&b).a_ch.values());
    assert_ne!(extract_blocks(&a).a_ns.values(), extract_blocks(&b).a_ns.values());
}

#[test]
fn dof_counts() {
    let d = disc(64, 32, false);
    let nv = d.mesh.n_vertices();
    let ne = d.mesh.n_edges();
    assert_eq!(d.layout.n_ch(), 2 * nv);
    assert_eq!(d.layout.n_ns(), 2 * (nv + ne) + nv);
    let ratio = d.layout.n_ns() as f64 / d.layout.n_ch() as f64;
    assert!((4.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn viscous_block_is_symmetric() {
    // with zero old velocity, zero potential and uniform phase the velocity
    // block reduces to mass, drag and the symmetric viscous form
    let d = disc(4, 2, false);
    let prm = ModelParams::cavity();
    let l = d.layout;
    let mut x = vec![0.0; l.total()];
    for i in 0..l.n_p1 {
        x[i] = 0.7;
    }
    let sys = assemble_jacobian(&d, &prm, &x, &x, AssemblyFlags::default(), &Constraints::default())
        .unwrap();
    let vi: Vec<usize> = (l.v()..l.p()).collect();
    let a = sys.matrix.submatrix(&vi, &vi).to_dense();
    for i in 0..vi.len() {
        for j in 0..vi.len() {
            assert!((a[i][j] - a[j][i]).abs() < 1e-12 * (1.0 + a[i][j].abs()));
        }
    }
}

#[test]
fn mismatched_inputs_are_rejected() {
    let d = disc(2, 1, false);
    let prm = ModelParams::cavity();
    let x = vec![0.0; d.layout.total()];
    let short = vec![0.0; 3];
    let none = Constraints::default();
    assert!(assemble_residual(&d, &prm, &short, &x, AssemblyFlags::default(), &none).is_err());
    let flags = AssemblyFlags {
        preprocessing: false,
        reactive: true,
    };
    assert!(assemble_residual(&d, &prm, &x, &x, flags, &none).is_err());
    let mut bad = x.clone();
    bad[0] = f64::NAN;
    assert!(assemble_residual(&d, &prm, &x, &bad, AssemblyFlags::default(), &none).is_err());
}

#[test]
fn pack_unpack_roundtrip() {
    let d = disc(3, 2, true);
    let x = random_state(&d, 9);
    let s = SystemState::unpack(&d.layout, &x, 0.5);
    s.check(&d.layout).unwrap();
    assert_eq!(s.pack(&d.layout), x);
}
