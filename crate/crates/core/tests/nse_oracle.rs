//! The Galerkin form against a direct real-space evaluation of
//! `mean(((u·∇)v)·w)` on a uniform grid of the torus.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refldp::dynamics::eval_b;
use refldp::nse::{nse_galerkin_form, torus_space, torus_wavenumbers_16, torus_wavenumbers_8, Wavevector};
use refldp::SpectralVector;

const GRID: usize = 16;

/// Value and gradient of every mode at every grid point:
/// `[point][mode] = (φ, ∂_x φ, ∂_y φ)` with each entry a 2-vector.
fn mode_table(ks: &[Wavevector]) -> Vec<Vec<[[f64; 2]; 3]>> {
    let mut table = Vec::new();
    for a in 0..GRID {
        for b in 0..GRID {
            let (x, y) = (2.0 * PI * a as f64 / GRID as f64, 2.0 * PI * b as f64 / GRID as f64);
            let row = ks
                .iter()
                .map(|&(k1, k2)| {
                    let rep = k1 > 0 || (k1 == 0 && k2 > 0);
                    let (p1, p2) = if rep { (k1 as f64, k2 as f64) } else { (-k1 as f64, -k2 as f64) };
                    let len = (p1 * p1 + p2 * p2).sqrt();
                    let e = [-p2 / len, p1 / len];
                    let th = p1 * x + p2 * y;
                    let (s, ds) = if rep {
                        (SQRT_2 * th.cos(), -SQRT_2 * th.sin())
                    } else {
                        (SQRT_2 * th.sin(), SQRT_2 * th.cos())
                    };
                    [
                        [s * e[0], s * e[1]],
                        [ds * p1 * e[0], ds * p1 * e[1]],
                        [ds * p2 * e[0], ds * p2 * e[1]],
                    ]
                })
                .collect();
            table.push(row);
        }
    }
    table
}

fn real_space_b(table: &[Vec<[[f64; 2]; 3]>], u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for row in table {
        let mut uf = [0.0; 2];
        let mut dvx = [0.0; 2];
        let mut dvy = [0.0; 2];
        let mut wf = [0.0; 2];
        for (m, g) in row.iter().enumerate() {
            for c in 0..2 {
                uf[c] += u[m] * g[0][c];
                dvx[c] += v[m] * g[1][c];
                dvy[c] += v[m] * g[2][c];
                wf[c] += w[m] * g[0][c];
            }
        }
        for c in 0..2 {
            acc += (uf[0] * dvx[c] + uf[1] * dvy[c]) * wf[c];
        }
    }
    acc / table.len() as f64
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn check(ks: Vec<Wavevector>, triples: usize) {
    let cfg = torus_space(&ks).unwrap();
    let form = nse_galerkin_form(&cfg, &ks).unwrap();
    let table = mode_table(&ks);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = ks.len();
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let (u, v, w) = (random_vec(&mut rng, d), random_vec(&mut rng, d), random_vec(&mut rng, d));
        let scale = [&u, &v, &w].iter().map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt()).product::<f64>();
        let (su, sv, sw) = (
            SpectralVector::new(u.clone()).unwrap(),
            SpectralVector::new(v.clone()).unwrap(),
            SpectralVector::new(w.clone()).unwrap(),
        );
        let b = eval_b(&form, &su, &sv, &sw).unwrap();
        worst = worst.max((b - real_space_b(&table, &u, &v, &w)).abs() / scale);
    }
    assert!(worst < 1e-10, "worst relative deviation {worst:e}");
}

#[test]
fn eight_modes_match_real_space_sum() {
    check(torus_wavenumbers_8(), 2000);
}

#[test]
fn sixteen_modes_match_real_space_sum() {
    check(torus_wavenumbers_16(), 300);
}

#[test]
fn single_mode_entries() {
    // b(φ_(1,0), φ_(0,1), φ_(1,1)) computed by hand: zero unless the
    // frequencies close a triad, which (1,0) + (0,1) = (1,1) does.
    let ks = torus_wavenumbers_8();
    let cfg = torus_space(&ks).unwrap();
    let form = nse_galerkin_form(&cfg, &ks).unwrap();
    let table = mode_table(&ks);
    let e = |i: usize| {
        let mut x = vec![0.0; 8];
        x[i] = 1.0;
        x
    };
    for (i, j, l) in [(0, 2, 4), (0, 2, 5), (1, 3, 4), (2, 6, 0), (4, 1, 3)] {
        let b = eval_b(
            &form,
            &SpectralVector::new(e(i)).unwrap(),
            &SpectralVector::new(e(j)).unwrap(),
            &SpectralVector::new(e(l)).unwrap(),
        )
        .unwrap();
        assert!((b - real_space_b(&table, &e(i), &e(j), &e(l))).abs() < 1e-12, "({i},{j},{l})");
    }
}
