//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbc_core::ik::QpProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quadratic(h: &DMatrix<f64>, g: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let mut v = 0.0;
    for i in 0..x.len() {
        v += g[i] * x[i];
        for j in 0..x.len() {
            v += 0.5 * x[i] * h[(i, j)] * x[j];
        }
    }
    v
}

/// Exhaustive active-set enumeration: solves the equality-constrained KKT
/// system for every subset of inequalities and returns the feasible
/// candidate with the lowest objective. Exponential, so only for tiny
/// problems. `None` when no subset yields a feasible point.
pub fn enumerate_qp(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.g.len();
    let m = p.h_ineq.len();
    let me = p.b_eq.len();
    assert!(m <= 16, "too many inequalities for enumeration");
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let k = me + active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        for i in 0..n {
            rhs[i] = -p.g[i];
        }
        let rows: Vec<(DVector<f64>, f64)> = (0..me)
            .map(|r| (p.a_eq.row(r).transpose(), p.b_eq[r]))
            .chain(active.iter().map(|&r| (p.g_ineq.row(r).transpose(), p.h_ineq[r])))
            .collect();
        for (r, (a, b)) in rows.iter().enumerate() {
            for c in 0..n {
                kkt[(n + r, c)] = a[c];
                kkt[(c, n + r)] = a[c];
            }
            rhs[n + r] = *b;
        }
        let Some(sol) = kkt.clone().full_piv_lu().solve(&rhs) else { continue };
        if (&kkt * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let feasible = (0..m).all(|r| p.g_ineq.row(r).transpose().dot(&x) <= p.h_ineq[r] + 1e-9)
            && (0..me).all(|r| (p.a_eq.row(r).transpose().dot(&x) - p.b_eq[r]).abs() <= 1e-9);
        if !feasible {
            continue;
        }
        let f = quadratic(&p.h, &p.g, &x);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    best
}

/// A random strictly convex QP with `n ≤ 4` variables that is feasible by
/// construction (constraints are built around a random interior point).
pub fn random_tiny_qp(rng: &mut impl Rng) -> QpProblem {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=6);
    let me = if n > 1 { rng.gen_range(0..=1) } else { 0 };
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let gi = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let hi = DVector::from_fn(m, |r, _| gi.row(r).transpose().dot(&x0) + rng.gen_range(0.0..0.5));
    let ae = DMatrix::from_fn(me, n, |_, _| rng.gen_range(-1.0..1.0));
    let be = &ae * &x0;
    QpProblem::new(h, g).with_inequalities(gi, hi).with_equalities(ae, be)
}

/// Parsed trajectory CSV: header names and numeric rows.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn parse(text: &str) -> Csv {
        let mut lines = text.lines();
        let header = lines.next().expect("header").split(',').map(str::to_owned).collect();
        let rows = lines.map(|l| l.split(',').map(|v| v.parse().expect("number")).collect()).collect();
        Csv { header, rows }
    }

    pub fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }
}
