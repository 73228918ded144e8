//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use amnet::lp::{LinSystem, RowRel};
use amnet::network::NodeId;
use amnet::rational::{int, ratio, Matrix, Rational};
use amnet::{Network, NetworkBuilder};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k / den` uniform over the grid in `[lo, hi]`.
pub fn grid_rational(rng: &mut impl Rng, lo: i64, hi: i64, den: i64) -> Rational {
    ratio(rng.random_range(lo * den..=hi * den), den)
}

/// Rational with a random denominator up to 16, in `[lo, hi]`.
pub fn rational_in(rng: &mut impl Rng, lo: i64, hi: i64) -> Rational {
    let den = rng.random_range(1..=16);
    grid_rational(rng, lo, hi, den)
}

pub fn point(rng: &mut impl Rng, n: usize, r: i64) -> Vec<Rational> {
    (0..n).map(|_| rational_in(rng, -r, r)).collect()
}

fn affine_from(b: &mut NetworkBuilder, rng: &mut impl Rng, pool: &[NodeId], dim: usize) -> NodeId {
    let k = rng.random_range(1..=pool.len().min(2));
    let mut children = Vec::with_capacity(k);
    while children.len() < k {
        let c = pool[rng.random_range(0..pool.len())];
        if !children.contains(&c) {
            children.push(c);
        }
    }
    let cols: usize = children.iter().map(|&c| b.dim(c)).sum();
    let rows = (0..dim)
        .map(|_| (0..cols).map(|_| grid_rational(rng, -2, 2, 4)).collect())
        .collect();
    let bias = (0..dim).map(|_| grid_rational(rng, -2, 2, 4)).collect();
    b.affine_stacked(Matrix::from_rows(rows).unwrap(), bias, &children).unwrap()
}

/// A well-defined network with input and output dimension at most
/// `max_dim`, at most `max_mux` muxes and weights on the quarter grid in
/// `[-2, 2]`.
pub fn random_network(rng: &mut impl Rng, max_mux: usize, max_dim: usize) -> Network {
    let n = rng.random_range(1..=max_dim);
    let mut b = NetworkBuilder::new(n);
    let mut pool = vec![b.input()];
    let muxes = rng.random_range(1..=max_mux.max(1));
    for _ in 0..muxes.min(max_mux) {
        let d = rng.random_range(1..=max_dim);
        let x = affine_from(&mut b, rng, &pool, d);
        let y = if rng.random_bool(0.3) {
            b.constant((0..d).map(|_| grid_rational(rng, -2, 2, 2)).collect()).unwrap()
        } else {
            affine_from(&mut b, rng, &pool, d)
        };
        let z = affine_from(&mut b, rng, &pool, 1);
        let m = b.mux(x, y, z).unwrap();
        pool.push(m);
    }
    let last = *pool.last().unwrap();
    let out_dim = rng.random_range(1..=max_dim);
    let out = if pool.len() > 1 && b.dim(last) <= max_dim && rng.random_bool(0.5) {
        last
    } else {
        let mut p = vec![last];
        p.extend(pool.iter().copied().filter(|&c| c != last).take(1));
        affine_from(&mut b, rng, &p, out_dim)
    };
    b.finish(out).unwrap()
}

/// Exact solution of a square system, `None` when singular.
pub fn solve_square(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = b.len();
    let mut m: Vec<Vec<Rational>> = a.iter().zip(b).map(|(r, v)| {
        let mut r = r.clone();
        r.push(v.clone());
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for k in c..=n {
            m[c][k] = &m[c][k] / &pivot;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                for k in c..=n {
                    let v = &f * &m[c][k];
                    m[r][k] -= v;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}

fn subsets(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return f(cur);
        }
        for i in start..n {
            cur.push(i);
            if go(i + 1, n, k, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Feasibility of `rows` (`a·x rel c`) by grid search followed by vertex
/// enumeration. Strict rows get a shared slack `t ≤ 1` that must come out
/// positive; every coordinate is confined to `[-bound, bound]`, which must
/// exceed the largest vertex coordinate of the system.
pub fn lp_oracle(sys: &LinSystem, bound: i64) -> bool {
    let n = sys.var_count();
    // grid: half steps on [-3, 3] (unit steps in four dimensions)
    let (r, den) = if n >= 4 { (3, 1) } else { (3, 2) };
    let side = (2 * r * den + 1) as usize;
    let total = side.pow(n as u32);
    for k in 0..total {
        let mut idx = k;
        let x: Vec<Rational> = (0..n)
            .map(|_| {
                let v = (idx % side) as i64 - r * den;
                idx /= side;
                ratio(v, den)
            })
            .collect();
        if sys.satisfied_by(&x) {
            return true;
        }
    }
    let strict = sys.rows.iter().any(|r| r.rel == RowRel::Lt);
    let dim = n + usize::from(strict);
    // every constraint as `a·(x, t) ≤ c`, equalities as two rows
    let mut cons: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for row in &sys.rows {
        let mut a = row.coeffs.clone();
        if strict {
            a.push(if row.rel == RowRel::Lt { Rational::one() } else { Rational::zero() });
        }
        if row.rel == RowRel::Eq {
            let mut neg: Vec<Rational> = a.iter().map(|v| -v).collect();
            if strict {
                neg[n] = Rational::zero();
            }
            cons.push((neg, -row.constant.clone()));
        }
        cons.push((a, row.constant.clone()));
    }
    for i in 0..dim {
        let mut e = vec![Rational::zero(); dim];
        e[i] = Rational::one();
        let hi = if strict && i == n { Rational::one() } else { int(bound) };
        cons.push((e.clone(), hi));
        cons.push((e.iter().map(|v| -v).collect(), int(bound)));
    }
    let mut found = false;
    subsets(cons.len(), dim, &mut |s| {
        let a: Vec<Vec<Rational>> = s.iter().map(|&i| cons[i].0.clone()).collect();
        let b: Vec<Rational> = s.iter().map(|&i| cons[i].1.clone()).collect();
        let Some(v) = solve_square(&a, &b) else { return false };
        let ok = cons.iter().all(|(a, c)| amnet::rational::dot(a, &v) <= *c);
        if ok && (!strict || v[n].is_positive()) {
            found = true;
        }
        found
    });
    found
}

/// Minimum of `Σ|u_t|` for the double integrator over all sign patterns.
/// For a fixed pattern `u_t = s_t a_t` with `lo ≤ a_t ≤ hi`, the problem is
/// an LP over a box with two equalities, so its optimum sits at a vertex
/// where all but two magnitudes are at a bound.
pub fn control_oracle(gains: &[Rational], dt: &Rational, lo: &Rational, hi: &Rational) -> Option<(Rational, Vec<Rational>)> {
    let n = gains.len();
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for signs in 0..(1u32 << n) {
        let s: Vec<Rational> = (0..n).map(|t| if signs >> t & 1 == 1 { -Rational::one() } else { Rational::one() }).collect();
        // rows: position and velocity, coefficients on a_t
        let p: Vec<Rational> = (0..n).map(|t| &gains[t] * &s[t]).collect();
        let v: Vec<Rational> = (0..n).map(|t| dt * &s[t]).collect();
        let mut consider = |a: Vec<Rational>| {
            if a.iter().all(|x| lo <= x && x <= hi)
                && amnet::rational::dot(&p, &a) == Rational::one()
                && amnet::rational::dot(&v, &a).is_zero()
            {
                let cost: Rational = a.iter().sum();
                if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    let u = a.iter().zip(&s).map(|(x, sg)| x * sg).collect();
                    best = Some((cost, u));
                }
            }
        };
        for free in 0..=n.min(2) {
            subsets(n, free, &mut |fr| {
                for fixed in 0..(1u32 << n) {
                    let mut a: Vec<Rational> = (0..n).map(|t| if fixed >> t & 1 == 1 { hi.clone() } else { lo.clone() }).collect();
                    if fr.is_empty() {
                        consider(a);
                        continue;
                    }
                    // solve the two equalities for the free magnitudes
                    let rhs_p = Rational::one() - (0..n).filter(|t| !fr.contains(t)).map(|t| &p[t] * &a[t]).sum::<Rational>();
                    let rhs_v = -(0..n).filter(|t| !fr.contains(t)).map(|t| &v[t] * &a[t]).sum::<Rational>();
                    if fr.len() == 1 {
                        let t = fr[0];
                        if !p[t].is_zero() {
                            a[t] = &rhs_p / &p[t];
                            consider(a);
                        }
                    } else {
                        let m = vec![vec![p[fr[0]].clone(), p[fr[1]].clone()], vec![v[fr[0]].clone(), v[fr[1]].clone()]];
                        if let Some(sol) = solve_square(&m, &[rhs_p, rhs_v]) {
                            a[fr[0]] = sol[0].clone();
                            a[fr[1]] = sol[1].clone();
                            consider(a);
                        }
                    }
                }
                false
            });
        }
    }
    best
}

/// `true` when `V(Ax) < V(x)` and `V(x) > 0` at every point of the
/// `k × k` grid on `[-r, r]²` except the origin.
pub fn lyapunov_grid_check(v: &dyn Fn(&[Rational]) -> Rational, step: &dyn Fn(&[Rational]) -> Vec<Rational>, r: i64, k: i64) -> Result<(), Vec<Rational>> {
    for i in 0..k {
        for j in 0..k {
            let x = vec![ratio(2 * r * i, k - 1) - int(r), ratio(2 * r * j, k - 1) - int(r)];
            if x.iter().all(Zero::is_zero) {
                continue;
            }
            let vx = v(&x);
            if !vx.is_positive() || v(&step(&x)) >= vx {
                return Err(x);
            }
        }
    }
    Ok(())
}

pub fn max_abs_f64(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}
