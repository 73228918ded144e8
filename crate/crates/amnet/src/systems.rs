//! Example systems: a stable 2×2 linear map with a published max-affine
//! Lyapunov function, a saturated closed loop with a contractive polyhedron,
//! and a double integrator with nonconvex control bounds.

use num_traits::{One, Zero};

use crate::library;
use crate::lyapunov::{saturated_feedback, LyapError, MaxAffineFn, Polyhedron};
use crate::network::{Network, NetworkBuilder, NetworkError};
use crate::rational::{parse_rational, Matrix, Rational};

fn q(s: &str) -> Rational {
    parse_rational(s).expect("literal")
}

fn matrix(rows: &[&[&str]]) -> Matrix {
    Matrix::from_rows(rows.iter().map(|r| r.iter().map(|s| q(s)).collect()).collect()).expect("rectangular")
}

/// `x ↦ Ax`.
pub fn linear_map(a: &Matrix) -> Result<Network, NetworkError> {
    let mut b = NetworkBuilder::new(a.cols());
    let x = b.input();
    let y = b.affine(a.clone(), vec![Rational::zero(); a.rows()], x)?;
    b.finish(y)
}

/// Schur stable, spectral radius 0.75.
pub fn schur_matrix() -> Matrix {
    matrix(&[&["0.7005", "-0.2638"], &["-0.2278", "-0.4627"]])
}

/// Six-piece certificate for [`schur_matrix`] on `‖x‖∞ ≤ 10`.
pub fn published_lyapunov() -> MaxAffineFn {
    let pieces = [
        ["0", "1"],
        ["-0.1612", "-0.1020"],
        ["0.4614", "0.0155"],
        ["-0.4212", "0.1433"],
        ["-0.5156", "0.0796"],
        ["0.5036", "-0.1632"],
    ];
    MaxAffineFn::new(pieces.iter().map(|p| (p.iter().map(|s| q(s)).collect(), Rational::zero())).collect())
        .expect("six pieces")
}

/// The polyhedron `S(G, w)` with 12 faces.
pub fn milani_polyhedron() -> Polyhedron {
    let g = matrix(&[
        &["0.2888", "-1.8350"],
        &["0.9650", "-2.0576"],
        &["1.0008", "1.7891"],
        &["1.5951", "-1.9866"],
        &["2.0707", "-2.0590"],
        &["-1.4970", "-1.5864"],
        &["-0.2888", "1.8350"],
        &["-0.9650", "2.0576"],
        &["-1.0008", "-1.7891"],
        &["-1.5951", "1.9866"],
        &["1.4970", "2.0590"],
        &["-2.0707", "1.5864"],
    ]);
    let half = ["35.4375", "48.2116", "48.1152", "62.5184", "62.3934", "76.2996"];
    let w = half.iter().chain(half.iter()).map(|s| q(s)).collect();
    Polyhedron::new(g, w).expect("positive w")
}

/// Closed-loop data `(A, B, F, u_min, u_max)` for [`milani_polyhedron`].
pub struct ClosedLoop {
    pub a: Matrix,
    pub b: Vec<Rational>,
    pub f: Vec<Rational>,
    pub u_min: Rational,
    pub u_max: Rational,
}

impl ClosedLoop {
    pub fn network(&self) -> Result<Network, LyapError> {
        saturated_feedback(&self.a, &self.b, &self.f, &self.u_min, &self.u_max)
    }
}

/// `A = [[0.8, 0.5], [-0.4, 1.2]]`, `B = (0, 1)`, `F = (0.45, -0.7)`,
/// `|u| ≤ 10`. The polyhedron is 0.95-contractive for this loop and stops
/// being so when `w` is scaled by 1.01.
pub fn milani_loop() -> ClosedLoop {
    ClosedLoop {
        a: matrix(&[&["0.8", "0.5"], &["-0.4", "1.2"]]),
        b: vec![q("0"), q("1")],
        f: vec![q("0.45"), q("-0.7")],
        u_min: q("10"),
        u_max: q("10"),
    }
}

/// Minimum-fuel transfer of a double integrator from rest at 0 to rest at
/// 1 over `N` steps, with `lo ≤ |u(t)| ≤ hi`.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub horizon: usize,
    pub dt: Rational,
    pub lo: Rational,
    pub hi: Rational,
    /// `Σ |u(t)|`.
    pub objective: Network,
    /// Each network must be `≤ 0`.
    pub constraints: Vec<Network>,
    pub bracket: (Rational, Rational),
}

impl ControlProblem {
    /// Final state from rest under `u`.
    pub fn final_state(&self, u: &[Rational]) -> [Rational; 2] {
        let (mut p, mut v) = (Rational::zero(), Rational::zero());
        let half = Rational::new(1.into(), 2.into());
        for ut in u {
            p += &self.dt * &v + &half * &self.dt * &self.dt * ut;
            v += &self.dt * ut;
        }
        [p, v]
    }

    /// Sensitivity of the final position to `u(t)`.
    pub fn position_gain(&self, t: usize) -> Rational {
        let steps_after = Rational::from_integer(((self.horizon - 1 - t) as i64).into());
        &self.dt * &self.dt * (steps_after + Rational::new(1.into(), 2.into()))
    }
}

/// The double integrator with unit mass, `T = 7.5`, `δt = T/N`, and the
/// bounds `0.2/T ≤ |u(t)| ≤ 1/T`; equality constraints appear as two
/// inequalities.
pub fn double_integrator(horizon: usize) -> Result<ControlProblem, NetworkError> {
    if horizon == 0 {
        return Err(NetworkError::Dim("horizon must be positive".into()));
    }
    let total = q("7.5");
    let dt = &total / Rational::from_integer((horizon as i64).into());
    let lo = q("0.2") / &total;
    let hi = Rational::one() / &total;
    let mut p = ControlProblem {
        horizon,
        dt: dt.clone(),
        lo: lo.clone(),
        hi: hi.clone(),
        objective: library::one_norm(horizon)?,
        constraints: Vec::new(),
        bracket: (Rational::zero(), Rational::from_integer((horizon as i64).into()) * &hi),
    };
    let one = Rational::one();
    for t in 0..horizon {
        for (scale, shift) in [(-one.clone(), lo.clone()), (one.clone(), -hi.clone())] {
            let mut b = NetworkBuilder::new(horizon);
            let x = b.input();
            let s = b.select(x, t)?;
            let a = b.embed(&library::abs(), s)?;
            let out = b.scale_shift(a, scale, shift)?;
            p.constraints.push(b.finish(out)?);
        }
    }
    let position: Vec<Rational> = (0..horizon).map(|t| p.position_gain(t)).collect();
    let velocity = vec![dt; horizon];
    for (row, target) in [(position, one.clone()), (velocity, Rational::zero())] {
        for sign in [one.clone(), -one.clone()] {
            let w: Vec<Rational> = row.iter().map(|c| c * &sign).collect();
            let mut b = NetworkBuilder::new(horizon);
            let x = b.input();
            let out = b.affine(Matrix::row(w), vec![-&target * &sign], x)?;
            p.constraints.push(b.finish(out)?);
        }
    }
    Ok(p)
}
