//! Equations pinning the boundary points of a maximal safe set.
//!
//! Write the components of `S` as `[a₁,b₁], …, [a_m,b_m]` and list the
//! endpoints as `X = (a₁, b₁, a₂, …, b_m)`. Each endpoint `xᵢ` satisfies
//! one of two equations:
//!
//! * touching: `f(xᵢ) + s·β = x_σ(i) + s·U`, where `s = ±1` is the side on
//!   which the image of the component leaves `S` when the endpoint moves
//!   outward, and `x_σ(i)` is the endpoint of `S` whose `U`-ball forms
//!   that side of the covering component of `S + U`;
//! * fixed: `xᵢ` is an endpoint of `Q`.
//!
//! Endpoints that are the target `σ(i)` of some touching equation and not
//! fixed are the active variables. The remaining touching endpoints are
//! determined by the active ones.

use serde::Serialize;
use thiserror::Error;

use super::lemma::{laplace_det, predicted_factors, Factor};
use super::linalg;
use crate::interval_set::{IntervalSet, SetError};
use crate::map_model::{MapError, PiecewiseLinearMap};
use crate::safeset::ControlParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("safe set is empty")]
    Empty,
    #[error("boundary point {label} = {x} is neither touching nor on the target boundary")]
    Unclassified { label: String, x: f64 },
    #[error("boundary Jacobian is singular")]
    Singular,
    #[error("Newton iteration did not converge")]
    NoConvergence,
    #[error("active boundary point {label} = {x} sits at a kink of the map")]
    AtKink { label: String, x: f64 },
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Equation<T> {
    Touching { target: usize, side: i8 },
    Fixed { value: T },
}

/// Label of endpoint `i`: `a1, b1, a2, …`.
pub fn label(i: usize) -> String {
    format!("{}{}", if i.is_multiple_of(2) { 'a' } else { 'b' }, i / 2 + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySystem<T = f64> {
    points: Vec<T>,
    beta: T,
    equations: Vec<Equation<T>>,
    pieces: Vec<usize>,
    slopes: Vec<T>,
    active: Vec<usize>,
    dependent: Vec<usize>,
}

/// Piece of `f` on which `S` lies next to `x`, looking in direction `inward`.
fn piece_toward<T: Scalar>(f: &PiecewiseLinearMap<T>, x: T, inward: i8) -> usize {
    if inward > 0 {
        let k = f.breakpoints().partition_point(|&b| b <= x);
        k.saturating_sub(1).min(f.num_pieces() - 1)
    } else {
        f.piece_of(x)
    }
}

fn signed<T: Scalar>(s: i8) -> T {
    if s > 0 {
        T::one()
    } else {
        -T::one()
    }
}

impl<T: Scalar> BoundarySystem<T> {
    /// Classifies every endpoint of `s` with matching tolerance `tol`.
    pub fn build(
        f: &PiecewiseLinearMap<T>,
        s: &IntervalSet<T>,
        p: &ControlParams<T>,
        tol: T,
    ) -> Result<Self, BoundaryError> {
        let comps = s.components();
        if comps.is_empty() {
            return Err(BoundaryError::Empty);
        }
        let cover = s.dilate(p.u_bound)?;
        let points: Vec<T> = comps.iter().flat_map(|c| [c.lo(), c.hi()]).collect();
        let n = points.len();
        let mut equations = Vec::with_capacity(n);
        let mut pieces = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for (i, &x) in points.iter().enumerate() {
            let right = i % 2 == 1;
            let outward: i8 = if right { 1 } else { -1 };
            let piece = piece_toward(f, x, -outward);
            let slope = f.slope(piece);
            pieces.push(piece);
            slopes.push(slope);

            let touching = if slope == T::zero() {
                None
            } else {
                let side = if slope > T::zero() { outward } else { -outward };
                let sd = signed::<T>(side);
                let y = f.eval_on_piece(piece, x) + sd * p.beta;
                let nearest = cover
                    .components()
                    .iter()
                    .min_by(|a, b| {
                        a.distance_to(y)
                            .partial_cmp(&b.distance_to(y))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("cover of nonempty set");
                let edge = if side > 0 { nearest.hi() } else { nearest.lo() };
                ((y - edge).abs() <= tol).then(|| {
                    let end = edge - sd * p.u_bound;
                    let k = (0..comps.len())
                        .min_by(|&a, &b| {
                            let ea = if side > 0 { comps[a].hi() } else { comps[a].lo() };
                            let eb = if side > 0 { comps[b].hi() } else { comps[b].lo() };
                            (ea - end)
                                .abs()
                                .partial_cmp(&(eb - end).abs())
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .expect("nonempty");
                    Equation::Touching {
                        target: 2 * k + usize::from(side > 0),
                        side,
                    }
                })
            };
            let q_end = if right { p.target.hi() } else { p.target.lo() };
            let eq = match touching {
                Some(eq) => eq,
                None if (x - q_end).abs() <= tol => Equation::Fixed { value: q_end },
                None => {
                    return Err(BoundaryError::Unclassified {
                        label: label(i),
                        x: x.as_f64(),
                    })
                }
            };
            equations.push(eq);
        }

        let mut is_target = vec![false; n];
        for eq in &equations {
            if let Equation::Touching { target, .. } = eq {
                is_target[*target] = true;
            }
        }
        let touching = |i: usize| matches!(equations[i], Equation::Touching { .. });
        let active = (0..n).filter(|&i| is_target[i] && touching(i)).collect();
        let dependent = (0..n).filter(|&i| !is_target[i] && touching(i)).collect();
        Ok(Self {
            points,
            beta: p.beta,
            equations,
            pieces,
            slopes,
            active,
            dependent,
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn equations(&self) -> &[Equation<T>] {
        &self.equations
    }

    /// Slopes of the map at each endpoint (on the piece adjoining `S`).
    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn dependent(&self) -> &[usize] {
        &self.dependent
    }

    pub fn active_labels(&self) -> Vec<String> {
        self.active.iter().map(|&i| label(i)).collect()
    }

    pub fn dependent_labels(&self) -> Vec<String> {
        self.dependent.iter().map(|&i| label(i)).collect()
    }

    /// Whether two systems use the same equations (ignoring positions).
    pub fn same_structure(&self, other: &Self) -> bool {
        self.equations == other.equations && self.pieces == other.pieces
    }

    /// `F(X)` at control bound `u`.
    pub fn residuals(&self, f: &PiecewiseLinearMap<T>, u: T, x: &[T]) -> Vec<T> {
        self.equations
            .iter()
            .enumerate()
            .map(|(i, eq)| match *eq {
                Equation::Touching { target, side } => {
                    let sd = signed::<T>(side);
                    f.eval_on_piece(self.pieces[i], x[i]) + sd * self.beta
                        - x[target]
                        - sd * u
                }
                Equation::Fixed { value } => x[i] - value,
            })
            .collect()
    }

    /// `∂F/∂X`.
    pub fn jacobian(&self) -> linalg::Matrix<T> {
        let n = self.points.len();
        let mut a = vec![vec![T::zero(); n]; n];
        for (i, eq) in self.equations.iter().enumerate() {
            match *eq {
                Equation::Touching { target, .. } => {
                    a[i][i] = self.slopes[i];
                    a[i][target] = a[i][target] - T::one();
                }
                Equation::Fixed { .. } => a[i][i] = T::one(),
            }
        }
        a
    }

    /// Newton iteration for `F(X) = 0` at control bound `u`. Each equation
    /// stays on the piece it was classified on, so for piecewise-linear
    /// maps the first step is already exact.
    pub fn solve(
        &self,
        f: &PiecewiseLinearMap<T>,
        u: T,
        initial: &[T],
    ) -> Result<Vec<T>, BoundaryError> {
        let jac = self.jacobian();
        let mut x = initial.to_vec();
        let scale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
        for _ in 0..50 {
            let r = self.residuals(f, u, &x);
            let dx = linalg::solve(jac.clone(), r).ok_or(BoundaryError::Singular)?;
            let step = dx.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi = *xi - *d;
            }
            if !step.is_finite() {
                return Err(BoundaryError::NoConvergence);
            }
            if step <= T::epsilon() * scale * T::lit(16.0) {
                return Ok(x);
            }
        }
        let r = self.residuals(f, u, &x);
        let worst = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if worst <= T::epsilon() * scale * T::lit(64.0) {
            Ok(x)
        } else {
            Err(BoundaryError::NoConvergence)
        }
    }

    /// `dX/dU` from the full linear system.
    pub fn derivative(&self) -> Result<Vec<T>, BoundaryError> {
        let rhs = self
            .equations
            .iter()
            .map(|eq| match *eq {
                Equation::Touching { side, .. } => signed(side),
                Equation::Fixed { .. } => T::zero(),
            })
            .collect();
        linalg::solve(self.jacobian(), rhs).ok_or(BoundaryError::Singular)
    }

    /// The reduced matrix `J − M` on the active variables, as its diagonal
    /// and successor map.
    pub fn reduced(&self) -> (Vec<T>, Vec<Option<usize>>) {
        let pos = |j: usize| self.active.iter().position(|&a| a == j);
        let d = self.active.iter().map(|&i| self.slopes[i]).collect();
        let sigma = self
            .active
            .iter()
            .map(|&i| match self.equations[i] {
                Equation::Touching { target, .. } => pos(target),
                Equation::Fixed { .. } => None,
            })
            .collect();
        (d, sigma)
    }

    /// `d(active)/dU` from the reduced system alone.
    pub fn active_derivative(&self) -> Result<Vec<T>, BoundaryError> {
        let (d, sigma) = self.reduced();
        let a = super::lemma::d_minus_m(&d, &sigma);
        let rhs = self
            .active
            .iter()
            .map(|&i| match self.equations[i] {
                Equation::Touching { side, .. } => signed(side),
                Equation::Fixed { .. } => T::zero(),
            })
            .collect();
        linalg::solve(a, rhs).ok_or(BoundaryError::Singular)
    }

    /// Endpoints back to a set.
    pub fn to_set(&self, x: &[T]) -> Result<IntervalSet<T>, SetError> {
        let pairs: Vec<(T, T)> = x.chunks(2).map(|c| (c[0], c[1])).collect();
        IntervalSet::from_pairs(&pairs)
    }
}

/// Determinant of the reduced Jacobian with its predicted factor structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianReport {
    pub active: Vec<String>,
    pub dependent: Vec<String>,
    pub slopes: Vec<f64>,
    /// `det(J − M)` on the active variables, by elimination.
    pub det: f64,
    /// Same determinant by cofactor expansion.
    pub det_expansion: f64,
    pub factors: Vec<Factor>,
    pub factor_labels: Vec<String>,
    pub factor_product: f64,
    /// Determinant of the full system over all endpoints.
    pub det_full: f64,
    pub nonsingular: bool,
}

pub fn jacobian_nonsingular<T: Scalar>(
    sys: &BoundarySystem<T>,
    f: &PiecewiseLinearMap<T>,
) -> Result<JacobianReport, BoundaryError> {
    for &i in sys.active() {
        if f.is_kink(sys.points()[i], T::merge_eps()) {
            return Err(BoundaryError::AtKink {
                label: label(i),
                x: sys.points()[i].as_f64(),
            });
        }
    }
    let (d, sigma) = sys.reduced();
    let d64: Vec<f64> = d.iter().map(|v| v.as_f64()).collect();
    let a = super::lemma::d_minus_m(&d64, &sigma);
    let det = linalg::det(a.clone());
    let det_expansion = laplace_det(&a);
    let factors = predicted_factors(&sigma);
    let names = sys.active_labels();
    let factor_labels = factors
        .iter()
        .map(|fac| match fac {
            Factor::Column { index } => format!("f'({})", names[*index]),
            Factor::Cycle { members } => {
                let prod: Vec<String> = members
                    .iter()
                    .map(|&m| format!("f'({})", names[m]))
                    .collect();
                format!("[{} - 1]", prod.join(""))
            }
        })
        .collect();
    let factor_product = factors.iter().fold(1.0, |p, fac| p * fac.value(&d64));
    let full: linalg::Matrix<f64> = sys
        .jacobian()
        .iter()
        .map(|row| row.iter().map(|v| v.as_f64()).collect())
        .collect();
    let det_full = linalg::det(full);
    Ok(JacobianReport {
        active: names,
        dependent: sys.dependent_labels(),
        slopes: d64,
        det,
        det_expansion,
        factors,
        factor_labels,
        factor_product,
        det_full,
        nonsingular: det != 0.0 && det.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safeset::{maximal_safe_set, SolverOptions};

    fn fig5() -> (PiecewiseLinearMap, ControlParams, BoundarySystem) {
        let f = PiecewiseLinearMap::asymmetric_tent();
        let p = ControlParams::new(0.04, 0.05, 0.5, 1.0).unwrap();
        let s = maximal_safe_set(&f, &p, &SolverOptions::default())
            .unwrap()
            .safe_set;
        let sys = BoundarySystem::build(&f, &s, &p, 1e-9).unwrap();
        (f, p, sys)
    }

    #[test]
    fn fig5_pairing() {
        let (_, _, sys) = fig5();
        assert_eq!(sys.active_labels(), ["a1", "b1", "a2", "b3"]);
        assert_eq!(sys.dependent_labels(), ["b2", "a3"]);
        let eq = sys.equations();
        assert_eq!(eq[0], Equation::Touching { target: 2, side: -1 });
        assert_eq!(eq[1], Equation::Touching { target: 5, side: 1 });
        assert_eq!(eq[2], Equation::Touching { target: 5, side: 1 });
        assert_eq!(eq[3], Equation::Touching { target: 2, side: -1 });
        assert_eq!(eq[4], Equation::Touching { target: 1, side: 1 });
        assert_eq!(eq[5], Equation::Touching { target: 0, side: -1 });
    }

    #[test]
    fn fig5_determinant_factors() {
        let (f, _, sys) = fig5();
        let r = jacobian_nonsingular(&sys, &f).unwrap();
        assert!((r.det - 1.3 * (1.3 * 9.0 - 1.0)).abs() < 1e-12);
        assert!((r.det - r.det_expansion).abs() < 1e-12);
        assert!((r.det - r.factor_product).abs() < 1e-12);
        assert_eq!(r.factor_labels, ["f'(b1)", "[f'(a1)f'(a2)f'(b3) - 1]"]);
        // dependents b2 (slope -3) and a3 (slope -3) multiply in
        assert!((r.det_full - r.det * 9.0).abs() < 1e-9);
    }

    #[test]
    fn solve_is_exact_and_derivatives_agree() {
        let (f, p, sys) = fig5();
        let x = sys.solve(&f, p.u_bound, sys.points()).unwrap();
        let r = sys.residuals(&f, p.u_bound, &x);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
        let full = sys.derivative().unwrap();
        let red = sys.active_derivative().unwrap();
        for (k, &i) in sys.active().iter().enumerate() {
            assert!((full[i] - red[k]).abs() < 1e-12);
        }
        let h = 1e-6;
        let up = sys.solve(&f, p.u_bound + h, &x).unwrap();
        for i in 0..x.len() {
            assert!(((up[i] - x[i]) / h - full[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn whole_target_is_fixed() {
        // f maps [0,1] onto [0.2,0.8]: Q = [0,1] is safe with no touching
        let f = PiecewiseLinearMap::new(vec![0.0, 1.0], vec![0.2, 0.8]).unwrap();
        let p = ControlParams::new(0.01, 0.02, 0.0, 1.0).unwrap();
        let s = p.target_set();
        let sys = BoundarySystem::build(&f, &s, &p, 1e-9).unwrap();
        assert!(sys.active().is_empty());
        assert!(sys
            .equations()
            .iter()
            .all(|e| matches!(e, Equation::Fixed { .. })));
    }

    #[test]
    fn unclassified_point_is_an_error() {
        let f = PiecewiseLinearMap::asymmetric_tent();
        let p = ControlParams::new(0.04, 0.05, 0.5, 1.0).unwrap();
        let s = IntervalSet::single(0.6, 0.61).unwrap();
        assert!(matches!(
            BoundarySystem::build(&f, &s, &p, 1e-9),
            Err(BoundaryError::Unclassified { .. })
        ));
    }
}
