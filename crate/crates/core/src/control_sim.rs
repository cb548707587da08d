//! Uncontrolled, perturbed and partially controlled trajectories, and
//! escape certificates for points outside the safe set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::interval_set::{IntervalSet, SetError};
use crate::map_model::{MapError, PiecewiseLinearMap};
use crate::safeset::ControlParams;
use crate::scalar::Scalar;

/// Distance from `S` within which a state counts as inside.
pub const INSIDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError<T: Scalar = f64> {
    #[error("state {x} left the map domain at step {step}")]
    DomainExit {
        step: usize,
        x: f64,
        partial: Box<TrajectoryRecord<T>>,
    },
    #[error("initial state {0} is not in the safe set")]
    StartOutsideSafeSet(f64),
    #[error("initial state {0} is already in the safe set")]
    StartInsideSafeSet(f64),
    #[error("safety invariant breached at step {step}: state {x} is {distance:e} from the safe set")]
    SafetyBreach { step: usize, x: f64, distance: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord<T = f64> {
    /// `x₀ … x_N`.
    pub states: Vec<T>,
    /// `ξ₀ … ξ_{N−1}`.
    pub disturbances: Vec<T>,
    /// `u₀ … u_{N−1}`.
    pub controls: Vec<T>,
    /// `xₙ < crash_threshold` for each state.
    pub crash_flags: Vec<bool>,
    pub crash_threshold: T,
    pub mean_state: T,
}

impl<T: Scalar> TrajectoryRecord<T> {
    fn start(x0: T, crash_threshold: T) -> Self {
        Self {
            states: vec![x0],
            disturbances: Vec::new(),
            controls: Vec::new(),
            crash_flags: vec![x0 < crash_threshold],
            crash_threshold,
            mean_state: x0,
        }
    }

    fn push(&mut self, xi: T, u: T, x: T) {
        self.disturbances.push(xi);
        self.controls.push(u);
        self.states.push(x);
        self.crash_flags.push(x < self.crash_threshold);
    }

    fn finish(mut self) -> Self {
        let n = T::lit(self.states.len() as f64);
        self.mean_state = self.states.iter().copied().sum::<T>() / n;
        self
    }

    pub fn crashes(&self) -> usize {
        self.crash_flags.iter().filter(|&&c| c).count()
    }

    pub fn min_state(&self) -> T {
        self.states.iter().copied().fold(T::infinity(), T::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceStrategy<T = f64> {
    /// `ξ` uniform on `[−β, β]`.
    UniformRandom(u64),
    /// `ξ = ±β` with a random sign.
    ExtremalRandom(u64),
    /// `ξ = ±β`, whichever makes `x_{n+1} + f(x_{n+1})` smaller under zero
    /// control, among choices that keep both values in the domain.
    AdversarialGreedy,
    /// Fixed values, repeated cyclically and clamped to `[−β, β]`.
    Scripted(Vec<T>),
}

struct Disturber<'a, T> {
    strategy: &'a DisturbanceStrategy<T>,
    rng: Option<ChaCha8Rng>,
    step: usize,
}

impl<'a, T: Scalar> Disturber<'a, T> {
    fn new(strategy: &'a DisturbanceStrategy<T>) -> Self {
        let rng = match strategy {
            DisturbanceStrategy::UniformRandom(seed) | DisturbanceStrategy::ExtremalRandom(seed) => {
                Some(ChaCha8Rng::seed_from_u64(*seed))
            }
            _ => None,
        };
        Self {
            strategy,
            rng,
            step: 0,
        }
    }

    fn next(&mut self, f: &PiecewiseLinearMap<T>, fx: T, beta: T) -> T {
        let k = self.step;
        self.step += 1;
        if beta == T::zero() {
            return T::zero();
        }
        match self.strategy {
            DisturbanceStrategy::UniformRandom(_) => {
                let r: f64 = self.rng.as_mut().expect("seeded").random_range(-1.0..=1.0);
                beta * T::lit(r)
            }
            DisturbanceStrategy::ExtremalRandom(_) => {
                if self.rng.as_mut().expect("seeded").random_bool(0.5) {
                    beta
                } else {
                    -beta
                }
            }
            DisturbanceStrategy::AdversarialGreedy => adversarial_choice(f, fx, beta),
            DisturbanceStrategy::Scripted(script) => {
                if script.is_empty() {
                    T::zero()
                } else {
                    script[k % script.len()].max(-beta).min(beta)
                }
            }
        }
    }
}

fn adversarial_choice<T: Scalar>(f: &PiecewiseLinearMap<T>, fx: T, beta: T) -> T {
    let dom = f.domain();
    let score = |xi: T| -> Option<T> {
        let y = fx + xi;
        if !dom.contains(y) {
            return None;
        }
        let fy = f.eval(y).ok()?;
        Some(y + fy)
    };
    match (score(-beta), score(beta)) {
        (Some(a), Some(b)) => {
            if b < a {
                beta
            } else {
                -beta
            }
        }
        (None, Some(_)) => beta,
        _ => -beta,
    }
}

fn check_start<T: Scalar>(f: &PiecewiseLinearMap<T>, x0: T) -> Result<(), SimError<T>> {
    if !f.domain().contains(x0) {
        return Err(SimError::Invalid(format!("x0 = {x0} is outside the map domain")));
    }
    Ok(())
}

/// `x_{n+1} = f(x_n)`.
pub fn simulate_uncontrolled<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    x0: T,
    n: usize,
    crash_threshold: T,
) -> Result<TrajectoryRecord<T>, SimError<T>> {
    check_start(f, x0)?;
    let mut rec = TrajectoryRecord::start(x0, crash_threshold);
    let mut x = x0;
    for _ in 0..n {
        x = f.eval(x)?;
        rec.push(T::zero(), T::zero(), x);
    }
    Ok(rec.finish())
}

/// `x_{n+1} = f(x_n) + ξ_n`. Leaving the map domain returns the record up
/// to the last valid state.
pub fn simulate_perturbed<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    x0: T,
    n: usize,
    beta: T,
    strategy: &DisturbanceStrategy<T>,
    crash_threshold: T,
) -> Result<TrajectoryRecord<T>, SimError<T>> {
    check_start(f, x0)?;
    if beta < T::zero() {
        return Err(SimError::Invalid("beta must be nonnegative".into()));
    }
    let dom = f.domain();
    let mut dist = Disturber::new(strategy);
    let mut rec = TrajectoryRecord::start(x0, crash_threshold);
    let mut x = x0;
    for step in 0..n {
        let fx = f.eval(x)?;
        let xi = dist.next(f, fx, beta);
        let y = fx + xi;
        if !dom.contains(y) {
            return Err(SimError::DomainExit {
                step: step + 1,
                x: y.as_f64(),
                partial: Box::new(rec.finish()),
            });
        }
        x = y;
        rec.push(xi, T::zero(), x);
    }
    Ok(rec.finish())
}

/// Smallest correction moving the observed `y` toward `S`, clipped to
/// `±u_bound`.
pub fn control_law<T: Scalar>(s: &IntervalSet<T>, u_bound: T, y: T) -> Result<T, SetError> {
    let target = s.nearest_point(y)?;
    Ok((target - y).max(-u_bound).min(u_bound))
}

/// `x_{n+1} = f(x_n) + ξ_n + u_n` with `u_n` from [`control_law`]. Every
/// state must stay in `S`; a violation is reported as a breach.
pub fn simulate_controlled<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    x0: T,
    n: usize,
    p: &ControlParams<T>,
    s: &IntervalSet<T>,
    strategy: &DisturbanceStrategy<T>,
) -> Result<TrajectoryRecord<T>, SimError<T>> {
    check_start(f, x0)?;
    let inside = T::lit(INSIDE_TOL);
    if s.is_empty() {
        return Err(SetError::Empty.into());
    }
    if s.point_distance(x0) > inside {
        return Err(SimError::StartOutsideSafeSet(x0.as_f64()));
    }
    let mut dist = Disturber::new(strategy);
    let mut rec = TrajectoryRecord::start(x0, p.target.lo());
    let mut x = x0;
    for step in 0..n {
        let fx = f.eval(x.max(f.domain().lo()).min(f.domain().hi()))?;
        let xi = dist.next(f, fx, p.beta);
        let y = fx + xi;
        let u = control_law(s, p.u_bound, y)?;
        x = y + u;
        let d = s.point_distance(x);
        if d > inside {
            return Err(SimError::SafetyBreach {
                step: step + 1,
                x: x.as_f64(),
                distance: d.as_f64(),
            });
        }
        rec.push(xi, u, x);
    }
    Ok(rec.finish())
}

/// What the adversary does from a set of possible states.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "play", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Play<T = f64> {
    /// No state remains in `Q`.
    Escaped,
    /// Apply `xi` to every state of the region.
    Disturb { xi: T, next: Box<EscapeNode<T>> },
    /// Treat each part of the region separately.
    Split { parts: Vec<EscapeNode<T>> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct EscapeNode<T = f64> {
    /// States the controller may have reached.
    pub region: IntervalSet<T>,
    pub play: Play<T>,
}

/// A disturbance strategy after which every admissible control sequence
/// leaves `Q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct EscapeCertificate<T = f64> {
    pub x0: T,
    pub depth: usize,
    pub nodes: usize,
    pub root: EscapeNode<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeOptions<T = f64> {
    pub max_depth: usize,
    pub max_nodes: usize,
    /// Regions narrower than this are not split further.
    pub min_width: T,
}

impl<T: Scalar> Default for EscapeOptions<T> {
    fn default() -> Self {
        Self {
            max_depth: 12,
            max_nodes: 100_000,
            min_width: T::lit(1e-6),
        }
    }
}

/// `(f(R) + ξ + [−U, U]) ∩ Q`: everything a controller can reach from `R`
/// while staying in `Q`.
fn reach<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    region: &IntervalSet<T>,
    xi: T,
) -> Result<IntervalSet<T>, SimError<T>> {
    Ok(f.image_of(region)?
        .translate(xi)
        .dilate(p.u_bound)?
        .intersect(&p.target_set()))
}

impl<T: Scalar> EscapeCertificate<T> {
    /// Re-propagates every node and checks that the recorded regions cover
    /// the true reachable sets and that every leaf is empty.
    pub fn verify(&self, f: &PiecewiseLinearMap<T>, p: &ControlParams<T>) -> bool {
        fn check<T: Scalar>(
            n: &EscapeNode<T>,
            f: &PiecewiseLinearMap<T>,
            p: &ControlParams<T>,
            depth: usize,
        ) -> bool {
            match &n.play {
                Play::Escaped => n.region.is_empty(),
                Play::Disturb { xi, next } => {
                    depth > 0
                        && xi.abs() <= p.beta
                        && reach(f, p, &n.region, *xi)
                            .map(|r| r.is_subset_of(&next.region, T::zero()))
                            .unwrap_or(false)
                        && check(next, f, p, depth - 1)
                }
                Play::Split { parts } => {
                    let union = parts
                        .iter()
                        .fold(IntervalSet::empty(), |acc, c| acc.union(&c.region));
                    n.region.is_subset_of(&union, T::zero())
                        && parts.iter().all(|c| check(c, f, p, depth))
                }
            }
        }
        self.root.region.contains(self.x0) && check(&self.root, f, p, self.depth)
    }
}

struct Search<'a, T> {
    f: &'a PiecewiseLinearMap<T>,
    p: &'a ControlParams<T>,
    s: &'a IntervalSet<T>,
    opts: EscapeOptions<T>,
    nodes: usize,
}

impl<T: Scalar> Search<'_, T> {
    fn candidates(&self, region: &IntervalSet<T>) -> Vec<T> {
        let b = self.p.beta;
        let half = b / T::two();
        let mut xs = vec![-b, b, -half, half, T::zero()];
        let mid = region.hull().map(|h| h.midpoint());
        if let Some(m) = mid.and_then(|m| self.f.eval(m).ok()) {
            let key = |xi: &T| -self.s.point_distance(m + *xi);
            xs.sort_by(|a, c| key(a).partial_cmp(&key(c)).unwrap_or(std::cmp::Ordering::Equal));
        }
        xs
    }

    fn solve(&mut self, region: IntervalSet<T>, depth: usize) -> Option<EscapeNode<T>> {
        self.nodes += 1;
        if self.nodes > self.opts.max_nodes {
            return None;
        }
        if region.is_empty() {
            return Some(EscapeNode {
                region,
                play: Play::Escaped,
            });
        }
        if depth == 0 || region.intersect(self.s).num_components() > 0 {
            return None;
        }
        for xi in self.candidates(&region) {
            let next = reach(self.f, self.p, &region, xi).ok()?;
            if next.intersect(self.s).num_components() > 0 {
                continue;
            }
            if let Some(child) = self.solve(next, depth - 1) {
                return Some(EscapeNode {
                    region,
                    play: Play::Disturb {
                        xi,
                        next: Box::new(child),
                    },
                });
            }
        }
        let parts: Vec<IntervalSet<T>> = if region.num_components() > 1 {
            region
                .components()
                .iter()
                .map(|c| IntervalSet::from_interval(*c))
                .collect()
        } else {
            let h = region.hull()?;
            if h.width() <= self.opts.min_width {
                return None;
            }
            let m = h.midpoint();
            vec![
                IntervalSet::single(h.lo(), m).ok()?,
                IntervalSet::single(m, h.hi()).ok()?,
            ]
        };
        let mut solved = Vec::with_capacity(parts.len());
        for part in parts {
            solved.push(self.solve(part, depth)?);
        }
        Some(EscapeNode {
            region,
            play: Play::Split { parts: solved },
        })
    }
}

/// Searches for disturbances that drive `x0 ∉ S` out of `Q` whatever the
/// controller does. `Ok(None)` means no certificate was found within the
/// limits, which proves nothing.
pub fn adversarial_escape<T: Scalar>(
    f: &PiecewiseLinearMap<T>,
    p: &ControlParams<T>,
    s: &IntervalSet<T>,
    x0: T,
    opts: &EscapeOptions<T>,
) -> Result<Option<EscapeCertificate<T>>, SimError<T>> {
    if !p.target.contains(x0) {
        return Err(SimError::Invalid(format!("x0 = {x0} is outside the target")));
    }
    if s.contains(x0) {
        return Err(SimError::StartInsideSafeSet(x0.as_f64()));
    }
    let mut search = Search {
        f,
        p,
        s,
        opts: *opts,
        nodes: 0,
    };
    let start = IntervalSet::single(x0, x0)?;
    let Some(root) = search.solve(start, opts.max_depth) else {
        return Ok(None);
    };
    let cert = EscapeCertificate {
        x0,
        depth: opts.max_depth,
        nodes: search.nodes,
        root,
    };
    Ok(cert.verify(f, p).then_some(cert))
}
