//! Exact fair Bayes-optimal randomized classifiers on finite-support
//! distributions.
//!
//! Everything here is generic over the scalar so the same code runs in
//! `f64` and in exact rational arithmetic.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed};

use crate::disparity::DisparityKind;
use crate::error::{FairError, Result};

/// Ordered field operations needed by the exact solver.
pub trait Scalar: Clone + PartialOrd + Num + Signed + FromPrimitive + Debug {}
impl<T: Clone + PartialOrd + Num + Signed + FromPrimitive + Debug> Scalar for T {}

fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

/// A point mass on `(x, a)`; `x` itself is irrelevant beyond `η`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Atom<T = f64> {
    pub group: u8,
    pub mass: T,
    pub eta: T,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteDistribution<T = f64> {
    atoms: Vec<Atom<T>>,
}

/// Joint cell masses `P(A = a, Y = y)`, indexed `[a][y]`.
pub type CellMasses<T> = [[T; 2]; 2];

impl<T: Scalar> FiniteDistribution<T> {
    /// Requires positive masses summing to one, `η ∈ [0, 1]`, binary groups
    /// and at least one atom per group.
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let mut total = T::zero();
        let mut seen = [false; 2];
        for (i, at) in atoms.iter().enumerate() {
            if at.group > 1 {
                return Err(FairError::Invalid(format!("atom {i} has non-binary group {}", at.group)));
            }
            if !(at.mass > T::zero()) {
                return Err(FairError::Invalid(format!("atom {i} has non-positive mass")));
            }
            if at.eta < T::zero() || at.eta > T::one() {
                return Err(FairError::Invalid(format!("atom {i} has eta outside [0, 1]")));
            }
            seen[at.group as usize] = true;
            total = total + at.mass.clone();
        }
        if let Some(a) = seen.iter().position(|s| !s) {
            return Err(FairError::Invalid(format!("group {a} has no atoms")));
        }
        let slack = T::from_f64(1e-12).unwrap_or_else(T::zero);
        if (total - T::one()).abs() > slack {
            return Err(FairError::Invalid("atom masses must sum to 1".into()));
        }
        Ok(FiniteDistribution { atoms })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn cell_masses(&self) -> CellMasses<T> {
        let z = || T::zero();
        let mut c = [[z(), z()], [z(), z()]];
        for at in &self.atoms {
            let a = at.group as usize;
            c[a][1] = c[a][1].clone() + at.mass.clone() * at.eta.clone();
            c[a][0] = c[a][0].clone() + at.mass.clone() * (T::one() - at.eta.clone());
        }
        c
    }

    /// The distribution obtained by scaling the joint mass of every
    /// `(a, y)` cell by `factor[a][y]` and renormalising.
    pub fn reweighted(&self, factor: &CellMasses<T>) -> Result<Self> {
        let mut joint: Vec<(T, T)> = Vec::with_capacity(self.atoms.len());
        let mut total = T::zero();
        for at in &self.atoms {
            let f = &factor[at.group as usize];
            let m1 = at.mass.clone() * at.eta.clone() * f[1].clone();
            let m0 = at.mass.clone() * (T::one() - at.eta.clone()) * f[0].clone();
            total = total + m1.clone() + m0.clone();
            joint.push((m1, m0));
        }
        if !(total > T::zero()) {
            return Err(FairError::Invalid("reweighting removed all mass".into()));
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (at, (m1, m0)) in self.atoms.iter().zip(joint) {
            let m = m1.clone() + m0;
            if !(m > T::zero()) {
                return Err(FairError::Invalid("reweighting removed an atom".into()));
            }
            atoms.push(Atom { group: at.group, eta: m1 / m.clone(), mass: m / total.clone() });
        }
        Ok(FiniteDistribution { atoms })
    }
}

/// Per-group affine weight coefficients `(slope, offset)` for `kind`.
pub fn weight_coeffs<T: Scalar>(kind: DisparityKind, cells: &CellMasses<T>) -> ([T; 2], [T; 2]) {
    let sign = |a: usize| if a == 1 { T::one() } else { -T::one() };
    let mut slope = [T::zero(), T::zero()];
    let mut offset = [T::zero(), T::zero()];
    for a in 0..2 {
        let p1 = cells[a][1].clone();
        let p0 = cells[a][0].clone();
        match kind {
            DisparityKind::DemographicParity => offset[a] = sign(a) / (p1 + p0),
            DisparityKind::EqualOpportunity => slope[a] = sign(a) / p1,
            DisparityKind::PredictiveEquality => {
                slope[a] = -sign(a) / p0.clone();
                offset[a] = sign(a) / p0;
            }
        }
    }
    (slope, offset)
}

/// Position of an atom relative to the rule `2η − 1 > t·w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Accept,
    Reject,
    /// On the boundary with positive weight.
    BoundaryPlus,
    /// On the boundary with negative weight.
    BoundaryMinus,
    /// `w = 0` and `η = 1/2`: on the boundary for every `t`, no effect on
    /// either disparity or risk.
    BoundaryNull,
}

/// Atoms with their weights and boundary ratios `(2η − 1)/w`.
struct Prepared<T> {
    mass: Vec<T>,
    weight: Vec<T>,
    margin: Vec<T>,
    ratio: Vec<Option<T>>,
}

fn prepare<T: Scalar>(dist: &FiniteDistribution<T>, kind: DisparityKind, cells: &CellMasses<T>) -> Result<Prepared<T>> {
    for (a, row) in cells.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            if !(*v > T::zero()) {
                return Err(FairError::Invalid(format!("cell (a={a}, y={y}) has no mass")));
            }
        }
    }
    let (slope, offset) = weight_coeffs(kind, cells);
    let n = dist.atoms.len();
    let mut p = Prepared { mass: Vec::with_capacity(n), weight: Vec::with_capacity(n), margin: Vec::with_capacity(n), ratio: Vec::with_capacity(n) };
    for at in &dist.atoms {
        let a = at.group as usize;
        let w = slope[a].clone() * at.eta.clone() + offset[a].clone();
        let margin = two::<T>() * at.eta.clone() - T::one();
        let ratio = if w.is_zero() { None } else { Some(margin.clone() / w.clone()) };
        p.mass.push(at.mass.clone());
        p.weight.push(w);
        p.margin.push(margin);
        p.ratio.push(ratio);
    }
    Ok(p)
}

impl<T: Scalar> Prepared<T> {
    fn side(&self, i: usize, t: &T) -> Side {
        match &self.ratio[i] {
            None => match self.margin[i].partial_cmp(&T::zero()) {
                Some(Ordering::Greater) => Side::Accept,
                Some(Ordering::Less) => Side::Reject,
                _ => Side::BoundaryNull,
            },
            Some(q) => {
                let positive = self.weight[i] > T::zero();
                match q.partial_cmp(t) {
                    Some(Ordering::Equal) | None => {
                        if positive {
                            Side::BoundaryPlus
                        } else {
                            Side::BoundaryMinus
                        }
                    }
                    // w > 0 accepts when q > t; w < 0 accepts when q < t.
                    Some(Ordering::Greater) => if positive { Side::Accept } else { Side::Reject },
                    Some(Ordering::Less) => if positive { Side::Reject } else { Side::Accept },
                }
            }
        }
    }

    /// `(D_min, D_0, D_max)` at `t`: boundary atoms of one sign included or not.
    fn levels(&self, t: &T) -> (T, T, T) {
        let (mut d0, mut plus, mut minus) = (T::zero(), T::zero(), T::zero());
        for i in 0..self.mass.len() {
            let mw = self.mass[i].clone() * self.weight[i].clone();
            match self.side(i, t) {
                Side::Accept => d0 = d0 + mw,
                Side::BoundaryPlus => plus = plus + mw,
                Side::BoundaryMinus => minus = minus + mw,
                Side::Reject | Side::BoundaryNull => {}
            }
        }
        (d0.clone() + minus, d0.clone(), d0 + plus)
    }

    fn sorted_ratios(&self) -> Vec<T> {
        let mut r: Vec<T> = self.ratio.iter().flatten().cloned().collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        r.dedup();
        r
    }

    fn classifier(&self, t: &T, tau_plus: &T, tau_minus: &T) -> RandomizedClassifier<T> {
        let accept = (0..self.mass.len())
            .map(|i| match self.side(i, t) {
                Side::Accept => T::one(),
                Side::Reject | Side::BoundaryNull => T::zero(),
                Side::BoundaryPlus => tau_plus.clone(),
                Side::BoundaryMinus => tau_minus.clone(),
            })
            .collect();
        RandomizedClassifier { accept }
    }
}

/// Accept probability per atom, in the distribution's atom order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomizedClassifier<T = f64> {
    pub accept: Vec<T>,
}

/// `Σ m·[(1 − 2η)·f + η]`.
pub fn risk_exact<T: Scalar>(dist: &FiniteDistribution<T>, clf: &RandomizedClassifier<T>) -> T {
    dist.atoms.iter().zip(&clf.accept).fold(T::zero(), |acc, (at, f)| {
        acc + at.mass.clone() * ((T::one() - two::<T>() * at.eta.clone()) * f.clone() + at.eta.clone())
    })
}

/// `Σ m·f·w(η, a)`.
pub fn disparity_exact<T: Scalar>(
    dist: &FiniteDistribution<T>,
    kind: DisparityKind,
    cells: &CellMasses<T>,
    clf: &RandomizedClassifier<T>,
) -> T {
    let (slope, offset) = weight_coeffs(kind, cells);
    dist.atoms.iter().zip(&clf.accept).fold(T::zero(), |acc, (at, f)| {
        let a = at.group as usize;
        acc + at.mass.clone() * f.clone() * (slope[a].clone() * at.eta.clone() + offset[a].clone())
    })
}

/// Cost-sensitive risk `Σ_{a,y} c[a][y]·P(Ŷ ≠ y, Y = y, A = a)`.
pub fn cost_sensitive_risk<T: Scalar>(
    dist: &FiniteDistribution<T>,
    costs: &CellMasses<T>,
    clf: &RandomizedClassifier<T>,
) -> T {
    dist.atoms.iter().zip(&clf.accept).fold(T::zero(), |acc, (at, f)| {
        let c = &costs[at.group as usize];
        let false_neg = c[1].clone() * at.mass.clone() * at.eta.clone() * (T::one() - f.clone());
        let false_pos = c[0].clone() * at.mass.clone() * (T::one() - at.eta.clone()) * f.clone();
        acc + false_neg + false_pos
    })
}

/// `(D_min(t), D_max(t))`: disparity of the threshold rule at `t` with the
/// boundary atoms of negative (resp. positive) weight accepted.
pub fn dmin_dmax<T: Scalar>(
    dist: &FiniteDistribution<T>,
    kind: DisparityKind,
    cells: &CellMasses<T>,
    t: &T,
) -> Result<(T, T)> {
    let (lo, _, hi) = prepare(dist, kind, cells)?.levels(t);
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomizedSolution<T = f64> {
    pub t: T,
    /// Accept probability on boundary atoms of positive / negative weight.
    pub tau_plus: T,
    pub tau_minus: T,
    pub classifier: RandomizedClassifier<T>,
    pub risk: T,
    pub disparity: T,
}

/// The `δ`-fair Bayes-optimal randomized classifier.
///
/// The offset is the smallest-magnitude boundary ratio at which the
/// step curves `D_min`, `D_max` reach the band; boundary atoms are then
/// randomized to land on the band edge (or on `D_0` clipped into the band
/// when `t = 0`).
pub fn solve_randomized<T: Scalar>(
    dist: &FiniteDistribution<T>,
    kind: DisparityKind,
    cells: &CellMasses<T>,
    delta: &T,
) -> Result<RandomizedSolution<T>> {
    if *delta < T::zero() {
        return Err(FairError::Invalid("delta must be non-negative".into()));
    }
    let prep = prepare(dist, kind, cells)?;
    let neg_delta = -delta.clone();
    let zero = T::zero();
    let (dmin0, _, dmax0) = prep.levels(&zero);
    let ratios = prep.sorted_ratios();

    let (t, target) = if dmin0 > *delta {
        // inf{t : D_min(t) ≤ δ}; D_min is right-continuous, so the infimum is
        // the first positive ratio where it holds.
        let t = ratios
            .iter()
            .filter(|q| **q > zero)
            .find(|q| prep.levels(q).0 <= *delta)
            .cloned()
            .ok_or_else(|| FairError::Infeasible("no boundary ratio reaches the band".into()))?;
        (t, delta.clone())
    } else if dmax0 < neg_delta {
        // sup{t : D_max(t) ≥ −δ}; D_max is left-continuous.
        let t = ratios
            .iter()
            .rev()
            .filter(|q| **q < zero)
            .find(|q| prep.levels(q).2 >= neg_delta)
            .cloned()
            .ok_or_else(|| FairError::Infeasible("no boundary ratio reaches the band".into()))?;
        (t, neg_delta.clone())
    } else {
        let (_, d0, _) = prep.levels(&zero);
        let clipped = if d0 > *delta {
            delta.clone()
        } else if d0 < neg_delta {
            neg_delta.clone()
        } else {
            d0
        };
        (zero.clone(), clipped)
    };

    let (dmin, d0, dmax) = prep.levels(&t);
    let mut tau_plus = T::zero();
    let mut tau_minus = T::zero();
    if target < d0 && d0 > dmin {
        tau_minus = (d0.clone() - target.clone()) / (d0.clone() - dmin.clone());
    } else if target > d0 && dmax > d0 {
        tau_plus = (target.clone() - d0.clone()) / (dmax.clone() - d0.clone());
    }
    let classifier = prep.classifier(&t, &tau_plus, &tau_minus);
    let risk = risk_exact(dist, &classifier);
    let disparity = disparity_exact(dist, kind, cells, &classifier);
    Ok(RandomizedSolution { t, tau_plus, tau_minus, classifier, risk, disparity })
}

/// Largest atom count [`brute_force_oracle`] accepts.
pub const ORACLE_CAP: usize = 12;

/// Minimum risk over threshold rules at every boundary ratio, every midpoint
/// between consecutive ratios and one point beyond each end, with the
/// boundary mass chosen in closed form to meet `|Dis| ≤ δ`.
pub fn brute_force_oracle<T: Scalar>(
    dist: &FiniteDistribution<T>,
    kind: DisparityKind,
    cells: &CellMasses<T>,
    delta: &T,
) -> Result<(T, RandomizedClassifier<T>)> {
    if dist.len() > ORACLE_CAP {
        return Err(FairError::TooLarge { atoms: dist.len(), cap: ORACLE_CAP });
    }
    let prep = prepare(dist, kind, cells)?;
    let ratios = prep.sorted_ratios();
    let mut candidates = alloc::vec![T::zero()];
    if let (Some(first), Some(last)) = (ratios.first(), ratios.last()) {
        candidates.push(first.clone() - T::one());
        candidates.push(last.clone() + T::one());
    }
    for w in ratios.windows(2) {
        candidates.push((w[0].clone() + w[1].clone()) / two::<T>());
    }
    candidates.extend(ratios.iter().cloned());

    let mut best: Option<(T, RandomizedClassifier<T>)> = None;
    for t in candidates {
        let (dmin, d0, dmax) = prep.levels(&t);
        // Boundary contribution z ranges over [dmin - d0, dmax - d0].
        let lo = max_of(dmin.clone() - d0.clone(), -delta.clone() - d0.clone());
        let hi = min_of(dmax.clone() - d0.clone(), delta.clone() - d0.clone());
        if lo > hi {
            continue;
        }
        // Risk falls by t·z, so push z to the end favoured by the sign of t.
        let z = if t > T::zero() { hi } else { lo };
        let (tau_plus, tau_minus) = if z > T::zero() {
            (z / (dmax - d0), T::zero())
        } else if z < T::zero() {
            (T::zero(), z / (dmin - d0))
        } else {
            (T::zero(), T::zero())
        };
        let clf = prep.classifier(&t, &tau_plus, &tau_minus);
        let risk = risk_exact(dist, &clf);
        if best.as_ref().is_none_or(|(r, _)| risk < *r) {
            best = Some((risk, clf));
        }
    }
    best.ok_or_else(|| FairError::Infeasible("no candidate threshold meets the constraint".into()))
}

fn max_of<T: Scalar>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

fn min_of<T: Scalar>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}
