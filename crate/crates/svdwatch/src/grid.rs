//! DC power-flow grid model: topology, the measurement matrix it induces,
//! weighted least-squares state estimation, and unobservable-attack
//! construction and checking.
//!
//! Measurements are the injected powers of all buses followed by the branch
//! flows, all linear in the non-slack bus angles. With `n+1` buses and `m`
//! branches the measurement matrix is `M x N` where `M = m + n + 1` and
//! `N = n`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};

/// Default relative tolerance for deciding unobservability.
pub const UNOBSERVABLE_TOL: f64 = 1e-8;

pub type BusId = u32;

/// A transmission branch with its per-unit susceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    /// Per-unit susceptance, strictly positive.
    pub b: f64,
}

/// Bus/branch topology with per-unit susceptances.
///
/// Serializes to the grid JSON format:
/// `{"slack": id, "buses": [id...], "branches": [{"from", "to", "b"}...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridModel {
    pub slack: BusId,
    pub buses: Vec<BusId>,
    pub branches: Vec<Branch>,
}

const BUNDLED_GRID: &str = include_str!("../data/ieee39.json");

impl GridModel {
    /// The bundled 39-bus, 46-branch test system.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED_GRID).expect("bundled grid data is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let grid: GridModel = serde_json::from_str(s)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Checks the structural invariants: unique buses, slack present, positive
    /// susceptances, no self-loops, at least one branch, connected graph.
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::Topology("grid has no buses".into()));
        }
        let mut seen = HashSet::new();
        for &b in &self.buses {
            if !seen.insert(b) {
                return Err(Error::Topology(format!("duplicate bus id {b}")));
            }
        }
        if !seen.contains(&self.slack) {
            return Err(Error::Topology(format!(
                "slack bus {} is not in the bus list",
                self.slack
            )));
        }
        if self.branches.is_empty() {
            return Err(Error::Topology("grid has no branches".into()));
        }
        for br in &self.branches {
            if br.from == br.to {
                return Err(Error::Topology(format!("self-loop at bus {}", br.from)));
            }
            if !seen.contains(&br.from) || !seen.contains(&br.to) {
                return Err(Error::Topology(format!(
                    "branch {}-{} references an unknown bus",
                    br.from, br.to
                )));
            }
            if !br.b.is_finite() || br.b <= 0.0 {
                return Err(Error::Topology(format!(
                    "branch {}-{} must have a positive finite susceptance",
                    br.from, br.to
                )));
            }
        }

        // Breadth-first search from the slack bus must reach every bus.
        let mut adjacency: HashMap<BusId, Vec<BusId>> = HashMap::new();
        for br in &self.branches {
            adjacency.entry(br.from).or_default().push(br.to);
            adjacency.entry(br.to).or_default().push(br.from);
        }
        let mut reached = HashSet::from([self.slack]);
        let mut queue = VecDeque::from([self.slack]);
        while let Some(u) = queue.pop_front() {
            for &v in adjacency.get(&u).into_iter().flatten() {
                if reached.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        if reached.len() != self.buses.len() {
            return Err(Error::Topology("grid graph is disconnected".into()));
        }
        Ok(())
    }
}

/// What a row of the measurement matrix measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowLabel {
    Injection(BusId),
    Flow { from: BusId, to: BusId },
}

/// The measurement matrix `H` together with its row labels and the non-slack
/// bus ordering that defines the state vector.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    pub h: Matrix,
    pub row_labels: Vec<RowLabel>,
    /// Non-slack buses in column order: column `j` is the angle of
    /// `state_buses[j]`.
    pub state_buses: Vec<BusId>,
}

impl MeasurementMatrix {
    /// Number of measurements `M = m + n + 1`.
    pub fn measurement_count(&self) -> usize {
        self.h.nrows()
    }

    /// Number of state variables `N = n` (non-slack bus angles).
    pub fn state_count(&self) -> usize {
        self.h.ncols()
    }

    /// Column index of a non-slack bus, if it has one.
    pub fn column_of_bus(&self, bus: BusId) -> Option<usize> {
        self.state_buses.iter().position(|&b| b == bus)
    }
}

/// Builds the DC measurement matrix for a grid: `n+1` injection rows (the bus
/// susceptance matrix with the slack column dropped) followed by `m` flow
/// rows.
///
/// Flow rows carry `+b` on the `to` bus and `-b` on the `from` bus; injection
/// rows follow the usual Laplacian convention.
pub fn build_h_matrix(grid: &GridModel) -> Result<MeasurementMatrix> {
    grid.validate()?;
    let state_buses: Vec<BusId> = grid
        .buses
        .iter()
        .copied()
        .filter(|&b| b != grid.slack)
        .collect();
    let column: HashMap<BusId, usize> = state_buses
        .iter()
        .enumerate()
        .map(|(j, &b)| (b, j))
        .collect();
    let row_of_bus: HashMap<BusId, usize> = grid
        .buses
        .iter()
        .enumerate()
        .map(|(i, &b)| (b, i))
        .collect();

    let n_buses = grid.bus_count();
    let m_branches = grid.branch_count();
    let mut h = Matrix::zeros(n_buses + m_branches, state_buses.len());
    let mut row_labels = Vec::with_capacity(n_buses + m_branches);

    for (br_index, br) in grid.branches.iter().enumerate() {
        let (rf, rt) = (row_of_bus[&br.from], row_of_bus[&br.to]);
        // Injection at each endpoint: +b on its own angle, -b on the other.
        if let Some(&jf) = column.get(&br.from) {
            h[(rf, jf)] += br.b;
            h[(rt, jf)] -= br.b;
        }
        if let Some(&jt) = column.get(&br.to) {
            h[(rt, jt)] += br.b;
            h[(rf, jt)] -= br.b;
        }
        // Flow row: b * (angle(to) - angle(from)).
        let flow_row = n_buses + br_index;
        if let Some(&jt) = column.get(&br.to) {
            h[(flow_row, jt)] += br.b;
        }
        if let Some(&jf) = column.get(&br.from) {
            h[(flow_row, jf)] -= br.b;
        }
    }

    row_labels.extend(grid.buses.iter().map(|&b| RowLabel::Injection(b)));
    row_labels.extend(grid.branches.iter().map(|br| RowLabel::Flow {
        from: br.from,
        to: br.to,
    }));

    Ok(MeasurementMatrix {
        h,
        row_labels,
        state_buses,
    })
}

/// Weighted least-squares state estimate `x̂ = K y` with
/// `K = (Hᵀ Λ⁻¹ H)⁻¹ Hᵀ Λ⁻¹`.
pub fn wls_estimate(y: &Vector, h: &MeasurementMatrix, variances: &Vector) -> Result<Vector> {
    if y.len() != h.measurement_count() {
        return Err(Error::InvalidInput(format!(
            "measurement vector has {} entries, expected {}",
            y.len(),
            h.measurement_count()
        )));
    }
    numerics::check_vector(y, "measurement vector")?;
    let k = numerics::weighted_pinv(&h.h, variances)?;
    Ok(k * y)
}

/// Measurement residual `y - H x̂`.
pub fn residual(y: &Vector, h: &MeasurementMatrix, x_hat: &Vector) -> Result<Vector> {
    if y.len() != h.measurement_count() || x_hat.len() != h.state_count() {
        return Err(Error::InvalidInput(format!(
            "residual shapes disagree: y is {}, x̂ is {}, H is {}x{}",
            y.len(),
            x_hat.len(),
            h.measurement_count(),
            h.state_count()
        )));
    }
    Ok(y - &h.h * x_hat)
}

/// An additive attack vector in measurement space.
#[derive(Debug, Clone)]
pub struct Attack {
    /// The attack vector added to measurements.
    pub a: Vector,
    /// Number of nonzero entries of `a` (meters the attacker must compromise).
    pub sparsity: usize,
    /// State-space witness `c` with `a = H c`, when known.
    pub witness: Option<Vector>,
}

impl Attack {
    pub fn norm(&self) -> f64 {
        self.a.norm()
    }
}

/// Builds an unobservable attack `a = H c` supported on the given non-slack
/// buses, scaled so that `‖a‖₂` equals `target_norm`.
///
/// The witness puts equal weight on every support bus; the sparsity of `a`
/// then follows from the topology around the support.
pub fn make_unobservable_attack(
    h: &MeasurementMatrix,
    support_buses: &[BusId],
    target_norm: f64,
) -> Result<Attack> {
    if support_buses.is_empty() {
        return Err(Error::InvalidInput("attack support is empty".into()));
    }
    if !target_norm.is_finite() || target_norm <= 0.0 {
        return Err(Error::InvalidInput(
            "attack norm must be positive and finite".into(),
        ));
    }
    let mut c = Vector::zeros(h.state_count());
    for &bus in support_buses {
        let col = h.column_of_bus(bus).ok_or_else(|| {
            Error::InvalidInput(format!("bus {bus} is not a non-slack bus of this grid"))
        })?;
        c[col] = 1.0;
    }
    let a = &h.h * &c;
    let norm = a.norm();
    if norm == 0.0 {
        return Err(Error::SingularMatrix(
            "support maps to a zero attack vector".into(),
        ));
    }
    let scale = target_norm / norm;
    let a = a * scale;
    let sparsity = a.iter().filter(|&&v| v != 0.0).count();
    Ok(Attack {
        a,
        sparsity,
        witness: Some(c * scale),
    })
}

/// Tests whether `a` lies in the column space of `H` up to the relative
/// residual `tol`, returning the least-squares witness `c` when it does.
pub fn is_unobservable(
    a: &Vector,
    h: &MeasurementMatrix,
    tol: f64,
) -> Result<(bool, Option<Vector>)> {
    if a.len() != h.measurement_count() {
        return Err(Error::InvalidInput(format!(
            "attack vector has {} entries, expected {}",
            a.len(),
            h.measurement_count()
        )));
    }
    numerics::check_vector(a, "attack vector")?;
    let a_norm = a.norm();
    if a_norm == 0.0 {
        return Ok((true, Some(Vector::zeros(h.state_count()))));
    }
    // Unweighted least squares: c = argmin ‖a - Hc‖₂.
    let ones = Vector::from_element(h.measurement_count(), 1.0);
    let k = numerics::weighted_pinv(&h.h, &ones)?;
    let c = &k * a;
    let rel = (a - &h.h * &c).norm() / a_norm;
    if rel <= tol {
        Ok((true, Some(c)))
    } else {
        Ok((false, None))
    }
}
