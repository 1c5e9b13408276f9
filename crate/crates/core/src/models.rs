//! Model Hamiltonians as Pauli sums, their exact spectra and propagators, and
//! controlled propagator circuits (exact or Trotterized) for phase estimation.
//!
//! Units are dimensionless with ħ = 1, so U(τ) = e^{−iHτ}.

use std::f64::consts::FRAC_PI_2;

use crate::circuits::{controlled_rx, controlled_rz, pauli_string_exp, CascadeStyle, Pauli, PauliString};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::statevec::{Circuit, GateOp, Statevector, C64};

/// Widest simulation register accepted by the dense oracles.
pub const MAX_DENSE_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: f64, letters: &str) -> Result<Self> {
        Ok(Self {
            coeff,
            string: letters.parse()?,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.string.is_identity()
    }
}

/// H = Σ c_j P_j with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTermSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliTermSum {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let n_qubits = terms.first().ok_or_else(|| invalid("Hamiltonian has no terms"))?.string.n_qubits();
        if n_qubits == 0 {
            return Err(invalid("Pauli strings must act on at least one wire"));
        }
        for t in &terms {
            if t.string.n_qubits() != n_qubits {
                return Err(invalid(format!("term {} does not act on {n_qubits} wires", t.string)));
            }
            if !t.coeff.is_finite() {
                return Err(invalid(format!("term {} has a non-finite coefficient", t.string)));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    fn from_pairs(pairs: &[(f64, &str)]) -> Self {
        let terms = pairs
            .iter()
            .map(|&(c, s)| PauliTerm::new(c, s).expect("static Pauli letters"))
            .collect();
        Self::new(terms).expect("static term list")
    }

    /// ωZ.
    pub fn zeeman(omega: f64) -> Self {
        Self::from_pairs(&[(omega, "Z")])
    }

    /// ω₁Z₁ + ω₂Z₂ + ω_J Z₁Z₂, qubit 1 on wire 0.
    pub fn ising(w1: f64, w2: f64, wj: f64) -> Self {
        Self::from_pairs(&[(w1, "ZI"), (w2, "IZ"), (wj, "ZZ")])
    }

    /// Two-qubit half-filled Hubbard dimer: −t(X₁ + X₂) + (U/2)(Z₁Z₂ + 1).
    pub fn hubbard_compact(t: f64, u: f64) -> Self {
        Self::from_pairs(&[(-t, "XI"), (-t, "IX"), (u / 2.0, "ZZ"), (u / 2.0, "II")])
    }

    /// Four-qubit Jordan–Wigner Hubbard dimer. Wires 0..4 hold a↑, b↑, a↓, b↓.
    pub fn hubbard_jw(t: f64, u: f64) -> Self {
        let q = u / 4.0;
        let h = -t / 2.0;
        Self::from_pairs(&[
            (2.0 * q, "IIII"),
            (q, "ZIZI"),
            (q, "IZIZ"),
            (-q, "ZIII"),
            (-q, "IZII"),
            (-q, "IIZI"),
            (-q, "IIIZ"),
            (h, "XXII"),
            (h, "YYII"),
            (h, "IIXX"),
            (h, "IIYY"),
        ])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Sum of identity-term coefficients; these shift every eigenvalue.
    pub fn constant_shift(&self) -> f64 {
        self.terms.iter().filter(|t| t.is_identity()).map(|t| t.coeff).sum::<f64>() + 0.0
    }

    /// Σ|c_j| over non-identity terms, an upper bound on the spread of the
    /// shifted spectrum around zero.
    pub fn spectral_bound(&self) -> f64 {
        self.terms.iter().filter(|t| !t.is_identity()).map(|t| t.coeff.abs()).sum()
    }

    pub fn all_commute(&self) -> bool {
        self.terms
            .iter()
            .enumerate()
            .all(|(i, a)| self.terms[..i].iter().all(|b| a.string.commutes_with(&b.string)))
    }

    fn check_dense(&self) -> Result<()> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits {
                requested: self.n_qubits,
                limit: MAX_DENSE_QUBITS,
            });
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        self.check_dense()?;
        Ok(self.sum_matrix(self.terms.iter()))
    }

    fn sum_matrix<'a>(&self, terms: impl Iterator<Item = &'a PauliTerm>) -> CMat {
        let dim = 1usize << self.n_qubits;
        terms.fold(CMat::zeros(dim, dim), |acc, t| acc + t.string.matrix() * C64::new(t.coeff, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` belongs to `eigenvalues[j]`.
    pub eigenvectors: CMat,
}

impl EigenSystem {
    pub fn eigenvector(&self, j: usize) -> Result<Statevector> {
        Statevector::inject_amplitudes(self.eigenvectors.column(j).iter().copied().collect())
    }
}

pub fn exact_eigensystem(h: &PauliTermSum) -> Result<EigenSystem> {
    let (eigenvalues, eigenvectors) = linalg::hermitian_eigh(&h.to_matrix()?);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// e^{−iHτ}, constant terms included.
pub fn exact_propagator(h: &PauliTermSum, tau: f64) -> Result<CMat> {
    Ok(linalg::expm_hermitian(&h.to_matrix()?, tau))
}

/// Product-formula settings. Group A is applied as the outer factor of the
/// symmetric formula; group B as the inner one. Indices refer to the
/// Hamiltonian's term list and never include identity terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrotterPlan {
    pub order: u8,
    pub n: u64,
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
}

impl TrotterPlan {
    /// Default split: terms containing X or Y form group A, diagonal terms group B.
    pub fn new(h: &PauliTermSum, order: u8, n: u64) -> Result<Self> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, t) in h.terms().iter().enumerate() {
            if t.is_identity() {
                continue;
            }
            if t.string.0.iter().any(|&p| p == Pauli::X || p == Pauli::Y) {
                a.push(i);
            } else {
                b.push(i);
            }
        }
        Self::with_groups(h, order, n, a, b)
    }

    pub fn with_groups(h: &PauliTermSum, order: u8, n: u64, group_a: Vec<usize>, group_b: Vec<usize>) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(invalid(format!("Trotter order must be 1 or 2, got {order}")));
        }
        if n == 0 {
            return Err(invalid("Trotter number must be positive"));
        }
        let terms = h.terms();
        let mut seen = vec![false; terms.len()];
        for &i in group_a.iter().chain(&group_b) {
            let t = terms.get(i).ok_or_else(|| invalid(format!("term index {i} out of range")))?;
            if t.is_identity() {
                return Err(invalid("identity terms are carried as an energy shift, not grouped"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("term {i} appears in more than one group")));
            }
        }
        if let Some(i) = (0..terms.len()).find(|&i| !seen[i] && !terms[i].is_identity()) {
            return Err(invalid(format!("term {i} is in no group")));
        }
        for group in [&group_a, &group_b] {
            for (x, &i) in group.iter().enumerate() {
                for &j in &group[..x] {
                    if !terms[i].string.commutes_with(&terms[j].string) {
                        return Err(Error::NonCommuting(format!("{} and {}", terms[i].string, terms[j].string)));
                    }
                }
            }
        }
        Ok(Self {
            order,
            n,
            group_a,
            group_b,
        })
    }

    /// The plan used for U^{2^{k−1}}: the Trotter number grows with the exponent.
    pub fn absorbed(&self, k: u32) -> Result<Self> {
        let factor = 1u64.checked_shl(k.saturating_sub(1)).ok_or_else(|| invalid("exponent too large"))?;
        Ok(Self {
            n: self.n.checked_mul(factor).ok_or_else(|| invalid("Trotter number overflow"))?,
            ..self.clone()
        })
    }

    /// Time-ordered (group, fraction of τ) factors of the product formula.
    fn schedule(&self) -> Vec<(Group, f64)> {
        let step = 1.0 / self.n as f64;
        let mut s = Vec::new();
        match self.order {
            1 => {
                for _ in 0..self.n {
                    s.push((Group::B, step));
                    s.push((Group::A, step));
                }
            }
            _ => {
                s.push((Group::A, step / 2.0));
                for _ in 1..self.n {
                    s.push((Group::B, step));
                    s.push((Group::A, step));
                }
                s.push((Group::B, step));
                s.push((Group::A, step / 2.0));
            }
        }
        s
    }

    fn group(&self, g: Group) -> &[usize] {
        match g {
            Group::A => &self.group_a,
            Group::B => &self.group_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    A,
    B,
}

/// How the controlled propagator is realized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagator {
    /// Term-by-term exponentials; requires mutually commuting terms.
    Exact,
    Trotter(TrotterPlan),
}

/// Dense product-formula unitary, including the constant-term phase.
pub fn trotterized_unitary(h: &PauliTermSum, tau: f64, plan: &TrotterPlan) -> Result<CMat> {
    h.check_dense()?;
    let dim = 1usize << h.n_qubits();
    let terms = h.terms();
    let group_mats = [Group::A, Group::B].map(|g| {
        let m = h.sum_matrix(plan.group(g).iter().map(|&i| &terms[i]));
        linalg::hermitian_eigh(&m)
    });
    let factor = |g: Group, dt: f64| {
        let (vals, vecs) = &group_mats[g as usize];
        let d = nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&e| C64::from_polar(1.0, -e * dt)));
        vecs * CMat::from_diagonal(&d) * vecs.adjoint()
    };
    let mut u = linalg::identity(dim);
    for (g, frac) in plan.schedule() {
        u = factor(g, frac * tau) * u;
    }
    Ok(u * C64::from_polar(1.0, -h.constant_shift() * tau))
}

/// Spectral norm of the difference between the product formula and e^{−iHτ}.
pub fn trotter_error_norm(h: &PauliTermSum, tau: f64, plan: &TrotterPlan) -> Result<f64> {
    let diff = trotterized_unitary(h, tau, plan)? - exact_propagator(h, tau)?;
    Ok(linalg::spectral_norm(&diff))
}

/// Controlled U^{2^{k−1}}(τ) with the simulation register on wires
/// `0..n_sim` and the control on wire `n_sim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPower {
    pub circuit: Circuit,
    /// Sum of dropped identity coefficients. The circuit realizes H minus
    /// this shift, so measured eigenvalues must be shifted back.
    pub energy_shift: f64,
}

pub fn controlled_power_circuit(h: &PauliTermSum, tau: f64, k: u32, prop: &Propagator) -> Result<ControlledPower> {
    if k < 1 {
        return Err(invalid("power exponent k must be at least 1"));
    }
    let n_sim = h.n_qubits();
    let control = n_sim;
    let scale = f64::powi(2.0, k as i32 - 1);
    let tau_k = tau * scale;
    let mut circuit = Circuit::new(n_sim + 1)?;
    let terms = h.terms();
    match prop {
        Propagator::Exact => {
            if !h.all_commute() {
                return Err(Error::NonCommuting("exact propagator circuit needs commuting terms".into()));
            }
            for t in terms.iter().filter(|t| !t.is_identity()) {
                circuit.append(&controlled_term(t, tau_k, control)?)?;
            }
        }
        Propagator::Trotter(plan) => {
            let plan = plan.absorbed(k)?;
            for (g, frac) in plan.schedule() {
                for &i in plan.group(g) {
                    circuit.append(&controlled_term(&terms[i], frac * tau_k, control)?)?;
                }
            }
        }
    }
    Ok(ControlledPower {
        circuit,
        energy_shift: h.constant_shift(),
    })
}

/// Controlled e^{−i c P dt} = controlled exp(−iθP/2) with θ = 2c·dt.
fn controlled_term(t: &PauliTerm, dt: f64, control: usize) -> Result<Circuit> {
    let theta = 2.0 * t.coeff * dt;
    let support = t.string.support();
    match (support.as_slice(), support.first().map(|&w| t.string.0[w])) {
        ([w], Some(Pauli::Z)) => controlled_rz(theta, control, *w),
        ([w], Some(Pauli::X)) => controlled_rx(theta, control, *w),
        _ => pauli_string_exp(&t.string, theta, *support.last().expect("non-identity term"), Some(control), CascadeStyle::Linear),
    }
}

/// Closed-form spectrum and eigenvectors of the compact Hubbard dimer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HubbardDimer {
    pub t: f64,
    pub u: f64,
}

impl HubbardDimer {
    pub fn new(t: f64, u: f64) -> Self {
        Self { t, u }
    }

    fn root(&self) -> f64 {
        (16.0 * self.t * self.t + self.u * self.u).sqrt()
    }

    pub fn eps_minus(&self) -> f64 {
        self.u / 2.0 - (4.0 * self.t * self.t + self.u * self.u / 4.0).sqrt()
    }

    pub fn eps_plus(&self) -> f64 {
        self.u / 2.0 + (4.0 * self.t * self.t + self.u * self.u / 4.0).sqrt()
    }

    /// All four levels, ascending.
    pub fn spectrum(&self) -> [f64; 4] {
        let mut e = [self.eps_minus(), 0.0, self.u, self.eps_plus()];
        e.sort_by(f64::total_cmp);
        e
    }

    /// β for the lower (`minus = true`) or upper level.
    pub fn beta(&self, minus: bool) -> f64 {
        let s = if minus { 1.0 } else { -1.0 };
        (self.u + s * self.root()) / (4.0 * self.t)
    }

    pub fn alpha(&self, minus: bool) -> f64 {
        let s = if minus { 1.0 } else { -1.0 };
        let a = self.u + s * self.root();
        (a * a / (8.0 * self.t * self.t) + 2.0).powf(-0.5)
    }

    /// Ground-state amplitudes on |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn ground_amplitudes(&self) -> [f64; 4] {
        let (a, b) = (self.alpha(true), self.beta(true));
        [a, a * b, a * b, a]
    }
}

/// Two-qubit preparation circuit for the Hubbard ground state, with its
/// rotation angle θ* found by bisection on the overlap with the orthogonal
/// complement inside the symmetric sector.
pub fn groundstate_circuit_hubbard(t: f64, u: f64) -> Result<(Circuit, f64)> {
    if t <= 0.0 || !t.is_finite() || !u.is_finite() {
        return Err(invalid("ground-state preparation needs finite t > 0"));
    }
    let amps = HubbardDimer::new(t, u).ground_amplitudes();
    let s2 = std::f64::consts::SQRT_2;
    // target = a·e₁ + b·e₂ with e₁ = (|00⟩+|11⟩)/√2, e₂ = (|01⟩+|10⟩)/√2
    let (a, b) = (amps[0] * s2, amps[1] * s2);
    let project = |theta: f64| -> Result<(f64, f64)> {
        let mut s = Statevector::zero(2)?;
        s.run(&hubbard_prep(theta)?)?;
        let z = s.amplitudes();
        let e1 = (z[0] + z[3]).re / s2;
        let e2 = (z[1] + z[2]).re / s2;
        Ok((-b * e1 + a * e2, a * e1 + b * e2))
    };

    let mut best: Option<f64> = None;
    let steps = 64;
    let pi = std::f64::consts::PI;
    let mut prev = (-pi, project(-pi)?);
    for i in 1..=steps {
        let th = -pi + 2.0 * pi * i as f64 / steps as f64;
        let cur = (th, project(th)?);
        if prev.1 .0 == 0.0 || prev.1 .0.signum() != cur.1 .0.signum() {
            let (mut lo, mut hi) = (prev.0, cur.0);
            let flo = prev.1 .0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = project(mid)?.0;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let root = 0.5 * (lo + hi);
            if project(root)?.1 > 0.0 && best.is_none_or(|r| root.abs() < r.abs()) {
                best = Some(root);
            }
        }
        prev = cur;
    }
    let theta = best.ok_or_else(|| Error::NoConvergence("no ground-state preparation angle found".into()))?;
    Ok((hubbard_prep(theta)?, theta))
}

/// Ry(π/2) on q₂, CX(q₂→q₁), Ry(θ) on q₁, CX(q₂→q₁), Ry(π/2) on q₁,
/// with q₁ on wire 0 and q₂ on wire 1.
fn hubbard_prep(theta: f64) -> Result<Circuit> {
    let mut c = Circuit::new(2)?;
    c.push(GateOp::ry(FRAC_PI_2, 1))?
        .push(GateOp::cx(1, 0))?
        .push(GateOp::ry(theta, 0))?
        .push(GateOp::cx(1, 0))?
        .push(GateOp::ry(FRAC_PI_2, 0))?;
    Ok(c)
}
