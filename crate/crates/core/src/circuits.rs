//! Circuit fragments: controlled rotations, Pauli-string exponentials and the
//! permuted inverse Fourier transform, plus a dense-unitary oracle and gate
//! accounting.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::linalg::CMat;
use crate::statevec::{Circuit, GateKind, GateOp, Statevector};

/// Widest register accepted by [`circuit_to_unitary`].
pub const MAX_UNITARY_QUBITS: usize = 10;

fn width_for(wires: &[usize]) -> usize {
    wires.iter().copied().max().map_or(0, |w| w + 1)
}

fn distinct(a: usize, b: usize) -> Result<()> {
    if a == b {
        return Err(Error::DuplicateWire(a));
    }
    Ok(())
}

/// Controlled-Rz(θ) as Rz(θ/2), CX, Rz(−θ/2), CX on the target.
pub fn controlled_rz(theta: f64, control: usize, target: usize) -> Result<Circuit> {
    distinct(control, target)?;
    let mut c = Circuit::new(width_for(&[control, target]))?;
    c.push(GateOp::rz(theta / 2.0, target))?
        .push(GateOp::cx(control, target))?
        .push(GateOp::rz(-theta / 2.0, target))?
        .push(GateOp::cx(control, target))?;
    Ok(c)
}

/// Controlled-Rx(θ) from U1, U3 and two CX.
pub fn controlled_rx(theta: f64, control: usize, target: usize) -> Result<Circuit> {
    distinct(control, target)?;
    let mut c = Circuit::new(width_for(&[control, target]))?;
    c.push(GateOp::u1(FRAC_PI_2, target))?
        .push(GateOp::cx(control, target))?
        .push(GateOp::u3(-theta / 2.0, 0.0, 0.0, target))?
        .push(GateOp::cx(control, target))?
        .push(GateOp::u3(theta / 2.0, -FRAC_PI_2, 0.0, target))?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> CMat {
        use crate::statevec::C64;
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        CMat::from_row_slice(2, 2, &entries)
    }
}

/// One Pauli letter per wire; position `w` acts on wire `w`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    /// Wires carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(w, _)| w)
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Dense matrix over `self.n_qubits()` wires.
    pub fn matrix(&self) -> CMat {
        self.0
            .iter()
            .fold(CMat::identity(1, 1), |acc, p| crate::linalg::kron(&p.matrix(), &acc))
    }

    /// Whether two strings commute: an even number of anticommuting positions.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .0
            .iter()
            .zip(&other.0)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses letters such as `"ZXY"`; the first letter acts on wire 0.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(invalid(format!("bad Pauli letter {ch:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.letter()))
    }
}

/// How the parity of the support is accumulated on the parity wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CascadeStyle {
    /// CX chain from wire to wire, ending on the parity wire.
    #[default]
    Linear,
    /// Every support wire targets the parity wire directly.
    FanIn,
}

/// exp(−iθP/2) for a Pauli string, optionally controlled by `control`.
/// Only the central Z rotation is controlled.
pub fn pauli_string_exp(
    p: &PauliString,
    theta: f64,
    parity_wire: usize,
    control: Option<usize>,
    style: CascadeStyle,
) -> Result<Circuit> {
    let support = p.support();
    if support.is_empty() {
        return Err(invalid("Pauli string has no non-identity letter"));
    }
    if !support.contains(&parity_wire) {
        return Err(invalid(format!("parity wire {parity_wire} is not in the support of {p}")));
    }
    if let Some(c) = control {
        if c < p.n_qubits() && p.0[c] != Pauli::I {
            return Err(Error::DuplicateWire(c));
        }
    }
    let width = p.n_qubits().max(control.map_or(0, |c| c + 1));
    let mut basis = Circuit::new(width)?;
    for &w in &support {
        match p.0[w] {
            Pauli::X => {
                basis.push(GateOp::h(w))?;
            }
            Pauli::Y => {
                basis.push(GateOp::rx(FRAC_PI_2, w))?;
            }
            _ => {}
        }
    }
    let others: Vec<usize> = support.iter().copied().filter(|&w| w != parity_wire).collect();
    let mut cascade = Circuit::new(width)?;
    match style {
        CascadeStyle::Linear => {
            let chain: Vec<usize> = others.iter().copied().chain([parity_wire]).collect();
            for pair in chain.windows(2) {
                cascade.push(GateOp::cx(pair[0], pair[1]))?;
            }
        }
        CascadeStyle::FanIn => {
            for &w in &others {
                cascade.push(GateOp::cx(w, parity_wire))?;
            }
        }
    }

    let mut c = basis.clone();
    c.append(&cascade)?;
    match control {
        Some(ctl) => {
            c.append(&controlled_rz(theta, ctl, parity_wire)?)?;
        }
        None => {
            c.push(GateOp::rz(theta, parity_wire))?;
        }
    }
    c.append(&cascade.adjoint())?;
    c.append(&basis.adjoint())?;
    Ok(c)
}

/// Inverse QFT without terminal swaps. Qubit `k` (1-based) lives on wire `R − k`;
/// reading wires `R−1, …, 0` as most-to-least significant gives `b₁…b_R`.
pub fn inverse_qft_permuted(r: usize) -> Result<Circuit> {
    if r == 0 {
        return Err(invalid("inverse QFT needs at least one qubit"));
    }
    let wire = |k: usize| r - k;
    let mut c = Circuit::new(r)?;
    for k in (1..=r).rev() {
        for j in ((k + 1)..=r).rev() {
            let angle = -PI / f64::powi(2.0, (j - k) as i32);
            c.push(GateOp::u1(angle, wire(k)).controlled_by(wire(j)))?;
        }
        c.push(GateOp::h(wire(k)))?;
    }
    Ok(c)
}

/// Dense unitary of a circuit, column `j` being the image of basis state `j`.
pub fn circuit_to_unitary(circuit: &Circuit) -> Result<CMat> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(Error::TooManyQubits {
            requested: n,
            limit: MAX_UNITARY_QUBITS,
        });
    }
    let dim = 1usize << n;
    let mut u = CMat::zeros(dim, dim);
    for j in 0..dim {
        let mut s = Statevector::basis(n, j)?;
        s.run(circuit)?;
        for (i, a) in s.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GateCounts {
    pub total: usize,
    pub cx: usize,
    pub by_kind: BTreeMap<String, usize>,
}

pub fn count_gates(circuit: &Circuit) -> GateCounts {
    let mut counts = GateCounts::default();
    for op in circuit.ops() {
        counts.total += 1;
        if op.kind == GateKind::Cx {
            counts.cx += 1;
        }
        *counts.by_kind.entry(op.label()).or_default() += 1;
    }
    counts
}
