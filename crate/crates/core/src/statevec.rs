//! Dense statevector simulation of few-qubit circuits.
//!
//! Wire 0 is the least significant bit of the amplitude index. Where a
//! bitstring is rendered, the call site says which wire comes first.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Hard cap on register width.
pub const MAX_QUBITS: usize = 14;

const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    H,
    X,
    Rx,
    Ry,
    Rz,
    U1,
    U2,
    U3,
    Cx,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Cx => 0,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::U1 => 1,
            GateKind::U2 => 2,
            GateKind::U3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::U1 => "u1",
            GateKind::U2 => "u2",
            GateKind::U3 => "u3",
            GateKind::Cx => "cx",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single-target gate, optionally controlled on the |1⟩ state of
/// every wire in `controls`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub params: Vec<f64>,
    pub target: usize,
    pub controls: Vec<usize>,
}

impl GateOp {
    /// Checked constructor. Wire bounds are checked when the op meets a register.
    pub fn new(kind: GateKind, params: &[f64], target: usize, controls: &[usize]) -> Result<Self> {
        if params.len() != kind.arity() {
            return Err(Error::ParamArity {
                kind: kind.name(),
                expected: kind.arity(),
                got: params.len(),
            });
        }
        if kind == GateKind::Cx && controls.len() != 1 {
            return Err(Error::ControlArity {
                kind: "cx",
                expected: 1,
                got: controls.len(),
            });
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(invalid("gate parameters must be finite"));
        }
        Ok(Self {
            kind,
            params: params.to_vec(),
            target,
            controls: controls.to_vec(),
        })
    }

    fn raw(kind: GateKind, params: &[f64], target: usize) -> Self {
        Self {
            kind,
            params: params.to_vec(),
            target,
            controls: Vec::new(),
        }
    }

    pub fn h(target: usize) -> Self {
        Self::raw(GateKind::H, &[], target)
    }
    pub fn x(target: usize) -> Self {
        Self::raw(GateKind::X, &[], target)
    }
    pub fn rx(theta: f64, target: usize) -> Self {
        Self::raw(GateKind::Rx, &[theta], target)
    }
    pub fn ry(theta: f64, target: usize) -> Self {
        Self::raw(GateKind::Ry, &[theta], target)
    }
    pub fn rz(theta: f64, target: usize) -> Self {
        Self::raw(GateKind::Rz, &[theta], target)
    }
    pub fn u1(lambda: f64, target: usize) -> Self {
        Self::raw(GateKind::U1, &[lambda], target)
    }
    pub fn u2(phi: f64, lambda: f64, target: usize) -> Self {
        Self::raw(GateKind::U2, &[phi, lambda], target)
    }
    pub fn u3(theta: f64, phi: f64, lambda: f64, target: usize) -> Self {
        Self::raw(GateKind::U3, &[theta, phi, lambda], target)
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cx,
            params: Vec::new(),
            target,
            controls: vec![control],
        }
    }

    /// Adds a control wire.
    pub fn controlled_by(mut self, control: usize) -> Self {
        self.controls.push(control);
        self
    }

    pub fn is_controlled(&self) -> bool {
        !self.controls.is_empty()
    }

    /// Label used for gate accounting, e.g. `"rz"`, `"c-u1"`, `"cx"`.
    pub fn label(&self) -> String {
        match (self.kind, self.controls.len()) {
            (GateKind::Cx, _) | (_, 0) => self.kind.name().to_string(),
            (k, n) => format!("{}-{}", "c".repeat(n), k.name()),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.params.len() != self.kind.arity() {
            return Err(Error::ParamArity {
                kind: self.kind.name(),
                expected: self.kind.arity(),
                got: self.params.len(),
            });
        }
        if self.kind == GateKind::Cx && self.controls.len() != 1 {
            return Err(Error::ControlArity {
                kind: "cx",
                expected: 1,
                got: self.controls.len(),
            });
        }
        for &w in std::iter::once(&self.target).chain(&self.controls) {
            if w >= n_qubits {
                return Err(Error::WireOutOfRange { wire: w, n_qubits });
            }
        }
        for (i, &c) in self.controls.iter().enumerate() {
            if c == self.target || self.controls[..i].contains(&c) {
                return Err(Error::DuplicateWire(c));
            }
        }
        Ok(())
    }

    /// The 2×2 matrix acting on the target, row-major.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let p = &self.params;
        let c = |re: f64, im: f64| C64::new(re, im);
        let e = |a: f64| C64::from_polar(1.0, a);
        match self.kind {
            GateKind::H => [
                [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
                [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
            ],
            GateKind::X | GateKind::Cx => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            GateKind::Rx => {
                let (s, co) = (p[0] / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            GateKind::Ry => {
                let (s, co) = (p[0] / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateKind::Rz => [[e(-p[0] / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), e(p[0] / 2.0)]],
            GateKind::U1 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), e(p[0])]],
            GateKind::U2 => {
                let (phi, lambda) = (p[0], p[1]);
                [
                    [c(FRAC_1_SQRT_2, 0.0), -e(lambda) * FRAC_1_SQRT_2],
                    [e(phi) * FRAC_1_SQRT_2, e(lambda + phi) * FRAC_1_SQRT_2],
                ]
            }
            GateKind::U3 => {
                let (theta, phi, lambda) = (p[0], p[1], p[2]);
                let (s, co) = (theta / 2.0).sin_cos();
                [
                    [c(co, 0.0), -e(lambda) * s],
                    [e(phi) * s, e(lambda + phi) * co],
                ]
            }
        }
    }

    /// The inverse gate on the same wires.
    pub fn adjoint(&self) -> Self {
        let p = &self.params;
        let (kind, params) = match self.kind {
            GateKind::H | GateKind::X | GateKind::Cx => (self.kind, Vec::new()),
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::U1 => (self.kind, vec![-p[0]]),
            GateKind::U2 => (GateKind::U3, vec![-std::f64::consts::FRAC_PI_2, -p[1], -p[0]]),
            GateKind::U3 => (GateKind::U3, vec![-p[0], -p[2], -p[1]]),
        };
        Self {
            kind,
            params,
            target: self.target,
            controls: self.controls.clone(),
        }
    }

    fn remapped(&self, map: &[usize]) -> Self {
        Self {
            kind: self.kind,
            params: self.params.clone(),
            target: map[self.target],
            controls: self.controls.iter().map(|&c| map[c]).collect(),
        }
    }
}

/// An ordered gate list over a fixed register width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(self)
    }

    /// Appends `other`, whose wire `i` lands on wire `map[i]` of `self`.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[usize]) -> Result<&mut Self> {
        if map.len() != other.n_qubits {
            return Err(invalid(format!(
                "wire map has {} entries for a {}-qubit circuit",
                map.len(),
                other.n_qubits
            )));
        }
        for op in &other.ops {
            self.push(op.remapped(map))?;
        }
        Ok(self)
    }

    /// Appends a circuit of the same width wire-for-wire.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        let map: Vec<usize> = (0..other.n_qubits).collect();
        self.append_mapped(other, &map)
    }

    /// The inverse circuit.
    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            ops: self.ops.iter().rev().map(GateOp::adjoint).collect(),
        }
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            requested: n_qubits,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Complex amplitudes over `n_qubits` wires.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// |0…0⟩.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(invalid(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state from a ket label such as `"01"`.
    /// The leftmost character is wire 0.
    pub fn from_label(label: &str) -> Result<Self> {
        let mut index = 0usize;
        for (w, ch) in label.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => index |= 1 << w,
                _ => return Err(invalid(format!("bad ket label {label:?}"))),
            }
        }
        if label.is_empty() {
            return Err(invalid("empty ket label"));
        }
        Self::basis(label.chars().count(), index)
    }

    /// Loads raw amplitudes. A norm within 1e-6 of one is renormalized;
    /// anything further off is rejected.
    pub fn inject_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_width(n_qubits)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::BadNorm(norm));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { n_qubits, amps })
    }

    /// Tensor product with `low` on wires `0..low.n_qubits` and `high` above it.
    pub fn product(low: &Statevector, high: &Statevector) -> Result<Self> {
        let n_qubits = low.n_qubits + high.n_qubits;
        check_width(n_qubits)?;
        let mut amps = Vec::with_capacity(1 << n_qubits);
        for h in &high.amps {
            amps.extend(low.amps.iter().map(|l| h * l));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Statevector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        let m = op.matrix();
        let tbit = 1usize << op.target;
        let cmask = op.controls.iter().fold(0usize, |m, &c| m | (1 << c));
        for i in 0..self.amps.len() {
            if i & tbit != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tbit;
            let (a, b) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[j] = m[1][0] * a + m[1][1] * b;
        }
        Ok(())
    }

    pub fn run(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(invalid(format!(
                "circuit width {} does not match state width {}",
                circuit.n_qubits(),
                self.n_qubits
            )));
        }
        circuit.ops().iter().try_for_each(|op| self.apply(op))
    }

    fn check_wires(&self, wires: &[usize]) -> Result<()> {
        if wires.is_empty() {
            return Err(invalid("empty wire list"));
        }
        for (i, &w) in wires.iter().enumerate() {
            if w >= self.n_qubits {
                return Err(Error::WireOutOfRange {
                    wire: w,
                    n_qubits: self.n_qubits,
                });
            }
            if wires[..i].contains(&w) {
                return Err(Error::DuplicateWire(w));
            }
        }
        Ok(())
    }

    /// Born distribution of the outcome on `wires`. Outcome bit `wires[0]` is
    /// the most significant bit of the returned index.
    pub fn marginal(&self, wires: &[usize]) -> Result<Vec<f64>> {
        self.check_wires(wires)?;
        let k = wires.len();
        let mut out = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            out[gather(i, wires)] += a.norm_sqr();
        }
        debug_assert!(k > 0);
        Ok(out)
    }

    /// Draws `shots` independent outcomes on `wires` without disturbing the state.
    /// See [`Statevector::marginal`] for the outcome ordering.
    pub fn measure_subset<R: Rng + ?Sized>(&self, wires: &[usize], shots: u64, rng: &mut R) -> Result<Histogram> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        let probs = self.marginal(wires)?;
        let counts = sample_counts(&probs, shots, rng);
        Ok(Histogram {
            width: wires.len(),
            counts,
        })
    }

    /// Projects `wire` onto `bit` and renormalizes.
    pub fn collapse(&self, wire: usize, bit: u8) -> Result<Statevector> {
        self.check_wires(&[wire])?;
        let mask = 1usize << wire;
        let keep = |i: usize| ((i & mask != 0) as u8) == bit;
        let p: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if p <= 1e-300 {
            return Err(Error::ZeroProbabilityBranch);
        }
        let scale = 1.0 / p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if keep(i) { a * scale } else { C64::new(0.0, 0.0) })
            .collect();
        Ok(Statevector {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Samples one bit on `wire` and returns it with the post-measurement state.
    pub fn measure_and_collapse<R: Rng + ?Sized>(&self, wire: usize, rng: &mut R) -> Result<(u8, Statevector)> {
        let p = self.marginal(&[wire])?;
        let bit = u8::from(rng.random::<f64>() * (p[0] + p[1]) >= p[0]);
        Ok((bit, self.collapse(wire, bit)?))
    }

    /// Conditions on `outcome` (ordered as in [`Statevector::marginal`]) for
    /// `wires` and returns its probability together with the normalized state
    /// of the remaining wires, kept in increasing wire order.
    pub fn condition(&self, wires: &[usize], outcome: usize) -> Result<(f64, Statevector)> {
        self.check_wires(wires)?;
        if outcome >= 1 << wires.len() {
            return Err(invalid("outcome out of range"));
        }
        let rest: Vec<usize> = (0..self.n_qubits).filter(|w| !wires.contains(w)).collect();
        let mut amps = vec![C64::new(0.0, 0.0); 1 << rest.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if gather(i, wires) == outcome {
                let r = rest
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (pos, &w)| acc | (((i >> w) & 1) << pos));
                amps[r] = *a;
            }
        }
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p <= 1e-300 {
            return Err(Error::ZeroProbabilityBranch);
        }
        let scale = 1.0 / p.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok((
            p,
            Statevector {
                n_qubits: rest.len(),
                amps,
            },
        ))
    }
}

/// Collects the bits of `index` on `wires`, first wire most significant.
fn gather(index: usize, wires: &[usize]) -> usize {
    wires.iter().fold(0usize, |acc, &w| (acc << 1) | ((index >> w) & 1))
}

/// Inverse-CDF sampling of `shots` outcomes from an (unnormalized) mass vector.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[i] += 1;
    }
    counts
}

/// Outcome counts over a `width`-bit register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    width: usize,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Bitstring of outcome `index`, most significant (first measured wire) leftmost.
    pub fn key(&self, index: usize) -> String {
        format!("{:0width$b}", index, width = self.width)
    }

    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.key(i), c))
            .collect()
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }
}

/// Total-variation distance between two mass vectors of equal length.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
