//! Phase estimation on the simulator: the textbook algorithm with an R-qubit
//! phase register, the single-ancilla iterative variant in exhaustive and
//! majority-following modes, and the analytic readout distributions.
//!
//! Phase convention: U(τ)|ε⟩ = e^{−iετ}|ε⟩ = e^{i2πφ}|ε⟩, so φ = −ετ/(2π) mod 1.
//! An R-bit readout b₁…b_R is stored as the integer j = Σ b_k 2^{R−k}, i.e.
//! 0.b₁…b_R = j/2^R with b₁ the most significant bit.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::circuits::inverse_qft_permuted;
use crate::error::{invalid, Error, Result};
use crate::models::{controlled_power_circuit, ControlledPower, PauliTermSum, Propagator};
use crate::statevec::{sample_counts, Circuit, GateOp, Statevector, C64, MAX_QUBITS};

/// Anything carrying non-negative mass over the 2^R readout strings.
pub trait PhaseMass {
    fn resolution(&self) -> usize;
    /// Unnormalized masses indexed by the readout integer.
    fn masses(&self) -> Vec<f64>;
}

fn bit_key(j: usize, r: usize) -> String {
    format!("{:0width$b}", j, width = r)
}

fn check_r(r: usize) -> Result<()> {
    if r == 0 {
        return Err(invalid("resolution R must be at least 1"));
    }
    if r > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            requested: r,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Empirical readout counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSample {
    r: usize,
    counts: Vec<u64>,
}

impl PhaseSample {
    pub fn new(r: usize, counts: Vec<u64>) -> Result<Self> {
        check_r(r)?;
        if counts.len() != 1 << r {
            return Err(invalid(format!("expected {} bins, got {}", 1usize << r, counts.len())));
        }
        Ok(Self { r, counts })
    }

    pub fn r(&self) -> usize {
        self.r
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

    /// Nonzero bins keyed by their R-bit string, b₁ leftmost.
    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (bit_key(j, self.r), c))
            .collect()
    }
}

impl PhaseMass for PhaseSample {
    fn resolution(&self) -> usize {
        self.r
    }
    fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Exact readout probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentDistribution {
    r: usize,
    probs: Vec<f64>,
}

impl ParentDistribution {
    pub fn new(r: usize, probs: Vec<f64>) -> Result<Self> {
        check_r(r)?;
        if probs.len() != 1 << r {
            return Err(invalid(format!("expected {} bins, got {}", 1usize << r, probs.len())));
        }
        if probs.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { r, probs })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, key: &str) -> Option<f64> {
        if key.len() != self.r {
            return None;
        }
        usize::from_str_radix(key, 2).ok().map(|j| self.probs[j])
    }

    /// Draws an O-shot histogram.
    pub fn sample<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> PhaseSample {
        PhaseSample {
            r: self.r,
            counts: sample_counts(&self.probs, shots, rng),
        }
    }
}

impl PhaseMass for ParentDistribution {
    fn resolution(&self) -> usize {
        self.r
    }
    fn masses(&self) -> Vec<f64> {
        self.probs.clone()
    }
}

/// |sin(πNδ) / (N sin πδ)|², the Fejér kernel, with its removable singularity filled in.
fn fejer(delta: f64, n: f64) -> f64 {
    let s = (PI * delta).sin();
    if s.abs() < 1e-9 {
        // δ is within 1e-9 of an integer; sin(πNδ)/(N sin πδ) → ±1
        let d = delta - delta.round();
        let ratio = 1.0 - (n * n - 1.0) * (PI * d).powi(2) / 6.0;
        return ratio * ratio;
    }
    let v = (PI * n * delta).sin() / (n * s);
    v * v
}

/// Readout distribution of an eigenstate with phase `phi` at resolution `r`.
pub fn analytic_pmf(phi: f64, r: usize) -> Result<ParentDistribution> {
    check_r(r)?;
    if !phi.is_finite() {
        return Err(invalid("phase must be finite"));
    }
    let phi = phi.rem_euclid(1.0);
    let n = (1usize << r) as f64;
    let mut probs: Vec<f64> = (0..1usize << r).map(|j| fejer(phi - j as f64 / n, n)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(ParentDistribution { r, probs })
}

/// Mixture Σ|c_n|² P_{φ_n} for a superposed input.
pub fn superposition_pmf(coeffs: &[C64], phases: &[f64], r: usize) -> Result<ParentDistribution> {
    if coeffs.len() != phases.len() || coeffs.is_empty() {
        return Err(invalid("need one phase per coefficient"));
    }
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("coefficients have squared norm {norm}")));
    }
    let mut probs = vec![0.0; 1 << r];
    for (c, &phi) in coeffs.iter().zip(phases) {
        let p = analytic_pmf(phi, r)?;
        let w = c.norm_sqr() / norm;
        probs.iter_mut().zip(p.probs()).for_each(|(a, b)| *a += w * b);
    }
    Ok(ParentDistribution { r, probs })
}

/// Eigenphase for eigenvalue `eps` at evolution time `tau`.
pub fn phase_of(eps: f64, tau: f64) -> f64 {
    (-eps * tau / (2.0 * PI)).rem_euclid(1.0)
}

/// Total controlled-U applications per shot: 1 + 2 + … + 2^{R−1}.
pub fn resource_count(r: u32) -> u64 {
    (1u64 << r) - 1
}

/// Feedback angle for iteration `k`, given the bits already fixed,
/// `later = [b_{k+1}, …, b_R]`.
pub fn ipea_omega(later: &[u8]) -> f64 {
    -2.0 * PI
        * later
            .iter()
            .enumerate()
            .map(|(i, &b)| f64::from(b) / f64::powi(2.0, i as i32 + 2))
            .sum::<f64>()
}

/// Shared inputs for one phase-estimation experiment.
#[derive(Debug, Clone, Copy)]
pub struct QpeSetup<'a> {
    pub hamiltonian: &'a PauliTermSum,
    pub initial: &'a Statevector,
    pub tau: f64,
    pub r: usize,
    pub propagator: &'a Propagator,
}

impl QpeSetup<'_> {
    fn validate(&self, extra_wires: usize) -> Result<()> {
        check_r(self.r)?;
        let n_sim = self.hamiltonian.n_qubits();
        if self.initial.n_qubits() != n_sim {
            return Err(invalid(format!(
                "initial state has {} qubits, Hamiltonian acts on {n_sim}",
                self.initial.n_qubits()
            )));
        }
        if n_sim + extra_wires > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: n_sim + extra_wires,
                limit: MAX_QUBITS,
            });
        }
        if !self.tau.is_finite() {
            return Err(invalid("tau must be finite"));
        }
        Ok(())
    }

    fn power(&self, k: usize) -> Result<ControlledPower> {
        controlled_power_circuit(self.hamiltonian, self.tau, k as u32, self.propagator)
    }
}

/// The full textbook circuit. Phase qubit k sits on wire R − k, the
/// simulation register on wires R…R+n_sim.
pub fn pea_circuit(setup: &QpeSetup) -> Result<Circuit> {
    setup.validate(setup.r)?;
    let r = setup.r;
    let n_sim = setup.hamiltonian.n_qubits();
    let mut c = Circuit::new(r + n_sim)?;
    for w in 0..r {
        c.push(GateOp::h(w))?;
    }
    for k in 1..=r {
        let cp = setup.power(k)?;
        let map: Vec<usize> = (0..n_sim).map(|i| r + i).chain([r - k]).collect();
        c.append_mapped(&cp.circuit, &map)?;
    }
    c.append(&inverse_qft_permuted(r)?)?;
    Ok(c)
}

/// State after the textbook circuit, before readout.
pub fn pea_final_state(setup: &QpeSetup) -> Result<Statevector> {
    let c = pea_circuit(setup)?;
    let mut s = Statevector::product(&Statevector::zero(setup.r)?, setup.initial)?;
    s.run(&c)?;
    Ok(s)
}

/// Readout wires of the textbook circuit, b₁ first.
pub fn pea_readout_wires(r: usize) -> Vec<usize> {
    (0..r).rev().collect()
}

pub fn run_pea<G: Rng + ?Sized>(setup: &QpeSetup, shots: u64, rng: &mut G) -> Result<PhaseSample> {
    let s = pea_final_state(setup)?;
    let h = s.measure_subset(&pea_readout_wires(setup.r), shots, rng)?;
    PhaseSample::new(setup.r, h.into_counts())
}

/// One iterative round: ancilla on wire n_sim, simulation register below it.
fn ipea_round(sim: &Statevector, power: &ControlledPower, omega: Option<f64>) -> Result<Statevector> {
    let n_sim = sim.n_qubits();
    let anc = n_sim;
    let mut s = Statevector::product(sim, &Statevector::zero(1)?)?;
    s.apply(&GateOp::h(anc))?;
    s.run(&power.circuit)?;
    if let Some(w) = omega {
        s.apply(&GateOp::rz(w, anc))?;
    }
    s.apply(&GateOp::h(anc))?;
    Ok(s)
}

/// Bits b_{k+1}…b_R from the readout integer's low bits, `depth` of them known.
fn later_bits(prefix: usize, depth: usize) -> Vec<u8> {
    // prefix bit i (from LSB) holds b_{R−i}; later = [b_{k+1}, …, b_R]
    (0..depth).map(|i| ((prefix >> i) & 1) as u8).collect()
}

#[derive(Debug, Clone)]
struct BranchNode {
    p1: f64,
    post: [Option<Statevector>; 2],
}

/// Iterative estimation following every branch. Each shot runs all R rounds
/// on one simulation register, collapsing it after every ancilla readout; the
/// branch tree is expanded lazily and shared between shots.
pub fn run_ipea_exhaustive<G: Rng + ?Sized>(setup: &QpeSetup, shots: u64, rng: &mut G) -> Result<PhaseSample> {
    setup.validate(1)?;
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    let r = setup.r;
    let powers: Vec<ControlledPower> = (1..=r).map(|k| setup.power(k)).collect::<Result<_>>()?;
    // key: (depth, prefix) where prefix holds b_R … b_{R−depth+1}, b_R most significant
    let mut nodes: HashMap<(usize, usize), BranchNode> = HashMap::new();
    let mut counts = vec![0u64; 1 << r];
    for _ in 0..shots {
        let mut prefix = 0usize;
        for depth in 0..r {
            let key = (depth, prefix);
            if !nodes.contains_key(&key) {
                let sim = if depth == 0 {
                    setup.initial.clone()
                } else {
                    let parent = nodes.get_mut(&(depth - 1, prefix >> 1)).expect("parent expanded");
                    parent.post[prefix & 1].take().expect("child state cached")
                };
                let k = r - depth;
                let omega = (depth > 0).then(|| ipea_omega(&later_bits(prefix, depth)));
                let full = ipea_round(&sim, &powers[k - 1], omega)?;
                let anc = sim.n_qubits();
                let p = full.marginal(&[anc])?;
                let p1 = p[1] / (p[0] + p[1]);
                let mut post = [None, None];
                if depth + 1 < r {
                    for bit in 0..2 {
                        if (if bit == 1 { p1 } else { 1.0 - p1 }) > 0.0 {
                            post[bit] = full.condition(&[anc], bit).ok().map(|(_, s)| s);
                        }
                    }
                }
                nodes.insert(key, BranchNode { p1, post });
            }
            let node = &nodes[&key];
            let bit = usize::from(rng.random::<f64>() < node.p1);
            prefix = (prefix << 1) | bit;
        }
        // prefix = b_R … b₁ with b_R most significant; reverse into b₁ … b_R
        let j = (0..r).fold(0usize, |acc, i| (acc << 1) | ((prefix >> i) & 1));
        counts[j] += 1;
    }
    PhaseSample::new(r, counts)
}

/// Per-round outcome frequencies of a majority-following run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpmfLevel {
    pub k: usize,
    pub f0: f64,
    pub f1: f64,
    pub bit: u8,
}

/// Levels ordered k = R, R−1, …, 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LpmfTree {
    pub r: usize,
    pub levels: Vec<LpmfLevel>,
}

impl LpmfTree {
    pub fn validate(&self) -> Result<()> {
        check_r(self.r)?;
        if self.levels.len() != self.r {
            return Err(invalid(format!("tree has {} levels, expected {}", self.levels.len(), self.r)));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if l.k != self.r - i {
                return Err(invalid("levels must run k = R … 1"));
            }
            if l.f0 < 0.0 || l.f1 < 0.0 || (l.f0 + l.f1 - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("level {} frequencies do not sum to 1", l.k)));
            }
            let chosen = if l.bit == 0 { l.f0 } else { l.f1 };
            if l.bit > 1 || chosen < 0.5 {
                return Err(invalid(format!("level {} did not keep the majority bit", l.k)));
            }
        }
        Ok(())
    }

    /// Readout integer of the explored branch.
    pub fn estimate(&self) -> usize {
        self.levels
            .iter()
            .fold(0usize, |acc, l| acc | (usize::from(l.bit) << (self.r - l.k)))
    }
}

/// Majority bit with ties going to 0.
pub fn majority_bit(c0: u64, c1: u64) -> u8 {
    u8::from(c1 > c0)
}

/// Iterative estimation keeping only the majority bit of each round. Every
/// round restarts from a fresh copy of the initial state.
pub fn run_ipea_nonexhaustive<G: Rng + ?Sized>(setup: &QpeSetup, shots: u64, rng: &mut G) -> Result<(usize, LpmfTree)> {
    setup.validate(1)?;
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    let r = setup.r;
    let anc = setup.hamiltonian.n_qubits();
    let mut later: Vec<u8> = Vec::new();
    let mut levels = Vec::with_capacity(r);
    for k in (1..=r).rev() {
        let omega = (k < r).then(|| ipea_omega(&later));
        let full = ipea_round(setup.initial, &setup.power(k)?, omega)?;
        let c = full.measure_subset(&[anc], shots, rng)?.into_counts();
        let bit = majority_bit(c[0], c[1]);
        let t = (c[0] + c[1]) as f64;
        levels.push(LpmfLevel {
            k,
            f0: c[0] as f64 / t,
            f1: c[1] as f64 / t,
            bit,
        });
        later.insert(0, bit);
    }
    let tree = LpmfTree { r, levels };
    Ok((tree.estimate(), tree))
}

/// Lossy PMF from a majority-following run: the explored leaf receives the
/// product of the kept-bit frequencies, and each rejected branch's mass is
/// spread evenly over its descendant leaves.
pub fn lpmf_reconstruct(tree: &LpmfTree) -> Result<ParentDistribution> {
    tree.validate()?;
    let r = tree.r;
    let mut probs = vec![0.0; 1 << r];
    let mut running = 1.0;
    let mut fixed = 0usize;
    for l in &tree.levels {
        let (keep, drop) = if l.bit == 0 { (l.f0, l.f1) } else { (l.f1, l.f0) };
        let rejected = usize::from(1 - l.bit);
        // b_k sits at readout bit position R − k from the top, i.e. weight 2^{R−k}
        let shift = r - l.k;
        let mass = running * drop;
        if mass > 0.0 {
            let free = l.k - 1;
            let share = mass / (1usize << free) as f64;
            for low in 0..1usize << free {
                // free bits b₁ … b_{k−1} occupy weights 2^{R−1} … 2^{R−k+1}
                let j = fixed | (rejected << shift) | (low << (shift + 1));
                probs[j] += share;
            }
        }
        running *= keep;
        fixed |= usize::from(l.bit) << shift;
    }
    probs[fixed] += running;
    ParentDistribution::new(r, probs)
}
