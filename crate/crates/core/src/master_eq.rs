//! Matrix-free generators `ρ̇ = G(ρ)` for the field.
//!
//! Two variants are provided:
//!
//! * [`Variant::ExactMap`]: `G(ρ) = r[M(τ) − 1]ρ + κ₁D[a₁]ρ + κ₂D[a₂]ρ`, the
//!   coarse-grained Poisson average of whole collisions.
//! * [`Variant::SecondOrder`]: the Lindblad generator obtained by expanding
//!   `r[M(τ) − 1]` to second order in τ,
//!
//! ```text
//! γ₁p_g D[a₁] + γ₂p_g D[a₂] + γ₁p_e1 D[a₁†] + γ₂p_e2 D[a₂†]
//!   + γ₁₂χξ (D[a₁†, a₂†] + D[a₂†, a₁†]) + κ₁D[a₁] + κ₂D[a₂]
//! ```
//!
//! Odd orders vanish because ρ_A carries no ground/excited coherence, and at
//! second order no absorption cross terms (`D[a₁, a₂]`) appear for the same
//! reason. The first neglected term is fourth order in τ.
//!
//! Nothing here materializes a `(d²)² × (d²)²` superoperator.

use alloc::vec::Vec;

use crate::atom_field::{AtomPreparation, CollisionMap, InteractionParams};
use crate::hilbert::{FockCutoff, Mode, OperatorMatrix};
use crate::linalg::{Entries, ShiftOp};
use crate::{CMatrix, Error, Result, C64};

/// Collision-averaged coupling strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma12: f64,
}

/// `γ_ij = r τ² g_i g_j`.
///
/// This normalization is the one fixed by the second-order expansion of
/// `r[M(τ) − 1]` together with `D[x]ρ = xρx† − ½{x†x, ρ}`. The frequently
/// quoted `½ r τ² g_i g_j` is half of it and only pairs with the
/// `2xρx† − {x†x, ρ}` convention.
pub fn effective_rates(params: &InteractionParams) -> EffectiveRates {
    let s = params.r * params.tau * params.tau;
    EffectiveRates {
        gamma1: s * params.g1 * params.g1,
        gamma2: s * params.g2 * params.g2,
        gamma12: s * params.g1 * params.g2,
    }
}

/// `D[x, y]ρ = xρy† − ½{x†y, ρ}`, with `D[x] = D[x, x]`.
pub fn dissipator(x: &OperatorMatrix, y: &OperatorMatrix, rho: &CMatrix) -> Result<CMatrix> {
    for found in [y.dim(), rho.nrows(), rho.ncols()] {
        if found != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found,
            });
        }
    }
    let xdy = x.adjoint() * &**y;
    Ok(&**x * rho * y.adjoint() - (&xdy * rho + rho * &xdy) * C64::new(0.5, 0.0))
}

/// Anything that can evaluate `G(ρ)`.
pub trait Liouvillian {
    fn dim(&self) -> usize;

    /// Overwrites `out` with `G(ρ)`.
    fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix);

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        self.apply_into(rho, &mut out);
        out
    }
}

/// What a dissipator term describes; used for reporting and for tests that
/// perturb individual channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Absorption(Mode),
    Emission(Mode),
    Cross,
    Loss(Mode),
}

/// One term `rate · D[x, y]` in sparse form.
#[derive(Debug, Clone)]
pub struct DissipatorTerm {
    pub channel: Channel,
    pub rate: f64,
    x: ShiftOp,
    y: ShiftOp,
    xdy: ShiftOp,
    xdy_adj: Option<ShiftOp>,
}

impl DissipatorTerm {
    pub fn new(channel: Channel, rate: f64, x: ShiftOp, y: ShiftOp) -> Self {
        let xdy = x.adjoint().expect("injective jump operator").compose(&y);
        let xdy_adj = xdy.adjoint();
        DissipatorTerm {
            channel,
            rate,
            x,
            y,
            xdy,
            xdy_adj,
        }
    }

    fn apply_acc(&self, rho: &CMatrix, entries: &Entries, out: &mut CMatrix) {
        let r = C64::new(self.rate, 0.0);
        let h = C64::new(-0.5 * self.rate, 0.0);
        self.x.sandwich_entries_acc(entries, &self.y, r, out);
        self.xdy.left_entries_acc(entries, h, out);
        match &self.xdy_adj {
            Some(adj) => adj.right_adjoint_entries_acc(entries, h, out),
            None => self.xdy.right_acc(rho, h, out),
        }
    }
}

/// A sum of dissipator terms.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    terms: Vec<DissipatorTerm>,
}

impl LindbladGenerator {
    pub fn new(dim: usize) -> Self {
        LindbladGenerator { dim, terms: Vec::new() }
    }

    /// Adds `rate · D[x, y]`; zero rates are dropped.
    pub fn push(&mut self, channel: Channel, rate: f64, x: ShiftOp, y: ShiftOp) {
        assert_eq!(x.dim(), self.dim);
        if rate != 0.0 {
            self.terms.push(DissipatorTerm::new(channel, rate, x, y));
        }
    }

    /// `G(ρ)` into `out`, with the nonzero entries of ρ supplied.
    pub fn apply_entries(&self, rho: &CMatrix, entries: &Entries, out: &mut CMatrix) {
        out.fill(C64::new(0.0, 0.0));
        for t in &self.terms {
            t.apply_acc(rho, entries, out);
        }
    }

    pub fn terms(&self) -> &[DissipatorTerm] {
        &self.terms
    }

    pub fn terms_mut(&mut self) -> &mut [DissipatorTerm] {
        &mut self.terms
    }

    /// Cavity losses only: `κ₁D[a₁] + κ₂D[a₂]`.
    pub fn pure_loss(params: &InteractionParams, cutoff: FockCutoff) -> Self {
        let mut g = LindbladGenerator::new(cutoff.dim());
        for (mode, kappa) in [(Mode::One, params.kappa1), (Mode::Two, params.kappa2)] {
            let a = cutoff.lowering(mode);
            g.push(Channel::Loss(mode), kappa, a.clone(), a);
        }
        g
    }

    /// The second-order collision generator plus cavity losses.
    pub fn second_order(atom: &AtomPreparation, params: &InteractionParams, cutoff: FockCutoff) -> Self {
        let rates = effective_rates(params);
        let (a1, a2) = (cutoff.lowering(Mode::One), cutoff.lowering(Mode::Two));
        let (a1d, a2d) = (cutoff.raising(Mode::One), cutoff.raising(Mode::Two));
        let mut g = LindbladGenerator::new(cutoff.dim());
        g.push(Channel::Absorption(Mode::One), rates.gamma1 * atom.p_g, a1.clone(), a1.clone());
        g.push(Channel::Absorption(Mode::Two), rates.gamma2 * atom.p_g, a2.clone(), a2.clone());
        g.push(Channel::Emission(Mode::One), rates.gamma1 * atom.p_e1, a1d.clone(), a1d.clone());
        g.push(Channel::Emission(Mode::Two), rates.gamma2 * atom.p_e2, a2d.clone(), a2d.clone());
        let cross = rates.gamma12 * atom.coherence();
        g.push(Channel::Cross, cross, a1d.clone(), a2d.clone());
        g.push(Channel::Cross, cross, a2d, a1d);
        g.push(Channel::Loss(Mode::One), params.kappa1, a1.clone(), a1);
        g.push(Channel::Loss(Mode::Two), params.kappa2, a2.clone(), a2);
        g
    }
}

impl Liouvillian for LindbladGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        self.apply_entries(rho, &Entries::of(rho), out);
    }
}

/// `r[M(τ) − 1] + κ₁D[a₁] + κ₂D[a₂]` with the collision map cached.
#[derive(Debug, Clone)]
pub struct ExactGenerator {
    r: f64,
    map: CollisionMap,
    loss: LindbladGenerator,
}

impl ExactGenerator {
    pub fn new(atom: &AtomPreparation, params: &InteractionParams, cutoff: FockCutoff) -> Result<Self> {
        Ok(ExactGenerator {
            r: params.r,
            map: CollisionMap::new(atom, params, params.tau, cutoff)?,
            loss: LindbladGenerator::pure_loss(params, cutoff),
        })
    }

    pub fn collision_map(&self) -> &CollisionMap {
        &self.map
    }
}

impl Liouvillian for ExactGenerator {
    fn dim(&self) -> usize {
        self.loss.dim
    }

    fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        let entries = Entries::of(rho);
        self.loss.apply_entries(rho, &entries, out);
        if self.r != 0.0 {
            self.map.apply_entries_acc(&entries, self.r, out);
            for (o, &x) in out.as_mut_slice().iter_mut().zip(rho.as_slice()) {
                *o -= x * self.r;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    ExactMap,
    SecondOrder,
}

/// Everything needed to build a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub variant: Variant,
    pub params: InteractionParams,
    pub atom: AtomPreparation,
    pub cutoff: FockCutoff,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.atom.validate()
    }

    /// The same physics with the two modes relabelled.
    pub fn swap_modes(&self) -> Self {
        GeneratorSpec {
            params: self.params.swap_modes(),
            atom: self.atom.swap_modes(),
            ..*self
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        GeneratorSpec { variant, ..*self }
    }
}

/// A built generator of either variant.
#[derive(Debug, Clone)]
pub enum Generator {
    Exact(ExactGenerator),
    SecondOrder(LindbladGenerator),
}

impl Generator {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.variant {
            Variant::ExactMap => Generator::Exact(ExactGenerator::new(&spec.atom, &spec.params, spec.cutoff)?),
            Variant::SecondOrder => {
                Generator::SecondOrder(LindbladGenerator::second_order(&spec.atom, &spec.params, spec.cutoff))
            }
        })
    }
}

impl Liouvillian for Generator {
    fn dim(&self) -> usize {
        match self {
            Generator::Exact(g) => g.dim(),
            Generator::SecondOrder(g) => g.dim(),
        }
    }

    fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        match self {
            Generator::Exact(g) => g.apply_into(rho, out),
            Generator::SecondOrder(g) => g.apply_into(rho, out),
        }
    }
}

fn check_dim(spec: &GeneratorSpec, rho: &CMatrix) -> Result<()> {
    let expected = spec.cutoff.dim();
    for found in [rho.nrows(), rho.ncols()] {
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
    }
    Ok(())
}

/// Second-order Lindblad generator evaluated on `rho` (`spec.variant`
/// is not consulted).
pub fn generator_second_order(spec: &GeneratorSpec, rho: &CMatrix) -> Result<CMatrix> {
    check_dim(spec, rho)?;
    spec.validate()?;
    Ok(LindbladGenerator::second_order(&spec.atom, &spec.params, spec.cutoff).apply(rho))
}

/// Exact coarse-grained generator evaluated on `rho` (`spec.variant`
/// is not consulted).
pub fn generator_exact(spec: &GeneratorSpec, rho: &CMatrix) -> Result<CMatrix> {
    check_dim(spec, rho)?;
    Ok(ExactGenerator::new(&spec.atom, &spec.params, spec.cutoff)?.apply(rho))
}
