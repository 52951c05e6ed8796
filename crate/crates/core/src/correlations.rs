//! Two-time correlations via the quantum regression theorem and the output
//! signal `N_D(T)`.
//!
//! The signal is computed two independent ways:
//!
//! * kernel route: `⟨c†c⟩(t) = ∫∫ ⟨F̃(τ)F̃(τ′)⟩ e^{(−iΔ+Γ/2)(τ−t)} e^{(iΔ+Γ/2)(τ′−t)} dτ dτ′`
//!   from the molecule-only correlation kernel (noise terms dropped; they
//!   vanish for vacuum input), then `N_D = Γ ∫⟨c†c⟩ dt`;
//! * flux route: `N_D = Γ ∫ tr(c†c ρ(t)) dt` on the full space.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{evolve_state_with, propagate, propagate_with, Picture};
use crate::model::{f_tilde, LindbladGenerator, ModelOperators, ModelParams};
use crate::ode::linspace;
use crate::operators::{OperatorMatrix, StateMatrix, C64};
use crate::oracles;

/// Minimum samples per `1/Γ` accepted by the kernel route.
pub const MIN_POINTS_PER_DECAY: f64 = 8.0;
/// Samples per shortest model timescale used when a grid is chosen automatically.
pub const POINTS_PER_TIMESCALE: f64 = 16.0;

/// `⟨A(t+τ) B(t)⟩ = tr(A Φ_τ(B ρ(t)))`, with `ρ0` at time 0.
pub fn two_time_correlation(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    t: f64,
    tau: f64,
) -> Result<C64> {
    if !(t >= 0.0) || !(tau >= 0.0) {
        return Err(Error::InvalidGrid(format!("need t >= 0 and tau >= 0, got t = {t}, tau = {tau}")));
    }
    let rho0 = OperatorMatrix::new(rho0.space().clone(), rho0.entries().clone())?;
    let rho_t = advance(gen, Picture::Schrodinger, &rho0, t)?;
    let x = advance(gen, Picture::Schrodinger, &b.try_mul(&rho_t)?, tau)?;
    Ok(a.try_mul(&x)?.trace())
}

fn advance(gen: &LindbladGenerator, picture: Picture, x: &OperatorMatrix, duration: f64) -> Result<OperatorMatrix> {
    if duration == 0.0 {
        return Ok(x.clone());
    }
    Ok(propagate(gen, picture, x, &[0.0, duration])?.pop().expect("two samples"))
}

/// `values[(i, j)] = ⟨X(t_i) X(t_j)⟩` on a uniform grid.
#[derive(Clone, Debug)]
pub struct CorrelationKernel {
    times: Vec<f64>,
    values: DMatrix<C64>,
}

impl CorrelationKernel {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// `max |C(t,t′) − conj C(t′,t)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.values.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

fn uniform_grid(duration: f64, n_grid: usize) -> Result<Vec<f64>> {
    if n_grid < 2 || !(duration > 0.0) {
        return Err(Error::InvalidGrid(format!("need n_grid >= 2 and T > 0, got {n_grid}, {duration}")));
    }
    Ok(linspace(0.0, duration, n_grid))
}

/// Regression-theorem kernel of a Hermitian `op` on `[0, duration]`, `ρ0` at 0.
///
/// Both triangles are computed independently, `i ≥ j` as
/// `tr(X(t_i − t_j)·X ρ(t_j))` and `i < j` as `tr(X(t_j − t_i)·ρ(t_i) X)`,
/// where `X(s)` is the Heisenberg-evolved operator; Hermitian symmetry of
/// the result is therefore a genuine check.
pub fn correlation_kernel(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    op: &OperatorMatrix,
    duration: f64,
    n_grid: usize,
) -> Result<CorrelationKernel> {
    let times = uniform_grid(duration, n_grid)?;
    let mut states = Vec::with_capacity(n_grid);
    evolve_state_with(gen, rho0, &times, |_, _, s| {
        states.push(s.entries().clone());
        Ok(())
    })?;
    let mut heis = Vec::with_capacity(n_grid);
    propagate_with(gen, Picture::Heisenberg, op, &times, |_, _, y| {
        heis.push(y.clone());
        Ok(())
    })?;
    let x = op.entries();
    let left: Vec<DMatrix<C64>> = states.iter().map(|r| x * r).collect();
    let right: Vec<DMatrix<C64>> = states.iter().map(|r| r * x).collect();

    // tr(A B) = Σ A_ij B_ji = Σ conj(A†)_ji B_ji
    let tr_prod = |a: &DMatrix<C64>, b: &DMatrix<C64>| a.adjoint().dotc(b);
    let rows: Vec<Vec<C64>> = (0..n_grid)
        .into_par_iter()
        .map(|i| {
            (0..n_grid)
                .map(|j| if i >= j { tr_prod(&heis[i - j], &left[j]) } else { tr_prod(&heis[j - i], &right[i]) })
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(n_grid, n_grid, |i, j| rows[i][j]);
    Ok(CorrelationKernel { times, values })
}

/// Cumulative `N_D` sampled on a grid, with the least-squares slope over the
/// final third.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalCurve {
    times: Vec<f64>,
    values: Vec<f64>,
    slope: f64,
}

impl SignalCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        let slope = final_third_slope(&times, &values);
        Ok(Self { times, values, slope })
    }

    /// Integration durations `T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// Scales by a detection efficiency η.
    pub fn scaled(&self, eta: f64) -> Self {
        Self { times: self.times.clone(), values: self.values.iter().map(|v| v * eta).collect(), slope: self.slope * eta }
    }

    /// Keeps every `stride`-th sample (the last sample is always kept).
    pub fn subsample(&self, stride: usize) -> Self {
        let n = self.times.len();
        let idx: Vec<usize> = (0..n).step_by(stride.max(1)).chain(std::iter::once(n - 1)).collect();
        let mut idx = idx;
        idx.dedup();
        Self {
            times: idx.iter().map(|&k| self.times[k]).collect(),
            values: idx.iter().map(|&k| self.values[k]).collect(),
            slope: self.slope,
        }
    }

    /// Relative spread of the local slope `ΔN/ΔT` across the final third.
    pub fn final_third_slope_spread(&self) -> f64 {
        let n = self.times.len();
        let start = n - n.div_ceil(3);
        let local: Vec<f64> = self.times[start..]
            .windows(2)
            .zip(self.values[start..].windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        let max = local.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = local.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / self.slope.abs().max(f64::MIN_POSITIVE)
    }
}

fn final_third_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    let start = n - n.div_ceil(3).max(2);
    let (xs, ys) = (&times[start..], &values[start..]);
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn cumulative_trapezoid(values: &[f64], h: f64, start: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() - start);
    let mut acc = 0.0;
    out.push(0.0);
    for k in start + 1..values.len() {
        acc += 0.5 * h * (values[k - 1] + values[k]);
        out.push(acc);
    }
    out
}

/// `⟨c†c⟩(t_k)` from a kernel by two nested cumulative trapezoid convolutions,
/// O(n²) overall. `Γ` and `Δ` set the amplifier response `e^{−(iΔ+Γ/2)t}`.
pub fn amplifier_occupation_from_kernel(kernel: &CorrelationKernel, amp_decay: f64, amp_detuning: f64) -> Vec<C64> {
    let n = kernel.times.len();
    let h = kernel.step();
    let c = &kernel.values;
    let lambda = C64::new(amp_decay / 2.0, amp_detuning);
    let damp = (-lambda * h).exp();
    let damp_conj = damp.conj();
    let half = 0.5 * h;

    // inner[i] = Σ_j ω_j C(i, j) e^{λ(t_j − t_k)} over j ≤ k, advanced in k
    let mut inner: Vec<C64> = (0..n).map(|_| C64::new(0.0, 0.0)).collect();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 1..n {
        for (i, slot) in inner.iter_mut().enumerate() {
            *slot = damp * (*slot + c[(i, k - 1)] * half) + c[(i, k)] * half;
        }
        // outer sum over i ≤ k with weights ω_i conj(e^{λ(t_i − t_k)})
        let mut acc = C64::new(0.0, 0.0);
        let mut w = C64::new(1.0, 0.0);
        for i in (0..=k).rev() {
            let omega = if i == 0 || i == k { half } else { h };
            acc += w * inner[i] * omega;
            w *= damp_conj;
        }
        out[k] = acc;
    }
    out
}

fn check_density(params: &ModelParams, h: f64) -> Result<()> {
    let points_per_unit = 1.0 / (params.amp_decay * h);
    if params.amp_decay > 0.0 && points_per_unit < MIN_POINTS_PER_DECAY {
        return Err(Error::GridTooCoarse { points_per_unit, required: MIN_POINTS_PER_DECAY });
    }
    Ok(())
}

/// Padded grid `0 = t₀ … T₀ … T₀+T` with step `T/(n−1)`; returns the grid and the index of `T₀`.
fn signal_grid(start: f64, duration: f64, n_grid: usize) -> Result<(Vec<f64>, usize)> {
    uniform_grid(duration, n_grid)?;
    if !(start >= 0.0) {
        return Err(Error::InvalidGrid(format!("T0 must be >= 0, got {start}")));
    }
    let h = duration / (n_grid - 1) as f64;
    let offset = (start / h).round();
    if (offset * h - start).abs() > 1e-9 * h.max(start) {
        return Err(Error::InvalidGrid(format!("T0 = {start} is not a multiple of the step {h}")));
    }
    let offset = offset as usize;
    let total = offset + n_grid;
    let grid = (0..total).map(|k| if k == total - 1 { start + duration } else { k as f64 * h }).collect();
    Ok((grid, offset))
}

/// `N_D(T)` for `T ∈ [0, duration]` by the correlation-kernel route.
///
/// `gen` may be the reduced (cavity, molecule) generator; only the molecule
/// correlations enter. `ρ0` is placed at `t₀ = 0`, the window starts at `T₀`.
pub fn n_d_kernel(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    start: f64,
    duration: f64,
    n_grid: usize,
) -> Result<SignalCurve> {
    let params = gen.params();
    let (grid, offset) = signal_grid(start, duration, n_grid)?;
    let h = duration / (n_grid - 1) as f64;
    check_density(params, h)?;
    let f = f_tilde(params, gen.space())?;
    let kernel = correlation_kernel(gen, rho0, &f, grid[grid.len() - 1], grid.len())?;
    let occ = amplifier_occupation_from_kernel(&kernel, params.amp_decay, params.amp_detuning);
    let flux: Vec<f64> = occ.iter().map(|v| params.amp_decay * v.re).collect();
    let values = cumulative_trapezoid(&flux, h, offset);
    SignalCurve::new(linspace(0.0, duration, n_grid), values)
}

/// Doubles the kernel grid until the final `N_D` moves by less than `rel_tol`.
pub fn n_d_kernel_refined(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    duration: f64,
    n_start: usize,
    rel_tol: f64,
    max_doublings: usize,
) -> Result<SignalCurve> {
    let mut n = n_start;
    let mut curve = n_d_kernel(gen, rho0, 0.0, duration, n)?;
    for _ in 0..max_doublings {
        n = 2 * n - 1;
        let finer = n_d_kernel(gen, rho0, 0.0, duration, n)?;
        let change = (finer.last() - curve.last()).abs();
        curve = finer;
        if change <= rel_tol * curve.last().abs() {
            return Ok(curve);
        }
    }
    Ok(curve)
}

/// Grid size with at least [`POINTS_PER_TIMESCALE`] samples per `1/max_rate`.
pub fn default_grid_points(params: &ModelParams, duration: f64) -> usize {
    let rate = params.max_rate().max(1.0 / duration);
    (POINTS_PER_TIMESCALE * rate * duration).ceil() as usize + 1
}

/// `N_D(T) = Γ ∫_{T₀}^{T₀+T} ⟨c†c⟩ dt` on the full space with an automatic grid.
pub fn n_d_flux(gen: &LindbladGenerator, rho0: &StateMatrix, start: f64, duration: f64) -> Result<SignalCurve> {
    let n = default_grid_points(gen.params(), duration);
    n_d_flux_on(gen, rho0, start, duration, n)
}

pub fn n_d_flux_on(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    start: f64,
    duration: f64,
    n_grid: usize,
) -> Result<SignalCurve> {
    let params = gen.params();
    let nc = ModelOperators::new(gen.space())?.amp_number().ok_or_else(|| Error::InvalidParameter {
        name: "space",
        reason: "flux route needs the amplifier factor".into(),
    })?;
    let (grid, offset) = signal_grid(start, duration, n_grid)?;
    let h = duration / (n_grid - 1) as f64;
    let mut flux = Vec::with_capacity(grid.len());
    evolve_state_with(gen, rho0, &grid, |_, _, s| {
        flux.push(params.amp_decay * s.expectation(&nc)?.re);
        Ok(())
    })?;
    let values = cumulative_trapezoid(&flux, h, offset);
    SignalCurve::new(linspace(0.0, duration, n_grid), values)
}

/// Gain-term prediction for the time-integrated output mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainDecomposition {
    /// `G = 4μ²T/Γ`.
    pub gain: f64,
    /// Coefficient `P_abs √G` multiplying `(a†a)_in ⊗ |F₀⟩⟨F₀|`.
    pub amplitude: f64,
    /// `⟨d_T† d_T⟩` for zero input photons.
    pub signal_vacuum: f64,
    /// `⟨d_T† d_T⟩` for one input photon, `P_abs² G`.
    pub signal_one_photon: f64,
    /// Noise counts added for vacuum input; the noise operator is a bare
    /// input mode, so this is zero.
    pub added_noise: f64,
}

pub fn gain_decomposition(params: &ModelParams, duration: f64) -> Result<GainDecomposition> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter { name: "T", reason: format!("must be > 0, got {duration}") });
    }
    let gain = oracles::gain(params, duration)?;
    let p = oracles::p_abs(params)?;
    let amplitude = p * gain.sqrt();
    let signal = |photons: f64| amplitude * amplitude * photons;
    Ok(GainDecomposition {
        gain,
        amplitude,
        signal_vacuum: signal(0.0),
        signal_one_photon: signal(1.0),
        added_noise: 0.0,
    })
}
