//! Thermal ensembles and the four-stroke quantum Otto cycle.
//!
//! Energies are in units of `J`, `k_B = 1`, `beta = 1/T`. Partition
//! functions are always handled through `ln Z` with a max-shift.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch(format!("{what}: {a} vs {b}")))
    }
}

/// `ln sum_n exp(-beta E_n)`.
pub fn log_partition(eigs: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let e_min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if eigs.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let sum: f64 = eigs.iter().map(|e| (-beta * (e - e_min)).exp()).sum();
    Ok(-beta * e_min + sum.ln())
}

/// `ln p_n = -beta E_n - ln Z`, exact even where `p_n` underflows.
pub fn log_populations(eigs: &[f64], beta: f64) -> Result<Vec<f64>> {
    let log_z = log_partition(eigs, beta)?;
    Ok(eigs.iter().map(|e| -beta * e - log_z).collect())
}

pub fn populations(eigs: &[f64], beta: f64) -> Result<Vec<f64>> {
    Ok(log_populations(eigs, beta)?.into_iter().map(f64::exp).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEnsemble {
    pub beta: f64,
    pub eigenvalues: Vec<f64>,
    pub populations: Vec<f64>,
    pub log_z: f64,
}

impl ThermalEnsemble {
    pub fn new(eigs: &[f64], beta: f64) -> Result<Self> {
        let log_z = log_partition(eigs, beta)?;
        Ok(ThermalEnsemble {
            beta,
            eigenvalues: eigs.to_vec(),
            populations: eigs.iter().map(|e| (-beta * e - log_z).exp()).collect(),
            log_z,
        })
    }

    /// Ensemble over the lowest `eigs.len()` levels of a `full_dim`
    /// spectrum. Fails unless the retained Boltzmann weight is provably at
    /// least `required`.
    pub fn truncated(eigs: &[f64], full_dim: usize, beta: f64, required: f64) -> Result<Self> {
        let retained = retained_weight_bound(eigs, full_dim, beta)?;
        if retained < required {
            return Err(Error::Truncation { retained, required });
        }
        Self::new(eigs, beta)
    }

    pub fn free_energy(&self) -> f64 {
        -self.log_z / self.beta
    }

    pub fn mean_energy(&self) -> f64 {
        self.eigenvalues.iter().zip(&self.populations).map(|(e, p)| e * p).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.beta * (self.mean_energy() - self.free_energy())
    }
}

/// Lower bound on the Boltzmann weight carried by the lowest `eigs.len()`
/// levels when every missing level lies at or above the highest retained
/// one.
pub fn retained_weight_bound(eigs: &[f64], full_dim: usize, beta: f64) -> Result<f64> {
    let k = eigs.len();
    if k > full_dim {
        return Err(Error::LengthMismatch(format!("{k} levels retained out of {full_dim}")));
    }
    let log_zk = log_partition(eigs, beta)?;
    let e_top = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let missing = (full_dim - k) as f64;
    // Z_k / (Z_k + missing e^{-beta E_top}) in log space
    let ratio = (missing.ln() - beta * e_top - log_zk).exp();
    Ok(1.0 / (1.0 + ratio))
}

/// `-(1/beta) (ln Z_to - ln Z_from)`.
pub fn free_energy_change(eigs_from: &[f64], eigs_to: &[f64], beta: f64) -> Result<f64> {
    Ok(-(log_partition(eigs_to, beta)? - log_partition(eigs_from, beta)?) / beta)
}

/// Ideal adiabatic stroke with frozen populations:
/// `sum_n (E_n^end - E_n^start) p_n^start`.
pub fn adiabatic_stroke_work(eigs_start: &[f64], eigs_end: &[f64], start_populations: &[f64]) -> Result<f64> {
    check_len("stroke spectra", eigs_start.len(), eigs_end.len())?;
    check_len("populations", start_populations.len(), eigs_start.len())?;
    Ok(eigs_start
        .iter()
        .zip(eigs_end)
        .zip(start_populations)
        .map(|((a, b), p)| (b - a) * p)
        .sum())
}

/// `sum_n E_n(D0) (P_n(T_H, D0) - P_n(T_L, D0))`.
pub fn heat_in(eigs_d0: &[f64], beta_h: f64, beta_l: f64) -> Result<f64> {
    let ph = populations(eigs_d0, beta_h)?;
    let pl = populations(eigs_d0, beta_l)?;
    Ok(eigs_d0
        .iter()
        .zip(ph.iter().zip(&pl))
        .map(|(e, (h, l))| e * (h - l))
        .sum())
}

fn check_transition(p0: &[f64], probs: &ArrayView2<f64>, eigs_end: &[f64]) -> Result<()> {
    check_len("initial populations vs transition rows", p0.len(), probs.nrows())?;
    check_len("final spectrum vs transition columns", eigs_end.len(), probs.ncols())
}

/// Final-basis populations `p_n = sum_m p0_m p[m][n]`.
pub fn propagated_populations(p0: &[f64], probs: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_len("initial populations vs transition rows", p0.len(), probs.nrows())?;
    let mut out = vec![0.0; probs.ncols()];
    for (m, row) in probs.outer_iter().enumerate() {
        for (o, p) in out.iter_mut().zip(row.iter()) {
            *o += p0[m] * p;
        }
    }
    Ok(out)
}

/// `<W> = sum_{m,n} p0_m p[m][n] E_n(tau) - sum_m p0_m E_m(0)`.
pub fn mean_work(p0: &[f64], probs: ArrayView2<f64>, eigs_start: &[f64], eigs_end: &[f64]) -> Result<f64> {
    check_transition(p0, &probs, eigs_end)?;
    check_len("initial populations vs start spectrum", p0.len(), eigs_start.len())?;
    let pt = propagated_populations(p0, probs)?;
    let e_end: f64 = pt.iter().zip(eigs_end).map(|(p, e)| p * e).sum();
    let e_start: f64 = p0.iter().zip(eigs_start).map(|(p, e)| p * e).sum();
    Ok(e_end - e_start)
}

/// Which distribution sits inside the logarithm of the relative entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlReference {
    /// Instantaneous equilibrium `q_n = exp(-beta E_n(tau)) / Z`; the result
    /// equals `<W> - dF`.
    #[default]
    Equilibrium,
    /// The propagated populations themselves (comparison only).
    Propagated,
}

/// `(1/beta) [sum_m p0_m ln p0_m - sum_{m,n} p0_m p[m][n] ln r_n]` with `r`
/// chosen by `reference`.
pub fn irreversible_work(
    p0: &[f64],
    probs: ArrayView2<f64>,
    eigs_end: &[f64],
    beta: f64,
    reference: KlReference,
) -> Result<f64> {
    check_beta(beta)?;
    check_transition(p0, &probs, eigs_end)?;
    let neg_entropy: f64 = p0.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum();
    let pt = propagated_populations(p0, probs)?;
    let cross: f64 = match reference {
        KlReference::Equilibrium => {
            let log_q = log_populations(eigs_end, beta)?;
            pt.iter().zip(&log_q).map(|(p, lq)| p * lq).sum()
        }
        KlReference::Propagated => pt.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum(),
    };
    Ok((neg_entropy - cross) / beta)
}

/// `(dF2 + dF4) / q_in`.
pub fn efficiency(df2: f64, df4: f64, q_in: f64) -> Result<f64> {
    if q_in == 0.0 || !q_in.is_finite() {
        return Err(Error::NoCycle);
    }
    Ok((df2 + df4) / q_in)
}

pub fn carnot_bound(t_hot: f64, t_cold: f64) -> f64 {
    1.0 - t_cold / t_hot
}

/// Bath whose temperature enters the relative entropy of the cold-side
/// stroke iv.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrokeBath {
    #[default]
    Cold,
    Hot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleConfig {
    pub t_hot: f64,
    pub t_cold: f64,
    pub d0: f64,
    pub d1: f64,
    pub skyrmion_count: u32,
    pub stroke4_bath: StrokeBath,
    pub kl_reference: KlReference,
}

impl CycleConfig {
    pub fn new(t_hot: f64, t_cold: f64, d0: f64, d1: f64) -> Self {
        CycleConfig {
            t_hot,
            t_cold,
            d0,
            d1,
            skyrmion_count: 1,
            stroke4_bath: StrokeBath::Cold,
            kl_reference: KlReference::Equilibrium,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_cold.is_finite() && self.t_cold > 0.0 && self.t_hot.is_finite() && self.t_hot > self.t_cold) {
            return Err(Error::InvalidParams(format!(
                "need T_H > T_L > 0, got T_H = {}, T_L = {}",
                self.t_hot, self.t_cold
            )));
        }
        if self.skyrmion_count == 0 {
            return Err(Error::InvalidParams("skyrmion count must be positive".into()));
        }
        if !(self.d0.is_finite() && self.d1.is_finite()) {
            return Err(Error::InvalidParams("DMI endpoints must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleMode {
    /// Heat taken from the hot bath, net work delivered.
    Engine,
    /// Heat released to the hot bath, net work consumed.
    Refrigerator,
    /// Heat taken from the hot bath while net work is consumed.
    Accelerator,
    Other,
}

/// Transition probabilities of finite-rate strokes ii (`D0 -> D1`) and iv
/// (`D1 -> D0`), rows and columns over the full spectra.
#[derive(Debug, Clone, Copy)]
pub struct DrivenStrokes<'a> {
    pub stroke2: ArrayView2<'a, f64>,
    pub stroke4: ArrayView2<'a, f64>,
}

/// Works are energy delivered to the working body (negative = extracted).
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub w2: f64,
    pub w4: f64,
    pub q_in: f64,
    pub df2: f64,
    pub df4: f64,
    pub w_irr_2: f64,
    pub w_irr_4: f64,
    pub total_work: f64,
    /// `None` when no cycle is closed (`D1 = D0` or `q_in = 0`).
    pub efficiency: Option<f64>,
    pub carnot_bound: f64,
    pub skyrmion_count: u32,
    pub mode: CycleMode,
}

/// Strokes i-iv on the spectra at `D0` and `D1` (same length, ascending).
/// Without `driven` strokes ii and iv are ideal (populations frozen).
pub fn run_otto_cycle(
    eigs_d0: &[f64],
    eigs_d1: &[f64],
    cycle: &CycleConfig,
    driven: Option<DrivenStrokes<'_>>,
) -> Result<CycleReport> {
    cycle.validate()?;
    check_len("cycle spectra", eigs_d0.len(), eigs_d1.len())?;
    let beta_h = 1.0 / cycle.t_hot;
    let beta_l = 1.0 / cycle.t_cold;

    // i: hot bath at D0
    let hot = ThermalEnsemble::new(eigs_d0, beta_h)?;
    // ii: D0 -> D1
    let w2 = adiabatic_stroke_work(eigs_d0, eigs_d1, &hot.populations)?;
    // iii: cold bath at D1
    let cold = ThermalEnsemble::new(eigs_d1, beta_l)?;
    // iv: D1 -> D0
    let w4 = adiabatic_stroke_work(eigs_d1, eigs_d0, &cold.populations)?;

    let q_in = heat_in(eigs_d0, beta_h, beta_l)?;
    let df2 = free_energy_change(eigs_d0, eigs_d1, beta_h)?;
    let df4 = free_energy_change(eigs_d1, eigs_d0, beta_l)?;

    let (w_irr_2, w_irr_4) = match driven {
        None => (0.0, 0.0),
        Some(d) => {
            let beta4 = match cycle.stroke4_bath {
                StrokeBath::Cold => beta_l,
                StrokeBath::Hot => beta_h,
            };
            (
                irreversible_work(&hot.populations, d.stroke2, eigs_d1, beta_h, cycle.kl_reference)?,
                irreversible_work(&cold.populations, d.stroke4, eigs_d0, beta4, cycle.kl_reference)?,
            )
        }
    };

    let k = cycle.skyrmion_count as f64;
    let total = w2 + w4 + w_irr_2 + w_irr_4;
    let efficiency = if cycle.d0 == cycle.d1 {
        None
    } else {
        efficiency(df2, df4, q_in).ok()
    };
    let mode = if q_in > 0.0 && total < 0.0 {
        CycleMode::Engine
    } else if q_in < 0.0 && total > 0.0 {
        CycleMode::Refrigerator
    } else if q_in > 0.0 && total >= 0.0 {
        CycleMode::Accelerator
    } else {
        CycleMode::Other
    };
    Ok(CycleReport {
        w2: k * w2,
        w4: k * w4,
        q_in: k * q_in,
        df2: k * df2,
        df4: k * df4,
        w_irr_2: k * w_irr_2,
        w_irr_4: k * w_irr_4,
        total_work: k * total,
        efficiency,
        carnot_bound: carnot_bound(cycle.t_hot, cycle.t_cold),
        skyrmion_count: cycle.skyrmion_count,
        mode,
    })
}
