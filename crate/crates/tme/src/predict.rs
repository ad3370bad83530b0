//! Closed-form phase predictions from anyon data and response coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anyon {
    pub d: f64,
    pub theta: Complex64,
}

/// Chiral central charge plus the quantum dimension and topological spin of each anyon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnyonModel {
    pub c_minus: f64,
    pub anyons: Vec<Anyon>,
}

impl AnyonModel {
    pub fn new(c_minus: f64, anyons: Vec<Anyon>) -> Result<Self> {
        for (k, a) in anyons.iter().enumerate() {
            if (a.theta.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("anyon {k}: |theta| = {}", a.theta.norm())));
            }
            if a.d < 1.0 - 1e-12 {
                return Err(Error::InvalidParameter(format!("anyon {k}: d = {} < 1", a.d)));
            }
        }
        let has_vacuum = anyons
            .iter()
            .any(|a| (a.d - 1.0).abs() < 1e-12 && (a.theta - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        if !has_vacuum {
            return Err(Error::InvalidParameter("identity anyon (d=1, theta=1) missing".into()));
        }
        Ok(AnyonModel { c_minus, anyons })
    }

    /// Ising: c₋ = 1/2, {1, ψ, σ} with d = (1, 1, √2), θ = (1, −1, e^{2πi/16}).
    pub fn ising() -> Self {
        AnyonModel {
            c_minus: 0.5,
            anyons: vec![
                Anyon { d: 1.0, theta: Complex64::new(1.0, 0.0) },
                Anyon { d: 1.0, theta: Complex64::new(-1.0, 0.0) },
                Anyon { d: 2f64.sqrt(), theta: Complex64::from_polar(1.0, 2.0 * PI / 16.0) },
            ],
        }
    }

    /// Toric code: c₋ = 0, {1, e, m, ε} all abelian, θ_ε = −1.
    pub fn toric_code() -> Self {
        let one = Complex64::new(1.0, 0.0);
        AnyonModel {
            c_minus: 0.0,
            anyons: vec![
                Anyon { d: 1.0, theta: one },
                Anyon { d: 1.0, theta: one },
                Anyon { d: 1.0, theta: one },
                Anyon { d: 1.0, theta: -one },
            ],
        }
    }

    /// Only the vacuum, with a given central charge.
    pub fn trivial(c_minus: f64) -> Self {
        AnyonModel { c_minus, anyons: vec![Anyon { d: 1.0, theta: Complex64::new(1.0, 0.0) }] }
    }

    pub fn total_dimension(&self) -> f64 {
        self.anyons.iter().map(|a| a.d * a.d).sum::<f64>().sqrt()
    }

    /// Text table: header `c_minus=<v>` then one `d theta_re theta_im` per line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c_minus = None;
        let mut anyons = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("c_minus=") {
                c_minus = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("c_minus: {e}")))?);
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if nums.len() != 3 {
                return Err(Error::Parse(format!("expected `d theta_re theta_im`, got {line:?}")));
            }
            anyons.push(Anyon { d: nums[0], theta: Complex64::new(nums[1], nums[2]) });
        }
        let c = c_minus.ok_or_else(|| Error::Parse("missing c_minus header".into()))?;
        AnyonModel::new(c, anyons)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("c_minus={}\n", self.c_minus);
        for a in &self.anyons {
            s.push_str(&format!("{} {} {}\n", a.d, a.theta.re, a.theta.im));
        }
        s
    }
}

/// Hall conductance in units where a single Chern band carries 1/(2π).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HallData {
    pub sigma_xy: f64,
}

impl HallData {
    pub fn chern_band() -> Self {
        HallData { sigma_xy: 1.0 / (2.0 * PI) }
    }

    /// Bosonic ν = 1/2 Laughlin state.
    pub fn laughlin_half() -> Self {
        HallData { sigma_xy: 1.0 / (4.0 * PI) }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("replica index n must be at least 1".into()));
    }
    Ok(())
}

/// arg J_n = −(2π c₋/24)·2n²/((2n+1)(n+1)).
pub fn arg_jn(c_minus: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    Ok(wrap_phase(arg_jn_real(c_minus, n as f64)))
}

/// Same formula continued to real n.
pub fn arg_jn_real(c_minus: f64, n: f64) -> f64 {
    -(2.0 * PI * c_minus / 24.0) * 2.0 * n * n / ((2.0 * n + 1.0) * (n + 1.0))
}

/// arg K_n = +(2π c₋/24)·n(2n−1)/(2n+1).
pub fn arg_kn(c_minus: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let n = n as f64;
    Ok(wrap_phase((2.0 * PI * c_minus / 24.0) * n * (2.0 * n - 1.0) / (2.0 * n + 1.0)))
}

/// Phase of Φ_r, or the signal that the anyon sum vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhiPhase {
    Phase(f64),
    Vanishing,
}

impl PhiPhase {
    pub fn phase(self) -> Option<f64> {
        match self {
            PhiPhase::Phase(p) => Some(p),
            PhiPhase::Vanishing => None,
        }
    }
}

/// Relative tolerance below which Σ d²θ^r counts as zero.
pub const PHI_VANISHING_TOL: f64 = 1e-12;

/// Σ_a d_a² θ_a^r.
pub fn anyon_sum(model: &AnyonModel, r: usize) -> Complex64 {
    model.anyons.iter().map(|a| a.theta.powu(r as u32) * (a.d * a.d)).sum()
}

/// Phase of e^{(2πi c₋/24)(−r−2/r)} Σ_a d_a² θ_a^r.
pub fn phi_r_phase(model: &AnyonModel, r: usize) -> Result<PhiPhase> {
    if r < 2 {
        return Err(Error::InvalidParameter("Phi_r needs r >= 2".into()));
    }
    let sum = anyon_sum(model, r);
    let scale: f64 = model.anyons.iter().map(|a| a.d * a.d).sum();
    if sum.norm() < PHI_VANISHING_TOL * scale {
        return Ok(PhiPhase::Vanishing);
    }
    let rf = r as f64;
    let framing = (2.0 * PI * model.c_minus / 24.0) * (-rf - 2.0 / rf);
    let z = sum * Complex64::from_polar(1.0, framing);
    Ok(PhiPhase::Phase(z.im.atan2(z.re)))
}

/// arg S_{μ,n} = σ_xy·nμ²/(2(n+1)).
pub fn arg_smun(hall: HallData, mu: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let n = n as f64;
    Ok(wrap_phase(hall.sigma_xy * n * mu * mu / (2.0 * (n + 1.0))))
}

/// J = π c₋/3.
pub fn modular_commutator(c_minus: f64) -> f64 {
    PI * c_minus / 3.0
}

/// S = −2i σ_xy.
pub fn charged_modular_commutator(hall: HallData) -> Complex64 {
    Complex64::new(0.0, -2.0 * hall.sigma_xy)
}

fn lambda_kappa(a: f64, n: usize) -> (f64, f64) {
    let (p, m) = ((1.0 + a).powi(n as i32), (1.0 - a).powi(n as i32));
    (0.5 * (p + m), 0.5 * (p - m))
}

/// Phase of J_n for the two-qubit toy state with a non-universal commutator term.
pub fn spurious_arg_jn(alpha: f64, beta: f64, gamma: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    if alpha.abs() > 1.0 || beta.abs() > 1.0 {
        return Err(Error::InvalidParameter("|alpha|, |beta| must not exceed 1".into()));
    }
    let (la, ka) = lambda_kappa(alpha, n);
    let (lb, kb) = lambda_kappa(beta, n);
    let num = gamma * ka * kb;
    let den = la * lb + alpha * lb * ka + beta * la * kb;
    Ok(num.atan2(den))
}

/// Extrapolates (i/n²)(J_n − J̄_n) with |J_n| = 1 to n → 0.
///
/// Richardson table over n_k = n₀/2^k, eliminating one power of n per column.
pub fn replica_limit_check(c_minus: f64) -> f64 {
    let f = |n: f64| -2.0 * arg_jn_real(c_minus, n).sin() / (n * n);
    let levels = 10;
    let n0 = 0.05;
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut row = vec![f(n0 / 2f64.powi(k as i32))];
        for j in 1..=k {
            let p = 2f64.powi(j as i32);
            let v = (p * row[j - 1] - table[k - 1][j - 1]) / (p - 1.0);
            row.push(v);
        }
        table.push(row);
    }
    table[levels - 1][levels - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jn_values() {
        assert_abs_diff_eq!(arg_jn(0.5, 1).unwrap(), -PI / 72.0, epsilon = 1e-15);
        assert_abs_diff_eq!(arg_jn(0.5, 2).unwrap(), -PI / 45.0, epsilon = 1e-15);
        assert_eq!(arg_jn(0.0, 3).unwrap(), 0.0);
        assert!(arg_jn(0.5, 0).is_err());
    }

    #[test]
    fn kn_values() {
        assert_abs_diff_eq!(arg_kn(0.5, 1).unwrap(), PI / 72.0, epsilon = 1e-15);
        assert_abs_diff_eq!(arg_kn(0.5, 2).unwrap(), PI / 20.0, epsilon = 1e-15);
        assert_eq!(arg_kn(0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn phi_values() {
        let ising = AnyonModel::ising();
        assert_abs_diff_eq!(phi_r_phase(&ising, 2).unwrap().phase().unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi_r_phase(&ising, 3).unwrap().phase().unwrap(), 2.0 * PI / 9.0, epsilon = 1e-14);
        let triv = AnyonModel::trivial(0.0);
        for r in 2..6 {
            assert_eq!(phi_r_phase(&triv, r).unwrap(), PhiPhase::Phase(0.0));
        }
        assert_abs_diff_eq!(anyon_sum(&AnyonModel::toric_code(), 2).re, 4.0);
        assert!(phi_r_phase(&ising, 1).is_err());
    }

    #[test]
    fn phi_vanishing_signal() {
        // Semion-like pair whose r=2 sum cancels.
        let one = Complex64::new(1.0, 0.0);
        let m = AnyonModel::new(
            1.0,
            vec![Anyon { d: 1.0, theta: one }, Anyon { d: 1.0, theta: Complex64::new(0.0, 1.0) }],
        )
        .unwrap();
        assert_eq!(phi_r_phase(&m, 2).unwrap(), PhiPhase::Vanishing);
    }

    #[test]
    fn smun_values() {
        let h = HallData::chern_band();
        assert_abs_diff_eq!(arg_smun(h, 1.0, 1).unwrap(), 1.0 / (8.0 * PI), epsilon = 1e-15);
        assert_eq!(arg_smun(h, 0.0, 2).unwrap(), 0.0);
        let l = HallData::laughlin_half();
        assert_abs_diff_eq!(arg_smun(l, 0.7, 1).unwrap() / 0.49, 1.0 / (16.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn commutators() {
        assert_abs_diff_eq!(modular_commutator(0.5), PI / 6.0);
        assert_abs_diff_eq!(modular_commutator(1.0), PI / 3.0);
        assert_eq!(modular_commutator(0.0), 0.0);
        let s = charged_modular_commutator(HallData::chern_band());
        assert_abs_diff_eq!(s.im, -1.0 / PI);
        assert_eq!(s.re, 0.0);
        assert_abs_diff_eq!(charged_modular_commutator(HallData::laughlin_half()).im, -1.0 / (2.0 * PI));
    }

    #[test]
    fn spurious_values() {
        let a = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(spurious_arg_jn(a, a, a, 1).unwrap(), (1.0 / (5.0 * 3f64.sqrt())).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(spurious_arg_jn(0.3, -0.2, 0.0, 4).unwrap(), 0.0);
        // The n-dependence differs from the universal one.
        let s1 = spurious_arg_jn(a, a, a, 1).unwrap();
        let s2 = spurious_arg_jn(a, a, a, 2).unwrap();
        for c in [0.5, 1.0, -0.5, 2.0] {
            let ratio = arg_jn(c, 2).unwrap() / arg_jn(c, 1).unwrap();
            assert!((s2 - s1 * ratio).abs() > 1e-3);
        }
    }

    #[test]
    fn replica_limit() {
        assert_abs_diff_eq!(replica_limit_check(0.5), PI / 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(replica_limit_check(0.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(replica_limit_check(24.0), 8.0 * PI, epsilon = 1e-5);
    }

    #[test]
    fn anyon_text_round_trip() {
        let m = AnyonModel::ising();
        assert_eq!(AnyonModel::from_text(&m.to_text()).unwrap(), m);
        assert!(AnyonModel::from_text("1 1 0\n").is_err());
        assert!(AnyonModel::from_text("c_minus=0\n1 2 0\n").is_err());
    }
}
