//! Spectrum of the averaging operator on mean-zero functions, and the
//! discrete Poincaré inequalities.

use nalgebra::DMatrix;

use super::{random_functions, Analysis, BoundsError, CHECK_TOL};

/// Largest chain handled by the dense eigen-solver.
pub const SPECTRAL_CAP: usize = 2048;
const POINCARE_FUNCTIONS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareCheck {
    /// Var_ν f for each test function.
    pub var: Vec<f64>,
    /// ∫Var_{mₓ}f dν / (κ(2−κ)).
    pub local_rhs: Vec<f64>,
    /// ∬(f(y)−f(x))² dν dmₓ / 2κ.
    pub dirichlet_rhs: Vec<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Moduli of the eigenvalues on mean-zero functions, largest first.
    pub eigenvalue_moduli: Vec<f64>,
    pub spectral_radius: f64,
    pub kappa_used: f64,
    pub reversible: bool,
    /// spectral_radius ≤ 1 − κ + 1e-8, when κ > 0.
    pub radius_holds: Option<bool>,
    /// Only for reversible chains with κ > 0.
    pub poincare: Option<PoincareCheck>,
}

pub fn spectral_report(a: &Analysis) -> Result<SpectralReport, BoundsError> {
    let chain = a.chain;
    let n = chain.len();
    if n > SPECTRAL_CAP {
        return Err(BoundsError::TooLarge(n));
    }
    let nu = a.nu();
    let reversible = a.invariant.reversible;
    let mut values: Vec<(f64, f64)> = if reversible && nu.iter().all(|&v| v > 0.0) {
        let root: Vec<f64> = nu.iter().map(|v| v.sqrt()).collect();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for (x, row) in chain.rows().iter().enumerate() {
            for &(y, p) in row {
                s[(x, y)] += 0.5 * root[x] * p / root[y];
                s[(y, x)] += 0.5 * root[x] * p / root[y];
            }
        }
        s.symmetric_eigenvalues()
            .iter()
            .map(|&v| (v, 0.0))
            .collect()
    } else {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (x, row) in chain.rows().iter().enumerate() {
            for &(y, p) in row {
                m[(x, y)] = p;
            }
        }
        m.complex_eigenvalues()
            .iter()
            .map(|c| (c.re, c.im))
            .collect()
    };
    // Constants span the eigenvalue 1; drop one copy.
    let one = values
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 .0 - 1.0).hypot(a.1 .1);
            let db = (b.1 .0 - 1.0).hypot(b.1 .1);
            da.total_cmp(&db)
        })
        .map(|(i, _)| i);
    if let Some(i) = one {
        values.remove(i);
    }
    let mut moduli: Vec<f64> = values.iter().map(|&(re, im)| re.hypot(im)).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let spectral_radius = moduli.first().copied().unwrap_or(0.0);
    let kappa = a.kappa;
    let radius_holds = (kappa > 0.0).then_some(spectral_radius <= 1.0 - kappa + 1e-8);
    let poincare = (reversible && kappa > 0.0).then(|| poincare(a, kappa));
    Ok(SpectralReport {
        eigenvalue_moduli: moduli,
        spectral_radius,
        kappa_used: kappa,
        reversible,
        radius_holds,
        poincare,
    })
}

fn poincare(a: &Analysis, kappa: f64) -> PoincareCheck {
    let chain = a.chain;
    let nu = a.nu();
    let scale = chain.space().diameter().max(1.0);
    let mut check = PoincareCheck {
        var: vec![],
        local_rhs: vec![],
        dirichlet_rhs: vec![],
        holds: true,
    };
    for f in random_functions(chain.len(), POINCARE_FUNCTIONS, 0x5ec7, scale) {
        let var = a.invariant.nu.variance(&f);
        let mut local = 0.0;
        let mut dirichlet = 0.0;
        for (x, row) in chain.rows().iter().enumerate() {
            let mean: f64 = row.iter().map(|&(y, p)| p * f[y]).sum();
            local += nu[x]
                * row
                    .iter()
                    .map(|&(y, p)| p * (f[y] - mean).powi(2))
                    .sum::<f64>();
            dirichlet += nu[x]
                * row
                    .iter()
                    .map(|&(y, p)| p * (f[y] - f[x]).powi(2))
                    .sum::<f64>();
        }
        let local_rhs = local / (kappa * (2.0 - kappa));
        let dirichlet_rhs = dirichlet / (2.0 * kappa);
        let ok = |rhs: f64| var <= rhs * (1.0 + CHECK_TOL) + CHECK_TOL;
        check.holds &= ok(local_rhs) && ok(dirichlet_rhs);
        check.var.push(var);
        check.local_rhs.push(local_rhs);
        check.dirichlet_rhs.push(dirichlet_rhs);
    }
    check
}
