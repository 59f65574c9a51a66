//! Chart-change law for Christoffel fields and 2-jets.
//!
//! For `F = ψ∘φ⁻¹`, `u = φ(m)`, `v = ψ(m)`:
//!
//! ```text
//! Γ_ψ(v)(DF(u)e₁, DF(u)e₂) = DF(u)·Γ_φ(u)(e₁, e₂) + D²F(u)(e₁, e₂)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{
    basis, jacobian, random_unit_vector, second_derivative, BilinearMap, BilinearTensor, Matrix,
    SmoothMap, Vector,
};
use crate::error::{check_dim, GeoError, Result};

use super::{ChartTransition, ChristoffelField, TwoJet};

/// `DF(u)` with condition estimate above this is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

struct Linearization {
    df: Matrix,
    df_inv: Matrix,
    d2f: BilinearTensor,
}

fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Invertibility-checked inverse.
pub(crate) fn checked_inverse(m: &Matrix) -> Result<Matrix> {
    let condition = condition_number(m);
    if !(condition <= CONDITION_LIMIT) {
        return Err(GeoError::Singular { condition });
    }
    m.clone()
        .try_inverse()
        .ok_or(GeoError::Singular { condition })
}

fn second_derivative_tensor(f: &SmoothMap, u: &Vector) -> Result<BilinearTensor> {
    let n = f.domain_dim();
    let mut t = BilinearTensor::zeros(n, f.codomain_dim());
    for i in 0..n {
        for j in i..n {
            let d = second_derivative(f, u, &basis(n, i), &basis(n, j))?;
            for k in 0..f.codomain_dim() {
                t.set(k, i, j, d[k]);
                t.set(k, j, i, d[k]);
            }
        }
    }
    Ok(t)
}

fn linearize(f: &SmoothMap, u: &Vector) -> Result<Linearization> {
    let df = jacobian(f, u)?;
    let df_inv = checked_inverse(&df)?;
    let d2f = second_derivative_tensor(f, u)?;
    Ok(Linearization { df, df_inv, d2f })
}

/// Value of `Γ_ψ` at `F(u)`, solved from the chart-change law.
pub fn transform_christoffel(
    gamma_phi: &ChristoffelField,
    t: &ChartTransition,
    u: &Vector,
) -> Result<BilinearMap> {
    check_dim("chart transition", gamma_phi.dim(), t.dim())?;
    let n = gamma_phi.dim();
    let lin = linearize(&t.forward, u)?;
    let g = gamma_phi.tensor_at(u)?;
    // Law evaluated on basis pairs: DF·Γ_φ(e_i, e_j) + D²F(e_i, e_j).
    let mut pulled = BilinearTensor::zeros(n, n);
    for i in 0..n {
        let ei = basis(n, i);
        for j in 0..n {
            let ej = basis(n, j);
            let col = &lin.df * g.apply(&ei, &ej) + lin.d2f.apply(&ei, &ej);
            for k in 0..n {
                pulled.set(k, i, j, col[k]);
            }
        }
    }
    let df_inv = lin.df_inv;
    Ok(BilinearMap::new(n, n, move |w1, w2| {
        pulled.apply(&(&df_inv * w1), &(&df_inv * w2))
    }))
}

/// The whole field `v ↦ Γ_ψ(v)`; needs the inverse transition to locate
/// `u = G(v)`.
pub fn transformed_field(gamma_phi: &ChristoffelField, t: &ChartTransition) -> Result<ChristoffelField> {
    let g = t.inverse()?.clone();
    let (gamma, t) = (gamma_phi.clone(), t.clone());
    Ok(ChristoffelField::new(
        format!("{}->psi", gamma_phi.chart_id()),
        gamma_phi.dim(),
        gamma_phi.is_symmetric(),
        move |v| transform_christoffel(&gamma, &t, &g.eval(v)?),
    ))
}

/// Largest violation of the chart-change law at `u` over seeded unit probe
/// vectors `e₁, e₂`.
pub fn check_transformation_law(
    gamma_phi: &ChristoffelField,
    gamma_psi: &ChristoffelField,
    t: &ChartTransition,
    u: &Vector,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    check_dim("chart transition", gamma_phi.dim(), t.dim())?;
    check_dim("target Christoffel field", gamma_phi.dim(), gamma_psi.dim())?;
    let n = gamma_phi.dim();
    let v = t.forward.eval(u)?;
    let df = jacobian(&t.forward, u)?;
    checked_inverse(&df)?;
    let g_phi = gamma_phi.at(u)?;
    let g_psi = gamma_psi.at(&v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes.max(1) {
        let e1 = random_unit_vector(&mut rng, n);
        let e2 = random_unit_vector(&mut rng, n);
        let lhs = g_psi.apply(&(&df * &e1), &(&df * &e2))?;
        let rhs = &df * g_phi.apply(&e1, &e2)? + second_derivative(&t.forward, u, &e1, &e2)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Re-expresses a 2-jet from chart φ in chart ψ:
/// `α_ψ = α_φ∘DG(v)` and
/// `B_ψ = B_φ∘(DG×DG) + α_φ∘DG∘D²F(u)∘(DG×DG)`, with `v = F(u)`.
pub fn transform_twojet(s: &TwoJet, t: &ChartTransition, u: &Vector) -> Result<TwoJet> {
    let g = t.inverse()?;
    check_dim("two-jet", t.dim(), s.dim())?;
    let n = s.dim();
    let v = t.forward.eval(u)?;
    let dg = jacobian(g, &v)?;
    let d2f = second_derivative_tensor(&t.forward, u)?;
    let alpha_dg = dg.transpose() * &s.alpha;
    let cols: Vec<Vector> = (0..n).map(|a| dg.column(a).into_owned()).collect();
    let form = Matrix::from_fn(n, n, |a, b| {
        let (pa, pb) = (&cols[a], &cols[b]);
        s.form_apply(pa, pb) + alpha_dg.dot(&d2f.apply(pa, pb))
    });
    TwoJet::new(alpha_dg, form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::random_vector;
    use crate::poly::PolyChristoffel;
    use crate::structures::dissection_eval;

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn quadratic_transition() -> ChartTransition {
        // F(x) = x + x²/2, G(y) = sqrt(1 + 2y) - 1
        let f = SmoothMap::new(1, 1, |x| x.map(|t| t + 0.5 * t * t))
            .with_d1(|x, v| v * (1.0 + x[0]))
            .with_d2(|_, v, w| v.component_mul(w));
        let g = SmoothMap::new(1, 1, |y| y.map(|t| (1.0 + 2.0 * t).sqrt() - 1.0))
            .with_d1(|y, v| v / (1.0 + 2.0 * y[0]).sqrt());
        ChartTransition::new(f).unwrap().with_inverse(g).unwrap()
    }

    #[test]
    fn linear_transition_keeps_flat() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let t = ChartTransition::new(SmoothMap::linear(a)).unwrap();
        let b = transform_christoffel(&ChristoffelField::zero(2), &t, &Vector::from_row_slice(&[0.5, 1.0])).unwrap();
        assert!(b.to_tensor().max_abs_diff(&BilinearTensor::zeros(2, 2)) < 1e-15);
    }

    #[test]
    fn quadratic_transition_at_origin() {
        let b = transform_christoffel(&ChristoffelField::zero(1), &quadratic_transition(), &v1(0.0)).unwrap();
        assert_eq!(b.apply(&v1(1.0), &v1(1.0)).unwrap()[0], 1.0);
        // Finite-difference transition gives the same value to stencil accuracy.
        let fd = ChartTransition::new(quadratic_transition().forward.without_derivatives()).unwrap();
        let b = transform_christoffel(&ChristoffelField::zero(1), &fd, &v1(0.0)).unwrap();
        assert!((b.apply(&v1(1.0), &v1(1.0)).unwrap()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_transition_preserves_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = PolyChristoffel::random(&mut rng, 3, 2, false).to_field("phi");
        let u = random_vector(&mut rng, 3);
        let b = transform_christoffel(&g, &ChartTransition::identity(3), &u).unwrap();
        assert!(b.to_tensor().max_abs_diff(&g.tensor_at(&u).unwrap()) < 1e-14);
    }

    #[test]
    fn singular_jacobian_rejected() {
        let t = ChartTransition::new(SmoothMap::linear(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]))).unwrap();
        let err = transform_christoffel(&ChristoffelField::zero(2), &t, &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, GeoError::Singular { .. }));
    }

    #[test]
    fn law_checks() {
        let t = quadratic_transition();
        let psi = transformed_field(&ChristoffelField::zero(1), &t).unwrap();
        for u in [-0.4, 0.0, 0.3, 1.2] {
            let r = check_transformation_law(&ChristoffelField::zero(1), &psi, &t, &v1(u), 8, 1).unwrap();
            assert!(r < 1e-8, "{r}");
        }
        let lin = ChartTransition::new(SmoothMap::linear(Matrix::from_element(1, 1, 3.0))).unwrap();
        let r = check_transformation_law(&ChristoffelField::zero(1), &ChristoffelField::zero(1), &lin, &v1(0.7), 8, 1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn law_residual_measures_injected_perturbation() {
        let t = quadratic_transition();
        let psi = transformed_field(&ChristoffelField::zero(1), &t).unwrap();
        let eps = 1e-3;
        let bumped = psi.perturbed(BilinearTensor::from_fn(1, 1, |_, _, _| eps));
        let r = check_transformation_law(&ChristoffelField::zero(1), &bumped, &t, &v1(0.0), 8, 2).unwrap();
        assert!((r - eps).abs() < 1e-12, "{r}");
    }

    #[test]
    fn twojet_examples() {
        let s = TwoJet::new(Vector::from_row_slice(&[1.0, -2.0]), Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 3.0])).unwrap();
        let same = transform_twojet(&s, &ChartTransition::identity(2), &Vector::zeros(2)).unwrap();
        assert!(same.max_abs_diff(&s) < 1e-15);

        let t = ChartTransition::new(SmoothMap::linear(Matrix::from_element(1, 1, 2.0)))
            .unwrap()
            .with_inverse(SmoothMap::linear(Matrix::from_element(1, 1, 0.5)))
            .unwrap();
        let s = TwoJet::new(v1(1.0), Matrix::from_element(1, 1, 1.0)).unwrap();
        let r = transform_twojet(&s, &t, &v1(0.3)).unwrap();
        assert!((r.alpha[0] - 0.5).abs() < 1e-15);
        assert!((r.form[(0, 0)] - 0.25).abs() < 1e-15);

        let z = transform_twojet(&TwoJet::zero(1), &quadratic_transition(), &v1(0.2)).unwrap();
        assert_eq!(z.max_abs_diff(&TwoJet::zero(1)), 0.0);

        let no_inverse = ChartTransition::new(SmoothMap::identity(1)).unwrap();
        assert_eq!(transform_twojet(&s, &no_inverse, &v1(0.0)).unwrap_err(), GeoError::MissingInverse);
    }

    #[test]
    fn dissection_commutes_with_chart_change() {
        // α_ψ ∘ Γ_ψ must equal the transformed jet of α ∘ Γ_φ.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let phi = PolyChristoffel::random(&mut rng, 1, 2, true).to_field("phi");
        let t = quadratic_transition();
        let psi = transformed_field(&phi, &t).unwrap();
        for u in [-0.3, 0.1, 0.6] {
            let u = v1(u);
            let alpha = random_vector(&mut rng, 1);
            let jet_phi = dissection_eval(&phi, &alpha, &u).unwrap();
            let moved = transform_twojet(&jet_phi, &t, &u).unwrap();
            let direct = dissection_eval(&psi, &moved.alpha, &t.forward.eval(&u).unwrap()).unwrap();
            assert!(moved.max_abs_diff(&direct) < 1e-10);
        }
    }
}
