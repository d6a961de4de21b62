#![allow(dead_code)]

use aads_core::geometry::SlicePoint;
use aads_core::initial_data::InitialData;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1] from the eigen-decomposition of the
/// Jacobi matrix.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn warp(r: f64, kappa: f64) -> f64 {
    (kappa * r).sinh() / kappa
}

/// Diagonal of the background metric in coordinates (r, θ, ψ, φ).
fn background(x: [f64; 4], kappa: f64) -> [f64; 4] {
    let s2 = warp(x[0], kappa).powi(2);
    let st2 = x[1].sin().powi(2);
    [1.0, s2, s2 * st2, s2 * st2 * x[2].sin().powi(2)]
}

/// Perturbation `a` in coordinate components.
fn a_coord(model: &dyn InitialData, x: [f64; 4], kappa: f64) -> [[f64; 4]; 4] {
    let g = background(x, kappa);
    let e: [f64; 4] = std::array::from_fn(|i| g[i].sqrt());
    let a = model.a(&SlicePoint::new(x[0], x[1], x[2], x[3]).unwrap()).unwrap();
    std::array::from_fn(|i| std::array::from_fn(|j| e[i] * e[j] * a.get(i + 1, j + 1)))
}

fn shifted(x: [f64; 4], k: usize, h: f64) -> [f64; 4] {
    let mut y = x;
    y[k] += h;
    y
}

/// Radial mass aspect from coordinate Christoffel symbols of the background,
/// all derivatives by central differences with step `h`.
pub fn mass_aspect_radial(model: &dyn InitialData, x: [f64; 4], kappa: f64, h: f64) -> f64 {
    let g = background(x, kappa);
    let dg: [[f64; 4]; 4] = std::array::from_fn(|k| {
        let (p, m) = (background(shifted(x, k, h), kappa), background(shifted(x, k, -h), kappa));
        std::array::from_fn(|i| (p[i] - m[i]) / (2.0 * h))
    });
    // Γ^l_{ki} for a diagonal metric
    let christoffel = |l: usize, k: usize, i: usize| -> f64 {
        let mut v = 0.0;
        if l == i {
            v += dg[k][l];
        }
        if l == k {
            v += dg[i][l];
        }
        if k == i {
            v -= dg[l][k];
        }
        0.5 * v / g[l]
    };
    let a = a_coord(model, x, kappa);
    let da: [[[f64; 4]; 4]; 4] = std::array::from_fn(|k| {
        let (p, m) = (a_coord(model, shifted(x, k, h), kappa), a_coord(model, shifted(x, k, -h), kappa));
        std::array::from_fn(|i| std::array::from_fn(|j| (p[i][j] - m[i][j]) / (2.0 * h)))
    });
    let mut div = 0.0;
    for j in 0..4 {
        let mut nabla = da[j][0][j];
        for l in 0..4 {
            nabla -= christoffel(l, j, 0) * a[l][j] + christoffel(l, j, j) * a[0][l];
        }
        div += nabla / g[j];
    }
    let trace = |a: &[[f64; 4]; 4], g: &[f64; 4]| (0..4).map(|i| a[i][i] / g[i]).sum::<f64>();
    let tr = trace(&a, &g);
    let d_tr = {
        let (xp, xm) = (shifted(x, 0, h), shifted(x, 0, -h));
        (trace(&a_coord(model, xp, kappa), &background(xp, kappa))
            - trace(&a_coord(model, xm, kappa), &background(xm, kappa)))
            / (2.0 * h)
    };
    div - d_tr - kappa * (a[0][0] - (1.0 + a[0][0]) * tr)
}

/// `(κ/16π) ∫ ℰ₁ cosh(κr)/κ` over the sphere of radius `r`, with a
/// Gauss-Legendre rule in θ and ψ and the trapezoid rule in φ.
pub fn energy_at_radius(model: &dyn InitialData, kappa: f64, r: f64, n: usize, h: f64) -> f64 {
    let (x, w) = golub_welsch(n);
    let nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (PI * (x + 1.0) / 2.0, PI * w / 2.0)).collect();
    let dphi = 2.0 * PI / n as f64;
    let s3 = warp(r, kappa).powi(3);
    let weight = (kappa * r).cosh() / kappa;
    let mut total = 0.0;
    for &(theta, wt) in &nodes {
        for &(psi, wp) in &nodes {
            let measure = s3 * theta.sin().powi(2) * psi.sin();
            for m in 0..n {
                let phi = (m as f64 + 0.5) * dphi;
                total += wt * wp * dphi * measure * weight * mass_aspect_radial(model, [r, theta, psi, phi], kappa, h);
            }
        }
    }
    kappa / (16.0 * PI) * total
}

/// Oracle value of `E₀` at `r = 10/κ` on a 64³ grid, with a residual
/// estimate from a shifted radius and a halved difference step.
pub struct EnergyOracle {
    pub value: f64,
    pub residual: f64,
}

pub fn energy_oracle(model: &dyn InitialData, kappa: f64) -> EnergyOracle {
    let r = 10.0 / kappa;
    let h = 1e-5;
    let value = energy_at_radius(model, kappa, r, 64, h);
    let shifted_r = energy_at_radius(model, kappa, r - 0.5 / kappa, 16, h);
    let coarse = energy_at_radius(model, kappa, r, 16, h);
    let half_h = energy_at_radius(model, kappa, r, 16, 0.5 * h);
    EnergyOracle {
        value,
        residual: (coarse - shifted_r).abs() + (coarse - half_h).abs() + (value - coarse).abs(),
    }
}
