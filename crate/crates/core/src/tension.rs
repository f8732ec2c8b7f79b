//! Static tension distribution for the redundant cable set.
//!
//! The six cables drive three platform freedoms, leaving a
//! three-dimensional family of internal (antagonistic) tensions. The
//! parallelogram pairing of the top cables fixes two of the three free
//! coefficients; the remaining scalar is pushed to the largest value the
//! tension bounds allow, which stiffens the platform without changing the
//! net wrench.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::dynamics::{gravity_vector, Wrench};
use crate::error::{Error, Result};
use crate::kinematics::{CableGeometry, Mat3x6, Vec5, Vec6, CABLE_COUNT};
use crate::params::RobotParams;

pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat6x3 = SMatrix<f64, 6, 3>;

/// Relative eigenvalue floor below which the structure matrix is treated
/// as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Minimum-norm particular solution, orthonormal kernel basis, free
/// coefficients and the final tension vector for one wrench.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancySolution {
    pub t_a: Vec6,
    pub n_a: Mat6x3,
    pub lambda: Vector3<f64>,
    pub t: Vec6,
}

/// Total platform stiffness split into the tension-borne and
/// cable-elasticity parts, `k = k_t + k_k`. Blocks are ordered translation
/// `(x, y, z)` then rotation `(rx, ry, rz)`; the working plane occupies
/// indices 0, 2 and 4.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessDecomposition {
    pub k: Mat6,
    pub k_t: Mat6,
    pub k_k: Mat6,
    /// Diagonal matrix of individual cable rates [N/m]; zero for the
    /// force-controlled cables.
    pub k_c: Mat6,
}

/// Affine form of the tension family once the pairing constraints have
/// eliminated the first two free coefficients: `T = lambda3 * d_a + e_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaReduction {
    pub d_a: Vec6,
    pub e_a: Vec6,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// Constant and lambda3-linear parts of the two elimination right-hand
    /// sides.
    pub c1_const: f64,
    pub c1_slope: f64,
    pub c2_const: f64,
    pub c2_slope: f64,
}

impl LambdaReduction {
    /// The eliminated coefficients as functions of the free one.
    pub fn lambda12(&self, lambda3: f64) -> (f64, f64) {
        let det = self.a1 * self.b2 - self.a2 * self.b1;
        let c1 = self.c1_const + self.c1_slope * lambda3;
        let c2 = self.c2_const + self.c2_slope * lambda3;
        (
            (self.b2 * c1 - self.b1 * c2) / det,
            (self.a1 * c2 - self.a2 * c1) / det,
        )
    }

    /// Tension vector on the reduced line.
    pub fn tension(&self, lambda3: f64) -> Vec6 {
        lambda3 * self.d_a + self.e_a
    }
}

/// Gravity load of the platform and arm at the current pose, expressed as
/// the `(F_x, F_z, M)` wrench the cables must balance, plus any external
/// wrench applied at the platform center of mass.
pub fn static_wrench(q: &Vec5, params: &RobotParams, external: &Wrench) -> Vector3<f64> {
    let g = gravity_vector(q, params);
    Vector3::new(g[0], g[1], g[2]) + external.combined()
}

fn spectral_inverse(a: &Mat3x6) -> Result<Matrix3<f64>> {
    let gram = a * a.transpose();
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !max.is_finite() || max <= 0.0 || min < RANK_TOL * max {
        return Err(Error::SingularConfiguration(format!(
            "structure matrix is rank deficient (spectrum {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let q = eig.eigenvectors;
    let inv_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    Ok(q * inv_diag * q.transpose())
}

/// Minimum-norm tension solution of `A T = W_m` through the right
/// pseudo-inverse.
pub fn particular_solution(a: &Mat3x6, w_m: &Vector3<f64>) -> Result<Vec6> {
    let inv = spectral_inverse(a)?;
    Ok(a.transpose() * (inv * w_m))
}

/// Orthonormal kernel basis of the structure matrix with a deterministic
/// orientation: each column is flipped so its largest-magnitude entry is
/// positive, and columns are ordered by descending row index of that
/// entry.
pub fn null_basis(a: &Mat3x6) -> Result<Mat6x3> {
    let inv = spectral_inverse(a)?;
    let projector = Mat6::identity() - a.transpose() * inv * a;
    let eig = projector.symmetric_eigen();

    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
    });
    for &idx in order.iter().take(3) {
        if eig.eigenvalues[idx] < 0.5 {
            return Err(Error::SingularConfiguration(
                "kernel of the structure matrix has dimension below 3".to_string(),
            ));
        }
    }

    // One projection pass cleans residual row-space leakage, then
    // Gram-Schmidt restores orthonormality.
    let mut columns = [Vec6::zeros(); 3];
    for (slot, &idx) in order.iter().take(3).enumerate() {
        let mut v = projector * eig.eigenvectors.column(idx).into_owned();
        for prev in columns.iter().take(slot) {
            v -= prev * prev.dot(&v);
        }
        let norm = v.norm();
        if norm < 1e-8 {
            return Err(Error::SingularConfiguration(
                "kernel basis collapsed during orthonormalization".to_string(),
            ));
        }
        columns[slot] = v / norm;
    }

    // Deterministic orientation and order.
    let mut keyed: Vec<(usize, f64, Vec6)> = columns
        .iter()
        .map(|col| {
            let mut arg = 0;
            for i in 1..6 {
                if col[i].abs() > col[arg].abs() {
                    arg = i;
                }
            }
            let signed = if col[arg] < 0.0 { -col } else { *col };
            (arg, signed[arg], signed)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.partial_cmp(&a.1).unwrap()));

    let mut n = Mat6x3::zeros();
    for (j, (_, _, col)) in keyed.into_iter().enumerate() {
        n.set_column(j, &col);
    }
    Ok(n)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Unstretched length that realizes `tension` at the current `length`.
pub fn unstretched_for_tension(length: f64, tension: f64, params: &RobotParams) -> f64 {
    params.k_s * length / (params.k_s + tension)
}

/// Platform stiffness at a pose for a given tension vector. `l0` holds the
/// unstretched lengths of the position-controlled cables (entries 0, 1, 4,
/// 5); the force-controlled cables contribute no elastic part.
pub fn stiffness_matrices(
    geometry: &CableGeometry,
    t: &Vec6,
    params: &RobotParams,
    l0: &Vec6,
) -> Result<StiffnessDecomposition> {
    let mut k_t = Mat6::zeros();
    let mut k_k = Mat6::zeros();
    let mut k_c = Mat6::zeros();
    let eye = Matrix3::identity();

    for i in 0..CABLE_COUNT {
        let length = geometry.lengths[i];
        if length < crate::kinematics::DEGENERATE_CABLE_LENGTH {
            return Err(Error::DegenerateGeometry { cable: i, length });
        }
        let u = geometry.unit_vectors[i];
        let r = geometry.moment_arms[i];
        let uut = u * u.transpose();
        let perp = eye - uut;
        let rx = skew(&r);
        let rx_t = rx.transpose();
        let ux = skew(&u);

        let scale = t[i] / length;
        add_block(&mut k_t, 0, 0, &(scale * perp));
        add_block(&mut k_t, 0, 3, &(scale * perp * rx_t));
        add_block(&mut k_t, 3, 0, &(scale * rx * perp));
        // Rotating the moment arm under a held tension adds T [u x][r x]^T
        // to the rotational block; this is the exact pose derivative of the
        // wrench map.
        add_block(
            &mut k_t,
            3,
            3,
            &(scale * rx * perp * rx_t + t[i] * ux * rx_t),
        );

        if matches!(i, 0 | 1 | 4 | 5) {
            let rest = l0[i];
            if rest <= 0.0 {
                return Err(Error::DegenerateGeometry {
                    cable: i,
                    length: rest,
                });
            }
            let rate = params.k_s / rest;
            k_c[(i, i)] = rate;
            add_block(&mut k_k, 0, 0, &(rate * uut));
            add_block(&mut k_k, 0, 3, &(rate * uut * rx_t));
            add_block(&mut k_k, 3, 0, &(rate * rx * uut));
            add_block(&mut k_k, 3, 3, &(rate * rx * uut * rx_t));
        }
    }

    Ok(StiffnessDecomposition {
        k: k_t + k_k,
        k_t,
        k_k,
        k_c,
    })
}

fn add_block(target: &mut Mat6, row: usize, col: usize, block: &Matrix3<f64>) {
    let mut view = target.fixed_view_mut::<3, 3>(row, col);
    view += block;
}

/// Eliminates the first two free coefficients through the cable pairing
/// constraints `T1 - T2 = k1 (L1 - L2)` and `T5 - T6 = k5 (L5 - L6)`
/// (plain equality of each pair when the parallelogram constraints hold),
/// leaving the tension family as a line in `lambda3`.
pub fn lambda_reduction(
    t_a: &Vec6,
    n_a: &Mat6x3,
    geometry: &CableGeometry,
    params: &RobotParams,
    l0: &Vec6,
) -> Result<LambdaReduction> {
    let k1 = params.k_s / l0[0];
    let k5 = params.k_s / l0[4];
    let l = &geometry.lengths;

    let a1 = n_a[(0, 0)] - n_a[(1, 0)];
    let b1 = n_a[(0, 1)] - n_a[(1, 1)];
    let c1_const = k1 * (l[0] - l[1]) + t_a[1] - t_a[0];
    let c1_slope = n_a[(1, 2)] - n_a[(0, 2)];
    let a2 = n_a[(4, 0)] - n_a[(5, 0)];
    let b2 = n_a[(4, 1)] - n_a[(5, 1)];
    let c2_const = k5 * (l[4] - l[5]) + t_a[5] - t_a[4];
    let c2_slope = n_a[(5, 2)] - n_a[(4, 2)];

    let det = a1 * b2 - a2 * b1;
    if det.abs() < 1e-12 {
        return Err(Error::ConstraintDegeneracy(format!(
            "pairing constraints are linearly dependent in the kernel (det {det:.3e})"
        )));
    }

    let lam1_const = (b2 * c1_const - b1 * c2_const) / det;
    let lam1_slope = (b2 * c1_slope - b1 * c2_slope) / det;
    let lam2_const = (a1 * c2_const - a2 * c1_const) / det;
    let lam2_slope = (a1 * c2_slope - a2 * c1_slope) / det;

    let d_a = n_a * Vector3::new(lam1_slope, lam2_slope, 1.0);
    let e_a = t_a + n_a * Vector3::new(lam1_const, lam2_const, 0.0);

    Ok(LambdaReduction {
        d_a,
        e_a,
        a1,
        b1,
        a2,
        b2,
        c1_const,
        c1_slope,
        c2_const,
        c2_slope,
    })
}

/// Largest `lambda3` for which every tension stays inside
/// `[t_min, t_max]`, solved in closed form by intersecting the per-cable
/// intervals. Returns the maximizer and the corresponding tensions,
/// clamped onto the bounds to absorb rounding.
pub fn maximize_lambda3(reduction: &LambdaReduction, params: &RobotParams) -> Result<(f64, Vec6)> {
    let scale = reduction.d_a.abs().max().max(1.0);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut lo_idx = usize::MAX;
    let mut hi_idx = usize::MAX;
    let mut intervals = Vec::with_capacity(CABLE_COUNT);
    let mut dead = Vec::new();

    for i in 0..CABLE_COUNT {
        let d = reduction.d_a[i];
        let e = reduction.e_a[i];
        let (l, h) = if d.abs() <= 1e-13 * scale {
            if e < params.t_min - 1e-9 || e > params.t_max + 1e-9 {
                dead.push(i);
                (f64::INFINITY, f64::NEG_INFINITY)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        } else if d > 0.0 {
            ((params.t_min - e) / d, (params.t_max - e) / d)
        } else {
            ((params.t_max - e) / d, (params.t_min - e) / d)
        };
        intervals.push((l, h));
        if l > lo {
            lo = l;
            lo_idx = i;
        }
        if h < hi {
            hi = h;
            hi_idx = i;
        }
    }

    if !dead.is_empty() || lo > hi {
        let mut violating = dead;
        if lo_idx != usize::MAX {
            violating.push(lo_idx);
        }
        if hi_idx != usize::MAX {
            violating.push(hi_idx);
        }
        violating.sort_unstable();
        violating.dedup();
        return Err(Error::InfeasibleTension {
            violating,
            intervals,
        });
    }
    if !hi.is_finite() {
        return Err(Error::ConstraintDegeneracy(
            "tension line is unbounded above".to_string(),
        ));
    }

    let lambda3 = hi;
    let mut t = reduction.tension(lambda3);
    for i in 0..CABLE_COUNT {
        t[i] = t[i].clamp(params.t_min, params.t_max);
    }
    Ok((lambda3, t))
}

/// Full distribution at a pose: particular solution, kernel, pairing
/// reduction and the stiffness-maximizing pick. The current cable lengths
/// stand in for the unstretched lengths inside the reduction; the terms
/// they scale vanish whenever the parallelogram constraints hold.
///
/// The free coefficient is oriented so that larger values raise the total
/// tension; raising lambda3 then raises the tension-borne stiffness, which
/// is what maximizing it is for. Without the orientation the picked
/// endpoint of the feasible segment would depend on the arbitrary (and
/// pose-discontinuous) kernel basis realization.
pub fn distribute(
    geometry: &CableGeometry,
    w_m: &Vector3<f64>,
    params: &RobotParams,
) -> Result<RedundancySolution> {
    let a = &geometry.structure_matrix;
    let t_a = particular_solution(a, w_m)?;
    let mut n_a = null_basis(a)?;
    let mut reduction = lambda_reduction(&t_a, &n_a, geometry, params, &geometry.lengths)?;
    if reduction.d_a.sum() < 0.0 {
        let flipped = -n_a.column(2);
        n_a.set_column(2, &flipped);
        reduction = lambda_reduction(&t_a, &n_a, geometry, params, &geometry.lengths)?;
    }
    let (lambda3, t) = maximize_lambda3(&reduction, params)?;
    let (lambda1, lambda2) = reduction.lambda12(lambda3);
    Ok(RedundancySolution {
        t_a,
        n_a,
        lambda: Vector3::new(lambda1, lambda2, lambda3),
        t,
    })
}

/// Gravity-balancing distribution at a pose with an optional external
/// wrench on the platform.
pub fn optimize_static(
    q: &Vec5,
    params: &RobotParams,
    external: &Wrench,
) -> Result<RedundancySolution> {
    let geometry = crate::kinematics::cable_geometry(q, params)?;
    let w_m = static_wrench(q, params, external);
    distribute(&geometry, &w_m, params)
}
