use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::partial_lips;
use crate::cubes::{build_cubes, partition_of_unity, CubePartition, PartitionOfUnity};
use crate::error::{Error, Result};
use crate::products::ProductSpace;

use super::{l2, loglog_slope};

/// Cube averages `f_{k,i}(x) = ⨍_{Q_i} f(x, t) dμ_Y(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeAverages {
    pub k: f64,
    /// `values[i][x]`.
    pub values: Vec<Vec<f64>>,
    pub cube_mass: Vec<f64>,
    /// `max_i ‖f_{k,i}‖² μ_Y(Q_i) / ‖f‖²`; at most 1 by Jensen.
    pub jensen_ratio: f64,
    pub jensen_holds: bool,
}

fn check_on_base(product: &ProductSpace, partition: &CubePartition) -> Result<()> {
    if partition.assignment.len() != product.y().len() {
        return Err(Error::LengthMismatch { expected: product.y().len(), got: partition.assignment.len() });
    }
    Ok(())
}

/// Cartesian pair measure `μ_X(x) μ_Y(t)`.
fn flat_measure(product: &ProductSpace) -> Vec<f64> {
    let (mx, my) = (product.x().measure(), product.y().measure());
    let ny = my.len();
    (0..product.pair_count()).map(|p| mx[p / ny] * my[p % ny]).collect()
}

pub fn cube_average(product: &ProductSpace, f: &[f64], partition: &CubePartition) -> Result<CubeAverages> {
    check_on_base(product, partition)?;
    let (nx, ny) = (product.x().len(), product.y().len());
    let my = product.y().measure();
    let members = partition.members();
    let cube_mass: Vec<f64> = members.iter().map(|m| m.iter().map(|&t| my[t]).sum()).collect();
    if let Some(i) = cube_mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!("cube {i} has no mass")));
    }
    let values: Vec<Vec<f64>> = members
        .par_iter()
        .zip(&cube_mass)
        .map(|(m, &mass)| (0..nx).map(|x| m.iter().map(|&t| my[t] * f[x * ny + t]).sum::<f64>() / mass).collect())
        .collect();
    let total = l2(f, &flat_measure(product)).powi(2);
    let mx = product.x().measure();
    let jensen_ratio = if total > 0.0 {
        values.iter().zip(&cube_mass).map(|(v, &mass)| l2(v, mx).powi(2) * mass / total).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(CubeAverages { k: partition.k, values, cube_mass, jensen_ratio, jensen_holds: jensen_ratio <= 1.0 + 1e-12 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothed {
    pub values: Vec<f64>,
    /// Most cubes contributing at one point.
    pub max_terms: usize,
    /// `‖F_k‖ / ‖f‖` in `L²(μ_X × μ_Y)`.
    pub operator_ratio: f64,
}

/// `F_k(x, t) = Σ_i χ_i(t) f_{k,i}(x)`.
pub fn smooth(
    product: &ProductSpace,
    f: &[f64],
    partition: &CubePartition,
    pou: &PartitionOfUnity,
) -> Result<(Smoothed, CubeAverages)> {
    let avg = cube_average(product, f, partition)?;
    let ny = product.y().len();
    let values: Vec<f64> = (0..product.pair_count())
        .into_par_iter()
        .map(|p| {
            let (x, t) = (p / ny, p % ny);
            pou.weights[t].iter().map(|&(i, chi)| chi * avg.values[i][x]).sum()
        })
        .collect();
    let mu = flat_measure(product);
    let nf = l2(f, &mu);
    let operator_ratio = if nf > 0.0 { l2(&values, &mu) / nf } else { 0.0 };
    Ok((Smoothed { values, max_terms: pou.max_terms(), operator_ratio }, avg))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: f64,
    pub l2_error: f64,
    pub x_energy: f64,
    pub y_energy: f64,
    pub ref_x_energy: f64,
    pub ref_y_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of the L² error against `k`.
    pub slope: Option<f64>,
    /// `x_energy / ref_x_energy` per row.
    pub x_energy_ratio: Vec<f64>,
    /// `y_energy / ref_y_energy` per row.
    pub y_energy_ratio: Vec<f64>,
    /// `max y_energy_ratio`: the single constant across `k`.
    pub y_energy_constant: f64,
    /// Largest `ln(max(r', 1) / max(r, 1)) / ln(k' / k)` over consecutive rows.
    pub y_growth_exponent: f64,
    /// `y_growth_exponent <= 0.5`; an estimate without the Poincaré step grows like `k²`.
    pub y_energy_uniform: bool,
    pub c1: Vec<f64>,
    pub operator_ratio: Vec<f64>,
    pub max_terms: Vec<usize>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "k,l2_error,x_energy,y_energy,ref_x_energy,ref_y_energy";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.k, r.l2_error, r.x_energy, r.y_energy, r.ref_x_energy, r.ref_y_energy
            )?;
        }
        Ok(())
    }
}

fn energies(product: &ProductSpace, f: &[f64], mu: &[f64]) -> (f64, f64) {
    let lips = partial_lips(product, f);
    (l2(&lips.x, mu).powi(2), l2(&lips.y, mu).powi(2))
}

/// L² error and partial energies of `F_k` for each `k`.
pub fn convergence_experiment(product: &ProductSpace, f: &[f64], ks: &[f64]) -> Result<ConvergenceTable> {
    if ks.is_empty() {
        return Err(Error::InvalidArgument("k list is empty".into()));
    }
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("k values must increase strictly".into()));
    }
    let mu = flat_measure(product);
    let (ref_x, ref_y) = energies(product, f, &mu);
    let mut table = ConvergenceTable {
        rows: Vec::new(),
        slope: None,
        x_energy_ratio: Vec::new(),
        y_energy_ratio: Vec::new(),
        y_energy_constant: 0.0,
        y_growth_exponent: 0.0,
        y_energy_uniform: true,
        c1: Vec::new(),
        operator_ratio: Vec::new(),
        max_terms: Vec::new(),
    };
    for &k in ks {
        let partition = build_cubes(product.y(), k)?;
        let pou = partition_of_unity(product.y(), &partition)?;
        let (sm, _) = smooth(product, f, &partition, &pou)?;
        let diff: Vec<f64> = sm.values.iter().zip(f).map(|(a, b)| a - b).collect();
        let (ex, ey) = energies(product, &sm.values, &mu);
        table.rows.push(ConvergenceRow {
            k,
            l2_error: l2(&diff, &mu),
            x_energy: ex,
            y_energy: ey,
            ref_x_energy: ref_x,
            ref_y_energy: ref_y,
        });
        let ratio = |a: f64, b: f64| {
            if b > 0.0 {
                a / b
            } else if a > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        table.x_energy_ratio.push(ratio(ex, ref_x));
        table.y_energy_ratio.push(ratio(ey, ref_y));
        table.c1.push(pou.c1);
        table.operator_ratio.push(sm.operator_ratio);
        table.max_terms.push(sm.max_terms);
    }
    let kv: Vec<f64> = table.rows.iter().map(|r| r.k).collect();
    let ev: Vec<f64> = table.rows.iter().map(|r| r.l2_error).collect();
    table.slope = loglog_slope(&kv, &ev);
    table.y_energy_constant = table.y_energy_ratio.iter().copied().fold(0.0, f64::max);
    table.y_growth_exponent = kv
        .windows(2)
        .zip(table.y_energy_ratio.windows(2))
        .map(|(k, r)| (r[1].max(1.0) / r[0].max(1.0)).ln() / (k[1] / k[0]).ln())
        .fold(0.0, f64::max);
    table.y_energy_uniform = table.y_growth_exponent <= 0.5;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborDifferenceReport {
    /// `max 2 (μ(B)/μ(Q_i) + μ(B)/μ(Q_j))` over neighbor pairs.
    pub c: f64,
    pub pairs: usize,
    pub checked: usize,
    pub violations: usize,
    /// `max |f_i - f_j|² / (c ⨍_B |f - f_B|²)`.
    pub max_ratio: f64,
    pub holds: bool,
}

/// `|f_{k,i}(x) - f_{k,j}(x)|² <= c ⨍_{B_j} |f(x, ·) - f_{B_j}(x)|²` for neighbors,
/// with `B_j = B(t_j, 6/k)`.
pub fn neighbor_difference_check(
    product: &ProductSpace,
    f: &[f64],
    partition: &CubePartition,
    avg: &CubeAverages,
) -> Result<NeighborDifferenceReport> {
    check_on_base(product, partition)?;
    let (ys, nx, ny) = (product.y(), product.x().len(), product.y().len());
    let my = ys.measure();
    let k = partition.k;
    let balls: Vec<Vec<usize>> = partition.centers.iter().map(|&c| ys.ball(c, 6.0 / k)).collect();
    let ball_mass: Vec<f64> = balls.iter().map(|b| b.iter().map(|&t| my[t]).sum()).collect();
    let mut pairs = Vec::new();
    let mut c: f64 = 0.0;
    for (i, nb) in partition.neighbors.iter().enumerate() {
        for &j in nb {
            pairs.push((i, j));
            c = c.max(2.0 * (ball_mass[j] / avg.cube_mass[i] + ball_mass[j] / avg.cube_mass[j]));
        }
    }
    let per_pair: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
            for x in 0..nx {
                let fb = balls[j].iter().map(|&t| my[t] * f[x * ny + t]).sum::<f64>() / ball_mass[j];
                let var = balls[j].iter().map(|&t| my[t] * (f[x * ny + t] - fb).powi(2)).sum::<f64>() / ball_mass[j];
                let lhs = (avg.values[i][x] - avg.values[j][x]).powi(2);
                let rhs = c * var;
                checked += 1;
                if lhs > rhs + 1e-12 * (1.0 + rhs) {
                    violations += 1;
                }
                if rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                }
            }
            (checked, violations, worst)
        })
        .collect();
    let checked = per_pair.iter().map(|p| p.0).sum();
    let violations = per_pair.iter().map(|p| p.1).sum();
    let max_ratio = per_pair.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(NeighborDifferenceReport { c, pairs: pairs.len(), checked, violations, max_ratio, holds: violations == 0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub samples: usize,
    pub max_residual: f64,
    pub holds: bool,
}

/// `F(x,t) - F(x,s) = Σ_{i≠j} (χ_i(t) - χ_i(s)) (f_i(x) - f_j(x))` at random `(x, t, s, j)`.
pub fn telescoping_check(
    product: &ProductSpace,
    smoothed: &[f64],
    pou: &PartitionOfUnity,
    avg: &CubeAverages,
    samples: usize,
    seed: u64,
    tol: f64,
) -> TelescopingReport {
    let (nx, ny) = (product.x().len(), product.y().len());
    let cubes = avg.values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    let chi = |t: usize, i: usize| pou.weights[t].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1);
    for _ in 0..samples {
        let (x, t, s, j) =
            (rng.random_range(0..nx), rng.random_range(0..ny), rng.random_range(0..ny), rng.random_range(0..cubes));
        let lhs = smoothed[x * ny + t] - smoothed[x * ny + s];
        let mut support: Vec<usize> = pou.weights[t].iter().chain(&pou.weights[s]).map(|e| e.0).collect();
        support.sort_unstable();
        support.dedup();
        let rhs: f64 = support
            .iter()
            .filter(|&&i| i != j)
            .map(|&i| (chi(t, i) - chi(s, i)) * (avg.values[i][x] - avg.values[j][x]))
            .sum();
        let scale = 1.0 + smoothed[x * ny + t].abs() + smoothed[x * ny + s].abs();
        max_residual = max_residual.max((lhs - rhs).abs() / scale);
    }
    TelescopingReport { samples, max_residual, holds: max_residual <= tol }
}
