use rayon::prelude::*;
use serde::Serialize;

use super::{log_log_fit, LabError, LogLogFit};
use crate::free_boundary::{Region, RegionDecomposition};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub radii: Vec<f64>,
    /// Per radius, the smallest positive fraction over free-boundary centres.
    pub min_fraction: Vec<f64>,
    pub argmin: Vec<usize>,
}

impl DensityReport {
    pub fn overall_min(&self) -> f64 {
        self.min_fraction.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PorosityReport {
    pub radii: Vec<f64>,
    pub sigma_per_radius: Vec<f64>,
    pub sigma: f64,
    pub box_sizes: Vec<f64>,
    pub box_counts: Vec<usize>,
    pub box_fit: Option<LogLogFit>,
    /// Box-counting dimension, `NaN` if the fit is degenerate.
    pub dimension: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub density: DensityReport,
    pub porosity: PorosityReport,
}

fn check_radii(radii: &[f64]) -> Result<(), LabError> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(LabError::BadRadii(format!("radii must be positive and finite: {radii:?}")));
    }
    Ok(())
}

/// Fraction of positivity nodes in grid balls around every free-boundary node.
pub fn density_scan(decomp: &RegionDecomposition, radii: &[f64]) -> Result<DensityReport, LabError> {
    check_radii(radii)?;
    let fb = decomp.free_boundary();
    if fb.is_empty() {
        return Err(LabError::EmptyFreeBoundary);
    }
    let grid = decomp.grid();
    let d = grid.dim();
    let mut min_fraction = Vec::with_capacity(radii.len());
    let mut argmin = Vec::with_capacity(radii.len());
    for &rho in radii {
        let (f, k) = fb
            .par_iter()
            .map(|&y| -> Result<(f64, usize), LabError> {
                let ball = grid.ball(&grid.coords(y)[..d], rho)?;
                let pos = ball
                    .iter()
                    .filter(|&&j| decomp.region(j) == Region::Positive)
                    .count();
                Ok((pos as f64 / ball.len() as f64, y))
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        min_fraction.push(f);
        argmin.push(k);
    }
    Ok(DensityReport {
        radii: radii.to_vec(),
        min_fraction,
        argmin,
    })
}

fn edt_1d(f: &[f64]) -> Vec<f64> {
    // Lower envelope of parabolas (Felzenszwalb–Huttenlocher).
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => return out,
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        *o = (q as f64 - p as f64).powi(2) + f[p];
    }
    out
}

/// Euclidean distance from every node to the nearest node of `set`
/// (`+∞` when `set` is empty).
pub fn distance_transform(grid: &Grid, set: &[usize]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut sq = vec![f64::INFINITY; grid.node_count()];
    for &k in set {
        sq[k] = 0.0;
    }
    for j in 0..ny {
        let row = edt_1d(&sq[j * nx..(j + 1) * nx]);
        sq[j * nx..(j + 1) * nx].copy_from_slice(&row);
    }
    if grid.dim() == 2 {
        for i in 0..nx {
            let col: Vec<f64> = (0..ny).map(|j| sq[i + j * nx]).collect();
            for (j, v) in edt_1d(&col).into_iter().enumerate() {
                sq[i + j * nx] = v;
            }
        }
    }
    let h = grid.h();
    sq.into_iter().map(|s| s.sqrt() * h).collect()
}

/// Box counts over dyadic sizes `2ᵏh`, `k ≥ 1`, up to an eighth of the
/// shortest side, and the log-log slope of count against inverse size.
pub fn box_dimension(grid: &Grid, nodes: &[usize]) -> (Vec<f64>, Vec<usize>, Option<LogLogFit>) {
    let h = grid.h();
    let extent = (0..grid.dim())
        .map(|a| grid.upper()[a] - grid.lower()[a])
        .fold(f64::INFINITY, f64::min);
    let mut sizes = Vec::new();
    let mut counts = Vec::new();
    let mut k = 1u32;
    while (1u64 << k) as f64 * h <= extent / 8.0 || sizes.len() < 4 {
        if (1u64 << k) as f64 * h > extent {
            break;
        }
        let mut boxes: Vec<(usize, usize)> = nodes
            .iter()
            .map(|&n| {
                let (i, j) = grid.ij(n);
                (i >> k, j >> k)
            })
            .collect();
        boxes.sort_unstable();
        boxes.dedup();
        sizes.push((1u64 << k) as f64 * h);
        counts.push(boxes.len());
        k += 1;
    }
    let inv: Vec<f64> = sizes.iter().map(|s| 1.0 / s).collect();
    let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fit = log_log_fit(&inv, &cf);
    (sizes, counts, fit)
}

/// Porosity along the segment towards the nearest positivity node, plus the
/// box-counting dimension of the free-boundary node set.
pub fn porosity_and_dimension(decomp: &RegionDecomposition, radii: &[f64]) -> Result<PorosityReport, LabError> {
    check_radii(radii)?;
    let fb = decomp.free_boundary();
    if fb.is_empty() {
        return Err(LabError::EmptyFreeBoundary);
    }
    let grid = decomp.grid();
    let h = grid.h();
    let dt = distance_transform(grid, &fb);
    let offs: &[(isize, isize)] = if grid.dim() == 1 {
        &[(-1, 0), (1, 0)]
    } else {
        &[(-1, 0), (1, 0), (0, -1), (0, 1)]
    };
    let witness = |x: usize, r: f64| -> f64 {
        let mut best = 0.0_f64;
        for &(di, dj) in offs {
            match grid.offset(x, di, dj) {
                Some(n) if decomp.region(n) == Region::Positive => {}
                _ => continue,
            }
            let steps = (r / h).floor() as isize;
            for s in 0..=steps {
                let Some(y) = grid.offset(x, di * s, dj * s) else {
                    break;
                };
                let t = s as f64 * h;
                best = best.max(dt[y].min(r - t));
            }
        }
        best / r
    };
    let sigma_per_radius: Vec<f64> = radii
        .iter()
        .map(|&r| {
            fb.par_iter()
                .map(|&x| witness(x, r))
                .reduce(|| f64::INFINITY, f64::min)
        })
        .collect();
    let sigma = sigma_per_radius.iter().copied().fold(f64::INFINITY, f64::min);
    let (box_sizes, box_counts, box_fit) = box_dimension(grid, &fb);
    Ok(PorosityReport {
        radii: radii.to_vec(),
        sigma_per_radius,
        sigma,
        box_sizes,
        box_counts,
        dimension: box_fit.map_or(f64::NAN, |f| f.slope),
        box_fit,
    })
}
