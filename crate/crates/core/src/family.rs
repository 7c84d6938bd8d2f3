//! Disk families over the parameter space S^2 x R: a structured grid of
//! solved disks (two lambda charts x uniform t), built by warm-start
//! continuation with a row-wavefront sweep, queryable by interpolation.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cp1::{Chart, PointCP1};
use crate::embedding::EmbeddingN;
use crate::error::SolveError;
use crate::fourier::{FourierSeries, ThetaGrid};
use crate::solver::{solve_disk, DiskSolution, SolvedDisk, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Nodes per axis of the square lambda grid, per chart.
    pub lambda_resolution: usize,
    /// Half-width of the chart box; > 1 so the two charts overlap.
    pub lambda_extent: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_resolution: 14,
            lambda_extent: 1.05,
            t_min: -3.0,
            t_max: 3.0,
            t_resolution: 13,
        }
    }
}

impl GridSpec {
    pub fn lambda_value(&self, i: usize, j: usize) -> C64 {
        let n = self.lambda_resolution;
        let step = if n > 1 {
            2.0 * self.lambda_extent / (n - 1) as f64
        } else {
            0.0
        };
        C64::new(
            -self.lambda_extent + step * i as f64,
            -self.lambda_extent + step * j as f64,
        )
    }

    pub fn lambda_node(&self, chart: Chart, i: usize, j: usize) -> PointCP1 {
        PointCP1 {
            chart,
            value: self.lambda_value(i, j),
        }
    }

    pub fn t_value(&self, k: usize) -> f64 {
        if self.t_resolution > 1 {
            self.t_min + (self.t_max - self.t_min) * k as f64 / (self.t_resolution - 1) as f64
        } else {
            self.t_min
        }
    }

    pub fn node_count(&self) -> usize {
        2 * self.lambda_resolution * self.lambda_resolution * self.t_resolution
    }

    /// Flat index: chart-major, then t, then lambda row i, then column j.
    pub fn index(&self, chart: usize, k: usize, i: usize, j: usize) -> usize {
        let n = self.lambda_resolution;
        ((chart * self.t_resolution + k) * n + i) * n + j
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskFamily {
    pub grid: GridSpec,
    pub embedding: EmbeddingN,
    pub solver: SolverConfig,
    pub solutions: Vec<DiskSolution>,
    /// Worst boundary-on-N residual over all nodes.
    pub max_residual_on_n: f64,
    /// Worst warm-start jump ||u - u_seed|| between neighboring nodes.
    pub max_continuation_jump: f64,
    /// Worst Newton iteration count over all nodes.
    pub max_newton_iters: usize,
}

struct NodeResult {
    idx: usize,
    sol: DiskSolution,
    jump: f64,
}

/// Builds the family by a serpentine sweep in t, with each lambda row of a
/// slice solved in parallel once its seed row is done (wavefront contract).
pub fn build_family(
    emb: &EmbeddingN,
    cfg: &SolverConfig,
    grid_spec: &GridSpec,
) -> Result<DiskFamily, SolveError> {
    emb.validate(cfg.epsilon_max)?;
    let grid = ThetaGrid::new(cfg.m_modes);
    let n = grid_spec.lambda_resolution;
    let nt = grid_spec.t_resolution;
    let mut solutions: Vec<Option<DiskSolution>> = vec![None; grid_spec.node_count()];
    let mut max_jump = 0.0f64;
    let mut failures: Vec<(usize, Chart, usize, usize, usize)> = Vec::new();

    for (ci, chart) in [Chart::Zero, Chart::One].into_iter().enumerate() {
        // t sweep from the middle outward keeps the warm starts close to the
        // standard regime on both ends.
        let mid = nt / 2;
        let order: Vec<usize> = (0..nt).map(|s| {
            // 0 -> mid, then alternate mid+1, mid-1, mid+2, ...
            if s == 0 {
                mid
            } else if s % 2 == 1 {
                mid + s.div_ceil(2)
            } else {
                mid - s / 2
            }
        })
        .filter(|&k| k < nt)
        .collect();
        let mut prev_slice: Option<usize> = None;
        for &k in &order {
            // row 0 serially, seeded from the previous slice or left neighbor
            for i in 0..n {
                if i > 0 {
                    continue;
                }
                for j in 0..n {
                    let idx = grid_spec.index(ci, k, i, j);
                    let seed = if let Some(pk) = prev_slice {
                        solutions[grid_spec.index(ci, pk, i, j)]
                            .as_ref()
                            .map(|s| s.u.clone())
                    } else if j > 0 {
                        solutions[grid_spec.index(ci, k, i, j - 1)]
                            .as_ref()
                            .map(|s| s.u.clone())
                    } else {
                        None
                    };
                    let lambda = grid_spec.lambda_node(chart, i, j);
                    match solve_disk(emb, &grid, cfg, lambda, grid_spec.t_value(k), seed.as_ref()) {
                        Ok(sol) => {
                            let jump = seed
                                .map(|s| diff_norm(&s, &sol.u))
                                .unwrap_or(sol.u.norm());
                            max_jump = max_jump.max(jump);
                            solutions[idx] = Some(sol.to_solution());
                        }
                        Err(_) => failures.push((idx, chart, k, i, j)),
                    }
                }
            }
            // remaining rows: row i seeded from row i-1, columns in parallel
            for i in 1..n {
                let seeds: Vec<Option<FourierSeries>> = (0..n)
                    .map(|j| {
                        solutions[grid_spec.index(ci, k, i - 1, j)]
                            .as_ref()
                            .map(|s| s.u.clone())
                    })
                    .collect();
                let row: Vec<Result<NodeResult, (usize, Chart, usize, usize, usize)>> = (0..n)
                    .into_par_iter()
                    .map(|j| {
                        let idx = grid_spec.index(ci, k, i, j);
                        let lambda = grid_spec.lambda_node(chart, i, j);
                        let seed = seeds[j].as_ref();
                        match solve_disk(emb, &grid, cfg, lambda, grid_spec.t_value(k), seed) {
                            Ok(sol) => Ok(NodeResult {
                                idx,
                                jump: seed
                                    .map(|s| diff_norm(s, &sol.u))
                                    .unwrap_or(sol.u.norm()),
                                sol: sol.to_solution(),
                            }),
                            Err(_) => Err((idx, chart, k, i, j)),
                        }
                    })
                    .collect();
                for r in row {
                    match r {
                        Ok(nr) => {
                            max_jump = max_jump.max(nr.jump);
                            solutions[nr.idx] = Some(nr.sol);
                        }
                        Err(f) => failures.push(f),
                    }
                }
            }
            prev_slice = Some(k);
        }
    }

    // one retry pass for the frontier, seeded from any converged neighbor
    let mut still_failing = Vec::new();
    for (idx, chart, k, i, j) in failures {
        let mut seed = None;
        for (di, dj) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni >= 0 && nj >= 0 && (ni as usize) < n && (nj as usize) < n {
                let ci = if chart == Chart::Zero { 0 } else { 1 };
                if let Some(s) = &solutions[grid_spec.index(ci, k, ni as usize, nj as usize)] {
                    seed = Some(s.u.clone());
                    break;
                }
            }
        }
        let lambda = grid_spec.lambda_node(chart, i, j);
        match solve_disk(emb, &grid, cfg, lambda, grid_spec.t_value(k), seed.as_ref()) {
            Ok(sol) => solutions[idx] = Some(sol.to_solution()),
            Err(e) => still_failing.push(((chart, k, i, j), e)),
        }
    }
    if let Some(((chart, k, i, j), e)) = still_failing.into_iter().next() {
        return Err(SolveError::FamilyFrontier(
            1,
            format!("chart {chart:?}, t index {k}, lambda index ({i},{j}): {e}"),
        ));
    }

    let solutions: Vec<DiskSolution> = solutions.into_iter().map(|s| s.unwrap()).collect();
    let max_residual_on_n = solutions
        .iter()
        .map(|s| s.residual_on_n)
        .fold(0.0, f64::max);
    let max_newton_iters = solutions.iter().map(|s| s.newton_iters).max().unwrap_or(0);
    Ok(DiskFamily {
        grid: grid_spec.clone(),
        embedding: emb.clone(),
        solver: cfg.clone(),
        solutions,
        max_residual_on_n,
        max_continuation_jump: max_jump,
        max_newton_iters,
    })
}

fn diff_norm(a: &FourierSeries, b: &FourierSeries) -> f64 {
    let m = a.m_modes.max(b.m_modes) as i64;
    (-m..=m)
        .map(|l| (a.coeff(l) - b.coeff(l)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

impl DiskFamily {
    pub fn node(&self, chart: usize, k: usize, i: usize, j: usize) -> &DiskSolution {
        &self.solutions[self.grid.index(chart, k, i, j)]
    }

    /// Re-solves a stored node into a full operator state (one warm Newton
    /// verification pass).
    pub fn resolve_node<'a>(
        &'a self,
        grid: &'a ThetaGrid,
        chart: usize,
        k: usize,
        i: usize,
        j: usize,
    ) -> Result<SolvedDisk<'a>, SolveError> {
        let sol = self.node(chart, k, i, j);
        solve_disk(
            &self.embedding,
            grid,
            &self.solver,
            sol.lambda,
            sol.t,
            Some(&sol.u),
        )
    }

    /// Queries the family off-grid: trilinear interpolation of the stored u
    /// coefficients in (Re lambda, Im lambda, t), then a Newton polish.
    pub fn query<'a>(
        &'a self,
        grid: &'a ThetaGrid,
        lambda: PointCP1,
        t: f64,
    ) -> Result<SolvedDisk<'a>, SolveError> {
        let spec = &self.grid;
        let n = spec.lambda_resolution;
        let chart_idx = match lambda.chart {
            Chart::Zero => 0usize,
            Chart::One => 1,
        };
        let step = 2.0 * spec.lambda_extent / (n - 1) as f64;
        let fx = ((lambda.value.re + spec.lambda_extent) / step)
            .clamp(0.0, (n - 1) as f64 - 1e-9);
        let fy = ((lambda.value.im + spec.lambda_extent) / step)
            .clamp(0.0, (n - 1) as f64 - 1e-9);
        let tstep = (spec.t_max - spec.t_min) / (spec.t_resolution - 1) as f64;
        let ft = ((t - spec.t_min) / tstep).clamp(0.0, (spec.t_resolution - 1) as f64 - 1e-9);
        let (i0, j0, k0) = (fx as usize, fy as usize, ft as usize);
        let (wx, wy, wt) = (fx - i0 as f64, fy - j0 as f64, ft - k0 as f64);

        let m = self.solver.m_modes;
        let mut u = FourierSeries::zero(m);
        for (di, wi) in [(0usize, 1.0 - wx), (1, wx)] {
            for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                for (dk, wk) in [(0usize, 1.0 - wt), (1, wt)] {
                    let w = wi * wj * wk;
                    if w == 0.0 {
                        continue;
                    }
                    let s = self.node(chart_idx, k0 + dk, i0 + di, j0 + dj);
                    for l in -(m as i64)..=(m as i64) {
                        let v = u.coeff(l) + w * s.u.coeff(l);
                        u.set_coeff(l, v);
                    }
                }
            }
        }
        solve_disk(&self.embedding, grid, &self.solver, lambda, t, Some(&u))
    }
}
