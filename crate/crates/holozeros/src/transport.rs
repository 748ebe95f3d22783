//! Discretized Wasserstein-1 distance between measures on grid cells, with
//! the quotient distance between cell centres as ground cost.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::GridMeasure;
use crate::torus::Torus;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Pairwise quotient distances between the cell centres of a grid.
#[derive(Clone, Debug)]
pub struct CellDistances {
    pub grid: Grid,
    d: Vec<f64>,
}

impl CellDistances {
    pub fn new(torus: &Torus, grid: Grid) -> Self {
        let m = grid.len();
        let centers: Vec<_> = (0..m).map(|k| grid.center(torus, k)).collect();
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..i {
                let v = torus.dist(centers[i], centers[j]);
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        Self { grid, d }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.grid.len() + j]
    }

    /// `W1(μ, ν)`.
    pub fn w1(&self, mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
        transport_cost(&mu.weights, &nu.weights, |i, j| self.get(i, j))
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on the distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

const EPS: f64 = 1e-14;

/// Minimal cost of moving `supply` onto `demand` (equal total masses) with
/// non-negative ground cost `cost(i, j)`, by successive shortest augmenting
/// paths with Dijkstra on reduced costs.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let sa: f64 = supply.iter().sum();
    let sb: f64 = demand.iter().sum();
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::InvalidInput(format!(
            "transport between unequal masses {sa} and {sb}"
        )));
    }
    let src: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > EPS).collect();
    let snk: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > EPS).collect();
    let (m, k) = (src.len(), snk.len());
    if m == 0 || k == 0 {
        return Ok(0.0);
    }
    let c: Vec<f64> = src
        .iter()
        .flat_map(|&i| snk.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .collect();
    let mut left: Vec<f64> = src.iter().map(|&i| supply[i]).collect();
    let mut need: Vec<f64> = snk.iter().map(|&j| demand[j]).collect();
    // the last unit of mass may be slightly unbalanced by rounding
    let scale = sa / sb;
    need.iter_mut().for_each(|v| *v *= scale);
    let mut flow = vec![0.0; m * k];
    let mut pot = vec![0.0; m + k];
    let mut dist = vec![f64::INFINITY; m + k];
    let mut prev = vec![usize::MAX; m + k];
    let mut done = vec![false; m + k];
    let total = sa;
    let mut moved = 0.0;
    for _ in 0..(4 * (m + k) * (m + k) + 16) {
        if total - moved <= 1e-13 * total {
            break;
        }
        dist.iter_mut().for_each(|v| *v = f64::INFINITY);
        prev.iter_mut().for_each(|v| *v = usize::MAX);
        done.iter_mut().for_each(|v| *v = false);
        let mut heap = BinaryHeap::new();
        for i in 0..m {
            if left[i] > EPS {
                dist[i] = 0.0;
                heap.push(Entry(0.0, i));
            }
        }
        let mut target = None;
        while let Some(Entry(d, v)) = heap.pop() {
            if done[v] || d > dist[v] {
                continue;
            }
            done[v] = true;
            if v < m {
                for j in 0..k {
                    let w = m + j;
                    let nd = d + (c[v * k + j] + pot[v] - pot[w]).max(0.0);
                    if nd < dist[w] {
                        dist[w] = nd;
                        prev[w] = v;
                        heap.push(Entry(nd, w));
                    }
                }
            } else {
                let j = v - m;
                if need[j] > EPS {
                    target = Some(j);
                    break;
                }
                for i in 0..m {
                    if flow[i * k + j] > EPS {
                        let nd = d + (-c[i * k + j] + pot[v] - pot[i]).max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = v;
                            heap.push(Entry(nd, i));
                        }
                    }
                }
            }
        }
        let Some(jt) = target else {
            return Err(Error::NoConvergence("no augmenting path in transport problem".into()));
        };
        let dt = dist[m + jt];
        for v in 0..m + k {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut delta = need[jt];
        let mut v = m + jt;
        loop {
            let u = prev[v];
            if v >= m {
                // forward edge u -> v, unbounded
                v = u;
            } else if u == usize::MAX {
                delta = delta.min(left[v]);
                break;
            } else {
                let j = u - m;
                delta = delta.min(flow[v * k + j]);
                v = u;
            }
        }
        let mut v = m + jt;
        loop {
            let u = prev[v];
            if v >= m {
                flow[u * k + (v - m)] += delta;
                v = u;
            } else if u == usize::MAX {
                left[v] -= delta;
                break;
            } else {
                flow[v * k + (u - m)] -= delta;
                v = u;
            }
        }
        need[jt] -= delta;
        moved += delta;
    }
    if total - moved > 1e-9 * total {
        return Err(Error::NoConvergence("transport problem did not finish".into()));
    }
    Ok(flow.iter().zip(&c).map(|(f, c)| f * c).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses_move_by_their_distance() {
        let t = Torus::square();
        let g = Grid::new(8);
        let d = CellDistances::new(&t, g);
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        a[g.index(0, 0)] = 1.0;
        b[g.index(7, 2)] = 1.0;
        let mu = GridMeasure::new(g, a).unwrap();
        let nu = GridMeasure::new(g, b).unwrap();
        let expected = (1.0f64 / 64.0 + 4.0 / 64.0).sqrt();
        assert!((d.w1(&mu, &nu).unwrap() - expected).abs() < 1e-14);
        assert_eq!(d.w1(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn small_assignment() {
        // 2x2 assignment with the crossing being cheaper
        let cost = [[4.0, 1.0], [1.0, 4.0]];
        let v = transport_cost(&[0.5, 0.5], &[0.5, 0.5], |i, j| cost[i][j]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }
}
