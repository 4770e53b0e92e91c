use mflq_ode::{integrate_backward_system, snapped_grid, MatrixPath};
use mflq_precommit::{layered_rhs, solve_riccati_pair, LyapunovTriple, PairData, RiccatiPair};
use mflq_types::linalg::{is_psd, min_eig, Mat};
use mflq_types::{hat, HatCoefficients, MflqError, PiecewiseGain, ProblemData, Result, TimeGrid};

/// Output of the recursion on one partition.
#[derive(Debug, Clone)]
pub struct DeltaEquilibrium {
    pub partition: TimeGrid,
    /// Shared s-grid; every partition node is a grid node.
    pub grid: Vec<f64>,
    /// Grid index of each partition node.
    pub nodes: Vec<usize>,
    pub gains: PiecewiseGain,
    /// `(P_k, P̂_k)` with their gains on interval `k`.
    pub pairs: Vec<RiccatiPair>,
    /// `tails[ℓ][j]`: the triple `(Γ̃_ℓ, Γ_ℓ, Γ̄_ℓ)` on interval `ℓ + 1 + j`.
    /// `Γ̃_ℓ` restarts from `Γ_ℓ` at the right end of every piece.
    pub tails: Vec<Vec<LyapunovTriple>>,
    /// `P̂_k(t_k)`: player k's value matrix.
    pub values: Vec<Mat>,
}

impl DeltaEquilibrium {
    pub fn players(&self) -> usize {
        self.pairs.len()
    }

    /// Grid slice of interval `k`.
    pub fn interval_grid(&self, k: usize) -> &[f64] {
        &self.grid[self.nodes[k]..=self.nodes[k + 1]]
    }

    /// Player `ℓ`'s triple on interval `k > ℓ`.
    pub fn tail(&self, l: usize, k: usize) -> &LyapunovTriple {
        &self.tails[l][k - l - 1]
    }

    /// Value of a player-`ℓ` path at grid index `i ≥ nodes[ℓ+1]`; at an
    /// interior node the piece to the right is used.
    fn piece_value(&self, l: usize, i: usize, pick: impl Fn(&LyapunovTriple) -> &MatrixPath) -> Mat {
        let k = self.interval_of_index(i);
        let k = k.max(l + 1);
        pick(self.tail(l, k)).values()[i - self.nodes[k]].clone()
    }

    /// Interval owning grid index `i` (the last interval for the end node).
    pub fn interval_of_index(&self, i: usize) -> usize {
        let n = self.players();
        (0..n).rev().find(|&k| self.nodes[k] <= i).unwrap_or(0).min(n - 1)
    }

    pub fn gamma(&self, l: usize, i: usize) -> Mat {
        self.piece_value(l, i, |t| &t.gamma)
    }

    pub fn gamma_bar(&self, l: usize, i: usize) -> Mat {
        self.piece_value(l, i, |t| &t.gamma_bar)
    }

    pub fn gamma_hat(&self, l: usize, i: usize) -> Mat {
        self.gamma(l, i) + self.gamma_bar(l, i)
    }

    /// Right value of `Γ̃_ℓ` at grid index `i`.
    pub fn gamma_tilde(&self, l: usize, i: usize) -> Mat {
        self.piece_value(l, i, |t| &t.gamma_tilde)
    }

    /// `(P_k, P̂_k)` at grid index `i` of interval `k`.
    pub fn p_at(&self, k: usize, i: usize) -> (&Mat, &Mat) {
        let j = i - self.nodes[k];
        (&self.pairs[k].p.values()[j], &self.pairs[k].p_hat.values()[j])
    }
}

/// Concatenated grid: each interval split into equal steps no longer than
/// `min(h, length/50)`.
pub fn game_grid(partition: &TimeGrid, h: f64) -> Result<Vec<f64>> {
    let mut grid = vec![0.0];
    for w in partition.nodes().windows(2) {
        let step = h.min((w[1] - w[0]) / 50.0);
        grid.extend_from_slice(&snapped_grid(w[0], w[1], step, &[])?[1..]);
    }
    Ok(grid)
}

pub fn build_delta_equilibrium(problem: &ProblemData, partition: &TimeGrid, h: f64) -> Result<DeltaEquilibrium> {
    build_delta_equilibrium_on(problem, partition, &game_grid(partition, h)?)
}

fn locate(grid: &[f64], x: f64) -> Option<usize> {
    let tol = 1e-12 * (1.0 + grid.last().copied().unwrap_or(0.0).abs());
    let k = grid.partition_point(|&g| g < x - tol);
    (k < grid.len() && (grid[k] - x).abs() <= tol).then_some(k)
}

fn name_player(e: MflqError, k: usize) -> MflqError {
    match e {
        MflqError::IllPosed { what, at, min_eig } => MflqError::IllPosed {
            what: format!("{what} (player {k})"),
            at,
            min_eig,
        },
        other => other,
    }
}

/// Run the recursion on a given s-grid containing the partition nodes.
pub fn build_delta_equilibrium_on(problem: &ProblemData, partition: &TimeGrid, grid: &[f64]) -> Result<DeltaEquilibrium> {
    let p = problem;
    p.check_shapes()?;
    if (partition.horizon() - p.horizon).abs() > 1e-12 * p.horizon.max(1.0) {
        return Err(MflqError::Config("partition horizon differs from the problem horizon".into()));
    }
    let tk = partition.nodes().to_vec();
    let nodes: Vec<usize> = tk
        .iter()
        .map(|&t| locate(grid, t).ok_or_else(|| MflqError::Config(format!("partition node {t} is not a grid node"))))
        .collect::<Result<_>>()?;
    if nodes[0] != 0 || *nodes.last().unwrap() != grid.len() - 1 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MflqError::Config("grid must span the partition with a step inside every interval".into()));
    }
    let nn = partition.intervals();
    let hc = hat(p);
    let mut pairs: Vec<Option<RiccatiPair>> = vec![None; nn];
    let mut tails: Vec<Vec<LyapunovTriple>> = vec![Vec::new(); nn];
    let mut values = vec![Mat::zeros(p.n, p.n); nn];

    for k in (0..nn).rev() {
        let sub = &grid[nodes[k]..=nodes[k + 1]];
        let (g, g_hat) = if k + 1 == nn {
            (p.g.eval(tk[k]), hc.g.eval(tk[k]))
        } else {
            let next = tails[k].last().unwrap();
            let gm = next.gamma.first().clone();
            let gh = &gm + next.gamma_bar.first();
            (gm, gh)
        };
        if !is_psd(&g) || !is_psd(&g_hat) {
            return Err(MflqError::Invariant(format!(
                "stitched terminal of player {k} at s={} is not ⪰ 0 (min eigenvalues {:e}, {:e})",
                tk[k + 1],
                min_eig(&g),
                min_eig(&g_hat)
            )));
        }
        let mut data = PairData::from_problem(p, tk[k]);
        data.g = g;
        data.g_hat = g_hat;
        let pair = solve_riccati_pair(&data, sub).map_err(|e| name_player(e, k))?;
        values[k] = pair.p_hat.first().clone();

        if k > 0 {
            let terminal: Vec<Mat> = (0..k)
                .flat_map(|l| {
                    if k + 1 == nn {
                        let gl = p.g.eval(tk[l]);
                        vec![gl.clone(), gl, p.g_bar.eval(tk[l])]
                    } else {
                        let next = tails[l].last().unwrap();
                        let gm = next.gamma.first().clone();
                        vec![gm.clone(), gm, next.gamma_bar.first().clone()]
                    }
                })
                .collect();
            let sym = vec![true; 3 * k];
            let weight_times = &tk[..k];
            let paths = integrate_backward_system(
                sub,
                terminal,
                |s, v| triple_rhs(p, &hc, &pair, k, weight_times, s, v),
                &sym,
                None,
            )?;
            let mut it = paths.into_iter();
            for tail in tails.iter_mut().take(k) {
                tail.push(LyapunovTriple {
                    gamma_tilde: it.next().unwrap(),
                    gamma: it.next().unwrap(),
                    gamma_bar: it.next().unwrap(),
                });
            }
        }
        pairs[k] = Some(pair);
    }
    for t in tails.iter_mut() {
        t.reverse();
    }
    let pairs: Vec<RiccatiPair> = pairs.into_iter().map(Option::unwrap).collect();
    let (theta, theta_hat): (Vec<_>, Vec<_>) = pairs.iter().map(|pr| pr.gain_fns()).unzip();
    Ok(DeltaEquilibrium {
        gains: PiecewiseGain::new(partition.clone(), theta, theta_hat)?,
        partition: partition.clone(),
        grid: grid.to_vec(),
        nodes,
        pairs,
        tails,
        values,
    })
}

/// Triple right-hand sides on interval `k` for evaluators with weights frozen
/// at each of `weight_times`, under the pair-`k` gains.
fn triple_rhs(
    p: &ProblemData,
    hc: &HatCoefficients,
    pair: &RiccatiPair,
    k: usize,
    weight_times: &[f64],
    s: f64,
    v: &[Mat],
) -> Result<Vec<Mat>> {
    let (th, th_hat) = pair.gains_at(s).map_err(|e| name_player(e, k))?;
    let (a, b, c, d) = (p.a.eval(s), p.b.eval(s), p.c.eval(s), p.d.eval(s));
    let (ah, bh, ch, dh) = (hc.a.eval(s), hc.b.eval(s), hc.c.eval(s), hc.d.eval(s));
    let acl = &a - &b * &th;
    let ccl = &c - &d * &th;
    let a_bar = &ah - &bh * &th_hat - &acl;
    let c_bar = &ch - &dh * &th_hat - &ccl;
    let tht = th.transpose();
    let thht = th_hat.transpose();
    let mut out = Vec::with_capacity(3 * weight_times.len());
    for (l, &t) in weight_times.iter().enumerate() {
        let r = p.r.eval(s, t);
        let own = &tht * &r * &th;
        let q = p.q.eval(s, t) + &own;
        let q_tilde = &thht * &r * &th_hat - &own;
        let q_bar = p.q_bar.eval(s, t) + &thht * p.r_bar.eval(s, t) * &th_hat;
        out.extend(layered_rhs(&acl, &a_bar, &ccl, &c_bar, &q, &q_tilde, &q_bar, &v[3 * l..3 * l + 3]));
    }
    Ok(out)
}

/// Player `k`'s triple continued back over its own interval under the
/// equilibrium gains, i.e. the cost of a passive evaluator with weights
/// frozen at `t_k`. The terminal is the tail at `t_{k+1}` (or `G(t_k)`,
/// `Ḡ(t_k)` for the last player).
pub fn own_interval_triple(problem: &ProblemData, eq: &DeltaEquilibrium, k: usize) -> Result<LyapunovTriple> {
    let p = problem;
    let nn = eq.players();
    let tk = eq.partition.nodes()[k];
    let terminal = if k + 1 == nn {
        let g = p.g.eval(tk);
        vec![g.clone(), g, p.g_bar.eval(tk)]
    } else {
        let j = eq.nodes[k + 1];
        let g = eq.gamma(k, j);
        vec![g.clone(), g, eq.gamma_bar(k, j)]
    };
    let hc = hat(p);
    let pair = &eq.pairs[k];
    let mut it = integrate_backward_system(
        eq.interval_grid(k),
        terminal,
        |s, v| triple_rhs(p, &hc, pair, k, &[tk], s, v),
        &[true; 3],
        None,
    )?
    .into_iter();
    Ok(LyapunovTriple {
        gamma_tilde: it.next().unwrap(),
        gamma: it.next().unwrap(),
        gamma_bar: it.next().unwrap(),
    })
}
