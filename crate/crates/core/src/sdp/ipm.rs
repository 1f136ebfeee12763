//! Infeasible-start primal-dual path following (HKM direction, Mehrotra
//! predictor-corrector).
//!
//! The inequality-form problem is read as the dual of a standard-form SDP:
//! `C = F₀`, `Aᵢ = −Fᵢ`, `b = c`, so `S = C − Σ yᵢAᵢ = F(y)` and the
//! primal variable `X` is the dual certificate `Z`. Blocks of order 1 and
//! the box are handled as a diagonal (linear) part.

use crate::error::Result;
use crate::linalg::decomp::LuFactor;
use crate::linalg::{sym_eigen, Matrix, SymMatrix};

use super::{SdpProblem, SdpResult, SdpSettings, SdpStatus};

struct MatBlock {
    user: usize,
    c: Matrix,
    a: Vec<(usize, Matrix)>,
}

struct LinRow {
    user: Option<usize>,
    c: f64,
    a: Vec<(usize, f64)>,
}

struct State {
    y: Vec<f64>,
    x: Vec<Matrix>,
    s: Vec<Matrix>,
    xl: Vec<f64>,
    sl: Vec<f64>,
}

struct Direction {
    dy: Vec<f64>,
    dx: Vec<Matrix>,
    ds: Vec<Matrix>,
    dxl: Vec<f64>,
    dsl: Vec<f64>,
}

fn inverse_and_isqrt(m: &Matrix) -> Result<Option<(Matrix, Matrix)>> {
    let e = sym_eigen(&SymMatrix::symmetrize(m))?;
    if e.min() <= 0.0 || !e.min().is_finite() {
        return Ok(None);
    }
    let inv = e.apply_fn(|l| 1.0 / l).into_matrix();
    let isq = e.apply_fn(|l| 1.0 / l.sqrt()).into_matrix();
    Ok(Some((inv, isq)))
}

fn sym(m: &Matrix) -> Matrix {
    SymMatrix::symmetrize(m).into_matrix()
}

/// Largest step keeping `X + αΔX ⪰ 0`, given `X^{-1/2}`.
fn max_step_mat(isqrt: &Matrix, d: &Matrix) -> Result<f64> {
    let t = SymMatrix::symmetrize(&isqrt.matmul(d).matmul(isqrt));
    let lmin = sym_eigen(&t)?.min();
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn max_step_lin(x: &[f64], d: &[f64]) -> f64 {
    x.iter().zip(d).fold(f64::INFINITY, |m, (xi, di)| if *di < 0.0 { m.min(-xi / di) } else { m })
}

pub(super) fn solve_problem(p: &SdpProblem, settings: &SdpSettings, start: Option<&[f64]>) -> Result<SdpResult> {
    let m = p.dim;
    let mut mats = Vec::new();
    let mut rows = Vec::new();
    for (k, b) in p.blocks.iter().enumerate() {
        match b.order() {
            0 => {}
            1 => rows.push(LinRow { user: Some(k), c: b.f0[(0, 0)], a: b.terms.iter().map(|(i, f)| (*i, -f[(0, 0)])).collect() }),
            _ => mats.push(MatBlock {
                user: k,
                c: b.f0.as_matrix().clone(),
                a: b.terms.iter().map(|(i, f)| (*i, f.as_matrix().scale(-1.0))).collect(),
            }),
        }
    }
    let bound = p.bound.unwrap_or(settings.default_bound);
    for i in 0..m {
        rows.push(LinRow { user: None, c: bound, a: vec![(i, 1.0)] });
        rows.push(LinRow { user: None, c: bound, a: vec![(i, -1.0)] });
    }
    let b = &p.objective;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = (mats.iter().map(|k| k.c.dot(&k.c)).sum::<f64>() + rows.iter().map(|r| r.c * r.c).sum::<f64>()).sqrt();
    let ntot = (mats.iter().map(|k| k.c.rows()).sum::<usize>() + rows.len()) as f64;

    // Starting point.
    let mut st = initial_state(&mats, &rows, b, m, start);

    let mut best: Option<(f64, State)> = None;
    let mut iterations = 0;
    let mut stall = 0;
    for it in 0..settings.max_iter {
        iterations = it + 1;
        // Residuals.
        let mut rp = b.clone();
        for (k, blk) in mats.iter().enumerate() {
            for (i, a) in &blk.a {
                rp[*i] -= a.dot(&st.x[k]);
            }
        }
        for (r, row) in rows.iter().enumerate() {
            for (i, a) in &row.a {
                rp[*i] -= a * st.xl[r];
            }
        }
        let mut rd: Vec<Matrix> = Vec::with_capacity(mats.len());
        for (k, blk) in mats.iter().enumerate() {
            let mut r = &blk.c - &st.s[k];
            for (i, a) in &blk.a {
                r.add_scaled(a, -st.y[*i]);
            }
            rd.push(r);
        }
        let rdl: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(r, row)| row.c - st.sl[r] - row.a.iter().map(|(i, a)| a * st.y[*i]).sum::<f64>())
            .collect();
        let pobj: f64 = mats.iter().enumerate().map(|(k, blk)| blk.c.dot(&st.x[k])).sum::<f64>()
            + rows.iter().enumerate().map(|(r, row)| row.c * st.xl[r]).sum::<f64>();
        let dobj: f64 = b.iter().zip(&st.y).map(|(u, v)| u * v).sum();
        let gap: f64 = (0..mats.len()).map(|k| st.x[k].dot(&st.s[k])).sum::<f64>()
            + st.xl.iter().zip(&st.sl).map(|(u, v)| u * v).sum::<f64>();
        let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
        let dinf = (rd.iter().map(|r| r.dot(r)).sum::<f64>() + rdl.iter().map(|v| v * v).sum::<f64>()).sqrt() / (1.0 + cnorm);
        let relgap = gap.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let merit = pinf.max(dinf).max(relgap);
        if !merit.is_finite() {
            break;
        }
        let improved = best.as_ref().map_or(true, |(bm, _)| merit < *bm);
        if improved {
            best = Some((merit, clone_state(&st)));
            stall = 0;
        } else {
            stall += 1;
            if stall >= 6 {
                break;
            }
        }
        if merit <= settings.gap_tol {
            break;
        }
        let mu = gap / ntot;

        // Inverses.
        let mut sinv = Vec::with_capacity(mats.len());
        let mut s_isq = Vec::with_capacity(mats.len());
        let mut x_isq = Vec::with_capacity(mats.len());
        let mut ok = true;
        for k in 0..mats.len() {
            match (inverse_and_isqrt(&st.s[k])?, inverse_and_isqrt(&st.x[k])?) {
                (Some((si, sq)), Some((_, xq))) => {
                    sinv.push(si);
                    s_isq.push(sq);
                    x_isq.push(xq);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || st.sl.iter().chain(&st.xl).any(|v| *v <= 0.0) {
            break;
        }

        // Schur complement matrix.
        let mut mm = Matrix::zeros(m, m);
        for (k, blk) in mats.iter().enumerate() {
            for (j, aj) in &blk.a {
                let g = st.x[k].matmul(aj).matmul(&sinv[k]);
                for (i, ai) in &blk.a {
                    mm[(*i, *j)] += ai.dot(&g);
                }
            }
        }
        for (r, row) in rows.iter().enumerate() {
            let w = st.xl[r] / st.sl[r];
            for (i, ai) in &row.a {
                for (j, aj) in &row.a {
                    mm[(*i, *j)] += w * ai * aj;
                }
            }
        }
        let mm = sym(&mm);
        let lu = match factor_regularized(mm) {
            Some(lu) => lu,
            None => break,
        };

        let solve_dir = |sigma_mu: f64, corr: Option<&Direction>| -> Direction {
            // T = (−σμ I + X R_d + ΔXₚΔSₚ) S⁻¹, h = b + ⟨A, T⟩.
            let mut h = b.clone();
            let mut tks = Vec::with_capacity(mats.len());
            for (k, blk) in mats.iter().enumerate() {
                let n = blk.c.rows();
                let mut t = st.x[k].matmul(&rd[k]);
                for d in 0..n {
                    t[(d, d)] -= sigma_mu;
                }
                if let Some(c) = corr {
                    t.add_scaled(&c.dx[k].matmul(&c.ds[k]), 1.0);
                }
                let t = t.matmul(&sinv[k]);
                for (i, a) in &blk.a {
                    h[*i] += a.dot(&t);
                }
                tks.push(t);
            }
            let mut tl = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let mut t = -sigma_mu + st.xl[r] * rdl[r];
                if let Some(c) = corr {
                    t += c.dxl[r] * c.dsl[r];
                }
                let t = t / st.sl[r];
                for (i, a) in &row.a {
                    h[*i] += a * t;
                }
                tl.push(t);
            }
            let dy = lu.solve(&h);
            let mut ds = Vec::with_capacity(mats.len());
            let mut dx = Vec::with_capacity(mats.len());
            for (k, blk) in mats.iter().enumerate() {
                let mut d = rd[k].clone();
                for (i, a) in &blk.a {
                    d.add_scaled(a, -dy[*i]);
                }
                // ΔX = σμS⁻¹ − X − (XΔS + ΔXₚΔSₚ)S⁻¹ = −X − T − XΔS S⁻¹ + X R_d S⁻¹.
                let mut num = st.x[k].matmul(&d);
                num.add_scaled(&st.x[k].matmul(&rd[k]), -1.0);
                let mut x = num.matmul(&sinv[k]);
                x.add_scaled(&tks[k], 1.0);
                x.add_scaled(&st.x[k], 1.0);
                dx.push(sym(&x).scale(-1.0));
                ds.push(d);
            }
            let mut dsl = Vec::with_capacity(rows.len());
            let mut dxl = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let d = rdl[r] - row.a.iter().map(|(i, a)| a * dy[*i]).sum::<f64>();
                let x = -(st.xl[r] + tl[r] + st.xl[r] * (d - rdl[r]) / st.sl[r]);
                dsl.push(d);
                dxl.push(x);
            }
            Direction { dy, dx, ds, dxl, dsl }
        };

        let steps = |dir: &Direction| -> Result<(f64, f64)> {
            let mut ap = max_step_lin(&st.xl, &dir.dxl);
            let mut ad = max_step_lin(&st.sl, &dir.dsl);
            for k in 0..mats.len() {
                ap = ap.min(max_step_mat(&x_isq[k], &dir.dx[k])?);
                ad = ad.min(max_step_mat(&s_isq[k], &dir.ds[k])?);
            }
            Ok((ap, ad))
        };

        let pred = solve_dir(0.0, None);
        let (ap, ad) = steps(&pred)?;
        let (ap1, ad1) = (ap.min(1.0), ad.min(1.0));
        let mut gap_aff = 0.0;
        for k in 0..mats.len() {
            let mut xa = st.x[k].clone();
            xa.add_scaled(&pred.dx[k], ap1);
            let mut sa = st.s[k].clone();
            sa.add_scaled(&pred.ds[k], ad1);
            gap_aff += xa.dot(&sa);
        }
        for r in 0..rows.len() {
            gap_aff += (st.xl[r] + ap1 * pred.dxl[r]) * (st.sl[r] + ad1 * pred.dsl[r]);
        }
        let sigma = ((gap_aff / gap).max(0.0)).powi(3).min(1.0);
        let corr = solve_dir(sigma * mu, Some(&pred));
        let (ap, ad) = steps(&corr)?;
        let tau = if merit < 1e-6 { 0.98 } else { 0.95 };
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        for i in 0..m {
            st.y[i] += ad * corr.dy[i];
        }
        for k in 0..mats.len() {
            st.x[k].add_scaled(&corr.dx[k], ap);
            st.s[k].add_scaled(&corr.ds[k], ad);
            st.x[k] = sym(&st.x[k]);
            st.s[k] = sym(&st.s[k]);
        }
        for r in 0..rows.len() {
            st.xl[r] += ap * corr.dxl[r];
            st.sl[r] += ad * corr.dsl[r];
        }
    }

    let (merit, st) = match best {
        Some(b) => b,
        None => (f64::INFINITY, st),
    };
    let status = if merit <= 1e-7 { SdpStatus::Optimal } else { SdpStatus::NumericalFailure };
    let mut dual: Vec<SymMatrix> = p.blocks.iter().map(|b| SymMatrix::zeros(b.order())).collect();
    for (k, blk) in mats.iter().enumerate() {
        dual[blk.user] = SymMatrix::symmetrize(&st.x[k]);
    }
    let mut dual_bound = 0.0;
    for (r, row) in rows.iter().enumerate() {
        if let Some(u) = row.user {
            dual[u] = SymMatrix::diag(&[st.xl[r]]);
        }
        dual_bound += row.c * st.xl[r];
    }
    for blk in &mats {
        dual_bound += blk.c.dot(&dual[blk.user]);
    }
    let value = b.iter().zip(&st.y).map(|(u, v)| u * v).sum();
    let margin = p.margin(&st.y)?;
    Ok(SdpResult { status, y: st.y, value, dual, dual_bound, margin, iterations })
}

/// LU of the Schur matrix; dependent constraint matrices make it singular,
/// in which case a tiny diagonal shift is added.
fn factor_regularized(mut mm: Matrix) -> Option<LuFactor> {
    if let Ok(lu) = LuFactor::new(&mm) {
        return Some(lu);
    }
    let n = mm.rows();
    let dmax = (0..n).fold(0.0, |a: f64, i| a.max(mm[(i, i)].abs()));
    for i in 0..n {
        mm[(i, i)] += 1e-13 * dmax.max(f64::MIN_POSITIVE);
    }
    LuFactor::new(&mm).ok()
}

fn clone_state(s: &State) -> State {
    State { y: s.y.clone(), x: s.x.clone(), s: s.s.clone(), xl: s.xl.clone(), sl: s.sl.clone() }
}

fn initial_state(mats: &[MatBlock], rows: &[LinRow], b: &[f64], m: usize, start: Option<&[f64]>) -> State {
    let max_b = b.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    let mut x = Vec::with_capacity(mats.len());
    let mut s = Vec::with_capacity(mats.len());
    let y = start.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; m]);
    for blk in mats {
        let n = blk.c.rows();
        let nf = n as f64;
        let amax = blk.a.iter().fold(0.0, |acc: f64, (_, a)| acc.max(a.frobenius_norm()));
        let xi = 10f64.max(nf.sqrt()).max(nf * (1.0 + max_b) / (1.0 + amax));
        let eta = 10f64.max(nf.sqrt()).max(blk.c.frobenius_norm().max(amax));
        x.push(Matrix::identity(n).scale(xi));
        let mut sk = None;
        if start.is_some() {
            let mut f = blk.c.clone();
            for (i, a) in &blk.a {
                f.add_scaled(a, -y[*i]);
            }
            if let Ok(e) = sym_eigen(&SymMatrix::symmetrize(&f)) {
                if e.min() > 0.0 {
                    sk = Some(f);
                }
            }
        }
        s.push(sk.unwrap_or_else(|| Matrix::identity(n).scale(eta)));
    }
    let mut xl = Vec::with_capacity(rows.len());
    let mut sl = Vec::with_capacity(rows.len());
    for row in rows {
        let amax = row.a.iter().fold(0.0, |acc: f64, (_, a)| acc.max(a.abs()));
        xl.push(10f64.max((1.0 + max_b) / (1.0 + amax)));
        let mut sv = None;
        if start.is_some() {
            let f = row.c - row.a.iter().map(|(i, a)| a * y[*i]).sum::<f64>();
            if f > 0.0 {
                sv = Some(f);
            }
        }
        sl.push(sv.unwrap_or(10f64.max(row.c.abs()).max(amax)));
    }
    State { y, x, s, xl, sl }
}
