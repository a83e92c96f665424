//! Grid hierarchy construction: interpolation weights and the
//! stencil-wise Galerkin coarse operator.

use super::stencil::{
    coarse_parents, weight_between, Dir, IDir, InterpStencil, StencilOperator, DIRS,
};
use super::MgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    Bilinear,
    /// Weights from collapsing the fine operator row at each fine
    /// point, an approximation that adapts to variable coefficients and
    /// reduces to bilinear for constant ones.
    Collapsed,
}

/// Interpolation weights between a fine operator's grid (interior `n`)
/// and the coarse grid with `(n - 1) / 2` interior points.
pub fn build_interp(fine: &StencilOperator, mode: InterpMode) -> InterpStencil {
    let n = fine.n;
    let nc = (n - 1) / 2;
    let mut ci = InterpStencil::zeros(nc);
    let npc = (nc + 2) as i64;
    let npf = (n + 2) as i64;
    let in_fine = |x: i64, y: i64| x >= 2 && y >= 2 && x <= npf - 1 && y <= npf - 1;

    for cy in 2..=npc {
        for cx in 2..=npc {
            // Fine coordinates of the coarse anchor.
            let (fx, fy) = (2 * cx - 1, 2 * cy - 1);
            // Horizontal edge point to the anchor's left.
            if in_fine(fx - 1, fy) {
                let (wl, wr) = match mode {
                    InterpMode::Bilinear => (0.5, 0.5),
                    InterpMode::Collapsed => collapse_x(fine, (fx - 1) as usize, fy as usize),
                };
                if cx <= npc && cy <= npc - 1 {
                    *ci.at_mut(cx as usize, cy as usize, IDir::Ll) = wl;
                    *ci.at_mut(cx as usize, cy as usize, IDir::Lr) = wr;
                }
            }
            // Vertical edge point below the anchor.
            if in_fine(fx, fy - 1) {
                let (wb, wa) = match mode {
                    InterpMode::Bilinear => (0.5, 0.5),
                    InterpMode::Collapsed => collapse_y(fine, fx as usize, (fy - 1) as usize),
                };
                if cy <= npc && cx <= npc - 1 {
                    *ci.at_mut(cx as usize, cy as usize, IDir::Lb) = wb;
                    *ci.at_mut(cx as usize, cy as usize, IDir::La) = wa;
                }
            }
            // Cell-center point to the anchor's lower left.
            if in_fine(fx - 1, fy - 1) {
                let (wsw, wse, wnw, wne) = match mode {
                    InterpMode::Bilinear => (0.25, 0.25, 0.25, 0.25),
                    InterpMode::Collapsed => {
                        let (wl, wr) = collapse_x(fine, (fx - 1) as usize, (fy - 1) as usize);
                        let (wb, wa) = collapse_y(fine, (fx - 1) as usize, (fy - 1) as usize);
                        (wl * wb, wr * wb, wl * wa, wr * wa)
                    }
                };
                *ci.at_mut(cx as usize, cy as usize, IDir::Lsw) = wsw;
                *ci.at_mut(cx as usize, cy as usize, IDir::Lse) = wse;
                *ci.at_mut(cx as usize, cy as usize, IDir::Lnw) = wnw;
                *ci.at_mut(cx as usize, cy as usize, IDir::Lne) = wne;
            }
        }
    }
    ci
}

/// Collapse the row at a fine point onto the x axis: weights toward the
/// left and right neighbors.
fn collapse_x(op: &StencilOperator, i: usize, j: usize) -> (f64, f64) {
    let cw = op.at(i, j, Dir::Sw) + op.at(i, j, Dir::W) + op.at(i, j, Dir::Nw);
    let co = op.at(i, j, Dir::S) + op.at(i, j, Dir::O) + op.at(i, j, Dir::N);
    let ce = op.at(i, j, Dir::Se) + op.at(i, j, Dir::E) + op.at(i, j, Dir::Ne);
    (-cw / co, -ce / co)
}

fn collapse_y(op: &StencilOperator, i: usize, j: usize) -> (f64, f64) {
    let cs = op.at(i, j, Dir::Sw) + op.at(i, j, Dir::S) + op.at(i, j, Dir::Se);
    let co = op.at(i, j, Dir::W) + op.at(i, j, Dir::O) + op.at(i, j, Dir::E);
    let cn = op.at(i, j, Dir::Nw) + op.at(i, j, Dir::N) + op.at(i, j, Dir::Ne);
    (-cs / co, -cn / co)
}

/// Galerkin triple product computed stencil-wise: for each coarse point
/// the restriction weights gather the fine rows of its 3x3 patch, each
/// fine coupling scatters into the coarse parents of its target, and
/// everything lands within a 9-point coarse stencil.
pub fn galerkin_coarse(fine: &StencilOperator, ci: &InterpStencil) -> StencilOperator {
    let nc = ci.nc;
    let npf = (fine.n + 2) as i64;
    let mut coarse = StencilOperator::zeros(nc);
    let in_fine_interior = |x: i64, y: i64| x >= 2 && y >= 2 && x <= npf - 1 && y <= npf - 1;

    for cy in 2..=(nc + 1) as i64 {
        for cx in 2..=(nc + 1) as i64 {
            let (fx0, fy0) = (2 * cx - 1, 2 * cy - 1);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (fx, fy) = (fx0 + dx, fy0 + dy);
                    if !in_fine_interior(fx, fy) {
                        continue;
                    }
                    let wr = weight_between(ci, cx, cy, fx, fy);
                    if wr == 0.0 {
                        continue;
                    }
                    for d in DIRS {
                        let (ox, oy) = d.offset();
                        let (tx, ty) = (fx + ox, fy + oy);
                        if !in_fine_interior(tx, ty) {
                            continue;
                        }
                        let a = fine.at(fx as usize, fy as usize, d);
                        if a == 0.0 {
                            continue;
                        }
                        for (px, py) in coarse_parents(tx, ty) {
                            if px < 2 || py < 2 || px > (nc + 1) as i64 || py > (nc + 1) as i64 {
                                continue;
                            }
                            let wp = weight_between(ci, px, py, tx, ty);
                            if wp == 0.0 {
                                continue;
                            }
                            let Some(dir) = Dir::from_offset(px - cx, py - cy) else {
                                continue;
                            };
                            *coarse.at_mut(cx as usize, cy as usize, dir) += wr * a * wp;
                        }
                    }
                }
            }
        }
    }
    coarse
}

/// Operator chain from the fine level down to the threshold. Each entry
/// pairs a level's operator with the interpolation onto it from the
/// level below (None for the coarsest... the orientation is: `interp[k]`
/// maps level `k+1` corrections onto level `k`.
pub struct OperatorChain {
    pub ops: Vec<StencilOperator>,
    /// `interp[k]` transfers between levels k and k+1.
    pub interp: Vec<InterpStencil>,
}

pub fn build_operator_chain(
    fine: StencilOperator,
    threshold: usize,
    mode: InterpMode,
) -> Result<OperatorChain, MgError> {
    if threshold < 3 {
        return Err(MgError::BadProblem(format!(
            "coarsening threshold must be at least 3, got {threshold}"
        )));
    }
    let mut ops = vec![fine];
    let mut interp = Vec::new();
    loop {
        let cur = ops.last().unwrap();
        if cur.n <= threshold || cur.n % 2 == 0 {
            break;
        }
        let ci = build_interp(cur, mode);
        let coarse = galerkin_coarse(cur, &ci);
        interp.push(ci);
        ops.push(coarse);
    }
    Ok(OperatorChain { ops, interp })
}
