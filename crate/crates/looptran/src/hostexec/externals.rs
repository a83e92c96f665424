//! Builtin externals: the dense linear algebra the solver cannot express
//! as tagged loop nests. They operate on whole buffer payloads with
//! ordinary access accounting, device-side when launched from the
//! translated path.

use super::registry::{ArgSlot, ExtParamKind, ExternalRegistry, ExternalSpec};
use super::{ExecError, Result};
use crate::vdevice::{BufferId, Side, VirtualDevice};

/// Register `norm2`, `cholesky_factor` and `cholesky_solve`.
pub fn register_builtin_externals(registry: &mut ExternalRegistry) {
    registry.register(
        "norm2",
        ExternalSpec::new(
            vec![
                ExtParamKind::Buffer,
                ExtParamKind::IntIn,
                ExtParamKind::RealOut,
            ],
            [],
            |ctx, slots| {
                let (buf, n) = (expect_buf(&slots[0]), expect_int(&slots[1]));
                let v = read_f64(ctx.device, buf, ctx.side)?;
                let n = usize::try_from(n).map_err(|_| bad_len("norm2", n))?;
                if n > v.len() {
                    return Err(bad_len("norm2", n as i64));
                }
                let sum: f64 = v[..n].iter().map(|x| x * x).sum();
                slots[2] = ArgSlot::Real(sum.sqrt());
                Ok(())
            },
        ),
    );

    registry.register(
        "cholesky_factor",
        ExternalSpec::new(
            vec![ExtParamKind::Buffer, ExtParamKind::IntIn],
            [],
            |ctx, slots| {
                let (buf, m) = (expect_buf(&slots[0]), expect_int(&slots[1]));
                let m = usize::try_from(m).map_err(|_| bad_len("cholesky_factor", m))?;
                let mut a = read_f64(ctx.device, buf, ctx.side)?;
                if a.len() != m * m {
                    return Err(bad_len("cholesky_factor", (m * m) as i64));
                }
                cholesky_in_place(&mut a, m)?;
                write_f64(ctx.device, buf, ctx.side, &a)
            },
        ),
    );

    registry.register(
        "cholesky_solve",
        ExternalSpec::new(
            vec![
                ExtParamKind::Buffer,
                ExtParamKind::IntIn,
                ExtParamKind::Buffer,
            ],
            [],
            |ctx, slots| {
                let l_buf = expect_buf(&slots[0]);
                let m = expect_int(&slots[1]);
                let bx_buf = expect_buf(&slots[2]);
                let m = usize::try_from(m).map_err(|_| bad_len("cholesky_solve", m))?;
                let l = read_f64(ctx.device, l_buf, ctx.side)?;
                let mut bx = read_f64(ctx.device, bx_buf, ctx.side)?;
                if l.len() != m * m || bx.len() < m {
                    return Err(bad_len("cholesky_solve", m as i64));
                }
                // Forward solve L y = b, then back solve L^T x = y.
                for i in 0..m {
                    let mut s = bx[i];
                    for k in 0..i {
                        s -= l[i * m + k] * bx[k];
                    }
                    bx[i] = s / l[i * m + i];
                }
                for i in (0..m).rev() {
                    let mut s = bx[i];
                    for k in i + 1..m {
                        s -= l[k * m + i] * bx[k];
                    }
                    bx[i] = s / l[i * m + i];
                }
                write_f64(ctx.device, bx_buf, ctx.side, &bx)
            },
        ),
    );
}

/// Lower Cholesky factor stored row-major in place; the strict upper
/// triangle is zeroed.
fn cholesky_in_place(a: &mut [f64], m: usize) -> Result<()> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if d <= 0.0 {
            return Err(ExecError::NotSpd { pivot: d, index: j });
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
        for i in 0..j {
            a[i * m + j] = 0.0;
        }
    }
    Ok(())
}

fn expect_buf(slot: &ArgSlot) -> BufferId {
    match slot {
        ArgSlot::Buf(id) => *id,
        _ => unreachable!("validated by invoke"),
    }
}

fn expect_int(slot: &ArgSlot) -> i64 {
    match slot {
        ArgSlot::Int(v) => *v,
        _ => unreachable!("validated by invoke"),
    }
}

fn bad_len(callee: &str, n: i64) -> ExecError {
    ExecError::BadArg {
        callee: callee.to_string(),
        position: 2,
        detail: format!("length {n} does not fit the buffer"),
    }
}

fn read_f64(device: &mut VirtualDevice, id: BufferId, side: Side) -> Result<Vec<f64>> {
    Ok(device.read_all_f64(id, side)?)
}

fn write_f64(device: &mut VirtualDevice, id: BufferId, side: Side, data: &[f64]) -> Result<()> {
    Ok(device.write_all_f64(id, side, data)?)
}
