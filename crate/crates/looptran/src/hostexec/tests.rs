use super::registry::DefaultContext;
use super::*;
use crate::frontend::ElemTy;
use crate::vdevice::{Residency, Side, Value};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;

fn rt_with(src: &str) -> (Runtime, String) {
    let mut rt = Runtime::new();
    let name = rt.load_source(src).unwrap();
    (rt, name)
}

#[test]
fn interpret_scalar_accumulation() {
    let src = "SUBROUTINE acc(out)\n\
        INTEGER, INTENT(OUT) :: out\n\
        INTEGER :: i\n\
        I = 2\n\
        I = I + 2\n\
        out = I\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_scalar("out", Value::I(0));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"i".into()], Value::I(4));
}

#[test]
fn empty_region_leaves_env_unchanged() {
    let src = "SUBROUTINE nop(x)\nINTEGER, INTENT(INOUT) :: x\nEND SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_scalar("x", Value::I(9));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"x".into()], Value::I(9));
}

#[test]
fn host_read_of_device_dirty_buffer_transfers_once() {
    let src = "SUBROUTINE peek(a, out)\n\
        REAL(KIND=8), INTENT(IN) :: a(1:4)\n\
        REAL(KIND=8), INTENT(OUT) :: out\n\
        out = a(2)\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let a = rt
        .device
        .create_buffer(&[(1, 4)], ElemTy::Real64, Residency::ZeroedBoth)
        .unwrap();
    rt.device
        .write_elem(a, Side::Device, &[2], Value::R(7.5))
        .unwrap();
    let before = rt.device.ledger_snapshot();
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_array("a", a);
    env.bind_scalar("out", Value::R(0.0));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"out".into()], Value::R(7.5));
    let delta = rt.device.ledger_snapshot().delta_since(&before);
    assert_eq!(delta.d2h_count, 1);
}

#[test]
fn do_loop_semantics_with_zero_trips() {
    let src = "SUBROUTINE zt(n, out)\n\
        INTEGER, INTENT(IN) :: n\n\
        INTEGER, INTENT(OUT) :: out\n\
        INTEGER :: i, s\n\
        s = 0\n\
        DO i = 1, n\n\
        s = s + i\n\
        ENDDO\n\
        out = s + i\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_scalar("n", Value::I(0));
    env.bind_scalar("out", Value::I(0));
    rt.run_unit(&unit, &mut env).unwrap();
    // Zero trips: the index holds the lower bound.
    assert_eq!(env.scalars[&"out".into()], Value::I(1));
}

#[test]
fn integer_division_by_zero_is_an_error() {
    let src = "SUBROUTINE dz(n, out)\n\
        INTEGER, INTENT(IN) :: n\n\
        INTEGER, INTENT(OUT) :: out\n\
        out = 1 / n\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_scalar("n", Value::I(0));
    env.bind_scalar("out", Value::I(0));
    let err = rt.run_unit(&unit, &mut env).unwrap_err();
    assert!(matches!(err, ExecError::Arith { .. }), "{err}");
}

// ---- dispatch --------------------------------------------------------------

#[test]
fn dispatch_to_translated_subroutine_with_by_ref_scalars() {
    let callee = "SUBROUTINE double(x)\n\
        INTEGER, INTENT(INOUT) :: x\n\
        x = x * 2\n\
        END SUBROUTINE\n";
    let caller = "SUBROUTINE run(out)\n\
        INTEGER, INTENT(OUT) :: out\n\
        out = 5\n\
        CALL double(out)\n\
        CALL double(out)\n\
        END SUBROUTINE\n";
    let mut rt = Runtime::new();
    rt.load_source(callee).unwrap();
    let name = rt.load_source(caller).unwrap();
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_scalar("out", Value::I(0));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"out".into()], Value::I(20));
}

#[test]
fn dispatch_aliases_arrays_by_reference() {
    let callee = "SUBROUTINE fill2(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(OUT) :: a(1:n)\n\
        INTEGER :: i\n\
        DO i = 1, n\n\
        a(i) = 2.0D0\n\
        ENDDO\n\
        END SUBROUTINE\n";
    let (mut rt, _) = rt_with(callee);
    let a = rt
        .device
        .create_buffer(&[(1, 3)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.call("fill2", &[DriverArg::Buf(a), DriverArg::Int(3)])
        .unwrap();
    assert_eq!(rt.device.read_all_f64(a, Side::Host).unwrap(), vec![2.0; 3]);
}

#[test]
fn unknown_callee() {
    let src = "SUBROUTINE go()\nCALL nothere()\nEND SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let unit = rt.unit(&name).unwrap();
    let err = rt.run_unit(&unit, &mut Env::default()).unwrap_err();
    assert!(matches!(err, ExecError::UnknownCallee(n) if n == "nothere"));
}

#[test]
fn norm2_is_the_euclidean_norm() {
    let src = "SUBROUTINE n2(v, n, out)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(IN) :: v(1:n)\n\
        REAL(KIND=8), INTENT(OUT) :: out\n\
        CALL norm2(v, n, out)\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let v = rt
        .device
        .create_buffer(&[(1, 2)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device.write_all_f64(v, Side::Host, &[3.0, 4.0]).unwrap();
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_array("v", v);
    env.bind_scalar("n", Value::I(2));
    env.bind_scalar("out", Value::R(0.0));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"out".into()], Value::R(5.0));
}

#[test]
fn norm2_of_zeros() {
    let mut rt = Runtime::new();
    let v = rt
        .device
        .create_buffer(&[(1, 3)], ElemTy::Real64, Residency::Host)
        .unwrap();
    let mut slots = vec![ArgSlot::Buf(v), ArgSlot::Int(3), ArgSlot::Real(-1.0)];
    rt.invoke_external("norm2", &mut slots).unwrap();
    let ArgSlot::Real(out) = slots[2] else { panic!() };
    assert_eq!(out, 0.0);
}

// ---- handles ----------------------------------------------------------------

#[test]
fn handle_zero_is_the_default_context() {
    let rt = Runtime::new();
    let obj = rt.registry.convert_handle(0).unwrap();
    assert!(obj.downcast_ref::<DefaultContext>().is_some());
}

#[test]
fn issued_handles_round_trip() {
    let mut rt = Runtime::new();
    #[derive(Debug, PartialEq)]
    struct SolverCtx(u32);
    let h = rt.registry.issue_handle(Arc::new(SolverCtx(77)));
    let obj = rt.registry.convert_handle(h).unwrap();
    assert_eq!(obj.downcast_ref::<SolverCtx>(), Some(&SolverCtx(77)));
}

#[test]
fn unissued_handle_is_rejected() {
    let rt = Runtime::new();
    assert!(matches!(
        rt.registry.convert_handle(9999),
        Err(ExecError::BadHandle(9999))
    ));
}

/// The interop-wrapper pattern: a legacy call site passes an integer
/// context handle; the registry converts it before the implementation
/// runs, which then delegates to the native routine.
#[test]
fn handle_converting_external_called_from_legacy_source() {
    let fig6 = "SUBROUTINE halo_norm(v, n, comm, out)\n\
        INTEGER, INTENT(IN) :: n, comm\n\
        REAL(KIND=8), INTENT(IN) :: v(1:n)\n\
        REAL(KIND=8), INTENT(OUT) :: out\n\
        CALL comm_norm2(comm, v, n, out)\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(fig6);
    rt.registry.register(
        "comm_norm2",
        ExternalSpec::new(
            vec![
                ExtParamKind::IntIn, // converted: position 0 is a handle
                ExtParamKind::Buffer,
                ExtParamKind::IntIn,
                ExtParamKind::RealOut,
            ],
            [0],
            |ctx, slots| {
                let ArgSlot::Obj(obj) = &slots[0] else {
                    panic!("handle not converted before the implementation")
                };
                assert!(obj.downcast_ref::<DefaultContext>().is_some());
                let ArgSlot::Buf(v) = slots[1] else { panic!() };
                let ArgSlot::Int(n) = slots[2] else { panic!() };
                let data = ctx.device.read_all_f64(v, ctx.side)?;
                let sum: f64 = data[..n as usize].iter().map(|x| x * x).sum();
                slots[3] = ArgSlot::Real(sum.sqrt());
                Ok(())
            },
        ),
    );
    let v = rt
        .device
        .create_buffer(&[(1, 2)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device.write_all_f64(v, Side::Host, &[3.0, 4.0]).unwrap();
    let unit = rt.unit(&name).unwrap();
    let mut env = Env::default();
    env.bind_array("v", v);
    env.bind_scalar("n", Value::I(2));
    env.bind_scalar("comm", Value::I(0));
    env.bind_scalar("out", Value::R(0.0));
    rt.run_unit(&unit, &mut env).unwrap();
    assert_eq!(env.scalars[&"out".into()], Value::R(5.0));
}

// ---- cholesky ----------------------------------------------------------------

#[test]
fn cholesky_factor_2x2_golden() {
    let mut rt = Runtime::new();
    let a = rt
        .device
        .create_buffer(&[(1, 4)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(a, Side::Host, &[2.0, -1.0, -1.0, 2.0])
        .unwrap();
    let mut slots = vec![ArgSlot::Buf(a), ArgSlot::Int(2)];
    rt.invoke_external("cholesky_factor", &mut slots).unwrap();
    let l = rt.device.read_all_f64(a, Side::Host).unwrap();
    let want = [
        2f64.sqrt(),
        0.0,
        -1.0 / 2f64.sqrt(),
        (1.5f64).sqrt(),
    ];
    for (got, want) in l.iter().zip(want) {
        assert!((got - want).abs() <= 1e-15, "{l:?}");
    }
    // L Lᵀ reconstructs the input.
    let m = 2;
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += l[i * m + k] * l[j * m + k];
            }
            let orig = [[2.0, -1.0], [-1.0, 2.0]][i][j];
            assert!((s - orig).abs() <= 1e-14);
        }
    }
}

#[test]
fn cholesky_solve_2x2_golden() {
    let mut rt = Runtime::new();
    let a = rt
        .device
        .create_buffer(&[(1, 4)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(a, Side::Host, &[2.0, -1.0, -1.0, 2.0])
        .unwrap();
    let mut slots = vec![ArgSlot::Buf(a), ArgSlot::Int(2)];
    rt.invoke_external("cholesky_factor", &mut slots).unwrap();
    let bx = rt
        .device
        .create_buffer(&[(1, 2)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device.write_all_f64(bx, Side::Host, &[1.0, 0.0]).unwrap();
    let mut slots = vec![ArgSlot::Buf(a), ArgSlot::Int(2), ArgSlot::Buf(bx)];
    rt.invoke_external("cholesky_solve", &mut slots).unwrap();
    let x = rt.device.read_all_f64(bx, Side::Host).unwrap();
    assert!((x[0] - 2.0 / 3.0).abs() <= 1e-15);
    assert!((x[1] - 1.0 / 3.0).abs() <= 1e-15);
}

#[test]
fn cholesky_rejects_non_spd() {
    let mut rt = Runtime::new();
    let a = rt
        .device
        .create_buffer(&[(1, 4)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(a, Side::Host, &[1.0, 3.0, 3.0, 1.0])
        .unwrap();
    let mut slots = vec![ArgSlot::Buf(a), ArgSlot::Int(2)];
    let err = rt
        .invoke_external("cholesky_factor", &mut slots)
        .unwrap_err();
    assert!(matches!(err, ExecError::NotSpd { .. }));
}

#[test]
fn cholesky_random_spd_up_to_16() {
    let mut rng = StdRng::seed_from_u64(11);
    for m in [1usize, 2, 3, 5, 8, 13, 16] {
        // A = M Mᵀ + m·I is safely positive definite.
        let mm: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut s = if i == j { m as f64 } else { 0.0 };
                for k in 0..m {
                    s += mm[i * m + k] * mm[j * m + k];
                }
                a[i * m + j] = s;
            }
        }
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut rt = Runtime::new();
        let ab = rt
            .device
            .create_buffer(&[(1, (m * m) as i64)], ElemTy::Real64, Residency::Host)
            .unwrap();
        rt.device.write_all_f64(ab, Side::Host, &a).unwrap();
        let bb = rt
            .device
            .create_buffer(&[(1, m as i64)], ElemTy::Real64, Residency::Host)
            .unwrap();
        rt.device.write_all_f64(bb, Side::Host, &b).unwrap();
        let mut slots = vec![ArgSlot::Buf(ab), ArgSlot::Int(m as i64)];
        rt.invoke_external("cholesky_factor", &mut slots).unwrap();
        let mut slots = vec![ArgSlot::Buf(ab), ArgSlot::Int(m as i64), ArgSlot::Buf(bb)];
        rt.invoke_external("cholesky_solve", &mut slots).unwrap();
        let x = rt.device.read_all_f64(bb, Side::Host).unwrap();
        // residual in the infinity norm
        for i in 0..m {
            let mut ax = 0.0;
            for j in 0..m {
                ax += a[i * m + j] * x[j];
            }
            assert!(
                (ax - b[i]).abs() <= 1e-10,
                "m={m} row {i}: {} vs {}",
                ax,
                b[i]
            );
        }
    }
}

// ---- translated vs interpreted ------------------------------------------------

#[test]
fn mixed_host_and_parallel_regions_cohere() {
    let src = "SUBROUTINE scale_shift(a, n, s)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(IN) :: s\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n)\n\
        REAL(KIND=8) :: w\n\
        INTEGER :: i\n\
        w = s * 2.0D0\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i) = a(i) * w\n\
        ENDDO\n\
        !#LOOPY_END\n\
        a(1) = a(1) + 1.0D0\n\
        END SUBROUTINE\n";
    let (mut rt, _) = rt_with(src);
    let a = rt
        .device
        .create_buffer(&[(1, 4)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(a, Side::Host, &[1.0, 2.0, 3.0, 4.0])
        .unwrap();
    rt.call(
        "scale_shift",
        &[DriverArg::Buf(a), DriverArg::Int(4), DriverArg::Real(0.5)],
    )
    .unwrap();
    let got = rt.device.read_all_f64(a, Side::Host).unwrap();
    assert_eq!(got, vec![2.0, 2.0, 3.0, 4.0]);
    // The kernel ran on the device; the trailing host statement pulled
    // the result back.
    let ledger = rt.device.ledger_snapshot();
    assert_eq!(ledger.launches, 1);
    assert!(ledger.d2h_count >= 1);
}

#[test]
fn translated_equals_interpreted_bitwise() {
    let src = "SUBROUTINE axb(y, x, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(INOUT) :: y(1:n)\n\
        REAL(KIND=8), INTENT(IN) :: x(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        y(i) = y(i) * 0.3D0 + x(i) / 7.0D0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let mut rng = StdRng::seed_from_u64(3);
    let data: Vec<f64> = (0..32).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let run = |strategy: ExecStrategy, want_launches: u64| {
        let (mut rt, name) = rt_with(src);
        rt.strategy = strategy;
        let y = rt
            .device
            .create_buffer(&[(1, 16)], ElemTy::Real64, Residency::Host)
            .unwrap();
        let x = rt
            .device
            .create_buffer(&[(1, 16)], ElemTy::Real64, Residency::Host)
            .unwrap();
        rt.device.write_all_f64(y, Side::Host, &data[..16]).unwrap();
        rt.device.write_all_f64(x, Side::Host, &data[16..]).unwrap();
        rt.call(
            &name,
            &[DriverArg::Buf(y), DriverArg::Buf(x), DriverArg::Int(16)],
        )
        .unwrap();
        assert_eq!(rt.device.ledger_snapshot().launches, want_launches);
        // Pull results host-side so both strategies compare there.
        rt.device.read_all_f64(y, Side::Host).unwrap();
        rt.device.peek_bytes(y, Side::Host).unwrap()
    };
    let interpreted = run(ExecStrategy::Interpreted, 0);
    let translated = run(ExecStrategy::Translated, 1);
    assert_eq!(interpreted, translated);
}

#[test]
fn kernel_compilation_is_memoized() {
    let src = "SUBROUTINE fz(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(OUT) :: a(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i) = 0.0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let (mut rt, name) = rt_with(src);
    let c1 = rt.compiled(&name, 0).unwrap();
    let c2 = rt.compiled(&name, 0).unwrap();
    assert!(Arc::ptr_eq(&c1.kernel, &c2.kernel));
}
