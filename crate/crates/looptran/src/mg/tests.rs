use super::*;
use crate::frontend::ElemTy;
use crate::hostexec::{DriverArg, ExecStrategy, Runtime};
use crate::vdevice::{Residency, Side};

fn poisson_solver(n: usize) -> Solver {
    let spec = ProblemSpec {
        n,
        diffusion: DiffusionField::Constant(1.0),
        rhs: 1.0,
    };
    Solver::from_problem(&spec, 3, InterpMode::Bilinear, 1, 1).unwrap()
}

#[test]
fn hierarchy_shape_n7() {
    let s = poisson_solver(7);
    let sizes: Vec<usize> = s.h.levels.iter().map(|l| l.n).collect();
    assert_eq!(sizes, vec![7, 3]);
    assert_eq!(s.h.coarse_m, 9);
}

#[test]
fn exact_solution_is_a_fixed_point() {
    // Manufacture f = A u* and start from u*; the cycle must not move.
    let (op, _) = build_problem(&ProblemSpec {
        n: 15,
        diffusion: DiffusionField::Constant(1.0),
        rhs: 0.0,
    })
    .unwrap();
    let np = op.padded();
    let h = 1.0 / 16.0;
    let mut ustar = vec![0.0; np * np];
    for j in 2..=16usize {
        for i in 2..=16usize {
            let (x, y) = ((i as f64 - 1.0) * h, (j as f64 - 1.0) * h);
            ustar[(i - 1) + (j - 1) * np] = x * (1.0 - x) * y * (1.0 - y);
        }
    }
    let f = op.apply(&ustar);
    let mut s = Solver::from_operator(op, f, 3, InterpMode::Bilinear, 1, 1).unwrap();
    let u0 = s.h.levels[0].u;
    s.rt.device.write_all_f64(u0, Side::Host, &ustar).unwrap();
    s.vcycle(0).unwrap();
    let r = s.residual_field().unwrap();
    let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(rnorm <= 1e-12, "residual {rnorm}");
    // And the iterate itself stayed put.
    let u = s.solution().unwrap();
    for (a, b) in u.iter().zip(&ustar) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn one_cycle_reduces_the_residual_by_five() {
    let mut s = poisson_solver(63);
    let history = match s.solve(1e-8, 1) {
        Ok(h) => h,
        Err(MgError::NotConverged { history }) => history,
        Err(e) => panic!("{e}"),
    };
    assert!(history[0] <= 0.2, "factor {}", history[0]);
}

#[test]
fn zero_rhs_returns_immediately() {
    let spec = ProblemSpec {
        n: 7,
        diffusion: DiffusionField::Constant(1.0),
        rhs: 0.0,
    };
    let mut s = Solver::from_problem(&spec, 3, InterpMode::Bilinear, 1, 1).unwrap();
    let before = s.rt.device.ledger_snapshot().launches;
    let history = s.solve(1e-10, 5).unwrap();
    assert!(history.is_empty());
    assert_eq!(s.rt.device.ledger_snapshot().launches, before);
    assert!(s.solution().unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn launch_count_matches_the_cycle_structure() {
    let mut s = poisson_solver(31);
    let history = s.solve(1e-8, 12).unwrap();
    let levels = s.h.levels.len();
    assert_eq!(levels, 4);
    let want = history.len() as u64 * predicted_launches_per_cycle(levels, 1, 1);
    assert_eq!(s.rt.device.ledger_snapshot().launches, want);
}

#[test]
fn solve_converges_and_history_decreases() {
    let mut s = poisson_solver(31);
    let history = s.solve(1e-8, 12).unwrap();
    assert!(history.len() <= 12);
    assert!(*history.last().unwrap() <= 1e-8);
    for w in history.windows(2) {
        assert!(w[1] < w[0], "history not strictly decreasing: {history:?}");
    }
}

#[test]
fn collapsed_interpolation_also_converges() {
    let spec = ProblemSpec {
        n: 31,
        diffusion: DiffusionField::Piecewise {
            left: 1.0,
            right: 10.0,
        },
        rhs: 1.0,
    };
    let mut s = Solver::from_problem(&spec, 3, InterpMode::Collapsed, 1, 1).unwrap();
    let history = s.solve(1e-8, 15).unwrap();
    assert!(*history.last().unwrap() <= 1e-8);
}

#[test]
fn strong_anisotropy_defeats_point_relaxation() {
    // u_xx + eps u_yy with point smoothing: the V-cycle stalls, and the
    // solver reports the failure instead of looping forever.
    let n = 31;
    let eps = 1e-3;
    let mut op = StencilOperator::zeros(n);
    for j in 2..=n + 1 {
        for i in 2..=n + 1 {
            *op.at_mut(i, j, Dir::O) = 2.0 * (1.0 + eps);
            if i > 2 {
                *op.at_mut(i, j, Dir::W) = -1.0;
            }
            if i < n + 1 {
                *op.at_mut(i, j, Dir::E) = -1.0;
            }
            if j > 2 {
                *op.at_mut(i, j, Dir::S) = -eps;
            }
            if j < n + 1 {
                *op.at_mut(i, j, Dir::N) = -eps;
            }
        }
    }
    let np = n + 2;
    let mut f = vec![0.0; np * np];
    for j in 2..=n + 1 {
        for i in 2..=n + 1 {
            f[(i - 1) + (j - 1) * np] = 1.0;
        }
    }
    let mut s = Solver::from_operator(op, f, 3, InterpMode::Bilinear, 1, 1).unwrap();
    let err = s.solve(1e-8, 10).unwrap_err();
    match err {
        MgError::NotConverged { history } => {
            assert_eq!(history.len(), 10);
            assert!(*history.last().unwrap() > 1e-8);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn restriction_of_ones_with_half_weights_is_five() {
    let mut rt = Runtime::new();
    corpus::load_corpus(&mut rt).unwrap();
    let nc = 3i64; // coarse interior; padded coarse extent 5, fine 9
    let npc = nc + 2;
    let npf = 2 * npc - 1;
    let qc = rt
        .device
        .create_buffer(&[(1, npc), (1, npc)], ElemTy::Real64, Residency::Host)
        .unwrap();
    let q = rt
        .device
        .create_buffer(&[(1, npf), (1, npf)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(q, Side::Host, &vec![1.0; (npf * npf) as usize])
        .unwrap();
    let ci = rt
        .device
        .create_buffer(&[(1, npc), (1, npc), (1, 8)], ElemTy::Real64, Residency::Host)
        .unwrap();
    rt.device
        .write_all_f64(ci, Side::Host, &vec![0.5; (npc * npc * 8) as usize])
        .unwrap();
    rt.call(
        "restrict",
        &[
            DriverArg::Buf(qc),
            DriverArg::Buf(q),
            DriverArg::Buf(ci),
            DriverArg::Int(npc),
            DriverArg::Int(npc),
            DriverArg::Int(1),
            DriverArg::Int(1),
        ],
    )
    .unwrap();
    let out = rt.device.read_all_f64(qc, Side::Host).unwrap();
    for jc in 2..=npc - 1 {
        for ic in 2..=npc - 1 {
            let v = out[((ic - 1) + (jc - 1) * npc) as usize];
            assert_eq!(v, 5.0, "({ic},{jc})");
        }
    }
}

#[test]
fn translated_matches_interpreted_solve() {
    let run = |strategy: ExecStrategy| -> (Vec<f64>, u64, Vec<f64>) {
        let mut s = poisson_solver(15);
        s.set_strategy(strategy);
        let history = s.solve(1e-8, 12).unwrap();
        let launches = s.rt.device.ledger_snapshot().launches;
        (s.solution().unwrap(), launches, history)
    };
    let (u_t, launches_t, hist_t) = run(ExecStrategy::Translated);
    let (u_i, launches_i, hist_i) = run(ExecStrategy::Interpreted);
    assert!(launches_t > 0);
    assert_eq!(launches_i, 0);
    assert_eq!(hist_t.len(), hist_i.len());
    for (a, b) in u_t.iter().zip(&u_i) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn report_shape_small_solve() {
    let mut s = poisson_solver(31);
    s.solve(1e-8, 12).unwrap();
    let report = s.report();
    assert_eq!(report.cycles, s.cycles());
    let levels = &report.levels;
    assert_eq!(levels.len(), 4);
    // Work shrinks with the grids; launch counts do not (coarsest aside).
    for w in levels.windows(2) {
        assert!(w[0].threads > w[1].threads);
    }
    let non_coarsest = &levels[..levels.len() - 1];
    for lv in non_coarsest {
        assert_eq!(lv.launches, non_coarsest[0].launches, "{lv:?}");
    }
    assert_eq!(
        report.total.launches,
        s.rt.device.ledger_snapshot().launches
    );
}

#[test]
fn empty_report_before_any_solve() {
    let s = poisson_solver(7);
    let report = s.report();
    assert_eq!(report.cycles, 0);
    assert_eq!(report.total.launches, 0);
    assert!(report.levels.iter().all(|l| l.threads == 0));
    let text = report.render_text();
    assert!(text.contains("Total"));
}

#[test]
fn report_json_round_trip_and_stable_text() {
    let mut s = poisson_solver(15);
    s.solve(1e-8, 12).unwrap();
    let report = s.report();
    let json = report.to_json();
    let back = Report::from_json(&json).unwrap();
    assert_eq!(report, back);
    assert_eq!(report.render_text(), back.render_text());
}
