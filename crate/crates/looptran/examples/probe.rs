use looptran::mg::*;
use std::time::Instant;

fn main() {
    for n in [63usize, 127] {
        let spec = ProblemSpec { n, diffusion: DiffusionField::Constant(1.0), rhs: 1.0 };
        let mut s = Solver::from_problem(&spec, 3, InterpMode::Bilinear, 1, 1).unwrap();
        let t = Instant::now();
        let history = s.solve(1e-8, 20).unwrap();
        println!("n={n}: {} cycles in {:?}, last rel {:.3e}, factors: {:?}",
            history.len(), t.elapsed(), history.last().unwrap(),
            history.windows(2).map(|w| (w[1]/w[0]*1000.0).round()/1000.0).collect::<Vec<_>>());
    }
    let n = 1023usize;
    let spec = ProblemSpec { n, diffusion: DiffusionField::Constant(1.0), rhs: 1.0 };
    let t = Instant::now();
    let mut s = Solver::from_problem(&spec, 3, InterpMode::Bilinear, 1, 1).unwrap();
    println!("n=1023 setup: {:?}", t.elapsed());
    let t = Instant::now();
    match s.solve(1e-2, 2) {
        Ok(h) => println!("n=1023: {} cycles in {:?}, hist {:?}", h.len(), t.elapsed(), h),
        Err(MgError::NotConverged { history }) => println!("n=1023 notconv: {:?} in {:?}", history, t.elapsed()),
        Err(e) => println!("err {e}"),
    }
    let rep = s.report();
    for lv in &rep.levels {
        println!("level {} n={} launches={} threads={}", lv.level, lv.n, lv.launches, lv.threads);
    }
}
