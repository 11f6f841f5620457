use qfp::synthesis::*;
use std::time::Instant;

fn main() {
    let sc = Scenario::new(ScenarioKind::ThreeElemOneTone);
    let mut p = vec![0.5; sc.dim()];
    p[0] = 2.9; p[2] = 3.1;
    let t0 = Instant::now();
    let n = 2000;
    let mut acc = 0.0;
    for i in 0..n {
        p[4] = i as f64 * 1e-6;
        acc += cost(&p, &sc, 1.3);
    }
    println!("3x1 cost eval: {:.1} us (acc {acc:.3})", t0.elapsed().as_secs_f64() * 1e6 / n as f64);

    let sc2 = Scenario::new(ScenarioKind::ThreeElemTwoTone);
    let mut p2 = vec![0.5; sc2.dim()];
    p2[0] = 3.9; p2[2] = 3.9; p2[4] = 3.9; p2[6] = 3.9;
    let t0 = Instant::now();
    let n2 = 500;
    for i in 0..n2 {
        p2[8] = i as f64 * 1e-6;
        acc += cost(&p2, &sc2, 1.3);
    }
    println!("3x2 worst-case cost eval: {:.1} us", t0.elapsed().as_secs_f64() * 1e6 / n2 as f64);

    let settings = PsoSettings::with_seed(1);
    let t0 = Instant::now();
    let res = synthesize(std::f64::consts::PI / 2.0, &sc, &settings, 1);
    let dt = t0.elapsed().as_secs_f64();
    match res {
        Ok(r) => println!("one restart at pi/2: {:.1} s  P={:.5} F={:.7} feasible={}", dt, r.report.success, r.report.fidelity, r.feasible),
        Err(e) => println!("one restart at pi/2: {:.1} s  INFEASIBLE ({e})", dt),
    }
}
