use nozzle_shock::gas::{GasModel, GasState};
use nozzle_shock::setup::{InflowPerturbation, NozzleSpec, ProblemSetup};
use nozzle_shock::solver::*;
use std::time::Instant;

fn main() {
    let model = GasModel::new(1.4, 1.0, 1.0).unwrap();
    let u = GasState::new(1.0, 0.0, 2.0 * 1.4f64.sqrt(), 0.0);
    for sigma in [0.02, 0.01, 0.005] {
        let nozzle = NozzleSpec::new(1.0, sigma, 0.05, 0.5, true).unwrap();
        let nozzle = NozzleSpec { length_l: 1.0, sigma, xi0: 0.5 };
        let setup = ProblemSetup::new(model, nozzle, u, InflowPerturbation::zero()).unwrap();
        let pe = setup.pe_interval.mid();
        let grid = SolverGrid { nx: 48, ny: 32, march_nx: None };
        let t = Instant::now();
        let rep = fixed_point_solve(&setup, pe, grid, SeedInit::default(), &SolverOptions::default()).unwrap();
        let rt: Vec<String> = rep.iterations.iter().map(|it| format!("{:.3}", it.contraction_ratio.unwrap_or(f64::NAN))).collect();
        println!("sigma={sigma}: iters={} dxi={:+.4e} tail={:?} time={:?}", rep.iterations.len(), rep.front.delta_xi, rep.tail_contraction_ratio(1e-10), t.elapsed());
        println!("  ratios: {}", rt.join(" "));
    }
}
