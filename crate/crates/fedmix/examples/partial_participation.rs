//! The general solver: ragged device sizes, Bernoulli device participation,
//! tau-nice local subsampling, LSVRG table refreshes instead of a full SAGA
//! gradient table, and a proximal step for per-device L1 regularizers.

use fedmix::losses::{DeviceFiniteSum, LossComponent, SparseRow};
use fedmix::model::StackedModel;
use fedmix::objective::{MixtureProblem, Regularizer};
use fedmix::solvers::{
    l2sgdpp_run, JacobianRule, LocalSampling, ParticipationScheme, SolverConfig, SolverVariant,
    TraceSpec,
};
use fedmix::theory::l2sgdpp_rates;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ragged_problem(lambda: f64) -> fedmix::Result<MixtureProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let d = 6;
    let sizes = [3usize, 5, 8, 2];
    let devices = sizes
        .iter()
        .map(|&m| {
            let comps = (0..m)
                .map(|_| {
                    let idx: Vec<u32> = (0..d as u32).collect();
                    let mut vals: Vec<f64> = idx.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                    vals.iter_mut().for_each(|v| *v *= 2.0 / norm);
                    let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    LossComponent::Logistic { row: SparseRow::new(idx.clone(), vals), label }
                })
                .collect();
            DeviceFiniteSum::new(d, comps, 1e-2)
        })
        .collect::<fedmix::Result<Vec<_>>>()?;
    let regs = vec![
        Regularizer::Zero,
        Regularizer::L1 { weight: 1e-3 },
        Regularizer::Zero,
        Regularizer::L1 { weight: 5e-4 },
    ];
    MixtureProblem::with_regularizers(lambda, devices, regs)
}

fn main() -> fedmix::Result<()> {
    env_logger::init();
    let problem = ragged_problem(0.2)?;
    let mut config = SolverConfig::new(SolverVariant::L2sgdpp, 0.0, 0.2, 400_000, 5);
    config.participation = ParticipationScheme::Bernoulli { probs: vec![0.9, 0.7, 0.8, 1.0] };
    config.sampling = LocalSampling::TauNice { tau: 2 };
    config.jacobian_rule = JacobianRule::Lsvrg;
    let rates = l2sgdpp_rates(&problem, &config, 1e-6)?;
    config.alpha = rates.alpha;
    println!(
        "theoretical alpha = {:.4e}, iteration bound to 1e-6: {:.0}",
        rates.alpha, rates.iter_bound
    );

    let x0 = StackedModel::zeros(problem.n(), problem.d());
    let out = l2sgdpp_run(&x0, &problem, &config, TraceSpec::every(20_000))?;
    for row in out.trace.rows.iter().step_by(2) {
        println!(
            "k = {:7}  data passes = {:8.1}  F = {:.10}",
            row.k, row.data_passes, row.objective
        );
    }
    // prox fixed point: x = prox_{alpha R}(x - alpha grad(x)) block by block
    let g = problem.grad_smooth(&out.x)?;
    let mut moved = 0.0f64;
    for i in 0..problem.n() {
        let mut z: Vec<f64> = out
            .x
            .block(i)
            .iter()
            .zip(g.block(i))
            .map(|(x, gv)| x - config.alpha * gv)
            .collect();
        problem.regularizer(i).prox_in_place(config.alpha, &mut z);
        for (a, b) in z.iter().zip(out.x.block(i)) {
            moved = moved.max((a - b).abs());
        }
    }
    println!("prox fixed-point residual: {moved:.2e}");
    let zeros = out.x.as_slice().iter().filter(|v| **v == 0.0).count();
    println!("exact zeros in the solution (L1 effect): {zeros}");
    Ok(())
}
