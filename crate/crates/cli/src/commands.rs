use crate::output::RunDir;
use crate::{CliError, Command, FieldArgs, FlowArgs, ReconstructArgs, RerunArgs, SampleArgs, TrainArgs, VerifyArgs};
use ndarray::s;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rgdl::dnn::{reconstruction_magnetization_correlation, train_stack, LayerFieldSizes};
use rgdl::io::{export_receptive_fields, load_rbm, load_stack, save_stack};
use rgdl::mapping::{random_instance, verification_suite, verify_mapping, BoltzmannMachine, MappingReport, SuiteSummary};
use rgdl::rg::{block_spin_operator_2d, closed_form_coupling, decimation_operator_1d, exactness_residual, free_energy_difference, rg_flow};
use rgdl::sampler::{estimate_observables, sample_ensemble};
use rgdl::{receptive_field_size, receptive_fields, Boundary, Hamiltonian, Lattice, LatticeKind, SampleDataset, SamplerConfig, TrainConfig};
use serde::Serialize;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

pub fn run(command: Command) -> Result<(), CliError> {
    match &command {
        Command::IsingSample(a) => ising_sample(a, &command),
        Command::RgFlow(a) => rg_flow_cmd(a, &command),
        Command::Train(a) => train(a, &command),
        Command::ReceptiveFields(a) => fields(a, &command),
        Command::Reconstruct(a) => reconstruct(a, &command),
        Command::VerifyMapping(a) => verify(a, &command),
        Command::Rerun(a) => rerun(a),
    }
}

fn read_dataset(path: &Path) -> Result<SampleDataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    Ok(SampleDataset::read_binary(BufReader::new(file))?)
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn ising_sample(a: &SampleArgs, command: &Command) -> Result<(), CliError> {
    let cfg = SamplerConfig {
        seed: a.seed,
        burn_in_sweeps: a.burn_in,
        thinning_sweeps: a.thinning,
        num_samples: a.samples,
        chains: a.chains,
    };
    cfg.validate()?;
    let mut run = RunDir::open(Some(&a.out), command)?;
    let h = Hamiltonian::ising(&a.lattice, a.j);
    let ds = sample_ensemble(&h, &a.lattice, a.domain, &cfg)?;
    let mut bytes = Vec::new();
    ds.write_binary(&mut bytes)?;
    run.write("dataset.rgdl", bytes)?;
    if a.csv {
        run.write("samples.csv", ds.to_csv())?;
    }
    let obs = estimate_observables(&ds)?;
    run.write("observables.json", to_json(&obs)?)?;
    run.log(format!("lattice {} J={} domain {} samples {} seed {}", a.lattice, a.j, a.domain, a.samples, a.seed));
    run.log(format!("magnetization {} +- {}", obs.magnetization.mean, obs.magnetization.stderr));
    run.log(format!("|magnetization| {} +- {}", obs.abs_magnetization.mean, obs.abs_magnetization.stderr));
    run.log(format!("nn correlation {} +- {}", obs.nn_correlation.mean, obs.nn_correlation.stderr));
    run.finish()
}

fn rg_flow_cmd(a: &FlowArgs, command: &Command) -> Result<(), CliError> {
    let flow = rg_flow(a.j0, a.steps)?;
    let mut csv = String::from("step,J,closed_form\n");
    for (k, j) in flow.couplings.iter().enumerate() {
        csv.push_str(&format!("{k},{j},{}\n", closed_form_coupling(a.j0, k)?));
    }
    match &a.out {
        None => print!("{csv}"),
        Some(dir) => {
            let mut run = RunDir::open(Some(dir), command)?;
            run.write("rg_flow.csv", &csv)?;
            run.log(format!("J0={} steps={} final J={}", a.j0, a.steps, flow.couplings[a.steps]));
            run.finish()?;
        }
    }
    Ok(())
}

fn train(a: &TrainArgs, command: &Command) -> Result<(), CliError> {
    let cfg = TrainConfig {
        learning_rate: a.lr,
        momentum: a.momentum,
        minibatch: a.minibatch,
        epochs: a.epochs,
        cd_k: a.cd_k,
        l1_strength: a.l1,
        seed: a.seed,
        init_scale: a.init_scale,
    };
    cfg.validate()?;
    let ds = read_dataset(&a.data)?;
    let n = ds.num_samples();
    let held = a.held_out.unwrap_or(n / 10);
    if held >= n {
        return Err(CliError::new("validation", format!("held-out count {held} leaves no training samples out of {n}")));
    }
    let mut run = RunDir::open(Some(&a.out), command)?;
    let data = ds.to_array::<f64>();
    let outcome = train_stack(data.slice(s![..n - held, ..]), &a.layers, ds.domain(), &cfg)?;
    save_stack(&outcome.stack, Some(ds.lattice()), &a.out.join("stack"))?;
    let mut csv = String::from("layer,epoch,reconstruction_error\n");
    for (l, trace) in outcome.traces.iter().enumerate() {
        for (e, err) in trace.iter().enumerate() {
            csv.push_str(&format!("{},{},{err}\n", l + 1, e + 1));
        }
    }
    run.write("training.csv", csv)?;
    run.log(format!("trained layers {:?} on {} samples ({} held out)", a.layers, n - held, held));
    for (l, trace) in outcome.traces.iter().enumerate() {
        match trace.last() {
            Some(e) => run.log(format!("layer {} final reconstruction error {e}", l + 1)),
            None => run.log(format!("layer {} left at initialization", l + 1)),
        }
    }
    run.finish()
}

fn field_lattice(lattice: Option<Lattice>, n_visible: usize) -> Result<Lattice, CliError> {
    match lattice {
        Some(l) => Ok(l),
        None => Ok(Lattice::chain(n_visible, Boundary::Free)?),
    }
}

fn fields(a: &FieldArgs, command: &Command) -> Result<(), CliError> {
    let loaded = load_stack::<f64>(&a.stack)?;
    let sizes = loaded.stack.layer_sizes();
    let lattice = field_lattice(loaded.lattice, sizes[0])?;
    let rf = receptive_fields(&loaded.stack)?;
    let mut run = RunDir::open(Some(&a.out), command)?;
    let written = export_receptive_fields(&rf, &lattice, &a.out)?;
    run.log(format!("wrote {} receptive-field files for layers {:?}", written.len(), sizes));
    if lattice.kind() != LatticeKind::Square2D {
        run.log("visible layer is not a 2D lattice; sizes skipped");
        run.finish()?;
        if a.check_monotone {
            return Err(CliError::new("domain", "the monotone check needs a stack trained on a 2D lattice"));
        }
        return Ok(());
    }
    let layer_sizes: Vec<LayerFieldSizes<f64>> = receptive_field_size(&rf, &lattice)?;
    let mut per_unit = String::from("layer,unit,radius\n");
    let mut medians = String::from("layer,median\n");
    for (l, ls) in layer_sizes.iter().enumerate() {
        for (k, r) in ls.per_unit.iter().enumerate() {
            per_unit.push_str(&format!("{},{k},{r}\n", l + 1));
        }
        medians.push_str(&format!("{},{}\n", l + 1, ls.median));
        run.log(format!("layer {} median radius {}", l + 1, ls.median));
    }
    run.write("sizes.csv", per_unit)?;
    run.write("medians.csv", medians)?;
    let increasing = layer_sizes.windows(2).all(|w| w[1].median > w[0].median);
    run.log(format!("strictly increasing: {increasing}"));
    run.finish()?;
    if a.check_monotone && !increasing {
        let m: Vec<f64> = layer_sizes.iter().map(|s| s.median).collect();
        return Err(CliError::new("validation", format!("median receptive-field sizes are not strictly increasing: {m:?}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ReconstructionSummary {
    samples: usize,
    first_sample: usize,
    magnetization_correlation: f64,
    mean_abs_error: f64,
    layer_sizes: Vec<usize>,
    compression_ratio: f64,
}

fn reconstruct(a: &ReconstructArgs, command: &Command) -> Result<(), CliError> {
    let loaded = load_stack::<f64>(&a.stack)?;
    let ds = read_dataset(&a.data)?;
    let n = ds.num_samples();
    if a.held_out == 0 || a.held_out > n {
        return Err(CliError::new("validation", format!("held-out count must lie in 1..={n}")));
    }
    let mut run = RunDir::open(Some(&a.out), command)?;
    let first = n - a.held_out;
    let inputs = ds.to_array::<f64>().slice_move(s![first.., ..]);
    let probs = loaded.stack.reconstruct_batch(inputs.view())?;
    let correlation = reconstruction_magnetization_correlation(inputs.view(), probs.view())?;
    let up = f64::from(ds.domain().up());
    let mut csv = String::from("sample,site,input,probability\n");
    let mut abs_err = 0.0;
    for (r, (x, p)) in inputs.rows().into_iter().zip(probs.rows()).enumerate() {
        for (site, (&xi, &pi)) in x.iter().zip(p.iter()).enumerate() {
            csv.push_str(&format!("{},{site},{xi},{pi}\n", first + r));
            abs_err += (f64::from(u8::from(xi == up)) - pi).abs();
        }
    }
    run.write("reconstructions.csv", csv)?;
    let layer_sizes = loaded.stack.layer_sizes();
    let summary = ReconstructionSummary {
        samples: a.held_out,
        first_sample: first,
        magnetization_correlation: correlation,
        mean_abs_error: abs_err / inputs.len() as f64,
        compression_ratio: loaded.stack.compression_ratio(),
        layer_sizes: layer_sizes.clone(),
    };
    run.write("summary.json", to_json(&summary)?)?;
    println!(
        "compression ratio {}/{} = {}",
        layer_sizes[0],
        layer_sizes[layer_sizes.len() - 1],
        summary.compression_ratio
    );
    run.log(format!("held-out samples {}..{n}", first));
    run.log(format!("magnetization correlation {correlation}"));
    run.log(format!("mean absolute error {}", summary.mean_abs_error));
    run.finish()
}

#[derive(Serialize)]
struct OperatorCase {
    system: String,
    exactness_residual: f64,
    delta_f: f64,
}

#[derive(Serialize)]
struct Thresholds {
    hidden_distribution_distance: f64,
    conditional_identity_residual: f64,
    kl_when_exact: f64,
    exactness_residual: f64,
    delta_f: f64,
}

const THRESHOLDS: Thresholds = Thresholds {
    hidden_distribution_distance: 1e-12,
    conditional_identity_residual: 1e-10,
    kl_when_exact: 1e-8,
    exactness_residual: 1e-14,
    delta_f: 1e-10,
};

#[derive(Serialize)]
struct VerifyReport {
    suite: SuiteSummary,
    suite_with_visible_coupling: SuiteSummary,
    operators: Vec<OperatorCase>,
    perturbed: MappingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    custom: Option<MappingReport>,
    thresholds: Thresholds,
    pass: bool,
}

fn operator_case(system: &str, op: &rgdl::RgOperator<f64>, h: &Hamiltonian<f64>) -> Result<OperatorCase, CliError> {
    Ok(OperatorCase {
        system: system.to_string(),
        exactness_residual: exactness_residual(op)?,
        delta_f: free_energy_difference(op, h)?,
    })
}

fn suite_passes(s: &SuiteSummary) -> bool {
    s.max_hidden_distribution_distance <= THRESHOLDS.hidden_distribution_distance
        && s.max_conditional_identity_residual <= THRESHOLDS.conditional_identity_residual
        && s.max_kl_when_exact <= THRESHOLDS.kl_when_exact
}

fn verify(a: &VerifyArgs, command: &Command) -> Result<(), CliError> {
    if a.instances == 0 || a.max_visible == 0 || a.max_hidden == 0 {
        return Err(CliError::new("validation", "instances, max-visible and max-hidden must be positive"));
    }
    let custom = match (&a.rbm, &a.hamiltonian) {
        (Some(rbm), Some(ham)) => {
            let params = load_rbm::<f64>(rbm)?;
            let h = Hamiltonian::from_text(&fs::read_to_string(ham)?, Some(params.n_visible()))?;
            Some(verify_mapping(&BoltzmannMachine::from(params), &h)?)
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let suite = verification_suite(a.instances, a.max_visible, a.max_hidden, false, &mut rng)?;
    let suite_vv = verification_suite(a.instances, a.max_visible, a.max_hidden, true, &mut rng)?;

    let chain = Lattice::chain(12, Boundary::Periodic)?;
    let square = Lattice::square(4, 4, Boundary::Periodic)?;
    let operators = vec![
        operator_case("decimation 1d:12:periodic J=1", &decimation_operator_1d(12)?, &Hamiltonian::ising(&chain, 1.0))?,
        operator_case("block spin 2d:4x4:periodic J=0.408", &block_spin_operator_2d(&square)?, &Hamiltonian::ising(&square, 0.408))?,
    ];

    // exact data Hamiltonian plus a field on the first spin
    let (machine, _) = random_instance::<f64, _>(4, 3, false, &mut rng);
    let mut shifted = machine.visible_hamiltonian()?;
    shifted.add_term(vec![0], 0.25)?;
    let perturbed = verify_mapping(&machine, &shifted)?;

    let pass = suite_passes(&suite)
        && suite_passes(&suite_vv)
        && operators
            .iter()
            .all(|c| c.exactness_residual <= THRESHOLDS.exactness_residual && c.delta_f.abs() <= THRESHOLDS.delta_f)
        && perturbed.exactness_residual > THRESHOLDS.exactness_residual;
    let report = VerifyReport {
        suite,
        suite_with_visible_coupling: suite_vv,
        operators,
        perturbed,
        custom,
        thresholds: THRESHOLDS,
        pass,
    };
    let json = to_json(&report)?;
    match &a.out {
        None => print!("{json}"),
        Some(dir) => {
            let mut run = RunDir::open(Some(dir), command)?;
            run.write("report.json", &json)?;
            run.log(format!("{} random instances per suite, seed {}", a.instances, a.seed));
            run.log(format!("pass: {pass}"));
            run.finish()?;
        }
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::new("verification", "mapping residuals exceed their thresholds; see the report"))
    }
}

fn set_out(command: &mut Command, out: PathBuf) {
    match command {
        Command::IsingSample(a) => a.out = out,
        Command::Train(a) => a.out = out,
        Command::ReceptiveFields(a) => a.out = out,
        Command::Reconstruct(a) => a.out = out,
        Command::RgFlow(a) => a.out = Some(out),
        Command::VerifyMapping(a) => a.out = Some(out),
        Command::Rerun(_) => {}
    }
}

fn rerun(a: &RerunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::new("io", format!("{}: {e}", a.config.display())))?;
    let mut command: Command = serde_json::from_str(&text)?;
    if matches!(command, Command::Rerun(_)) {
        return Err(CliError::new("validation", "a rerun config cannot point at another rerun"));
    }
    if let Some(out) = &a.out {
        set_out(&mut command, out.clone());
    }
    run(command)
}
