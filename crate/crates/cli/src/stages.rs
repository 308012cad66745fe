//! The five pipeline stages plus the gradient-check and cost-report
//! commands. Every stage communicates with the next only through files in
//! the run directory.

use std::path::{Path, PathBuf};

use qnas_core::error::{Error, Result};
use qnas_core::evo::{
    default_valid_ids, evolve, noisy_qml_accuracy, pure_qml_accuracy, score_circuit, Estimator,
    Gene, GeneDomain,
};
use qnas_core::grad::{
    finite_diff_grad, param_shift_grad, read_checkpoint, train, write_checkpoint, Checkpoint, Loss,
    TrainResult,
};
use qnas_core::noise::{success_rate, DeviceModel};
use qnas_core::prune::{sweep_ratios, PruneMask};
use qnas_core::qcompile::{circuit_stats, route, CompiledCircuit, QubitMapping};
use qnas_core::qstate::{random_circuit, run_circuit, Circuit, GateKind, RunMode};
use qnas_core::space::{
    build_supercircuit, supercircuit_checkpoint, supercircuit_from_checkpoint, train_supercircuit,
    SuperCircuit,
};
use qnas_core::tasks::{vqe_expectation, vqe_expectation_noisy, Split, Task};

use crate::config::RunConfig;
use crate::csvio::{read_rows, write_csv};

fn quoted(s: &str) -> String {
    format!("\"{s}\"")
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn super_ckpt_path(cfg: &RunConfig) -> PathBuf {
    cfg.run.dir.join("super.ckpt")
}

pub fn gene_path(cfg: &RunConfig) -> PathBuf {
    cfg.run.dir.join("best_gene.txt")
}

pub fn sub_ckpt_path(cfg: &RunConfig) -> PathBuf {
    cfg.run.dir.join("sub.ckpt")
}

pub fn pruned_ckpt_path(cfg: &RunConfig) -> PathBuf {
    cfg.run.dir.join("pruned.ckpt")
}

/// Stage 1: train the SuperCircuit with restricted sampling.
pub fn cmd_train_super(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    cfg.save_into_run_dir()?;
    let task = cfg.build_task()?;
    let mut sc = build_supercircuit(cfg.design_space()?)?;
    sc.sampling.max_layer_diff = cfg.space.max_layer_diff;
    let tc = cfg.super_train.to_train_config(cfg.run.seed);
    let log = match &task {
        Task::Qml(t) => train_supercircuit(&mut sc, &t.loss(Split::Train), &tc)?,
        Task::Vqe(t) => train_supercircuit(&mut sc, &t.loss(), &tc)?,
    };
    let steps = log.history.len() as u64;
    write_checkpoint(&super_ckpt_path(cfg), &supercircuit_checkpoint(&sc, steps))?;
    let rows: Vec<Vec<String>> = log
        .history
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                fmt(r.lr),
                fmt(r.loss),
                r.lower_bound.to_string(),
                r.layer_diff.to_string(),
                quoted(&r.spec),
            ]
        })
        .collect();
    write_csv(
        &cfg.run.dir.join("super_history.csv"),
        &["step", "lr", "loss", "lower_bound", "layer_diff", "spec"],
        &rows,
    )?;
    log::info!("train-super: {} steps, checkpoint at {}", steps, super_ckpt_path(cfg).display());
    Ok(())
}

fn read_checkpoint_at(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(path).map_err(|e| match e {
        Error::Io(io) => Error::Validation(format!("checkpoint {}: {io}", path.display())),
        other => other,
    })
}

fn load_supercircuit_checked(cfg: &RunConfig, path: &Path) -> Result<SuperCircuit> {
    let ckpt = read_checkpoint_at(path)?;
    let sc = supercircuit_from_checkpoint(&ckpt)?;
    let expected = cfg.design_space()?;
    if sc.space != expected {
        return Err(Error::Validation(format!(
            "checkpoint space {}/{}q/{}b does not match config {}/{}q/{}b",
            sc.space.kind.name(),
            sc.space.n_qubits,
            sc.space.n_blocks,
            expected.kind.name(),
            expected.n_qubits,
            expected.n_blocks
        )));
    }
    Ok(sc)
}

/// Stage 2: evolutionary co-search of SubCircuit and qubit mapping.
pub fn cmd_search(cfg: &RunConfig, super_ckpt: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    cfg.save_into_run_dir()?;
    let default_path = super_ckpt_path(cfg);
    let path = super_ckpt.unwrap_or(&default_path);
    let sc = load_supercircuit_checked(cfg, path)?;
    let task = cfg.build_task()?;
    let device = cfg.load_device()?;
    let mode = cfg.estimator_mode()?;
    let est = Estimator::new(mode, &device, &task, &sc, cfg.valid_subset());
    let domain = GeneDomain::of(&sc, &device);
    let result = evolve(&est, &domain, &cfg.evo_config())?;

    std::fs::write(
        gene_path(cfg),
        format!("# estimator = {}\n{}\n", mode.name(), result.best_gene.serialize()),
    )?;
    let rows: Vec<Vec<String>> = result
        .history
        .iter()
        .map(|r| {
            vec![r.iteration.to_string(), fmt(r.best), fmt(r.mean), quoted(&r.best_gene)]
        })
        .collect();
    write_csv(
        &cfg.run.dir.join("evo_history.csv"),
        &["iteration", "best_score", "mean_score", "best_gene"],
        &rows,
    )?;
    let c = result.counters;
    write_csv(
        &cfg.run.dir.join("search_cost.csv"),
        &["scoring_passes", "unique_evals", "culled"],
        &[vec![c.scoring_passes.to_string(), c.unique_evals.to_string(), c.culled.to_string()]],
    )?;
    log::info!(
        "search: best score {} after {} scoring passes ({} unique)",
        result.best_score,
        c.scoring_passes,
        c.unique_evals
    );
    Ok(())
}

pub fn read_gene_file(path: &Path) -> Result<Gene> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("gene file {}: {e}", path.display())))?;
    let line = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .ok_or_else(|| Error::Parse(format!("gene file {} is empty", path.display())))?;
    Gene::parse(line)
}

fn train_with_task(circuit: &Circuit, task: &Task, tc: &qnas_core::grad::TrainConfig) -> Result<TrainResult> {
    match task {
        Task::Qml(t) => {
            let train_loss = t.loss(Split::Train);
            let valid_loss = t.loss(Split::Valid);
            train(circuit, &train_loss, Some(&valid_loss), tc)
        }
        Task::Vqe(t) => train(circuit, &t.loss(), None, tc),
    }
}

/// Stage 3: train the searched SubCircuit from scratch. The ansatz comes
/// from the gene file (decoded against the config's space) or from an
/// explicit circuit file for human/random baselines.
pub fn cmd_train_sub(cfg: &RunConfig, gene: Option<&Path>, circuit_file: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    cfg.save_into_run_dir()?;
    let task = cfg.build_task()?;
    let (circuit, gene_text) = match (gene, circuit_file) {
        (_, Some(file)) => {
            let text = std::fs::read_to_string(file)?;
            (Circuit::from_text(&text, Some(cfg.space.n_qubits))?, None)
        }
        (gene_arg, None) => {
            let default_path = gene_path(cfg);
            let path = gene_arg.unwrap_or(&default_path);
            let gene = read_gene_file(path)?;
            let sc = build_supercircuit(cfg.design_space()?)?;
            let spec = gene.to_spec(&sc.space)?;
            let view = sc.instantiate(&spec)?;
            (view.circuit, Some(gene.serialize()))
        }
    };
    let tc = cfg.sub_train.to_train_config(cfg.run.seed);
    let result = train_with_task(&circuit, &task, &tc)?;

    let mut ckpt = Checkpoint::new(circuit, result.params.clone());
    ckpt.step = result.history.len() as u64;
    ckpt.opt = Some(result.opt.clone());
    if let Some(g) = gene_text {
        ckpt.extra.insert("gene".into(), g);
    }
    write_checkpoint(&sub_ckpt_path(cfg), &ckpt)?;

    let rows: Vec<Vec<String>> = result
        .history
        .iter()
        .map(|r| vec![r.step.to_string(), fmt(r.lr), fmt(r.loss)])
        .collect();
    write_csv(&cfg.run.dir.join("sub_history.csv"), &["step", "lr", "loss"], &rows)?;
    if !result.valid_history.is_empty() {
        let rows: Vec<Vec<String>> = result
            .valid_history
            .iter()
            .map(|(s, l)| vec![s.to_string(), fmt(*l)])
            .collect();
        write_csv(&cfg.run.dir.join("sub_valid_history.csv"), &["step", "valid_loss"], &rows)?;
    }
    log::info!("train-sub: {} steps, checkpoint at {}", result.history.len(), sub_ckpt_path(cfg).display());
    Ok(())
}

fn mapping_of_checkpoint(ckpt: &Checkpoint, device: &DeviceModel) -> Result<QubitMapping> {
    match ckpt.extra.get("gene") {
        Some(text) => Gene::parse(text)?.to_mapping(device.n_physical),
        None => Ok(QubitMapping::identity(ckpt.circuit.n_qubits)),
    }
}

/// Noise-free quality metric, higher is better: accuracy for QML (validation
/// split), negated expectation for VQE.
fn quality_metric(task: &Task, circuit: &Circuit, params: &[f64]) -> Result<f64> {
    match task {
        Task::Qml(t) => {
            let ids: Vec<usize> = (0..t.data.valid.len()).collect();
            pure_qml_accuracy(t, circuit, params, Split::Valid, &ids)
        }
        Task::Vqe(t) => Ok(-vqe_expectation(circuit, params, &t.hamiltonian)?),
    }
}

/// Stage 4: iterative magnitude pruning with a final-ratio sweep.
pub fn cmd_prune(cfg: &RunConfig, ckpt_path: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    cfg.save_into_run_dir()?;
    let default_path = sub_ckpt_path(cfg);
    let path = ckpt_path.unwrap_or(&default_path);
    let ckpt = read_checkpoint_at(path)?;
    let task = cfg.build_task()?;
    let device = cfg.load_device()?;
    let mode = cfg.estimator_mode()?;
    let mapping = mapping_of_checkpoint(&ckpt, &device)?;
    let valid_ids = default_valid_ids(&task, cfg.valid_subset());

    let circuit = ckpt.circuit.clone();
    let mut tc = cfg.sub_train.to_train_config(cfg.run.seed.wrapping_add(17));
    tc.epochs = cfg.prune.epochs;
    tc.batch_size = cfg.prune.batch_size;
    tc.warmup_steps = 0;

    let noisy = |params: &[f64]| {
        score_circuit(mode, &device, &task, &circuit, params, &mapping, &valid_ids)
    };
    let quality = |params: &[f64]| quality_metric(&task, &circuit, params);

    let result = match &task {
        Task::Qml(t) => sweep_ratios(
            &circuit,
            &t.loss(Split::Train),
            &cfg.prune.ratios,
            cfg.prune.r_initial,
            &tc,
            ckpt.params.clone(),
            noisy,
            quality,
        )?,
        Task::Vqe(t) => sweep_ratios(
            &circuit,
            &t.loss(),
            &cfg.prune.ratios,
            cfg.prune.r_initial,
            &tc,
            ckpt.params.clone(),
            noisy,
            quality,
        )?,
    };

    let mut rows = Vec::new();
    for (i, row) in result.rows.iter().enumerate() {
        let compiled = route(&circuit, &row.params, &mapping, &device)?;
        let stats = circuit_stats(&compiled);
        rows.push(vec![
            fmt(row.ratio),
            fmt(row.noisy_score),
            fmt(row.quality),
            row.mask.count().to_string(),
            stats.n_gates.to_string(),
            stats.depth.to_string(),
            (result.selected == Some(i)).to_string(),
        ]);
    }
    write_csv(
        &cfg.run.dir.join("prune_report.csv"),
        &["ratio", "noisy_score", "noise_free_quality", "pruned_slots", "compiled_gates", "depth", "selected"],
        &rows,
    )?;

    let (params, mask, sel_ratio) = match result.selected {
        Some(i) => (
            result.rows[i].params.clone(),
            result.rows[i].mask.clone(),
            result.rows[i].ratio,
        ),
        None => (ckpt.params.clone(), PruneMask::empty(ckpt.params.len()), 0.0),
    };
    let mut out = Checkpoint::new(circuit, params);
    out.step = ckpt.step;
    out.mask = Some(mask.pruned.clone());
    if let Some(g) = ckpt.extra.get("gene") {
        out.extra.insert("gene".into(), g.clone());
    }
    out.extra.insert("selected_ratio".into(), fmt(sel_ratio));
    out.extra.insert("unpruned_quality".into(), fmt(result.unpruned_quality));
    write_checkpoint(&pruned_ckpt_path(cfg), &out)?;
    log::info!("prune: selected ratio {sel_ratio}, {} slots pruned", mask.count());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub depth: usize,
    pub n_gates: usize,
    pub n_1q: usize,
    pub n_cnot: usize,
    pub n_params_active: usize,
    pub success_rate: f64,
    pub metric_pure: f64,
    pub metric_noisy: Option<f64>,
    pub metric_shots: Option<f64>,
    pub loss_pure: f64,
}

/// Shot-sampled noise-free accuracy: per-qubit ⟨Z⟩ estimated from sampled
/// counts, then the usual readout head.
fn shot_accuracy(
    t: &qnas_core::tasks::QmlTask,
    circuit: &Circuit,
    params: &[f64],
    shots: u64,
    seed: u64,
    ids: &[usize],
) -> Result<f64> {
    use qnas_core::qstate::sample_counts;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ds = t.data.split(Split::Test);
    let mut hits = 0usize;
    for &i in ids {
        let full = t.prepared_circuit(circuit, &ds.features[i])?;
        let state = run_circuit(&full, params, RunMode::default())?;
        let counts = sample_counts(&state, shots, &mut rng);
        let n = state.n_qubits;
        let mut zs = vec![0.0; n];
        for (bits, count) in &counts {
            for (q, z) in zs.iter_mut().enumerate() {
                let ch = bits.as_bytes()[n - 1 - q];
                *z += if ch == b'1' { -(*count as f64) } else { *count as f64 };
            }
        }
        for z in &mut zs {
            *z /= shots as f64;
        }
        let logits = qnas_core::tasks::qml_logits(&zs, t.n_classes)?;
        let probs = qnas_core::tasks::softmax(&logits);
        if qnas_core::tasks::argmax(&probs) == ds.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len().max(1) as f64)
}

/// Stage 5: evaluate a checkpoint on the noise-free and noisy backends and
/// report compiled-circuit statistics.
pub fn cmd_eval(cfg: &RunConfig, ckpt_path: Option<&Path>, backend: &str) -> Result<EvalReport> {
    cfg.validate()?;
    cfg.save_into_run_dir()?;
    let default_path = pruned_ckpt_path(cfg);
    let fallback = sub_ckpt_path(cfg);
    let path = match ckpt_path {
        Some(p) => p.to_path_buf(),
        None if default_path.exists() => default_path,
        None => fallback,
    };
    let ckpt = read_checkpoint_at(&path)?;
    let task = cfg.build_task()?;
    let device = cfg.load_device()?;
    let mapping = mapping_of_checkpoint(&ckpt, &device)?;
    let compiled: CompiledCircuit = route(&ckpt.circuit, &ckpt.params, &mapping, &device)?;
    let stats = circuit_stats(&compiled);
    let rate = success_rate(&compiled.circuit, &device)?;
    let active = match &ckpt.mask {
        Some(m) => m.iter().filter(|&&b| !b).count(),
        None => ckpt.params.len(),
    };

    let with_noisy = backend != "pure";
    let test_ids: Vec<usize> = match &task {
        Task::Qml(t) => {
            let n = t.data.test.len();
            let cap = if cfg.eval.test_subset == 0 { n } else { cfg.eval.test_subset.min(n) };
            (0..cap).collect()
        }
        Task::Vqe(_) => vec![0],
    };

    let report = match &task {
        Task::Qml(t) => {
            let metric_pure = pure_qml_accuracy(t, &ckpt.circuit, &ckpt.params, Split::Test, &test_ids)?;
            let loss_pure = {
                let loss = t.loss(Split::Test);
                qnas_core::grad::batch_loss(&loss, &ckpt.circuit, &ckpt.params, &test_ids)?
            };
            let metric_noisy = if with_noisy {
                Some(noisy_qml_accuracy(t, &compiled, &device, Split::Test, &test_ids)?)
            } else {
                None
            };
            let metric_shots = Some(shot_accuracy(
                t,
                &ckpt.circuit,
                &ckpt.params,
                cfg.eval.shots,
                cfg.run.seed,
                &test_ids,
            )?);
            EvalReport {
                depth: stats.depth,
                n_gates: stats.n_gates,
                n_1q: stats.n_1q,
                n_cnot: stats.n_cnot,
                n_params_active: active,
                success_rate: rate,
                metric_pure,
                metric_noisy,
                metric_shots,
                loss_pure,
            }
        }
        Task::Vqe(t) => {
            let metric_pure = vqe_expectation(&ckpt.circuit, &ckpt.params, &t.hamiltonian)?;
            let metric_noisy = if with_noisy {
                Some(vqe_expectation_noisy(&compiled, &device, &t.hamiltonian)?)
            } else {
                None
            };
            EvalReport {
                depth: stats.depth,
                n_gates: stats.n_gates,
                n_1q: stats.n_1q,
                n_cnot: stats.n_cnot,
                n_params_active: active,
                success_rate: rate,
                metric_pure,
                metric_noisy,
                metric_shots: None,
                loss_pure: metric_pure,
            }
        }
    };

    std::fs::write(cfg.run.dir.join("compiled.qc"), compiled.circuit.to_text())?;
    std::fs::write(cfg.run.dir.join("compiled_stats.txt"), stats.to_record())?;

    let blank = String::new;
    write_csv(
        &cfg.run.dir.join("eval_report.csv"),
        &[
            "depth",
            "n_gates",
            "n_1q",
            "n_cnot",
            "n_params",
            "success_rate",
            "metric_pure",
            "metric_noisy",
            "metric_shots",
            "loss_pure",
        ],
        &[vec![
            report.depth.to_string(),
            report.n_gates.to_string(),
            report.n_1q.to_string(),
            report.n_cnot.to_string(),
            report.n_params_active.to_string(),
            fmt(report.success_rate),
            fmt(report.metric_pure),
            report.metric_noisy.map(fmt).unwrap_or_else(blank),
            report.metric_shots.map(fmt).unwrap_or_else(blank),
            fmt(report.loss_pure),
        ]],
    )?;

    println!("evaluation of {}", path.display());
    println!("  depth           {}", report.depth);
    println!("  gates           {} ({} 1q + {} CNOT)", report.n_gates, report.n_1q, report.n_cnot);
    println!("  active params   {}", report.n_params_active);
    println!("  success rate    {:.6}", report.success_rate);
    match &task {
        Task::Qml(_) => {
            println!("  accuracy (pure) {:.4}", report.metric_pure);
            if let Some(m) = report.metric_noisy {
                println!("  accuracy (noisy){:.4}", m);
            }
            if let Some(m) = report.metric_shots {
                println!("  accuracy (shots){:.4}", m);
            }
        }
        Task::Vqe(_) => {
            println!("  energy (pure)   {:.6}", report.metric_pure);
            if let Some(m) = report.metric_noisy {
                println!("  energy (noisy)  {:.6}", m);
            }
        }
    }
    Ok(report)
}

/// Parameter-shift versus finite-difference oracle over 50 random circuits.
pub fn cmd_grad_check() -> Result<()> {
    use qnas_core::qstate::{expectation, Pauli, PauliString};
    use rand::{RngExt, SeedableRng};
    use std::borrow::Cow;

    struct ObsLoss {
        obs: Vec<PauliString>,
    }
    impl Loss for ObsLoss {
        fn n_samples(&self) -> usize {
            1
        }
        fn prepare<'a>(&self, ansatz: &'a Circuit, _s: usize) -> Result<Cow<'a, Circuit>> {
            Ok(Cow::Borrowed(ansatz))
        }
        fn expectations(&self, prepared: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
            let state = run_circuit(prepared, params, RunMode::Dynamic)?;
            Ok(self.obs.iter().map(|o| expectation(&state, o)).collect())
        }
        fn loss_from(&self, evs: &[f64], _s: usize) -> f64 {
            evs.iter().sum()
        }
        fn dloss_dev(&self, evs: &[f64], _s: usize) -> Vec<f64> {
            vec![1.0; evs.len()]
        }
    }

    use GateKind::*;
    let kinds = [RX, RY, RZ, RZZ, RXX, RZX, U1, U3];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.random_range(2..=4);
        let gates = rng.random_range(4..=12);
        let (circuit, params) = random_circuit(n, gates, &kinds, &mut rng);
        let obs = (0..n)
            .map(|q| PauliString::new([(q, Pauli::Z)], rng.random_range(-0.1..0.1)))
            .collect();
        let loss = ObsLoss { obs };
        let (_, shift) = param_shift_grad(&loss, &circuit, &params, &[0])?;
        let fd = finite_diff_grad(&loss, &circuit, &params, &[0], 5e-3)?;
        for (s, f) in shift.iter().zip(&fd) {
            let rel = (s - f).abs() / s.abs().max(f.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        log::debug!("grad-check case {case}: ok");
    }
    println!("grad-check: worst relative error {worst:.3e} over 50 circuits");
    if worst < 1e-5 {
        println!("grad-check: PASS (< 1e-5)");
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed: {worst:.3e} >= 1e-5")))
    }
}

/// Evaluation-count bookkeeping: the naive search cost versus the
/// SuperCircuit-based flow, from the run directory's CSVs.
pub fn cmd_cost_report(cfg: &RunConfig, devices: u64) -> Result<()> {
    let dir = &cfg.run.dir;
    let n_train = crate::csvio::count_rows(&dir.join("super_history.csv"))? as u64;
    let cost_rows = read_rows(&dir.join("search_cost.csv"))?;
    let row = cost_rows
        .first()
        .ok_or_else(|| Error::Validation("search_cost.csv is empty; run the search stage first".into()))?;
    let n_search: u64 = row[0]
        .parse()
        .map_err(|_| Error::Parse("bad scoring_passes in search_cost.csv".into()))?;
    let unique: u64 =
        row[1].parse().map_err(|_| Error::Parse("bad unique_evals in search_cost.csv".into()))?;
    let n_eval = cfg.search.valid_subset.max(1) as u64;

    let naive = devices * n_search * (n_train + n_eval);
    let super_based = n_train + devices * n_search * n_eval;
    println!("search-cost accounting (circuit-evaluation units)");
    println!("  devices              {devices}");
    println!("  N_train (steps)      {n_train}");
    println!("  N_search (scorings)  {n_search}  (unique genes {unique})");
    println!("  N_eval  (per score)  {n_eval}");
    println!("  naive flow           {naive}");
    println!("  supercircuit flow    {super_based}");
    if super_based > 0 {
        println!("  reduction            {:.1}x", naive as f64 / super_based as f64);
    }
    Ok(())
}
