//! Acceptance suite: one verdict line per criterion.
//!
//! MNIST criteria read the IDX files from `$MNIST_DIR` (default
//! `/root/data/mnist`), EMNIST digits from `$EMNIST_DIR` (default
//! `/root/data/emnist`). A criterion whose data is missing reports BLOCKED.
//!
//! A FAIL on an exact criterion (1-5) makes the binary exit non-zero. FAILs on
//! the measured training-outcome criteria (6-10) are printed but only fatal
//! with `LAZYPROP_ACCEPTANCE_STRICT=1`.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use lazyprop::datasets::{load_idx_with, IdxOptions};
use lazyprop::landscape::{accuracy_at, trace_run, Trajectory};
use lazyprop::model::{backward_mlp, backward_toy, forward_mlp, mse_loss, one_hot};
use lazyprop::trainer::{run_experiment_with_gate, RunObserver, RunOutcome, StepEvent};
use lazyprop::{
    init_mlp, make_two_clouds, preset_initial_conditions, sample_surface, Dataset, GateKind, GridSpec,
    LinearToyModel, MetricsRecord, MlpModel, Model, Result, ToyTargets, ToyTaskSpec, TrainConfig, UpdateGate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_EPS: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-4;
const ENERGY_TOL: f64 = 1e-9;
const BACKPROP_TARGET: f64 = 0.975;
const BACKPROP_EPOCH_LIMIT: usize = 15;
const BACKPROP_SEEDS: [u64; 3] = [1, 2, 3];
const LONG_EPOCHS: usize = 50;
const PARITY_POINTS: f64 = 0.005;
const MAX_REMEMBERED: f64 = 0.20;
const MATCHED_ACCURACY: f64 = 0.97;
const MIN_UPDATE_SAVING: f64 = 5.0;
const MIN_LOSS_RATIO: f64 = 2.0;
const CORESET_GAP: f64 = 0.015;
const EMNIST_EPOCHS: usize = 10;

const EXACT: [&str; 5] = ["1 ", "2 ", "3 ", "4 ", "5 "];

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Blocked,
}

struct Line {
    id: &'static str,
    verdict: Verdict,
    detail: String,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Metrics stream plus the step-level L1 path length of one run.
#[derive(Default)]
struct Audit {
    records: Vec<MetricsRecord>,
    path_l1: f64,
}

impl<M: Model<f64>> RunObserver<f64, M> for Audit {
    fn on_record(&mut self, r: &MetricsRecord) -> Result<()> {
        self.records.push(r.clone());
        Ok(())
    }

    fn on_step(&mut self, _m: &M, e: &StepEvent) {
        self.path_l1 += e.delta_l1;
    }
}

/// Everything criterion 4 needs from one shipped run.
struct EnergyTrace {
    label: String,
    m_total: f64,
    per_sample_sum: f64,
    path_l1: f64,
    records: Vec<MetricsRecord>,
}

impl EnergyTrace {
    fn of_mlp(label: String, out: &RunOutcome<f64, MlpModel<f64>>, audit: &Audit) -> Self {
        Self {
            label,
            m_total: out.ledger.m_total(),
            per_sample_sum: out.ledger.per_sample_energy().iter().sum(),
            path_l1: audit.path_l1,
            records: audit.records.clone(),
        }
    }

    fn of_toy(t: &Trajectory) -> Self {
        Self {
            label: format!("toy {}-ic{}", t.rule, t.initial_condition_id),
            m_total: t.m_total,
            per_sample_sum: t.per_sample_energy.iter().sum(),
            path_l1: t.path_length(),
            records: t.records.clone(),
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let tol = ENERGY_TOL * self.m_total.abs().max(f64::MIN_POSITIVE);
        if (self.m_total - self.per_sample_sum).abs() > tol {
            v.push(format!("{}: M {} vs per-sample sum {}", self.label, self.m_total, self.per_sample_sum));
        }
        if (self.m_total - self.path_l1).abs() > tol {
            v.push(format!("{}: M {} vs path length {}", self.label, self.m_total, self.path_l1));
        }
        for r in &self.records {
            if r.m_total < r.m_min || r.inefficiency.is_some_and(|i| i < 1.0) {
                v.push(format!("{}: at {} samples M {} M_min {} ineff {:?}", self.label, r.samples_seen, r.m_total, r.m_min, r.inefficiency));
            }
        }
        v
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

fn criterion_1() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut checked, mut mlp_instances) = (0.0f64, 0usize, 0usize);
    while mlp_instances < 100 {
        let (i, h, o) = (rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16));
        let m = init_mlp::<f64>(i, h, o, rng.random()).unwrap();
        let x: Vec<f64> = (0..i).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-2.0..2.0) }).collect();
        if forward_mlp(&m, &x).unwrap().hidden_pre.iter().any(|z| z.abs() <= 1e-4) {
            continue;
        }
        mlp_instances += 1;
        let target = one_hot::<f64>(rng.random_range(0..o), o);
        let (g, _) = backward_mlp(&m, &x, &target).unwrap();
        let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2).copied().collect();
        let loss = |m: &MlpModel<f64>| mse_loss(&forward_mlp(m, &x).unwrap().output, &target).unwrap();
        for (p, &a) in analytic.iter().enumerate() {
            let (mut plus, mut minus) = (m.clone(), m.clone());
            *plus.parameter_mut(p) += GRAD_EPS;
            *minus.parameter_mut(p) -= GRAD_EPS;
            worst = worst.max(rel_err(a, (loss(&plus) - loss(&minus)) / (2.0 * GRAD_EPS)));
            checked += 1;
        }
    }
    for _ in 0..100 {
        let targets = if rng.random_bool(0.5) { ToyTargets::Signed } else { ToyTargets::ZeroOne };
        let w = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let t: f64 = targets.value(rng.random_range(0..2));
        let (g, _) = backward_toy(&LinearToyModel::new(w, targets), &x, t).unwrap();
        let loss = |w: [f64; 2]| (w[0] * x[0] + w[1] * x[1] - t).powi(2);
        for k in 0..2 {
            let (mut plus, mut minus) = (w, w);
            plus[k] += GRAD_EPS;
            minus[k] -= GRAD_EPS;
            worst = worst.max(rel_err(g.w[k], (loss(plus) - loss(minus)) / (2.0 * GRAD_EPS)));
            checked += 1;
        }
    }
    Line {
        id: "1 gradient oracle",
        verdict: verdict(worst <= GRAD_TOL),
        detail: format!("100 MLP + 100 toy instances, {checked} partials, worst rel err {worst:.2e} (tol {GRAD_TOL:.0e})"),
    }
}

fn criterion_2() -> Line {
    let mut cases = 0;
    let mut bad = Vec::new();
    for kind in GateKind::ALL {
        for remembered in [false, true] {
            for correct in [false, true] {
                let mut gate = match (kind, remembered) {
                    (GateKind::Lazy, true) => UpdateGate::lazy_from_ids(2, &[0]).unwrap(),
                    _ => UpdateGate::new(kind, 2),
                };
                let label = 3;
                let predicted = if correct { label } else { 1 };
                let d = gate.decide(0, predicted, label).unwrap();
                let expected = match kind {
                    GateKind::Backprop => true,
                    GateKind::PureLazy => !correct,
                    GateKind::Lazy => remembered || !correct,
                };
                let newly = kind == GateKind::Lazy && !remembered && !correct;
                let sticky = kind != GateKind::Lazy || gate.is_remembered(0) == (remembered || !correct);
                cases += 1;
                if d.update != expected || d.newly_remembered != newly || !sticky {
                    bad.push(format!("{kind} remembered={remembered} correct={correct}"));
                }
            }
        }
    }
    Line {
        id: "2 gate truth table",
        verdict: verdict(bad.is_empty()),
        detail: if bad.is_empty() { format!("{cases} cases exact") } else { bad.join("; ") },
    }
}

struct Mnist {
    train: Dataset<f64>,
    test: Dataset<f64>,
}

fn data_dir(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(default))
}

fn find(dir: &Path, name: &str) -> Option<PathBuf> {
    [dir.join(name), dir.join(format!("{name}.gz"))].into_iter().find(|p| p.is_file())
}

fn load_pair(dir: &Path, names: [&str; 4], transpose: bool) -> std::result::Result<Mnist, String> {
    let paths: Vec<PathBuf> = names
        .iter()
        .map(|n| find(dir, n).ok_or_else(|| format!("{} not found in {}", n, dir.display())))
        .collect::<std::result::Result<_, _>>()?;
    let opts = IdxOptions { transpose, ..IdxOptions::default() };
    let train = load_idx_with(&paths[0], &paths[1], opts).map_err(|e| e.to_string())?;
    let test = load_idx_with(&paths[2], &paths[3], opts).map_err(|e| e.to_string())?;
    Ok(Mnist { train, test })
}

fn mnist_config(rule: GateKind, seed: u64, epochs: usize, stop: Option<f64>) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        stop_test_accuracy: stop,
        eval_train: false,
        ..TrainConfig::mnist(rule)
    }
}

fn run_mnist(config: &TrainConfig, data: &Mnist, gate: Option<UpdateGate>, label: &str, energy: &mut Vec<EnergyTrace>) -> (RunOutcome<f64, MlpModel<f64>>, Audit) {
    let t = Instant::now();
    let mut audit = Audit::default();
    let out = run_experiment_with_gate(config, &data.train, &data.test, gate, &mut audit).expect("mnist run");
    eprintln!(
        "  [{label}] {} records, final test acc {:.4}, {:.0}s",
        audit.records.len(),
        audit.records.last().map_or(f64::NAN, |r| r.test_accuracy),
        t.elapsed().as_secs_f64()
    );
    energy.push(EnergyTrace::of_mlp(label.to_string(), &out, &audit));
    (out, audit)
}

fn criterion_3(data: &Mnist, energy: &mut Vec<EnergyTrace>) -> Line {
    let subset = Mnist {
        train: data.train.head(5000),
        test: data.test.clone(),
    };
    let config = |rule| mnist_config(rule, 11, 2, None);
    let (bp, bp_audit) = run_mnist(&config(GateKind::Backprop), &subset, None, "c3 backprop", energy);
    let all = UpdateGate::lazy_all_remembered(subset.train.len());
    let (lazy, lazy_audit) = run_mnist(&config(GateKind::Lazy), &subset, Some(all), "c3 lazy", energy);
    let strip = |r: &MetricsRecord| MetricsRecord { remembered_fraction: None, ..r.clone() };
    let streams_equal = bp_audit.records.len() == lazy_audit.records.len()
        && bp_audit.records.iter().zip(&lazy_audit.records).all(|(a, b)| strip(a) == strip(b));
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    let params_equal = bits(bp.model.parameters()) == bits(lazy.model.parameters());
    Line {
        id: "3 lazy==backprop",
        verdict: verdict(streams_equal && params_equal),
        detail: format!(
            "5000 samples x 2 epochs: {} records identical={streams_equal}, {} parameters bit-identical={params_equal}",
            bp_audit.records.len(),
            bp.model.parameters().len()
        ),
    }
}

fn criterion_5(energy: &mut Vec<EnergyTrace>) -> Line {
    let data = make_two_clouds::<f64>(&ToyTaskSpec::default()).unwrap();
    let surface = sample_surface(&data, &GridSpec::default(), ToyTargets::Signed).unwrap();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for (k, w0) in preset_initial_conditions().into_iter().enumerate() {
        let id = k + 1;
        let runs: Vec<Trajectory> = GateKind::ALL
            .iter()
            .map(|&rule| trace_run(&TrainConfig::toy(rule), &data, w0, ToyTargets::Signed, id).unwrap())
            .collect();
        let (bp, pl, lz) = (&runs[0], &runs[1], &runs[2]);
        for t in &runs {
            energy.push(EnergyTrace::of_toy(t));
        }

        // pure-lazy: reaches 100% and never moves again
        let first_perfect = pl.points.iter().position(|&p| accuracy_at(&data, p) == 1.0);
        match first_perfect {
            None => problems.push(format!("ic{id}: pure-lazy never reaches 100%")),
            Some(s) if pl.points[s..].iter().any(|p| *p != pl.points[s]) => {
                problems.push(format!("ic{id}: pure-lazy moves after reaching 100% at step {s}"))
            }
            Some(_) => {}
        }
        let end = pl.final_point();
        // pure-lazy halts within one step of the region edge, below grid
        // resolution, so any corner of the enclosing cell counts
        let cell_ok = accuracy_at(&data, end) == 1.0
            && surface
                .enclosing_nodes(end)
                .is_some_and(|nodes| nodes.iter().any(|&(i, j)| surface.accuracy(i, j) == 1.0));
        if !cell_ok {
            problems.push(format!("ic{id}: pure-lazy end {end:?} outside the sampled 100% region"));
        }

        // energy ordering after every presented sample
        let cum = |t: &Trajectory| {
            let mut acc = 0.0;
            t.points.windows(2).map(move |w| {
                acc += (w[1][0] - w[0][0]).abs() + (w[1][1] - w[0][1]).abs();
                acc
            }).collect::<Vec<_>>()
        };
        let (c_bp, c_pl, c_lz) = (cum(bp), cum(pl), cum(lz));
        if let Some(s) = (0..c_bp.len()).find(|&s| !(c_pl[s] <= c_lz[s] && c_lz[s] <= c_bp[s])) {
            problems.push(format!(
                "ic{id}: ordering broken at step {}: pure {:.4} lazy {:.4} bp {:.4}",
                s + 1, c_pl[s], c_lz[s], c_bp[s]
            ));
        }
        let acc_bp = accuracy_at(&data, bp.final_point());
        let acc_pl = accuracy_at(&data, pl.final_point());
        if id == 2 {
            let ms = [bp.m_total, pl.m_total, lz.m_total];
            let (lo, hi) = (ms.iter().cloned().fold(f64::INFINITY, f64::min), ms.iter().cloned().fold(0.0, f64::max));
            if hi > 2.0 * lo {
                problems.push(format!("ic2: energies {ms:?} not within 2x"));
            }
        }
        if id == 3 && acc_bp == acc_pl {
            problems.push(format!("ic3: backprop and pure-lazy both end at accuracy {acc_bp}"));
        }
        summary.push(format!(
            "ic{id} M pure/lazy/bp {:.3}/{:.3}/{:.3} acc bp {acc_bp:.3} pure {acc_pl:.3}",
            pl.m_total, lz.m_total, bp.m_total
        ));
    }
    Line {
        id: "5 toy regimes",
        verdict: verdict(problems.is_empty()),
        detail: if problems.is_empty() { summary.join("; ") } else { problems.join("; ") },
    }
}

/// First record at or above `acc`.
fn first_reaching(records: &[MetricsRecord], acc: f64) -> Option<&MetricsRecord> {
    records.iter().find(|r| r.test_accuracy >= acc)
}

fn epochs_of(r: &MetricsRecord, n_train: usize) -> f64 {
    r.samples_seen as f64 / n_train as f64
}

fn mnist_criteria(data: &Mnist, energy: &mut Vec<EnergyTrace>) -> Vec<Line> {
    let mut lines = vec![criterion_3(data, energy)];
    let n = data.train.len();

    // long reference runs, seed 1
    let (_, bp_audit) = run_mnist(&mnist_config(GateKind::Backprop, 1, LONG_EPOCHS, None), data, None, "backprop 50ep", energy);
    let (lazy, lazy_audit) = run_mnist(&mnist_config(GateKind::Lazy, 1, LONG_EPOCHS, None), data, None, "lazy 50ep", energy);
    let (_pl, pl_audit) = run_mnist(&mnist_config(GateKind::PureLazy, 1, LONG_EPOCHS, None), data, None, "pure-lazy 50ep", energy);

    // 6: backprop reaches the target within the epoch limit for every seed
    let mut reached = Vec::new();
    for &seed in &BACKPROP_SEEDS {
        let hit = if seed == 1 {
            first_reaching(&bp_audit.records, BACKPROP_TARGET).map(|r| epochs_of(r, n))
        } else {
            let c = mnist_config(GateKind::Backprop, seed, BACKPROP_EPOCH_LIMIT, Some(BACKPROP_TARGET));
            let (_, a) = run_mnist(&c, data, None, &format!("backprop seed {seed}"), energy);
            first_reaching(&a.records, BACKPROP_TARGET).map(|r| epochs_of(r, n))
        };
        reached.push(hit.filter(|&e| e <= BACKPROP_EPOCH_LIMIT as f64));
    }
    lines.push(Line {
        id: "6 backprop baseline",
        verdict: verdict(reached.iter().all(Option::is_some)),
        detail: format!(
            "epochs to {BACKPROP_TARGET} test acc (limit {BACKPROP_EPOCH_LIMIT}) for seeds {BACKPROP_SEEDS:?}: {}",
            reached
                .iter()
                .map(|e| e.map_or("not reached".into(), |e| format!("{e:.2}")))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    });

    // 7: parity and memorization
    let bp_final = bp_audit.records.last().unwrap().test_accuracy;
    let lazy_final = lazy_audit.records.last().unwrap().test_accuracy;
    let remembered = lazy.summary.remembered_fraction.unwrap();
    lines.push(Line {
        id: "7 lazy parity",
        verdict: verdict((bp_final - lazy_final).abs() <= PARITY_POINTS && remembered <= MAX_REMEMBERED),
        detail: format!(
            "final test acc lazy {lazy_final:.4} vs backprop {bp_final:.4} (|diff| {:.2} pts, max {:.1}); remembered {remembered:.4} (max {MAX_REMEMBERED})",
            100.0 * (bp_final - lazy_final).abs(),
            100.0 * PARITY_POINTS
        ),
    });

    // 8: update savings at matched accuracy
    let line8 = match (first_reaching(&bp_audit.records, MATCHED_ACCURACY), first_reaching(&lazy_audit.records, MATCHED_ACCURACY)) {
        (Some(b), Some(l)) => {
            let ratio = b.update_count as f64 / l.update_count.max(1) as f64;
            Line {
                id: "8 update savings",
                verdict: verdict(ratio >= MIN_UPDATE_SAVING),
                detail: format!(
                    "at {MATCHED_ACCURACY} test acc: backprop {} updates, lazy {} updates, ratio {ratio:.2} (min {MIN_UPDATE_SAVING})",
                    b.update_count, l.update_count
                ),
            }
        }
        (b, l) => Line {
            id: "8 update savings",
            verdict: Verdict::Fail,
            detail: format!("{MATCHED_ACCURACY} not reached: backprop {} lazy {}", b.is_some(), l.is_some()),
        },
    };
    lines.push(line8);

    // 9: pure-lazy plateau and loss deficit
    let pl_best = pl_audit.records.iter().map(|r| r.test_accuracy).fold(0.0, f64::max);
    let tail = &pl_audit.records[pl_audit.records.len().saturating_sub(10)..];
    let plateau_acc = tail.iter().map(|r| r.test_accuracy).sum::<f64>() / tail.len() as f64;
    let plateau_loss = tail.iter().map(|r| r.test_loss).sum::<f64>() / tail.len() as f64;
    let line9 = match first_reaching(&bp_audit.records, plateau_acc) {
        Some(b) => {
            let ratio = plateau_loss / b.test_loss;
            Line {
                id: "9 pure-lazy deficit",
                verdict: verdict(pl_best < BACKPROP_TARGET && ratio >= MIN_LOSS_RATIO),
                detail: format!(
                    "pure-lazy best acc {pl_best:.4} (< {BACKPROP_TARGET}), plateau acc {plateau_acc:.4} MSE {plateau_loss:.5}; backprop at matched acc MSE {:.5}; ratio {ratio:.2} (min {MIN_LOSS_RATIO})",
                    b.test_loss
                ),
            }
        }
        None => Line {
            id: "9 pure-lazy deficit",
            verdict: Verdict::Fail,
            detail: format!("backprop never reaches the pure-lazy plateau {plateau_acc:.4}"),
        },
    };
    lines.push(line9);

    // coreset: retrain a fresh model on the lazy run's remembered samples
    let ids = lazy.summary.coreset_ids.clone().unwrap();
    let coreset = Mnist {
        train: data.train.select_ids(&ids).unwrap(),
        test: data.test.clone(),
    };
    let (_, core_audit) = run_mnist(&mnist_config(GateKind::Backprop, 1, LONG_EPOCHS, None), &coreset, None, "coreset retrain", energy);
    let core_final = core_audit.records.last().unwrap().test_accuracy;
    lines.push(Line {
        id: "7b coreset retrain",
        verdict: verdict(lazy_final - core_final <= CORESET_GAP),
        detail: format!(
            "{} samples; fresh backprop model {core_final:.4} vs full lazy run {lazy_final:.4} (max gap {:.1} pts)",
            ids.len(),
            100.0 * CORESET_GAP
        ),
    });
    lines
}

fn criterion_10(energy: &mut Vec<EnergyTrace>) -> Line {
    let dir = data_dir("EMNIST_DIR", "/root/data/emnist");
    let names = [
        "emnist-digits-train-images-idx3-ubyte",
        "emnist-digits-train-labels-idx1-ubyte",
        "emnist-digits-test-images-idx3-ubyte",
        "emnist-digits-test-labels-idx1-ubyte",
    ];
    let data = match load_pair(&dir, names, true) {
        Ok(d) => d,
        Err(e) => {
            return Line {
                id: "10 emnist smoke",
                verdict: Verdict::Blocked,
                detail: format!("EMNIST digits unavailable: {e}"),
            }
        }
    };
    let before = energy.len();
    let config = TrainConfig {
        epochs: EMNIST_EPOCHS,
        seed: 1,
        eval_train: false,
        ..TrainConfig::emnist(GateKind::Lazy)
    };
    let (_, audit) = run_mnist(&config, &data, None, "emnist lazy", energy);
    let violations: Vec<String> = energy[before..].iter().flat_map(EnergyTrace::violations).collect();
    Line {
        id: "10 emnist smoke",
        verdict: verdict(violations.is_empty() && !audit.records.is_empty()),
        detail: format!(
            "{} epochs hidden 100: {} records, final test acc {:.4}; energy invariants {}",
            EMNIST_EPOCHS,
            audit.records.len(),
            audit.records.last().map_or(f64::NAN, |r| r.test_accuracy),
            if violations.is_empty() { "hold".to_string() } else { violations.join("; ") }
        ),
    }
}

fn main() {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut energy = Vec::new();
    let emit = |line: Line, lines: &mut Vec<Line>| {
        let tag = match line.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Blocked => "BLOCKED",
        };
        println!("{tag:<7} criterion {:<20} {}", line.id, line.detail);
        lines.push(line);
    };

    emit(criterion_1(), &mut lines);
    emit(criterion_2(), &mut lines);
    let toy = criterion_5(&mut energy);

    let mnist_dir = data_dir("MNIST_DIR", "/root/data/mnist");
    let mnist_names = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];
    let mnist_lines = match load_pair(&mnist_dir, mnist_names, false) {
        Ok(data) => mnist_criteria(&data, &mut energy),
        Err(e) => ["3 lazy==backprop", "6 backprop baseline", "7 lazy parity", "8 update savings", "9 pure-lazy deficit", "7b coreset retrain"]
            .into_iter()
            .map(|id| Line {
                id,
                verdict: Verdict::Blocked,
                detail: format!("MNIST unavailable: {e}"),
            })
            .collect(),
    };
    let mut mnist_lines = mnist_lines.into_iter();
    emit(mnist_lines.next().unwrap(), &mut lines);

    let line10 = criterion_10(&mut energy);
    let violations: Vec<String> = energy.iter().flat_map(EnergyTrace::violations).collect();
    let n_records: usize = energy.iter().map(|e| e.records.len()).sum();
    emit(
        Line {
            id: "4 energy identities",
            verdict: verdict(violations.is_empty()),
            detail: if violations.is_empty() {
                format!("{} runs, {n_records} evaluation points, rel tol {ENERGY_TOL:.0e}", energy.len())
            } else {
                violations.join("; ")
            },
        },
        &mut lines,
    );
    emit(toy, &mut lines);
    for l in mnist_lines {
        emit(l, &mut lines);
    }
    emit(line10, &mut lines);

    let count = |v| lines.iter().filter(|l| l.verdict == v).count();
    println!(
        "acceptance: {} passed, {} failed, {} blocked ({:.0}s)",
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Blocked),
        started.elapsed().as_secs_f64()
    );
    let strict = std::env::var("LAZYPROP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let fatal = lines
        .iter()
        .filter(|l| l.verdict == Verdict::Fail && (strict || EXACT.iter().any(|p| l.id.starts_with(p))))
        .count();
    if fatal > 0 {
        std::process::exit(1);
    }
}
