//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speaker_naming::config::PipelineConfig;
use speaker_naming::constraints::{ConstraintSet, MiTarget};
use speaker_naming::eval::{baseline, weighted_prf, BaselineKind, EvalReport};
use speaker_naming::features::{Modality, ModalityWeights, SimilarityGraph};
use speaker_naming::io::write_predictions;
use speaker_naming::names::{CharacterRoster, Lexicon, NameCluster, NameMention};
use speaker_naming::optimizer::{
    loss_distribution, loss_gender, loss_initial, loss_mi, loss_negative, project_row_simplex, solve_pgd_observed,
    LossWeights, Objective, PredictionMatrix, SolveOutcome, SolverConfig, Termination,
};
use speaker_naming::pipeline::{analyze_dialogue, load_inputs, solve_dialogue_observed, ModelSettings};
use speaker_naming::reference::{classify_reference, RefType, ReferenceRules};
use speaker_naming::srt::parse_srt;
use speaker_naming::synth::{generate, grid_oracle, SynthSpec, CONFIG_FILE, TUNED_LOSS_WEIGHTS};

static SOLVER_RUNS: AtomicUsize = AtomicUsize::new(0);
static ITERATES_CHECKED: AtomicUsize = AtomicUsize::new(0);
static VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

const FEASIBILITY_TOL: f64 = 1e-9;

/// Observer that counts every iterate that leaves the simplex or raises
/// the objective.
fn watcher() -> impl FnMut(usize, &PredictionMatrix, f64) {
    SOLVER_RUNS.fetch_add(1, Ordering::Relaxed);
    let mut last = f64::INFINITY;
    move |_, f, v| {
        ITERATES_CHECKED.fetch_add(1, Ordering::Relaxed);
        if !f.is_row_stochastic(FEASIBILITY_TOL) || v > last {
            VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        }
        last = v;
    }
}

fn solve_checked(obj: &Objective<'_>, cfg: &SolverConfig) -> SolveOutcome {
    solve_pgd_observed(obj, cfg, watcher()).expect("solver runs")
}

// ---- random instances ----------------------------------------------------

struct Instance {
    c: ConstraintSet,
    g: SimilarityGraph,
    name_male: Vec<f64>,
    w: LossWeights,
}

impl Instance {
    fn objective(&self) -> Objective<'_> {
        Objective::with_name_genders(&self.c, &self.g, self.name_male.clone(), self.w).unwrap()
    }

    fn roster(&self) -> CharacterRoster {
        CharacterRoster {
            clusters: self
                .name_male
                .iter()
                .enumerate()
                .map(|(j, &p)| NameCluster {
                    canonical: format!("N{j}"),
                    aliases: [format!("N{j}")].into(),
                    count_first: 1,
                    count_second: 0,
                    count_third: 0,
                    p_male_name: p,
                })
                .collect(),
            prior: self.c.prior.clone(),
        }
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Instance {
    let mut c = ConstraintSet::empty(n, k);
    for i in 0..n {
        if rng.random::<f64>() < 0.35 {
            c.positives.insert((i, rng.random_range(0..k)));
        }
    }
    // Always at least one label, so the label term is live.
    if c.positives.is_empty() {
        c.positives.insert((rng.random_range(0..n), rng.random_range(0..k)));
    }
    for _ in 0..rng.random_range(0..=2 * n) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..k));
        if !c.positives.contains(&(i, j)) {
            c.mi_targets.push(MiTarget {
                instance: i,
                class: j,
                weight: [1.0, 0.5, 1.0 / 3.0][rng.random_range(0..3)],
            });
        }
    }
    c.mi_targets.sort_by(|a, b| {
        (a.instance, a.class)
            .cmp(&(b.instance, b.class))
            .then(a.weight.total_cmp(&b.weight))
    });
    for _ in 0..rng.random_range(0..=n) {
        let cell = (rng.random_range(0..n), rng.random_range(0..k));
        if !c.positives.contains(&cell) {
            c.negatives.insert(cell);
        }
    }
    c.p_male_audio = (0..n)
        .map(|_| if rng.random::<f64>() < 0.2 { 0.5 } else { rng.random() })
        .collect();
    c.prior = random_simplex(rng, k);
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let w = if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random() };
            dense[i * n + j] = w;
            dense[j * n + i] = w;
        }
    }
    let g = SimilarityGraph::from_dense(n, dense).unwrap();
    let name_male = (0..k)
        .map(|_| [0.02, 0.98, 0.5, rng.random()][rng.random_range(0..4)])
        .collect();
    let w = LossWeights::from_array(std::array::from_fn(|_| {
        if rng.random::<f64>() < 0.15 {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        }
    }));
    Instance { c, g, name_male, w }
}

fn random_f(rng: &mut ChaCha8Rng, n: usize, k: usize) -> PredictionMatrix {
    PredictionMatrix::from_rows(&(0..n).map(|_| random_simplex(rng, k)).collect::<Vec<_>>())
}

// ---- criteria ------------------------------------------------------------

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

type TermFn<'a> = Box<dyn Fn(&PredictionMatrix) -> f64 + 'a>;

fn gradient_correctness() -> Verdict {
    const H: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a0d);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let n = 1 + t % 6;
        let k = 1 + (t / 6) % 4;
        let inst = random_instance(&mut rng, n, k);
        let obj = inst.objective();
        // Any point works for a gradient check; leave the simplex on purpose.
        let f = PredictionMatrix::from_rows(
            &(0..n)
                .map(|_| (0..k).map(|_| rng.random_range(-0.5..1.5)).collect())
                .collect::<Vec<_>>(),
        );
        let terms: [TermFn<'_>; 6] = [
            Box::new(|f| loss_initial(f, &inst.c, &inst.g)),
            Box::new(|f| loss_mi(f, &inst.c)),
            Box::new(|f| loss_negative(f, &inst.c)),
            Box::new(|f| loss_gender(f, &inst.c, &inst.name_male)),
            Box::new(|f| loss_distribution(f, &inst.c)),
            Box::new(|f| obj.value(f)),
        ];
        let analytic = obj.term_gradients(&f);
        let total = obj.gradient(&f);
        for (idx, value) in terms.iter().enumerate() {
            let mut fd = vec![0.0; n * k];
            for (e, slot) in fd.iter_mut().enumerate() {
                let mut plus = f.clone();
                let mut minus = f.clone();
                plus.as_mut_slice()[e] += H;
                minus.as_mut_slice()[e] -= H;
                *slot = (value(&plus) - value(&minus)) / (2.0 * H);
            }
            let a = if idx < 5 {
                analytic[idx].as_slice()
            } else {
                total.as_slice()
            };
            worst = worst.max(rel_err(a, &fd));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-5 && elapsed < Duration::from_secs(10),
        format!(
            "worst relative error {worst:.2e} (< 1e-5) over 50 instances, 5 terms + total, {}",
            secs(elapsed)
        ),
    )
}

fn global_optimum() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c1e);
    let shapes = [
        (1, 2),
        (2, 2),
        (3, 2),
        (4, 2),
        (2, 3),
        (3, 3),
        (4, 3),
        (1, 3),
        (4, 1),
        (3, 1),
    ];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut max_oracle_gap = 0.0f64;
    for t in 0..20 {
        let (n, k) = shapes[t % shapes.len()];
        let inst = random_instance(&mut rng, n, k);
        let obj = inst.objective();
        let out = solve_checked(&obj, &SolverConfig::default());
        let oracle = grid_oracle(&inst.c, &inst.g, &inst.roster(), inst.w, 0.05).unwrap();
        worst_gap = worst_gap.max(out.objective - oracle.objective);
        max_oracle_gap = max_oracle_gap.max(oracle.objective - out.objective);
    }
    let elapsed = start.elapsed();
    verdict(
        worst_gap <= 1e-3 && elapsed < Duration::from_secs(60),
        format!(
            "max(solver - grid min) = {worst_gap:.2e} (<= 1e-3) over 20 instances; grid min exceeds solver by up to {max_oracle_gap:.2e}; {}",
            secs(elapsed)
        ),
    )
}

/// Nearest grid point (spacing `1/steps`) of the `k`-simplex to `v`, for k = 2, 3.
fn grid_projection(v: &[f64], steps: usize) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, vec![]);
    match v.len() {
        2 => {
            for a in 0..=steps {
                let p = [a as f64 * h, (steps - a) as f64 * h];
                let d = (p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2);
                if d < best.0 {
                    best = (d, p.to_vec());
                }
            }
        }
        3 => {
            for a in 0..=steps {
                let x = a as f64 * h;
                let dx = (x - v[0]).powi(2);
                if dx >= best.0 {
                    continue;
                }
                for b in 0..=steps - a {
                    let y = b as f64 * h;
                    let z = (steps - a - b) as f64 * h;
                    let d = dx + (y - v[1]).powi(2) + (z - v[2]).powi(2);
                    if d < best.0 {
                        best = (d, vec![x, y, z]);
                    }
                }
            }
        }
        _ => unreachable!("grid projection is for 2 or 3 coordinates"),
    }
    best.1
}

fn projection() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51e);
    let mut worst_grid = 0.0f64;
    for t in 0..1000 {
        let k = 2 + t % 2;
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = project_row_simplex(&v);
        let g = grid_projection(&v, 1000);
        let d = p.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_grid = worst_grid.max(d);
    }
    let mut worst_idem = 0.0f64;
    let mut worst_expansion = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(1..=8);
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (pu, pv) = (project_row_simplex(&u), project_row_simplex(&v));
        let again = project_row_simplex(&pu);
        worst_idem = worst_idem.max(again.iter().zip(&pu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        worst_expansion = worst_expansion.max(dist(&pu, &pv) - dist(&u, &v));
    }
    verdict(
        worst_grid <= 2e-3 && worst_idem <= 1e-12 && worst_expansion <= 1e-12,
        format!(
            "grid deviation {worst_grid:.2e} (<= 2e-3, 1000 inputs); idempotence {worst_idem:.1e}; \
             max ||Pu-Pv|| - ||u-v|| = {worst_expansion:.1e} (1000 pairs); {}",
            secs(start.elapsed())
        ),
    )
}

fn convexity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0e);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..1000 {
        let n = 1 + t % 6;
        let k = 1 + (t / 6) % 4;
        let inst = random_instance(&mut rng, n, k);
        let obj = inst.objective();
        let (f1, f2) = (random_f(&mut rng, n, k), random_f(&mut rng, n, k));
        let s: f64 = rng.random();
        let mut mix = f1.clone();
        for ((m, a), b) in mix.as_mut_slice().iter_mut().zip(f1.as_slice()).zip(f2.as_slice()) {
            *m = s * a + (1.0 - s) * b;
        }
        let excess = obj.value(&mix) - (s * obj.value(&f1) + (1.0 - s) * obj.value(&f2));
        worst = worst.max(excess);
    }
    verdict(
        worst <= 1e-9,
        format!("max F(t f1 + (1-t) f2) - [t F(f1) + (1-t) F(f2)] = {worst:.2e} (<= 1e-9) over 1000 triples"),
    )
}

fn reference_examples() -> Verdict {
    let check = |text: &str, name: &str| {
        let words: Vec<&str> = text.split_whitespace().collect();
        let start = words
            .iter()
            .position(|w| w.trim_matches(|c: char| !c.is_alphanumeric()) == name)
            .expect("name present");
        let m = NameMention {
            segment_pos: 0,
            surface: name.to_string(),
            token_span: (start, start + 1),
            ref_type: None,
        };
        classify_reference(text, &m)
    };
    let got = [
        check("I'm Sheldon", "Sheldon"),
        check("Oh, hi, Penny", "Penny"),
        check("So how did it go with Leslie?", "Leslie"),
    ];
    let want = [RefType::First, RefType::Second, RefType::Third];
    verdict(got == want, format!("got {got:?}, expected {want:?}"))
}

// ---- synthetic benchmark --------------------------------------------------

const BENCH_SEEDS: std::ops::Range<u64> = 0..10;
const ABLATIONS: [&str; 4] = ["mi", "negative", "gender", "distribution"];

#[derive(Default)]
struct Bench {
    all: f64,
    single: f64,
    b3: f64,
    b2: f64,
    b1: f64,
    initial_only: f64,
    /// Initial term plus one other, in [`ABLATIONS`] order.
    plus: [f64; 4],
    max_iterations: usize,
    non_converged: Vec<String>,
    solves: usize,
    elapsed: Duration,
}

fn benchmark() -> Bench {
    let start = Instant::now();
    let mut b = Bench::default();
    let lexicon = Lexicon::builtin();
    let rules = ReferenceRules::default();
    let tuned = LossWeights::from_array(TUNED_LOSS_WEIGHTS);
    for seed in BENCH_SEEDS {
        let movie = generate(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let raw = parse_srt(movie.srt().as_bytes()).unwrap();
        let dialogue = analyze_dialogue(&raw, &lexicon, &rules).unwrap();
        let score = |names: &[String]| weighted_prf(names, &movie.gold, &movie.aliases).unwrap().f_score;
        let mut solve = |label: &str, settings: ModelSettings| {
            let sol = solve_dialogue_observed(&dialogue, &movie.modalities, &movie.gender_probs, &settings, watcher())
                .unwrap();
            b.solves += 1;
            b.max_iterations = b.max_iterations.max(sol.outcome.iterations);
            if sol.outcome.termination != Termination::Converged {
                b.non_converged
                    .push(format!("seed {seed} {label}: {:?}", sol.outcome.termination));
            }
            score(&sol.names)
        };
        let base = ModelSettings {
            loss: tuned,
            ..ModelSettings::default()
        };
        b.all += solve("all", base);
        b.single += solve(
            "acoustic",
            ModelSettings {
                modality_weights: ModalityWeights::only(Modality::Acoustic),
                ..base
            },
        );
        let mut w = [0.0; 5];
        w[0] = TUNED_LOSS_WEIGHTS[0];
        b.initial_only += solve(
            "initial",
            ModelSettings {
                loss: LossWeights::from_array(w),
                ..base
            },
        );
        for (t, name) in ABLATIONS.iter().enumerate() {
            let mut w2 = w;
            w2[t + 1] = TUNED_LOSS_WEIGHTS[t + 1];
            b.plus[t] += solve(
                name,
                ModelSettings {
                    loss: LossWeights::from_array(w2),
                    ..base
                },
            );
        }
        let n = dialogue.n();
        let g = Some(&movie.gender_probs);
        b.b3 += score(&baseline(BaselineKind::B3, &dialogue.roster, n, g, seed).unwrap());
        b.b2 += score(&baseline(BaselineKind::B2, &dialogue.roster, n, g, seed).unwrap());
        b.b1 += score(&baseline(BaselineKind::B1, &dialogue.roster, n, g, seed).unwrap());
    }
    let count = BENCH_SEEDS.count() as f64;
    for v in [
        &mut b.all,
        &mut b.single,
        &mut b.b3,
        &mut b.b2,
        &mut b.b1,
        &mut b.initial_only,
    ] {
        *v /= count;
    }
    for v in &mut b.plus {
        *v /= count;
    }
    b.elapsed = start.elapsed();
    b
}

fn benchmark_ordering(b: &Bench) -> Verdict {
    let ordered = b.all > b.single && b.single > b.b3 && b.b3 > b.b2 && b.b2 > b.b1;
    let margin = b.all - b.b3;
    verdict(
        ordered && margin >= 0.15 && b.elapsed < Duration::from_secs(300),
        format!(
            "mean F: all {:.4} > acoustic {:.4} > B3 {:.4} > B2 {:.4} > B1 {:.4}; all - B3 = {margin:.4} (>= 0.15); {} for the whole benchmark",
            b.all,
            b.single,
            b.b3,
            b.b2,
            b.b1,
            secs(b.elapsed)
        ),
    )
}

fn ablation(b: &Bench) -> Verdict {
    let gains: Vec<f64> = b.plus.iter().map(|p| p - b.initial_only).collect();
    let mi = gains[0];
    let pass = gains[1..].iter().all(|&g| mi > g);
    let listed: Vec<String> = ABLATIONS
        .iter()
        .zip(&gains)
        .map(|(n, g)| format!("+{n} {g:+.4}"))
        .collect();
    verdict(
        pass,
        format!("initial alone {:.4}; gains {}", b.initial_only, listed.join(", ")),
    )
}

fn convergence(b: &Bench) -> Verdict {
    verdict(
        b.non_converged.is_empty() && b.max_iterations <= 2000,
        format!(
            "{} benchmark solves, max {} iterations (<= 2000), not stopped by tolerance: {:?}",
            b.solves, b.max_iterations, b.non_converged
        ),
    )
}

fn end_to_end_determinism() -> Verdict {
    let run = || -> (Vec<u8>, Vec<u8>) {
        let dir = tempfile::tempdir().unwrap();
        let movie = generate(&SynthSpec {
            seed: 42,
            ..SynthSpec::default()
        })
        .unwrap();
        movie.write_to(dir.path()).unwrap();
        let config = PipelineConfig::from_file(&dir.path().join(CONFIG_FILE)).unwrap();
        let inputs = load_inputs(&config).unwrap();
        let sol = solve_dialogue_observed(
            &inputs.dialogue,
            &inputs.modalities,
            &inputs.gender,
            &ModelSettings::from_config(&config),
            watcher(),
        )
        .unwrap();
        let preds = write_predictions(&sol.names);
        std::fs::write(dir.path().join("predictions.csv"), &preds).unwrap();
        let mut report = EvalReport::default();
        report.push(
            config.video.clone(),
            weighted_prf(&sol.names, &movie.gold, &movie.aliases).unwrap(),
        );
        std::fs::write(dir.path().join("report.csv"), report.to_csv()).unwrap();
        (
            std::fs::read(dir.path().join("predictions.csv")).unwrap(),
            std::fs::read(dir.path().join("report.csv")).unwrap(),
        )
    };
    let (a, b) = (run(), run());
    verdict(
        a == b,
        format!(
            "predictions {} bytes, report {} bytes, identical: {}",
            a.0.len(),
            a.1.len(),
            a == b
        ),
    )
}

fn feasibility() -> Verdict {
    let runs = SOLVER_RUNS.load(Ordering::Relaxed);
    let iterates = ITERATES_CHECKED.load(Ordering::Relaxed);
    let bad = VIOLATIONS.load(Ordering::Relaxed);
    verdict(
        bad == 0 && runs > 0,
        format!("{bad} violations over {iterates} iterates of {runs} solver runs"),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = vec![
        ("gradient matches finite differences", gradient_correctness()),
        ("solver reaches the grid optimum", global_optimum()),
        ("simplex projection", projection()),
        ("convexity probe", convexity()),
    ];
    let bench = benchmark();
    results.extend([
        ("synthetic benchmark ordering", benchmark_ordering(&bench)),
        ("ablation: multiple-instance term contributes most", ablation(&bench)),
        ("reference classifier examples", reference_examples()),
        ("convergence within 2000 iterations", convergence(&bench)),
        ("end-to-end determinism", end_to_end_determinism()),
    ]);
    // Last, so it covers every solver run above.
    results.push(("feasibility and monotone descent", feasibility()));

    let mut failed = 0;
    for (name, v) in &results {
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
